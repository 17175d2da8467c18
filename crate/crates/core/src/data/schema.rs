//! Attribute schemas.
//!
//! A [`Schema`] is an ordered list of attributes, each with a role (time,
//! geography, external, socio-economic or preference) and a kind (categorical or
//! numerical). Numerical attributes are discretized into bins by default; bin
//! edges either come from the schema file or are fitted from data by quantiles
//! (see [`Schema::fit`]).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::discretize::{discretize, quantile_edges};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Time,
    Geography,
    External,
    Socio,
    Preference,
}

impl Role {
    pub fn is_conditional(self) -> bool {
        self != Role::Preference
    }
}

/// How a numerical attribute enters the network.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericEncoding {
    /// Discretized into bins and one-hot encoded.
    #[default]
    Binned,
    /// A single real input, affinely scaled from `[first edge, last edge]` to `[-1, 1]`.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical {
        cardinality: usize,
        /// Optional cell labels; label `k` resolves to category `k` on ingestion.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
        /// Categories seen fewer than `min_count` times in the fitting data are
        /// merged into a shared "other" bucket.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_count: Option<usize>,
        /// Fitted map from original category to bucket. Set by [`Schema::fit`].
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buckets: Option<Vec<usize>>,
    },
    Numerical {
        #[serde(
            default,
            skip_serializing_if = "Vec::is_empty",
            serialize_with = "ser_edges",
            deserialize_with = "de_edges"
        )]
        bin_edges: Vec<f64>,
        /// Bin count for quantile fitting when `bin_edges` is not given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_bins: Option<usize>,
        #[serde(default)]
        unit: String,
        #[serde(default)]
        encoding: NumericEncoding,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub role: Role,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

/// One attribute value: a category index or a raw real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Cat(usize),
    Num(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Cat(c) => c as f64,
            Value::Num(x) => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub values: Vec<Value>,
}

impl AttributeSpec {
    pub fn categorical(name: impl Into<String>, role: Role, cardinality: usize) -> Self {
        AttributeSpec {
            name: name.into(),
            role,
            kind: AttributeKind::Categorical {
                cardinality,
                labels: None,
                min_count: None,
                buckets: None,
            },
        }
    }

    pub fn numerical(name: impl Into<String>, role: Role, bin_edges: Vec<f64>, unit: &str) -> Self {
        AttributeSpec {
            name: name.into(),
            role,
            kind: AttributeKind::Numerical {
                bin_edges,
                n_bins: None,
                unit: unit.to_string(),
                encoding: NumericEncoding::Binned,
            },
        }
    }

    pub fn raw_numerical(name: impl Into<String>, role: Role, lo: f64, hi: f64, unit: &str) -> Self {
        AttributeSpec {
            name: name.into(),
            role,
            kind: AttributeKind::Numerical {
                bin_edges: vec![lo, hi],
                n_bins: None,
                unit: unit.to_string(),
                encoding: NumericEncoding::Raw,
            },
        }
    }

    pub fn is_raw_numeric(&self) -> bool {
        matches!(
            self.kind,
            AttributeKind::Numerical {
                encoding: NumericEncoding::Raw,
                ..
            }
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.kind, AttributeKind::Numerical { .. })
    }

    /// Number of categories in the categorical view of this attribute, after
    /// bucketing or binning. `None` for raw numerics and unfitted bins.
    pub fn n_categories(&self) -> Option<usize> {
        match &self.kind {
            AttributeKind::Categorical {
                cardinality,
                buckets,
                ..
            } => Some(match buckets {
                Some(map) => map.iter().max().map_or(*cardinality, |m| m + 1),
                None => *cardinality,
            }),
            AttributeKind::Numerical {
                encoding: NumericEncoding::Raw,
                ..
            } => None,
            AttributeKind::Numerical { bin_edges, .. } => {
                (bin_edges.len() >= 2).then(|| bin_edges.len() - 1)
            }
        }
    }

    /// Width of this attribute's block in an encoded vector.
    pub fn encoded_width(&self) -> Result<usize> {
        if self.is_raw_numeric() {
            return Ok(1);
        }
        self.n_categories()
            .ok_or_else(|| Error::Schema(format!("attribute `{}` has no fitted bin edges", self.name)))
    }

    /// Categorical view of a value: bucketed category or bin index.
    pub fn category_of(&self, value: Value) -> Result<usize> {
        match (&self.kind, value) {
            (
                AttributeKind::Categorical {
                    cardinality,
                    buckets,
                    ..
                },
                Value::Cat(c),
            ) => {
                if c >= *cardinality {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        cardinality: *cardinality,
                    });
                }
                Ok(buckets.as_ref().map_or(c, |map| map[c]))
            }
            (
                AttributeKind::Numerical {
                    encoding: NumericEncoding::Raw,
                    ..
                },
                _,
            ) => Err(Error::NotCategorical(self.name.clone())),
            (AttributeKind::Numerical { bin_edges, .. }, v) => {
                if bin_edges.len() < 2 {
                    return Err(Error::Schema(format!(
                        "attribute `{}` has no fitted bin edges",
                        self.name
                    )));
                }
                Ok(discretize(v.as_f64(), bin_edges))
            }
            (AttributeKind::Categorical { .. }, Value::Num(_)) => Err(Error::InvalidArgument(
                format!("numeric value for categorical attribute `{}`", self.name),
            )),
        }
    }

    /// The value a category decodes to. Bins decode to their midpoint; a
    /// half-infinite bin decodes to its finite edge.
    pub fn representative(&self, category: usize) -> Result<Value> {
        let n = self
            .n_categories()
            .ok_or_else(|| Error::NotCategorical(self.name.clone()))?;
        if category >= n {
            return Err(Error::IndexOutOfRange {
                index: category,
                cardinality: n,
            });
        }
        match &self.kind {
            AttributeKind::Categorical { buckets, .. } => Ok(Value::Cat(match buckets {
                Some(map) => map.iter().position(|&b| b == category).unwrap_or(category),
                None => category,
            })),
            AttributeKind::Numerical { bin_edges, .. } => {
                let (lo, hi) = (bin_edges[category], bin_edges[category + 1]);
                Ok(Value::Num(match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo,
                    (false, true) => hi,
                    (false, false) => 0.0,
                }))
            }
        }
    }

    /// Display label for a category of the categorical view.
    pub fn category_label(&self, category: usize) -> String {
        match &self.kind {
            AttributeKind::Categorical { labels, .. } => {
                let original = match self.representative(category) {
                    Ok(Value::Cat(c)) => c,
                    _ => category,
                };
                labels
                    .as_ref()
                    .and_then(|l| l.get(original).cloned())
                    .unwrap_or_else(|| original.to_string())
            }
            AttributeKind::Numerical { bin_edges, .. } if bin_edges.len() > category + 1 => {
                let (lo, hi) = (bin_edges[category], bin_edges[category + 1]);
                if hi.is_infinite() {
                    format!(">= {lo}")
                } else {
                    format!("[{lo}, {hi})")
                }
            }
            AttributeKind::Numerical { .. } => category.to_string(),
        }
    }

    /// Affine range used by the raw numeric encoding.
    pub(crate) fn raw_range(&self) -> Option<(f64, f64)> {
        match &self.kind {
            AttributeKind::Numerical {
                bin_edges,
                encoding: NumericEncoding::Raw,
                ..
            } if bin_edges.len() >= 2 => Some((bin_edges[0], bin_edges[bin_edges.len() - 1])),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Schema(format!("attribute `{}`: {msg}", self.name)));
        match &self.kind {
            AttributeKind::Categorical {
                cardinality,
                labels,
                buckets,
                ..
            } => {
                if *cardinality == 0 {
                    return bad("categorical cardinality must be at least 1");
                }
                if let Some(labels) = labels {
                    if labels.len() != *cardinality {
                        return bad("label count differs from cardinality");
                    }
                    let distinct: HashSet<&String> = labels.iter().collect();
                    if distinct.len() != labels.len() {
                        return bad("duplicate labels");
                    }
                }
                if let Some(map) = buckets {
                    if map.len() != *cardinality {
                        return bad("bucket map length differs from cardinality");
                    }
                }
            }
            AttributeKind::Numerical {
                bin_edges,
                n_bins,
                encoding,
                ..
            } => {
                if bin_edges.is_empty() {
                    if *encoding == NumericEncoding::Raw {
                        return bad("raw numeric attributes need a [lo, hi] range in bin_edges");
                    }
                    if n_bins.unwrap_or(0) == 0 {
                        return bad("numerical attribute needs bin_edges or n_bins >= 1");
                    }
                } else {
                    if bin_edges.len() < 2 {
                        return bad("bin_edges needs at least two entries");
                    }
                    if bin_edges.iter().any(|e| e.is_nan()) || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
                        return bad("bin_edges must be strictly increasing");
                    }
                    if *encoding == NumericEncoding::Raw
                        && !(bin_edges[0].is_finite() && bin_edges[bin_edges.len() - 1].is_finite())
                    {
                        return bad("raw numeric range must be finite");
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub version: String,
    pub attributes: Vec<AttributeSpec>,
}

impl Schema {
    pub fn new(version: impl Into<String>, attributes: Vec<AttributeSpec>) -> Result<Self> {
        let schema = Schema {
            version: version.into(),
            attributes,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for attr in &self.attributes {
            if !names.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute name `{}`", attr.name)));
            }
            attr.validate()?;
        }
        if !self.attributes.iter().any(|a| a.role == Role::Preference) {
            return Err(Error::Schema("no preference attributes".into()));
        }
        if !self.attributes.iter().any(|a| a.role.is_conditional()) {
            return Err(Error::Schema("no conditional attributes".into()));
        }
        if self.attributes.iter().filter(|a| a.role == Role::Time).count() > 1 {
            return Err(Error::Schema("more than one time attribute".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeSpec> {
        Ok(&self.attributes[self.index_of(name)?])
    }

    pub fn indices_with<F: Fn(Role) -> bool>(&self, pred: F) -> Vec<usize> {
        (0..self.attributes.len())
            .filter(|&i| pred(self.attributes[i].role))
            .collect()
    }

    pub fn preference_indices(&self) -> Vec<usize> {
        self.indices_with(|r| r == Role::Preference)
    }

    pub fn conditional_indices(&self) -> Vec<usize> {
        self.indices_with(Role::is_conditional)
    }

    pub fn time_index(&self) -> Option<usize> {
        self.attributes.iter().position(|a| a.role == Role::Time)
    }

    /// True once every numerical attribute has bin edges.
    pub fn is_fitted(&self) -> bool {
        self.attributes.iter().all(|a| match &a.kind {
            AttributeKind::Numerical { bin_edges, .. } => bin_edges.len() >= 2,
            AttributeKind::Categorical { .. } => true,
        })
    }

    /// Fit quantile bin edges for numerical attributes declared with `n_bins`
    /// only, and frequency buckets for categoricals with `min_count`. Attributes
    /// that already carry edges or buckets are left alone.
    ///
    /// Returns the number of bins lost to duplicate-quantile merging, per
    /// attribute name.
    pub fn fit(&mut self, records: &[Record]) -> Result<Vec<(String, usize)>> {
        if records.is_empty() {
            return Err(Error::Empty("records for schema fitting"));
        }
        let mut merged = Vec::new();
        for (j, attr) in self.attributes.iter_mut().enumerate() {
            match &mut attr.kind {
                AttributeKind::Numerical {
                    bin_edges, n_bins, ..
                } if bin_edges.is_empty() => {
                    let n_bins = n_bins.unwrap_or(1);
                    let values: Vec<f64> = records.iter().map(|r| r.values[j].as_f64()).collect();
                    let fitted = quantile_edges(&values, n_bins);
                    if fitted.merged > 0 {
                        merged.push((attr.name.clone(), fitted.merged));
                    }
                    *bin_edges = fitted.edges;
                }
                AttributeKind::Categorical {
                    cardinality,
                    min_count: Some(min_count),
                    buckets,
                    ..
                } if buckets.is_none() => {
                    let mut counts = vec![0usize; *cardinality];
                    for r in records {
                        if let Value::Cat(c) = r.values[j] {
                            if c < *cardinality {
                                counts[c] += 1;
                            }
                        }
                    }
                    let mut next = 0;
                    let mut map = vec![usize::MAX; *cardinality];
                    for (c, &n) in counts.iter().enumerate() {
                        if n >= *min_count {
                            map[c] = next;
                            next += 1;
                        }
                    }
                    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
                        *m = next;
                    }
                    *buckets = Some(map);
                }
                _ => {}
            }
        }
        self.validate()?;
        Ok(merged)
    }

    /// Check a record against the schema.
    pub fn check_record(&self, record: &Record) -> Result<()> {
        if record.values.len() != self.attributes.len() {
            return Err(Error::Dimension {
                expected: self.attributes.len(),
                actual: record.values.len(),
                context: "record values",
            });
        }
        for (attr, &v) in self.attributes.iter().zip(&record.values) {
            match (&attr.kind, v) {
                (AttributeKind::Categorical { cardinality, .. }, Value::Cat(c)) if c >= *cardinality => {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        cardinality: *cardinality,
                    })
                }
                (AttributeKind::Categorical { .. }, Value::Num(_)) => {
                    return Err(Error::InvalidArgument(format!(
                        "numeric value for categorical attribute `{}`",
                        attr.name
                    )))
                }
                (AttributeKind::Numerical { .. }, Value::Num(x)) if !x.is_finite() => {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite value for `{}`",
                        attr.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Categorical view of the attributes at `indices` for one record.
    pub fn categories(&self, record: &Record, indices: &[usize]) -> Result<Vec<usize>> {
        indices
            .iter()
            .map(|&j| self.attributes[j].category_of(record.values[j]))
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

fn ser_edges<S: Serializer>(edges: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(edges.len()))?;
    for &e in edges {
        if e.is_finite() {
            seq.serialize_element(&e)?;
        } else if e > 0.0 {
            seq.serialize_element("inf")?;
        } else {
            seq.serialize_element("-inf")?;
        }
    }
    seq.end()
}

fn de_edges<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Edge {
        Num(f64),
        Text(String),
    }
    let raw = Vec::<Edge>::deserialize(d)?;
    raw.into_iter()
        .map(|e| match e {
            Edge::Num(x) => Ok(x),
            Edge::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("invalid bin edge `{other}`"))),
            },
        })
        .collect()
}
