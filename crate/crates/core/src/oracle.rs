//! Synthetic data-generating process with exactly known conditionals.
//!
//! A small categorical Bayesian network: every non-time attribute has a
//! conditional probability table over earlier attributes. Optional drifts
//! move probability mass linearly with the year offset `t` on rows matching
//! a condition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{AttributeSpec, Record, Role, Schema, Value};
use crate::error::{Error, Result};
use crate::generator::ConditionProfile;
use crate::metrics::{subset_support, JointHistogram};
use crate::seed;

const ROW_TOL: f64 = 1e-9;

/// Conditional table of one attribute. `rows` is indexed mixed-radix over
/// the parents' categories, first parent slowest; a root has one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub attribute: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Linear drift: at year offset `t`, rows of `attribute` whose record matches
/// every `when` condition gain `t * delta` on `increase` and lose it on
/// `decrease`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub attribute: String,
    #[serde(default)]
    pub when: BTreeMap<String, usize>,
    pub increase: usize,
    pub decrease: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub schema: Schema,
    /// One node per non-time attribute, in a topological order.
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub drifts: Vec<Drift>,
    /// Year offsets `0..n_years` over which drifts must stay valid.
    pub n_years: usize,
}

/// A drift resolved to schema indices: (condition attribute, category)
/// pairs, increased category, decreased category, per-year delta.
type CompiledDrift = (Vec<(usize, usize)>, usize, usize, f64);

struct Compiled {
    /// Schema index of each node's attribute.
    attr: Vec<usize>,
    parents: Vec<Vec<usize>>,
    parent_cards: Vec<Vec<usize>>,
    drifts: Vec<Vec<CompiledDrift>>,
    time: Option<usize>,
}

impl DgpSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DgpSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }

    fn card(&self, j: usize) -> Result<usize> {
        let a = &self.schema.attributes[j];
        match a.n_categories() {
            Some(k) if !a.is_raw_numeric() => Ok(k),
            _ if a.role == Role::Time => Ok(self.n_years),
            _ => Err(Error::NotCategorical(a.name.clone())),
        }
    }

    fn compile(&self) -> Result<Compiled> {
        self.schema.validate()?;
        if self.n_years == 0 {
            return Err(Error::InvalidArgument("n_years must be positive".into()));
        }
        let time = self.schema.time_index();
        if let Some(t) = time {
            let a = &self.schema.attributes[t];
            let ok = match a.raw_range() {
                Some((lo, hi)) => hi >= lo + (self.n_years - 1) as f64,
                None => a.n_categories() == Some(self.n_years),
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "time attribute `{}` must cover {} years",
                    a.name, self.n_years
                )));
            }
        }
        let mut seen = vec![false; self.schema.len()];
        if let Some(t) = time {
            seen[t] = true;
        }
        let mut c = Compiled {
            attr: vec![],
            parents: vec![],
            parent_cards: vec![],
            drifts: vec![],
            time,
        };
        for node in &self.nodes {
            let j = self.schema.index_of(&node.attribute)?;
            if seen[j] {
                return Err(Error::Schema(format!("attribute `{}` defined twice", node.attribute)));
            }
            let card = self.card(j)?;
            let mut ps = vec![];
            let mut cards = vec![];
            for p in &node.parents {
                let k = self.schema.index_of(p)?;
                if !seen[k] {
                    return Err(Error::Schema(format!(
                        "parent `{p}` of `{}` is not defined earlier",
                        node.attribute
                    )));
                }
                ps.push(k);
                cards.push(self.card(k)?);
            }
            let n_rows: usize = cards.iter().product();
            if node.rows.len() != n_rows {
                return Err(Error::Dimension {
                    expected: n_rows,
                    actual: node.rows.len(),
                    context: "conditional table rows",
                });
            }
            for row in &node.rows {
                if row.len() != card {
                    return Err(Error::Dimension {
                        expected: card,
                        actual: row.len(),
                        context: "conditional table row",
                    });
                }
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
                    return Err(Error::Schema(format!("a row of `{}` is not a distribution", node.attribute)));
                }
            }
            seen[j] = true;
            c.attr.push(j);
            c.parents.push(ps);
            c.parent_cards.push(cards);
            c.drifts.push(vec![]);
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Schema(format!(
                "attribute `{}` has no table",
                self.schema.attributes[j].name
            )));
        }
        for d in &self.drifts {
            let n = self
                .nodes
                .iter()
                .position(|x| x.attribute == d.attribute)
                .ok_or_else(|| Error::UnknownAttribute(d.attribute.clone()))?;
            let card = self.card(c.attr[n])?;
            if d.increase >= card || d.decrease >= card || d.increase == d.decrease {
                return Err(Error::Schema(format!("bad drift categories on `{}`", d.attribute)));
            }
            let mut when = vec![];
            for (name, &cat) in &d.when {
                let k = self.schema.index_of(name)?;
                let pos = c.attr[..n].iter().position(|&a| a == k);
                if pos.is_none() && Some(k) != time {
                    return Err(Error::Schema(format!("drift condition `{name}` is not defined before `{}`", d.attribute)));
                }
                when.push((k, cat));
            }
            c.drifts[n].push((when, d.increase, d.decrease, d.delta));
        }
        // drifted rows must stay distributions over the whole year range
        for (n, node) in self.nodes.iter().enumerate() {
            if c.drifts[n].is_empty() {
                continue;
            }
            for t in [0, self.n_years - 1] {
                for row in &node.rows {
                    let mut p = row.clone();
                    for (_, inc, dec, delta) in &c.drifts[n] {
                        p[*inc] += t as f64 * delta;
                        p[*dec] -= t as f64 * delta;
                    }
                    if p.iter().any(|&x| !(-ROW_TOL..=1.0 + ROW_TOL).contains(&x)) {
                        return Err(Error::Schema(format!(
                            "drift on `{}` leaves [0, 1] by year offset {t}",
                            node.attribute
                        )));
                    }
                }
            }
        }
        Ok(c)
    }

    /// Value of the time attribute at year offset `t`: the category index, or
    /// the range start plus `t` for a raw numeric year.
    fn time_value(&self, t: usize) -> Value {
        match self.schema.time_index().and_then(|j| self.schema.attributes[j].raw_range()) {
            Some((lo, _)) => Value::Num(lo + t as f64),
            None => Value::Cat(t),
        }
    }

    fn time_offset(&self, v: Value) -> usize {
        match (v, self.schema.time_index().and_then(|j| self.schema.attributes[j].raw_range())) {
            (Value::Num(x), Some((lo, _))) => (x - lo).round().max(0.0) as usize,
            (v, _) => value_cat(v),
        }
    }
}

fn value_cat(v: Value) -> usize {
    match v {
        Value::Cat(c) => c,
        Value::Num(x) => x as usize,
    }
}

impl Compiled {
    /// Distribution of node `n` given the categories in `cats` (indexed by
    /// schema position) at year offset `t`.
    fn row(&self, spec: &DgpSpec, n: usize, cats: &[usize], t: usize) -> Vec<f64> {
        let idx = self.parents[n]
            .iter()
            .zip(&self.parent_cards[n])
            .fold(0, |acc, (&p, &k)| acc * k + cats[p]);
        let mut row = spec.nodes[n].rows[idx].clone();
        for (when, inc, dec, delta) in &self.drifts[n] {
            if when.iter().all(|&(k, c)| cats[k] == c) {
                row[*inc] += t as f64 * delta;
                row[*dec] -= t as f64 * delta;
            }
        }
        for p in &mut row {
            *p = p.clamp(0.0, 1.0);
        }
        row
    }
}

/// Ancestral sampling of `n_per_year` records for each year offset.
/// Record ids run consecutively over years in the given order.
pub fn generate_dataset(spec: &DgpSpec, n_per_year: usize, years: &[usize], seed_: u64) -> Result<Vec<Record>> {
    let c = spec.compile()?;
    if let Some(&bad) = years.iter().find(|&&t| t >= spec.n_years) {
        return Err(Error::InvalidArgument(format!("year offset {bad} outside 0..{}", spec.n_years)));
    }
    let mut out = Vec::with_capacity(n_per_year * years.len());
    for &t in years {
        let mut rng = seed::derived_rng(seed_, "dgp-year", t as u64);
        for _ in 0..n_per_year {
            let mut cats = vec![0usize; spec.schema.len()];
            let mut values = vec![Value::Cat(0); spec.schema.len()];
            if let Some(ti) = c.time {
                cats[ti] = t;
                values[ti] = spec.time_value(t);
            }
            for n in 0..spec.nodes.len() {
                let row = c.row(spec, n, &cats, t);
                let k = crate::data::sample_category(&row, &mut rng);
                cats[c.attr[n]] = k;
                values[c.attr[n]] = spec.schema.attributes[c.attr[n]].representative(k)?;
            }
            out.push(Record {
                id: out.len() as u64,
                values,
            });
        }
    }
    Ok(out)
}

/// Exact joint distribution of all preference attributes (schema order,
/// row-major) for a conditional profile at year offset `t`, by enumeration.
pub fn exact_conditional(spec: &DgpSpec, profile: &ConditionProfile, t: usize) -> Result<JointHistogram> {
    let c = spec.compile()?;
    let schema = &spec.schema;
    let cond = schema.conditional_indices();
    if profile.values.len() != cond.len() {
        return Err(Error::Dimension {
            expected: cond.len(),
            actual: profile.values.len(),
            context: "profile values",
        });
    }
    let mut cats = vec![0usize; schema.len()];
    for (&j, &v) in cond.iter().zip(&profile.values) {
        cats[j] = if Some(j) == c.time { t } else { schema.attributes[j].category_of(v)? };
    }
    let pref = schema.preference_indices();
    let names: Vec<String> = pref.iter().map(|&j| schema.attributes[j].name.clone()).collect();
    let (_, cards) = subset_support(schema, &names)?;
    let nb: usize = cards.iter().product();
    let pref_nodes: Vec<usize> = (0..spec.nodes.len()).filter(|&n| pref.contains(&c.attr[n])).collect();
    let mut probs = vec![0.0; nb];
    for (b, slot) in probs.iter_mut().enumerate() {
        let mut rest = b;
        for (k, &j) in pref.iter().enumerate().rev() {
            cats[j] = rest % cards[k];
            rest /= cards[k];
        }
        let mut p = 1.0;
        for &n in &pref_nodes {
            p *= c.row(spec, n, &cats, t)[cats[c.attr[n]]];
            if p == 0.0 {
                break;
            }
        }
        *slot = p;
    }
    Ok(JointHistogram {
        subset: names,
        cardinalities: cards,
        frequencies: probs,
        n_source_records: 0,
    })
}

/// Average of the exact conditionals over `profiles`, each at the year
/// offset its time attribute carries.
pub fn exact_mixture(spec: &DgpSpec, profiles: &[ConditionProfile]) -> Result<JointHistogram> {
    if profiles.is_empty() {
        return Err(Error::Empty("profiles"));
    }
    let t_of = |p: &ConditionProfile| -> Result<usize> {
        match spec.schema.time_index() {
            Some(j) => Ok(spec.time_offset(p.get(&spec.schema, &spec.schema.attributes[j].name)?)),
            None => Ok(0),
        }
    };
    let mut acc = exact_conditional(spec, &profiles[0], t_of(&profiles[0])?)?;
    for p in &profiles[1..] {
        let h = exact_conditional(spec, p, t_of(p)?)?;
        for (a, b) in acc.frequencies.iter_mut().zip(&h.frequencies) {
            *a += b;
        }
    }
    let n = profiles.len() as f64;
    acc.frequencies.iter_mut().for_each(|f| *f /= n);
    acc.n_source_records = profiles.len();
    Ok(acc)
}

/// Outer product of the empirical marginals of `subset`.
pub fn baseline_independent<S: AsRef<str>>(schema: &Schema, records: &[Record], subset: &[S]) -> Result<JointHistogram> {
    let (idx, cards) = subset_support(schema, subset)?;
    if records.is_empty() {
        return Err(Error::Empty("records for the baseline"));
    }
    let mut marg: Vec<Vec<f64>> = cards.iter().map(|&k| vec![0.0; k]).collect();
    for r in records {
        for (m, &j) in marg.iter_mut().zip(&idx) {
            m[schema.attributes[j].category_of(r.values[j])?] += 1.0;
        }
    }
    let n = records.len() as f64;
    let nb: usize = cards.iter().product();
    let mut freq = vec![1.0; nb];
    for (b, f) in freq.iter_mut().enumerate() {
        let mut rest = b;
        for (k, m) in marg.iter().enumerate().rev() {
            *f *= m[rest % cards[k]] / n;
            rest /= cards[k];
        }
    }
    Ok(JointHistogram {
        subset: subset.iter().map(|s| s.as_ref().to_string()).collect(),
        cardinalities: cards,
        frequencies: freq,
        n_source_records: records.len(),
    })
}

fn cat(name: &str, role: Role, k: usize) -> AttributeSpec {
    AttributeSpec::categorical(name, role, k)
}

fn node(attribute: &str, parents: &[&str], rows: Vec<Vec<f64>>) -> Node {
    Node {
        attribute: attribute.into(),
        parents: parents.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

/// Names of the shipped specs.
pub const CANNED: [&str; 2] = ["static-corr", "drift-split"];

pub fn canned(name: &str) -> Result<DgpSpec> {
    match name {
        "static-corr" => Ok(static_corr()),
        "drift-split" => Ok(drift_split()),
        other => Err(Error::InvalidArgument(format!("unknown spec `{other}`"))),
    }
}

/// Stationary spec with three conditionals and three strongly dependent
/// preferences.
pub fn static_corr() -> DgpSpec {
    let schema = Schema::new(
        "static-corr",
        vec![
            cat("age", Role::Socio, 3),
            cat("income", Role::Socio, 3),
            cat("urban", Role::Geography, 2),
            cat("car", Role::Preference, 3),
            cat("mode", Role::Preference, 4),
            cat("trips", Role::Preference, 3),
        ],
    )
    .expect("valid schema");
    DgpSpec {
        name: "static-corr".into(),
        schema,
        nodes: vec![
            node("age", &[], vec![vec![0.3, 0.45, 0.25]]),
            node("income", &["age"], vec![
                vec![0.6, 0.3, 0.1],
                vec![0.2, 0.5, 0.3],
                vec![0.4, 0.4, 0.2],
            ]),
            node("urban", &[], vec![vec![0.45, 0.55]]),
            // car | income, urban
            node("car", &["income", "urban"], vec![
                vec![0.5, 0.45, 0.05],
                vec![0.8, 0.18, 0.02],
                vec![0.15, 0.65, 0.2],
                vec![0.45, 0.5, 0.05],
                vec![0.05, 0.45, 0.5],
                vec![0.2, 0.6, 0.2],
            ]),
            // mode (car, transit, bike, walk) | car, urban
            node("mode", &["car", "urban"], vec![
                vec![0.05, 0.35, 0.25, 0.35],
                vec![0.02, 0.25, 0.4, 0.33],
                vec![0.75, 0.1, 0.1, 0.05],
                vec![0.55, 0.2, 0.15, 0.1],
                vec![0.9, 0.04, 0.04, 0.02],
                vec![0.75, 0.1, 0.1, 0.05],
            ]),
            // trips | age, mode
            node("trips", &["age", "mode"], vec![
                vec![0.1, 0.5, 0.4],
                vec![0.2, 0.6, 0.2],
                vec![0.1, 0.3, 0.6],
                vec![0.3, 0.5, 0.2],
                vec![0.1, 0.3, 0.6],
                vec![0.3, 0.5, 0.2],
                vec![0.2, 0.5, 0.3],
                vec![0.4, 0.4, 0.2],
                vec![0.5, 0.35, 0.15],
                vec![0.6, 0.3, 0.1],
                vec![0.5, 0.4, 0.1],
                vec![0.7, 0.25, 0.05],
            ]),
        ],
        drifts: vec![],
        n_years: 1,
    }
}

/// Drift slope of the shipped `drift-split` spec.
pub const DRIFT_SPLIT_DELTA: f64 = 0.06;

/// Five years; individuals with `group = 1` shift `mode` from car (0) to
/// bike (2) by a fixed amount per year, everyone else is stationary.
pub fn drift_split() -> DgpSpec {
    let schema = Schema::new(
        "drift-split",
        vec![
            AttributeSpec::raw_numerical("year", Role::Time, 2006.0, 2010.0, "year"),
            cat("group", Role::Socio, 2),
            cat("age", Role::Socio, 3),
            cat("urban", Role::Geography, 2),
            cat("mode", Role::Preference, 4),
            cat("car", Role::Preference, 3),
            cat("trips", Role::Preference, 3),
        ],
    )
    .expect("valid schema");
    DgpSpec {
        name: "drift-split".into(),
        schema,
        nodes: vec![
            node("group", &[], vec![vec![0.5, 0.5]]),
            node("age", &[], vec![vec![0.3, 0.4, 0.3]]),
            node("urban", &[], vec![vec![0.4, 0.6]]),
            // mode (car, transit, bike, walk) | age, urban
            node("mode", &["age", "urban"], vec![
                vec![0.6, 0.1, 0.05, 0.25],
                vec![0.25, 0.3, 0.3, 0.15],
                vec![0.7, 0.1, 0.05, 0.15],
                vec![0.3, 0.25, 0.3, 0.15],
                vec![0.75, 0.05, 0.05, 0.15],
                vec![0.4, 0.2, 0.2, 0.2],
            ]),
            // car | urban, mode
            node("car", &["urban", "mode"], vec![
                vec![0.05, 0.6, 0.35],
                vec![0.3, 0.6, 0.1],
                vec![0.4, 0.5, 0.1],
                vec![0.35, 0.5, 0.15],
                vec![0.1, 0.7, 0.2],
                vec![0.6, 0.35, 0.05],
                vec![0.65, 0.3, 0.05],
                vec![0.55, 0.4, 0.05],
            ]),
            // trips | mode
            node("trips", &["mode"], vec![
                vec![0.15, 0.45, 0.4],
                vec![0.3, 0.5, 0.2],
                vec![0.35, 0.45, 0.2],
                vec![0.5, 0.4, 0.1],
            ]),
        ],
        drifts: vec![Drift {
            attribute: "mode".into(),
            when: BTreeMap::from([("group".to_string(), 1)]),
            increase: 2,
            decrease: 0,
            delta: DRIFT_SPLIT_DELTA,
        }],
        n_years: 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{cross_tabulate, srmse};

    fn copy_spec() -> DgpSpec {
        DgpSpec {
            name: "copy".into(),
            schema: Schema::new(
                "copy",
                vec![
                    cat("s", Role::Socio, 2),
                    cat("x", Role::Preference, 2),
                    cat("y", Role::Preference, 2),
                ],
            )
            .unwrap(),
            nodes: vec![
                node("s", &[], vec![vec![0.5, 0.5]]),
                node("x", &[], vec![vec![0.5, 0.5]]),
                node("y", &["x"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
            drifts: vec![],
            n_years: 1,
        }
    }

    #[test]
    fn canned_specs_are_valid_and_round_trip() {
        for name in CANNED {
            let spec = canned(name).unwrap();
            spec.validate().unwrap();
            assert_eq!(DgpSpec::from_json(&spec.to_json()).unwrap(), spec);
        }
        assert!(canned("nope").is_err());
    }

    #[test]
    fn generation_basics() {
        let spec = static_corr();
        assert!(generate_dataset(&spec, 0, &[0], 1).unwrap().is_empty());
        let a = generate_dataset(&spec, 500, &[0], 1).unwrap();
        assert_eq!(a, generate_dataset(&spec, 500, &[0], 1).unwrap());
        assert_ne!(a, generate_dataset(&spec, 500, &[0], 2).unwrap());
        for r in &a {
            spec.schema.check_record(r).unwrap();
        }
        assert!(generate_dataset(&spec, 5, &[1], 1).is_err());
    }

    #[test]
    fn empirical_conditionals_match_tables() {
        let spec = static_corr();
        let recs = generate_dataset(&spec, 100_000, &[0], 7).unwrap();
        let h = cross_tabulate(&spec.schema, &recs, &["income", "urban", "car"]).unwrap();
        let rows = &spec.nodes[3].rows;
        for (r, row) in rows.iter().enumerate() {
            let tot: f64 = (0..3).map(|k| h.frequencies[r * 3 + k]).sum();
            for (k, &p) in row.iter().enumerate() {
                let emp = h.frequencies[r * 3 + k] / tot;
                assert!((emp - p).abs() < 0.01, "row {r} cat {k}: {emp} vs {p}");
            }
        }
    }

    #[test]
    fn exact_conditional_sums_to_one_and_matches_samples() {
        let spec = static_corr();
        let profile = ConditionProfile {
            id: 0,
            values: vec![Value::Cat(1), Value::Cat(2), Value::Cat(0)],
        };
        let exact = exact_conditional(&spec, &profile, 0).unwrap();
        assert!((exact.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(exact.n_bins(), 36);
        let recs: Vec<Record> = generate_dataset(&spec, 400_000, &[0], 3)
            .unwrap()
            .into_iter()
            .filter(|r| r.values[..3] == profile.values[..])
            .collect();
        let n = recs.len() as f64;
        assert!(n > 20_000.0);
        let emp = cross_tabulate(&spec.schema, &recs, &exact.subset).unwrap();
        for (e, p) in emp.frequencies.iter().zip(&exact.frequencies) {
            let sigma = (p * (1.0 - p) / n).sqrt();
            assert!((e - p).abs() <= 3.0 * sigma + 1e-12, "{e} vs {p}");
        }
    }

    #[test]
    fn independent_preferences_factorize() {
        let mut spec = copy_spec();
        spec.nodes[2] = node("y", &[], vec![vec![0.3, 0.7]]);
        let p = ConditionProfile {
            id: 0,
            values: vec![Value::Cat(0)],
        };
        let h = exact_conditional(&spec, &p, 0).unwrap();
        assert_eq!(h.frequencies, vec![0.5 * 0.3, 0.5 * 0.7, 0.5 * 0.3, 0.5 * 0.7]);
    }

    #[test]
    fn drift_is_linear_in_year() {
        let spec = drift_split();
        let mk = |g| ConditionProfile {
            id: 0,
            values: vec![Value::Cat(0), Value::Cat(g), Value::Cat(1), Value::Cat(1)],
        };
        let base = spec.nodes[3].rows[3][2];
        for t in 0..5 {
            let h = exact_conditional(&spec, &mk(1), t).unwrap();
            let bike: f64 = h.marginal(0)[2];
            assert!((bike - (base + t as f64 * DRIFT_SPLIT_DELTA)).abs() < 1e-12);
            let h0 = exact_conditional(&spec, &mk(0), t).unwrap();
            assert!((h0.marginal(0)[2] - base).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_drift_slope_matches_delta() {
        let spec = drift_split();
        let n = 40_000;
        let recs = generate_dataset(&spec, n, &[0, 1, 2, 3, 4], 11).unwrap();
        let ys: Vec<f64> = (0..5)
            .map(|t| {
                let sel: Vec<Record> = recs[t * n..(t + 1) * n]
                    .iter()
                    .filter(|r| r.values[1] == Value::Cat(1))
                    .cloned()
                    .collect();
                cross_tabulate(&spec.schema, &sel, &["mode"]).unwrap().frequencies[2]
            })
            .collect();
        let slope = crate::panel::linear_slope(&[0.0, 1.0, 2.0, 3.0, 4.0], &ys).unwrap();
        // per-year sd of a share from ~n/2 draws, propagated to the OLS slope
        let sigma = (0.4 * 0.6 / (n as f64 / 2.0)).sqrt() / 10f64.sqrt();
        assert!((slope - DRIFT_SPLIT_DELTA).abs() < 3.0 * sigma, "slope {slope}");
    }

    #[test]
    fn baseline_on_copy_table() {
        let spec = copy_spec();
        let recs = generate_dataset(&spec, 20_000, &[0], 5).unwrap();
        let base = baseline_independent(&spec.schema, &recs, &["x", "y"]).unwrap();
        assert!((base.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = ConditionProfile {
            id: 0,
            values: vec![Value::Cat(0)],
        };
        let exact = exact_conditional(&spec, &p, 0).unwrap();
        assert_eq!(exact.frequencies, vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(srmse(&exact.frequencies, &exact.frequencies).unwrap(), 0.0);
        // uniform product against the diagonal truth gives exactly 1
        assert_eq!(srmse(&[0.25; 4], &exact.frequencies).unwrap(), 1.0);
        assert!(srmse(&base.frequencies, &exact.frequencies).unwrap() > 0.9);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = copy_spec();
        s.nodes[1].rows[0] = vec![0.5, 0.6];
        assert!(s.validate().is_err());
        let mut s = copy_spec();
        s.nodes.swap(1, 2);
        assert!(s.validate().is_err());
        let mut s = drift_split();
        s.drifts[0].delta = 0.2;
        assert!(s.validate().is_err());
        let mut s = copy_spec();
        s.nodes.pop();
        assert!(s.validate().is_err());
    }
}
