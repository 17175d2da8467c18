//! Super pseudo panel: a fixed base population moved through the years.

use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvae::{train_with_records, CvaeConfig, TrainedModel};
use crate::data::{encode, DecodeMode, Record, Role, Schema, Value};
use crate::error::{Error, Result};
use crate::generator::{generate_population, sample, ConditionProfile};
use crate::metrics::{
    categorical_dispersion, cross_tabulate, srmse_symmetric, subset_support, DispersionMode, JointHistogram,
};
use crate::seed;

/// Per-year values of external attributes for each individual.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalByYear {
    pub attributes: Vec<String>,
    /// Keyed by (individual id, year index into the panel years).
    pub values: BTreeMap<(u64, usize), Vec<Value>>,
}

impl ExternalByYear {
    /// Hold every individual's base-year external values fixed.
    pub fn constant(schema: &Schema, base: &[ConditionProfile], n_years: usize) -> Result<Self> {
        let attributes: Vec<String> = schema
            .indices_with(|r| r == Role::External)
            .into_iter()
            .map(|j| schema.attributes[j].name.clone())
            .collect();
        let mut values = BTreeMap::new();
        for p in base {
            let row = attributes.iter().map(|a| p.get(schema, a)).collect::<Result<Vec<_>>>()?;
            for y in 0..n_years {
                values.insert((p.id, y), row.clone());
            }
        }
        Ok(ExternalByYear { attributes, values })
    }

    /// Parse `individual_id,year,<external attributes...>` where `year`
    /// matches one of the panel years as written by the time attribute.
    pub fn from_csv<R: Read>(reader: R, schema: &Schema, years: &[Value]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::HeaderMismatch(format!("missing column `{name}`")))
        };
        let (id_col, year_col) = (col("individual_id")?, col("year")?);
        let attributes: Vec<String> = schema
            .indices_with(|r| r == Role::External)
            .into_iter()
            .map(|j| schema.attributes[j].name.clone())
            .collect();
        let cols = attributes.iter().map(|a| col(a)).collect::<Result<Vec<_>>>()?;
        let t = schema.time_index();
        let year_labels: Vec<String> = years
            .iter()
            .map(|&v| match t {
                Some(t) => crate::data::format_value(schema, t, v),
                None => format!("{}", v.as_f64()),
            })
            .collect();
        let mut values = BTreeMap::new();
        for row in rdr.records() {
            let row = row?;
            let id: u64 = row[id_col]
                .parse()
                .map_err(|_| Error::Panel(format!("bad individual id `{}`", &row[id_col])))?;
            let Some(y) = year_labels.iter().position(|l| l == &row[year_col]) else {
                continue;
            };
            let mut vals = Vec::with_capacity(cols.len());
            for (a, &c) in attributes.iter().zip(&cols) {
                vals.push(parse_value(schema, a, &row[c])?);
            }
            values.insert((id, y), vals);
        }
        Ok(ExternalByYear { attributes, values })
    }
}

fn parse_value(schema: &Schema, attribute: &str, cell: &str) -> Result<Value> {
    let spec = schema.attribute(attribute)?;
    let bad = || Error::Panel(format!("bad value `{cell}` for `{attribute}`"));
    if spec.is_numerical() {
        return cell.parse::<f64>().map(Value::Num).map_err(|_| bad());
    }
    if let crate::data::AttributeKind::Categorical {
        labels: Some(labels), ..
    } = &spec.kind
    {
        if let Some(k) = labels.iter().position(|l| l == cell) {
            return Ok(Value::Cat(k));
        }
    }
    cell.parse::<usize>().map(Value::Cat).map_err(|_| bad())
}

/// Distribution estimates for one individual in one year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelCell {
    pub individual: u64,
    pub year: usize,
    /// Marginals of every categorical or binned preference attribute, in
    /// preference order (empty for raw numerics).
    pub marginals: Vec<Vec<f64>>,
    /// First and second moments of each numerical preference attribute
    /// (bin representatives for binned ones); `None` for plain categoricals.
    pub moments: Vec<Option<(f64, f64)>>,
    /// Joint over the panel subset.
    pub joint: JointHistogram,
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelCube {
    pub individuals: Vec<ConditionProfile>,
    pub years: Vec<Value>,
    pub r: usize,
    /// Preference attributes in schema order.
    pub preferences: Vec<String>,
    pub subset: Vec<String>,
    /// Row-major over (individual, year).
    pub cells: Vec<PanelCell>,
    pub external: ExternalByYear,
}

impl PanelCube {
    pub fn cell(&self, individual: usize, year: usize) -> &PanelCell {
        &self.cells[individual * self.years.len() + year]
    }

    pub fn year_index(&self, year: Value) -> Option<usize> {
        self.years.iter().position(|&y| y == year)
    }
}

/// Seed of one panel cell, keyed on the year value rather than its position
/// so a panel over a subset of years reproduces the same cells.
pub fn cell_seed(master: u64, individual: u64, year: Value) -> u64 {
    let key = match year {
        Value::Cat(k) => k as u64,
        Value::Num(x) => x.to_bits(),
    };
    seed::derive(seed::derive(master, "panel", individual), "year", key)
}

/// Condition each base individual on every year's time and external values
/// (socio and geography held at base-year values), draw `r` preference
/// vectors, and store the resulting distribution estimates.
pub fn build_panel<S: AsRef<str> + Sync>(
    model: &TrainedModel,
    base: &[ConditionProfile],
    years: &[Value],
    external: &ExternalByYear,
    r: usize,
    subset: &[S],
    seed_: u64,
) -> Result<PanelCube> {
    let schema = &model.schema;
    if base.is_empty() {
        return Err(Error::Empty("base population"));
    }
    if years.is_empty() {
        return Err(Error::Empty("panel years"));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("draws per cell must be positive".into()));
    }
    let time = schema
        .time_index()
        .map(|t| schema.attributes[t].name.clone())
        .ok_or_else(|| Error::Panel("schema has no time attribute".into()))?;
    let ext_attrs = schema.indices_with(|r| r == Role::External);
    if ext_attrs.len() != external.attributes.len() {
        return Err(Error::Panel("external table does not list every external attribute".into()));
    }
    subset_support(schema, subset)?;
    let prefs = schema.preference_indices();
    let jobs: Vec<(usize, usize)> = (0..base.len())
        .flat_map(|i| (0..years.len()).map(move |y| (i, y)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, y)| {
            let mut p = base[i].clone();
            p.set(schema, &time, years[y])?;
            let ext = external.values.get(&(p.id, y)).ok_or_else(|| {
                Error::Panel(format!("no external values for individual {} in year {y}", p.id))
            })?;
            for (a, &v) in external.attributes.iter().zip(ext) {
                p.set(schema, a, v)?;
            }
            let draws = sample(model, &p, r, cell_seed(seed_, p.id, years[y]), DecodeMode::Sample)?;
            let recs = draws.records(schema, &p);
            let mut marginals = Vec::with_capacity(prefs.len());
            let mut moments = Vec::with_capacity(prefs.len());
            for &j in &prefs {
                let a = &schema.attributes[j];
                if a.is_raw_numeric() {
                    marginals.push(vec![]);
                } else {
                    marginals.push(cross_tabulate(schema, &recs, &[a.name.as_str()])?.frequencies);
                }
                if a.is_numerical() {
                    let mut xs = recs.iter().map(|rec| numeric_value(a, rec.values[j]));
                    let (s1, s2) = xs.try_fold((0.0, 0.0), |(a1, a2), x| -> Result<(f64, f64)> {
                        let x = x?;
                        Ok((a1 + x, a2 + x * x))
                    })?;
                    moments.push(Some((s1 / r as f64, s2 / r as f64)));
                } else {
                    moments.push(None);
                }
            }
            Ok(PanelCell {
                individual: p.id,
                year: y,
                marginals,
                moments,
                joint: cross_tabulate(schema, &recs, subset)?,
                extrapolated: draws.extrapolated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PanelCube {
        individuals: base.to_vec(),
        years: years.to_vec(),
        r,
        preferences: prefs.iter().map(|&j| schema.attributes[j].name.clone()).collect(),
        subset: subset.iter().map(|s| s.as_ref().to_string()).collect(),
        cells,
        external: external.clone(),
    })
}

/// Numeric reading of a value: raw values as-is, binned values at their
/// bin representative.
fn numeric_value(attr: &crate::data::AttributeSpec, v: Value) -> Result<f64> {
    if attr.is_raw_numeric() {
        return Ok(v.as_f64());
    }
    Ok(attr.representative(attr.category_of(v)?)?.as_f64())
}

/// Restriction of individuals by their base-year conditional values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: String,
    /// Accepted categories.
    pub categories: Vec<usize>,
}

impl Condition {
    pub fn matches(&self, schema: &Schema, profile: &ConditionProfile) -> Result<bool> {
        let a = schema.attribute(&self.attribute)?;
        let c = a.category_of(profile.get(schema, &self.attribute)?)?;
        Ok(self.categories.contains(&c))
    }
}

pub fn matches_all(schema: &Schema, profile: &ConditionProfile, conditions: &[Condition]) -> Result<bool> {
    for c in conditions {
        if !c.matches(schema, profile)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrendSeries {
    /// `probabilities[year][category]`.
    Categorical { probabilities: Vec<Vec<f64>> },
    /// Pooled mean and standard deviation per year.
    Numeric { mean: Vec<f64>, std: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub attribute: String,
    pub years: Vec<Value>,
    pub n_individuals: usize,
    pub series: TrendSeries,
}

/// Per-year aggregate of one preference attribute over the individuals that
/// satisfy every condition. Each individual contributes its R draws, so the
/// result is the draw-weighted mixture of the individual distributions.
pub fn aggregate_trend(cube: &PanelCube, schema: &Schema, attribute: &str, conditions: &[Condition]) -> Result<Trend> {
    let k = cube
        .preferences
        .iter()
        .position(|p| p == attribute)
        .ok_or_else(|| Error::InvalidArgument(format!("`{attribute}` is not a preference attribute")))?;
    let mut members = vec![];
    for (i, p) in cube.individuals.iter().enumerate() {
        if matches_all(schema, p, conditions)? {
            members.push(i);
        }
    }
    if members.is_empty() {
        return Err(Error::Panel("condition matches no individuals".into()));
    }
    let n = members.len() as f64;
    let ny = cube.years.len();
    let numeric = schema.attribute(attribute)?.is_numerical();
    let series = if numeric {
        let mut mean = vec![0.0; ny];
        let mut std = vec![0.0; ny];
        for y in 0..ny {
            let (mut s1, mut s2) = (0.0, 0.0);
            for &i in &members {
                let (m1, m2) = cube.cell(i, y).moments[k].expect("numerical attribute has moments");
                s1 += m1;
                s2 += m2;
            }
            mean[y] = s1 / n;
            std[y] = (s2 / n - mean[y] * mean[y]).max(0.0).sqrt();
        }
        TrendSeries::Numeric { mean, std }
    } else {
        let width = cube.cell(members[0], 0).marginals[k].len();
        let mut probabilities = vec![vec![0.0; width]; ny];
        for (y, row) in probabilities.iter_mut().enumerate() {
            for &i in &members {
                for (a, b) in row.iter_mut().zip(&cube.cell(i, y).marginals[k]) {
                    *a += b;
                }
            }
            row.iter_mut().for_each(|p| *p /= n);
        }
        TrendSeries::Categorical { probabilities }
    };
    Ok(Trend {
        attribute: attribute.to_string(),
        years: cube.years.clone(),
        n_individuals: members.len(),
        series,
    })
}

/// Ordinary least squares slope of `ys` on `xs`.
pub fn linear_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("slope needs two or more paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    crate::metrics::mean_std(xs).1.powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoverReport {
    /// `(individual id, distance)` in ascending order of (distance, id).
    pub distances: Vec<(u64, f64)>,
    pub slow_ids: Vec<u64>,
    pub fast_ids: Vec<u64>,
    /// Largest slow distance and smallest fast distance.
    pub decile_edges: (f64, f64),
}

impl MoverReport {
    pub fn group_of(&self, id: u64) -> &'static str {
        if self.fast_ids.contains(&id) {
            "fast"
        } else if self.slow_ids.contains(&id) {
            "slow"
        } else {
            "middle"
        }
    }
}

/// SRMSE between each individual's joint estimates in two years; the lowest
/// decile are slow movers, the highest decile fast movers.
pub fn classify_movers(cube: &PanelCube, t_start: usize, t_end: usize, min_r: usize) -> Result<MoverReport> {
    let ny = cube.years.len();
    if t_start >= ny || t_end >= ny {
        return Err(Error::Panel("mover years are not in the cube".into()));
    }
    if cube.r < min_r {
        return Err(Error::Panel(format!(
            "R = {} is below the floor of {min_r} draws per cell",
            cube.r
        )));
    }
    let mut distances = (0..cube.individuals.len())
        .map(|i| {
            let (a, b) = (cube.cell(i, t_start), cube.cell(i, t_end));
            Ok((cube.individuals[i].id, srmse_symmetric(&a.joint.frequencies, &b.joint.frequencies)?))
        })
        .collect::<Result<Vec<_>>>()?;
    distances.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let k = distances.len() / 10;
    let n = distances.len();
    let slow_ids: Vec<u64> = distances[..k].iter().map(|d| d.0).collect();
    let fast_ids: Vec<u64> = distances[n - k..].iter().map(|d| d.0).collect();
    let decile_edges = if k > 0 {
        (distances[k - 1].1, distances[n - k].1)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(MoverReport {
        distances,
        slow_ids,
        fast_ids,
        decile_edges,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMarginal {
    pub attribute: String,
    pub frequencies: Vec<f64>,
    /// Category ranks by frequency (1 = mode), ties broken by category.
    pub ranks: Vec<usize>,
}

impl GroupMarginal {
    pub fn mode(&self) -> usize {
        self.ranks.iter().position(|&r| r == 1).unwrap_or(0)
    }
}

/// Marginals of every categorical socio attribute over the base individuals
/// with the given ids.
pub fn group_marginals(schema: &Schema, base: &[ConditionProfile], ids: &[u64]) -> Result<Vec<GroupMarginal>> {
    if ids.is_empty() {
        return Err(Error::Empty("group ids"));
    }
    let members: Vec<&ConditionProfile> = ids
        .iter()
        .map(|id| {
            base.iter()
                .find(|p| p.id == *id)
                .ok_or_else(|| Error::Panel(format!("individual {id} is not in the base population")))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![];
    for j in schema.indices_with(|r| r == Role::Socio) {
        let a = &schema.attributes[j];
        let Some(k) = a.n_categories().filter(|_| !a.is_raw_numeric()) else {
            continue;
        };
        let mut f = vec![0.0; k];
        for p in &members {
            f[a.category_of(p.get(schema, &a.name)?)?] += 1.0;
        }
        f.iter_mut().for_each(|x| *x /= members.len() as f64);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&x, &y| f[y].total_cmp(&f[x]).then(x.cmp(&y)));
        let mut ranks = vec![0; k];
        for (r, &c) in order.iter().enumerate() {
            ranks[c] = r + 1;
        }
        out.push(GroupMarginal {
            attribute: a.name.clone(),
            frequencies: f,
            ranks,
        });
    }
    Ok(out)
}

/// Area under the ROC curve of `scores` for separating `positive` items,
/// with ties counted as one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|p| *p.1).map(|p| *p.0).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|p| !*p.1).map(|p| *p.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("one of the classes"));
    }
    let mut s = 0.0;
    for &a in &pos {
        for &b in &neg {
            s += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(s / (pos.len() * neg.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticKind {
    /// Mean of a numerical attribute.
    Mean,
    /// Share of one category.
    Share { category: usize },
    /// Entropy or `1 - sum(p^2)` of the attribute's marginal.
    Dispersion { mode: DispersionMode },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticSpec {
    pub name: String,
    pub attribute: String,
    #[serde(flatten)]
    pub kind: StatisticKind,
    /// Cohort restriction; empty means everyone.
    #[serde(default)]
    pub cohort: Vec<Condition>,
}

fn statistic(schema: &Schema, records: &[&Record], spec: &StatisticSpec) -> Result<Option<f64>> {
    let j = schema.index_of(&spec.attribute)?;
    let a = &schema.attributes[j];
    let mut sel = Vec::with_capacity(records.len());
    for r in records {
        let p = ConditionProfile::from_record(schema, r);
        if matches_all(schema, &p, &spec.cohort)? {
            sel.push(*r);
        }
    }
    if sel.is_empty() {
        return Ok(None);
    }
    let n = sel.len() as f64;
    Ok(Some(match &spec.kind {
        StatisticKind::Mean => {
            if !a.is_numerical() {
                return Err(Error::InvalidArgument(format!("mean of categorical `{}`", a.name)));
            }
            let mut s = 0.0;
            for r in &sel {
                s += numeric_value(a, r.values[j])?;
            }
            s / n
        }
        StatisticKind::Share { category } => {
            let mut hits = 0usize;
            for r in &sel {
                hits += usize::from(a.category_of(r.values[j])? == *category);
            }
            hits as f64 / n
        }
        StatisticKind::Dispersion { mode } => {
            let k = a.n_categories().ok_or_else(|| Error::NotCategorical(a.name.clone()))?;
            let mut f = vec![0.0; k];
            for r in &sel {
                f[a.category_of(r.values[j])?] += 1.0 / n;
            }
            categorical_dispersion(&f, *mode)
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Synthetic draws per original record in each replicate.
    pub draws_per_record: usize,
    pub statistics: Vec<StatisticSpec>,
}

/// Mean and standard deviation across replicates of one statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub statistic: String,
    /// Time value, or `None` for the pooled data.
    pub year: Option<f64>,
    /// `model` or `data`.
    pub source: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub diverged: Vec<usize>,
    pub rows: Vec<BootstrapRow>,
}

type ReplicateValues = BTreeMap<(usize, Option<u64>, &'static str), f64>;

fn year_groups<'a>(schema: &Schema, records: &'a [Record]) -> Vec<(Option<f64>, Vec<&'a Record>)> {
    let mut groups: Vec<(Option<f64>, Vec<&Record>)> = vec![(None, records.iter().collect())];
    if let Some(t) = schema.time_index() {
        let mut by: BTreeMap<u64, Vec<&Record>> = BTreeMap::new();
        for r in records {
            by.entry(r.values[t].as_f64().to_bits()).or_default().push(r);
        }
        let mut keyed: Vec<(f64, Vec<&Record>)> = by.into_iter().map(|(k, v)| (f64::from_bits(k), v)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        groups.extend(keyed.into_iter().map(|(k, v)| (Some(k), v)));
    }
    groups
}

fn replicate_values(
    schema: &Schema,
    records: &[Record],
    stats: &[StatisticSpec],
    source: &'static str,
    out: &mut ReplicateValues,
) -> Result<()> {
    for (year, group) in year_groups(schema, records) {
        for (s, spec) in stats.iter().enumerate() {
            if let Some(v) = statistic(schema, &group, spec)? {
                out.insert((s, year.map(f64::to_bits), source), v);
            }
        }
    }
    Ok(())
}

/// Resample the data with replacement `B` times; for each resample, refit a
/// model and compute the statistics on its synthetic output (model
/// bootstrap) and on the resample itself (data bootstrap).
pub fn bootstrap(
    records: &[Record],
    schema: &Schema,
    model_config: &CvaeConfig,
    config: &BootstrapConfig,
    seed_: u64,
) -> Result<BootstrapSummary> {
    if config.replicates < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least two replicates".into()));
    }
    if records.is_empty() {
        return Err(Error::Empty("records to bootstrap"));
    }
    let profiles: Vec<ConditionProfile> = records.iter().map(|r| ConditionProfile::from_record(schema, r)).collect();
    let runs: Vec<(usize, Option<ReplicateValues>)> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::derived_rng(seed_, "bootstrap", b as u64);
            let resample: Vec<Record> = (0..records.len())
                .map(|_| records[rng.random_range(0..records.len())].clone())
                .collect();
            let data = encode(&resample, schema)?;
            let cfg = CvaeConfig {
                seed: seed::derive(seed_, "bootstrap-train", b as u64),
                ..model_config.clone()
            };
            let model = match train_with_records(schema, &data, None, &cfg, Some(&resample)) {
                Ok(m) => m,
                Err(Error::Diverged { .. }) => return Ok((b, None)),
                Err(e) => return Err(e),
            };
            let synth: Vec<Record> = generate_population(
                &model,
                &profiles,
                config.draws_per_record,
                seed::derive(seed_, "bootstrap-sample", b as u64),
                DecodeMode::Sample,
            )?
            .into_iter()
            .map(|s| s.record)
            .collect();
            let mut vals = ReplicateValues::new();
            replicate_values(schema, &synth, &config.statistics, "model", &mut vals)?;
            replicate_values(schema, &resample, &config.statistics, "data", &mut vals)?;
            Ok((b, Some(vals)))
        })
        .collect::<Result<_>>()?;
    let diverged: Vec<usize> = runs.iter().filter(|r| r.1.is_none()).map(|r| r.0).collect();
    let survivors: Vec<ReplicateValues> = runs.into_iter().filter_map(|r| r.1).collect();
    if survivors.len() < 2 {
        return Err(Error::AllDiverged(diverged.len()));
    }
    let mut pooled: BTreeMap<(usize, Option<u64>, &'static str), Vec<f64>> = BTreeMap::new();
    for s in &survivors {
        for (k, &v) in s {
            pooled.entry(*k).or_default().push(v);
        }
    }
    let mut rows: Vec<BootstrapRow> = pooled
        .into_iter()
        .map(|((s, year, source), vals)| {
            let (mean, std) = crate::metrics::mean_std(&vals);
            BootstrapRow {
                statistic: config.statistics[s].name.clone(),
                year: year.map(f64::from_bits),
                source: source.to_string(),
                n: vals.len(),
                mean,
                std,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.statistic.as_str(), a.source.as_str())
            .cmp(&(b.statistic.as_str(), b.source.as_str()))
            .then(a.year.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.year.unwrap_or(f64::NEG_INFINITY)))
    });
    Ok(BootstrapSummary {
        replicates: config.replicates,
        diverged,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{drift_split, generate_dataset};

    fn setup() -> (TrainedModel, Vec<Record>) {
        let spec = drift_split();
        let recs = generate_dataset(&spec, 300, &[0, 1, 2, 3, 4], 1).unwrap();
        let data = encode(&recs, &spec.schema).unwrap();
        let cfg = CvaeConfig {
            hidden_layers: vec![16],
            latent_dim: 2,
            epochs: 2,
            ..CvaeConfig::default()
        };
        (train_with_records(&spec.schema, &data, None, &cfg, Some(&recs)).unwrap(), recs)
    }

    fn base(model: &TrainedModel, recs: &[Record], n: usize) -> Vec<ConditionProfile> {
        recs[..n].iter().map(|r| ConditionProfile::from_record(&model.schema, r)).collect()
    }

    fn years() -> Vec<Value> {
        (0..5).map(|t| Value::Num(2006.0 + t as f64)).collect()
    }

    #[test]
    fn single_cell_with_one_draw_is_degenerate() {
        let (m, recs) = setup();
        let b = base(&m, &recs, 1);
        let ext = ExternalByYear::constant(&m.schema, &b, 1).unwrap();
        let cube = build_panel(&m, &b, &[Value::Num(2008.0)], &ext, 1, &["mode", "car"], 4).unwrap();
        assert_eq!(cube.cells.len(), 1);
        let f = &cube.cells[0].joint.frequencies;
        assert_eq!(f.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn panel_is_deterministic_and_trend_is_the_mixture() {
        let (m, recs) = setup();
        let b = base(&m, &recs, 20);
        let ext = ExternalByYear::constant(&m.schema, &b, 5).unwrap();
        let a = build_panel(&m, &b, &years(), &ext, 50, &["mode"], 9).unwrap();
        assert_eq!(a, build_panel(&m, &b, &years(), &ext, 50, &["mode"], 9).unwrap());
        let trend = aggregate_trend(&a, &m.schema, "mode", &[]).unwrap();
        let TrendSeries::Categorical { probabilities } = &trend.series else {
            panic!("categorical expected");
        };
        // pool every draw of every individual in year 3 directly
        let mut pooled = vec![];
        for p in &b {
            let mut q = p.clone();
            q.set(&m.schema, "year", Value::Num(2009.0)).unwrap();
            let d = sample(&m, &q, 50, cell_seed(9, p.id, Value::Num(2009.0)), DecodeMode::Sample).unwrap();
            pooled.extend(d.records(&m.schema, &q));
        }
        let direct = cross_tabulate(&m.schema, &pooled, &["mode"]).unwrap();
        for (x, y) in probabilities[3].iter().zip(&direct.frequencies) {
            assert!((x - y).abs() < 1e-12);
        }
        let cond = [Condition {
            attribute: "group".into(),
            categories: vec![7],
        }];
        assert!(aggregate_trend(&a, &m.schema, "mode", &cond).is_err());
        assert!(aggregate_trend(&a, &m.schema, "age", &[]).is_err());
    }

    #[test]
    fn missing_external_values_are_an_error() {
        let (m, recs) = setup();
        let b = base(&m, &recs, 3);
        let ext = ExternalByYear {
            attributes: vec![],
            values: BTreeMap::new(),
        };
        assert!(build_panel(&m, &b, &years(), &ext, 5, &["mode"], 0).is_err());
    }

    #[test]
    fn mover_deciles() {
        let (m, recs) = setup();
        let b = base(&m, &recs, 100);
        let ext = ExternalByYear::constant(&m.schema, &b, 5).unwrap();
        let cube = build_panel(&m, &b, &years(), &ext, 20, &["mode", "trips"], 2).unwrap();
        let same = classify_movers(&cube, 1, 1, 10).unwrap();
        assert!(same.distances.iter().all(|d| d.1 == 0.0));
        assert_eq!(same.slow_ids, (0..10).collect::<Vec<u64>>());
        assert_eq!(same.fast_ids, (90..100).collect::<Vec<u64>>());
        let rep = classify_movers(&cube, 0, 4, 10).unwrap();
        assert_eq!((rep.slow_ids.len(), rep.fast_ids.len()), (10, 10));
        assert!(rep.decile_edges.0 <= rep.decile_edges.1);
        assert!(rep.slow_ids.iter().all(|id| !rep.fast_ids.contains(id)));
        let back = classify_movers(&cube, 4, 0, 10).unwrap();
        assert_eq!(rep.distances, back.distances);
        assert!(classify_movers(&cube, 0, 4, 21).is_err());
    }

    #[test]
    fn group_marginals_of_everyone_match_population() {
        let (m, recs) = setup();
        let b = base(&m, &recs, 200);
        let ids: Vec<u64> = b.iter().map(|p| p.id).collect();
        let g = group_marginals(&m.schema, &b, &ids).unwrap();
        assert_eq!(g.iter().map(|x| x.attribute.as_str()).collect::<Vec<_>>(), ["group", "age"]);
        let pop: Vec<Record> = recs[..200].to_vec();
        for x in &g {
            let f = crate::metrics::marginals(&m.schema, &pop, &x.attribute).unwrap();
            assert_eq!(x.frequencies, f);
            assert!((x.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(x.ranks.iter().filter(|&&r| r == 1).count(), 1);
        }
        assert!(group_marginals(&m.schema, &b, &[]).is_err());
    }

    #[test]
    fn auc_and_slope_helpers() {
        assert_eq!(auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert!((linear_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(linear_slope(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn bootstrap_constant_statistic_has_zero_spread() {
        let spec = drift_split();
        let mut recs = generate_dataset(&spec, 60, &[0, 1], 3).unwrap();
        for r in &mut recs {
            r.values[2] = Value::Cat(1);
        }
        let cfg = CvaeConfig {
            hidden_layers: vec![8],
            latent_dim: 2,
            epochs: 1,
            ..CvaeConfig::default()
        };
        let bc = BootstrapConfig {
            replicates: 3,
            draws_per_record: 1,
            statistics: vec![
                StatisticSpec {
                    name: "age1".into(),
                    attribute: "age".into(),
                    kind: StatisticKind::Share { category: 1 },
                    cohort: vec![],
                },
                StatisticSpec {
                    name: "bike".into(),
                    attribute: "mode".into(),
                    kind: StatisticKind::Share { category: 2 },
                    cohort: vec![],
                },
            ],
        };
        let s = bootstrap(&recs, &spec.schema, &cfg, &bc, 5).unwrap();
        assert!(s.diverged.is_empty());
        for row in &s.rows {
            assert_eq!(row.n, 3);
            if row.statistic == "age1" {
                assert_eq!((row.mean, row.std), (1.0, 0.0));
            } else {
                assert!(row.std >= 0.0 && row.std.is_finite());
            }
        }
        assert_eq!(s.rows.iter().filter(|r| r.year.is_none()).count(), 4);
        let again = bootstrap(&recs, &spec.schema, &cfg, &bc, 5).unwrap();
        assert_eq!(s, again);
        let one = BootstrapConfig { replicates: 1, ..bc };
        assert!(bootstrap(&recs, &spec.schema, &cfg, &one, 5).is_err());
    }
}
