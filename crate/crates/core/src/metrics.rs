//! Joint histograms, fit statistics, overlap and dispersion.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{Record, Schema, Value};
use crate::error::{Error, Result};

/// Largest joint histogram built by default.
pub const DEFAULT_MAX_BINS: usize = 1_000_000;

/// Relative frequencies over the Cartesian product of an attribute subset.
/// Bins are laid out row-major: the first attribute varies slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointHistogram {
    pub subset: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub n_source_records: usize,
}

impl JointHistogram {
    pub fn n_bins(&self) -> usize {
        self.frequencies.len()
    }

    pub fn bin_index(&self, cats: &[usize]) -> usize {
        cats.iter().zip(&self.cardinalities).fold(0, |acc, (&c, &k)| acc * k + c)
    }

    pub fn bin_categories(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.cardinalities.len()];
        for (slot, &k) in out.iter_mut().zip(&self.cardinalities).rev() {
            *slot = index % k;
            index /= k;
        }
        out
    }

    /// Marginal distribution of one axis.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cardinalities[axis]];
        for (i, &f) in self.frequencies.iter().enumerate() {
            out[self.bin_categories(i)[axis]] += f;
        }
        out
    }

    /// Frequencies from raw counts.
    pub fn from_counts(subset: Vec<String>, cardinalities: Vec<usize>, counts: Vec<f64>, n: usize) -> Self {
        let total: f64 = counts.iter().sum();
        let frequencies = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            counts
        };
        JointHistogram {
            subset,
            cardinalities,
            frequencies,
            n_source_records: n,
        }
    }

    fn same_support(&self, other: &JointHistogram) -> Result<()> {
        if self.subset != other.subset || self.cardinalities != other.cardinalities {
            return Err(Error::InvalidArgument(
                "histograms are over different attribute subsets".into(),
            ));
        }
        Ok(())
    }
}

/// Attribute indices and bin counts of a subset.
pub fn subset_support<S: AsRef<str>>(schema: &Schema, subset: &[S]) -> Result<(Vec<usize>, Vec<usize>)> {
    if subset.is_empty() {
        return Err(Error::Empty("attribute subset"));
    }
    let mut idx = Vec::with_capacity(subset.len());
    let mut cards = Vec::with_capacity(subset.len());
    for name in subset {
        let j = schema.index_of(name.as_ref())?;
        let k = schema.attributes[j]
            .n_categories()
            .ok_or_else(|| Error::NotCategorical(name.as_ref().to_string()))?;
        idx.push(j);
        cards.push(k);
    }
    Ok((idx, cards))
}

/// Number of bins of a subset, saturating on overflow.
pub fn n_bins<S: AsRef<str>>(schema: &Schema, subset: &[S]) -> Result<usize> {
    let (_, cards) = subset_support(schema, subset)?;
    Ok(cards.iter().fold(1usize, |a, &k| a.saturating_mul(k)))
}

pub fn cross_tabulate<S: AsRef<str>>(schema: &Schema, records: &[Record], subset: &[S]) -> Result<JointHistogram> {
    cross_tabulate_capped(schema, records, subset, DEFAULT_MAX_BINS)
}

pub fn cross_tabulate_capped<S: AsRef<str>>(
    schema: &Schema,
    records: &[Record],
    subset: &[S],
    max_bins: usize,
) -> Result<JointHistogram> {
    let (idx, cards) = subset_support(schema, subset)?;
    let bins = cards.iter().fold(1usize, |a, &k| a.saturating_mul(k));
    if bins > max_bins {
        return Err(Error::HistogramTooLarge { bins, cap: max_bins });
    }
    if records.is_empty() {
        return Err(Error::Empty("records to cross-tabulate"));
    }
    let mut counts = vec![0.0; bins];
    for r in records {
        let mut b = 0;
        for (&j, &k) in idx.iter().zip(&cards) {
            let c = schema.attributes[j].category_of(r.values[j])?;
            b = b * k + c;
        }
        counts[b] += 1.0;
    }
    Ok(JointHistogram::from_counts(
        subset.iter().map(|s| s.as_ref().to_string()).collect(),
        cards,
        counts,
        records.len(),
    ))
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: b.len(),
            actual: a.len(),
            context: "histogram bins",
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("histogram"));
    }
    Ok(())
}

/// Standardized root mean squared error of `pi_hat` against `pi`:
/// `sqrt(sum((pi_hat - pi)^2) / N_b) / (sum(pi) / N_b)`.
pub fn srmse(pi_hat: &[f64], pi: &[f64]) -> Result<f64> {
    check_pair(pi_hat, pi)?;
    let nb = pi.len() as f64;
    let mean = pi.iter().sum::<f64>() / nb;
    if mean <= 0.0 {
        return Err(Error::Empty("reference histogram mass"));
    }
    let sq: f64 = pi_hat.iter().zip(pi).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / nb).sqrt() / mean)
}

/// SRMSE with the mean mass of both histograms in the denominator, so the
/// distance is exactly symmetric. Equals [`srmse`] for normalized inputs up
/// to rounding.
pub fn srmse_symmetric(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let nb = a.len() as f64;
    let mean = 0.5 * (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / nb;
    if mean <= 0.0 {
        return Err(Error::Empty("histogram mass"));
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / nb).sqrt() / mean)
}

/// Pearson correlation between `pi_hat` and `pi`. Fails when `pi` is
/// constant; a constant `pi_hat` gives 0.
pub fn pearson(pi_hat: &[f64], pi: &[f64]) -> Result<f64> {
    check_pair(pi_hat, pi)?;
    let n = pi.len() as f64;
    let ma = pi_hat.iter().sum::<f64>() / n;
    let mb = pi.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in pi_hat.iter().zip(pi) {
        let (da, db) = (a - ma, b - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    if saa == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Coefficient of determination `1 - SS_res / SS_tot` of `pi_hat` as a
/// predictor of `pi`.
pub fn r2(pi_hat: &[f64], pi: &[f64]) -> Result<f64> {
    check_pair(pi_hat, pi)?;
    let mean = pi.iter().sum::<f64>() / pi.len() as f64;
    let ss_tot: f64 = pi.iter().map(|b| (b - mean) * (b - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = pi_hat.iter().zip(pi).map(|(a, b)| (b - a) * (b - a)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub srmse: f64,
    /// NaN when the reference histogram is constant.
    pub corr: f64,
    /// NaN when the reference histogram is constant.
    pub r2: f64,
    pub n_bins: usize,
}

pub fn compare(estimated: &JointHistogram, reference: &JointHistogram) -> Result<ComparisonReport> {
    estimated.same_support(reference)?;
    let (a, b) = (&estimated.frequencies, &reference.frequencies);
    let undefined = |r: Result<f64>| match r {
        Err(Error::ZeroVariance) => Ok(f64::NAN),
        other => other,
    };
    Ok(ComparisonReport {
        srmse: srmse(a, b)?,
        corr: undefined(pearson(a, b))?,
        r2: undefined(r2(a, b))?,
        n_bins: b.len(),
    })
}

/// Marginal distribution of one categorical or binned attribute.
pub fn marginals(schema: &Schema, records: &[Record], attribute: &str) -> Result<Vec<f64>> {
    Ok(cross_tabulate(schema, records, &[attribute])?.frequencies)
}

/// Percentages (0 to 100) of each sample's records whose full attribute tuple
/// occurs in the other sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub a_in_b: f64,
    pub b_in_a: f64,
}

fn record_key(schema: &Schema, r: &Record) -> Result<Vec<u64>> {
    schema
        .attributes
        .iter()
        .zip(&r.values)
        .map(|(a, &v)| match (a.is_raw_numeric(), v) {
            (true, Value::Num(x)) => Ok(x.to_bits()),
            (true, Value::Cat(c)) => Ok((c as f64).to_bits()),
            (false, v) => a.category_of(v).map(|c| c as u64),
        })
        .collect()
}

fn share_in(schema: &Schema, a: &[Record], set: &HashSet<Vec<u64>>) -> Result<f64> {
    let mut hit = 0usize;
    for r in a {
        if set.contains(&record_key(schema, r)?) {
            hit += 1;
        }
    }
    Ok(100.0 * hit as f64 / a.len() as f64)
}

pub fn overlap(schema: &Schema, a: &[Record], b: &[Record]) -> Result<OverlapReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sample for overlap"));
    }
    let keys = |s: &[Record]| s.iter().map(|r| record_key(schema, r)).collect::<Result<HashSet<_>>>();
    let (ka, kb) = (keys(a)?, keys(b)?);
    Ok(OverlapReport {
        a_in_b: share_in(schema, a, &kb)?,
        b_in_a: share_in(schema, b, &ka)?,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionMode {
    /// Shannon entropy in nats.
    #[default]
    Entropy,
    /// `1 - sum(p^2)`.
    SumOfSquares,
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

pub fn sum_of_squares(p: &[f64]) -> f64 {
    1.0 - p.iter().map(|x| x * x).sum::<f64>()
}

pub fn categorical_dispersion(p: &[f64], mode: DispersionMode) -> f64 {
    match mode {
        DispersionMode::Entropy => entropy(p),
        DispersionMode::SumOfSquares => sum_of_squares(p),
    }
}

/// Standard error of the mean, `s / sqrt(n)` with the unbiased `s`.
pub fn std_error_of_mean(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Empty("at least two values for a standard error"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((var / n).sqrt())
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Dispersion of one attribute: standard error of the mean for raw numerics,
/// the chosen categorical statistic otherwise.
pub fn dispersion(schema: &Schema, records: &[Record], attribute: &str, mode: DispersionMode) -> Result<f64> {
    let j = schema.index_of(attribute)?;
    if schema.attributes[j].is_raw_numeric() {
        let xs: Vec<f64> = records.iter().map(|r| r.values[j].as_f64()).collect();
        std_error_of_mean(&xs)
    } else {
        Ok(categorical_dispersion(&marginals(schema, records, attribute)?, mode))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AttributeSpec, Role};
    use proptest::prelude::*;

    fn schema() -> Schema {
        Schema::new(
            "m",
            vec![
                AttributeSpec::categorical("a", Role::Socio, 2),
                AttributeSpec::categorical("b", Role::Preference, 3),
            ],
        )
        .unwrap()
    }

    fn rec(id: u64, a: usize, b: usize) -> Record {
        Record {
            id,
            values: vec![Value::Cat(a), Value::Cat(b)],
        }
    }

    #[test]
    fn srmse_examples() {
        assert_eq!(srmse(&[0.25; 4], &[0.25; 4]).unwrap(), 0.0);
        let v = srmse(&[0.5, 0.5, 0.0, 0.0], &[0.25; 4]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(srmse(&[0.1], &[0.0]).is_err());
    }

    #[test]
    fn pearson_and_r2_examples() {
        let pi = [0.1, 0.2, 0.3, 0.4];
        assert!((pearson(&pi, &pi).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r2(&pi, &pi).unwrap(), 1.0);
        let rev = [0.4, 0.3, 0.2, 0.1];
        assert!((pearson(&rev, &pi).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&pi, &[0.25; 4]), Err(Error::ZeroVariance)));
        assert!(matches!(r2(&pi, &[0.25; 4]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn cross_tab_layout_and_marginals() {
        let s = schema();
        let recs = vec![rec(0, 0, 0), rec(1, 1, 2), rec(2, 1, 2), rec(3, 0, 1)];
        let h = cross_tabulate(&s, &recs, &["a", "b"]).unwrap();
        assert_eq!(h.n_bins(), 6);
        assert_eq!(h.frequencies, vec![0.25, 0.25, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(h.marginal(0), vec![0.5, 0.5]);
        assert_eq!(h.marginal(1), vec![0.25, 0.25, 0.5]);
        assert_eq!(h.bin_categories(5), vec![1, 2]);
        assert_eq!(h.bin_index(&[1, 2]), 5);
        assert!(matches!(
            cross_tabulate_capped(&s, &recs, &["a", "b"], 5),
            Err(Error::HistogramTooLarge { bins: 6, cap: 5 })
        ));
        assert!(cross_tabulate(&s, &recs, &["zzz"]).is_err());
    }

    #[test]
    fn compare_reports_nan_for_flat_reference() {
        let flat = JointHistogram::from_counts(vec!["a".into()], vec![2], vec![1.0, 1.0], 2);
        let r = compare(&flat, &flat).unwrap();
        assert_eq!(r.srmse, 0.0);
        assert!(r.corr.is_nan() && r.r2.is_nan());
    }

    #[test]
    fn overlap_membership() {
        let s = schema();
        let a = vec![rec(0, 0, 0), rec(1, 1, 1), rec(2, 1, 1)];
        let b = vec![rec(5, 1, 1), rec(6, 0, 2)];
        let o = overlap(&s, &a, &b).unwrap();
        assert!((o.a_in_b - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(o.b_in_a, 50.0);
        assert_eq!(overlap(&s, &a, &a).unwrap().a_in_b, 100.0);
    }

    #[test]
    fn dispersion_examples() {
        assert!((entropy(&[0.5, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert_eq!(sum_of_squares(&[0.5, 0.5]), 0.5);
        let se = std_error_of_mean(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!(std_error_of_mean(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn metric_invariants(raw in proptest::collection::vec(0.0f64..1.0, 2..40), shift in 0.0f64..1.0) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let pi: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let other: Vec<f64> = pi.iter().rev().map(|x| (x + shift) / (1.0 + shift * pi.len() as f64)).collect();
            prop_assert!(srmse(&other, &pi).unwrap() >= 0.0);
            prop_assert_eq!(srmse(&pi, &pi).unwrap(), 0.0);
            if let Ok(c) = pearson(&other, &pi) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
                prop_assert!(r2(&other, &pi).unwrap() <= 1.0);
            }
            let h = entropy(&pi);
            prop_assert!(h >= -1e-12 && h <= (pi.len() as f64).ln() + 1e-9);
        }
    }
}
