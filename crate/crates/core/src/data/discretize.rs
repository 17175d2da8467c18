//! Numeric-to-categorical conversion and one-hot vectors.

use crate::error::{Error, Result};

/// Bin index of `value` under right-open bins `[edges[i], edges[i+1])`.
///
/// Values below the first edge clamp to bin 0 and values at or above the last
/// edge clamp to the last bin. `edges` must be strictly increasing with at
/// least two entries.
pub fn discretize(value: f64, edges: &[f64]) -> usize {
    debug_assert!(edges.len() >= 2);
    let n_bins = edges.len() - 1;
    let at_or_below = edges.partition_point(|&e| e <= value);
    at_or_below.saturating_sub(1).min(n_bins - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantileEdges {
    pub edges: Vec<f64>,
    /// Bins lost because neighbouring quantiles coincided.
    pub merged: usize,
}

/// Bin edges at the empirical quantiles `i / n_bins` (linear interpolation
/// between order statistics). Coinciding quantiles are merged, which can leave
/// fewer than `n_bins` bins; a constant sample yields the single bin `[v, v + 1]`.
pub fn quantile_edges(values: &[f64], n_bins: usize) -> QuantileEdges {
    let n_bins = n_bins.max(1);
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return QuantileEdges {
            edges: vec![0.0, 1.0],
            merged: n_bins - 1,
        };
    }
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let mut edges: Vec<f64> = Vec::with_capacity(n_bins + 1);
    for i in 0..=n_bins {
        let pos = last * i as f64 / n_bins as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let q = sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64);
        if edges.last().is_none_or(|&prev| q > prev) {
            edges.push(q);
        }
    }
    if edges.len() == 1 {
        edges.push(edges[0] + 1.0);
    }
    QuantileEdges {
        merged: n_bins - (edges.len() - 1),
        edges,
    }
}

pub fn one_hot(index: usize, cardinality: usize) -> Result<Vec<f64>> {
    if index >= cardinality {
        return Err(Error::IndexOutOfRange { index, cardinality });
    }
    let mut v = vec![0.0; cardinality];
    v[index] = 1.0;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decades() -> Vec<f64> {
        vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, f64::INFINITY]
    }

    #[test]
    fn age_25_lands_in_twenties() {
        assert_eq!(discretize(25.0, &decades()), 2);
    }

    #[test]
    fn interior_edge_goes_right() {
        assert_eq!(discretize(30.0, &decades()), 3);
        assert_eq!(discretize(0.0, &decades()), 0);
    }

    #[test]
    fn out_of_range_clamps() {
        assert_eq!(discretize(-5.0, &decades()), 0);
        assert_eq!(discretize(1e9, &decades()), 7);
        let finite = [0.0, 1.0, 2.0];
        assert_eq!(discretize(2.0, &finite), 1);
        assert_eq!(discretize(7.0, &finite), 1);
    }

    #[test]
    fn quantiles_of_one_to_hundred() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = quantile_edges(&values, 4);
        // order statistics at positions 0, 24.75, 49.5, 74.25, 99
        let expected = [1.0, 25.75, 50.5, 75.25, 100.0];
        assert_eq!(q.edges.len(), 5);
        for (a, b) in q.edges.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(q.merged, 0);
    }

    #[test]
    fn constant_values_give_single_bin() {
        let q = quantile_edges(&[3.0; 20], 5);
        assert_eq!(q.edges.len(), 2);
        assert_eq!(q.merged, 4);
    }

    #[test]
    fn single_bin_spans_min_max() {
        let q = quantile_edges(&[4.0, -1.0, 2.0], 1);
        assert_eq!(q.edges, vec![-1.0, 4.0]);
    }

    #[test]
    fn one_hot_cases() {
        assert_eq!(one_hot(0, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(one_hot(0, 1).unwrap(), vec![1.0]);
        assert!(one_hot(3, 3).is_err());
    }

    proptest! {
        #[test]
        fn discretize_is_monotone(a in -100.0f64..200.0, b in -100.0f64..200.0) {
            let edges = decades();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(discretize(lo, &edges) <= discretize(hi, &edges));
        }

        #[test]
        fn quantile_edges_strictly_increase(values in proptest::collection::vec(-50.0f64..50.0, 1..200), n in 1usize..12) {
            let q = quantile_edges(&values, n);
            prop_assert!(q.edges.len() >= 2);
            prop_assert!(q.edges.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(q.edges.len() - 1 + q.merged, n);
        }
    }
}
