//! Sampling preference vectors from a trained model for given conditions.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvae::{standard_normal, TrainedModel};
use crate::data::{DecodeMode, Layout, Record, Role, Schema, Value};
use crate::error::{Error, Result};
use crate::metrics::{cross_tabulate, JointHistogram};
use crate::seed;

/// Values of every conditional attribute (schema order) for one synthetic
/// individual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionProfile {
    pub id: u64,
    pub values: Vec<Value>,
}

impl ConditionProfile {
    pub fn from_record(schema: &Schema, record: &Record) -> Self {
        ConditionProfile {
            id: record.id,
            values: crate::data::values_for(record, schema, true),
        }
    }

    fn slot(schema: &Schema, name: &str) -> Result<usize> {
        let j = schema.index_of(name)?;
        if schema.attributes[j].role == Role::Preference {
            return Err(Error::InvalidArgument(format!("{name} is a preference attribute")));
        }
        Ok(schema.conditional_indices().iter().position(|&k| k == j).expect("conditional"))
    }

    pub fn get(&self, schema: &Schema, name: &str) -> Result<Value> {
        Ok(self.values[Self::slot(schema, name)?])
    }

    pub fn set(&mut self, schema: &Schema, name: &str, value: Value) -> Result<()> {
        let k = Self::slot(schema, name)?;
        self.values[k] = value;
        Ok(())
    }

    pub fn encode(&self, schema: &Schema) -> Result<Vec<f64>> {
        let layout = Layout::conditional(schema)?;
        let mut out = vec![0.0; layout.width];
        layout.encode_into(schema, &self.values, &mut out)?;
        Ok(out)
    }
}

/// Draws for one profile. Each draw lists preference values in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceDraws {
    pub profile_id: u64,
    pub draws: Vec<Vec<Value>>,
    /// The profile's time lies outside the range seen in training.
    pub extrapolated: bool,
}

impl PreferenceDraws {
    /// Full records (conditionals from `profile`, preferences from each draw).
    pub fn records(&self, schema: &Schema, profile: &ConditionProfile) -> Vec<Record> {
        let cond = schema.conditional_indices();
        let pref = schema.preference_indices();
        self.draws
            .iter()
            .map(|d| {
                let mut values = vec![Value::Cat(0); schema.len()];
                for (&j, &v) in cond.iter().zip(&profile.values) {
                    values[j] = v;
                }
                for (&j, &v) in pref.iter().zip(d) {
                    values[j] = v;
                }
                Record { id: profile.id, values }
            })
            .collect()
    }
}

/// Seed for a profile under a master seed.
pub fn profile_seed(master: u64, profile_id: u64) -> u64 {
    seed::derive(master, "profile", profile_id)
}

fn is_extrapolated(model: &TrainedModel, profile: &ConditionProfile) -> Result<bool> {
    let Some(t) = model.schema.time_index() else {
        return Ok(false);
    };
    let Some((lo, hi)) = model.time_range else {
        return Ok(false);
    };
    let name = &model.schema.attributes[t].name;
    let x = match profile.get(&model.schema, name)? {
        Value::Cat(c) => c as f64,
        Value::Num(x) => x,
    };
    Ok(x < lo || x > hi)
}

/// Draw `n_draws` preference vectors: `z ~ N(0, I)`, decode with the
/// profile's conditionals, then sample (or argmax) each categorical block.
pub fn sample(
    model: &TrainedModel,
    profile: &ConditionProfile,
    n_draws: usize,
    seed_: u64,
    mode: DecodeMode,
) -> Result<PreferenceDraws> {
    let schema = &model.schema;
    if profile.values.len() != schema.conditional_indices().len() {
        return Err(Error::Dimension {
            expected: schema.conditional_indices().len(),
            actual: profile.values.len(),
            context: "profile values",
        });
    }
    let c = profile.encode(schema)?;
    let pref = Layout::preference(schema)?;
    let mut rng = seed::rng(seed_);
    let z = standard_normal(n_draws, model.cvae.latent_dim, &mut rng);
    let cm = Array2::from_shape_fn((n_draws, c.len()), |(_, j)| c[j]);
    let out = model.cvae.decode_batch(z.view(), cm.view())?;
    let mut draws = Vec::with_capacity(n_draws);
    for row in out.rows() {
        draws.push(pref.decode(schema, row.as_slice().expect("standard layout"), mode, &mut rng)?);
    }
    Ok(PreferenceDraws {
        profile_id: profile.id,
        draws,
        extrapolated: is_extrapolated(model, profile)?,
    })
}

/// Joint histogram over `subset` from `r` draws for one profile.
pub fn estimate_distribution<S: AsRef<str>>(
    model: &TrainedModel,
    profile: &ConditionProfile,
    subset: &[S],
    r: usize,
    seed_: u64,
) -> Result<JointHistogram> {
    if r == 0 {
        return Err(Error::InvalidArgument("number of draws must be positive".into()));
    }
    let draws = sample(model, profile, r, seed_, DecodeMode::Sample)?;
    cross_tabulate(&model.schema, &draws.records(&model.schema, profile), subset)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRecord {
    pub profile_id: u64,
    pub draw: usize,
    pub record: Record,
    pub extrapolated: bool,
}

/// Draws for many profiles, each seeded from `(seed, profile id)`, so the
/// result does not depend on scheduling.
pub fn generate_population(
    model: &TrainedModel,
    profiles: &[ConditionProfile],
    draws_per_profile: usize,
    seed_: u64,
    mode: DecodeMode,
) -> Result<Vec<SyntheticRecord>> {
    let per: Vec<Vec<SyntheticRecord>> = profiles
        .par_iter()
        .map(|p| {
            let d = sample(model, p, draws_per_profile, profile_seed(seed_, p.id), mode)?;
            Ok(d.records(&model.schema, p)
                .into_iter()
                .enumerate()
                .map(|(k, record)| SyntheticRecord {
                    profile_id: p.id,
                    draw: k,
                    record,
                    extrapolated: d.extrapolated,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvae::{train_with_records, CvaeConfig};
    use crate::data::{encode, AttributeSpec};

    fn model() -> TrainedModel {
        let schema = Schema::new(
            "g",
            vec![
                AttributeSpec::raw_numerical("year", Role::Time, 2000.0, 2010.0, "year"),
                AttributeSpec::categorical("x", Role::Socio, 2),
                AttributeSpec::categorical("y", Role::Preference, 3),
            ],
        )
        .unwrap();
        let recs: Vec<Record> = (0..200)
            .map(|i| Record {
                id: i,
                values: vec![
                    Value::Num(2000.0 + (i % 5) as f64),
                    Value::Cat((i % 2) as usize),
                    Value::Cat((i % 3) as usize),
                ],
            })
            .collect();
        let data = encode(&recs, &schema).unwrap();
        let cfg = CvaeConfig {
            hidden_layers: vec![8],
            latent_dim: 2,
            epochs: 2,
            ..CvaeConfig::default()
        };
        train_with_records(&schema, &data, None, &cfg, Some(&recs)).unwrap()
    }

    #[test]
    fn sampling_is_seeded_and_in_range() {
        let m = model();
        let p = ConditionProfile {
            id: 7,
            values: vec![Value::Num(2002.0), Value::Cat(1)],
        };
        let a = sample(&m, &p, 50, 11, DecodeMode::Sample).unwrap();
        assert_eq!(a, sample(&m, &p, 50, 11, DecodeMode::Sample).unwrap());
        assert_ne!(a, sample(&m, &p, 50, 12, DecodeMode::Sample).unwrap());
        assert!(!a.extrapolated);
        for d in &a.draws {
            assert!(matches!(d[0], Value::Cat(c) if c < 3));
        }
        let h = estimate_distribution(&m, &p, &["y"], 400, 1).unwrap();
        assert!((h.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h.n_source_records, 400);
    }

    #[test]
    fn time_outside_training_range_is_flagged() {
        let m = model();
        assert_eq!(m.time_range, Some((2000.0, 2004.0)));
        let mut p = ConditionProfile {
            id: 1,
            values: vec![Value::Num(2003.0), Value::Cat(0)],
        };
        p.set(&m.schema, "year", Value::Num(2008.0)).unwrap();
        assert!(sample(&m, &p, 5, 0, DecodeMode::Argmax).unwrap().extrapolated);
        assert!(p.set(&m.schema, "y", Value::Cat(0)).is_err());
    }

    #[test]
    fn population_is_independent_of_thread_count() {
        let m = model();
        let profiles: Vec<ConditionProfile> = (0..20)
            .map(|i| ConditionProfile {
                id: i,
                values: vec![Value::Num(2001.0), Value::Cat((i % 2) as usize)],
            })
            .collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| generate_population(&m, &profiles, 10, 5, DecodeMode::Sample).unwrap());
        let b = four.install(|| generate_population(&m, &profiles, 10, 5, DecodeMode::Sample).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
    }
}
