//! Exhaustive hyperparameter search scored by validation SRMSE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{hidden_widths, train_with_records, CvaeConfig, TrainedModel};
use crate::data::{encode, DecodeMode, Record, Schema};
use crate::error::{Error, Result};
use crate::generator::{generate_population, ConditionProfile};
use crate::metrics::{cross_tabulate, srmse};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_layers: Vec<usize>,
    pub n_neurons: Vec<usize>,
    pub latent_dims: Vec<usize>,
    pub betas: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_layers: vec![1, 2, 3],
            n_neurons: vec![25, 50, 100, 200, 400],
            latent_dims: vec![5, 10, 25],
            betas: vec![0.1, 0.5, 1.0, 10.0],
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.n_layers.len() * self.n_neurons.len() * self.latent_dims.len() * self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All cells in nested order (layers, neurons, latent size, beta), each
    /// with its own derived seed.
    pub fn cells(&self, base: &CvaeConfig) -> Vec<GridEntry> {
        let mut out = Vec::with_capacity(self.len());
        for &nl in &self.n_layers {
            for &nn in &self.n_neurons {
                for &dz in &self.latent_dims {
                    for &beta in &self.betas {
                        let index = out.len();
                        out.push(GridEntry {
                            index,
                            n_layers: nl,
                            n_neurons: nn,
                            latent_dim: dz,
                            beta,
                            config: CvaeConfig {
                                hidden_layers: hidden_widths(nl, nn),
                                latent_dim: dz,
                                beta,
                                seed: seed::derive(base.seed, "grid", index as u64),
                                ..base.clone()
                            },
                            score: None,
                            best_val_loss: None,
                            best_epoch: None,
                            diverged: false,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub index: usize,
    pub n_layers: usize,
    pub n_neurons: usize,
    pub latent_dim: usize,
    pub beta: f64,
    pub config: CvaeConfig,
    /// Mean validation SRMSE over the evaluation subsets.
    pub score: Option<f64>,
    pub best_val_loss: Option<f64>,
    pub best_epoch: Option<usize>,
    pub diverged: bool,
}

/// Data and scoring setup shared by all grid cells.
pub struct GridTask<'a> {
    pub schema: &'a Schema,
    pub train: &'a [Record],
    pub val: &'a [Record],
    /// Attribute subsets whose joint histograms are compared.
    pub subsets: Vec<Vec<String>>,
    /// Synthetic draws per validation record.
    pub draws_per_record: usize,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    /// Every cell, in grid order.
    pub entries: Vec<GridEntry>,
    pub best: usize,
    pub best_model: TrainedModel,
}

impl GridResult {
    /// Entries sorted by score, diverged cells last.
    pub fn leaderboard(&self) -> Vec<&GridEntry> {
        let mut v: Vec<&GridEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            let key = |e: &GridEntry| e.score.unwrap_or(f64::INFINITY);
            key(a).total_cmp(&key(b)).then(a.index.cmp(&b.index))
        });
        v
    }

    /// Winning configuration for a refit on all data: the epoch count is
    /// the best epoch found with the validation split.
    pub fn refit_config(&self) -> CvaeConfig {
        let e = &self.entries[self.best];
        CvaeConfig {
            epochs: e.best_epoch.map_or(e.config.epochs, |b| b + 1),
            ..e.config.clone()
        }
    }
}

/// Validation score of a trained model: mean SRMSE over the subsets between
/// records generated for the validation conditions and the validation records.
pub fn validation_score(model: &TrainedModel, task: &GridTask<'_>, seed_: u64) -> Result<f64> {
    let profiles: Vec<ConditionProfile> = task
        .val
        .iter()
        .map(|r| ConditionProfile::from_record(task.schema, r))
        .collect();
    let synth: Vec<Record> = generate_population(model, &profiles, task.draws_per_record, seed_, DecodeMode::Sample)?
        .into_iter()
        .map(|s| s.record)
        .collect();
    let mut total = 0.0;
    for subset in &task.subsets {
        let est = cross_tabulate(task.schema, &synth, subset)?;
        let reference = cross_tabulate(task.schema, task.val, subset)?;
        total += srmse(&est.frequencies, &reference.frequencies)?;
    }
    Ok(total / task.subsets.len() as f64)
}

/// Train every cell, score it, and keep the best non-diverged model.
pub fn grid_search(task: &GridTask<'_>, grid: &GridSpec, base: &CvaeConfig) -> Result<GridResult> {
    if task.subsets.is_empty() {
        return Err(Error::Empty("evaluation subsets"));
    }
    if task.draws_per_record == 0 {
        return Err(Error::InvalidArgument("draws_per_record must be positive".into()));
    }
    let train = encode(task.train, task.schema)?;
    let val = encode(task.val, task.schema)?;
    let cells = grid.cells(base);
    let results: Vec<(GridEntry, Option<TrainedModel>)> = cells
        .into_par_iter()
        .map(|mut e| {
            match train_with_records(task.schema, &train, Some(&val), &e.config, Some(task.train)) {
                Ok(m) => {
                    e.best_val_loss = m.best_val_loss();
                    e.best_epoch = Some(m.best_epoch);
                    let s = validation_score(&m, task, seed::derive(e.config.seed, "grid-eval", 0))?;
                    e.score = Some(s);
                    Ok((e, Some(m)))
                }
                Err(Error::Diverged { .. }) => {
                    e.diverged = true;
                    Ok((e, None))
                }
                Err(other) => Err(other),
            }
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, usize)> = None;
    for (e, _) in &results {
        if let Some(s) = e.score {
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, e.index));
            }
        }
    }
    let Some((_, best)) = best else {
        return Err(Error::AllDiverged(results.len()));
    };
    let mut entries = Vec::with_capacity(results.len());
    let mut best_model = None;
    for (e, m) in results {
        if e.index == best {
            best_model = m;
        }
        entries.push(e);
    }
    Ok(GridResult {
        entries,
        best,
        best_model: best_model.expect("winner has a model"),
    })
}
