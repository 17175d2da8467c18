//! Mini-batch training with RMSprop and best-validation checkpointing.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{Cvae, LossBreakdown};
use crate::data::{EncodedDataset, Layout, Schema, Value};
use crate::error::{Error, Result};
use crate::nn::{RmsProp, RmsPropConfig, Segment};
use crate::seed;

const EVAL_CHUNK: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvaeConfig {
    /// Encoder hidden widths; the decoder uses them reversed.
    pub hidden_layers: Vec<usize>,
    pub latent_dim: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        CvaeConfig {
            hidden_layers: hidden_widths(2, 100),
            latent_dim: 10,
            beta: 0.5,
            learning_rate: 0.001,
            rho: 0.9,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 50,
            seed: 0,
        }
    }
}

/// Widths `n_neurons / 2^l` for `l = 0..n_layers`.
pub fn hidden_widths(n_layers: usize, n_neurons: usize) -> Vec<usize> {
    (0..n_layers).map(|l| (n_neurons >> l).max(1)).collect()
}

impl CvaeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        Ok(())
    }

    pub fn optimizer(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            rho: self.rho,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean per-record training loss over the epoch's mini-batches.
    pub train: f64,
    /// Mean per-record validation loss after the epoch.
    pub val: Option<f64>,
}

/// A trained model together with everything needed to use it later.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema_hash: String,
    pub schema: Schema,
    pub config: CvaeConfig,
    pub cvae: Cvae,
    pub history: Vec<EpochLoss>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Observed range of the time attribute in the training data.
    pub time_range: Option<(f64, f64)>,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.schema.hash() != m.schema_hash {
            return Err(Error::Schema("model file schema hash does not match its schema".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn conditional_layout(&self) -> Result<Layout> {
        Layout::conditional(&self.schema)
    }

    pub fn preference_layout(&self) -> Result<Layout> {
        Layout::preference(&self.schema)
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.history.iter().filter_map(|h| h.val).reduce(f64::min)
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Output segments of the decoder head for a schema.
pub fn output_segments(schema: &Schema) -> Result<Vec<Segment>> {
    Ok(Layout::preference(schema)?
        .segments()
        .into_iter()
        .map(|(width, softmax)| Segment { width, softmax })
        .collect())
}

/// Summed loss over a dataset with a fixed noise matrix.
pub fn dataset_loss(cvae: &Cvae, data: &EncodedDataset, eps: ArrayView2<f64>) -> Result<LossBreakdown> {
    let mut acc = LossBreakdown::default();
    let n = data.len();
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let rows = ndarray::s![start..end, ..];
        let l = cvae.loss(
            data.preference.slice(rows),
            data.conditional.slice(rows),
            eps.slice(rows),
        )?;
        acc.mse_num += l.mse_num;
        acc.xent_cat += l.xent_cat;
        acc.kl += l.kl;
        acc.total += l.total;
        start = end;
    }
    Ok(acc)
}

fn time_range(schema: &Schema, records: Option<&[crate::data::Record]>, data: &EncodedDataset) -> Option<(f64, f64)> {
    let t = schema.time_index()?;
    if let Some(records) = records {
        let vals = records.iter().map(|r| match r.values[t] {
            Value::Cat(c) => c as f64,
            Value::Num(x) => x,
        });
        return vals.fold(None, |acc, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((f64::min(lo, x), f64::max(hi, x))),
        });
    }
    // recover from the encoded block
    let layout = Layout::conditional(schema).ok()?;
    let block = layout.blocks.iter().find(|b| b.attribute == t)?;
    let col = data.conditional.column(block.offset);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in col {
        let v = match block.kind {
            crate::data::BlockKind::Numeric { lo, hi } => lo + (x + 1.0) * 0.5 * (hi - lo),
            crate::data::BlockKind::OneHot => continue,
        };
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo <= hi).then_some((lo, hi))
}

/// Train a CVAE on `train`, selecting the epoch with the lowest validation
/// loss when `val` is given (otherwise the final epoch).
pub fn train(schema: &Schema, train: &EncodedDataset, val: Option<&EncodedDataset>, config: &CvaeConfig) -> Result<TrainedModel> {
    train_with_records(schema, train, val, config, None)
}

/// As [`train`], with the source records used to record the time range.
pub fn train_with_records(
    schema: &Schema,
    train: &EncodedDataset,
    val: Option<&EncodedDataset>,
    config: &CvaeConfig,
    records: Option<&[crate::data::Record]>,
) -> Result<TrainedModel> {
    config.validate()?;
    let hash = schema.hash();
    for d in std::iter::once(train).chain(val) {
        if d.schema_hash != hash {
            return Err(Error::Schema("dataset was encoded with a different schema".into()));
        }
    }
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut cvae = Cvae::new(
        train.preference.ncols(),
        train.conditional.ncols(),
        output_segments(schema)?,
        &config.hidden_layers,
        config.latent_dim,
        config.beta,
        &mut seed::derived_rng(config.seed, "init", 0),
    )?;
    let mut opt_enc = RmsProp::new(&cvae.encoder, config.optimizer());
    let mut opt_dec = RmsProp::new(&cvae.decoder, config.optimizer());
    let val = val.filter(|v| !v.is_empty());
    let val_eps = val.map(|v| standard_normal(v.len(), config.latent_dim, &mut seed::derived_rng(config.seed, "val-eps", 0)));

    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Cvae)> = None;
    for epoch in 0..config.epochs {
        let mut rng = seed::derived_rng(config.seed, "epoch", epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let v = train.preference.select(Axis(0), batch);
            let c = train.conditional.select(Axis(0), batch);
            let eps = standard_normal(batch.len(), config.latent_dim, &mut rng);
            let (loss, mut grads) = cvae.loss_and_gradients(v.view(), c.view(), eps.view())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let scale = 1.0 / batch.len() as f64;
            grads.encoder.scale(scale);
            grads.decoder.scale(scale);
            if !grads.encoder.is_finite() || !grads.decoder.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            opt_enc.step(&mut cvae.encoder, &grads.encoder)?;
            opt_dec.step(&mut cvae.decoder, &grads.decoder)?;
            total += loss.total;
        }
        let val_loss = match (val, &val_eps) {
            (Some(v), Some(eps)) => {
                let l = dataset_loss(&cvae, v, eps.view())?.total / v.len() as f64;
                if !l.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                Some(l)
            }
            _ => None,
        };
        history.push(EpochLoss {
            epoch,
            train: total / n as f64,
            val: val_loss,
        });
        if let Some(l) = val_loss {
            if best.as_ref().is_none_or(|(b, _, _)| l < *b) {
                best = Some((l, epoch, cvae.clone()));
            }
        }
    }
    let (best_epoch, cvae) = match best {
        Some((_, e, m)) => (e, m),
        None => (config.epochs - 1, cvae),
    };
    Ok(TrainedModel {
        schema_hash: hash,
        schema: schema.clone(),
        config: config.clone(),
        cvae,
        history,
        best_epoch,
        time_range: time_range(schema, records, train),
    })
}
