//! Vector encoding of records.
//!
//! Each record becomes two real vectors: the conditional block `C` (all
//! attributes whose role is not preference) and the preference block `V`.
//! Categorical and binned attributes are one-hot; raw numerics take a single
//! scaled slot.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discretize::one_hot;
use super::schema::{Record, Role, Schema, Value};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockKind {
    OneHot,
    /// Raw numeric scaled from `[lo, hi]` to `[-1, 1]`.
    Numeric { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub attribute: usize,
    pub offset: usize,
    pub width: usize,
    pub kind: BlockKind,
}

/// Position of every attribute of one role group inside an encoded vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub width: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// Draw each category from the block's probability vector.
    #[default]
    Sample,
    /// Take the most probable category.
    Argmax,
}

impl Layout {
    pub fn for_indices(schema: &Schema, indices: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(indices.len());
        let mut offset = 0;
        for &j in indices {
            let attr = &schema.attributes[j];
            let width = attr.encoded_width()?;
            let kind = match attr.raw_range() {
                Some((lo, hi)) => BlockKind::Numeric { lo, hi },
                None => BlockKind::OneHot,
            };
            blocks.push(Block {
                attribute: j,
                offset,
                width,
                kind,
            });
            offset += width;
        }
        Ok(Layout {
            blocks,
            width: offset,
        })
    }

    pub fn conditional(schema: &Schema) -> Result<Self> {
        Self::for_indices(schema, &schema.conditional_indices())
    }

    pub fn preference(schema: &Schema) -> Result<Self> {
        Self::for_indices(schema, &schema.preference_indices())
    }

    /// Widths of the output segments, with `true` for softmax (one-hot) blocks.
    pub fn segments(&self) -> Vec<(usize, bool)> {
        self.blocks
            .iter()
            .map(|b| (b.width, matches!(b.kind, BlockKind::OneHot)))
            .collect()
    }

    /// Encode `values` (one per block, in block order) into `out`.
    pub fn encode_into(&self, schema: &Schema, values: &[Value], out: &mut [f64]) -> Result<()> {
        if values.len() != self.blocks.len() {
            return Err(Error::Dimension {
                expected: self.blocks.len(),
                actual: values.len(),
                context: "values per layout",
            });
        }
        if out.len() != self.width {
            return Err(Error::Dimension {
                expected: self.width,
                actual: out.len(),
                context: "encoded width",
            });
        }
        for (block, &v) in self.blocks.iter().zip(values) {
            let slot = &mut out[block.offset..block.offset + block.width];
            match block.kind {
                BlockKind::OneHot => {
                    let c = schema.attributes[block.attribute].category_of(v)?;
                    slot.copy_from_slice(&one_hot(c, block.width)?);
                }
                BlockKind::Numeric { lo, hi } => slot[0] = scale(v.as_f64(), lo, hi),
            }
        }
        Ok(())
    }

    /// Encode the attributes of `record` covered by this layout.
    pub fn encode_record(&self, schema: &Schema, record: &Record, out: &mut [f64]) -> Result<()> {
        let values: Vec<Value> = self.blocks.iter().map(|b| record.values[b.attribute]).collect();
        self.encode_into(schema, &values, out)
    }

    /// Decode one row into values (one per block). One-hot blocks may hold
    /// any nonnegative weights; they are treated as an unnormalized
    /// probability vector.
    pub fn decode<R: Rng + ?Sized>(
        &self,
        schema: &Schema,
        row: &[f64],
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<Vec<Value>> {
        if row.len() != self.width {
            return Err(Error::Dimension {
                expected: self.width,
                actual: row.len(),
                context: "decoded row width",
            });
        }
        self.blocks
            .iter()
            .map(|block| {
                let slot = &row[block.offset..block.offset + block.width];
                match block.kind {
                    BlockKind::OneHot => {
                        let c = match mode {
                            DecodeMode::Argmax => argmax(slot),
                            DecodeMode::Sample => sample_category(slot, rng),
                        };
                        schema.attributes[block.attribute].representative(c)
                    }
                    BlockKind::Numeric { lo, hi } => Ok(Value::Num(unscale(slot[0], lo, hi))),
                }
            })
            .collect()
    }
}

fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (x - lo) / (hi - lo) - 1.0
}

fn unscale(y: f64, lo: f64, hi: f64) -> f64 {
    lo + (y + 1.0) * 0.5 * (hi - lo)
}

/// Index of the largest entry; first one wins on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from nonnegative weights.
pub fn sample_category<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed on the rounding gap at the top; pick the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Records encoded into conditional and preference matrices.
#[derive(Clone, Debug)]
pub struct EncodedDataset {
    pub conditional: Array2<f64>,
    pub preference: Array2<f64>,
    pub row_ids: Vec<u64>,
    pub schema_hash: String,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            conditional: self.conditional.select(ndarray::Axis(0), indices),
            preference: self.preference.select(ndarray::Axis(0), indices),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
            schema_hash: self.schema_hash.clone(),
        }
    }
}

pub fn encode(records: &[Record], schema: &Schema) -> Result<EncodedDataset> {
    let cond = Layout::conditional(schema)?;
    let pref = Layout::preference(schema)?;
    let mut conditional = Array2::zeros((records.len(), cond.width));
    let mut preference = Array2::zeros((records.len(), pref.width));
    for (k, r) in records.iter().enumerate() {
        schema.check_record(r)?;
        cond.encode_record(
            schema,
            r,
            conditional.row_mut(k).as_slice_mut().expect("standard layout"),
        )?;
        pref.encode_record(
            schema,
            r,
            preference.row_mut(k).as_slice_mut().expect("standard layout"),
        )?;
    }
    Ok(EncodedDataset {
        conditional,
        preference,
        row_ids: records.iter().map(|r| r.id).collect(),
        schema_hash: schema.hash(),
    })
}

/// Rebuild a record from its conditional and preference rows.
pub fn decode_record<R: Rng + ?Sized>(
    schema: &Schema,
    id: u64,
    conditional_row: &[f64],
    preference_row: &[f64],
    mode: DecodeMode,
    rng: &mut R,
) -> Result<Record> {
    let cond = Layout::conditional(schema)?;
    let pref = Layout::preference(schema)?;
    let mut values = vec![Value::Cat(0); schema.len()];
    for (block, v) in cond.blocks.iter().zip(cond.decode(schema, conditional_row, mode, rng)?) {
        values[block.attribute] = v;
    }
    for (block, v) in pref.blocks.iter().zip(pref.decode(schema, preference_row, mode, rng)?) {
        values[block.attribute] = v;
    }
    Ok(Record { id, values })
}

/// Values of a record restricted to one role group, in schema order.
pub fn values_for(record: &Record, schema: &Schema, conditional: bool) -> Vec<Value> {
    schema
        .attributes
        .iter()
        .zip(&record.values)
        .filter(|(a, _)| (a.role != Role::Preference) == conditional)
        .map(|(_, &v)| v)
        .collect()
}

/// Shuffled index split into `round(n * fraction)` training rows and the rest.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    use rand::seq::SliceRandom;
    if n == 0 {
        return Err(Error::Empty("dataset to split"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n_train = (n as f64 * fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} of {n} rows leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::seed::derived_rng(seed, "split", 0));
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

pub fn split_train_val<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, val) = split_indices(items.len(), fraction, seed)?;
    Ok((
        train.iter().map(|&i| items[i].clone()).collect(),
        val.iter().map(|&i| items[i].clone()).collect(),
    ))
}
