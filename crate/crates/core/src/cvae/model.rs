//! Encoder/decoder pair, reparameterization and the composite loss.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Gradients, Network, Segment};

/// Floor applied inside the cross-entropy logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Parameters of the diagonal Gaussian `q(z | v, c)`. The encoder emits log
/// variances, so the variance `exp(log_var)` is always positive.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentParams {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl LatentParams {
    pub fn variance(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| lv.exp()).collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| (0.5 * lv).exp()).collect()
    }
}

/// `z = mu + sigma * eps` with `sigma = exp(log_var / 2)`.
pub fn reparameterize(params: &LatentParams, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != params.mu.len() {
        return Err(Error::Dimension {
            expected: params.mu.len(),
            actual: eps.len(),
            context: "reparameterization noise",
        });
    }
    Ok(params
        .mu
        .iter()
        .zip(&params.log_var)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// KL divergence of `N(mu, diag(exp(log_var)))` from `N(0, I)`:
/// `-1/2 * sum(1 + log_var - mu^2 - exp(log_var))`.
pub fn gaussian_kl(mu: &[f64], log_var: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Half squared error over numeric positions.
    pub mse_num: f64,
    /// Cross-entropy over one-hot blocks.
    pub xent_cat: f64,
    pub kl: f64,
    /// `mse_num + xent_cat + beta * kl`.
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(mse_num: f64, xent_cat: f64, kl: f64, beta: f64) -> Self {
        LossBreakdown {
            mse_num,
            xent_cat,
            kl,
            total: mse_num + xent_cat + beta * kl,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Gradients for one mini-batch.
#[derive(Clone, Debug)]
pub struct CvaeGradients {
    pub encoder: Gradients,
    pub decoder: Gradients,
}

impl CvaeGradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.encoder.flat();
        v.extend(self.decoder.flat());
        v
    }
}

/// Conditional VAE: encoder `[v, c] -> [mu, log_var]`, decoder `[z, c] -> v_hat`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cvae {
    pub encoder: Network,
    pub decoder: Network,
    pub latent_dim: usize,
    pub beta: f64,
}

impl Cvae {
    /// Build with Glorot-initialized weights. `hidden` lists the encoder's
    /// hidden widths; the decoder mirrors them. `segments` describes the
    /// preference block layout (softmax blocks and numeric positions).
    pub fn new<R: Rng + ?Sized>(
        pref_dim: usize,
        cond_dim: usize,
        segments: Vec<Segment>,
        hidden: &[usize],
        latent_dim: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if segments.iter().map(|s| s.width).sum::<usize>() != pref_dim {
            return Err(Error::InvalidArgument("output segments do not cover the preference block".into()));
        }
        let mut enc_dims = vec![pref_dim + cond_dim];
        enc_dims.extend_from_slice(hidden);
        enc_dims.push(2 * latent_dim);
        let mut dec_dims = vec![latent_dim + cond_dim];
        dec_dims.extend(hidden.iter().rev());
        dec_dims.push(pref_dim);
        let encoder = Network::init(&enc_dims, Activation::Tanh, Activation::Linear, rng)?;
        let decoder = Network::init(&dec_dims, Activation::Tanh, Activation::SoftmaxBlocks { segments }, rng)?;
        Ok(Cvae {
            encoder,
            decoder,
            latent_dim,
            beta,
        })
    }

    pub fn pref_dim(&self) -> usize {
        self.decoder.out_dim()
    }

    pub fn cond_dim(&self) -> usize {
        self.decoder.in_dim() - self.latent_dim
    }

    pub fn segments(&self) -> &[Segment] {
        match &self.decoder.layers.last().expect("nonempty").activation {
            Activation::SoftmaxBlocks { segments } => segments,
            _ => &[],
        }
    }

    fn check_batch(&self, v: &ArrayView2<f64>, c: &ArrayView2<f64>) -> Result<()> {
        if v.ncols() != self.pref_dim() {
            return Err(Error::Dimension {
                expected: self.pref_dim(),
                actual: v.ncols(),
                context: "preference block",
            });
        }
        if c.ncols() != self.cond_dim() {
            return Err(Error::Dimension {
                expected: self.cond_dim(),
                actual: c.ncols(),
                context: "conditional block",
            });
        }
        if v.nrows() != c.nrows() {
            return Err(Error::Dimension {
                expected: v.nrows(),
                actual: c.nrows(),
                context: "batch rows",
            });
        }
        Ok(())
    }

    /// Batched encoder: returns `(mu, log_var)`, each rows × latent_dim.
    pub fn encode_batch(&self, v: ArrayView2<f64>, c: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        self.check_batch(&v, &c)?;
        let out = self.encoder.predict(concatenate![Axis(1), v, c].view())?;
        let dz = self.latent_dim;
        Ok((out.slice(s![.., ..dz]).to_owned(), out.slice(s![.., dz..]).to_owned()))
    }

    pub fn encode(&self, v: &[f64], c: &[f64]) -> Result<LatentParams> {
        let (mu, lv) = self.encode_batch(row(v), row(c))?;
        Ok(LatentParams {
            mu: mu.row(0).to_vec(),
            log_var: lv.row(0).to_vec(),
        })
    }

    /// Batched decoder: softmax probabilities per categorical block, raw
    /// outputs at numeric positions.
    pub fn decode_batch(&self, z: ArrayView2<f64>, c: ArrayView2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.latent_dim {
            return Err(Error::Dimension {
                expected: self.latent_dim,
                actual: z.ncols(),
                context: "latent vector",
            });
        }
        if c.ncols() != self.cond_dim() || c.nrows() != z.nrows() {
            return Err(Error::Dimension {
                expected: self.cond_dim(),
                actual: c.ncols(),
                context: "conditional block",
            });
        }
        self.decoder.predict(concatenate![Axis(1), z, c].view())
    }

    pub fn decode(&self, z: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decode_batch(row(z), row(c))?.row(0).to_vec())
    }

    /// Loss summed over the batch, one noise row per record.
    pub fn loss(&self, v: ArrayView2<f64>, c: ArrayView2<f64>, eps: ArrayView2<f64>) -> Result<LossBreakdown> {
        self.check_batch(&v, &c)?;
        if v.nrows() == 0 {
            return Err(Error::Empty("loss batch"));
        }
        let (mu, lv) = self.encode_batch(v, c)?;
        let z = sample_latent(&mu, &lv, &eps)?;
        let v_hat = self.decode_batch(z.view(), c)?;
        let (mse, xent, _) = reconstruction(self.segments(), v, &v_hat, false);
        let kl = batch_kl(&mu, &lv);
        Ok(LossBreakdown::new(mse, xent, kl, self.beta))
    }

    /// Loss and its exact gradients w.r.t. all encoder and decoder parameters.
    pub fn loss_and_gradients(
        &self,
        v: ArrayView2<f64>,
        c: ArrayView2<f64>,
        eps: ArrayView2<f64>,
    ) -> Result<(LossBreakdown, CvaeGradients)> {
        self.check_batch(&v, &c)?;
        if v.nrows() == 0 {
            return Err(Error::Empty("loss batch"));
        }
        let dz = self.latent_dim;
        let enc_tape = self.encoder.forward(concatenate![Axis(1), v, c].view())?;
        let enc_out = enc_tape.output();
        let mu = enc_out.slice(s![.., ..dz]).to_owned();
        let lv = enc_out.slice(s![.., dz..]).to_owned();
        let z = sample_latent(&mu, &lv, &eps)?;

        let dec_tape = self.decoder.forward(concatenate![Axis(1), z.view(), c].view())?;
        let (mse, xent, grad_out) = reconstruction(self.segments(), v, dec_tape.output(), true);
        let grad_out = grad_out.expect("gradient requested");
        let kl = batch_kl(&mu, &lv);
        let (dec_grads, dec_in_grad) = self.decoder.backward(&dec_tape, &grad_out)?;

        // through z = mu + exp(lv / 2) * eps and the KL term
        let gz = dec_in_grad.slice(s![.., ..dz]);
        let beta = self.beta;
        let mut enc_grad = Array2::zeros((v.nrows(), 2 * dz));
        {
            let (mut g_mu, mut g_lv) = enc_grad.multi_slice_mut((s![.., ..dz], s![.., dz..]));
            Zip::from(&mut g_mu)
                .and(&gz)
                .and(&mu)
                .for_each(|g, &gz, &m| *g = gz + beta * m);
            Zip::from(&mut g_lv)
                .and(&gz)
                .and(&lv)
                .and(&eps)
                .for_each(|g, &gz, &lv, &e| *g = gz * e * 0.5 * (0.5 * lv).exp() + beta * 0.5 * (lv.exp() - 1.0));
        }
        let (enc_grads, _) = self.encoder.backward(&enc_tape, &enc_grad)?;
        Ok((
            LossBreakdown::new(mse, xent, kl, beta),
            CvaeGradients {
                encoder: enc_grads,
                decoder: dec_grads,
            },
        ))
    }
}

fn row(x: &[f64]) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((1, x.len()), x).expect("row view")
}

fn sample_latent(mu: &Array2<f64>, lv: &Array2<f64>, eps: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if eps.dim() != mu.dim() {
        return Err(Error::Dimension {
            expected: mu.ncols(),
            actual: eps.ncols(),
            context: "reparameterization noise",
        });
    }
    let mut z = mu.clone();
    Zip::from(&mut z)
        .and(lv)
        .and(eps)
        .for_each(|z, &lv, &e| *z += (0.5 * lv).exp() * e);
    Ok(z)
}

fn batch_kl(mu: &Array2<f64>, lv: &Array2<f64>) -> f64 {
    mu.rows()
        .into_iter()
        .zip(lv.rows())
        .map(|(m, l)| gaussian_kl(m.as_slice().expect("standard"), l.as_slice().expect("standard")))
        .sum()
}

/// Reconstruction terms and, optionally, dL/d(v_hat).
fn reconstruction(
    segments: &[Segment],
    v: ArrayView2<f64>,
    v_hat: &Array2<f64>,
    want_grad: bool,
) -> (f64, f64, Option<Array2<f64>>) {
    let mut mse = 0.0;
    let mut xent = 0.0;
    let mut grad = want_grad.then(|| Array2::zeros(v_hat.dim()));
    for i in 0..v.nrows() {
        let mut offset = 0;
        for seg in segments {
            for j in offset..offset + seg.width {
                let (t, y) = (v[[i, j]], v_hat[[i, j]]);
                let g = if seg.softmax {
                    if t == 0.0 {
                        0.0
                    } else if y > LOG_FLOOR {
                        xent -= t * y.ln();
                        -t / y
                    } else {
                        xent -= t * LOG_FLOOR.ln();
                        0.0
                    }
                } else {
                    mse += 0.5 * (t - y) * (t - y);
                    y - t
                };
                if let Some(grad) = grad.as_mut() {
                    grad[[i, j]] = g;
                }
            }
            offset += seg.width;
        }
    }
    (mse, xent, grad)
}
