//! Multilayer perceptron: hidden layers of Linear → LayerNorm → ReLU →
//! Dropout, then a logistic (binary) or softmax output, trained with Adam on
//! cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{probabilities_from_margins, ModelError, Standardizer};
use crate::dataset::FeatureMatrix;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            dropout: 0.2,
            epochs: 200,
            batch_size: 16,
            learning_rate: 1e-3,
        }
    }
}

/// Offsets of one layer's parameters in the flat vector. Hidden layers also
/// carry LayerNorm gain and shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub n_in: usize,
    pub n_out: usize,
    pub offset: usize,
    pub norm: bool,
}

impl LayerShape {
    fn w(&self) -> usize {
        self.offset
    }
    fn b(&self) -> usize {
        self.offset + self.n_in * self.n_out
    }
    fn gamma(&self) -> usize {
        self.b() + self.n_out
    }
    fn beta(&self) -> usize {
        self.gamma() + self.n_out
    }
    fn len(&self) -> usize {
        self.n_out * (self.n_in + if self.norm { 3 } else { 1 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_classes: usize,
    pub dropout: f64,
    pub standardizer: Standardizer,
    pub layers: Vec<LayerShape>,
    pub params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
struct Trace {
    inputs: Vec<Vec<f64>>,
    xhat: Vec<Vec<f64>>,
    inv_std: Vec<f64>,
    pre_relu: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl MlpModel {
    /// Random initialization (He-normal hidden weights, unit LayerNorm gain).
    pub fn init(n_inputs: usize, n_classes: usize, params: &MlpParams, seed: u64) -> Self {
        let n_out = if n_classes == 2 { 1 } else { n_classes };
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut n_in = n_inputs;
        for &h in &params.hidden {
            let l = LayerShape {
                n_in,
                n_out: h,
                offset,
                norm: true,
            };
            offset += l.len();
            layers.push(l);
            n_in = h;
        }
        let out = LayerShape {
            n_in,
            n_out,
            offset,
            norm: false,
        };
        offset += out.len();
        layers.push(out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; offset];
        for l in &layers {
            let std = if l.norm {
                (2.0 / l.n_in as f64).sqrt()
            } else {
                (1.0 / l.n_in as f64).sqrt()
            };
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut p[l.w()..l.b()] {
                *v = normal.sample(&mut rng);
            }
            if l.norm {
                p[l.gamma()..l.beta()].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        Self {
            n_classes,
            dropout: params.dropout,
            standardizer: Standardizer {
                mean: vec![0.0; n_inputs],
                scale: vec![1.0; n_inputs],
            },
            layers,
            params: p,
        }
    }

    /// Output logits for a raw (unstandardized) row; dropout is off.
    pub fn forward(&self, row: &[f64]) -> Vec<f64> {
        self.trace(&self.standardizer.apply(row), None).output
    }

    fn trace(&self, z: &[f64], rng: Option<&mut ChaCha8Rng>) -> Trace {
        let p = &self.params;
        let mut rng = rng;
        let mut t = Trace {
            inputs: Vec::new(),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            pre_relu: Vec::new(),
            masks: Vec::new(),
            output: Vec::new(),
        };
        let mut a = z.to_vec();
        for l in &self.layers {
            let mut h: Vec<f64> = (0..l.n_out)
                .map(|o| {
                    let w = &p[l.w() + o * l.n_in..l.w() + (o + 1) * l.n_in];
                    p[l.b() + o] + w.iter().zip(&a).map(|(u, v)| u * v).sum::<f64>()
                })
                .collect();
            t.inputs.push(std::mem::take(&mut a));
            if !l.norm {
                t.output = h;
                break;
            }
            let m = h.iter().sum::<f64>() / l.n_out as f64;
            let var = h.iter().map(|v| (v - m).powi(2)).sum::<f64>() / l.n_out as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            let xhat: Vec<f64> = h.iter().map(|v| (v - m) * inv).collect();
            for (o, v) in h.iter_mut().enumerate() {
                *v = p[l.gamma() + o] * xhat[o] + p[l.beta() + o];
            }
            let mask: Vec<f64> = match rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 => (0..l.n_out)
                    .map(|_| {
                        if r.gen::<f64>() < self.dropout {
                            0.0
                        } else {
                            1.0 / (1.0 - self.dropout)
                        }
                    })
                    .collect(),
                _ => vec![1.0; l.n_out],
            };
            a = h.iter().zip(&mask).map(|(v, m)| v.max(0.0) * m).collect();
            t.xhat.push(xhat);
            t.inv_std.push(inv);
            t.pre_relu.push(h);
            t.masks.push(mask);
        }
        t
    }

    /// Adds `weight ·` d(loss)/d(params) for one standardized row into `grad`;
    /// returns the row loss.
    fn backward(&self, t: &Trace, y: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let p = &self.params;
        let probs = probabilities_from_margins(&t.output);
        let loss = -probs[y].max(1e-300).ln();
        let mut delta: Vec<f64> = if t.output.len() == 1 {
            vec![probs[1] - if y == 1 { 1.0 } else { 0.0 }]
        } else {
            probs
                .iter()
                .enumerate()
                .map(|(k, &q)| q - if k == y { 1.0 } else { 0.0 })
                .collect()
        };
        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            if l.norm {
                let (xhat, inv) = (&t.xhat[li], t.inv_std[li]);
                // delta arrives as d/d(post-dropout activation)
                let dy: Vec<f64> = (0..l.n_out)
                    .map(|o| {
                        if t.pre_relu[li][o] > 0.0 {
                            delta[o] * t.masks[li][o]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut dxhat = vec![0.0; l.n_out];
                for o in 0..l.n_out {
                    grad[l.gamma() + o] += weight * dy[o] * xhat[o];
                    grad[l.beta() + o] += weight * dy[o];
                    dxhat[o] = dy[o] * p[l.gamma() + o];
                }
                let n = l.n_out as f64;
                let mean_d = dxhat.iter().sum::<f64>() / n;
                let mean_dx = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                delta = (0..l.n_out)
                    .map(|o| inv * (dxhat[o] - mean_d - xhat[o] * mean_dx))
                    .collect();
            }
            let input = &t.inputs[li];
            let mut next = vec![0.0; l.n_in];
            for o in 0..l.n_out {
                let d = delta[o];
                grad[l.b() + o] += weight * d;
                let row = l.w() + o * l.n_in;
                for i in 0..l.n_in {
                    grad[row + i] += weight * d * input[i];
                    next[i] += d * p[row + i];
                }
            }
            if li == 0 {
                break;
            }
            delta = next;
        }
        loss
    }

    /// Mean cross-entropy over raw rows and its gradient, dropout off.
    pub fn loss_and_gradient(&self, rows: &[&[f64]], y: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let n = rows.len() as f64;
        let mut loss = 0.0;
        for (r, &c) in rows.iter().zip(y) {
            let t = self.trace(&self.standardizer.apply(r), None);
            loss += self.backward(&t, c, 1.0 / n, &mut grad);
        }
        (loss / n, grad)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpModel, ModelError> {
    if params.hidden.iter().any(|&h| h < 2) {
        return Err(ModelError::InvalidHyperparams(
            "mlp hidden widths must be at least 2".into(),
        ));
    }
    if !(0.0..1.0).contains(&params.dropout)
        || params.batch_size == 0
        || !(params.learning_rate > 0.0)
    {
        return Err(ModelError::InvalidHyperparams(
            "mlp needs dropout in [0,1), batch_size ≥ 1 and a positive learning rate".into(),
        ));
    }
    let mut model = MlpModel::init(x.n_cols(), n_classes, params, seed);
    model.standardizer = Standardizer::fit(x);
    let z: Vec<Vec<f64>> = x.rows().map(|r| model.standardizer.apply(r)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6c_70);
    let mut adam = Adam {
        m: vec![0.0; model.params.len()],
        v: vec![0.0; model.params.len()],
        t: 0,
        lr: params.learning_rate,
    };
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let total: f64 = batch.iter().map(|&r| weights[r]).sum();
            for &r in batch {
                let t = model.trace(&z[r], Some(&mut rng));
                model.backward(&t, y[r], weights[r] / total, &mut grad);
            }
            adam.step(&mut model.params, &grad);
        }
    }
    Ok(model)
}
