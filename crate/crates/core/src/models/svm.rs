//! Linear SVM on standardized inputs with a logistic (Platt) probability map.
//! Multiclass uses one-vs-rest machines whose calibrated scores are
//! normalized to sum to one.

use serde::{Deserialize, Serialize};

use super::{sigmoid, ModelError, Standardizer};
use crate::dataset::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            epochs: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// `P(y=1) = σ(platt_a · score + platt_b)`.
    pub platt_a: f64,
    pub platt_b: f64,
}

impl BinarySvm {
    fn score(&self, z: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_classes: usize,
    pub standardizer: Standardizer,
    /// One machine (class 1 vs 0) for binary, `K` one-vs-rest machines otherwise.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    /// Raw decision values, one per machine.
    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let z = self.standardizer.apply(row);
        self.machines.iter().map(|m| m.score(&z)).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let s = self.decision(row);
        let p: Vec<f64> = self
            .machines
            .iter()
            .zip(&s)
            .map(|(m, &v)| sigmoid(m.platt_a * v + m.platt_b))
            .collect();
        if p.len() == 1 {
            vec![1.0 - p[0], p[0]]
        } else {
            let total: f64 = p.iter().sum();
            p.iter().map(|v| v / total).collect()
        }
    }
}

/// Hinge objective `λ/2‖w‖² + Σ wᵢ·max(0, 1 − yᵢ(w·zᵢ + b)) / Σ wᵢ`.
fn objective(z: &[Vec<f64>], y: &[f64], wt: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let total: f64 = wt.iter().sum();
    let hinge: f64 = z
        .iter()
        .zip(y)
        .zip(wt)
        .map(|((zi, &yi), &c)| {
            let s = b + w.iter().zip(zi).map(|(a, v)| a * v).sum::<f64>();
            c * (1.0 - yi * s).max(0.0)
        })
        .sum();
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / total
}

/// Full-batch Pegasos subgradient steps `η_t = 1/(λt)`, keeping the iterate
/// with the lowest objective. The bias is unregularized and uses the step
/// `min(η_t, 1)`.
fn fit_machine(z: &[Vec<f64>], y: &[f64], wt: &[f64], params: &SvmParams) -> (Vec<f64>, f64) {
    let d = z[0].len();
    let lambda = params.lambda;
    let total: f64 = wt.iter().sum();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (w.clone(), b, objective(z, y, wt, &w, b, lambda));
    let radius = 1.0 / lambda.sqrt();
    for t in 1..=params.epochs {
        let eta = 1.0 / (lambda * t as f64);
        let mut gw: Vec<f64> = w.iter().map(|v| lambda * v).collect();
        let mut gb = 0.0;
        for ((zi, &yi), &c) in z.iter().zip(y).zip(wt) {
            let s = b + w.iter().zip(zi).map(|(a, v)| a * v).sum::<f64>();
            if yi * s < 1.0 {
                for (g, v) in gw.iter_mut().zip(zi) {
                    *g -= c * yi * v / total;
                }
                gb -= c * yi / total;
            }
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= eta * g;
        }
        b -= eta.min(1.0) * gb;
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        let obj = objective(z, y, wt, &w, b, lambda);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    (best.0, best.1)
}

/// Fits `σ(a·s + b)` to smoothed targets by Newton's method with step halving.
pub(crate) fn fit_platt(scores: &[f64], positive: &[bool], wt: &[f64]) -> (f64, f64) {
    let n_pos: f64 = positive
        .iter()
        .zip(wt)
        .filter(|(p, _)| **p)
        .map(|(_, w)| w)
        .sum();
    let n_neg: f64 = wt.iter().sum::<f64>() - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
    let loss = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .zip(wt)
            .map(|((&s, &ti), &w)| {
                let z = a * s + b;
                // log(1 + e^z) − t·z, stable
                w * (z.max(0.0) + (-z.abs()).exp().ln_1p() - ti * z)
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let mut f = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for ((&s, &ti), &w) in scores.iter().zip(&t).zip(wt) {
            let p = sigmoid(a * s + b);
            let r = w * (p - ti);
            let q = w * p * (1.0 - p);
            ga += r * s;
            gb += r;
            haa += q * s * s;
            hab += q * s;
            hbb += q;
        }
        if ga.abs() < 1e-10 && gb.abs() < 1e-10 {
            break;
        }
        let det = haa * hbb - hab * hab;
        let (da, db) = (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det);
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = loss(na, nb);
            if nf < f + 1e-4 * step * (ga * da + gb * db) {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step /= 2.0;
            if step < 1e-10 {
                return (a, b);
            }
        }
    }
    (a, b)
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: &SvmParams,
) -> Result<SvmModel, ModelError> {
    if !(params.lambda > 0.0) {
        return Err(ModelError::InvalidHyperparams(
            "linear_svm lambda must be positive".into(),
        ));
    }
    let standardizer = Standardizer::fit(x);
    let z: Vec<Vec<f64>> = x.rows().map(|r| standardizer.apply(r)).collect();
    let targets: Vec<usize> = if n_classes == 2 {
        vec![1]
    } else {
        (0..n_classes).collect()
    };
    let machines = targets
        .iter()
        .map(|&c| {
            let positive: Vec<bool> = y.iter().map(|&l| l == c).collect();
            let ys: Vec<f64> = positive
                .iter()
                .map(|&p| if p { 1.0 } else { -1.0 })
                .collect();
            let (w, b) = fit_machine(&z, &ys, weights, params);
            let scores: Vec<f64> = z
                .iter()
                .map(|zi| b + w.iter().zip(zi).map(|(a, v)| a * v).sum::<f64>())
                .collect();
            let (platt_a, platt_b) = fit_platt(&scores, &positive, weights);
            BinarySvm {
                weights: w,
                bias: b,
                platt_a,
                platt_b,
            }
        })
        .collect();
    Ok(SvmModel {
        n_classes,
        standardizer,
        machines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, ModelKind, ModelSpec, Task};

    #[test]
    fn separable_line() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, ((i * 13) % 7) as f64])
            .collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let x = FeatureMatrix::from_rows_anonymous(&["a", "b"], &rows);
        let m = train(&ModelSpec::new(ModelKind::LinearSvm, Task::Binary), &x, &y).unwrap();
        let p = m.predict(&x).unwrap();
        assert_eq!(p.predicted_classes(), y);
        let pos = p.positive();
        assert!(pos[0] < pos[39]);
        assert!(pos.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn one_vs_rest() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = (i / 20) as f64;
                vec![
                    3.0 * (c - 1.0) + (i % 5) as f64 * 0.1,
                    (c - 1.0).abs() * 3.0,
                ]
            })
            .collect();
        let y: Vec<usize> = (0..60).map(|i| i / 20).collect();
        let x = FeatureMatrix::from_rows_anonymous(&["a", "b"], &rows);
        let m = train(
            &ModelSpec::new(ModelKind::LinearSvm, Task::Multiclass { k: 3 }),
            &x,
            &y,
        )
        .unwrap();
        let p = m.predict(&x).unwrap();
        assert_eq!(p.predicted_classes(), y);
    }

    #[test]
    fn platt_orders_scores() {
        let s = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let lab = [false, false, true, false, true, true];
        let (a, _) = fit_platt(&s, &lab, &[1.0; 6]);
        assert!(a > 0.0);
    }
}
