use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, sigmoid, ModelError, Result, PROB_EPS};

/// Linear head over the mean chunk vector of a page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub d_in: usize,
    pub n_classes: usize,
    /// Row-major `C × d_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(d_in: usize, n_classes: usize) -> Self {
        Self { d_in, n_classes, weights: vec![0.0; d_in * n_classes], bias: vec![0.0; n_classes] }
    }

    pub fn random(d_in: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(d_in, n_classes);
        let a = (3.0 / d_in as f64).sqrt();
        p.weights.iter_mut().for_each(|w| *w = rng.random_range(-a..a));
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d_in, self.n_classes)
    }

    pub fn values(&self) -> Vec<&[f64]> {
        vec![&self.weights, &self.bias]
    }

    pub fn values_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weights, &mut self.bias]
    }

    fn page_vector(&self, chunks: &[Vec<f64>]) -> Result<Vec<f64>> {
        if chunks.is_empty() {
            return Err(ModelError::NoChunks);
        }
        let mut v = vec![0.0; self.d_in];
        for (i, c) in chunks.iter().enumerate() {
            if c.len() != self.d_in {
                return Err(ModelError::DimensionMismatch {
                    expected: format!("chunk vectors of dimension {}", self.d_in),
                    actual: format!("chunk {i} of dimension {}", c.len()),
                });
            }
            v.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        let n = chunks.len() as f64;
        v.iter_mut().for_each(|a| *a /= n);
        Ok(v)
    }

    fn probs_for(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let row = &self.weights[c * self.d_in..(c + 1) * self.d_in];
                sigmoid(self.bias[c] + row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect()
    }

    pub(crate) fn accumulate_grad(
        &self,
        chunks: &[Vec<f64>],
        targets: &[f64],
        scale: f64,
        grad: &mut LinearParams,
    ) -> Result<f64> {
        check_len(self.n_classes, targets.len(), "targets")?;
        let v = self.page_vector(chunks)?;
        let probs = self.probs_for(&v);
        let loss = super::loss(&probs, targets)?;
        for c in 0..self.n_classes {
            let p = probs[c];
            if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                continue;
            }
            let d = scale * (p - targets[c]) / self.n_classes as f64;
            grad.bias[c] += d;
            for (g, x) in grad.weights[c * self.d_in..(c + 1) * self.d_in].iter_mut().zip(&v) {
                *g += d * x;
            }
        }
        Ok(loss)
    }
}

/// `sigmoid(W·v + b)` where `v` is the mean of the page's chunk vectors.
pub fn linear_baseline_forward(chunks: &[Vec<f64>], params: &LinearParams) -> Result<Vec<f64>> {
    let v = params.page_vector(chunks)?;
    Ok(params.probs_for(&v))
}
