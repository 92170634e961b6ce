use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, sigmoid, ModelError, Result, PROB_EPS};

/// Weights of the chunk-convolution classifier.
///
/// For width index `w` the filter bank `filters[w]` is laid out as
/// `[filter][offset][dim]`, i.e. `F × widths[w] × d_in` values. Features are
/// ordered width-major, so feature `w * F + f` belongs to filter `f` of width
/// `widths[w]`. `out_weights` is row-major `C × F·|widths|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d_in: usize,
    pub widths: Vec<usize>,
    pub filters_per_width: usize,
    pub n_classes: usize,
    pub filters: Vec<Vec<f64>>,
    pub filter_bias: Vec<Vec<f64>>,
    pub out_weights: Vec<f64>,
    pub out_bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(d_in: usize, widths: &[usize], filters_per_width: usize, n_classes: usize) -> Self {
        let h = filters_per_width * widths.len();
        Self {
            d_in,
            widths: widths.to_vec(),
            filters_per_width,
            n_classes,
            filters: widths.iter().map(|w| vec![0.0; filters_per_width * w * d_in]).collect(),
            filter_bias: widths.iter().map(|_| vec![0.0; filters_per_width]).collect(),
            out_weights: vec![0.0; n_classes * h],
            out_bias: vec![0.0; n_classes],
        }
    }

    /// Uniform fan-in scaled initialization; biases start at zero.
    pub fn random(
        d_in: usize,
        widths: &[usize],
        filters_per_width: usize,
        n_classes: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut p = Self::zeros(d_in, widths, filters_per_width, n_classes);
        for (bank, &w) in p.filters.iter_mut().zip(widths) {
            let a = (3.0 / (w * d_in) as f64).sqrt();
            bank.iter_mut().for_each(|v| *v = rng.random_range(-a..a));
        }
        let a = (3.0 / p.feature_len() as f64).sqrt();
        p.out_weights.iter_mut().for_each(|v| *v = rng.random_range(-a..a));
        p
    }

    pub fn feature_len(&self) -> usize {
        self.filters_per_width * self.widths.len()
    }

    pub fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d_in, &self.widths, self.filters_per_width, self.n_classes)
    }

    /// Every trainable value, in a fixed order.
    pub fn values(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.filters.iter().map(Vec::as_slice).collect();
        out.extend(self.filter_bias.iter().map(Vec::as_slice));
        out.push(&self.out_weights);
        out.push(&self.out_bias);
        out
    }

    pub fn values_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.filters.iter_mut().map(Vec::as_mut_slice).collect();
        out.extend(self.filter_bias.iter_mut().map(Vec::as_mut_slice));
        out.push(&mut self.out_weights);
        out.push(&mut self.out_bias);
        out
    }

    fn check_input(&self, chunks: &[Vec<f64>]) -> Result<()> {
        if chunks.is_empty() {
            return Err(ModelError::NoChunks);
        }
        for (i, c) in chunks.iter().enumerate() {
            if c.len() != self.d_in {
                return Err(ModelError::DimensionMismatch {
                    expected: format!("chunk vectors of dimension {}", self.d_in),
                    actual: format!("chunk {i} of dimension {}", c.len()),
                });
            }
        }
        Ok(())
    }

    fn forward_trace(&self, chunks: &[Vec<f64>]) -> Result<Trace> {
        self.check_input(chunks)?;
        let d = self.d_in;
        let f_count = self.filters_per_width;
        // positions past the real chunks are zero vectors
        let len = chunks.len().max(self.max_width());
        let mut features = Vec::with_capacity(self.feature_len());
        let mut winners = Vec::with_capacity(self.feature_len());
        for (wi, &w) in self.widths.iter().enumerate() {
            let bank = &self.filters[wi];
            for f in 0..f_count {
                let filter = &bank[f * w * d..(f + 1) * w * d];
                let bias = self.filter_bias[wi][f];
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0;
                let mut best_pre = 0.0;
                for start in 0..=(len - w) {
                    let mut z = bias;
                    for off in 0..w {
                        if let Some(row) = chunks.get(start + off) {
                            let weights = &filter[off * d..(off + 1) * d];
                            z += weights.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    let act = z.max(0.0);
                    if act > best {
                        best = act;
                        best_at = start;
                        best_pre = z;
                    }
                }
                features.push(best);
                winners.push((best_at, best_pre > 0.0));
            }
        }
        let h = features.len();
        let probs = (0..self.n_classes)
            .map(|c| {
                let row = &self.out_weights[c * h..(c + 1) * h];
                let logit = self.out_bias[c] + row.iter().zip(&features).map(|(a, b)| a * b).sum::<f64>();
                sigmoid(logit)
            })
            .collect();
        Ok(Trace { features, winners, probs })
    }

    /// Adds `scale ×` the gradient of the page loss to `grad` and returns the
    /// page loss.
    pub(crate) fn accumulate_grad(
        &self,
        chunks: &[Vec<f64>],
        targets: &[f64],
        scale: f64,
        grad: &mut ModelParams,
    ) -> Result<f64> {
        check_len(self.n_classes, targets.len(), "targets")?;
        let trace = self.forward_trace(chunks)?;
        let loss = super::loss(&trace.probs, targets)?;
        let c_count = self.n_classes as f64;
        let h = trace.features.len();
        let d = self.d_in;
        let mut d_features = vec![0.0; h];
        for c in 0..self.n_classes {
            let p = trace.probs[c];
            if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
                continue;
            }
            let d_logit = scale * (p - targets[c]) / c_count;
            grad.out_bias[c] += d_logit;
            let row = &self.out_weights[c * h..(c + 1) * h];
            let grad_row = &mut grad.out_weights[c * h..(c + 1) * h];
            for j in 0..h {
                grad_row[j] += d_logit * trace.features[j];
                d_features[j] += d_logit * row[j];
            }
        }
        let f_count = self.filters_per_width;
        for (wi, &w) in self.widths.iter().enumerate() {
            for f in 0..f_count {
                let j = wi * f_count + f;
                let (start, active) = trace.winners[j];
                if !active || d_features[j] == 0.0 {
                    continue;
                }
                let g = d_features[j];
                grad.filter_bias[wi][f] += g;
                let gbank = &mut grad.filters[wi][f * w * d..(f + 1) * w * d];
                for off in 0..w {
                    if let Some(row) = chunks.get(start + off) {
                        for (gw, x) in gbank[off * d..(off + 1) * d].iter_mut().zip(row) {
                            *gw += g * x;
                        }
                    }
                }
            }
        }
        Ok(loss)
    }
}

struct Trace {
    features: Vec<f64>,
    // (window start, pre-activation > 0) of the pooled window
    winners: Vec<(usize, bool)>,
    probs: Vec<f64>,
}

/// Label probabilities for one page given its chunk vectors.
///
/// Pages with fewer chunks than the widest filter are zero-padded at the end.
/// Max-pooling keeps the first window on ties.
pub fn forward_page(chunks: &[Vec<f64>], params: &ModelParams) -> Result<Vec<f64>> {
    Ok(params.forward_trace(chunks)?.probs)
}

/// Analytic gradient of the mean batch loss.
pub fn grad(batch: &[(Vec<Vec<f64>>, Vec<f64>)], params: &ModelParams) -> Result<ModelParams> {
    if batch.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut g = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    for (chunks, targets) in batch {
        params.accumulate_grad(chunks, targets, scale, &mut g)?;
    }
    Ok(g)
}
