//! Masked non-negative matrix factorization with multiplicative updates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConceptError, RelatednessView, Result};

const EPS: f64 = 1e-12;
/// Slack for the per-iteration loss check, relative to the previous loss and
/// to ‖M⊙R‖² (rounding only).
const LOSS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfResult {
    /// P·Q, in the shifted (non-negative) scale.
    pub completed: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Masked loss before the first update, then after each iteration.
    pub loss_history: Vec<f64>,
    /// Constant added to observed entries to make them non-negative.
    pub shift: f64,
}

fn mask_f64(mask: &DMatrix<bool>) -> DMatrix<f64> {
    mask.map(|m| if m { 1.0 } else { 0.0 })
}

/// ‖M ⊙ (R − PQ)‖²_F.
pub fn masked_loss(r: &DMatrix<f64>, mask: &DMatrix<bool>, approx: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for ((x, y), &m) in r.iter().zip(approx.iter()).zip(mask.iter()) {
        if m {
            total += (x - y) * (x - y);
        }
    }
    total
}

/// Runs `iters` update rounds from the given factors. Fails if the masked
/// loss ever increases beyond rounding.
pub fn nmf_from(
    r: &DMatrix<f64>,
    mask: &DMatrix<bool>,
    mut p: DMatrix<f64>,
    mut q: DMatrix<f64>,
    iters: usize,
) -> Result<NmfResult> {
    if r.shape() != mask.shape() || p.nrows() != r.nrows() || q.ncols() != r.ncols() || p.ncols() != q.nrows() {
        return Err(ConceptError::DimensionMismatch("factor shapes".into()));
    }
    let m = mask_f64(mask);
    let mr = r.component_mul(&m);
    let mut approx = &p * &q;
    let mut history = vec![masked_loss(r, mask, &approx)];
    let floor = LOSS_SLACK * mr.norm_squared() + f64::MIN_POSITIVE;
    for iteration in 1..=iters {
        let num = &mr * q.transpose();
        let den = approx.component_mul(&m) * q.transpose();
        p.zip_zip_apply(&num, &den, |x, n, d| *x *= n / (d + EPS));
        approx = &p * &q;
        let num = p.transpose() * &mr;
        let den = p.transpose() * approx.component_mul(&m);
        q.zip_zip_apply(&num, &den, |x, n, d| *x *= n / (d + EPS));
        approx = &p * &q;
        let loss = masked_loss(r, mask, &approx);
        let before = *history.last().expect("initial loss");
        if loss > before * (1.0 + LOSS_SLACK) + floor {
            return Err(ConceptError::LossIncreased { iteration, before, after: loss });
        }
        history.push(loss);
    }
    Ok(NmfResult { completed: approx, p, q, loss_history: history, shift: 0.0 })
}

/// Completes a view with a rank-`rank` factorization from a seeded
/// uniform(0,1] start. Views with negative observed entries are shifted by
/// their observed minimum first.
pub fn nmf_complete(view: &RelatednessView, rank: usize, iters: usize, seed: u64) -> Result<NmfResult> {
    if rank == 0 {
        return Err(ConceptError::InvalidRank(rank));
    }
    let observed: Vec<f64> = view.matrix.iter().zip(view.mask.iter()).filter(|(_, &m)| m).map(|(v, _)| *v).collect();
    if observed.is_empty() {
        return Err(ConceptError::AllUnobserved(view.name.as_str().to_string()));
    }
    if observed.iter().any(|v| !v.is_finite()) {
        return Err(ConceptError::NonFinite);
    }
    let min = observed.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let r = view.matrix.zip_map(&view.mask, |v, m| if m { v + shift } else { 0.0 });
    let n = view.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| 1.0 - rng.random::<f64>());
    let p = init(n, rank);
    let q = init(rank, n);
    let mut out = nmf_from(&r, &view.mask, p, q, iters)?;
    out.shift = shift;
    Ok(out)
}
