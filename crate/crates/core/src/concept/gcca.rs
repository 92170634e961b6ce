//! Generalized CCA: find orthonormal G (n×k) minimising Σ_j ‖G − X_j U_j‖².

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{ConceptError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptEmbedding {
    pub ids: Vec<String>,
    /// Unified representation, orthonormal columns.
    pub g: DMatrix<f64>,
    /// Per-view loadings U_j (d_j × k).
    pub loadings: Vec<DMatrix<f64>>,
    /// Top-k eigenvalues of the summed projection, descending.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
}

impl ConceptEmbedding {
    pub fn with_ids(mut self, ids: Vec<String>) -> Self {
        self.ids = ids;
        self
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.g.row(i).iter().copied().collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Σ_j ‖G − X_j U_j‖²_F for the views the embedding was fit on.
    pub fn residual(&self, views: &[DMatrix<f64>]) -> f64 {
        views.iter().zip(&self.loadings).map(|(x, u)| (&self.g - x * u).norm_squared()).sum()
    }
}

/// Z-scores each column (population standard deviation); constant columns
/// become zero.
pub fn standardize_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        col.apply(|v| *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 });
    }
    out
}

struct ViewFactors {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    s: DVector<f64>,
}

fn factor(x: &DMatrix<f64>) -> ViewFactors {
    let svd = x.clone().svd(true, true);
    ViewFactors {
        u: svd.u.expect("requested u"),
        v: svd.v_t.expect("requested v").transpose(),
        s: svd.singular_values,
    }
}

/// Spectral weights s²/(s²+r) for M and s/(s²+r) for the loadings; singular
/// values at rounding level are dropped (pseudo-inverse when r = 0).
fn weights(s: &DVector<f64>, ridge: f64, dims: usize) -> (DVector<f64>, DVector<f64>) {
    let smax = s.iter().copied().fold(0.0, f64::max);
    let tol = smax * dims as f64 * f64::EPSILON;
    let proj = s.map(|v| if v > tol { v * v / (v * v + ridge) } else { 0.0 });
    let load = s.map(|v| if v > tol { v / (v * v + ridge) } else { 0.0 });
    (proj, load)
}

pub fn gcca_fuse(views: &[DMatrix<f64>], k: usize, ridge: f64) -> Result<ConceptEmbedding> {
    let first = views.first().ok_or(ConceptError::NoViews)?;
    let n = first.nrows();
    if k == 0 {
        return Err(ConceptError::InvalidRank(0));
    }
    if k > n {
        return Err(ConceptError::KTooLarge { k, n });
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(ConceptError::NonFinite);
    }
    for x in views {
        if x.nrows() != n {
            return Err(ConceptError::DimensionMismatch(format!("view has {} rows, expected {n}", x.nrows())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ConceptError::NonFinite);
        }
    }
    let factors: Vec<ViewFactors> = views.iter().map(factor).collect();
    let mut m = DMatrix::zeros(n, n);
    for (x, f) in views.iter().zip(&factors) {
        let (proj, _) = weights(&f.s, ridge, n.max(x.ncols()));
        let scaled = DMatrix::from_fn(n, f.u.ncols(), |i, j| f.u[(i, j)] * proj[j]);
        m += scaled * f.u.transpose();
    }
    m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut g = DMatrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(idx).into_owned();
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col = -col;
        }
        g.set_column(c, &col);
        eigenvalues.push(eig.eigenvalues[idx]);
    }
    let loadings = views
        .iter()
        .zip(&factors)
        .map(|(x, f)| {
            let (_, load) = weights(&f.s, ridge, n.max(x.ncols()));
            let vs = DMatrix::from_fn(f.v.nrows(), f.v.ncols(), |i, j| f.v[(i, j)] * load[j]);
            vs * (f.u.transpose() * &g)
        })
        .collect();
    Ok(ConceptEmbedding { ids: (0..n).map(|i| i.to_string()).collect(), g, loadings, eigenvalues, k })
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let s = (qa.transpose() * qb).singular_values();
    let mut angles: Vec<f64> = s.iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}
