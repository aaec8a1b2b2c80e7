//! Normalized-Laplacian eigensystems, heat kernel signatures and the
//! fixed-length spectral feature vector.

use nalgebra::{DMatrix, SymmetricEigen};

use super::Graph;
use crate::error::{MstError, Result};

/// Eigenvalue block length of [`spectral_features`].
pub const DEFAULT_EIGENVALUE_COUNT: usize = 20;

/// Quantile levels 0.1, 0.2, …, 1.0 used to summarize each HKS.
pub const DECILE_LEVELS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Eigenpairs of `L = D^{-1/2} (D − A) D^{-1/2}`, eigenvalues ascending and
/// clamped to `[0, 2]`. Isolated vertices give an all-zero row and column.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// `vectors[(v, k)]` is entry `v` of the `k`-th unit eigenvector.
    pub vectors: DMatrix<f64>,
}

pub fn normalized_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let deg = g.degrees();
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() }).collect();
    let mut l = DMatrix::zeros(n, n);
    for v in 0..n {
        if deg[v] > 0 {
            l[(v, v)] = 1.0;
        }
    }
    for &(u, v) in g.edges() {
        let w = -inv_sqrt[u] * inv_sqrt[v];
        l[(u, v)] = w;
        l[(v, u)] = w;
    }
    l
}

pub fn eigensystem(g: &Graph) -> Result<Eigensystem> {
    let n = g.vertex_count();
    if n == 0 {
        return Err(MstError::Validation("spectral quantities of an empty graph".into()));
    }
    let eig = SymmetricEigen::new(normalized_laplacian(g));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k].clamp(0.0, 2.0)).collect();
    let vectors = DMatrix::from_fn(n, n, |v, k| eig.eigenvectors[(v, order[k])]);
    Ok(Eigensystem { values, vectors })
}

impl Eigensystem {
    /// `hks_t(v) = Σ_k exp(−t λ_k) ψ_k(v)²`.
    pub fn hks(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(MstError::Validation(format!("HKS time must be finite and >= 0, got {t}")));
        }
        let decay: Vec<f64> = self.values.iter().map(|l| (-t * l).exp()).collect();
        let n = self.vectors.nrows();
        Ok((0..n)
            .map(|v| decay.iter().enumerate().map(|(k, d)| d * self.vectors[(v, k)].powi(2)).sum())
            .collect())
    }
}

/// Heat kernel signature of every vertex at diffusion time `t`.
pub fn hks(g: &Graph, t: f64) -> Result<Vec<f64>> {
    eigensystem(g)?.hks(t)
}

/// Linear-interpolation quantile of sorted data (the "linear" rule:
/// position `q·(n − 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// The `k` smallest eigenvalues (zero-padded) followed by the ten deciles of
/// `hks_t` for each `t` in `times`; length `k + 10·|times|`.
pub fn spectral_features(g: &Graph, times: &[f64], k: usize) -> Result<Vec<f64>> {
    let eig = eigensystem(g)?;
    let mut out: Vec<f64> = eig.values.iter().copied().take(k).collect();
    out.resize(k, 0.0);
    for &t in times {
        let mut h = eig.hks(t)?;
        h.sort_by(f64::total_cmp);
        out.extend(DECILE_LEVELS.iter().map(|&q| quantile_sorted(&h, q)));
    }
    Ok(out)
}
