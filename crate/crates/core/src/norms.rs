//! Weighted Sobolev norms and the bootstrap-norm monitor: the composite of
//! the energy norm, time-scaled weighted profile norms, derivative sup norms
//! of the modified profile, and the decay-scaled sup of `u`.

use crate::grid::{inverse_transform, weighted_l2_norm, xi_derivative, GridError};
use crate::solver::Snapshot;

#[derive(Debug, thiserror::Error)]
pub enum NormsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("need 1 <= d <= 4, got {0}")]
    BadDegree(usize),
    #[error("alphas must have even length >= 2, got {0}")]
    BadAlphas(usize),
}

/// Exponent ladder `alpha_0 .. alpha_{2N+1}` with ratio exactly 6 and the
/// top saturating `alpha_{2N+1} < 1/(16 d + 8)` with 10% margin.
pub fn default_alphas(n_order: usize, d: usize) -> Result<Vec<f64>, NormsError> {
    if !(1..=4).contains(&d) {
        return Err(NormsError::BadDegree(d));
    }
    let top_index = 2 * n_order + 1;
    let top = 0.9 / (16.0 * d as f64 + 8.0);
    Ok((0..=top_index)
        .map(|j| top * 6f64.powi(j as i32 - top_index as i32))
        .collect())
}

/// One bootstrap-norm evaluation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BootstrapReport {
    pub t: f64,
    /// `(sum (1 + xi^2) |uhat|^2 dxi)^(1/2)` (one spectral derivative).
    pub h1_norm: f64,
    /// `||<x>^j f||` for `j = 0 ..= 2N+1`.
    pub weighted: Vec<f64>,
    /// `sup |d^k what / d xi^k|` for `k = 0 ..= 2N`.
    pub w_sup: Vec<f64>,
    /// `sqrt(t) sup |u|`.
    pub decay: f64,
    pub alphas: Vec<f64>,
}

impl BootstrapReport {
    /// The time-scaled weighted components `t^(-alpha_j) ||<x>^j f||`.
    pub fn scaled_weighted(&self) -> Vec<f64> {
        self.weighted
            .iter()
            .zip(&self.alphas)
            .map(|(&w, &a)| self.t.powf(-a) * w)
            .collect()
    }
}

/// Evaluates every bootstrap component on one snapshot. The ladder length
/// fixes `N` (`len = 2N + 2`); `|uhat| = |fhat|` is used for the energy norm
/// so the report is frame-independent.
pub fn bootstrap_report(snap: &Snapshot, alphas: &[f64]) -> Result<BootstrapReport, NormsError> {
    if alphas.len() < 2 || !alphas.len().is_multiple_of(2) {
        return Err(NormsError::BadAlphas(alphas.len()));
    }
    let grid = &snap.f_hat.grid;
    let h1_norm = (snap
        .f_hat
        .values
        .iter()
        .zip(grid.xi_nodes())
        .map(|(v, &xi)| (1.0 + xi * xi) * v.norm_sqr())
        .sum::<f64>()
        * grid.dxi())
    .sqrt();

    let f = inverse_transform(&snap.f_hat)?;
    let weighted = (0..alphas.len())
        .map(|j| weighted_l2_norm(&f, j as f64))
        .collect();

    let top_k = alphas.len() - 2; // 2N
    let mut w_sup = vec![snap.w_hat.max_abs()];
    for k in 1..=top_k {
        w_sup.push(xi_derivative(&snap.w_hat, k)?.field.max_abs());
    }

    Ok(BootstrapReport {
        t: snap.t,
        h1_norm,
        weighted,
        w_sup,
        decay: snap.t.sqrt() * snap.sup_u(),
        alphas: alphas.to_vec(),
    })
}
