//! Profile and modified-profile bookkeeping, and the leading-order
//! far-field reconstruction of `u` from the profile.
//!
//! The profile is `f(t) = exp(-i t Delta / 2) u(t)`, i.e.
//! `fhat(t, xi) = exp(i t xi^2 / 2) uhat(t, xi)`; the modified profile is
//! `what = exp(i chi) fhat` with the solver-owned phase integral `chi`.

use crate::grid::{forward_transform, GridError, GridSpec, SpatialField, SpectralField};
use crate::solver::Snapshot;
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_4;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("time {0} is before the initial time 1")]
    BadTime(f64),
    #[error("chi length {got} does not match the field length {expected}")]
    ChiLength { got: usize, expected: usize },
    #[error("empty evaluation window at t = {0}")]
    EmptyWindow(f64),
}

/// The profile data carried by one output time: `fhat`, `what`, and the
/// phase integral (`F = i chi`, `Theta = exp(i chi)` in that order).
#[derive(Debug, Clone)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub f_hat: SpectralField,
    pub w_hat: SpectralField,
    pub chi: Vec<f64>,
}

impl ProfileSnapshot {
    pub fn from_snapshot(snap: &Snapshot) -> Self {
        ProfileSnapshot {
            t: snap.t,
            f_hat: snap.f_hat.clone(),
            w_hat: snap.w_hat.clone(),
            chi: snap.chi.clone(),
        }
    }

    /// Largest deviation of `|what| - |fhat|`, which a unimodular phase
    /// correction must keep at rounding level.
    pub fn unimodularity_defect(&self) -> f64 {
        self.f_hat
            .values
            .iter()
            .zip(&self.w_hat.values)
            .map(|(f, w)| (f.norm() - w.norm()).abs())
            .fold(0.0_f64, f64::max)
    }
}

/// `fhat(t, xi) = exp(i t xi^2 / 2) uhat(xi)`.
pub fn profile_of(u: &SpatialField, t: f64) -> Result<SpectralField, ProfileError> {
    if t < 1.0 {
        return Err(ProfileError::BadTime(t));
    }
    let mut f_hat = forward_transform(u)?;
    for (v, &xi) in f_hat.values.iter_mut().zip(u.grid.xi_nodes()) {
        *v *= Complex64::from_polar(1.0, t * xi * xi / 2.0);
    }
    Ok(f_hat)
}

/// `what = exp(i chi) fhat`, bin-wise.
pub fn modified_profile(f_hat: &SpectralField, chi: &[f64]) -> Result<SpectralField, ProfileError> {
    if chi.len() != f_hat.values.len() {
        return Err(ProfileError::ChiLength {
            got: chi.len(),
            expected: f_hat.values.len(),
        });
    }
    Ok(SpectralField {
        grid: f_hat.grid.clone(),
        values: f_hat
            .values
            .iter()
            .zip(chi)
            .map(|(f, &c)| f * Complex64::from_polar(1.0, c))
            .collect(),
    })
}

/// Fraction of the co-moving window retained for far-field evaluation.
pub const ASYMPTOTIC_WINDOW_FRACTION: f64 = 0.8;

/// A spatial field with a validity mask (false outside the evaluation window).
#[derive(Debug, Clone)]
pub struct MaskedSpatialField {
    pub field: SpatialField,
    pub mask: Vec<bool>,
}

/// Leading far-field form `exp(i x^2 / 2t) (it)^(-1/2) fhat(t, x/t)` at one
/// point; `None` when `x/t` leaves the retained frequency window.
pub fn asymptotic_order0_at(f_hat: &SpectralField, t: f64, x: f64) -> Option<Complex64> {
    let xi = x / t;
    if xi.abs() > ASYMPTOTIC_WINDOW_FRACTION * f_hat.grid.xi_max() {
        return None;
    }
    let value = f_hat.sample_cubic(xi)?;
    Some(value * Complex64::from_polar(t.sqrt().recip(), x * x / (2.0 * t) - FRAC_PI_4))
}

/// Evaluates the leading far-field form on the nodes of `grid_out`,
/// returning zero with a cleared mask outside the window `|x| <= 0.8 t ximax`.
pub fn reconstruct_u_asymptotic_order0(
    f_hat: &SpectralField,
    t: f64,
    grid_out: &GridSpec,
) -> Result<MaskedSpatialField, ProfileError> {
    if t < 1.0 {
        return Err(ProfileError::BadTime(t));
    }
    let mut values = vec![Complex64::default(); grid_out.n_points()];
    let mut mask = vec![false; grid_out.n_points()];
    let mut any = false;
    for (i, &x) in grid_out.x_nodes().iter().enumerate() {
        if let Some(v) = asymptotic_order0_at(f_hat, t, x) {
            values[i] = v;
            mask[i] = true;
            any = true;
        }
    }
    if !any {
        return Err(ProfileError::EmptyWindow(t));
    }
    Ok(MaskedSpatialField {
        field: SpatialField {
            grid: grid_out.clone(),
            values,
        },
        mask,
    })
}
