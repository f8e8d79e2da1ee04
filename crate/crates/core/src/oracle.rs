//! Brute-force evaluation of the cubic multilinear oscillatory integral and
//! its stationary-phase coefficients, independent of the PDE solver.
//!
//! The object is
//! `P1(t, xi) = (2 pi)^(-1) iint e^(i t eta1 eta2)
//!     fhat(xi - eta2) conj(fhat(xi - eta1 - eta2)) fhat(xi - eta1) d eta1 d eta2`,
//! whose large-`t` expansion starts
//! `t^(-1) |fhat|^2 fhat + t^(-2) * i (2 fhat |fhat'|^2 + (fhat')^2 conj(fhat)
//!     + fhat^2 conj(fhat''))`.
//! The quadrature is plain tensor trapezoid with a phase-resolution
//! precondition; `t` is capped by a node budget rather than upgrading the
//! method.

use crate::fit::{fit_power_law, RateFit};
use crate::grid::{xi_derivative, GridError, GridSpec, SpectralField};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const DEFAULT_ETA_NODE_CAP: usize = 4096;
pub const DEFAULT_TRUNCATION_THRESHOLD: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(
        "phase resolution at t = {t} needs {required} nodes per axis \
         (cap {cap}); use a smaller t or a tighter truncation"
    )]
    EtaGridTooLarge { t: f64, required: usize, cap: usize },
    #[error("stationary coefficient (n, k) = ({n}, {k}) not implemented at order N > 1")]
    UnsupportedCoefficient { n: usize, k: usize },
    #[error("remainder fit needs at least 4 t values, got {0}")]
    TooFewTimes(usize),
    #[error("t_list must be geometric and increasing")]
    BadTimeList,
    #[error("evaluation time {0} must be >= 1")]
    BadTime(f64),
    #[error("nonlinearity index {0} has no direct quadrature (only n = 1)")]
    UnsupportedDirect(usize),
}

/// Fixed test profile for the oracle: an analytic Gaussian (evaluated
/// exactly, which keeps resolution-doubling checks meaningful) or a sampled
/// field (cubic interpolation, zero outside its grid).
#[derive(Debug, Clone)]
pub enum OracleProfile {
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    Sampled(SpectralField),
}

impl OracleProfile {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        OracleProfile::Gaussian {
            amplitude,
            width,
            center: 0.0,
        }
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        match self {
            OracleProfile::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let z = (xi - center) / width;
                Complex64::new(amplitude * (-z * z / 2.0).exp(), 0.0)
            }
            OracleProfile::Sampled(field) => field.sample_cubic(xi).unwrap_or_default(),
        }
    }

    /// Radius (about the profile center) past which `|fhat|` stays below
    /// `threshold` times its maximum.
    fn truncation_radius(&self, threshold: f64) -> f64 {
        match self {
            OracleProfile::Gaussian { width, .. } => width * (2.0 * (1.0 / threshold).ln()).sqrt(),
            OracleProfile::Sampled(field) => {
                let max = field.max_abs();
                let floor = threshold * max;
                let mut r = 0.0_f64;
                for (&xi, v) in field.grid.xi_nodes().iter().zip(&field.values) {
                    if v.norm() > floor {
                        r = r.max((xi - self.center()).abs());
                    }
                }
                r
            }
        }
    }

    fn center(&self) -> f64 {
        match self {
            OracleProfile::Gaussian { center, .. } => *center,
            OracleProfile::Sampled(_) => 0.0,
        }
    }

    /// Samples the profile onto a grid (for the finite-difference
    /// coefficient path).
    pub fn gridded(&self, grid: &GridSpec) -> SpectralField {
        SpectralField {
            grid: grid.clone(),
            values: grid.xi_nodes().iter().map(|&xi| self.eval(xi)).collect(),
        }
    }
}

/// Inputs of the direct quadrature.
#[derive(Debug, Clone)]
pub struct OracleInput {
    pub profile: OracleProfile,
    pub t: f64,
    pub xi_samples: Vec<f64>,
    pub eta_node_cap: usize,
    pub truncation_threshold: f64,
    /// Multiplies the node count demanded by the resolution rule; 2 halves
    /// `d eta` for convergence (resolution-doubling) checks.
    pub resolution_factor: usize,
}

impl OracleInput {
    pub fn new(profile: OracleProfile, t: f64, xi_samples: Vec<f64>) -> Self {
        OracleInput {
            profile,
            t,
            xi_samples,
            eta_node_cap: DEFAULT_ETA_NODE_CAP,
            truncation_threshold: DEFAULT_TRUNCATION_THRESHOLD,
            resolution_factor: 1,
        }
    }

    pub fn with_resolution_factor(mut self, factor: usize) -> Self {
        self.resolution_factor = factor.max(1);
        self
    }

    /// Nodes per axis demanded by the phase-resolution precondition
    /// `d eta <= pi / (4 t R)` at one evaluation frequency.
    fn nodes_required(&self, xi: f64) -> (usize, f64) {
        let r = self.truncation_radius(xi);
        let d_eta_max = PI / (4.0 * self.t * r);
        let mut n = ((2.0 * r / d_eta_max).ceil() as usize + 1) * self.resolution_factor;
        if n.is_multiple_of(2) {
            n += 1; // keep eta = 0 on the grid
        }
        (n, r)
    }

    fn truncation_radius(&self, xi: f64) -> f64 {
        self.profile.truncation_radius(self.truncation_threshold)
            + (xi - self.profile.center()).abs()
    }
}

/// Direct 2-D trapezoid quadrature of the cubic oscillatory integral at each
/// requested frequency.
pub fn direct_p1(input: &OracleInput) -> Result<Vec<Complex64>, OracleError> {
    if input.t < 1.0 {
        return Err(OracleError::BadTime(input.t));
    }
    input
        .xi_samples
        .iter()
        .map(|&xi| {
            let (n, r) = input.nodes_required(xi);
            if n > input.eta_node_cap {
                return Err(OracleError::EtaGridTooLarge {
                    t: input.t,
                    required: n,
                    cap: input.eta_node_cap,
                });
            }
            Ok(direct_p1_single(&input.profile, input.t, xi, n, r))
        })
        .collect()
}

/// One quadrature: `eta` nodes are `-r + j d`, `j = 0..n-1`, `d = 2r/(n-1)`.
/// The phase factor walks each row by multiplication with periodic exact
/// refresh, and the cross factor `fhat(xi - eta1 - eta2)` is precomputed on
/// the sum grid.
fn direct_p1_single(profile: &OracleProfile, t: f64, xi: f64, n: usize, r: f64) -> Complex64 {
    let d = 2.0 * r / (n - 1) as f64;
    let eta = |j: usize| -r + j as f64 * d;

    let line: Vec<Complex64> = (0..n).map(|j| profile.eval(xi - eta(j))).collect();
    let cross: Vec<Complex64> = (0..2 * n - 1)
        .map(|m| profile.eval(xi - (-2.0 * r + m as f64 * d)).conj())
        .collect();

    const REFRESH: usize = 512;
    let mut total = Complex64::default();
    for j in 0..n {
        let aj = line[j];
        if aj.norm_sqr() == 0.0 {
            continue;
        }
        let ej = eta(j);
        let step = Complex64::from_polar(1.0, t * ej * d);
        let mut phase = Complex64::from_polar(1.0, t * ej * -r);
        let mut row = Complex64::default();
        for k in 0..n {
            if k % REFRESH == 0 && k > 0 {
                phase = Complex64::from_polar(1.0, t * ej * eta(k));
            }
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            row += (line[k] * cross[j + k] * phase) * w;
            phase *= step;
        }
        let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        total += aj * row * wj;
    }
    total * (d * d / (2.0 * PI))
}

/// Stationary-phase coefficient `P^n_k` on the grid of `f_hat`, for the
/// implemented set `(n, k)` in `{(1,0), (1,1), (2,0)}`:
/// `P^1_0 = |f|^2 f`, `P^2_0 = |f|^4 f`,
/// `P^1_1 = i (2 f |f'|^2 + (f')^2 conj(f) + f^2 conj(f''))`.
pub fn stationary_coeff(
    f_hat: &SpectralField,
    n: usize,
    k: usize,
) -> Result<SpectralField, OracleError> {
    let values: Vec<Complex64> = match (n, k) {
        (1, 0) => f_hat.values.iter().map(|f| f * f.norm_sqr()).collect(),
        (2, 0) => f_hat
            .values
            .iter()
            .map(|f| f * f.norm_sqr().powi(2))
            .collect(),
        (1, 1) => {
            let d1 = xi_derivative(f_hat, 1)?.field;
            let d2 = xi_derivative(f_hat, 2)?.field;
            f_hat
                .values
                .iter()
                .zip(d1.values.iter().zip(&d2.values))
                .map(|(f, (f1, f2))| {
                    Complex64::i()
                        * (2.0 * f * f1.norm_sqr() + f1 * f1 * f.conj() + f * f * f2.conj())
                })
                .collect()
        }
        _ => return Err(OracleError::UnsupportedCoefficient { n, k }),
    };
    Ok(SpectralField {
        grid: f_hat.grid.clone(),
        values,
    })
}

/// Sup-norm over the sample frequencies of the order-`r` remainder
/// `P1(t) - sum_{k<r} t^(-k-1) P^1_k` for one `t`.
pub fn remainder_sup(
    input: &OracleInput,
    coeff_grid: &GridSpec,
    r: usize,
) -> Result<f64, OracleError> {
    let f_hat = input.profile.gridded(coeff_grid);
    let mut coeffs = Vec::new();
    for k in 0..r {
        coeffs.push(stationary_coeff(&f_hat, 1, k)?);
    }
    let direct = direct_p1(input)?;
    let mut sup: f64 = 0.0;
    for (&xi, d) in input.xi_samples.iter().zip(&direct) {
        let mut resid = *d;
        for (k, c) in coeffs.iter().enumerate() {
            let value = c.sample_cubic(xi).unwrap_or_default();
            resid -= value * input.t.powi(-(k as i32 + 1));
        }
        sup = sup.max(resid.norm());
    }
    Ok(sup)
}

/// Fits the decay exponent of the order-`r` remainder over a geometric time
/// list (at least 4 points).
pub fn remainder_rate(
    profile: &OracleProfile,
    coeff_grid: &GridSpec,
    r: usize,
    t_list: &[f64],
    xi_samples: &[f64],
    eta_node_cap: usize,
) -> Result<RateFit, OracleError> {
    if t_list.len() < 4 {
        return Err(OracleError::TooFewTimes(t_list.len()));
    }
    let ratio = t_list[1] / t_list[0];
    for w in t_list.windows(2) {
        if w[1] <= w[0] || ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6 {
            return Err(OracleError::BadTimeList);
        }
    }
    let mut sups = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let mut input = OracleInput::new(profile.clone(), t, xi_samples.to_vec());
        input.eta_node_cap = eta_node_cap;
        sups.push(remainder_sup(&input, coeff_grid, r)?);
    }
    fit_power_law(t_list, &sups).ok_or(OracleError::BadTimeList)
}
