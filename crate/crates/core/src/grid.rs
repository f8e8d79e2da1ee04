//! Uniform periodic spatial grid, its dual frequency grid, the unitary
//! transform pair, and discrete derivative/weight operators.
//!
//! The transform convention is `phat(xi) = (2*pi)^(-1/2) * integral e^(-i*x*xi) phi(x) dx`,
//! discretized with the rectangle rule so that Plancherel holds exactly:
//! `sum |phat|^2 dxi = sum |phi|^2 dx`. Frequencies are stored in signed,
//! sorted order; all FFT index shuffling stays inside the transform routines.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("n_points must be a power of two >= 16, got {0}")]
    BadPointCount(usize),
    #[error("half_width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("field length {got} does not match grid n_points {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("non-finite value at index {index} in {context}")]
    NonFinite { context: &'static str, index: usize },
    #[error("derivative order {0} not supported (expected 1..=4)")]
    BadDerivativeOrder(usize),
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug)]
struct GridData {
    n: usize,
    half_width: f64,
    dx: f64,
    dxi: f64,
    x: Vec<f64>,
    xi: Vec<f64>,
}

/// Uniform grid on `[-L, L)` with its dual frequency grid `[-pi/dx, pi/dx)`.
///
/// Cheap to clone; the node tables are shared.
#[derive(Debug, Clone)]
pub struct GridSpec {
    data: Arc<GridData>,
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.data.n == other.data.n && self.data.half_width == other.data.half_width
    }
}

impl GridSpec {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self, GridError> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(GridError::BadPointCount(n_points));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        let n = n_points;
        let dx = 2.0 * half_width / n as f64;
        let dxi = PI / half_width;
        let x = (0..n).map(|j| -half_width + j as f64 * dx).collect();
        let xi = (0..n).map(|k| (k as f64 - (n / 2) as f64) * dxi).collect();
        Ok(GridSpec {
            data: Arc::new(GridData {
                n,
                half_width,
                dx,
                dxi,
                x,
                xi,
            }),
        })
    }

    pub fn n_points(&self) -> usize {
        self.data.n
    }
    pub fn half_width(&self) -> f64 {
        self.data.half_width
    }
    pub fn dx(&self) -> f64 {
        self.data.dx
    }
    pub fn dxi(&self) -> f64 {
        self.data.dxi
    }
    pub fn x_nodes(&self) -> &[f64] {
        &self.data.x
    }
    pub fn xi_nodes(&self) -> &[f64] {
        &self.data.xi
    }
    pub fn xi_max(&self) -> f64 {
        PI / self.data.dx
    }
}

fn check_finite(values: &[Complex64], context: &'static str) -> Result<(), GridError> {
    for (index, v) in values.iter().enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(GridError::NonFinite { context, index });
        }
    }
    Ok(())
}

/// Complex samples of a function of `x` on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

/// Complex samples of a function of `xi` on the sorted frequency nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

macro_rules! field_impl {
    ($ty:ident, $ctx:literal) => {
        impl $ty {
            pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self, GridError> {
                if values.len() != grid.n_points() {
                    return Err(GridError::LengthMismatch {
                        got: values.len(),
                        expected: grid.n_points(),
                    });
                }
                check_finite(&values, $ctx)?;
                Ok(Self { grid, values })
            }

            pub fn zeros(grid: GridSpec) -> Self {
                let n = grid.n_points();
                Self {
                    grid,
                    values: vec![Complex64::default(); n],
                }
            }

            pub fn max_abs(&self) -> f64 {
                self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
            }

            /// Largest |value| over the outer 10% of nodes (5% each side),
            /// relative to the global maximum. Zero fields report 0.
            pub fn boundary_tail_fraction(&self) -> f64 {
                let n = self.values.len();
                let edge = (n / 20).max(1);
                let max = self.max_abs();
                if max == 0.0 {
                    return 0.0;
                }
                let mut tail = 0.0_f64;
                for v in self.values[..edge].iter().chain(&self.values[n - edge..]) {
                    tail = tail.max(v.norm());
                }
                tail / max
            }
        }
    };
}

field_impl!(SpatialField, "spatial field");
field_impl!(SpectralField, "spectral field");

impl SpatialField {
    /// Rectangle-rule L2 norm, `(sum |phi|^2 dx)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    /// Fraction of `sum |phi|^2` carried by the outer 10% of nodes.
    pub fn outer_mass_fraction(&self) -> f64 {
        outer_mass_fraction(&self.values)
    }
}

impl SpectralField {
    /// Rectangle-rule L2 norm, `(sum |phat|^2 dxi)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dxi()).sqrt()
    }

    pub fn outer_mass_fraction(&self) -> f64 {
        outer_mass_fraction(&self.values)
    }

    /// 4-point Lagrange interpolation at an arbitrary frequency; `None`
    /// outside the grid range. Exact on the nodes.
    pub fn sample_cubic(&self, xi: f64) -> Option<Complex64> {
        let nodes = self.grid.xi_nodes();
        let n = nodes.len();
        let h = self.grid.dxi();
        let pos = (xi - nodes[0]) / h;
        if !(0.0..=(n - 1) as f64).contains(&pos) {
            return None;
        }
        // Stencil nodes k0-1 .. k0+2, clamped to the grid.
        let k0 = (pos.floor() as usize).clamp(1, n - 3);
        let t = pos - k0 as f64;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t * t - 1.0) * (t - 2.0) / 2.0,
            -t * (t + 1.0) * (t - 2.0) / 2.0,
            t * (t * t - 1.0) / 6.0,
        ];
        let mut acc = Complex64::default();
        for (j, wj) in w.iter().enumerate() {
            acc += self.values[k0 - 1 + j] * *wj;
        }
        Some(acc)
    }
}

fn outer_mass_fraction(values: &[Complex64]) -> f64 {
    let n = values.len();
    let edge = (n / 20).max(1);
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = values[..edge]
        .iter()
        .chain(&values[n - edge..])
        .map(|v| v.norm_sqr())
        .sum();
    outer / total
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Reusable in-place transform pair for one grid size. Owns FFT scratch, so
/// each worker thread keeps its own instance.
pub struct Transformer {
    n: usize,
    dx: f64,
    dxi: f64,
    parity: f64,
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Transformer {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n_points();
        let (fwd, inv) = PLANNER.with(|p| {
            let mut planner = p.borrow_mut();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        });
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Transformer {
            n,
            dx: grid.dx(),
            dxi: grid.dxi(),
            parity: if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 },
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    /// In-place version of [`forward_transform`]: x-ordered samples in,
    /// sorted-frequency samples out.
    pub fn forward_in_place(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (j, v) in buf.iter_mut().enumerate() {
            if j % 2 == 1 {
                *v = -*v;
            }
        }
        self.fwd.process_with_scratch(buf, &mut self.scratch);
        let scale = self.dx / (2.0 * PI).sqrt();
        for (k, v) in buf.iter_mut().enumerate() {
            let sign = if k % 2 == 0 {
                self.parity
            } else {
                -self.parity
            };
            *v *= scale * sign;
        }
    }

    /// In-place version of [`inverse_transform`].
    pub fn inverse_in_place(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        for (k, v) in buf.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let scale = self.dxi / (2.0 * PI).sqrt();
        for (j, v) in buf.iter_mut().enumerate() {
            let sign = if j % 2 == 0 {
                self.parity
            } else {
                -self.parity
            };
            *v *= scale * sign;
        }
    }
}

fn fft_in_place(buf: &mut [Complex64], forward: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if forward {
            planner.plan_fft_forward(buf.len())
        } else {
            planner.plan_fft_inverse(buf.len())
        };
        fft.process(buf);
    });
}

/// Discrete version of `phat(xi_k) = (dx / sqrt(2 pi)) * sum_j e^(-i x_j xi_k) phi(x_j)`.
///
/// With `x_j = -L + j dx` and `xi_k = (k - n/2) dxi` the node phases reduce to
/// exact sign flips around a plain FFT, so the map is unitary to rounding.
pub fn forward_transform(field: &SpatialField) -> Result<SpectralField, GridError> {
    check_finite(&field.values, "forward_transform input")?;
    let grid = &field.grid;
    let n = grid.n_points();
    let scale = grid.dx() / (2.0 * PI).sqrt();
    let parity = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut buf: Vec<Complex64> = field
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
        .collect();
    fft_in_place(&mut buf, true);
    for (k, v) in buf.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { parity } else { -parity };
        *v *= scale * sign;
    }
    Ok(SpectralField {
        grid: grid.clone(),
        values: buf,
    })
}

/// Exact discrete inverse of [`forward_transform`].
pub fn inverse_transform(field: &SpectralField) -> Result<SpatialField, GridError> {
    check_finite(&field.values, "inverse_transform input")?;
    let grid = &field.grid;
    let n = grid.n_points();
    let scale = grid.dxi() / (2.0 * PI).sqrt();
    let parity = if (n / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut buf: Vec<Complex64> = field
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { *v } else { -*v })
        .collect();
    fft_in_place(&mut buf, false);
    for (j, v) in buf.iter_mut().enumerate() {
        let sign = if j % 2 == 0 { parity } else { -parity };
        *v *= scale * sign;
    }
    Ok(SpatialField {
        grid: grid.clone(),
        values: buf,
    })
}

/// Finite-difference derivative in `xi` with a boundary-decay diagnostic.
#[derive(Debug, Clone)]
pub struct XiDerivative {
    pub field: SpectralField,
    /// Set when the input fails the decay precondition (<= 1e-10 of max in
    /// the outer 10% of the grid). The derivative is still computed.
    pub decay_warning: bool,
}

const DECAY_PRECONDITION: f64 = 1e-10;

/// Solve for finite-difference weights on integer offsets: the returned `w`
/// satisfies `sum_j w_j p(o_j) = p^(order)(0)` for all polynomials `p` with
/// `deg p < len(offsets)`, on a unit-spaced grid.
fn fd_weights(offsets: &[i64], order: usize) -> Vec<f64> {
    let m = offsets.len();
    // Vandermonde system: sum_j w_j o_j^r / r! = [r == order], r = 0..m-1.
    let mut a = vec![vec![0.0_f64; m + 1]; m];
    for (r, row) in a.iter_mut().enumerate() {
        let mut rfact = 1.0;
        for q in 1..=r {
            rfact *= q as f64;
        }
        for (j, &o) in offsets.iter().enumerate() {
            row[j] = (o as f64).powi(r as i32) / rfact;
        }
        row[m] = if r == order { 1.0 } else { 0.0 };
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col] / p;
                for (cell, &v) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *cell -= f * v;
                }
            }
        }
    }
    let mut w: Vec<f64> = (0..m).map(|r| a[r][m] / a[r][r]).collect();
    // Re-balance so the weights annihilate constants to rounding: dump the
    // residual of the zeroth moment onto the offset-0 node.
    let resid: f64 = w.iter().sum();
    if let Some(z) = offsets.iter().position(|&o| o == 0) {
        w[z] -= resid;
    }
    w
}

/// Centered 4th-order finite differences in `xi` (one-sided at the edges).
///
/// Finite differences rather than spectral differentiation: the extracted
/// limit objects live natively on the frequency grid and are not periodic
/// there, but they decay, which keeps the stencils accurate.
pub fn xi_derivative(field: &SpectralField, order: usize) -> Result<XiDerivative, GridError> {
    if !(1..=4).contains(&order) {
        return Err(GridError::BadDerivativeOrder(order));
    }
    let n = field.grid.n_points();
    let h = field.grid.dxi();
    let decay_warning = field.boundary_tail_fraction() > DECAY_PRECONDITION;

    // 5-point stencils for orders 1-2, 7-point for orders 3-4; all 4th-order
    // accurate in the interior.
    let (half, edge_pts) = match order {
        1 => (2usize, 5usize),
        2 => (2, 6),
        3 => (3, 7),
        4 => (3, 8),
        _ => unreachable!(),
    };
    let centered: Vec<i64> = (-(half as i64)..=half as i64).collect();
    let w_center = fd_weights(&centered, order);
    let hp = h.powi(order as i32);

    // Differencing against the evaluation node makes the stencil annihilate
    // constants bitwise (the weights sum to zero).
    let apply = |start: usize, center: usize, weights: &[f64]| -> Complex64 {
        let base = field.values[center];
        let mut acc = Complex64::default();
        for (j, w) in weights.iter().enumerate() {
            acc += (field.values[start + j] - base) * *w;
        }
        acc / hp
    };

    let mut out = vec![Complex64::default(); n];
    for (i, o) in out.iter_mut().enumerate() {
        if i >= half && i + half < n {
            *o = apply(i - half, i, &w_center);
        } else {
            // Shifted stencil pinned to the nearest boundary.
            let start = if i < half { 0 } else { n - edge_pts };
            let offs: Vec<i64> = (0..edge_pts)
                .map(|j| (start + j) as i64 - i as i64)
                .collect();
            *o = apply(start, i, &fd_weights(&offs, order));
        }
    }

    Ok(XiDerivative {
        field: SpectralField {
            grid: field.grid.clone(),
            values: out,
        },
        decay_warning,
    })
}

/// Weighted L2 norm `(sum (1+x^2)^m |phi|^2 dx)^(1/2)`, i.e. the norm of
/// `<x>^m phi` under the rectangle rule.
pub fn weighted_l2_norm(field: &SpatialField, weight_power: f64) -> f64 {
    assert!(
        weight_power >= 0.0,
        "weight power must be non-negative, got {weight_power}"
    );
    let dx = field.grid.dx();
    let sum: f64 = field
        .grid
        .x_nodes()
        .iter()
        .zip(&field.values)
        .map(|(&x, v)| (1.0 + x * x).powf(weight_power) * v.norm_sqr())
        .sum();
    (sum * dx).sqrt()
}
