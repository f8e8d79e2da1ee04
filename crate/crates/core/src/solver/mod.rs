//! Long-time split-step integration of
//! `i u_t + u_xx / 2 = sum_{n=1..d} lambda_n |u|^(2n) u` from `t = 1`.
//!
//! Strang splitting with two exactly unitary substeps: the kinetic half-step
//! multiplies the spectrum by `exp(-i tau xi^2 / 2)`, and the gauge-invariant
//! nonlinearity leaves `|u|` pointwise invariant, so its flow is the exact
//! phase rotation `u -> u exp(-i tau sum_n lambda_n |u|^(2n))`.
//!
//! Two engines share the snapshot format: the fixed-box stepper in this
//! module, and the co-moving frame in [`comoving`] for horizons where
//! dispersion outruns any affordable fixed box.

pub mod comoving;

use crate::grid::{
    forward_transform, GridError, GridSpec, SpatialField, SpectralField, Transformer,
};
use num_complex::Complex64;

pub const MAX_NONLINEARITY_TERMS: usize = 4;
pub const MAX_DT: f64 = 0.01;
/// Outer-grid mass fraction above which a run is flagged for aliasing.
pub const ALIASING_THRESHOLD: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("nonlinearity must have 1..=4 finite coefficients, got {0:?}")]
    BadNonlinearity(Vec<f64>),
    #[error("initial width {width} under-resolved: needs width >= 8 dx = {min}")]
    UnderResolvedWidth { width: f64, min: f64 },
    #[error("amplitude {0} outside the small-data regime (<= 0.5)")]
    AmplitudeTooLarge(f64),
    #[error("time step {0} invalid: need 0 < |dt| <= 0.01")]
    BadTimeStep(f64),
    #[error("non-finite field after step {step} at t = {t}; last good state kept by caller")]
    Blowup { t: f64, step: u64 },
}

/// Coefficient vector `(lambda_1, ..., lambda_d)` of the polynomial
/// nonlinearity. The all-zero vector is allowed as an explicit free mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    lambdas: Vec<f64>,
}

impl NonlinearitySpec {
    pub fn new(lambdas: Vec<f64>) -> Result<Self, SolverError> {
        if lambdas.is_empty()
            || lambdas.len() > MAX_NONLINEARITY_TERMS
            || lambdas.iter().any(|l| !l.is_finite())
        {
            return Err(SolverError::BadNonlinearity(lambdas));
        }
        Ok(NonlinearitySpec { lambdas })
    }

    pub fn free() -> Self {
        NonlinearitySpec { lambdas: vec![0.0] }
    }

    pub fn cubic(lambda1: f64) -> Self {
        NonlinearitySpec::new(vec![lambda1]).unwrap()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Coefficient of `|u|^(2n) u`; zero beyond the stored degree.
    pub fn lambda(&self, n: usize) -> f64 {
        assert!(n >= 1);
        self.lambdas.get(n - 1).copied().unwrap_or(0.0)
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda(1)
    }

    pub fn is_free(&self) -> bool {
        self.lambdas.iter().all(|&l| l == 0.0)
    }

    /// `sum_n lambda_n a^n` for `a = |u|^2`.
    fn potential_phase(&self, amp2: f64) -> f64 {
        let mut acc = 0.0;
        let mut p = 1.0;
        for &l in &self.lambdas {
            p *= amp2;
            acc += l * p;
        }
        acc
    }
}

/// Integrator state: time, field, and the accumulated phase integral
/// `chi(t, xi) = lambda_1 * integral_1^t |fhat(s, xi)|^2 / s ds` on the
/// frequency grid. `chi` is owned here; downstream modules only repackage it.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: f64,
    pub u: SpatialField,
    pub chi: Vec<f64>,
    pub step_count: u64,
}

impl SimulationState {
    pub fn new(t: f64, u: SpatialField) -> Self {
        let n = u.grid.n_points();
        SimulationState {
            t,
            u,
            chi: vec![0.0; n],
            step_count: 0,
        }
    }
}

/// Norms of the prepared data reported by [`initial_data_gaussian`].
#[derive(Debug, Clone, Copy)]
pub struct InitialDataReport {
    /// `||u_1||` with one spectral derivative weight, `(sum (1+xi^2)|uhat|^2 dxi)^(1/2)`.
    pub h1_norm: f64,
    /// `||<x>^3 f_1||` in L2.
    pub f_weighted3_norm: f64,
}

/// Builds `f_1(x) = eps exp(-x^2 / 2 w^2)` and the state `u_1 = exp(i Delta/2) f_1`
/// at `t = 1` with `chi = 0`.
pub fn initial_data_gaussian(
    epsilon: f64,
    width: f64,
    grid: &GridSpec,
) -> Result<(SimulationState, InitialDataReport), SolverError> {
    if !(epsilon.is_finite() && (0.0..=0.5).contains(&epsilon)) {
        return Err(SolverError::AmplitudeTooLarge(epsilon));
    }
    let min_width = 8.0 * grid.dx();
    if !(width.is_finite() && width >= min_width) {
        return Err(SolverError::UnderResolvedWidth {
            width,
            min: min_width,
        });
    }
    let f1 = SpatialField::new(
        grid.clone(),
        grid.x_nodes()
            .iter()
            .map(|&x| Complex64::new(epsilon * (-x * x / (2.0 * width * width)).exp(), 0.0))
            .collect(),
    )?;
    let state = state_from_profile(&f1, 1.0)?;
    let u_hat = forward_transform(&state.u)?;
    let h1_norm = (u_hat
        .values
        .iter()
        .zip(grid.xi_nodes())
        .map(|(v, &xi)| (1.0 + xi * xi) * v.norm_sqr())
        .sum::<f64>()
        * grid.dxi())
    .sqrt();
    let f_weighted3_norm = crate::grid::weighted_l2_norm(&f1, 3.0);
    Ok((
        state,
        InitialDataReport {
            h1_norm,
            f_weighted3_norm,
        },
    ))
}

/// State at time `t0` whose profile is the given `f`, i.e.
/// `u = exp(i t0 Delta / 2) f`; used for Gaussian and tabulated data alike.
pub fn state_from_profile(f: &SpatialField, t0: f64) -> Result<SimulationState, SolverError> {
    if t0 < 1.0 {
        return Err(SolverError::BadConfig(format!("t0 = {t0} < 1")));
    }
    let mut f_hat = forward_transform(f)?;
    for (v, &xi) in f_hat.values.iter_mut().zip(f.grid.xi_nodes()) {
        *v *= Complex64::from_polar(1.0, -t0 * xi * xi / 2.0);
    }
    let u = crate::grid::inverse_transform(&f_hat)?;
    Ok(SimulationState::new(t0, u))
}

/// Fixed-box Strang stepper with reusable buffers.
pub struct BoxStepper {
    grid: GridSpec,
    nl: NonlinearitySpec,
    transformer: Transformer,
    kinetic_dt: f64,
    kinetic_half: Vec<Complex64>,
}

impl BoxStepper {
    pub fn new(grid: &GridSpec, nl: &NonlinearitySpec) -> Self {
        BoxStepper {
            grid: grid.clone(),
            nl: nl.clone(),
            transformer: Transformer::new(grid),
            kinetic_dt: f64::NAN,
            kinetic_half: vec![Complex64::default(); grid.n_points()],
        }
    }

    fn kinetic_multiplier(&mut self, dt: f64) {
        if self.kinetic_dt.to_bits() != dt.to_bits() {
            for (m, &xi) in self.kinetic_half.iter_mut().zip(self.grid.xi_nodes()) {
                *m = Complex64::from_polar(1.0, -dt / 4.0 * xi * xi);
            }
            self.kinetic_dt = dt;
        }
    }

    /// One Strang step `K(dt/2) N(dt) K(dt/2)`, advancing `chi` by the
    /// trapezoid rule on the step endpoints (in `log s` once `s >= 10`,
    /// where the integrand is smooth on logarithmic timescales).
    pub fn step(
        &mut self,
        state: &SimulationState,
        dt: f64,
    ) -> Result<SimulationState, SolverError> {
        if !(dt.is_finite() && dt != 0.0 && dt.abs() <= MAX_DT + 1e-15) {
            return Err(SolverError::BadTimeStep(dt));
        }
        let lambda1 = self.nl.lambda1();
        let t0 = state.t;
        let t1 = state.t + dt;
        self.kinetic_multiplier(dt);

        let mut buf = state.u.values.clone();
        self.transformer.forward_in_place(&mut buf);
        let fhat2_start: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
        for (v, m) in buf.iter_mut().zip(&self.kinetic_half) {
            *v *= m;
        }
        self.transformer.inverse_in_place(&mut buf);
        for v in buf.iter_mut() {
            let phase = dt * self.nl.potential_phase(v.norm_sqr());
            *v *= Complex64::from_polar(1.0, -phase);
        }
        self.transformer.forward_in_place(&mut buf);
        for (v, m) in buf.iter_mut().zip(&self.kinetic_half) {
            *v *= m;
        }
        let fhat2_end: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
        self.transformer.inverse_in_place(&mut buf);

        if buf.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(SolverError::Blowup {
                t: t0,
                step: state.step_count,
            });
        }

        let mut chi = state.chi.clone();
        if lambda1 != 0.0 {
            // |fhat| = |uhat| (the profile multiplier is unimodular).
            if t0.min(t1) >= 10.0 {
                let half_dlog = 0.5 * (t1 / t0).ln();
                for (c, (a, b)) in chi.iter_mut().zip(fhat2_start.iter().zip(&fhat2_end)) {
                    *c += lambda1 * half_dlog * (a + b);
                }
            } else {
                let half_dt = 0.5 * dt;
                for (c, (a, b)) in chi.iter_mut().zip(fhat2_start.iter().zip(&fhat2_end)) {
                    *c += lambda1 * half_dt * (a / t0 + b / t1);
                }
            }
        }

        Ok(SimulationState {
            t: t1,
            u: SpatialField {
                grid: self.grid.clone(),
                values: buf,
            },
            chi,
            step_count: state.step_count + 1,
        })
    }
}

/// Snapshot of an arbitrary box state (profile, modified profile,
/// conserved quantities), as emitted by [`run`].
pub fn snapshot_of_state(state: &SimulationState, nl: &NonlinearitySpec) -> Snapshot {
    let mut transformer = Transformer::new(&state.u.grid);
    make_snapshot(state, &mut transformer, nl)
}

/// Single-step convenience entry point; builds a throwaway stepper.
pub fn step(
    state: &SimulationState,
    dt: f64,
    nl: &NonlinearitySpec,
) -> Result<SimulationState, SolverError> {
    BoxStepper::new(&state.u.grid, nl).step(state, dt)
}

/// Exact flow of the nonlinear substep alone (test hook): `|u|` is invariant
/// and the phase rotates by `-tau sum_n lambda_n |u|^(2n)` pointwise.
pub fn nonlinear_substep(u: &SpatialField, tau: f64, nl: &NonlinearitySpec) -> SpatialField {
    let values = u
        .values
        .iter()
        .map(|v| v * Complex64::from_polar(1.0, -tau * nl.potential_phase(v.norm_sqr())))
        .collect();
    SpatialField {
        grid: u.grid.clone(),
        values,
    }
}

/// Exact flow of the kinetic substep alone (test hook).
pub fn kinetic_substep(u: &SpatialField, tau: f64) -> Result<SpatialField, SolverError> {
    let mut u_hat = forward_transform(u)?;
    for (v, &xi) in u_hat.values.iter_mut().zip(u.grid.xi_nodes()) {
        *v *= Complex64::from_polar(1.0, -tau * xi * xi / 2.0);
    }
    Ok(crate::grid::inverse_transform(&u_hat)?)
}

/// Mass `||u||^2` and energy
/// `E = integral |u_x|^2/2 + sum_n lambda_n |u|^(2n+2)/(2n+2) dx`,
/// with the derivative evaluated spectrally.
pub fn conserved_quantities(state: &SimulationState, nl: &NonlinearitySpec) -> (f64, f64) {
    conserved_of_field(&state.u, nl)
}

pub(crate) fn conserved_of_field(u: &SpatialField, nl: &NonlinearitySpec) -> (f64, f64) {
    let grid = &u.grid;
    let mass: f64 = u.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx();
    let u_hat = forward_transform(u).expect("finite field");
    let kinetic: f64 = 0.5
        * u_hat
            .values
            .iter()
            .zip(grid.xi_nodes())
            .map(|(v, &xi)| xi * xi * v.norm_sqr())
            .sum::<f64>()
        * grid.dxi();
    let mut potential = 0.0;
    for (n, &l) in nl.lambdas().iter().enumerate() {
        if l != 0.0 {
            // lambda_n |u|^(2n+2) / (n+1): the antiderivative of the
            // nonlinear symbol, which is what the flow actually conserves.
            let p = n as i32 + 2;
            let integral: f64 =
                u.values.iter().map(|v| v.norm_sqr().powi(p)).sum::<f64>() * grid.dx();
            potential += l / p as f64 * integral;
        }
    }
    (mass, kinetic + potential)
}

/// Which coordinates the snapshot's `u` samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Samples at the grid's x nodes.
    FixedBox,
    /// Samples at the co-moving points `x = t * xi_k`.
    Comoving,
}

/// One output record of a run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    /// Steps taken since the run started (persisted for restart records).
    pub step_count: u64,
    /// The engine's raw evolution field: `u` in the fixed box, the
    /// co-moving field in the lens frame. Enough to restart from.
    pub state_values: Vec<Complex64>,
    /// Physical-space samples of `u`; see [`Trajectory::u_points`].
    pub u_values: Vec<Complex64>,
    pub f_hat: SpectralField,
    pub w_hat: SpectralField,
    pub chi: Vec<f64>,
    pub mass: f64,
    pub energy: f64,
    pub outer_x_mass: f64,
    pub outer_xi_mass: f64,
}

impl Snapshot {
    pub fn sup_u(&self) -> f64 {
        self.u_values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub nonlinearity: NonlinearitySpec,
    pub frame: Frame,
    pub snapshots: Vec<Snapshot>,
    /// Set when any snapshot put more than [`ALIASING_THRESHOLD`] of its mass
    /// in the outer 10% of either grid.
    pub aliasing_flagged: bool,
}

impl Trajectory {
    /// Physical x coordinates of `snapshot.u_values`.
    pub fn u_points(&self, snapshot: &Snapshot) -> Vec<f64> {
        match self.frame {
            Frame::FixedBox => self.grid.x_nodes().to_vec(),
            Frame::Comoving => self
                .grid
                .xi_nodes()
                .iter()
                .map(|&xi| xi * snapshot.t)
                .collect(),
        }
    }

    /// Snapshot with output time nearest `t`, accepted within 20%: half the
    /// default geometric output spacing with margin.
    pub fn snapshot_near(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .filter(|s| (s.t - t).abs() <= 0.2 * t)
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("non-empty trajectory")
    }
}

/// Run configuration: base step, geometric output times `t0 * r^m`, optional
/// extra output times, and the end time.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub dt_base: f64,
    pub t_end: f64,
    pub output_ratio: f64,
    pub extra_output_times: Vec<f64>,
}

impl SolverConfig {
    pub fn new(dt_base: f64, t_end: f64) -> Result<Self, SolverError> {
        let cfg = SolverConfig {
            dt_base,
            t_end,
            output_ratio: 2f64.powf(0.25),
            extra_output_times: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_ratio(mut self, r: f64) -> Result<Self, SolverError> {
        self.output_ratio = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_extra_outputs(mut self, times: Vec<f64>) -> Self {
        self.extra_output_times = times;
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt_base > 0.0 && self.dt_base <= MAX_DT) {
            return Err(SolverError::BadConfig(format!(
                "dt_base = {} outside (0, {MAX_DT}]",
                self.dt_base
            )));
        }
        if self.output_ratio <= 1.0 || self.output_ratio.is_nan() {
            return Err(SolverError::BadConfig(format!(
                "output ratio {} must exceed 1",
                self.output_ratio
            )));
        }
        if self.t_end < 1.0 || self.t_end.is_nan() {
            return Err(SolverError::BadConfig(format!(
                "t_end = {} must be >= 1",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Output times for a run starting at `t0`, always including `t0` and
    /// `t_end`, merged with the extra times, sorted and deduplicated.
    pub fn output_times(&self, t0: f64) -> Vec<f64> {
        let mut times = vec![t0];
        let mut t = t0;
        loop {
            t *= self.output_ratio;
            if t >= self.t_end * (1.0 - 1e-12) {
                break;
            }
            times.push(t);
        }
        times.push(self.t_end);
        times.extend(
            self.extra_output_times
                .iter()
                .copied()
                .filter(|&e| e > t0 && e < self.t_end),
        );
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        times
    }
}

/// Local step size: ramps linearly with `t` up to the base step, hard-capped.
/// Error per unit time shrinks as the solution decays; the cap protects the
/// chi quadrature.
pub fn dt_schedule(dt_base: f64, t: f64) -> f64 {
    (dt_base * (t / 10.0).min(1.0)).min(MAX_DT)
}

fn make_snapshot(
    state: &SimulationState,
    transformer: &mut Transformer,
    nl: &NonlinearitySpec,
) -> Snapshot {
    let grid = &state.u.grid;
    let mut buf = state.u.values.clone();
    transformer.forward_in_place(&mut buf);
    let outer_xi_mass = outer_fraction(&buf);
    let mut f_hat_values = buf;
    for (v, &xi) in f_hat_values.iter_mut().zip(grid.xi_nodes()) {
        *v *= Complex64::from_polar(1.0, state.t * xi * xi / 2.0);
    }
    let w_hat_values: Vec<Complex64> = f_hat_values
        .iter()
        .zip(&state.chi)
        .map(|(f, &c)| f * Complex64::from_polar(1.0, c))
        .collect();
    let (mass, energy) = conserved_of_field(&state.u, nl);
    Snapshot {
        t: state.t,
        step_count: state.step_count,
        state_values: state.u.values.clone(),
        u_values: state.u.values.clone(),
        f_hat: SpectralField {
            grid: grid.clone(),
            values: f_hat_values,
        },
        w_hat: SpectralField {
            grid: grid.clone(),
            values: w_hat_values,
        },
        chi: state.chi.clone(),
        mass,
        energy,
        outer_x_mass: state.u.outer_mass_fraction(),
        outer_xi_mass,
    }
}

pub(crate) fn outer_fraction(values: &[Complex64]) -> f64 {
    let n = values.len();
    let edge = (n / 20).max(1);
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    values[..edge]
        .iter()
        .chain(&values[n - edge..])
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        / total
}

/// Integrate from `state0` to `config.t_end`, emitting snapshots at the
/// configured output times. Steps land exactly on output times so restarted
/// runs retrace the same schedule.
pub fn run(
    state0: &SimulationState,
    config: &SolverConfig,
    nl: &NonlinearitySpec,
) -> Result<Trajectory, SolverError> {
    config.validate()?;
    if state0.t >= config.t_end {
        return Err(SolverError::BadConfig(format!(
            "t_end {} not beyond start time {}",
            config.t_end, state0.t
        )));
    }
    let grid = state0.u.grid.clone();
    let mut stepper = BoxStepper::new(&grid, nl);
    let mut snap_transformer = Transformer::new(&grid);

    let targets = config.output_times(state0.t);
    let mut snapshots = Vec::with_capacity(targets.len());
    let mut aliasing_flagged = false;
    let mut state = state0.clone();

    let mut emit = |state: &SimulationState, flagged: &mut bool, out: &mut Vec<Snapshot>| {
        let snap = make_snapshot(state, &mut snap_transformer, nl);
        if snap.outer_x_mass > ALIASING_THRESHOLD || snap.outer_xi_mass > ALIASING_THRESHOLD {
            *flagged = true;
        }
        out.push(snap);
    };

    emit(&state, &mut aliasing_flagged, &mut snapshots);
    for &target in &targets[1..] {
        while state.t < target {
            let dt = dt_schedule(config.dt_base, state.t).min(target - state.t);
            state = stepper.step(&state, dt)?;
            if state.t >= target - 1e-12 * target {
                state.t = target;
            }
        }
        emit(&state, &mut aliasing_flagged, &mut snapshots);
    }

    Ok(Trajectory {
        grid,
        nonlinearity: nl.clone(),
        frame: Frame::FixedBox,
        snapshots,
        aliasing_flagged,
    })
}

/// Empirical splitting-order diagnostic: runs to `t_end` at `dt`, `dt/2` and
/// `dt/4` and returns `||u_dt - u_dt2|| / ||u_dt2 - u_dt4||` in sup norm
/// (about 4 for a second-order scheme).
pub fn richardson_ratio(
    state0: &SimulationState,
    nl: &NonlinearitySpec,
    t_end: f64,
    dt_base: f64,
) -> Result<f64, SolverError> {
    let mut finals = Vec::new();
    for div in [1.0, 2.0, 4.0] {
        let config = SolverConfig::new(dt_base / div, t_end)?.with_ratio(t_end)?;
        let traj = run(state0, &config, nl)?;
        finals.push(traj.final_snapshot().u_values.clone());
    }
    let diff = |a: &[Complex64], b: &[Complex64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0_f64, f64::max)
    };
    Ok(diff(&finals[0], &finals[1]) / diff(&finals[1], &finals[2]))
}
