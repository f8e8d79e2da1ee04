//! Co-moving (lens-transformed) integration frame for long horizons.
//!
//! On a fixed box, dispersion pushes the solution past any affordable grid
//! once `t` is a few multiples of the box size. The substitution
//! `u(t, x) = (it)^(-1/2) exp(i x^2 / 2t) v(tau, x/t)`, `tau = -1/t`,
//! maps the equation to
//! `i v_tau + v_yy / 2 = sum_n lambda_n t^(2-n) |v|^(2n) v`
//! on the compact co-moving coordinate `y = x/t`, where `v` stays localized
//! for all time (it converges to the limit profile). Both Strang substeps
//! remain exactly unitary: the kinetic coefficient is constant in `tau`, and
//! the time-dependent nonlinear coefficient integrates in closed form since
//! `|v|` is invariant.
//!
//! `v` equals the Fourier transform of the chirped profile
//! `exp(i s^2 / 2t) f(t, s)`, so the profile quantities `fhat`, `what`, `chi`
//! are recovered exactly (two transforms) and emitted in the same snapshot
//! format as the fixed-box engine; `u` itself is sampled at the co-moving
//! points `x = t y_k`.

use super::{
    outer_fraction, NonlinearitySpec, Snapshot, SolverError, Trajectory, ALIASING_THRESHOLD,
};
use crate::grid::{forward_transform, GridSpec, SpatialField, SpectralField, Transformer};
use num_complex::Complex64;
use std::f64::consts::FRAC_PI_4;

/// State of the co-moving integrator: `v` lives on the frequency nodes of
/// `grid` (the co-moving coordinate), `chi` alongside it.
#[derive(Debug, Clone)]
pub struct ComovingState {
    pub t: f64,
    pub v: SpectralField,
    pub chi: Vec<f64>,
    pub step_count: u64,
}

/// Run configuration for the co-moving engine. Steps are uniform in `log t`
/// (`t -> t e^dsigma`), matching the decaying stiffness of the frame.
#[derive(Debug, Clone)]
pub struct ComovingConfig {
    pub dsigma: f64,
    pub t_end: f64,
    pub output_ratio: f64,
    pub extra_output_times: Vec<f64>,
}

impl ComovingConfig {
    pub fn new(dsigma: f64, t_end: f64) -> Result<Self, SolverError> {
        if !(dsigma > 0.0 && dsigma <= 0.01) {
            return Err(SolverError::BadConfig(format!(
                "dsigma = {dsigma} outside (0, 0.01]"
            )));
        }
        if t_end < 1.0 || t_end.is_nan() {
            return Err(SolverError::BadConfig(format!("t_end = {t_end} < 1")));
        }
        Ok(ComovingConfig {
            dsigma,
            t_end,
            output_ratio: 2f64.powf(0.25),
            extra_output_times: Vec::new(),
        })
    }

    fn as_solver_config(&self) -> super::SolverConfig {
        super::SolverConfig {
            dt_base: super::MAX_DT,
            t_end: self.t_end,
            output_ratio: self.output_ratio,
            extra_output_times: self.extra_output_times.clone(),
        }
    }
}

/// State at `t0` whose profile is `f` (given on the grid's x nodes):
/// `v = F[exp(i s^2 / 2 t0) f(s)]`.
pub fn comoving_state_from_profile(
    f: &SpatialField,
    t0: f64,
) -> Result<ComovingState, SolverError> {
    if t0 < 1.0 {
        return Err(SolverError::BadConfig(format!("t0 = {t0} < 1")));
    }
    let chirped = SpatialField {
        grid: f.grid.clone(),
        values: f
            .values
            .iter()
            .zip(f.grid.x_nodes())
            .map(|(v, &s)| v * Complex64::from_polar(1.0, s * s / (2.0 * t0)))
            .collect(),
    };
    let v = forward_transform(&chirped)?;
    let n = f.grid.n_points();
    Ok(ComovingState {
        t: t0,
        v,
        chi: vec![0.0; n],
        step_count: 0,
    })
}

/// Gaussian data `f_1(x) = eps exp(-x^2 / 2 w^2)` at `t = 1`, as in the
/// fixed-box engine.
pub fn comoving_initial_gaussian(
    epsilon: f64,
    width: f64,
    grid: &GridSpec,
) -> Result<ComovingState, SolverError> {
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
    comoving_state_from_profile(&f1, 1.0)
}

/// Closed-form nonlinear phase coefficients
/// `lambda_n * integral_{t0}^{t1} s^(-n) ds`.
fn lambda_integrals(nl: &NonlinearitySpec, t0: f64, t1: f64) -> Vec<f64> {
    nl.lambdas()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let n = i as i32 + 1;
            if l == 0.0 {
                0.0
            } else if n == 1 {
                l * (t1 / t0).ln()
            } else {
                l * (t0.powi(1 - n) - t1.powi(1 - n)) / (n - 1) as f64
            }
        })
        .collect()
}

pub struct ComovingStepper {
    grid: GridSpec,
    nl: NonlinearitySpec,
    transformer: Transformer,
}

impl ComovingStepper {
    pub fn new(grid: &GridSpec, nl: &NonlinearitySpec) -> Self {
        ComovingStepper {
            grid: grid.clone(),
            nl: nl.clone(),
            transformer: Transformer::new(grid),
        }
    }

    /// Exact profile transform `fhat(t)` of a co-moving state.
    pub fn f_hat(&mut self, state: &ComovingState) -> SpectralField {
        let mut buf = state.v.values.clone();
        self.transformer.inverse_in_place(&mut buf);
        for (g, &s) in buf.iter_mut().zip(self.grid.x_nodes()) {
            *g *= Complex64::from_polar(1.0, -s * s / (2.0 * state.t));
        }
        self.transformer.forward_in_place(&mut buf);
        SpectralField {
            grid: self.grid.clone(),
            values: buf,
        }
    }

    /// One Strang step from `state.t` to `t1`: half kinetic, exact nonlinear
    /// rotation with the closed-form coefficient integrals, half kinetic.
    /// `chi` advances by the trapezoid rule in `log s` on `|fhat|^2` at the
    /// step endpoints (`fhat_start` is the cached transform at `state.t`).
    pub fn step(
        &mut self,
        state: &ComovingState,
        t1: f64,
        fhat2_start: &[f64],
    ) -> Result<(ComovingState, Vec<f64>), SolverError> {
        let t0 = state.t;
        if !(t1.is_finite() && t1 > t0) {
            return Err(SolverError::BadTimeStep(t1 - t0));
        }
        let dtau = 1.0 / t0 - 1.0 / t1;
        let lambdas = lambda_integrals(&self.nl, t0, t1);

        let mut buf = state.v.values.clone();
        // Half kinetic: multiply the s-representation by exp(-i dtau s^2 / 4).
        self.transformer.inverse_in_place(&mut buf);
        for (g, &s) in buf.iter_mut().zip(self.grid.x_nodes()) {
            *g *= Complex64::from_polar(1.0, -dtau * s * s / 4.0);
        }
        self.transformer.forward_in_place(&mut buf);
        // Exact nonlinear rotation.
        for v in buf.iter_mut() {
            let amp2 = v.norm_sqr();
            let mut phase = 0.0;
            let mut p = 1.0;
            for &lam in &lambdas {
                p *= amp2;
                phase += lam * p;
            }
            *v *= Complex64::from_polar(1.0, -phase);
        }
        // Half kinetic.
        self.transformer.inverse_in_place(&mut buf);
        for (g, &s) in buf.iter_mut().zip(self.grid.x_nodes()) {
            *g *= Complex64::from_polar(1.0, -dtau * s * s / 4.0);
        }
        self.transformer.forward_in_place(&mut buf);

        if buf.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(SolverError::Blowup {
                t: t0,
                step: state.step_count,
            });
        }

        let mut next = ComovingState {
            t: t1,
            v: SpectralField {
                grid: self.grid.clone(),
                values: buf,
            },
            chi: state.chi.clone(),
            step_count: state.step_count + 1,
        };

        let fhat_end = self.f_hat(&next);
        let fhat2_end: Vec<f64> = fhat_end.values.iter().map(|v| v.norm_sqr()).collect();
        let lambda1 = self.nl.lambda1();
        if lambda1 != 0.0 {
            let half_dlog = 0.5 * (t1 / t0).ln();
            for (c, (a, b)) in next.chi.iter_mut().zip(fhat2_start.iter().zip(&fhat2_end)) {
                *c += lambda1 * half_dlog * (a + b);
            }
        }
        Ok((next, fhat2_end))
    }
}

/// Physical-space samples of `u` at the co-moving points `x = t y_k`.
pub fn u_at_comoving_points(state: &ComovingState) -> Vec<Complex64> {
    let t = state.t;
    let amp = t.sqrt().recip();
    state
        .v
        .values
        .iter()
        .zip(state.v.grid.xi_nodes())
        .map(|(v, &y)| v * Complex64::from_polar(amp, t * y * y / 2.0 - FRAC_PI_4))
        .collect()
}

fn make_snapshot(
    state: &ComovingState,
    stepper: &mut ComovingStepper,
    nl: &NonlinearitySpec,
) -> Snapshot {
    let grid = &state.v.grid;
    let f_hat = stepper.f_hat(state);
    let w_hat_values: Vec<Complex64> = f_hat
        .values
        .iter()
        .zip(&state.chi)
        .map(|(f, &c)| f * Complex64::from_polar(1.0, c))
        .collect();

    let dxi = grid.dxi();
    let mass: f64 = state.v.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dxi;
    let kinetic: f64 = 0.5
        * f_hat
            .values
            .iter()
            .zip(grid.xi_nodes())
            .map(|(v, &xi)| xi * xi * v.norm_sqr())
            .sum::<f64>()
        * dxi;
    let mut potential = 0.0;
    for (i, &l) in nl.lambdas().iter().enumerate() {
        if l != 0.0 {
            let p = i as i32 + 2;
            let integral: f64 = state
                .v
                .values
                .iter()
                .map(|v| v.norm_sqr().powi(p))
                .sum::<f64>()
                * dxi
                * state.t.powi(-(p - 1));
            potential += l / p as f64 * integral;
        }
    }

    // Physical localization of the profile, for the aliasing monitor.
    let mut g = state.v.values.clone();
    let mut t = Transformer::new(grid);
    t.inverse_in_place(&mut g);
    let outer_x_mass = outer_fraction(&g);

    Snapshot {
        t: state.t,
        step_count: state.step_count,
        state_values: state.v.values.clone(),
        u_values: u_at_comoving_points(state),
        f_hat,
        w_hat: SpectralField {
            grid: grid.clone(),
            values: w_hat_values,
        },
        chi: state.chi.clone(),
        mass,
        energy: kinetic + potential,
        outer_x_mass,
        outer_xi_mass: outer_fraction(&state.v.values),
    }
}

/// Snapshot of an arbitrary co-moving state, as emitted by [`run_comoving`].
pub fn snapshot_of_comoving_state(state: &ComovingState, nl: &NonlinearitySpec) -> Snapshot {
    let mut stepper = ComovingStepper::new(&state.v.grid, nl);
    make_snapshot(state, &mut stepper, nl)
}

/// Integrate in the co-moving frame from `state0` to `config.t_end`.
pub fn run_comoving(
    state0: &ComovingState,
    config: &ComovingConfig,
    nl: &NonlinearitySpec,
) -> Result<Trajectory, SolverError> {
    if state0.t >= config.t_end {
        return Err(SolverError::BadConfig(format!(
            "t_end {} not beyond start time {}",
            config.t_end, state0.t
        )));
    }
    let grid = state0.v.grid.clone();
    let mut stepper = ComovingStepper::new(&grid, nl);
    let growth = config.dsigma.exp();

    let targets = config.as_solver_config().output_times(state0.t);
    let mut snapshots = Vec::with_capacity(targets.len());
    let mut aliasing_flagged = false;
    let mut state = state0.clone();
    let mut fhat2: Vec<f64> = stepper
        .f_hat(&state)
        .values
        .iter()
        .map(|v| v.norm_sqr())
        .collect();

    let emit = |state: &ComovingState,
                stepper: &mut ComovingStepper,
                flagged: &mut bool,
                out: &mut Vec<Snapshot>| {
        let snap = make_snapshot(state, stepper, nl);
        if snap.outer_x_mass > ALIASING_THRESHOLD || snap.outer_xi_mass > ALIASING_THRESHOLD {
            *flagged = true;
        }
        out.push(snap);
    };

    emit(&state, &mut stepper, &mut aliasing_flagged, &mut snapshots);
    for &target in &targets[1..] {
        while state.t < target {
            let t1 = (state.t * growth).min(target);
            let (next, fhat2_end) = stepper.step(&state, t1, &fhat2)?;
            state = next;
            fhat2 = fhat2_end;
            if state.t >= target - 1e-12 * target {
                state.t = target;
            }
        }
        emit(&state, &mut stepper, &mut aliasing_flagged, &mut snapshots);
    }

    Ok(Trajectory {
        grid,
        nonlinearity: nl.clone(),
        frame: super::Frame::Comoving,
        snapshots,
        aliasing_flagged,
    })
}
