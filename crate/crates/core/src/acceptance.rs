//! The acceptance suite: every release gate as executable checks, each
//! printing one measured-vs-threshold line. Criteria share the expensive
//! reference runs through lazily built caches, so the suite can run its
//! criteria in any order or in parallel.

use crate::expansion::{
    closed_form_order1, extract_scattering_data, fit_order1, phase_series, rescaled_coeffs,
    u_asymptotic_at, FitWindow, INTERIOR_WINDOW_FRACTION,
};
use crate::fit::{fit_power_law, total_variation};
use crate::grid::GridSpec;
use crate::oracle::{direct_p1, remainder_rate, OracleInput, OracleProfile};
use crate::solver::comoving::{comoving_initial_gaussian, run_comoving, ComovingConfig};
use crate::solver::{
    initial_data_gaussian, richardson_ratio, run, NonlinearitySpec, SolverConfig, Trajectory,
};
use num_complex::Complex64;
use std::sync::LazyLock;

/// Thresholds of the acceptance criteria. Everything here is pinned; the
/// suite never reads tunable state.
pub mod thresholds {
    /// C1: sup-in-time deviation of the free-mode modified profile from the
    /// initial profile (pure rounding accumulation over ~2e4 steps).
    pub const FREE_PROFILE_DRIFT: f64 = 1e-8;
    /// C1: pointwise error of the free run against the closed-form Gaussian.
    pub const FREE_POINTWISE: f64 = 1e-9;
    /// C2: relative mass drift over [1, 100] (unitary substeps).
    pub const MASS_DRIFT_REL: f64 = 1e-10;
    /// C2: relative energy drift over [1, 100] at dt_base = 0.005.
    pub const ENERGY_DRIFT_REL: f64 = 1e-6;
    /// C3: Richardson ratio window around the second-order value 4.
    pub const RICHARDSON_RANGE: (f64, f64) = (3.5, 4.5);
    /// C4: fitted decay slope of sup|u| and its tolerance.
    pub const DECAY_SLOPE: f64 = -0.5;
    pub const DECAY_SLOPE_TOL: f64 = 0.02;
    /// C5: total phase variation after the log correction, and the minimum
    /// factor by which the uncorrected variation must exceed it.
    pub const PHASE_TV_MAX: f64 = 0.01;
    pub const PHASE_CONTROL_FACTOR: f64 = 10.0;
    /// C6: residual decay slopes of the oscillatory oracle.
    pub const ORACLE_ORDER0_SLOPE: f64 = -1.8;
    pub const ORACLE_ORDER1_SLOPE: f64 = -2.5;
    pub const ORACLE_DOUBLING_REL: f64 = 1e-8;
    /// C7: relative sup distance between fitted and closed-form
    /// coefficients on the interior window (frozen calibration values).
    pub const COEFF_W11_REL: f64 = 0.15;
    pub const COEFF_W10_REL: f64 = 0.25;
    /// C8: far-field remainder slopes at orders 0 and 1.
    pub const REMAINDER_ORDER0_SLOPE: f64 = -0.6;
    pub const REMAINDER_ORDER1_SLOPE: f64 = -1.6;
    /// C9: phase variation allowed for the quintic-only run (no log term).
    pub const QUINTIC_TV_MAX: f64 = 0.01;
    /// C10: two-route agreement of the rescaled h11 coefficient.
    pub const RESCALED_TWO_ROUTE: f64 = 1e-8;
    /// C11: restart reproduction in sup norm.
    pub const RESTART_SUP: f64 = 1e-12;
}

/// Preset parameters shared by the reference runs.
mod presets {
    pub const EPSILON: f64 = 0.1;
    pub const WIDTH: f64 = 1.0;
    pub const COEFFICIENT_EPSILON: f64 = 0.08;
    /// Co-moving grid: n = 4096 over [-64, 64) covers the data spectrum to
    /// below 1e-12 and samples the interior window at d xi = 0.049.
    pub const COMOVING_N: usize = 4096;
    pub const COMOVING_HALF_WIDTH: f64 = 64.0;
    /// Log-time step of the long co-moving runs.
    pub const DSIGMA: f64 = 5e-4;
    /// Finer step for the coefficient-grade comparison run.
    pub const DSIGMA_COEFFICIENT: f64 = 2.5e-4;
    pub const T_END: f64 = 1000.0;
}

fn comoving_grid() -> GridSpec {
    GridSpec::new(presets::COMOVING_N, presets::COMOVING_HALF_WIDTH).unwrap()
}

fn comoving_run(lambdas: Vec<f64>, epsilon: f64, dsigma: f64, t_end: f64) -> Trajectory {
    let grid = comoving_grid();
    let nl = NonlinearitySpec::new(lambdas).unwrap();
    let state = comoving_initial_gaussian(epsilon, presets::WIDTH, &grid).unwrap();
    let config = ComovingConfig::new(dsigma, t_end).unwrap();
    run_comoving(&state, &config, &nl).unwrap()
}

static FREE_BOX: LazyLock<Trajectory> = LazyLock::new(|| {
    let grid = GridSpec::new(4096, 40.0).unwrap();
    let (state, _) = initial_data_gaussian(presets::EPSILON, presets::WIDTH, &grid).unwrap();
    let config = SolverConfig::new(0.005, 100.0)
        .unwrap()
        .with_extra_outputs(vec![2.0, 3.0, 50.0]);
    run(&state, &config, &NonlinearitySpec::free()).unwrap()
});

static CONSERVATION_BOX: LazyLock<Trajectory> = LazyLock::new(|| {
    let grid = GridSpec::new(4096, 20.0).unwrap();
    let (state, _) = initial_data_gaussian(presets::EPSILON, presets::WIDTH, &grid).unwrap();
    let config = SolverConfig::new(0.005, 100.0).unwrap();
    run(
        &state,
        &config,
        &NonlinearitySpec::new(vec![1.0, 0.5]).unwrap(),
    )
    .unwrap()
});

static CUBIC_POS: LazyLock<Trajectory> =
    LazyLock::new(|| comoving_run(vec![1.0], presets::EPSILON, presets::DSIGMA, presets::T_END));

static CUBIC_NEG: LazyLock<Trajectory> = LazyLock::new(|| {
    comoving_run(
        vec![-1.0],
        presets::EPSILON,
        presets::DSIGMA,
        presets::T_END,
    )
});

static QUINTIC_ONLY: LazyLock<Trajectory> = LazyLock::new(|| {
    comoving_run(
        vec![0.0, 1.0],
        presets::EPSILON,
        presets::DSIGMA,
        presets::T_END,
    )
});

static COEFFICIENT_RUN: LazyLock<Trajectory> = LazyLock::new(|| {
    comoving_run(
        vec![1.0, 0.5],
        presets::COEFFICIENT_EPSILON,
        presets::DSIGMA_COEFFICIENT,
        presets::T_END,
    )
});

static RESCALED_RUN: LazyLock<Trajectory> =
    LazyLock::new(|| comoving_run(vec![-2.0], 0.06, presets::DSIGMA, 500.0));

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub measured: String,
    pub threshold: String,
    pub pass: bool,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<28} {:<58} {:<36} {}",
            self.id,
            self.name,
            self.measured,
            self.threshold,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn free_gaussian(eps: f64, w: f64, t: f64, x: f64) -> Complex64 {
    let denom = Complex64::new(w * w, t);
    eps * w / denom.sqrt() * (Complex64::new(-x * x, 0.0) / (2.0 * denom)).exp()
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max)
}

/// Node indices closest to the interior sample frequencies.
fn phase_nodes(grid: &GridSpec) -> Vec<usize> {
    [0.0, 0.35, -0.35, 0.7, -0.7]
        .iter()
        .map(|&xi| {
            let pos = (xi - grid.xi_nodes()[0]) / grid.dxi();
            pos.round() as usize
        })
        .collect()
}

fn c1_free_mode() -> CriterionResult {
    let traj = &*FREE_BOX;
    let f1 = &traj.snapshots[0].f_hat;
    let drift = traj
        .snapshots
        .iter()
        .map(|s| sup_diff(&s.w_hat.values, &f1.values))
        .fold(0.0_f64, f64::max);

    // Pointwise closed form while the box still contains the solution.
    let mut pointwise: f64 = 0.0;
    for s in traj.snapshots.iter().filter(|s| s.t <= 4.0) {
        let points = traj.u_points(s);
        for (&x, v) in points.iter().zip(&s.u_values) {
            pointwise =
                pointwise.max((v - free_gaussian(presets::EPSILON, presets::WIDTH, s.t, x)).norm());
        }
    }
    CriterionResult {
        id: 1,
        name: "free-mode exactness",
        measured: format!("what drift {drift:.2e}; pointwise {pointwise:.2e}"),
        threshold: format!(
            "<= {:.0e} and <= {:.0e}",
            thresholds::FREE_PROFILE_DRIFT,
            thresholds::FREE_POINTWISE
        ),
        pass: drift <= thresholds::FREE_PROFILE_DRIFT && pointwise <= thresholds::FREE_POINTWISE,
    }
}

fn c2_conservation() -> CriterionResult {
    let traj = &*CONSERVATION_BOX;
    let (m0, e0) = (traj.snapshots[0].mass, traj.snapshots[0].energy);
    let mass_drift = traj
        .snapshots
        .iter()
        .map(|s| ((s.mass - m0) / m0).abs())
        .fold(0.0_f64, f64::max);
    let energy_drift = traj
        .snapshots
        .iter()
        .map(|s| ((s.energy - e0) / e0).abs())
        .fold(0.0_f64, f64::max);
    CriterionResult {
        id: 2,
        name: "mass/energy conservation",
        measured: format!("mass {mass_drift:.2e}; energy {energy_drift:.2e}"),
        threshold: format!(
            "<= {:.0e} and <= {:.0e}",
            thresholds::MASS_DRIFT_REL,
            thresholds::ENERGY_DRIFT_REL
        ),
        pass: mass_drift <= thresholds::MASS_DRIFT_REL
            && energy_drift <= thresholds::ENERGY_DRIFT_REL,
    }
}

fn c3_splitting_order() -> CriterionResult {
    let grid = GridSpec::new(2048, 15.0).unwrap();
    let (state, _) = initial_data_gaussian(presets::EPSILON, presets::WIDTH, &grid).unwrap();
    let nl = NonlinearitySpec::new(vec![1.0, 0.5]).unwrap();
    let ratio = richardson_ratio(&state, &nl, 4.0, 0.01).unwrap();
    let (lo, hi) = thresholds::RICHARDSON_RANGE;
    CriterionResult {
        id: 3,
        name: "splitting order (Richardson)",
        measured: format!("ratio {ratio:.3}"),
        threshold: format!("in [{lo}, {hi}]"),
        pass: (lo..=hi).contains(&ratio),
    }
}

fn c4_sharp_decay() -> CriterionResult {
    let traj = &*CUBIC_POS;
    let pts: Vec<(f64, f64)> = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= 50.0)
        .map(|s| (s.t, s.sup_u()))
        .collect();
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = fit_power_law(&ts, &ys).unwrap();
    let dev = (fit.exponent - thresholds::DECAY_SLOPE).abs();
    CriterionResult {
        id: 4,
        name: "sharp decay slope",
        measured: format!("slope {:.4} (r^2 {:.5})", fit.exponent, fit.r_squared),
        threshold: format!(
            "{} +- {}",
            thresholds::DECAY_SLOPE,
            thresholds::DECAY_SLOPE_TOL
        ),
        pass: dev <= thresholds::DECAY_SLOPE_TOL,
    }
}

fn phase_law_for(traj: &Trajectory) -> (f64, f64) {
    let sd = extract_scattering_data(traj).unwrap();
    let grid = sd.grid();
    let mut worst_tv: f64 = 0.0;
    let mut worst_factor = f64::INFINITY;
    for node in phase_nodes(grid) {
        let series = phase_series(traj, sd.nu[node], node, 100.0);
        let tv_corr = total_variation(&series.corrected);
        let tv_raw = total_variation(&series.raw);
        worst_tv = worst_tv.max(tv_corr);
        worst_factor = worst_factor.min(tv_raw / tv_corr.max(1e-300));
    }
    (worst_tv, worst_factor)
}

fn c5_phase_law() -> CriterionResult {
    let (tv_pos, factor_pos) = phase_law_for(&CUBIC_POS);
    let (tv_neg, factor_neg) = phase_law_for(&CUBIC_NEG);
    let tv = tv_pos.max(tv_neg);
    let factor = factor_pos.min(factor_neg);
    CriterionResult {
        id: 5,
        name: "modified scattering phase law",
        measured: format!("TV {tv:.2e} rad; control factor {factor:.1}x"),
        threshold: format!(
            "<= {} rad and >= {}x",
            thresholds::PHASE_TV_MAX,
            thresholds::PHASE_CONTROL_FACTOR
        ),
        pass: tv <= thresholds::PHASE_TV_MAX && factor >= thresholds::PHASE_CONTROL_FACTOR,
    }
}

fn c6_oracle() -> CriterionResult {
    let profile = OracleProfile::gaussian(1.0, 0.75);
    let grid = GridSpec::new(4096, 128.0).unwrap();
    let t_list = [5.0, 10.0, 20.0, 40.0];
    let xi_samples = [0.0, 0.3, 0.6];
    let r1 = remainder_rate(&profile, &grid, 1, &t_list, &xi_samples, 4096).unwrap();
    let r2 = remainder_rate(&profile, &grid, 2, &t_list, &xi_samples, 4096).unwrap();

    let base = OracleInput::new(profile.clone(), 20.0, xi_samples.to_vec());
    let mut fine = base.clone().with_resolution_factor(2);
    fine.eta_node_cap = 2 * crate::oracle::DEFAULT_ETA_NODE_CAP;
    let coarse_vals = direct_p1(&base).unwrap();
    let fine_vals = direct_p1(&fine).unwrap();
    let doubling = coarse_vals
        .iter()
        .zip(&fine_vals)
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0_f64, f64::max);

    CriterionResult {
        id: 6,
        name: "stationary-phase oracle",
        measured: format!(
            "slopes {:.2} / {:.2}; doubling {doubling:.1e}",
            r1.exponent, r2.exponent
        ),
        threshold: format!(
            "<= {} / <= {}; <= {:.0e}",
            thresholds::ORACLE_ORDER0_SLOPE,
            thresholds::ORACLE_ORDER1_SLOPE,
            thresholds::ORACLE_DOUBLING_REL
        ),
        pass: r1.exponent <= thresholds::ORACLE_ORDER0_SLOPE
            && r2.exponent <= thresholds::ORACLE_ORDER1_SLOPE
            && doubling <= thresholds::ORACLE_DOUBLING_REL,
    }
}

/// Relative sup distance between two fields over a mask, normalized by the
/// sup of the reference on the same mask.
fn masked_rel_sup(
    emp: &crate::grid::SpectralField,
    reference: &crate::grid::SpectralField,
    mask: &[bool],
) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for ((&m, e), r) in mask.iter().zip(&emp.values).zip(&reference.values) {
        if m {
            num = num.max((e - r).norm());
            den = den.max(r.norm());
        }
    }
    num / den.max(1e-300)
}

pub struct CoefficientComparison {
    pub rel_w10: f64,
    pub rel_w11: f64,
}

/// The criterion-7 comparison, exposed with an injectable closed-form side
/// so the suite can prove it fails on tampered coefficients. The closed-form
/// side is evaluated on fit-refined scattering data (the plain tail value
/// sits O(1/T) away from the limit, which would dominate the comparison).
pub fn coefficient_comparison(
    traj: &Trajectory,
    coeffs: Option<&crate::expansion::ExpansionOrder1>,
) -> CoefficientComparison {
    let sd = extract_scattering_data(traj).unwrap();
    let fit = fit_order1(
        traj,
        &sd,
        FitWindow {
            t_min: presets::T_END / 10.0,
            t_max: presets::T_END,
        },
        false,
    )
    .unwrap();
    let refined = crate::expansion::refine_scattering_data(traj, &sd, &fit);
    let owned;
    let coeffs = match coeffs {
        Some(c) => c,
        None => {
            owned = closed_form_order1(
                &refined,
                traj.nonlinearity.lambda(1),
                traj.nonlinearity.lambda(2),
            )
            .unwrap();
            &owned
        }
    };
    let interior = refined.interior_window(INTERIOR_WINDOW_FRACTION);
    CoefficientComparison {
        rel_w10: masked_rel_sup(&fit.w10_emp, &coeffs.w10, &interior),
        rel_w11: masked_rel_sup(&fit.w11_emp, &coeffs.w11, &interior),
    }
}

fn c7_coefficient_match() -> CriterionResult {
    let cmp = coefficient_comparison(&COEFFICIENT_RUN, None);
    CriterionResult {
        id: 7,
        name: "order-1 coefficient match",
        measured: format!("w10 rel {:.3}; w11 rel {:.3}", cmp.rel_w10, cmp.rel_w11),
        threshold: format!(
            "<= {} and <= {}",
            thresholds::COEFF_W10_REL,
            thresholds::COEFF_W11_REL
        ),
        pass: cmp.rel_w10 <= thresholds::COEFF_W10_REL && cmp.rel_w11 <= thresholds::COEFF_W11_REL,
    }
}

fn c8_remainder() -> CriterionResult {
    let traj = &*CUBIC_POS;
    let plain = extract_scattering_data(traj).unwrap();
    let fit = fit_order1(
        traj,
        &plain,
        FitWindow {
            t_min: presets::T_END / 10.0,
            t_max: presets::T_END,
        },
        false,
    )
    .unwrap();
    let sd = crate::expansion::refine_scattering_data(traj, &plain, &fit);
    let exp1 = closed_form_order1(&sd, 1.0, 0.0).unwrap();
    let mut ts = Vec::new();
    let mut err0 = Vec::new();
    let mut err1 = Vec::new();
    for s in traj.snapshots.iter().filter(|s| s.t >= 100.0) {
        let points = traj.u_points(s);
        let mut e0: f64 = 0.0;
        let mut e1: f64 = 0.0;
        for (&x, v) in points.iter().zip(&s.u_values) {
            if let Some(a0) = u_asymptotic_at(&sd, Some(&exp1), s.t, x, 0) {
                e0 = e0.max((v - a0).norm());
            }
            if let Some(a1) = u_asymptotic_at(&sd, Some(&exp1), s.t, x, 1) {
                e1 = e1.max((v - a1).norm());
            }
        }
        ts.push(s.t);
        err0.push(e0);
        err1.push(e1);
    }
    let fit0 = fit_power_law(&ts, &err0).unwrap();
    let fit1 = fit_power_law(&ts, &err1).unwrap();
    let monotone = err0.iter().zip(&err1).all(|(a, b)| b <= a);
    CriterionResult {
        id: 8,
        name: "far-field remainder orders",
        measured: format!(
            "slopes {:.2} / {:.2}; order-1 <= order-0: {monotone}",
            fit0.exponent, fit1.exponent
        ),
        threshold: format!(
            "<= {} / <= {}; true",
            thresholds::REMAINDER_ORDER0_SLOPE,
            thresholds::REMAINDER_ORDER1_SLOPE
        ),
        pass: fit0.exponent <= thresholds::REMAINDER_ORDER0_SLOPE
            && fit1.exponent <= thresholds::REMAINDER_ORDER1_SLOPE
            && monotone,
    }
}

fn c9_quintic_contrast() -> CriterionResult {
    let traj = &*QUINTIC_ONLY;
    let sd = extract_scattering_data(traj).unwrap();
    let grid = sd.grid();
    let mut worst_tv: f64 = 0.0;
    for node in phase_nodes(grid) {
        let series = phase_series(traj, 0.0, node, 100.0);
        worst_tv = worst_tv.max(total_variation(&series.raw));
    }
    let nu_max = sd.nu.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    CriterionResult {
        id: 9,
        name: "quintic short-range contrast",
        measured: format!("raw TV {worst_tv:.2e} rad; max|nu| {nu_max:.1e}"),
        threshold: format!("<= {} rad and nu == 0", thresholds::QUINTIC_TV_MAX),
        pass: worst_tv <= thresholds::QUINTIC_TV_MAX && nu_max == 0.0,
    }
}

fn c10_rescaled_translation() -> CriterionResult {
    let traj = &*RESCALED_RUN;
    let sd = extract_scattering_data(traj).unwrap();
    let js = rescaled_coeffs(&sd, -2.0, 0.0).unwrap();
    let h12_sup = js.h12.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    let mut two_route: f64 = 0.0;
    for k in 0..js.h11.len() {
        if js.mask[k] {
            two_route = two_route.max((js.h11[k] - js.h11_rederived[k]).abs());
        }
    }
    CriterionResult {
        id: 10,
        name: "rescaled coefficient translation",
        measured: format!(
            "sup|h12| {h12_sup:.1e}; two-route dev {two_route:.1e} (alpha {})",
            js.alpha
        ),
        threshold: format!("== 0 and <= {:.0e}", thresholds::RESCALED_TWO_ROUTE),
        pass: h12_sup == 0.0 && two_route <= thresholds::RESCALED_TWO_ROUTE && js.exact_alpha,
    }
}

fn c11_restart_determinism() -> CriterionResult {
    // Split the criterion-1 run at t = 50 through a persisted snapshot.
    let grid = GridSpec::new(4096, 40.0).unwrap();
    let nl = NonlinearitySpec::free();
    let (state0, _) = initial_data_gaussian(presets::EPSILON, presets::WIDTH, &grid).unwrap();
    let full = &*FREE_BOX;

    let leg1_cfg = SolverConfig::new(0.005, 50.0).unwrap();
    let leg1 = run(&state0, &leg1_cfg, &nl).unwrap();
    let half = leg1.final_snapshot();
    let mid = crate::solver::SimulationState {
        t: half.t,
        u: crate::grid::SpatialField::new(grid.clone(), half.u_values.clone()).unwrap(),
        chi: half.chi.clone(),
        step_count: 0,
    };
    let dir = std::env::temp_dir().join(format!("modscat-c11-{}", std::process::id()));
    let snap_path = dir.join("t50.bin");
    crate::io::write_snapshot(
        &crate::io::SnapshotRecord::from_box_state(&mid, &nl),
        &snap_path,
    )
    .unwrap();
    let reloaded = crate::io::read_snapshot(&snap_path)
        .unwrap()
        .to_box_state()
        .unwrap();
    let leg2 = run(&reloaded, &SolverConfig::new(0.005, 100.0).unwrap(), &nl).unwrap();
    let sup = sup_diff(
        &full.final_snapshot().u_values,
        &leg2.final_snapshot().u_values,
    );

    // Byte-determinism of emitted results.
    let summary = serde_json::json!({
        "t_end": 100.0,
        "sup_u_final": full.final_snapshot().sup_u(),
        "mass": full.final_snapshot().mass,
    });
    let (p1, p2) = (dir.join("a/summary.json"), dir.join("b/summary.json"));
    crate::io::write_json(&p1, &summary).unwrap();
    crate::io::write_json(&p2, &summary).unwrap();
    let (f1, f2) = (dir.join("a/field.csv"), dir.join("b/field.csv"));
    let snap = full.final_snapshot();
    crate::io::write_field_csv(&f1, grid.xi_nodes(), &snap.f_hat.values).unwrap();
    crate::io::write_field_csv(&f2, grid.xi_nodes(), &snap.f_hat.values).unwrap();
    let identical = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap()
        && std::fs::read(&f1).unwrap() == std::fs::read(&f2).unwrap();
    std::fs::remove_dir_all(&dir).ok();

    CriterionResult {
        id: 11,
        name: "determinism and restart",
        measured: format!("restart sup {sup:.2e}; byte-identical {identical}"),
        threshold: format!("<= {:.0e}; true", thresholds::RESTART_SUP),
        pass: sup <= thresholds::RESTART_SUP && identical,
    }
}

pub fn run_criterion(id: usize) -> Option<CriterionResult> {
    Some(match id {
        1 => c1_free_mode(),
        2 => c2_conservation(),
        3 => c3_splitting_order(),
        4 => c4_sharp_decay(),
        5 => c5_phase_law(),
        6 => c6_oracle(),
        7 => c7_coefficient_match(),
        8 => c8_remainder(),
        9 => c9_quintic_contrast(),
        10 => c10_rescaled_translation(),
        11 => c11_restart_determinism(),
        _ => return None,
    })
}

pub const SUITES: &[(&str, &[usize])] = &[
    ("free", &[1]),
    ("conservation", &[2, 3]),
    ("decay", &[4]),
    ("phase", &[5]),
    ("oracle", &[6]),
    ("coefficients", &[7, 10]),
    ("remainder", &[8]),
    ("quintic", &[9]),
    ("restart", &[11]),
    ("all", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
];

pub fn suite_criteria(name: &str) -> Option<&'static [usize]> {
    SUITES.iter().find(|(s, _)| *s == name).map(|(_, ids)| *ids)
}

/// Runs a suite's criteria on a small worker pool, returning results in
/// criterion order.
pub fn run_suite(name: &str, threads: usize) -> Option<Vec<CriterionResult>> {
    let ids = suite_criteria(name)?;
    let queue = std::sync::Mutex::new(ids.to_vec());
    let results = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(ids.len()) {
            scope.spawn(|| loop {
                let id = match queue.lock().unwrap().pop() {
                    Some(id) => id,
                    None => break,
                };
                let result = run_criterion(id).expect("valid criterion id");
                results.lock().unwrap().push(result);
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|r| r.id);
    Some(results)
}
