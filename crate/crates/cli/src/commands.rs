//! Subcommand implementations: simulate, oracle, expand, verify.

use crate::config::{Engine, ExperimentConfig, InitialData, OracleConfig};
use modscat_core::expansion::{
    closed_form_order1, extract_scattering_data, fit_order1, refine_scattering_data,
    rescaled_coeffs, FitWindow,
};
use modscat_core::grid::{GridSpec, SpatialField, SpectralField};
use modscat_core::io::{
    config_hash, read_snapshot, run_dir, write_field_csv, write_json, write_series_csv,
    write_snapshot, SnapshotRecord,
};
use modscat_core::norms::{bootstrap_report, default_alphas};
use modscat_core::oracle::{
    direct_p1, remainder_rate, stationary_coeff, OracleInput, OracleProfile,
};
use modscat_core::solver::comoving::{
    comoving_state_from_profile, run_comoving, snapshot_of_comoving_state, ComovingConfig,
};
use modscat_core::solver::{
    richardson_ratio, run, snapshot_of_state, Frame, NonlinearitySpec, SolverConfig, Trajectory,
};
use num_complex::Complex64;
use std::error::Error;
use std::path::{Path, PathBuf};

pub const BUILD_ID: &str = match option_env!("MODSCAT_BUILD_ID") {
    Some(id) => id,
    None => "dev",
};

type AnyError = Box<dyn Error>;

pub fn output_root(cli_out: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Ok(env_root) = std::env::var("MODSCAT_RUN_ROOT") {
        return PathBuf::from(env_root);
    }
    PathBuf::from(".")
}

fn build_profile_field(
    config: &ExperimentConfig,
    grid: &GridSpec,
) -> Result<SpatialField, AnyError> {
    match &config.initial {
        InitialData::Gaussian { epsilon, width } => {
            if !(0.0..=0.5).contains(epsilon) {
                return Err(format!("initial.epsilon {epsilon} outside [0, 0.5]").into());
            }
            if *width < 8.0 * grid.dx() {
                return Err(format!(
                    "initial.width {width} under-resolved (needs >= {})",
                    8.0 * grid.dx()
                )
                .into());
            }
            Ok(SpatialField::new(
                grid.clone(),
                grid.x_nodes()
                    .iter()
                    .map(|&x| Complex64::new(epsilon * (-x * x / (2.0 * width * width)).exp(), 0.0))
                    .collect(),
            )?)
        }
        InitialData::Tabulated { path } => {
            let text = std::fs::read_to_string(path)?;
            let mut values = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if i == 0 && line.starts_with('x') {
                    continue; // header
                }
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != 3 {
                    return Err(format!("{}: line {} needs x,re,im", path.display(), i + 1).into());
                }
                let x: f64 = cells[0].trim().parse()?;
                let node = values.len();
                let expect = grid.x_nodes().get(node).copied().ok_or("too many rows")?;
                if (x - expect).abs() > 1e-9 * grid.dx().max(1.0) {
                    return Err(format!(
                        "{}: row {} at x = {x} does not match grid node {expect}",
                        path.display(),
                        i + 1
                    )
                    .into());
                }
                values.push(Complex64::new(
                    cells[1].trim().parse()?,
                    cells[2].trim().parse()?,
                ));
            }
            Ok(SpatialField::new(grid.clone(), values)?)
        }
    }
}

fn run_experiment(config: &ExperimentConfig) -> Result<Trajectory, AnyError> {
    let grid = GridSpec::new(config.grid_n, config.grid_half_width)?;
    let nl = NonlinearitySpec::new(config.lambdas.clone())?;
    let f1 = build_profile_field(config, &grid)?;
    match config.engine {
        Engine::FixedBox => {
            let state = modscat_core::solver::state_from_profile(&f1, 1.0)?;
            let solver_config = SolverConfig::new(config.dt_base, config.t_end)?
                .with_ratio(config.output_ratio)?
                .with_extra_outputs(config.extra_outputs.clone());
            Ok(run(&state, &solver_config, &nl)?)
        }
        Engine::Comoving => {
            let state = comoving_state_from_profile(&f1, 1.0)?;
            let mut cc = ComovingConfig::new(config.dsigma, config.t_end)?;
            cc.output_ratio = config.output_ratio;
            cc.extra_output_times = config.extra_outputs.clone();
            Ok(run_comoving(&state, &cc, &nl)?)
        }
    }
}

fn emit_gnuplot(dir: &Path, blocks: &[(&str, String)]) -> Result<(), AnyError> {
    let mut text = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    for (_, block) in blocks {
        text.push_str(block);
        text.push('\n');
    }
    std::fs::write(dir.join("plot.gp"), text)?;
    Ok(())
}

/// Parses and validates an experiment config without running it: the grid,
/// the nonlinearity, and the initial-data preconditions must all build.
pub fn check_experiment(config_path: &Path) -> Result<(), AnyError> {
    let text = crate::config::load(config_path)?;
    let config = crate::config::parse_experiment(&text)?;
    let grid = GridSpec::new(config.grid_n, config.grid_half_width)?;
    NonlinearitySpec::new(config.lambdas.clone())?;
    build_profile_field(&config, &grid)?;
    match config.engine {
        Engine::FixedBox => {
            SolverConfig::new(config.dt_base, config.t_end)?.with_ratio(config.output_ratio)?;
        }
        Engine::Comoving => {
            ComovingConfig::new(config.dsigma, config.t_end)?;
        }
    }
    Ok(())
}

pub fn check_oracle(config_path: &Path) -> Result<(), AnyError> {
    let text = crate::config::load(config_path)?;
    let config = crate::config::parse_oracle(&text)?;
    GridSpec::new(config.grid_n, config.grid_half_width)?;
    Ok(())
}

pub fn simulate(
    config_path: &Path,
    out: Option<&Path>,
    gnuplot: bool,
) -> Result<PathBuf, AnyError> {
    let text = crate::config::load(config_path)?;
    let config = crate::config::parse_experiment(&text)?;
    let traj = run_experiment(&config)?;
    let nl = &traj.nonlinearity;
    let grid = &traj.grid;

    let dir = run_dir(&output_root(out), &config.canonical);
    let snap_dir = dir.join("snapshots");
    let res_dir = dir.join("results");
    std::fs::create_dir_all(&snap_dir)?;
    std::fs::create_dir_all(&res_dir)?;

    for snap in &traj.snapshots {
        let record = SnapshotRecord::from_trajectory_snapshot(snap, traj.frame, grid, nl);
        write_snapshot(&record, &snap_dir.join(format!("t{:017.6}.bin", snap.t)))?;
    }

    let series: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| {
            vec![
                s.t,
                s.mass,
                s.energy,
                s.sup_u(),
                s.t.sqrt() * s.sup_u(),
                s.outer_x_mass,
                s.outer_xi_mass,
            ]
        })
        .collect();
    write_series_csv(
        &res_dir.join("series.csv"),
        &[
            "t", "mass", "energy", "sup_u", "decay", "outer_x", "outer_xi",
        ],
        &series,
    )?;

    let alphas = default_alphas(1, nl.lambdas().len())?;
    let boots: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|s| {
            let r = bootstrap_report(s, &alphas).expect("bootstrap report");
            let mut row = vec![r.t, r.h1_norm];
            row.extend(&r.weighted);
            row.extend(&r.w_sup);
            row.push(r.decay);
            row
        })
        .collect();
    write_series_csv(
        &res_dir.join("bootstrap.csv"),
        &[
            "t", "h1", "wx0", "wx1", "wx2", "wx3", "wsup0", "wsup1", "wsup2", "decay",
        ],
        &boots,
    )?;

    let last = traj.final_snapshot();
    write_field_csv(
        &res_dir.join("fhat_final.csv"),
        grid.xi_nodes(),
        &last.f_hat.values,
    )?;
    write_field_csv(
        &res_dir.join("what_final.csv"),
        grid.xi_nodes(),
        &last.w_hat.values,
    )?;

    let (m0, e0) = (traj.snapshots[0].mass, traj.snapshots[0].energy);
    let mass_drift = traj
        .snapshots
        .iter()
        .map(|s| ((s.mass - m0) / m0).abs())
        .fold(0.0_f64, f64::max);
    let energy_drift = traj
        .snapshots
        .iter()
        .map(|s| ((s.energy - e0) / e0.abs().max(1e-300)).abs())
        .fold(0.0_f64, f64::max);

    let richardson = if config.richardson_check && config.engine == Engine::FixedBox {
        let f1 = build_profile_field(&config, grid)?;
        let state = modscat_core::solver::state_from_profile(&f1, 1.0)?;
        Some(richardson_ratio(
            &state,
            nl,
            config.t_end.min(4.0),
            config.dt_base,
        )?)
    } else {
        None
    };

    let summary = serde_json::json!({
        "build_id": BUILD_ID,
        "config_hash": config_hash(&config.canonical),
        "config": config.canonical,
        "engine": match traj.frame { Frame::FixedBox => "box", Frame::Comoving => "comoving" },
        "t_end": last.t,
        "snapshots": traj.snapshots.len(),
        "aliasing_flagged": traj.aliasing_flagged,
        "mass_drift_rel": mass_drift,
        "energy_drift_rel": energy_drift,
        "sup_u_final": last.sup_u(),
        "richardson_ratio": richardson,
    });
    write_json(&dir.join("summary.json"), &summary)?;

    if gnuplot {
        emit_gnuplot(
            &res_dir,
            &[(
                "decay",
                "set logscale xy\nplot 'series.csv' using 1:4 with lines title 'sup|u|', \
                 '' using 1:($1**-0.5) with lines title 't^-1/2'\n"
                    .to_string(),
            )],
        )?;
    }
    Ok(dir)
}

pub fn oracle(config_path: &Path, out: Option<&Path>, gnuplot: bool) -> Result<PathBuf, AnyError> {
    let text = crate::config::load(config_path)?;
    let config: OracleConfig = crate::config::parse_oracle(&text)?;
    let profile = OracleProfile::Gaussian {
        amplitude: config.amplitude,
        width: config.width,
        center: 0.0,
    };
    let grid = GridSpec::new(config.grid_n, config.grid_half_width)?;
    let f_hat = profile.gridded(&grid);
    let p10 = stationary_coeff(&f_hat, 1, 0)?;
    let p11 = stationary_coeff(&f_hat, 1, 1)?;

    let dir = run_dir(&output_root(out), &config.canonical);
    let res_dir = dir.join("results");
    std::fs::create_dir_all(&res_dir)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &t in &config.t_list {
        let mut input = OracleInput::new(profile.clone(), t, config.xi_samples.clone());
        input.eta_node_cap = config.eta_node_cap;
        let direct = direct_p1(&input)?;
        for (&xi, d) in config.xi_samples.iter().zip(&direct) {
            let c10 = p10.sample_cubic(xi).unwrap_or_default();
            let c11 = p11.sample_cubic(xi).unwrap_or_default();
            let r0 = (d - c10 / t).norm();
            let r1 = (d - c10 / t - c11 / (t * t)).norm();
            rows.push(vec![t, xi, d.re, d.im, r0, r1]);
        }
    }
    write_series_csv(
        &res_dir.join("oracle.csv"),
        &["t", "xi", "re", "im", "residual_order0", "residual_order1"],
        &rows,
    )?;

    let fit0 = remainder_rate(
        &profile,
        &grid,
        1,
        &config.t_list,
        &config.xi_samples,
        config.eta_node_cap,
    )?;
    let fit1 = remainder_rate(
        &profile,
        &grid,
        2,
        &config.t_list,
        &config.xi_samples,
        config.eta_node_cap,
    )?;
    let summary = serde_json::json!({
        "build_id": BUILD_ID,
        "config_hash": config_hash(&config.canonical),
        "config": config.canonical,
        "residual_order0_fit": fit0,
        "residual_order1_fit": fit1,
    });
    write_json(&dir.join("summary.json"), &summary)?;

    if gnuplot {
        emit_gnuplot(
            &res_dir,
            &[(
                "residuals",
                "set logscale xy\nplot 'oracle.csv' using 1:5 title 'order 0', \
                 '' using 1:6 title 'order 1'\n"
                    .to_string(),
            )],
        )?;
    }
    Ok(dir)
}

/// Rebuilds a trajectory from the persisted snapshots of a run directory.
pub fn reload_trajectory(dir: &Path) -> Result<Trajectory, AnyError> {
    let snap_dir = dir.join("snapshots");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&snap_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "bin"))
        .collect();
    if paths.is_empty() {
        return Err(format!("no snapshots under {}", snap_dir.display()).into());
    }
    paths.sort();
    let mut snapshots = Vec::with_capacity(paths.len());
    let mut frame = Frame::FixedBox;
    let mut grid: Option<GridSpec> = None;
    let mut nl: Option<NonlinearitySpec> = None;
    for path in &paths {
        let record = read_snapshot(path)?;
        let g = record.grid()?;
        let n = record.nonlinearity()?;
        frame = record.frame;
        let snap = match record.frame {
            Frame::FixedBox => {
                let state = record.to_box_state()?;
                snapshot_of_state(&state, &n)
            }
            Frame::Comoving => {
                let state = record.to_comoving_state()?;
                snapshot_of_comoving_state(&state, &n)
            }
        };
        grid = Some(g);
        nl = Some(n);
        snapshots.push(snap);
    }
    snapshots.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(Trajectory {
        grid: grid.unwrap(),
        nonlinearity: nl.unwrap(),
        frame,
        snapshots,
        aliasing_flagged: false,
    })
}

pub fn expand(
    run_path: &Path,
    window_override: Option<(Option<f64>, Option<f64>)>,
    gnuplot: bool,
) -> Result<PathBuf, AnyError> {
    let traj = reload_trajectory(run_path)?;
    let grid = &traj.grid;
    let nl = &traj.nonlinearity;
    let t_end = traj.final_snapshot().t;

    let sd = extract_scattering_data(&traj)?;
    let (t_min_cfg, t_max_cfg) = window_override.unwrap_or((None, None));
    let window = FitWindow {
        t_min: t_min_cfg.unwrap_or(t_end / 10.0),
        t_max: t_max_cfg.unwrap_or(t_end),
    };
    let fit = fit_order1(&traj, &sd, window, false)?;
    let refined = refine_scattering_data(&traj, &sd, &fit);
    let coeffs = closed_form_order1(&refined, nl.lambda(1), nl.lambda(2))?;
    let js = rescaled_coeffs(&refined, nl.lambda(1), nl.lambda(2))?;

    let res_dir = run_path.join("results").join("expansion");
    std::fs::create_dir_all(&res_dir)?;
    let xi = grid.xi_nodes();
    write_field_csv(&res_dir.join("w00.csv"), xi, &refined.w00.values)?;
    let reals =
        |v: &[f64]| -> Vec<Complex64> { v.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
    write_field_csv(&res_dir.join("nu.csv"), xi, &reals(&refined.nu))?;
    write_field_csv(&res_dir.join("phi.csv"), xi, &reals(&refined.phi))?;
    write_field_csv(&res_dir.join("w10_closed.csv"), xi, &coeffs.w10.values)?;
    write_field_csv(&res_dir.join("w11_closed.csv"), xi, &coeffs.w11.values)?;
    write_field_csv(&res_dir.join("w10_fit.csv"), xi, &fit.w10_emp.values)?;
    write_field_csv(&res_dir.join("w11_fit.csv"), xi, &fit.w11_emp.values)?;
    write_field_csv(&res_dir.join("u10.csv"), xi, &coeffs.u10.values)?;
    write_field_csv(&res_dir.join("u11.csv"), xi, &coeffs.u11.values)?;
    write_field_csv(&res_dir.join("u12.csv"), xi, &coeffs.u12.values)?;
    write_field_csv(&res_dir.join("rescaled_h11.csv"), xi, &reals(&js.h11))?;

    let interior = refined.interior_window(modscat_core::expansion::INTERIOR_WINDOW_FRACTION);
    let rel = |emp: &SpectralField, reference: &SpectralField| -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for ((&m, e), r) in interior.iter().zip(&emp.values).zip(&reference.values) {
            if m {
                num = num.max((e - r).norm());
                den = den.max(r.norm());
            }
        }
        num / den.max(1e-300)
    };
    let summary = serde_json::json!({
        "build_id": BUILD_ID,
        "t_end": t_end,
        "extraction_error": sd.extraction_error,
        "phi_error": sd.phi_error,
        "converged": sd.converged,
        "fit_window": [window.t_min, window.t_max],
        "fit_condition": fit.max_condition,
        "residual_rate": fit.residual_rate,
        "rel_w10_fit_vs_closed": rel(&fit.w10_emp, &coeffs.w10),
        "rel_w11_fit_vs_closed": rel(&fit.w11_emp, &coeffs.w11),
        "rescaled_alpha": js.alpha,
        "rescaled_exact_alpha": js.exact_alpha,
    });
    write_json(&run_path.join("summary_expansion.json"), &summary)?;

    if gnuplot {
        emit_gnuplot(
            &res_dir,
            &[(
                "w11",
                "plot 'w11_closed.csv' using 1:3 with lines title 'closed form', \
                 'w11_fit.csv' using 1:3 with points title 'fit'\n"
                    .to_string(),
            )],
        )?;
    }
    Ok(res_dir)
}

/// Runs an acceptance suite; returns (all_passed, table lines).
pub fn verify(suite: &str, threads: usize) -> Option<(bool, Vec<String>)> {
    let results = modscat_core::acceptance::run_suite(suite, threads)?;
    let all = results.iter().all(|r| r.pass);
    let lines = results.iter().map(|r| r.line()).collect();
    Some((all, lines))
}
