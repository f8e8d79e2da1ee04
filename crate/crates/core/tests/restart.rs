//! Restart determinism: a run split through a persisted snapshot must
//! retrace the unsplit run's step schedule and reproduce its final state.

use modscat_core::grid::GridSpec;
use modscat_core::io::{read_snapshot, write_snapshot, SnapshotRecord};
use modscat_core::solver::comoving::{comoving_initial_gaussian, run_comoving, ComovingConfig};
use modscat_core::solver::{initial_data_gaussian, run, NonlinearitySpec, SolverConfig};

#[test]
fn box_run_split_and_restarted_matches_unsplit() {
    let grid = GridSpec::new(512, 15.0).unwrap();
    let nl = NonlinearitySpec::new(vec![1.0, 0.5]).unwrap();
    let (state0, _) = initial_data_gaussian(0.1, 1.0, &grid).unwrap();
    let split_t = 2.0;

    let full_cfg = SolverConfig::new(0.005, 4.0)
        .unwrap()
        .with_extra_outputs(vec![split_t]);
    let full = run(&state0, &full_cfg, &nl).unwrap();

    // First leg, persist, reload, second leg.
    let leg1_cfg = SolverConfig::new(0.005, split_t).unwrap();
    let leg1 = run(&state0, &leg1_cfg, &nl).unwrap();
    let half = leg1.final_snapshot();
    let mid_state = modscat_core::solver::SimulationState {
        t: half.t,
        u: modscat_core::grid::SpatialField::new(grid.clone(), half.u_values.clone()).unwrap(),
        chi: half.chi.clone(),
        step_count: 0,
    };
    let path = std::env::temp_dir().join(format!("modscat-restart-{}.bin", std::process::id()));
    write_snapshot(&SnapshotRecord::from_box_state(&mid_state, &nl), &path).unwrap();
    let reloaded = read_snapshot(&path).unwrap().to_box_state().unwrap();
    std::fs::remove_file(&path).ok();

    let leg2_cfg = SolverConfig::new(0.005, 4.0).unwrap();
    let leg2 = run(&reloaded, &leg2_cfg, &nl).unwrap();

    let a = full.final_snapshot();
    let b = leg2.final_snapshot();
    let u_diff = a
        .u_values
        .iter()
        .zip(&b.u_values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max);
    let chi_diff = a
        .chi
        .iter()
        .zip(&b.chi)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0_f64, f64::max);
    println!("restart differences: u {u_diff:.3e}, chi {chi_diff:.3e}");
    assert!(u_diff <= 1e-12, "u differs by {u_diff}");
    assert!(chi_diff <= 1e-12, "chi differs by {chi_diff}");
}

#[test]
fn comoving_run_split_and_restarted_matches_unsplit() {
    let grid = GridSpec::new(512, 20.0).unwrap();
    let nl = NonlinearitySpec::cubic(1.0);
    let state0 = comoving_initial_gaussian(0.1, 1.0, &grid).unwrap();
    let split_t = 4.0;

    let mut full_cfg = ComovingConfig::new(0.002, 16.0).unwrap();
    full_cfg.extra_output_times = vec![split_t];
    let full = run_comoving(&state0, &full_cfg, &nl).unwrap();

    let leg1 = run_comoving(&state0, &ComovingConfig::new(0.002, split_t).unwrap(), &nl).unwrap();
    let half = leg1.final_snapshot();
    // Rebuild the co-moving state from the persisted record. The stored
    // field is v itself, so reconstruct it from the snapshot's trajectory
    // by rerunning the final transform: easiest is to persist from a fresh
    // integrator state, which run_comoving does not expose; instead redo
    // leg 1 with the stepper to keep v.
    let mut stepper = modscat_core::solver::comoving::ComovingStepper::new(&grid, &nl);
    let mut state = state0.clone();
    let mut fhat2: Vec<f64> = stepper
        .f_hat(&state)
        .values
        .iter()
        .map(|v| v.norm_sqr())
        .collect();
    while state.t < split_t {
        let t1 = (state.t * 0.002_f64.exp()).min(split_t);
        let (next, f2) = stepper.step(&state, t1, &fhat2).unwrap();
        state = next;
        fhat2 = f2;
    }
    assert!((state.t - half.t).abs() <= 1e-9);

    let path = std::env::temp_dir().join(format!("modscat-restart-c-{}.bin", std::process::id()));
    write_snapshot(&SnapshotRecord::from_comoving_state(&state, &nl), &path).unwrap();
    let reloaded = read_snapshot(&path).unwrap().to_comoving_state().unwrap();
    std::fs::remove_file(&path).ok();

    let leg2 = run_comoving(&reloaded, &ComovingConfig::new(0.002, 16.0).unwrap(), &nl).unwrap();
    let a = full.final_snapshot();
    let b = leg2.final_snapshot();
    let f_diff = a
        .f_hat
        .values
        .iter()
        .zip(&b.f_hat.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0_f64, f64::max);
    println!("comoving restart f_hat difference: {f_diff:.3e}");
    assert!(f_diff <= 1e-12, "f_hat differs by {f_diff}");
}
