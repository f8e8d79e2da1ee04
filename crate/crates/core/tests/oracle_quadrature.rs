//! Quadrature-level validation of the oscillatory-integral oracle: an
//! independent plain-loop reference implementation at doubled resolution,
//! symmetry and homogeneity identities, and the stationary-phase residual
//! decay rates.

use modscat_core::grid::GridSpec;
use modscat_core::oracle::{
    direct_p1, remainder_rate, remainder_sup, stationary_coeff, OracleInput, OracleProfile,
};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Reference quadrature, kept deliberately naive: explicit trapezoid loops,
/// one `exp` per cell, no shared code with the production path.
fn reference_p1(amp: f64, width: f64, t: f64, xi: f64, n: usize, r: f64) -> Complex64 {
    let f = |y: f64| {
        let z = y / width;
        amp * (-z * z / 2.0).exp()
    };
    let d = 2.0 * r / (n - 1) as f64;
    let mut total = Complex64::default();
    for j in 0..n {
        let e1 = -r + j as f64 * d;
        let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        for k in 0..n {
            let e2 = -r + k as f64 * d;
            let wk = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            let phase = Complex64::from_polar(1.0, t * e1 * e2);
            let amp3 = f(xi - e2) * f(xi - e1 - e2) * f(xi - e1);
            total += phase * amp3 * wj * wk;
        }
    }
    total * (d * d / (2.0 * PI))
}

fn gaussian_nodes(t: f64, xi: f64, width: f64) -> (usize, f64) {
    let r = width * (2.0 * (1e12_f64).ln()).sqrt() + xi.abs();
    let d_eta = PI / (4.0 * t * r);
    let mut n = (2.0 * r / d_eta).ceil() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    (n, r)
}

#[test]
fn production_quadrature_matches_independent_reference() {
    let (amp, width, t, xi) = (1.0, 0.75, 10.0, 0.0);
    let input = OracleInput::new(OracleProfile::gaussian(amp, width), t, vec![xi]);
    let ours = direct_p1(&input).unwrap()[0];

    let (n, r) = gaussian_nodes(t, xi, width);
    let reference = reference_p1(amp, width, t, xi, 2 * n + 1, r);
    let rel = (ours - reference).norm() / reference.norm();
    println!("direct_p1 = {ours}, reference = {reference}, rel = {rel:.3e}");
    assert!(rel <= 1e-8, "reference disagreement {rel}");
}

#[test]
fn leading_stationary_phase_term_dominates() {
    // |P1(t, 0) - t^-1 |f(0)|^2 f(0)| <= C / t^2 with C ~ |P^1_1(0)| = 1/w^2.
    let width = 0.75;
    let p0 = 1.0; // |f(0)|^2 f(0) for unit amplitude
    for t in [5.0, 10.0, 20.0] {
        let input = OracleInput::new(OracleProfile::gaussian(1.0, width), t, vec![0.0]);
        let got = direct_p1(&input).unwrap()[0];
        let resid = (got - Complex64::new(p0 / t, 0.0)).norm();
        let bound = 2.0 / (width * width) / (t * t);
        assert!(resid <= bound, "t = {t}: residual {resid} > bound {bound}");
    }
}

#[test]
fn reflection_symmetry_for_even_real_profile() {
    let t = 10.0;
    let input = OracleInput::new(
        OracleProfile::gaussian(1.0, 0.75),
        t,
        vec![-0.6, -0.3, 0.3, 0.6],
    );
    let vals = direct_p1(&input).unwrap();
    // Even real data: substituting eta -> -eta fixes the phase and reflects
    // every argument, so the integral is invariant under xi -> -xi.
    for (a, b) in [(vals[0], vals[3]), (vals[1], vals[2])] {
        let err = (a - b).norm() / b.norm();
        assert!(err <= 1e-12, "reflection symmetry broken: {err}");
    }
}

#[test]
fn cubic_homogeneity_in_the_profile() {
    let t = 10.0;
    let base = OracleInput::new(OracleProfile::gaussian(1.0, 0.75), t, vec![0.0, 0.4]);
    let scaled = OracleInput::new(OracleProfile::gaussian(1.7, 0.75), t, vec![0.0, 0.4]);
    let a = direct_p1(&base).unwrap();
    let b = direct_p1(&scaled).unwrap();
    let c = 1.7_f64.powi(3);
    for (x, y) in a.iter().zip(&b) {
        let rel = (y - x * c).norm() / y.norm();
        assert!(rel <= 1e-12, "homogeneity violated: {rel}");
    }
}

#[test]
fn resolution_doubling_is_converged() {
    let t = 20.0;
    let xi_samples = vec![0.0, 0.3, 0.6];
    let base = OracleInput::new(OracleProfile::gaussian(1.0, 0.75), t, xi_samples.clone());
    let mut doubled = base.clone().with_resolution_factor(2);
    doubled.eta_node_cap = 2 * modscat_core::oracle::DEFAULT_ETA_NODE_CAP;
    let coarse = direct_p1(&base).unwrap();
    let fine = direct_p1(&doubled).unwrap();
    for (a, b) in coarse.iter().zip(&fine) {
        let rel = (a - b).norm() / b.norm();
        assert!(rel <= 1e-8, "doubling changed the value by {rel}");
    }
}

#[test]
fn residual_rates_match_stationary_phase_orders() {
    let profile = OracleProfile::gaussian(1.0, 0.75);
    let grid = GridSpec::new(4096, 128.0).unwrap();
    let t_list = [5.0, 10.0, 20.0, 40.0];
    let xi_samples = [0.0, 0.3, 0.6];

    let r1 = remainder_rate(&profile, &grid, 1, &t_list, &xi_samples, 4096).unwrap();
    println!(
        "order-0 residual slope {:.3} (r^2 = {:.5})",
        r1.exponent, r1.r_squared
    );
    assert!(r1.exponent <= -1.2, "order-0 slope {}", r1.exponent);

    let r2 = remainder_rate(&profile, &grid, 2, &t_list, &xi_samples, 4096).unwrap();
    println!(
        "order-1 residual slope {:.3} (r^2 = {:.5})",
        r2.exponent, r2.r_squared
    );
    assert!(r2.exponent <= -2.2, "order-1 slope {}", r2.exponent);
}

#[test]
fn residual_slope_invariant_under_profile_scaling() {
    let grid = GridSpec::new(4096, 128.0).unwrap();
    let t_list = [5.0, 10.0, 20.0, 40.0];
    let a = remainder_rate(
        &OracleProfile::gaussian(1.0, 0.75),
        &grid,
        1,
        &t_list,
        &[0.0],
        4096,
    )
    .unwrap();
    let b = remainder_rate(
        &OracleProfile::gaussian(0.5, 0.75),
        &grid,
        1,
        &t_list,
        &[0.0],
        4096,
    )
    .unwrap();
    assert!(
        (a.exponent - b.exponent).abs() <= 1e-6,
        "slopes {} vs {}",
        a.exponent,
        b.exponent
    );
    // The remainder itself scales cubically.
    let ratio = a.prefactor / b.prefactor;
    assert!((ratio - 8.0).abs() <= 1e-6 * 8.0, "prefactor ratio {ratio}");
}

#[test]
fn sampled_profile_path_agrees_with_analytic_path() {
    let grid = GridSpec::new(4096, 128.0).unwrap();
    let analytic = OracleProfile::gaussian(1.0, 0.75);
    let sampled = OracleProfile::Sampled(analytic.gridded(&grid));
    let t = 5.0;
    let a = direct_p1(&OracleInput::new(analytic, t, vec![0.0])).unwrap()[0];
    let b = direct_p1(&OracleInput::new(sampled, t, vec![0.0])).unwrap()[0];
    let rel = (a - b).norm() / a.norm();
    assert!(rel <= 1e-6, "sampled-profile deviation {rel}");
}

#[test]
fn stationary_coefficient_consistency_with_quadrature() {
    // The module's core check: the order-1 corrected residual over t in
    // [5, 40] decays with fitted slope <= -2.5.
    let profile = OracleProfile::gaussian(1.0, 0.75);
    let grid = GridSpec::new(4096, 128.0).unwrap();
    let t_list = [5.0, 10.0, 20.0, 40.0];
    let mut sups = Vec::new();
    for &t in &t_list {
        let input = OracleInput::new(profile.clone(), t, vec![0.0, 0.3, 0.6]);
        sups.push(remainder_sup(&input, &grid, 2).unwrap());
    }
    let fit = modscat_core::fit::fit_power_law(&t_list, &sups).unwrap();
    println!("consistency slope {:.3}", fit.exponent);
    assert!(fit.exponent <= -2.5, "slope {}", fit.exponent);

    // And the sign convention of P^1_1 is pinned by the residual dropping
    // when the correction is added rather than subtracted.
    let f_hat = profile.gridded(&grid);
    let p11 = stationary_coeff(&f_hat, 1, 1).unwrap();
    let t = 20.0;
    let input = OracleInput::new(profile.clone(), t, vec![0.0]);
    let direct = direct_p1(&input).unwrap()[0];
    let p10 = stationary_coeff(&f_hat, 1, 0).unwrap();
    let mid = grid.n_points() / 2;
    let with_plus = (direct - p10.values[mid] / t - p11.values[mid] / (t * t)).norm();
    let with_minus = (direct - p10.values[mid] / t + p11.values[mid] / (t * t)).norm();
    assert!(
        with_plus < 0.3 * with_minus,
        "sign convention suspect: + {with_plus} vs - {with_minus}"
    );
}
