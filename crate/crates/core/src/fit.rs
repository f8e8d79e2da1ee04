//! Small least-squares helpers: power-law (log-log) rate fits and dense
//! normal-equation solves for a handful of basis functions.

/// Result of a log-log regression `y ~ prefactor * t^exponent`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RateFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Least-squares slope of `ln y` against `ln t`. Requires at least two
/// strictly positive samples; returns `None` otherwise.
pub fn fit_power_law(ts: &[f64], ys: &[f64]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(&t, &y)| t > 0.0 && y > 0.0)
        .map(|(&t, &y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let (t_min, t_max) = ts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
            (lo.min(t), hi.max(t))
        });
    Some(RateFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r_squared,
        window: (t_min, t_max),
    })
}

/// Ordinary least squares for a small column basis (k <= 5).
#[derive(Debug, Clone)]
pub struct LsqFit {
    pub coeffs: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Frobenius condition estimate of the normal matrix.
    pub condition: f64,
}

/// Solves `min ||A c - y||` through the normal equations with unit-norm
/// column scaling (so the condition estimate reflects basis collinearity,
/// not column magnitudes), returning the coefficients, their standard
/// errors, and the condition estimate.
pub fn lsq_fit(columns: &[Vec<f64>], rhs: &[f64]) -> Option<LsqFit> {
    let k = columns.len();
    let m = rhs.len();
    if k == 0 || k > 5 || m < k || columns.iter().any(|c| c.len() != m) {
        return None;
    }
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return None;
    }
    let mut gram = vec![vec![0.0_f64; k]; k];
    let mut b = vec![0.0_f64; k];
    for i in 0..k {
        for j in i..k {
            let g: f64 = columns[i].iter().zip(&columns[j]).map(|(a, c)| a * c).sum();
            gram[i][j] = g / (scales[i] * scales[j]);
            gram[j][i] = gram[i][j];
        }
        b[i] = columns[i].iter().zip(rhs).map(|(a, y)| a * y).sum::<f64>() / scales[i];
    }
    let inv = invert(&gram)?;
    let scaled: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| inv[i][j] * b[j]).sum())
        .collect();
    let coeffs: Vec<f64> = scaled.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let rss: f64 = (0..m)
        .map(|r| {
            let fit: f64 = (0..k).map(|j| coeffs[j] * columns[j][r]).sum();
            let e = rhs[r] - fit;
            e * e
        })
        .sum();
    let dof = (m - k).max(1) as f64;
    let sigma2 = rss / dof;
    let std_errors = (0..k)
        .map(|i| {
            (sigma2 * inv[i][i] / (scales[i] * scales[i]))
                .max(0.0)
                .sqrt()
        })
        .collect();
    let condition = frobenius(&gram) * frobenius(&inv);
    Some(LsqFit {
        coeffs,
        std_errors,
        condition,
    })
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        for cell in m[col].iter_mut() {
            *cell /= p;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col && row[col] != 0.0 {
                let f = row[col];
                for (cell, &v) in row.iter_mut().zip(&pivot_row) {
                    *cell -= f * v;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[k..].to_vec()).collect())
}

/// Removes 2-pi jumps from a phase sequence, walking left to right.
pub fn unwrap_angles(phases: &mut [f64]) {
    use std::f64::consts::PI;
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        while d > PI {
            phases[i] -= 2.0 * PI;
            d = phases[i] - phases[i - 1];
        }
        while d < -PI {
            phases[i] += 2.0 * PI;
            d = phases[i] - phases[i - 1];
        }
    }
}

/// Total variation `sum |a_{i+1} - a_i|`.
pub fn total_variation(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_recovers_exact_exponent() {
        let ts: Vec<f64> = (1..=8).map(|k| 2.0_f64.powi(k)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.5 * t.powf(-1.75)).collect();
        let fit = fit_power_law(&ts, &ys).unwrap();
        assert!((fit.exponent + 1.75).abs() <= 1e-12);
        assert!((fit.prefactor - 3.5).abs() <= 1e-10);
        assert!(fit.r_squared > 0.999999);
        assert_eq!(fit.window, (2.0, 256.0));
    }

    #[test]
    fn power_law_needs_positive_data() {
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn lsq_recovers_synthetic_coefficients_exactly() {
        let ts: Vec<f64> = (0..40).map(|k| 100.0 * 1.06_f64.powi(k)).collect();
        let c1: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
        let c2: Vec<f64> = ts.iter().map(|t| t.ln() / t).collect();
        let rhs: Vec<f64> = ts.iter().map(|t| -0.7 / t + 2.3 * t.ln() / t).collect();
        let fit = lsq_fit(&[c1, c2], &rhs).unwrap();
        assert!((fit.coeffs[0] + 0.7).abs() <= 1e-9, "{:?}", fit.coeffs);
        assert!((fit.coeffs[1] - 2.3).abs() <= 1e-9);
        assert!(fit.condition.is_finite());
    }

    #[test]
    fn unwrap_removes_jumps() {
        use std::f64::consts::PI;
        let mut xs = vec![3.0, -3.0, 3.0 - 2.0 * PI];
        unwrap_angles(&mut xs);
        assert!((xs[1] - (2.0 * PI - 3.0)).abs() <= 1e-12);
        assert!((xs[2] - 3.0).abs() <= 1e-12);
        assert!(total_variation(&[0.0, 1.0, 0.5]) == 1.5);
    }
}
