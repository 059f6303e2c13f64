//! Bounded Levenberg-style damped Gauss-Newton engine shared by the curve
//! fitters. Small problems only (a handful of parameters), dense normal
//! equations, forward-difference Jacobian.

/// Result of a least-squares fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// Residual sum of squares at the solution.
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitOutcome {
    /// Normalized RMS residual against a data scale.
    pub fn residual_rms(&self, n_points: usize, scale: f64) -> f64 {
        if n_points == 0 || scale <= 0.0 {
            return f64::INFINITY;
        }
        (self.rss / n_points as f64).sqrt() / scale
    }
}

/// Minimize `sum r_i(p)^2` over box-constrained parameters.
///
/// `residuals(p, out)` must fill `out` with the residual vector. Initial
/// parameters are clamped into the box. The damping parameter grows on
/// rejected steps and shrinks on accepted ones.
pub fn least_squares(
    residuals: &mut dyn FnMut(&[f64], &mut [f64]),
    n_residuals: usize,
    p0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iterations: usize,
) -> FitOutcome {
    let np = p0.len();
    assert_eq!(lower.len(), np);
    assert_eq!(upper.len(), np);

    let clamp = |p: &mut [f64]| {
        for k in 0..np {
            p[k] = p[k].clamp(lower[k], upper[k]);
        }
    };

    let mut p: Vec<f64> = p0.to_vec();
    clamp(&mut p);

    let mut r = vec![0.0; n_residuals];
    residuals(&p, &mut r);
    let mut rss: f64 = r.iter().map(|v| v * v).sum();
    if !rss.is_finite() {
        return FitOutcome {
            params: p,
            rss: f64::INFINITY,
            converged: false,
            iterations: 0,
        };
    }

    let mut lambda = 1e-3;
    let mut jac = vec![vec![0.0; np]; n_residuals];
    let mut r_trial = vec![0.0; n_residuals];
    let mut converged = false;
    let mut iter = 0;

    while iter < max_iterations {
        iter += 1;

        // Forward-difference Jacobian.
        for k in 0..np {
            let h = (1e-7 * p[k].abs())
                .max(1e-12 * (upper[k] - lower[k]).abs())
                .max(1e-14);
            let mut pk = p.clone();
            pk[k] = (pk[k] + h).min(upper[k]);
            let dh = pk[k] - p[k];
            if dh == 0.0 {
                for row in jac.iter_mut() {
                    row[k] = 0.0;
                }
                continue;
            }
            residuals(&pk, &mut r_trial);
            for i in 0..n_residuals {
                jac[i][k] = (r_trial[i] - r[i]) / dh;
            }
        }

        // Normal equations with Levenberg damping on the diagonal.
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for i in 0..n_residuals {
            for a in 0..np {
                jtr[a] += jac[i][a] * r[i];
                for b in a..np {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let mut improved = false;
        for _ in 0..10 {
            let mut m = jtj.clone();
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-30);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(delta) = solve_dense(&mut m, &rhs) else {
                lambda *= 10.0;
                continue;
            };

            let mut trial: Vec<f64> = (0..np).map(|k| p[k] + delta[k]).collect();
            clamp(&mut trial);
            residuals(&trial, &mut r_trial);
            let rss_trial: f64 = r_trial.iter().map(|v| v * v).sum();

            if rss_trial.is_finite() && rss_trial < rss {
                let step_small =
                    (0..np).all(|k| (trial[k] - p[k]).abs() <= 1e-10 * p[k].abs().max(1e-12));
                let rss_small = (rss - rss_trial) <= 1e-12 * rss.max(1e-300);
                p = trial;
                std::mem::swap(&mut r, &mut r_trial);
                rss = rss_trial;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if step_small || rss_small {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }

        if !improved {
            // Damping saturated without progress: a (local) minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    FitOutcome {
        params: p,
        rss,
        converged,
        iterations: iter,
    }
}

/// In-place Gaussian elimination with partial pivoting for small systems.
fn solve_dense(m: &mut [Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_iteration_count() {
        let mut resid = |p: &[f64], out: &mut [f64]| {
            out[0] = p[0] * p[0] - 2.0;
        };
        let fit = least_squares(&mut resid, 1, &[1.0], &[0.0], &[10.0], 100);
        assert!(fit.iterations > 0);
        assert!((fit.params[0] - std::f64::consts::SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn fits_a_line() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.25).collect();
        let xs2 = xs.clone();
        let mut resid = move |p: &[f64], out: &mut [f64]| {
            for (i, x) in xs2.iter().enumerate() {
                out[i] = p[0] * x + p[1] - ys[i];
            }
        };
        let fit = least_squares(
            &mut resid,
            xs.len(),
            &[0.0, 0.0],
            &[-1e6, -1e6],
            &[1e6, 1e6],
            100,
        );
        assert!(fit.converged);
        assert!((fit.params[0] - 2.5).abs() < 1e-8);
        assert!((fit.params[1] + 1.25).abs() < 1e-8);
    }

    #[test]
    fn respects_bounds() {
        // Best unconstrained amplitude is 2, but the box caps it at 1.
        let mut resid = move |p: &[f64], out: &mut [f64]| {
            out[0] = p[0] - 2.0;
        };
        let fit = least_squares(&mut resid, 1, &[0.5], &[0.0], &[1.0], 50);
        assert!((fit.params[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nonlinear_exponential() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-x / 0.8).exp()).collect();
        let xs2 = xs.clone();
        let mut resid = move |p: &[f64], out: &mut [f64]| {
            for (i, x) in xs2.iter().enumerate() {
                out[i] = p[0] * (-x / p[1]).exp() - ys[i];
            }
        };
        let fit = least_squares(
            &mut resid,
            xs.len(),
            &[1.0, 2.0],
            &[0.0, 1e-3],
            &[1e3, 1e3],
            200,
        );
        assert!((fit.params[0] - 3.0).abs() < 1e-6, "{:?}", fit.params);
        assert!((fit.params[1] - 0.8).abs() < 1e-6);
    }
}
