//! Bi-exponential lifetime fits for luminescence decays.

use super::fit::{least_squares, FitOutcome};
use crate::trace::TimeTrace;

/// Fitted decay `A1 exp(-t/tau1) + A2 exp(-t/tau2) + baseline`, with
/// `tau1 <= tau2`. When a single exponential describes the data better by
/// the information criterion, `single` is set and A2 = 0.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BiexpFit {
    pub amp_fast: f64,
    pub tau_fast: f64,
    pub amp_slow: f64,
    pub tau_slow: f64,
    pub baseline: f64,
    pub single: bool,
    /// RMS residual normalized to the initial decay amplitude.
    pub residual: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum BiexpError {
    #[error("decay must have a positive mean and decreasing trend")]
    NotADecay,
    #[error("fit failed to converge after {iterations} iterations; best residual {residual:.3e}")]
    FitFailure { residual: f64, iterations: usize },
}

pub fn fit_biexponential(decay: &TimeTrace) -> Result<BiexpFit, BiexpError> {
    let n = decay.len();
    let quarter = (n / 4).max(1);
    let head: f64 = decay.samples[..quarter].iter().sum::<f64>() / quarter as f64;
    let tail: f64 = decay.samples[n - quarter..].iter().sum::<f64>() / quarter as f64;
    if decay.mean() <= 0.0 || head <= tail {
        return Err(BiexpError::NotADecay);
    }

    let span = decay.span();
    let range = head - tail;
    let ts: Vec<f64> = (0..n).map(|i| i as f64 * decay.dt).collect();

    // Crude single-exponential seed from the head/tail ratio.
    let lam0 = (head / tail.max(head * 1e-3)).ln().max(0.5) / span;

    // Single-exponential reference fit: [A, lam, c].
    let ts1 = ts.clone();
    let ys1 = decay.samples.clone();
    let mut resid_single = move |p: &[f64], out: &mut [f64]| {
        for i in 0..ts1.len() {
            out[i] = p[0] * (-p[1] * ts1[i]).exp() + p[2] - ys1[i];
        }
    };
    let amp_cap = 10.0 * range;
    let single = least_squares(
        &mut resid_single,
        n,
        &[range, lam0, tail],
        &[0.0, 0.1 / span, tail - range],
        &[amp_cap, 1e3 / decay.dt.min(span), head + range],
        300,
    );

    // Bi-exponential fit seeded by splitting the single solution.
    let ts2 = ts.clone();
    let ys2 = decay.samples.clone();
    let mut resid_bi = move |p: &[f64], out: &mut [f64]| {
        for i in 0..ts2.len() {
            out[i] = p[0] * (-p[1] * ts2[i]).exp() + p[2] * (-p[3] * ts2[i]).exp() + p[4] - ys2[i];
        }
    };
    let lam_s = single.params[1];
    let bi = least_squares(
        &mut resid_bi,
        n,
        &[
            0.7 * single.params[0],
            3.0 * lam_s,
            0.3 * single.params[0],
            lam_s / 3.0,
            single.params[2],
        ],
        &[0.0, 0.1 / span, 0.0, 0.1 / span, tail - range],
        &[
            amp_cap,
            1e3 / decay.dt.min(span),
            amp_cap,
            1e3 / decay.dt.min(span),
            head + range,
        ],
        500,
    );

    if !single.converged && !bi.converged {
        let residual = bi.rss.min(single.rss).sqrt() / (n as f64).sqrt() / range;
        return Err(BiexpError::FitFailure {
            residual,
            iterations: bi.iterations,
        });
    }

    // Akaike information criterion: the slow component must buy enough
    // residual reduction to justify two extra parameters.
    let aic = |fit: &FitOutcome, k: f64| n as f64 * (fit.rss / n as f64).max(1e-300).ln() + 2.0 * k;
    let use_single = !bi.converged || aic(&single, 3.0) <= aic(&bi, 5.0);

    let fit = if use_single {
        BiexpFit {
            amp_fast: single.params[0],
            tau_fast: 1.0 / single.params[1],
            amp_slow: 0.0,
            tau_slow: 1.0 / single.params[1],
            baseline: single.params[2],
            single: true,
            residual: single.residual_rms(n, range),
        }
    } else {
        let (a1, l1, a2, l2) = (bi.params[0], bi.params[1], bi.params[2], bi.params[3]);
        // Enforce tau_fast <= tau_slow in the output ordering.
        let (af, tf, as_, ts_) = if l1 >= l2 {
            (a1, 1.0 / l1, a2, 1.0 / l2)
        } else {
            (a2, 1.0 / l2, a1, 1.0 / l1)
        };
        BiexpFit {
            amp_fast: af,
            tau_fast: tf,
            amp_slow: as_,
            tau_slow: ts_,
            baseline: bi.params[4],
            single: false,
            residual: bi.residual_rms(n, range),
        }
    };
    Ok(fit)
}
