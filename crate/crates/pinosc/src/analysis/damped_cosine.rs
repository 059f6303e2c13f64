//! Time-domain damped-cosine fit: the companion to the spectral A/gamma
//! extraction for characterizing damping directly.

use super::fit::least_squares;
use crate::trace::TimeTrace;

/// Fitted parameters of `offset + A exp(-t/tau) cos(2 pi f t + phi)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DampedCosineFit {
    pub amplitude: f64,
    pub frequency: f64,
    /// Decay time tau_d (s); `f64::INFINITY` when `no_damping` is set.
    pub decay_time: f64,
    pub phase: f64,
    pub offset: f64,
    /// True when the fit finds no resolvable damping over the trace span.
    pub no_damping: bool,
    /// RMS residual normalized to the fitted amplitude.
    pub residual: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum DampedCosineError {
    #[error("trace must span at least 3 periods of the frequency guess")]
    TooShort,
    #[error("fit collapsed to a non-oscillatory solution (f ~ 0); residual {residual:.3e}")]
    DegenerateFrequency { residual: f64 },
    #[error("fit failed to converge after {iterations} iterations; best residual {residual:.3e}")]
    FitFailure { residual: f64, iterations: usize },
}

/// Decay times longer than this multiple of the trace span are reported as
/// "no damping" (tau_d = infinity).
const NO_DAMPING_SPAN_FACTOR: f64 = 20.0;

pub fn fit_damped_cosine(
    trace: &TimeTrace,
    f_guess: f64,
) -> Result<DampedCosineFit, DampedCosineError> {
    let span = trace.span();
    if !(f_guess > 0.0) || span * f_guess < 3.0 {
        return Err(DampedCosineError::TooShort);
    }

    let n = trace.len();
    let mean = trace.mean();
    let rms = trace.rms_detrended();
    let range = trace
        .samples
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        - trace.samples.iter().cloned().fold(f64::INFINITY, f64::min);

    // Phase and amplitude seed by quadrature correlation at f_guess.
    let (mut sc, mut ss) = (0.0, 0.0);
    for (i, &x) in trace.samples.iter().enumerate() {
        let t = i as f64 * trace.dt;
        let arg = 2.0 * std::f64::consts::PI * f_guess * t;
        sc += (x - mean) * arg.cos();
        ss += (x - mean) * arg.sin();
    }
    let phase0 = (-ss).atan2(sc);

    // Damping seed from the RMS ratio of the two trace halves.
    let half = n / 2;
    let rms_of = |lo: usize, hi: usize| -> f64 {
        let m = trace.samples[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        (trace.samples[lo..hi]
            .iter()
            .map(|&x| (x - m) * (x - m))
            .sum::<f64>()
            / (hi - lo) as f64)
            .sqrt()
    };
    let r1 = rms_of(0, half).max(1e-300);
    let r2 = rms_of(half, n).max(1e-300);
    let lambda0 = (2.0 * (r1 / r2).ln() / span).max(0.0);

    let ts: Vec<f64> = (0..n).map(|i| i as f64 * trace.dt).collect();
    let ys = trace.samples.clone();
    let mut resid = move |p: &[f64], out: &mut [f64]| {
        let (a, f, lam, phi, c) = (p[0], p[1], p[2], p[3], p[4]);
        let w = 2.0 * std::f64::consts::PI * f;
        for i in 0..ts.len() {
            out[i] = c + a * (-lam * ts[i]).exp() * (w * ts[i] + phi).cos() - ys[i];
        }
    };

    let nyquist = 0.5 / trace.dt;
    let p0 = [
        std::f64::consts::SQRT_2 * rms,
        f_guess,
        lambda0,
        phase0,
        mean,
    ];
    let lower = [0.0, 0.0, 0.0, -7.0, mean - range];
    let upper = [
        10.0 * range.max(1e-300),
        nyquist,
        100.0 / span,
        7.0,
        mean + range,
    ];
    let fit = least_squares(&mut resid, n, &p0, &lower, &upper, 300);

    let amplitude = fit.params[0];
    let frequency = fit.params[1];
    let lambda = fit.params[2];
    let residual = fit.residual_rms(n, amplitude.max(1e-300 * range.max(1e-300)));

    if !fit.converged {
        return Err(DampedCosineError::FitFailure {
            residual,
            iterations: fit.iterations,
        });
    }
    // Degenerate non-oscillatory solutions: fewer than half a cycle over
    // the trace, or an overdamped "tone" that dies before completing half a
    // cycle (a pure decay dressed up with a spurious frequency).
    let cycles_in_span = frequency * span;
    let cycles_per_decay = if lambda > 0.0 {
        frequency / lambda
    } else {
        f64::INFINITY
    };
    if cycles_in_span < 0.5 || cycles_per_decay < 0.5 {
        return Err(DampedCosineError::DegenerateFrequency { residual });
    }

    let no_damping = lambda * span < 1.0 / NO_DAMPING_SPAN_FACTOR;
    Ok(DampedCosineFit {
        amplitude,
        frequency,
        decay_time: if no_damping {
            f64::INFINITY
        } else {
            1.0 / lambda
        },
        phase: fit.params[3],
        offset: fit.params[4],
        no_damping,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Unit;

    fn make_trace(
        amp: f64,
        freq: f64,
        tau: f64,
        phase: f64,
        offset: f64,
        dt: f64,
        n: usize,
        noise: f64,
    ) -> TimeTrace {
        let mut seed = 0xA5A5A5A5u64;
        let mut rnd = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let env = if tau.is_finite() {
                    (-t / tau).exp()
                } else {
                    1.0
                };
                offset
                    + amp * env * (2.0 * std::f64::consts::PI * freq * t + phase).cos()
                    + noise * amp * rnd()
            })
            .collect();
        TimeTrace::new(0.0, dt, samples, Unit::Arbitrary).unwrap()
    }

    #[test]
    fn pure_cosine_no_damping_flag() {
        let tr = make_trace(1.0, 2e6, f64::INFINITY, 0.3, 0.1, 10e-9, 3000, 0.0);
        let fit = fit_damped_cosine(&tr, 1.9e6).unwrap();
        assert!(fit.no_damping, "{fit:?}");
        assert!(fit.decay_time.is_infinite());
        assert!(
            (fit.frequency - 2e6).abs() / 2e6 < 0.005,
            "f = {}",
            fit.frequency
        );
    }

    #[test]
    fn synthetic_recovery_within_5_percent() {
        // A = 1, f = 3 MHz, tau = 5 us, 2% noise.
        let tr = make_trace(1.0, 3e6, 5e-6, -0.7, 0.25, 5e-9, 4000, 0.02);
        let fit = fit_damped_cosine(&tr, 2.8e6).unwrap();
        assert!((fit.amplitude - 1.0).abs() < 0.05, "A = {}", fit.amplitude);
        assert!(
            (fit.frequency - 3e6).abs() / 3e6 < 0.05,
            "f = {}",
            fit.frequency
        );
        assert!(
            (fit.decay_time - 5e-6).abs() / 5e-6 < 0.05,
            "tau = {}",
            fit.decay_time
        );
        assert!((fit.offset - 0.25).abs() < 0.05);
    }

    #[test]
    fn pure_exponential_is_degenerate_not_spurious() {
        // A decay with no oscillation must not come back as a confident
        // finite-frequency fit.
        let n = 3000;
        let dt = 10e-9;
        let samples: Vec<f64> = (0..n)
            .map(|i| 2.0 * (-(i as f64) * dt / 5e-6).exp())
            .collect();
        let tr = TimeTrace::new(0.0, dt, samples, Unit::Arbitrary).unwrap();
        match fit_damped_cosine(&tr, 1e6) {
            Err(DampedCosineError::DegenerateFrequency { .. })
            | Err(DampedCosineError::FitFailure { .. }) => {}
            Ok(fit) => {
                // Tolerated only as an essentially non-oscillatory solution.
                assert!(
                    fit.frequency * tr.span() < 1.0,
                    "spurious confident fit: {fit:?}"
                );
            }
            Err(DampedCosineError::TooShort) => panic!("unexpected TooShort"),
        }
    }
}
