//! Defect emission readout: free carriers feed a saturable emitter
//! population whose radiative decay is the observed photon rate.

use crate::trace::{TimeTrace, Unit};
use serde::{Deserialize, Serialize};

/// Emitter ensemble readout parameters.
///
/// Carrier capture fills an excited-state population against saturation
/// `(N_e - N*)`; the fast channel decays with `tau_f` and an optional slow
/// channel (background-defect analog) with `tau_s`, weighted by `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// Photons detected per radiative decay (collection included), in [0,1].
    pub capture_efficiency: f64,
    /// Carrier capture coefficient into the emitter (cm^3/s).
    pub capture_coefficient: f64,
    /// Emitter density N_e (cm^-3).
    pub emitter_density: f64,
    /// Fast excited-state lifetime tau_f (s).
    pub fast_lifetime: f64,
    /// Slow channel lifetime tau_s (s).
    pub slow_lifetime: f64,
    /// Slow channel weight beta, in [0,1].
    pub slow_fraction: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            capture_efficiency: 0.05,
            capture_coefficient: 1e-7,
            emitter_density: 1e10,
            fast_lifetime: 522e-9,
            slow_lifetime: 2.39e-6,
            slow_fraction: 0.0,
        }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.capture_efficiency) {
            errs.push(format!(
                "capture_efficiency: must lie in [0,1], got {}",
                self.capture_efficiency
            ));
        }
        if !(0.0..=1.0).contains(&self.slow_fraction) {
            errs.push(format!(
                "slow_fraction: must lie in [0,1], got {}",
                self.slow_fraction
            ));
        }
        for (name, v) in [
            ("fast_lifetime", self.fast_lifetime),
            ("slow_lifetime", self.slow_lifetime),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{name}: must be > 0 (s), got {v}"));
            }
        }
        for (name, v) in [
            ("capture_coefficient", self.capture_coefficient),
            ("emitter_density", self.emitter_density),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("{name}: must be >= 0, got {v}"));
            }
        }
        errs
    }

    /// Hard upper bound on the emitted photon rate.
    pub fn rate_bound(&self) -> f64 {
        self.capture_efficiency * self.emitter_density / self.fast_lifetime
            + self.slow_fraction * self.emitter_density / self.slow_lifetime
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReadoutError {
    #[error("trace dt = {dt:.3e} s exceeds tau_f/2 = {limit:.3e} s; supply a finer grid")]
    GridTooCoarse { dt: f64, limit: f64 },
    #[error("readout model invalid: {0:?}")]
    InvalidModel(Vec<String>),
}

/// Photon emission rate (photons/s per cm^3 of ensemble) driven by a free
/// electron density trace.
///
/// Integrates `dN*/dt = c_cap n(t) (N_e - N*) - N*/tau` for the fast channel
/// and its slow analog by explicit trapezoidal (Heun) sub-stepping with a
/// sub-step no larger than `tau_f / 20`; the output rate is
/// `eta N*_f/tau_f + beta N*_s/tau_s` on the input time grid, starting from
/// empty populations.
pub fn emission_rate(
    n_trace: &TimeTrace,
    model: &ReadoutModel,
    dt: f64,
) -> Result<TimeTrace, ReadoutError> {
    let errs = model.validate();
    if !errs.is_empty() {
        return Err(ReadoutError::InvalidModel(errs));
    }
    if dt > model.fast_lifetime / 2.0 {
        return Err(ReadoutError::GridTooCoarse {
            dt,
            limit: model.fast_lifetime / 2.0,
        });
    }

    let substeps = (dt / (model.fast_lifetime / 20.0)).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;

    let mut fast = 0.0_f64;
    let mut slow = 0.0_f64;
    let mut rate = Vec::with_capacity(n_trace.len());
    rate.push(out_rate(fast, slow, model));

    for i in 1..n_trace.len() {
        let n_a = n_trace.samples[i - 1];
        let n_b = n_trace.samples[i];
        for k in 0..substeps {
            // Linear interpolation of the drive inside the grid cell.
            let fa = (k as f64) / substeps as f64;
            let fb = (k as f64 + 1.0) / substeps as f64;
            let na = n_a + (n_b - n_a) * fa;
            let nb = n_a + (n_b - n_a) * fb;
            fast = heun(
                fast,
                na,
                nb,
                h,
                model.capture_coefficient,
                model.emitter_density,
                model.fast_lifetime,
            );
            slow = heun(
                slow,
                na,
                nb,
                h,
                model.capture_coefficient,
                model.emitter_density,
                model.slow_lifetime,
            );
        }
        rate.push(out_rate(fast, slow, model));
    }

    Ok(TimeTrace::new(n_trace.t0, dt, rate, Unit::PhotonsPerSec).unwrap())
}

fn out_rate(fast: f64, slow: f64, m: &ReadoutModel) -> f64 {
    m.capture_efficiency * fast / m.fast_lifetime + m.slow_fraction * slow / m.slow_lifetime
}

/// One explicit trapezoidal step of `dN/dt = c n (N_e - N) - N / tau`.
fn heun(pop: f64, n_a: f64, n_b: f64, h: f64, c: f64, n_e: f64, tau: f64) -> f64 {
    let d1 = c * n_a * (n_e - pop) - pop / tau;
    let pred = pop + h * d1;
    let d2 = c * n_b * (n_e - pred) - pred / tau;
    (pop + 0.5 * h * (d1 + d2)).clamp(0.0, n_e)
}

/// Seed the emitter population and let it decay with no drive: used for
/// impulse-response lifetime measurements.
pub fn impulse_decay(model: &ReadoutModel, n0: f64, dt: f64, samples: usize) -> TimeTrace {
    let mut fast = n0.min(model.emitter_density);
    let mut slow = n0.min(model.emitter_density);
    let substeps = (dt / (model.fast_lifetime / 20.0)).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let mut rate = Vec::with_capacity(samples);
    rate.push(out_rate(fast, slow, model));
    for _ in 1..samples {
        for _ in 0..substeps {
            fast = heun(
                fast,
                0.0,
                0.0,
                h,
                0.0,
                model.emitter_density,
                model.fast_lifetime,
            );
            slow = heun(
                slow,
                0.0,
                0.0,
                h,
                0.0,
                model.emitter_density,
                model.slow_lifetime,
            );
        }
        rate.push(out_rate(fast, slow, model));
    }
    TimeTrace::new(0.0, dt, rate, Unit::PhotonsPerSec).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ReadoutModel {
        ReadoutModel {
            capture_efficiency: 0.1,
            capture_coefficient: 1e-7,
            emitter_density: 1e10,
            fast_lifetime: 522e-9,
            slow_lifetime: 2.39e-6,
            slow_fraction: 0.0,
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        let m = model();
        let n = TimeTrace::new(0.0, 1e-6, vec![0.0; 10], Unit::PerCm3).unwrap();
        assert!(matches!(
            emission_rate(&n, &m, 1e-6),
            Err(ReadoutError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn impulse_decay_matches_exponential() {
        // n = 0 with a loaded emitter: rate(t) = eta N0/tau_f e^{-t/tau_f}.
        let m = model();
        let dt = 20e-9;
        let n0 = 1e8;
        let tr = impulse_decay(&m, n0, dt, 200);
        let r0 = m.capture_efficiency * n0 / m.fast_lifetime;
        for (i, &r) in tr.samples.iter().enumerate() {
            let expected = r0 * (-(i as f64) * dt / m.fast_lifetime).exp();
            if expected > r0 * 1e-3 {
                assert!(
                    (r - expected).abs() <= 0.01 * expected,
                    "sample {i}: {r} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn steady_state_closed_form() {
        // Constant n: N*_ss = c n N_e / (c n + 1/tau_f).
        let m = model();
        let n_const = 5e9;
        let dt = 50e-9;
        let n = TimeTrace::new(0.0, dt, vec![n_const; 4000], Unit::PerCm3).unwrap();
        let rate = emission_rate(&n, &m, dt).unwrap();
        let c_n = m.capture_coefficient * n_const;
        let n_ss = c_n * m.emitter_density / (c_n + 1.0 / m.fast_lifetime);
        let expected = m.capture_efficiency * n_ss / m.fast_lifetime;
        let got = *rate.samples.last().unwrap();
        assert!(
            (got - expected).abs() < 0.01 * expected,
            "{got} vs {expected}"
        );
    }

    #[test]
    fn quasi_static_tracking() {
        // Slow sinusoidal drive (period >> tau_f): the rate tracks the shape
        // of n(t) with correlation > 0.99.
        let m = model();
        let dt = 100e-9;
        let period = 200e-6;
        let samples = 4000;
        let n: Vec<f64> = (0..samples)
            .map(|i| {
                let t = i as f64 * dt;
                5e9 * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * t / period).sin())
            })
            .collect();
        let n_trace = TimeTrace::new(0.0, dt, n, Unit::PerCm3).unwrap();
        let rate = emission_rate(&n_trace, &m, dt).unwrap();

        // Pearson correlation over the settled portion.
        let skip = samples / 4;
        let xs = &n_trace.samples[skip..];
        let ys = &rate.samples[skip..];
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr > 0.99, "correlation {corr}");
    }

    #[test]
    fn biexponential_fit_recovers_fast_lifetime_from_impulse() {
        // Loading the emitter and letting it decay, the lifetime fitter
        // recovers tau_f within 3%.
        let m = model();
        let tr = impulse_decay(&m, 1e8, 10e-9, 400);
        let fit = crate::analysis::fit_biexponential(&tr).unwrap();
        assert!(
            (fit.tau_fast - m.fast_lifetime).abs() / m.fast_lifetime < 0.03,
            "tau_fast = {:.4e} vs {:.4e}",
            fit.tau_fast,
            m.fast_lifetime
        );
    }

    #[test]
    fn rate_is_bounded() {
        let mut m = model();
        m.slow_fraction = 0.3;
        let dt = 50e-9;
        // Absurdly strong drive saturates the emitter.
        let n = TimeTrace::new(0.0, dt, vec![1e15; 2000], Unit::PerCm3).unwrap();
        let rate = emission_rate(&n, &m, dt).unwrap();
        let bound = m.rate_bound();
        for &r in &rate.samples {
            assert!(r >= 0.0);
            assert!(r <= bound * (1.0 + 1e-9));
        }
    }
}
