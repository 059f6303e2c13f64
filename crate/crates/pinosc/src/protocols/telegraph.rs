//! Two-state Markov telegraph (burst) noise generator.
//!
//! Phenomenological: exponential dwell times in each of two current levels,
//! not trap microphysics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::trace::{TimeTrace, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphConfig {
    /// Bias threshold: the generator is active for biases at or below this
    /// value (deep reverse bias), in V.
    pub bias_threshold: f64,
    /// Current step between the two levels (A).
    pub amplitude: f64,
    /// Transition rate out of the low state (1/s).
    pub rate_up: f64,
    /// Transition rate out of the high state (1/s).
    pub rate_down: f64,
}

impl Default for TelegraphConfig {
    fn default() -> Self {
        Self {
            bias_threshold: -5.0,
            amplitude: 2e-8,
            rate_up: 2e4,
            rate_down: 4e4,
        }
    }
}

impl TelegraphConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [("rate_up", self.rate_up), ("rate_down", self.rate_down)] {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{name}: must be > 0 (1/s), got {v}"));
            }
        }
        if !self.amplitude.is_finite() {
            errs.push(format!("amplitude: must be finite, got {}", self.amplitude));
        }
        if !self.bias_threshold.is_finite() {
            errs.push(format!(
                "bias_threshold: must be finite, got {}",
                self.bias_threshold
            ));
        }
        errs
    }
}

/// Sample a telegraph current trace: levels {0, amplitude}, exponential
/// dwell times, deterministic for a given seed.
pub fn telegraph_trace(cfg: &TelegraphConfig, dt: f64, samples: usize, seed: u64) -> TimeTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut high = false;
    // Time to the next switch, drawn on entry into each state.
    let mut remaining = dwell(&mut rng, cfg.rate_up);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        out.push(if high { cfg.amplitude } else { 0.0 });
        remaining -= dt;
        while remaining <= 0.0 {
            high = !high;
            remaining += dwell(&mut rng, if high { cfg.rate_down } else { cfg.rate_up });
        }
    }
    TimeTrace::new(0.0, dt, out, Unit::Arbitrary).unwrap()
}

fn dwell(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    -u.ln() / rate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_levels_only() {
        let cfg = TelegraphConfig::default();
        let tr = telegraph_trace(&cfg, 1e-6, 20_000, 5);
        for &v in &tr.samples {
            assert!(v == 0.0 || v == cfg.amplitude);
        }
        // Both levels visited for a trace much longer than the dwell times.
        assert!(tr.samples.iter().any(|&v| v == 0.0));
        assert!(tr.samples.iter().any(|&v| v == cfg.amplitude));
    }

    #[test]
    fn seeds_change_switch_times_not_levels() {
        let cfg = TelegraphConfig::default();
        let a = telegraph_trace(&cfg, 1e-6, 20_000, 1);
        let b = telegraph_trace(&cfg, 1e-6, 20_000, 2);
        assert_ne!(a.samples, b.samples, "different seeds, different switching");
        let levels = |t: &TimeTrace| {
            let mut v: Vec<f64> = t.samples.clone();
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            v.dedup();
            v
        };
        assert_eq!(levels(&a), levels(&b));
    }

    #[test]
    fn deterministic() {
        let cfg = TelegraphConfig::default();
        let a = telegraph_trace(&cfg, 1e-6, 1000, 9);
        let b = telegraph_trace(&cfg, 1e-6, 1000, 9);
        assert_eq!(a.samples, b.samples);
    }
}
