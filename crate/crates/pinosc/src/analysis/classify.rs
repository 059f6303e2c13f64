//! Stable / damped / absent classification of oscillation traces.

use serde::{Deserialize, Serialize};

use crate::trace::TimeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseClass {
    Stable,
    Damped,
    Absent,
}

impl PhaseClass {
    pub fn code(&self) -> &'static str {
        match self {
            PhaseClass::Stable => "stable",
            PhaseClass::Damped => "damped",
            PhaseClass::Absent => "absent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `strength_min` compares against A/gamma directly (spectrum units/Hz).
    Absolute,
    /// `strength_min` compares against A/gamma normalized by the strength of
    /// a floor-level, span-limited peak (`floor * span`). Scaling the trace
    /// scales A and the floor identically, so the class is invariant under
    /// amplitude scaling.
    Relative,
}

/// Explicit classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    pub mode: ThresholdMode,
    pub strength_min: f64,
    /// Late/early amplitude ratio separating stable from damped.
    pub persistence_ratio: f64,
    /// Fraction of the trace discarded before the early window.
    pub transient_skip: f64,
    /// Relative mode only: the coherent time-domain amplitude of the fitted
    /// peak must reach this fraction of the detrended trace RMS. Guards
    /// against rounding-level spectral junk on near-constant traces.
    pub coherence_min: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            mode: ThresholdMode::Relative,
            strength_min: 10.0,
            persistence_ratio: 0.8,
            transient_skip: 0.1,
            coherence_min: 0.05,
        }
    }
}

/// RMS oscillation amplitude of a window after removing a linear trend, so
/// slow baseline drift does not masquerade as oscillation.
fn detrended_rms(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 3 {
        return 0.0;
    }
    let nf = n as f64;
    let mean_x = (nf - 1.0) / 2.0;
    let mean_y = samples.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &y) in samples.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut ss = 0.0;
    for (i, &y) in samples.iter().enumerate() {
        let r = y - mean_y - slope * (i as f64 - mean_x);
        ss += r * r;
    }
    (ss / nf).sqrt()
}

/// Late/early detrended amplitude ratio: first 25% after the transient skip
/// against the final 25%.
pub fn persistence_ratio(trace: &TimeTrace, transient_skip: f64) -> f64 {
    let n = trace.len();
    let skip = ((n as f64 * transient_skip) as usize).min(n.saturating_sub(8));
    let body = &trace.samples[skip..];
    let q = (body.len() / 4).max(2);
    let early = detrended_rms(&body[..q]);
    let late = detrended_rms(&body[body.len() - q..]);
    if early <= 0.0 {
        return if late > 0.0 { f64::INFINITY } else { 0.0 };
    }
    late / early
}

/// Classify a trace given the spectral strength extracted from it and the
/// spectral noise floor of the search band.
///
/// Stable: persistent late-window amplitude and strength above threshold.
/// Damped: strength above threshold but decaying amplitude. Absent: no
/// qualifying spectral peak or strength below threshold.
pub fn classify_oscillation(
    strength: Option<f64>,
    noise_floor: f64,
    time_amplitude: f64,
    trace: &TimeTrace,
    thresholds: &ClassifyThresholds,
) -> PhaseClass {
    let Some(strength) = strength else {
        return PhaseClass::Absent;
    };

    let strength_measure = match thresholds.mode {
        ThresholdMode::Absolute => strength,
        ThresholdMode::Relative => {
            let span = trace.span();
            if span <= 0.0 {
                return PhaseClass::Absent;
            }
            let rms = trace.rms_detrended();
            // Flatness gate: wobble at the rounding floor is not signal
            // (solver tolerances keep real dynamics far above 1e-9).
            let scale = trace.samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            if rms <= 1e-9 * scale {
                return PhaseClass::Absent;
            }
            if !(time_amplitude >= thresholds.coherence_min * rms) {
                return PhaseClass::Absent;
            }
            if noise_floor <= 0.0 {
                // Clean synthetic/deterministic spectrum: any coherent
                // fitted peak is unambiguous.
                f64::INFINITY
            } else {
                strength / (noise_floor * span)
            }
        }
    };
    if !(strength_measure >= thresholds.strength_min) {
        return PhaseClass::Absent;
    }

    if persistence_ratio(trace, thresholds.transient_skip) >= thresholds.persistence_ratio {
        PhaseClass::Stable
    } else {
        PhaseClass::Damped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze_trace, AnalysisConfig};
    use crate::trace::Unit;

    fn tone(amp: f64, freq: f64, tau: f64, dt: f64, n: usize) -> TimeTrace {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let env = if tau.is_finite() {
                    (-t / tau).exp()
                } else {
                    1.0
                };
                amp * env * (2.0 * std::f64::consts::PI * freq * t).cos()
            })
            .collect();
        TimeTrace::new(0.0, dt, samples, Unit::Arbitrary).unwrap()
    }

    #[test]
    fn undamped_cosine_is_stable() {
        let tr = tone(1.0, 1e6, f64::INFINITY, 10e-9, 4096);
        let m = analyze_trace(&tr, &AnalysisConfig::default());
        assert_eq!(m.phase_class, PhaseClass::Stable, "{m:?}");
    }

    #[test]
    fn strongly_damped_cosine_is_damped() {
        // tau = span/10: late/early ratio ~ e^{-span*0.75/(span/10)} << 0.8.
        let n = 4096;
        let dt = 10e-9;
        let span = (n - 1) as f64 * dt;
        let tr = tone(1.0, 1e6, span / 10.0, dt, n);
        let m = analyze_trace(&tr, &AnalysisConfig::default());
        assert_eq!(m.phase_class, PhaseClass::Damped, "{m:?}");
    }

    #[test]
    fn white_noise_is_absent_across_seeds() {
        let mut failures = 0;
        for seed in 0..100u64 {
            let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let samples: Vec<f64> = (0..2048)
                .map(|_| {
                    s = s
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let tr = TimeTrace::new(0.0, 10e-9, samples, Unit::Arbitrary).unwrap();
            let m = analyze_trace(&tr, &AnalysisConfig::default());
            if m.phase_class != PhaseClass::Absent {
                failures += 1;
            }
        }
        assert!(failures <= 1, "noise misclassified {failures}/100 times");
    }

    #[test]
    fn classification_invariant_under_scaling() {
        let n = 4096;
        let dt = 10e-9;
        for tau in [f64::INFINITY, (n as f64) * dt / 10.0] {
            let base = tone(1.0, 1e6, tau, dt, n);
            let scaled = TimeTrace::new(
                0.0,
                dt,
                base.samples.iter().map(|x| x * 1737.5).collect(),
                Unit::Arbitrary,
            )
            .unwrap();
            let cfg = AnalysisConfig::default();
            let a = analyze_trace(&base, &cfg);
            let b = analyze_trace(&scaled, &cfg);
            assert_eq!(a.phase_class, b.phase_class);
        }
    }
}
