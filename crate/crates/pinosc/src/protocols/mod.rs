//! Drive programs and luminescence readout.
//!
//! The measurement protocols are expressed as piecewise-constant pulse
//! sequences of (bias, optical power) segments: a switched-EL square wave
//! with a reverse-bias reset phase, and DC-biased pulsed photoluminescence.
//! Companion routines convert carrier dynamics into defect photon rates,
//! synthesize Poissonian detector counts and run IV sweeps.

mod counts;
mod iv;
mod readout;
mod telegraph;

pub use counts::{simulate_photon_counts, CountError, CountTrace};
pub use iv::{iv_sweep, IvCurve, IvPoint};
pub use readout::{emission_rate, impulse_decay, ReadoutError, ReadoutModel};
pub use telegraph::{telegraph_trace, TelegraphConfig};

use serde::{Deserialize, Serialize};

/// One piecewise-constant drive interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Duration (s), > 0.
    pub duration: f64,
    /// Applied bias (V).
    pub bias: f64,
    /// Applied optical power (W), >= 0.
    pub optical_power: f64,
}

/// A piecewise bias + optical-power program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
    pub repeat_count: u32,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProtocolError {
    #[error("segment {index} duration must be > 0, got {duration}")]
    BadDuration { index: usize, duration: f64 },
    #[error("sequence must contain at least one segment")]
    Empty,
    #[error("high phase must satisfy 0 < t_high < period, got t_high={t_high}, period={period}")]
    BadHighPhase { t_high: f64, period: f64 },
    #[error("reverse bias must be <= 0 V, got {0}")]
    PositiveReverseBias(f64),
    #[error("laser window must satisfy 0 < width < period, got width={width}, period={period}")]
    BadLaserWindow { width: f64, period: f64 },
    #[error("optical power must be >= 0 W, got {0}")]
    NegativePower(f64),
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>, repeat_count: u32) -> Result<Self, ProtocolError> {
        if segments.is_empty() {
            return Err(ProtocolError::Empty);
        }
        for (index, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(ProtocolError::BadDuration {
                    index,
                    duration: s.duration,
                });
            }
            if !(s.optical_power >= 0.0) {
                return Err(ProtocolError::NegativePower(s.optical_power));
            }
        }
        Ok(Self {
            segments,
            repeat_count,
        })
    }

    /// Sum of segment durations (s).
    pub fn period(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// `repeat_count * period` (s).
    pub fn total_duration(&self) -> f64 {
        self.repeat_count as f64 * self.period()
    }

    pub fn with_repeat(mut self, repeat_count: u32) -> Self {
        self.repeat_count = repeat_count;
        self
    }

    /// Infinite cyclic iterator over segments with exact cumulative end
    /// times (no floating-point modulo drift across repetitions).
    pub fn cycle(&self) -> SegmentCycle<'_> {
        let mut prefix = Vec::with_capacity(self.segments.len() + 1);
        prefix.push(0.0);
        for s in &self.segments {
            prefix.push(prefix.last().unwrap() + s.duration);
        }
        SegmentCycle {
            seq: self,
            prefix,
            idx: 0,
            rep: 0,
        }
    }
}

pub struct SegmentCycle<'a> {
    seq: &'a PulseSequence,
    /// Cumulative durations: prefix[i] is the start of segment i in-period.
    prefix: Vec<f64>,
    idx: usize,
    rep: u64,
}

impl<'a> SegmentCycle<'a> {
    /// End time (s) of the segment most recently yielded by `next`.
    pub fn elapsed(&self) -> f64 {
        // idx/rep already point at the *next* segment.
        if self.idx == 0 {
            self.rep as f64 * self.prefix[self.seq.segments.len()]
        } else {
            self.rep as f64 * self.prefix[self.seq.segments.len()] + self.prefix[self.idx]
        }
    }
}

impl<'a> Iterator for SegmentCycle<'a> {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        let seg = self.seq.segments[self.idx];
        self.idx += 1;
        if self.idx == self.seq.segments.len() {
            self.idx = 0;
            self.rep += 1;
        }
        Some(seg)
    }
}

/// Switched-EL program: a forward pulse followed by a constant reverse-bias
/// reset phase filling out the period.
pub fn build_pulsed_el_sequence(
    v_high: f64,
    t_high: f64,
    v_rev: f64,
    period: f64,
) -> Result<PulseSequence, ProtocolError> {
    if !(t_high > 0.0 && t_high < period) {
        return Err(ProtocolError::BadHighPhase { t_high, period });
    }
    if v_rev > 0.0 {
        return Err(ProtocolError::PositiveReverseBias(v_rev));
    }
    PulseSequence::new(
        vec![
            Segment {
                duration: t_high,
                bias: v_high,
                optical_power: 0.0,
            },
            Segment {
                duration: period - t_high,
                bias: v_rev,
                optical_power: 0.0,
            },
        ],
        1,
    )
}

/// DC-biased pulsed-PL program: constant bias throughout, an optical pulse
/// during the first `laser_width` of the period.
pub fn build_dc_pl_sequence(
    v_dc: f64,
    laser_power: f64,
    laser_width: f64,
    period: f64,
) -> Result<PulseSequence, ProtocolError> {
    if !(laser_width > 0.0 && laser_width < period) {
        return Err(ProtocolError::BadLaserWindow {
            width: laser_width,
            period,
        });
    }
    if !(laser_power >= 0.0) {
        return Err(ProtocolError::NegativePower(laser_power));
    }
    PulseSequence::new(
        vec![
            Segment {
                duration: laser_width,
                bias: v_dc,
                optical_power: laser_power,
            },
            Segment {
                duration: period - laser_width,
                bias: v_dc,
                optical_power: 0.0,
            },
        ],
        1,
    )
}

/// Optical generation rate from applied power: `g_opt = coupling * power`
/// (absorbed photons per volume per watt).
pub fn optical_generation_rate(power_w: f64, coupling: f64) -> f64 {
    debug_assert!(power_w >= 0.0);
    coupling * power_w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulsed_el_shape() {
        let seq = build_pulsed_el_sequence(8.5, 30e-6, -8.5, 150e-6).unwrap();
        assert_eq!(seq.segments.len(), 2);
        assert_eq!(seq.segments[0].duration, 30e-6);
        assert_eq!(seq.segments[0].bias, 8.5);
        assert_eq!(seq.segments[0].optical_power, 0.0);
        assert!((seq.segments[1].duration - 120e-6).abs() < 1e-18);
        assert_eq!(seq.segments[1].bias, -8.5);
        assert!((seq.period() - 150e-6).abs() < 1e-12 * 150e-6);
    }

    #[test]
    fn pulsed_el_symmetric_square_wave() {
        let seq = build_pulsed_el_sequence(5.0, 50e-6, 0.0, 100e-6).unwrap();
        assert_eq!(seq.segments[0].duration, seq.segments[1].duration);
        assert_eq!(seq.segments[1].bias, 0.0);
    }

    #[test]
    fn repeat_scales_total_duration() {
        let seq = build_pulsed_el_sequence(8.5, 30e-6, -8.5, 150e-6)
            .unwrap()
            .with_repeat(3);
        assert!((seq.total_duration() - 3.0 * 150e-6).abs() < 1e-18);
    }

    #[test]
    fn pulsed_el_preconditions() {
        assert!(matches!(
            build_pulsed_el_sequence(8.5, 150e-6, -8.5, 150e-6),
            Err(ProtocolError::BadHighPhase { .. })
        ));
        assert!(matches!(
            build_pulsed_el_sequence(8.5, 30e-6, 1.0, 150e-6),
            Err(ProtocolError::PositiveReverseBias(_))
        ));
    }

    #[test]
    fn dc_pl_shape() {
        let seq = build_dc_pl_sequence(9.0, 500e-6, 100e-9, 500e-6).unwrap();
        assert_eq!(seq.segments[0].bias, 9.0);
        assert_eq!(seq.segments[1].bias, 9.0);
        assert_eq!(seq.segments[0].optical_power, 500e-6);
        assert_eq!(seq.segments[1].optical_power, 0.0);
        assert_eq!(seq.segments[0].duration, 100e-9);
    }

    #[test]
    fn dc_pl_degenerate_variants() {
        // Zero power: a pure DC hold.
        let seq = build_dc_pl_sequence(9.0, 0.0, 100e-9, 500e-6).unwrap();
        assert!(seq.segments.iter().all(|s| s.optical_power == 0.0));
        // Zero bias: pulsed PL with no bias.
        let seq = build_dc_pl_sequence(0.0, 1e-3, 100e-9, 500e-6).unwrap();
        assert!(seq.segments.iter().all(|s| s.bias == 0.0));
        // Bad window.
        assert!(build_dc_pl_sequence(9.0, 1e-3, 500e-6, 500e-6).is_err());
    }

    #[test]
    fn optical_rate_linear() {
        assert_eq!(optical_generation_rate(0.0, 1e18), 0.0);
        let g1 = optical_generation_rate(1e-5, 1e18);
        let g2 = optical_generation_rate(2e-5, 1e18);
        assert!((g2 - 2.0 * g1).abs() < 1e-6 * g2);
        // coupling 1e18, 20 uW -> 2e13.
        let g = optical_generation_rate(20e-6, 1e18);
        assert!((g - 2e13).abs() < 1e-3 * g);
    }

    #[test]
    fn cycle_elapsed_is_exact() {
        let seq = build_pulsed_el_sequence(8.5, 30e-6, -8.5, 150e-6).unwrap();
        let approx = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        let mut it = seq.cycle();
        it.next();
        assert!(approx(it.elapsed(), 30e-6));
        it.next();
        assert!(approx(it.elapsed(), 150e-6));
        it.next();
        assert!(approx(it.elapsed(), 180e-6));
        // No drift accumulation across many cycles.
        for _ in 0..1997 {
            it.next();
        }
        assert!(approx(it.elapsed(), 1000.0 * 150e-6));
    }
}
