//! Uniformly sampled scalar time traces.

use serde::{Deserialize, Serialize};

/// Physical unit tag carried by a [`TimeTrace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    /// Current density, A/cm^2.
    AmpPerCm2,
    /// Photon emission rate, photons/s.
    PhotonsPerSec,
    /// Detector counts per bin.
    Counts,
    /// Carrier density, cm^-3.
    PerCm3,
    /// Electric field, V/cm.
    VoltPerCm,
    /// Dimensionless (e.g. trap occupation fraction).
    Dimensionless,
    /// Unspecified units.
    Arbitrary,
}

impl Unit {
    /// Short suffix used in CSV column names, e.g. `current_a_cm2`.
    pub fn suffix(&self) -> &'static str {
        match self {
            Unit::AmpPerCm2 => "a_cm2",
            Unit::PhotonsPerSec => "photons_s",
            Unit::Counts => "counts",
            Unit::PerCm3 => "cm3",
            Unit::VoltPerCm => "v_cm",
            Unit::Dimensionless => "frac",
            Unit::Arbitrary => "arb",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Unit> {
        Some(match s {
            "a_cm2" => Unit::AmpPerCm2,
            "photons_s" => Unit::PhotonsPerSec,
            "counts" => Unit::Counts,
            "cm3" => Unit::PerCm3,
            "v_cm" => Unit::VoltPerCm,
            "frac" => Unit::Dimensionless,
            "arb" => Unit::Arbitrary,
            _ => return None,
        })
    }
}

/// A uniformly sampled scalar signal with time metadata.
///
/// Invariants: `dt > 0` and at least 2 samples. Sampling is uniform by
/// construction; `time(i) = t0 + i * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    pub unit: Unit,
}

impl TimeTrace {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>, unit: Unit) -> Result<Self, TraceError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(TraceError::BadDt(dt));
        }
        if samples.len() < 2 {
            return Err(TraceError::TooShort(samples.len()));
        }
        Ok(Self {
            t0,
            dt,
            samples,
            unit,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time stamp of sample `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Total spanned time from first to last sample.
    pub fn span(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// RMS of the mean-subtracted samples.
    pub fn rms_detrended(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.samples.iter().map(|&x| (x - m) * (x - m)).sum();
        (ss / self.samples.len() as f64).sqrt()
    }

    /// Sub-trace over the index range `[lo, hi)`, keeping time metadata.
    pub fn slice(&self, lo: usize, hi: usize) -> TimeTrace {
        assert!(lo < hi && hi <= self.samples.len());
        TimeTrace {
            t0: self.time(lo),
            dt: self.dt,
            samples: self.samples[lo..hi].to_vec(),
            unit: self.unit,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace dt must be positive and finite, got {0}")]
    BadDt(f64),
    #[error("trace must hold at least 2 samples, got {0}")]
    TooShort(usize),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dt() {
        assert!(TimeTrace::new(0.0, 0.0, vec![1.0, 2.0], Unit::Arbitrary).is_err());
        assert!(TimeTrace::new(0.0, -1e-9, vec![1.0, 2.0], Unit::Arbitrary).is_err());
    }

    #[test]
    fn rejects_short() {
        assert!(TimeTrace::new(0.0, 1e-9, vec![1.0], Unit::Arbitrary).is_err());
    }

    #[test]
    fn time_axis() {
        let tr = TimeTrace::new(1.0, 0.5, vec![0.0; 5], Unit::Arbitrary).unwrap();
        assert_eq!(tr.time(0), 1.0);
        assert_eq!(tr.time(4), 3.0);
        assert_eq!(tr.span(), 2.0);
    }
}
