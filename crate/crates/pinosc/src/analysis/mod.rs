//! Signal analysis chain: zero-padded FFT, Lorentzian A/gamma extraction,
//! damped-cosine and bi-exponential fits, oscillation classification and
//! (V, T) phase-map assembly.
//!
//! The oscillation-strength observable is A/gamma: the fitted spectral peak
//! amplitude divided by its full width at half maximum (the linewidth
//! convention used throughout this crate).

mod biexp;
pub mod classify;
mod damped_cosine;
mod fit;
mod lorentzian;
mod phase_map;
mod spectrum;

pub use biexp::{fit_biexponential, BiexpError, BiexpFit};
pub use classify::{classify_oscillation, ClassifyThresholds, PhaseClass, ThresholdMode};
pub use damped_cosine::{fit_damped_cosine, DampedCosineError, DampedCosineFit};
pub use lorentzian::{fit_lorentzian_peak, LorentzianFit, PeakFit};
pub use phase_map::{
    build_phase_map, max_frequency_vs_temperature, BoundingBox, PhaseMap, PhaseMapError,
};
pub use spectrum::{fft_spectrum, Spectrum, SpectrumError, Window};

use serde::{Deserialize, Serialize};

use crate::trace::TimeTrace;

/// Per-trace oscillation observables.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationMetrics {
    /// Fitted peak frequency f0 (Hz); 0 for absent cells.
    pub peak_frequency: f64,
    /// Fitted peak amplitude A (spectrum units); 0 for absent cells.
    pub amplitude: f64,
    /// Fitted full width at half maximum gamma (Hz); 0 for absent cells.
    pub linewidth: f64,
    /// Oscillation strength A/gamma (units/Hz); 0 for absent cells.
    pub strength: f64,
    pub phase_class: PhaseClass,
    /// Normalized RMS residual of the Lorentzian fit; NaN for absent cells.
    pub fit_residual: f64,
}

impl OscillationMetrics {
    pub fn absent() -> Self {
        Self {
            peak_frequency: 0.0,
            amplitude: 0.0,
            linewidth: 0.0,
            strength: 0.0,
            phase_class: PhaseClass::Absent,
            fit_residual: f64::NAN,
        }
    }
}

/// End-to-end trace analysis configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Zero-padding factor for the FFT (1..=64).
    pub pad_factor: usize,
    pub window: Window,
    /// Search band (Hz); `None` bounds default to (df, Nyquist).
    pub band_low: Option<f64>,
    pub band_high: Option<f64>,
    pub thresholds: ClassifyThresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            pad_factor: 8,
            window: Window::Hann,
            band_low: None,
            band_high: None,
            thresholds: ClassifyThresholds::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(1..=64).contains(&self.pad_factor) {
            errs.push(format!(
                "pad_factor: must lie in 1..=64, got {}",
                self.pad_factor
            ));
        }
        if let (Some(lo), Some(hi)) = (self.band_low, self.band_high) {
            if !(lo < hi) {
                errs.push(format!("band: low must be below high, got [{lo}, {hi}]"));
            }
        }
        if !(0.0..0.9).contains(&self.thresholds.transient_skip) {
            errs.push(format!(
                "thresholds.transient_skip: must lie in [0, 0.9), got {}",
                self.thresholds.transient_skip
            ));
        }
        if !(self.thresholds.strength_min >= 0.0) {
            errs.push(format!(
                "thresholds.strength_min: must be >= 0, got {}",
                self.thresholds.strength_min
            ));
        }
        if !(0.0..=1.0).contains(&self.thresholds.persistence_ratio) {
            errs.push(format!(
                "thresholds.persistence_ratio: must lie in [0, 1], got {}",
                self.thresholds.persistence_ratio
            ));
        }
        errs
    }
}

/// The full chain on one trace: transient skip, padded FFT, Lorentzian peak
/// fit, classification.
pub fn analyze_trace(trace: &TimeTrace, config: &AnalysisConfig) -> OscillationMetrics {
    let n = trace.len();
    let skip = ((n as f64 * config.thresholds.transient_skip) as usize).min(n.saturating_sub(8));
    let body = if skip > 0 {
        trace.slice(skip, n)
    } else {
        trace.clone()
    };
    if body.len() < 8 {
        return OscillationMetrics::absent();
    }

    let Ok(spectrum) = fft_spectrum(&body, config.pad_factor, config.window) else {
        return OscillationMetrics::absent();
    };
    // Default band floor: a qualifying oscillation must complete at least
    // three cycles within the analysis window; slower content is settling
    // drift, not oscillation.
    let f_lo = config
        .band_low
        .unwrap_or_else(|| spectrum.df.max(3.0 / body.span()));
    let f_hi = config.band_high.unwrap_or(spectrum.nyquist());

    match fit_lorentzian_peak(&spectrum, f_lo, f_hi) {
        PeakFit::Absent => OscillationMetrics::absent(),
        PeakFit::Peak(fit) => {
            let strength = fit.amplitude / fit.linewidth;
            let time_amplitude = 2.0 * fit.amplitude / spectrum.window_sum;
            let phase_class = classify_oscillation(
                Some(strength),
                fit.noise_floor,
                time_amplitude,
                &body,
                &config.thresholds,
            );
            if phase_class == PhaseClass::Absent {
                // A rejected peak carries no oscillation observables.
                return OscillationMetrics::absent();
            }
            OscillationMetrics {
                peak_frequency: fit.frequency,
                amplitude: fit.amplitude,
                linewidth: fit.linewidth,
                strength,
                phase_class,
                fit_residual: fit.residual,
            }
        }
    }
}
