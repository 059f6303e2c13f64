//! Zero-padded FFT magnitude spectra of time traces.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::trace::TimeTrace;

/// One-sided spectrum of a real trace.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Frequency step (Hz) of the padded grid.
    pub df: f64,
    /// One-sided complex values, DC through Nyquist.
    pub values: Vec<Complex64>,
    /// One-sided magnitudes |X_k|.
    pub magnitude: Vec<f64>,
    /// Number of signal samples before padding.
    pub n_signal: usize,
    /// Padded transform length (power of two).
    pub n_padded: usize,
    /// Sum of the window coefficients (converts peak magnitudes back to
    /// time-domain amplitudes: a_time = 2 |X| / window_sum).
    pub window_sum: f64,
}

impl Spectrum {
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn nyquist(&self) -> f64 {
        self.frequency(self.magnitude.len() - 1)
    }

    /// Total signal power `sum |x_w|^2` reconstructed from the one-sided
    /// spectrum via Parseval's identity.
    pub fn total_power(&self) -> f64 {
        let n = self.n_padded as f64;
        let mut sum = self.values[0].norm_sqr();
        let last = self.values.len() - 1;
        sum += self.values[last].norm_sqr();
        for v in &self.values[1..last] {
            sum += 2.0 * v.norm_sqr();
        }
        sum / n
    }

    /// Index of the largest magnitude within `[f_lo, f_hi]`, excluding DC.
    pub fn peak_in_band(&self, f_lo: f64, f_hi: f64) -> Option<usize> {
        let lo = ((f_lo / self.df).ceil() as usize).max(1);
        let hi = ((f_hi / self.df).floor() as usize).min(self.magnitude.len() - 1);
        if lo > hi {
            return None;
        }
        (lo..=hi).max_by(|&a, &b| self.magnitude[a].partial_cmp(&self.magnitude[b]).unwrap())
    }

    /// Median magnitude over `[f_lo, f_hi]` (the noise-floor estimator).
    pub fn median_in_band(&self, f_lo: f64, f_hi: f64) -> f64 {
        let lo = ((f_lo / self.df).ceil() as usize).max(1);
        let hi = ((f_hi / self.df).floor() as usize).min(self.magnitude.len() - 1);
        let mut v: Vec<f64> = self.magnitude[lo..=hi].to_vec();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectrumError {
    #[error("need at least 8 samples for a spectrum, got {0}")]
    TooShort(usize),
    #[error("pad factor must lie in 1..=64, got {0}")]
    BadPadFactor(usize),
}

/// Mean-subtracted, windowed, zero-padded magnitude spectrum.
///
/// The trace is padded to `pad_factor * len` rounded up to a power of two;
/// padding refines the frequency grid without adding information. For
/// `pad_factor = 1` and a rectangular window, Parseval's identity relates
/// [`Spectrum::total_power`] to the input exactly.
pub fn fft_spectrum(
    trace: &TimeTrace,
    pad_factor: usize,
    window: Window,
) -> Result<Spectrum, SpectrumError> {
    let n = trace.samples.len();
    if n < 8 {
        return Err(SpectrumError::TooShort(n));
    }
    if !(1..=64).contains(&pad_factor) {
        return Err(SpectrumError::BadPadFactor(pad_factor));
    }

    let n_padded = (n * pad_factor).next_power_of_two();
    let mean = trace.mean();

    let mut window_sum = 0.0;
    let mut buf: Vec<Complex64> = Vec::with_capacity(n_padded);
    for (i, &x) in trace.samples.iter().enumerate() {
        let w = match window {
            Window::Rectangular => 1.0,
            Window::Hann => {
                let s = (std::f64::consts::PI * i as f64 / (n - 1) as f64).sin();
                s * s
            }
        };
        window_sum += w;
        buf.push(Complex64::new((x - mean) * w, 0.0));
    }
    buf.resize(n_padded, Complex64::new(0.0, 0.0));

    FftPlanner::new()
        .plan_fft_forward(n_padded)
        .process(&mut buf);

    let half = n_padded / 2;
    let values: Vec<Complex64> = buf[..=half].to_vec();
    let magnitude = values.iter().map(|v| v.norm()).collect();

    Ok(Spectrum {
        df: 1.0 / (n_padded as f64 * trace.dt),
        values,
        magnitude,
        n_signal: n,
        n_padded,
        window_sum,
    })
}
