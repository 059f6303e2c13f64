//! Poissonian photon-count synthesis from a rate trace.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::trace::TimeTrace;

/// Binned detector counts, reproducible from the stored seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTrace {
    pub t0: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub rng_seed: u64,
}

impl CountTrace {
    /// Equivalent rate trace (counts / bin_width), for re-analysis.
    pub fn to_rate_trace(&self) -> Option<TimeTrace> {
        let samples: Vec<f64> = self
            .counts
            .iter()
            .map(|&c| c as f64 / self.bin_width)
            .collect();
        TimeTrace::new(
            self.t0,
            self.bin_width,
            samples,
            crate::trace::Unit::PhotonsPerSec,
        )
        .ok()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CountError {
    #[error("rate trace contains a negative sample ({0})")]
    NegativeRate(f64),
    #[error("bin width {bin} must be >= trace dt {dt}")]
    BinTooNarrow { bin: f64, dt: f64 },
}

/// Draw Poisson counts per bin with mean equal to the integral of the rate
/// over the bin (trapezoidal), deterministically from `seed`.
pub fn simulate_photon_counts(
    rate: &TimeTrace,
    bin_width: f64,
    seed: u64,
) -> Result<CountTrace, CountError> {
    if let Some(&bad) = rate.samples.iter().find(|&&r| r < 0.0) {
        return Err(CountError::NegativeRate(bad));
    }
    if bin_width < rate.dt {
        return Err(CountError::BinTooNarrow {
            bin: bin_width,
            dt: rate.dt,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples_per_bin = (bin_width / rate.dt).round() as usize;
    let n_bins = (rate.len() - 1) / samples_per_bin.max(1);

    let mut counts = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let lo = b * samples_per_bin;
        let hi = lo + samples_per_bin;
        // Trapezoidal integral of the rate over the bin.
        let mut mean = 0.0;
        for i in lo..hi {
            mean += 0.5 * (rate.samples[i] + rate.samples[i + 1]) * rate.dt;
        }
        let c = if mean > 0.0 {
            Poisson::new(mean)
                .expect("positive finite mean")
                .sample(&mut rng)
        } else {
            0.0
        };
        counts.push(c as u64);
    }

    Ok(CountTrace {
        t0: rate.t0,
        bin_width,
        counts,
        rng_seed: seed,
    })
}
