//! Quasi-static IV sweeps with optional burst noise in deep reverse bias.

use serde::Serialize;

use crate::dynamics::{integrate, GrParams, GrState, IntegratorError, Tolerances};
use crate::protocols::{telegraph_trace, PulseSequence, Segment, TelegraphConfig};

#[derive(Debug, Clone, Serialize)]
pub struct IvPoint {
    pub bias_v: f64,
    /// Mean terminal current over the settled window (A).
    pub current_a: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IvCurve {
    pub points: Vec<IvPoint>,
}

/// Integrate to `settle_time` at each bias and report the mean conduction
/// current `q mu n E A` over the final 20% of the window. In deep reverse
/// bias an optional telegraph current is superposed, deterministic given
/// `seed` (one derived stream per bias point).
pub fn iv_sweep(
    bias_list: &[f64],
    t_kelvin: f64,
    p: &GrParams,
    settle_time: f64,
    burst_noise: Option<&TelegraphConfig>,
    seed: u64,
) -> Result<IvCurve, IntegratorError> {
    assert!(settle_time > 0.0, "settle_time must be > 0");

    let mut points = Vec::with_capacity(bias_list.len());
    let dt = settle_time / 2000.0;

    for (idx, &v) in bias_list.iter().enumerate() {
        let hold = PulseSequence::new(
            vec![Segment {
                duration: settle_time,
                bias: v,
                optical_power: 0.0,
            }],
            1,
        )
        .expect("single positive-duration segment");

        let s0 = GrState::new(0.0, 1.0, 0.0);
        let out = integrate(
            &s0,
            &hold,
            settle_time,
            dt,
            Tolerances::default(),
            t_kelvin,
            0.0,
            p,
        )?;

        let j = &out.current_density.samples;
        let lo = j.len() - j.len() / 5;
        let mut mean_a =
            j[lo..].iter().sum::<f64>() / (j.len() - lo) as f64 * p.device.junction_area;

        if let Some(cfg) = burst_noise {
            if v <= cfg.bias_threshold {
                let noise = telegraph_trace(cfg, dt, j.len() - lo, seed ^ (idx as u64) << 32);
                mean_a += noise.samples.iter().sum::<f64>() / noise.samples.len() as f64;
            }
        }

        points.push(IvPoint {
            bias_v: v,
            current_a: mean_a,
        });
    }

    Ok(IvCurve { points })
}
