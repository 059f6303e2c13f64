//! Simulation pipeline and the deterministic parallel sweep harness.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{analyze_trace, build_phase_map, OscillationMetrics, PhaseMap};
use crate::config::{ProtocolTemplate, RunConfig};
use crate::dynamics::{integrate, GrState, IntegratorError, Tolerances};
use crate::io::derive_seed;
use crate::protocols::{
    build_dc_pl_sequence, build_pulsed_el_sequence, emission_rate, simulate_photon_counts,
    CountTrace, PulseSequence,
};
use crate::trace::TimeTrace;

/// Everything produced by one simulated cell.
#[derive(Debug)]
pub struct CellResult {
    pub electron_density: TimeTrace,
    pub occupied_fraction: TimeTrace,
    pub field: TimeTrace,
    pub current_density: TimeTrace,
    pub photon_rate: TimeTrace,
    pub counts: Option<CountTrace>,
    /// Metrics of the emitter photon-rate trace (the primary observable).
    pub metrics_photon: OscillationMetrics,
    /// Metrics of the diode current trace.
    pub metrics_current: OscillationMetrics,
}

#[derive(Debug, thiserror::Error)]
pub enum CellError {
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("readout: {0}")]
    Readout(#[from] crate::protocols::ReadoutError),
    #[error("counts: {0}")]
    Counts(#[from] crate::protocols::CountError),
    #[error("protocol: {0}")]
    Protocol(#[from] crate::protocols::ProtocolError),
}

/// Build the drive program of the configured protocol template at a given
/// forward/DC bias.
pub fn build_sequence(cfg: &RunConfig, bias_v: f64) -> Result<PulseSequence, CellError> {
    Ok(match cfg.protocol.template {
        ProtocolTemplate::PulsedEl {
            t_high,
            v_rev,
            period,
        } => build_pulsed_el_sequence(bias_v, t_high, v_rev, period)?,
        ProtocolTemplate::DcPl {
            laser_power,
            laser_width,
            period,
        } => build_dc_pl_sequence(bias_v, laser_power, laser_width, period)?,
        ProtocolTemplate::Custom { ref segments } => {
            let segs = segments
                .iter()
                .map(
                    |&(duration, bias, optical_power)| crate::protocols::Segment {
                        duration,
                        bias: bias + bias_v,
                        optical_power,
                    },
                )
                .collect();
            PulseSequence::new(segs, 1)?
        }
    })
}

/// Time window analyzed for oscillations, relative to the start of the final
/// repetition: the forward segment for pulsed EL, the whole period otherwise.
fn analysis_window(cfg: &RunConfig) -> (f64, f64) {
    match cfg.protocol.template {
        ProtocolTemplate::PulsedEl { t_high, period, .. } => {
            let start = cfg.protocol.warmup_periods as f64 * period;
            (start, start + t_high)
        }
        ProtocolTemplate::DcPl { period, .. } => {
            let start = cfg.protocol.warmup_periods as f64 * period;
            (start, start + period)
        }
        ProtocolTemplate::Custom { ref segments } => {
            let period: f64 = segments.iter().map(|s| s.0).sum();
            let start = cfg.protocol.warmup_periods as f64 * period;
            (start, start + period)
        }
    }
}

/// Simulate one (bias, temperature) cell: integrate the drive program,
/// convert carriers to emission, optionally synthesize counts, analyze the
/// photon-rate and current traces over the post-warmup window.
pub fn run_cell(
    cfg: &RunConfig,
    bias_v: f64,
    t_kelvin: f64,
    seed: u64,
) -> Result<CellResult, CellError> {
    let p = cfg.gr_params();
    let sequence = build_sequence(cfg, bias_v)?;
    let (win_start, win_end) = analysis_window(cfg);
    let t_span = win_end;
    let dt = cfg.protocol.sample_dt;

    // Cold start with full traps: reverse/idle phases leave the trap level
    // populated, and warmup periods settle the cycle.
    let s0 = GrState::new(0.0, 1.0, 0.0);
    let tol = Tolerances {
        rtol: cfg.protocol.rtol,
        atol: cfg.protocol.atol,
    };
    let out = integrate(
        &s0,
        &sequence,
        t_span,
        dt,
        tol,
        t_kelvin,
        cfg.protocol.optical_coupling,
        &p,
    )?;

    // Emission readout over the full simulated span, then slice the
    // analysis window from every trace.
    let photon_full = emission_rate(&out.electron_density, &cfg.readout, dt)?;

    let lo = ((win_start / dt).round() as usize).min(out.electron_density.len() - 2);
    let hi = out.electron_density.len();
    let slice = |tr: &TimeTrace| tr.slice(lo, hi);

    let electron_density = slice(&out.electron_density);
    let occupied_fraction = slice(&out.occupied_fraction);
    let field = slice(&out.field);
    let current_density = slice(&out.current_density);
    let photon_rate = slice(&photon_full);

    let counts = if cfg.counts.enabled {
        let detected = TimeTrace::new(
            photon_rate.t0,
            photon_rate.dt,
            photon_rate
                .samples
                .iter()
                .map(|r| r * cfg.counts.detection_volume)
                .collect(),
            crate::trace::Unit::PhotonsPerSec,
        )
        .expect("photon rate trace is well-formed");
        Some(simulate_photon_counts(
            &detected,
            cfg.counts.bin_width,
            seed,
        )?)
    } else {
        None
    };

    let metrics_photon = analyze_trace(&photon_rate, &cfg.analysis);
    let metrics_current = analyze_trace(&current_density, &cfg.analysis);

    Ok(CellResult {
        electron_density,
        occupied_fraction,
        field,
        current_density,
        photon_rate,
        counts,
        metrics_photon,
        metrics_current,
    })
}

/// One sweep cell outcome, kept small for collection.
#[derive(Debug, Serialize)]
pub struct SweepCell {
    pub bias_v: f64,
    pub t_kelvin: f64,
    pub seed: u64,
    pub photon: Option<OscillationMetrics>,
    pub current: Option<OscillationMetrics>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct SweepResult {
    pub photon_map: PhaseMap,
    pub current_map: PhaseMap,
    pub cells: Vec<SweepCell>,
    pub failed_cells: usize,
}

impl SweepResult {
    pub fn total_cells(&self) -> usize {
        self.cells.len()
    }

    /// True when at least 90% of cells produced data.
    pub fn acceptable(&self) -> bool {
        self.failed_cells * 10 <= self.total_cells()
    }
}

/// Execute the configured (V, T) sweep. Cells run in parallel up to
/// `worker_count`; each cell's RNG stream derives from (master seed, cell
/// index), so the output is bit-identical for a fixed seed regardless of
/// worker count or scheduling. Failed cells are recorded as missing and the
/// sweep continues.
pub fn run_sweep(cfg: &RunConfig) -> SweepResult {
    let voltages = cfg.sweep.voltages();
    let temperatures = cfg.sweep.temperatures();
    let indices: Vec<(usize, usize)> = (0..temperatures.len())
        .flat_map(|ti| (0..voltages.len()).map(move |vi| (ti, vi)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count)
        .build()
        .expect("worker pool");

    let cells: Vec<SweepCell> = pool.install(|| {
        indices
            .par_iter()
            .map(|&(ti, vi)| {
                let index = (ti * voltages.len() + vi) as u64;
                let seed = derive_seed(cfg.master_seed, index);
                let v = voltages[vi];
                let t = temperatures[ti];
                match run_cell(cfg, v, t, seed) {
                    Ok(res) => SweepCell {
                        bias_v: v,
                        t_kelvin: t,
                        seed,
                        photon: Some(res.metrics_photon),
                        current: Some(res.metrics_current),
                        error: None,
                    },
                    Err(e) => SweepCell {
                        bias_v: v,
                        t_kelvin: t,
                        seed,
                        photon: None,
                        current: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });

    let failed_cells = cells.iter().filter(|c| c.error.is_some()).count();
    let photon_map = build_phase_map(
        cells
            .iter()
            .map(|c| (c.bias_v, c.t_kelvin, c.photon.clone()))
            .collect(),
    )
    .expect("sweep grid is rectangular by construction");
    let current_map = build_phase_map(
        cells
            .iter()
            .map(|c| (c.bias_v, c.t_kelvin, c.current.clone()))
            .collect(),
    )
    .expect("sweep grid is rectangular by construction");

    SweepResult {
        photon_map,
        current_map,
        cells,
        failed_cells,
    }
}

/// Write the full file set of one simulated cell: per-signal trace CSVs,
/// the optional count trace and a metrics JSON document.
pub fn write_simulation(dir: &std::path::Path, res: &CellResult) -> Result<(), crate::io::IoError> {
    use crate::io::{json_document, write_json, write_trace};
    std::fs::create_dir_all(dir).map_err(|source| crate::io::IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    write_trace(
        &dir.join("electron_density.csv"),
        &res.electron_density,
        "n",
    )?;
    write_trace(
        &dir.join("occupied_fraction.csv"),
        &res.occupied_fraction,
        "f",
    )?;
    write_trace(&dir.join("field.csv"), &res.field, "field")?;
    write_trace(&dir.join("current.csv"), &res.current_density, "current")?;
    write_trace(
        &dir.join("photon_rate.csv"),
        &res.photon_rate,
        "photon_rate",
    )?;
    if let Some(counts) = &res.counts {
        if let Some(rate) = counts.to_rate_trace() {
            let trace = crate::trace::TimeTrace {
                unit: crate::trace::Unit::Counts,
                samples: counts.counts.iter().map(|&c| c as f64).collect(),
                ..rate
            };
            write_trace(&dir.join("counts.csv"), &trace, "counts")?;
        }
    }
    let doc = json_document(
        "oscillation_metrics",
        &serde_json::json!({
            "photon": res.metrics_photon,
            "current": res.metrics_current,
        }),
    );
    write_json(&dir.join("metrics.json"), &doc)
}

/// Write the sweep file set: per-cell metrics JSON, strength and class
/// matrices for both observables, and a summary document.
pub fn write_sweep(
    dir: &std::path::Path,
    sweep: &SweepResult,
    cfg: &RunConfig,
) -> Result<(), crate::io::IoError> {
    use crate::analysis::max_frequency_vs_temperature;
    use crate::io::{json_document, matrix_to_csv, strength_matrix_csv, write_json};

    std::fs::create_dir_all(dir).map_err(|source| crate::io::IoError::File {
        path: dir.display().to_string(),
        source,
    })?;

    let cells_doc = json_document("sweep_cells", &sweep.cells);
    write_json(&dir.join("cells.json"), &cells_doc)?;

    let write = |name: &str, text: String| -> Result<(), crate::io::IoError> {
        std::fs::write(dir.join(name), text).map_err(|source| crate::io::IoError::File {
            path: dir.join(name).display().to_string(),
            source,
        })
    };

    for (map, strength_name, class_name) in [
        (&sweep.photon_map, "strength.csv", "class.csv"),
        (
            &sweep.current_map,
            "current_strength.csv",
            "current_class.csv",
        ),
    ] {
        write(
            strength_name,
            strength_matrix_csv(&map.voltages, &map.temperatures, &map.strength_matrix()),
        )?;
        write(
            class_name,
            matrix_to_csv(&map.voltages, &map.temperatures, &map.class_matrix()),
        )?;
    }

    let summary = json_document(
        "sweep_summary",
        &serde_json::json!({
            "master_seed": cfg.master_seed,
            "voltages": sweep.photon_map.voltages,
            "temperatures": sweep.photon_map.temperatures,
            "failed_cells": sweep.failed_cells,
            "total_cells": sweep.total_cells(),
            "coverage": sweep.photon_map.coverage(),
            "stable_box_photon": sweep.photon_map.stable_bounding_box(),
            "stable_box_current": sweep.current_map.stable_bounding_box(),
            "max_strength_photon": sweep.photon_map.max_strength_cell(),
            "max_frequency_vs_temperature":
                max_frequency_vs_temperature(&sweep.photon_map),
        }),
    );
    write_json(&dir.join("summary.json"), &summary)
}
