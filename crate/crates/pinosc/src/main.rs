//! Command-line interface.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 solver failure,
//! 4 partial sweep (more than 10% of cells failed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pinosc::analysis::{fit_biexponential, fit_damped_cosine};
use pinosc::carrier::{drift_current_density, field_from_bias, ionized_donor_fraction, mobility};
use pinosc::config::{parse_config, serialize_config, RunConfig};
use pinosc::dynamics::{hopf_boundary, IntegratorError};
use pinosc::io::{json_document, read_trace, write_json};
use pinosc::protocols::iv_sweep;
use pinosc::sweep::{run_cell, run_sweep, write_simulation, write_sweep, CellError};

#[derive(Parser)]
#[command(
    name = "pinosc",
    about = "Generation-recombination oscillation simulator for cryogenic P-I-N diodes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the cryogenic carrier arithmetic chain (ionized fractions,
    /// field, drift flux) as a table.
    Estimate {
        /// Configuration file (defaults to the built-in reference config).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate one (bias, temperature) cell and write its traces/metrics.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Forward / DC bias (V).
        #[arg(long)]
        bias: f64,
        /// Temperature (K).
        #[arg(long)]
        temperature: f64,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured (V, T) sweep and write phase-map files.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread count override (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze trace CSV files with the configured analysis chain.
    Analyze {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace CSV files (the single-signal contract).
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Trace the oscillation-onset boundary in the (V, T) plane.
    Hopf {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quasi-static IV sweep with optional burst noise.
    Iv {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reference default configuration document.
    GenConfig {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::reference()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?;
            parse_config(&text).map_err(|e| config_error(e.to_string()))
        }
    }
}

fn out_dir(cfg: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_directory))
}

fn io_err(e: pinosc::io::IoError) -> CliError {
    config_error(e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate { config } => {
            let cfg = load_config(&config)?;
            print_estimate(&cfg);
            Ok(())
        }

        Command::Simulate {
            config,
            bias,
            temperature,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if !(temperature > 0.0) {
                return Err(config_error(format!(
                    "temperature must be > 0 K, got {temperature}"
                )));
            }
            let dir = out_dir(&cfg, &out);
            match run_cell(&cfg, bias, temperature, cfg.master_seed) {
                Ok(res) => {
                    write_simulation(&dir, &res).map_err(io_err)?;
                    println!(
                        "photon: {} (f0 = {:.4e} Hz, A/gamma = {:.4e})",
                        res.metrics_photon.phase_class.code(),
                        res.metrics_photon.peak_frequency,
                        res.metrics_photon.strength
                    );
                    println!(
                        "current: {} (f0 = {:.4e} Hz, A/gamma = {:.4e})",
                        res.metrics_current.phase_class.code(),
                        res.metrics_current.peak_frequency,
                        res.metrics_current.strength
                    );
                    println!("wrote traces to {}", dir.display());
                    Ok(())
                }
                Err(CellError::Integrator(err @ IntegratorError::StiffnessFailure { .. })) => {
                    // Write the partial traces, flagged, then report the
                    // solver failure.
                    if let Some(partial) = err.partial_output() {
                        let _ = std::fs::create_dir_all(&dir);
                        let _ = pinosc::io::write_trace(
                            &dir.join("electron_density.csv"),
                            &partial.electron_density,
                            "n",
                        );
                        let _ = pinosc::io::write_trace(
                            &dir.join("current.csv"),
                            &partial.current_density,
                            "current",
                        );
                        let doc = json_document(
                            "simulation_failure",
                            &serde_json::json!({ "failed": true, "error": err.to_string() }),
                        );
                        let _ = write_json(&dir.join("metrics.json"), &doc);
                    }
                    Err(CliError {
                        code: EXIT_SOLVER,
                        message: err.to_string(),
                    })
                }
                Err(e) => Err(CliError {
                    code: EXIT_SOLVER,
                    message: e.to_string(),
                }),
            }
        }

        Command::Sweep {
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(w) = workers {
                cfg.worker_count = w;
            }
            let dir = out_dir(&cfg, &out);
            let sweep = run_sweep(&cfg);
            write_sweep(&dir, &sweep, &cfg).map_err(io_err)?;
            if let Some(bb) = sweep.photon_map.stable_bounding_box() {
                println!(
                    "stable island: V [{:.3}, {:.3}] x T [{:.2}, {:.2}]",
                    bb.v_min, bb.v_max, bb.t_min, bb.t_max
                );
            } else {
                println!("no stable island found");
            }
            println!(
                "{} cells, {} failed; files in {}",
                sweep.total_cells(),
                sweep.failed_cells,
                dir.display()
            );
            if sweep.acceptable() {
                Ok(())
            } else {
                Err(CliError {
                    code: EXIT_PARTIAL,
                    message: format!(
                        "{} of {} cells failed",
                        sweep.failed_cells,
                        sweep.total_cells()
                    ),
                })
            }
        }

        Command::Analyze {
            config,
            out,
            traces,
        } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(&cfg, &out);
            std::fs::create_dir_all(&dir)
                .map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
            for path in traces {
                let (trace, _name) = read_trace(&path).map_err(io_err)?;
                let metrics = pinosc::analysis::analyze_trace(&trace, &cfg.analysis);
                println!(
                    "{}: {} (f0 = {:.4e} Hz, A = {:.4e}, gamma = {:.4e}, A/gamma = {:.4e})",
                    path.display(),
                    metrics.phase_class.code(),
                    metrics.peak_frequency,
                    metrics.amplitude,
                    metrics.linewidth,
                    metrics.strength
                );
                // Companion time-domain fits, reported when applicable.
                let span = trace.span();
                if metrics.peak_frequency > 0.0 && span * metrics.peak_frequency >= 3.0 {
                    if let Ok(fit) = fit_damped_cosine(&trace, metrics.peak_frequency) {
                        if fit.no_damping {
                            println!("  damped-cosine: f = {:.4e} Hz, undamped", fit.frequency);
                        } else {
                            println!(
                                "  damped-cosine: f = {:.4e} Hz, tau_d = {:.4e} s",
                                fit.frequency, fit.decay_time
                            );
                        }
                    }
                }
                if let Ok(fit) = fit_biexponential(&trace) {
                    println!(
                        "  biexponential: tau_fast = {:.4e} s, tau_slow = {:.4e} s{}",
                        fit.tau_fast,
                        fit.tau_slow,
                        if fit.single { " (single)" } else { "" }
                    );
                }
                let stem = path.file_stem().map(|s| s.to_string_lossy().to_string());
                let out_name = format!("{}_metrics.json", stem.unwrap_or_else(|| "trace".into()));
                write_json(
                    &dir.join(out_name),
                    &json_document("oscillation_metrics", &metrics),
                )
                .map_err(io_err)?;
            }
            Ok(())
        }

        Command::Hopf { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(&cfg, &out);
            std::fs::create_dir_all(&dir)
                .map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
            let p = cfg.gr_params();
            let points = hopf_boundary(
                (cfg.sweep.v_start, cfg.sweep.v_stop),
                (cfg.sweep.t_start, cfg.sweep.t_stop),
                &p,
                cfg.hopf.v_steps,
                cfg.hopf.t_steps,
            );
            let mut csv = String::from("# columns: bias_v,t_kelvin,max_re_1_s,frequency_hz,hopf\n");
            for pt in &points {
                csv.push_str(&format!(
                    "{:.9e},{:.9e},{:.9e},{},{}\n",
                    pt.bias_v,
                    pt.t_kelvin,
                    pt.max_re,
                    pt.frequency_hz
                        .map_or("nan".to_string(), |f| format!("{f:.9e}")),
                    pt.hopf
                ));
            }
            std::fs::write(dir.join("hopf_boundary.csv"), csv)
                .map_err(|e| config_error(format!("write: {e}")))?;
            write_json(
                &dir.join("hopf_boundary.json"),
                &json_document("hopf_boundary", &points),
            )
            .map_err(io_err)?;
            println!(
                "{} boundary points ({} Hopf-type); files in {}",
                points.len(),
                points.iter().filter(|p| p.hopf).count(),
                dir.display()
            );
            Ok(())
        }

        Command::Iv { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let dir = out_dir(&cfg, &out);
            std::fs::create_dir_all(&dir)
                .map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
            let biases: Vec<f64> = (0..cfg.iv.count)
                .map(|i| {
                    if cfg.iv.count == 1 {
                        cfg.iv.v_start
                    } else {
                        cfg.iv.v_start
                            + (cfg.iv.v_stop - cfg.iv.v_start) * i as f64
                                / (cfg.iv.count - 1) as f64
                    }
                })
                .collect();
            let p = cfg.gr_params();
            let curve = iv_sweep(
                &biases,
                cfg.iv.temperature,
                &p,
                cfg.iv.settle_time,
                cfg.iv.burst_noise.as_ref(),
                cfg.master_seed,
            )
            .map_err(|e| CliError {
                code: EXIT_SOLVER,
                message: e.to_string(),
            })?;
            let mut csv = String::from("# columns: bias_v,current_a\n");
            for pt in &curve.points {
                csv.push_str(&format!("{:.9e},{:.9e}\n", pt.bias_v, pt.current_a));
            }
            std::fs::write(dir.join("iv.csv"), csv)
                .map_err(|e| config_error(format!("write: {e}")))?;
            println!(
                "{} IV points; files in {}",
                curve.points.len(),
                dir.display()
            );
            Ok(())
        }

        Command::GenConfig { out } => {
            let text = serialize_config(&RunConfig::reference());
            match out {
                None => print!("{text}"),
                Some(p) => std::fs::write(&p, text)
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?,
            }
            Ok(())
        }
    }
}

fn print_estimate(cfg: &RunConfig) {
    let m = &cfg.material;
    let d = &cfg.device;
    let e = &cfg.estimate;

    println!("cryogenic carrier estimate chain");
    println!("--------------------------------");
    println!(
        "donor level E_d = {:.4} eV, acceptor level E_a = {:.4} eV",
        m.donor_energy, m.acceptor_energy
    );
    println!();
    println!(
        "{:>10} {:>14} {:>14} {:>14} {:>14}",
        "T (K)", "f_ion(donor)", "N_d+ (cm^-3)", "f_ion(acc)", "N_a- (cm^-3)"
    );
    for &t in &e.temperatures {
        let fd = ionized_donor_fraction(m.donor_energy, t).unwrap_or(f64::NAN);
        let fa = ionized_donor_fraction(m.acceptor_energy, t).unwrap_or(f64::NAN);
        println!(
            "{:>10.2} {:>14.4e} {:>14.4e} {:>14.4e} {:>14.4e}",
            t,
            fd,
            fd * m.donor_density,
            fa,
            fa * m.acceptor_density
        );
    }
    println!();

    let field = field_from_bias(e.bias_v, d.i_region_width).unwrap_or(f64::NAN);
    println!(
        "field: {:.4} V across W = {:.4e} cm  ->  E = {:.4e} V/cm",
        e.bias_v, d.i_region_width, field
    );

    let mu_n = mobility(e.temperatures.first().copied().unwrap_or(300.0), field, m);
    let (charge_flux, electron_flux) = drift_current_density(
        e.electron_density,
        e.hole_density,
        mu_n,
        m.hole_mobility_ref,
        field,
    );
    println!(
        "drift: mu_n = {:.4e} cm^2/Vs, n = {:.4e} cm^-3, p = {:.4e} cm^-3",
        mu_n, e.electron_density, e.hole_density
    );
    println!("  electron flux = {:.4e} electrons/cm^2/s", electron_flux);
    println!("  charge flux   = {:.4e} A/cm^2", charge_flux);
}
