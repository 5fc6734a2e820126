//! `thermo`: command-line driver for the thermo-core experiments.
//!
//! Exit codes: 0 when every check passes, 2 when a numerical check fails,
//! 1 on usage or I/O errors. `THERMO_CAPACITY` overrides the table-size cap.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use thermo_core::coupling::{cesaro_joining, coupling_kernel, dbar_upper_bounds, simulate_pair, z_chain, AgreementLevel, DbarBounds, SimulationReport};
use thermo_core::dbar::{dbar_sandwich, g_blocks};
use thermo_core::experiment::{run, ExperimentConfig, SweepReport};
use thermo_core::io::TableDoc;
use thermo_core::pressure::{gurevich_pressure, spr_classify, PressureEstimate, RecurrenceReport};
use thermo_core::rpf::{normalize_to_g, normalized_potential_gap, rpf_eigendata_default, EigenData, PotentialGapReport};
use thermo_core::potential::HolderMetricReport;
use thermo_core::{g_measure, holder_distance, Error, GFunction, Potential};

#[derive(Parser)]
#[command(name = "thermo", version, about = "Pressure, RPF eigendata, g-measures, couplings and d-bar bounds")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gurevich pressure estimate and recurrence classification.
    Pressure {
        #[arg(long, alias = "phi")]
        potential: PathBuf,
        #[arg(long, default_value_t = 0)]
        state: usize,
        #[arg(long, default_value_t = 16)]
        nmax: usize,
    },
    /// RPF eigendata and the normalized g-function.
    Rpf {
        #[arg(long, alias = "phi")]
        potential: PathBuf,
        #[arg(long, default_value_t = 0)]
        depth: usize,
    },
    /// Cylinder masses of the g-measure.
    Gmeasure {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        depth: usize,
        /// Also write the block distribution as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Distance between normalized potentials.
    Ggap {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        tau: PathBuf,
        #[arg(long, default_value_t = 0)]
        depth: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
    },
    /// Coupling upper bounds for d-bar with diagnostics.
    Couple {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        /// Depth of the pair-cylinder joining.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Simulate the coupled pair for this many steps per replica.
        #[arg(long)]
        simulate: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        replicas: usize,
        /// Write the agreement-length trace of replica 0 as CSV.
        #[arg(long, requires = "simulate")]
        trace_csv: Option<PathBuf>,
    },
    /// Block-transport lower bound against the coupling upper bound.
    Dbar {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        nlist: Vec<usize>,
    },
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct PressureOut {
    #[serde(flatten)]
    estimate: PressureEstimate,
    recurrence: RecurrenceReport,
}

#[derive(Serialize)]
struct RpfOut {
    #[serde(flatten)]
    eigendata: EigenData,
    normalized: TableDoc,
    fiber_deviation: f64,
}

#[derive(Serialize)]
struct GmeasureOut {
    depth: usize,
    alphabet_size: usize,
    table: Vec<f64>,
    stationarity_defect: f64,
}

#[derive(Serialize)]
struct GgapOut {
    #[serde(flatten)]
    gap: PotentialGapReport,
    holder: HolderMetricReport,
}

#[derive(Serialize)]
struct CoupleOut {
    #[serde(flatten)]
    bounds: DbarBounds,
    kernel_row_error: f64,
    kernel_column_error: f64,
    defect_bound_excess: f64,
    kac_product: f64,
    levels: Vec<AgreementLevel>,
    joining_mismatch: f64,
    joining_iterations: usize,
    joining_residual: f64,
    simulation: Option<SimulationReport>,
}

/// Outcome of a verb: the JSON value and whether every check held.
struct Outcome {
    json: serde_json::Value,
    passed: bool,
}

impl Outcome {
    fn ok(value: impl Serialize) -> Result<Self> {
        Ok(Self {
            json: serde_json::to_value(value)?,
            passed: true,
        })
    }
}

fn potential(path: &Path) -> Result<Potential> {
    let doc = TableDoc::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(doc.potential()?)
}

fn g_function(path: &Path) -> Result<GFunction> {
    let doc = TableDoc::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(doc.g_function()?)
}

fn word_label(alphabet: usize, depth: usize, mut index: usize) -> String {
    let mut symbols = vec![0; depth];
    for s in symbols.iter_mut().rev() {
        *s = index % alphabet;
        index /= alphabet;
    }
    symbols.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Pressure { potential: path, state, nmax } => {
            let phi = potential(&path)?;
            Outcome::ok(PressureOut {
                estimate: gurevich_pressure(&phi, state, nmax)?,
                recurrence: spr_classify(&phi, state, nmax)?,
            })
        }
        Command::Rpf { potential: path, depth } => {
            let phi = potential(&path)?;
            let eig = rpf_eigendata_default(&phi, depth)?;
            let normalized = normalize_to_g(&phi, &eig)?;
            Outcome::ok(RpfOut {
                normalized: TableDoc::from_g(&normalized.g),
                fiber_deviation: normalized.fiber_deviation,
                eigendata: eig,
            })
        }
        Command::Gmeasure { g, depth, csv } => {
            let g = g_function(&g)?;
            let mu = g_measure(&g, depth)?;
            if let Some(path) = csv {
                let blocks = g_blocks(&g, depth)?;
                let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
                w.write_record(["word", "probability"])?;
                for (i, p) in blocks.probs.iter().enumerate() {
                    w.write_record([word_label(blocks.alphabet, depth, i), p.to_string()])?;
                }
                w.flush()?;
            }
            Outcome::ok(GmeasureOut {
                depth,
                alphabet_size: mu.alphabet(),
                table: mu.table().values().to_vec(),
                stationarity_defect: mu.stationarity_defect()?,
            })
        }
        Command::Ggap { phi, tau, depth, theta } => {
            let (phi, tau) = (potential(&phi)?, potential(&tau)?);
            Outcome::ok(GgapOut {
                gap: normalized_potential_gap(&phi, &tau, depth)?,
                holder: holder_distance(&phi, &tau, theta)?,
            })
        }
        Command::Couple {
            g,
            h,
            depth,
            simulate,
            seed,
            replicas,
            trace_csv,
        } => {
            let (g, h) = (g_function(&g)?, g_function(&h)?);
            let kernel = coupling_kernel(&g, &h)?;
            let (row, col) = kernel.marginal_error();
            let excess = kernel.defect_bound_excess()?;
            let chain = z_chain(&g, &h)?;
            let joining = cesaro_joining(&g, &h, depth, 100_000)?;
            let simulation = match simulate {
                Some(steps) => Some(simulate_pair(&g, &h, steps, seed, replicas, if trace_csv.is_some() { steps } else { 0 })?),
                None => None,
            };
            if let (Some(path), Some(sim)) = (&trace_csv, &simulation) {
                let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
                w.write_record(["step", "agreement"])?;
                for (t, z) in sim.trace.iter().enumerate() {
                    w.write_record([t.to_string(), z.to_string()])?;
                }
                w.flush()?;
            }
            let passed = row <= 1e-12 && col <= 1e-12 && excess <= 1e-12;
            let out = CoupleOut {
                bounds: dbar_upper_bounds(&g, &h)?,
                kernel_row_error: row,
                kernel_column_error: col,
                defect_bound_excess: excess,
                kac_product: chain.kac_product,
                levels: chain.levels,
                joining_mismatch: joining.mismatch,
                joining_iterations: joining.iterations,
                joining_residual: joining.residuals.last().copied().unwrap_or(0.0),
                simulation,
            };
            Ok(Outcome {
                json: serde_json::to_value(out)?,
                passed,
            })
        }
        Command::Dbar { g, h, nlist } => {
            let (g, h) = (g_function(&g)?, g_function(&h)?);
            Outcome::ok(dbar_sandwich(&g, &h, &nlist)?)
        }
        Command::Sweep { config, seed, csv } => {
            let mut cfg = ExperimentConfig::from_path(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let start = Instant::now();
            let report = run(&cfg)?;
            eprintln!("sweep finished in {:.3} s", start.elapsed().as_secs_f64());
            if let Some(path) = csv {
                write_rows_csv(&report, &path)?;
            }
            if let Some(path) = &cfg.output {
                std::fs::write(path, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", path.display()))?;
            }
            for failure in report.failures() {
                eprintln!("check failed [{}]: {}", failure.name, failure.detail);
            }
            Ok(Outcome {
                passed: report.passed(),
                json: serde_json::to_value(&report)?,
            })
        }
    }
}

fn write_rows_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn emit(json: &serde_json::Value, output: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(json)?;
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn is_check_failure(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|cause| matches!(cause.downcast_ref::<Error>(), Some(Error::CheckFailed { .. })))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let output = cli.output.clone();
    match execute(cli.command).and_then(|o| emit(&o.json, output.as_deref()).map(|_| o.passed)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_check_failure(&e) { 2 } else { 1 })
        }
    }
}
