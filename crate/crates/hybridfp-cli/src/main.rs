//! Command-line front end: execute runs, verify problem properties, plot
//! traces, and sweep over config batches.
//!
//! Exit codes — `run`: 0 converged, 2 iteration budget exhausted, 3 solver
//! failure, 1 config or I/O error; `verify`: 4 when a property fails, else
//! as `run`; `plot`: 1 on unreadable or empty traces; `sweep`: the worst of
//! its runs' codes. Log verbosity comes from the `HYBRIDFP_LOG` environment
//! variable (`error`, `warn`, `info`, `debug`, `trace`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hybridfp::config::{load_config, OutputsConfig, RunConfig};
use hybridfp::iteration::{check_trace_invariants, run, IterationTrace, TerminalStatus};
use hybridfp::problem::{verify_problem, ProblemInstance};
use hybridfp::trace_io::{
    parse_trace_csv, read_trace_csv, summary_json, trace_to_csv, write_plot, write_summary,
    write_trace_sidecar,
};

#[derive(Parser)]
#[command(name = "hybridfp", version, about = "Hybrid projection iteration solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one run and persist its trace, sidecar, summary and plot.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the solver RNG seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory to write outputs into (file names kept from the
        /// config, with defaults for paths the config omits).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check problem properties and trace invariants on a short run.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Sample count for the property checks.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render an SVG convergence plot from a trace CSV.
    Plot {
        trace: PathBuf,
        /// Output path; defaults to the trace path with extension `.svg`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several configs concurrently, each fully isolated.
    Sweep {
        configs: Vec<PathBuf>,
        /// Worker threads; defaults to one per config.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Base directory; each config's outputs land in a subdirectory
        /// named after the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYBRIDFP_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { config, seed, out } => cmd_run(&config, seed, out.as_deref()),
        Cmd::Verify { config, samples, seed } => cmd_verify(&config, samples, seed),
        Cmd::Plot { trace, out } => cmd_plot(&trace, out),
        Cmd::Sweep { configs, jobs, seed, out } => cmd_sweep(&configs, jobs, seed, out.as_deref()),
    };
    ExitCode::from(code)
}

fn status_code(status: TerminalStatus) -> u8 {
    match status {
        TerminalStatus::Converged => 0,
        TerminalStatus::MaxIters => 2,
        TerminalStatus::InnerSolveFailed | TerminalStatus::InfeasibleLedger => 3,
    }
}

fn fail(msg: impl std::fmt::Display, code: u8) -> u8 {
    eprintln!("error: {msg}");
    code
}

/// Loads and instantiates a config, applying a seed override.
fn prepare(
    config_path: &Path,
    seed: Option<u64>,
) -> Result<(RunConfig, ProblemInstance, hybridfp::iteration::AlgorithmParams, hybridfp::solvers::SolverSettings), String> {
    let cfg = load_config(config_path).map_err(|e| e.to_string())?;
    let (instance, params, mut settings) = cfg.instantiate().map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        settings.rng_seed = s;
    }
    Ok((cfg, instance, params, settings))
}

struct ResolvedOutputs {
    trace_csv: PathBuf,
    summary: PathBuf,
    plot: Option<PathBuf>,
}

/// Output paths: with `--out`, the directory is created and configured file
/// names (or defaults) are placed inside it; without it the config must name
/// the trace and summary paths itself.
fn resolve_outputs(outputs: &OutputsConfig, out_dir: Option<&Path>) -> Result<ResolvedOutputs, String> {
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
            let file_name = |p: &Option<PathBuf>, default: &str| -> PathBuf {
                let name = p
                    .as_deref()
                    .and_then(Path::file_name)
                    .map(|n| n.to_os_string())
                    .unwrap_or_else(|| default.into());
                dir.join(name)
            };
            Ok(ResolvedOutputs {
                trace_csv: file_name(&outputs.trace_csv, "trace.csv"),
                summary: file_name(&outputs.summary, "summary.json"),
                plot: outputs
                    .plot
                    .as_ref()
                    .map(|p| file_name(&Some(p.clone()), "plot.svg")),
            })
        }
        None => {
            let trace_csv = outputs
                .trace_csv
                .clone()
                .ok_or("outputs.trace_csv is required (or pass --out)")?;
            let summary = outputs
                .summary
                .clone()
                .ok_or("outputs.summary is required (or pass --out)")?;
            Ok(ResolvedOutputs { trace_csv, summary, plot: outputs.plot.clone() })
        }
    }
}

fn write_run_outputs(
    trace: &IterationTrace,
    instance: &ProblemInstance,
    paths: &ResolvedOutputs,
) -> Result<(), String> {
    let csv = trace_to_csv(trace);
    std::fs::write(&paths.trace_csv, &csv)
        .map_err(|e| format!("cannot write trace {}: {e}", paths.trace_csv.display()))?;
    write_trace_sidecar(trace, &paths.trace_csv).map_err(|e| e.to_string())?;
    write_summary(trace, &instance.space, &paths.summary).map_err(|e| e.to_string())?;
    if let Some(plot_path) = &paths.plot {
        let table = parse_trace_csv(&csv).map_err(|e| e.to_string())?;
        write_plot(&table, plot_path).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn cmd_run(config_path: &Path, seed: Option<u64>, out_dir: Option<&Path>) -> u8 {
    let (cfg, instance, params, settings) = match prepare(config_path, seed) {
        Ok(v) => v,
        Err(e) => return fail(e, 1),
    };
    let paths = match resolve_outputs(&cfg.outputs, out_dir) {
        Ok(p) => p,
        Err(e) => return fail(e, 1),
    };
    let trace = match run(&instance, &params, &settings) {
        Ok(t) => t,
        // run() only errors on validation problems — a config-class failure.
        Err(e) => return fail(e, 1),
    };
    if let Err(e) = write_run_outputs(&trace, &instance, &paths) {
        return fail(e, 1);
    }
    let summary = summary_json(&trace, &instance.space);
    println!("{summary}");
    if let Some(f) = &trace.failure {
        eprintln!("run failed: {f}");
    }
    status_code(trace.terminal_status)
}

fn cmd_verify(config_path: &Path, samples: usize, seed: Option<u64>) -> u8 {
    let (_cfg, instance, mut params, settings) = match prepare(config_path, seed) {
        Ok(v) => v,
        Err(e) => return fail(e, 1),
    };
    let report = verify_problem(&instance, samples, seed.unwrap_or(settings.rng_seed));
    println!("problem properties:\n{report}");
    if !report.passed {
        return 4;
    }

    // Trace invariants on a short run.
    params.max_iters = params.max_iters.min(25);
    let trace = match run(&instance, &params, &settings) {
        Ok(t) => t,
        Err(e) => return fail(e, 1),
    };
    if let Some(f) = &trace.failure {
        eprintln!("verification run failed: {f}");
        return 4;
    }
    let invariants = check_trace_invariants(&trace, &instance);
    println!("trace invariants ({} iterations):\n{invariants}", trace.iterations);
    if invariants.passed {
        0
    } else {
        4
    }
}

fn cmd_plot(trace_path: &Path, out: Option<PathBuf>) -> u8 {
    let table = match read_trace_csv(trace_path) {
        Ok(t) => t,
        Err(e) => return fail(e, 1),
    };
    let out_path = out.unwrap_or_else(|| trace_path.with_extension("svg"));
    match write_plot(&table, &out_path) {
        Ok(()) => {
            println!("wrote {}", out_path.display());
            0
        }
        Err(e) => fail(e, 1),
    }
}

fn cmd_sweep(configs: &[PathBuf], jobs: Option<usize>, seed: Option<u64>, out_dir: Option<&Path>) -> u8 {
    if configs.is_empty() {
        return fail("sweep needs at least one config path", 1);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(configs.len()).max(1))
        .build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => return fail(e, 1),
    };
    let codes: Vec<(String, u8)> = pool.install(|| {
        use rayon::prelude::*;
        configs
            .par_iter()
            .map(|path| {
                let sub_dir = out_dir.map(|d| {
                    let stem = path.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "run".into());
                    d.join(stem)
                });
                let code = cmd_run(path, seed, sub_dir.as_deref());
                (path.display().to_string(), code)
            })
            .collect()
    });
    let mut worst = 0;
    for (path, code) in &codes {
        println!("{path}: exit {code}");
        worst = worst.max(*code);
    }
    worst
}
