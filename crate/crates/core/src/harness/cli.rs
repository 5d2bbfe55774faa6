//! Command-line interface.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use serde_json::json;

use crate::chain::{ChainRng, History, TargetDensity};
use crate::diagnostics::{doeblin_estimate, tv_bound, DoeblinEstimate};
use crate::error::{Error, Result};
use crate::numeric::child_seed;
use crate::targets::serve_stub;

use super::build::{build_partition, build_schedule, build_target};
use super::config::{parse_config, ExperimentConfig, PRESETS};
use super::ensemble::{resolve_threads, run_ensemble, snapshot_grid};
use super::output::{comparison_csv, convergence_table, emit_outputs, output_dir, partition_noise_floor, prepare_output_dir};

#[derive(Parser, Debug)]
#[command(name = "aimh", version, about = "Adaptive independent Metropolis-Hastings experiments", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its outputs.
    Run {
        /// Config file, or a preset name such as `ex1`.
        config: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run several experiments on one target and tabulate their convergence side by side.
    Compare {
        #[arg(required = true, num_args = 1..)]
        configs: Vec<String>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Doeblin estimate, bound and noise floor of a config, without running chains.
    Diagnose {
        config: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Serve the built-in example-4 response over the simulator protocol on stdin/stdout.
    StubSimulator,
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<u64>,
    /// Worker threads (0 = one per core); falls back to AIMH_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the config's full-scale ensemble size.
    #[arg(long)]
    full_scale: bool,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

/// Reads a config file, or expands a bare preset name.
fn load(arg: &str, flags: &Flags) -> Result<ExperimentConfig> {
    let path = Path::new(arg);
    let text = if !path.exists() && PRESETS.contains(&arg) {
        format!("preset = \"{arg}\"\n")
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read config {arg}: {e}"), None))?
    };
    let mut c = parse_config(&text)?;
    if flags.full_scale {
        match c.full_scale {
            Some(s) => {
                c.n_chains = s.n_chains;
                c.n_iterations = s.n_iterations;
            }
            None => log::warn!("{arg}: no full-scale size configured; keeping {} chains", c.n_chains),
        }
    }
    if let Some(s) = flags.seed {
        c.seed = s;
    }
    if let Some(n) = flags.chains {
        c.n_chains = n;
    }
    if let Some(n) = flags.iterations {
        c.n_iterations = n;
    }
    // overrides go through the same validation as the file
    parse_config(&super::config::emit_config(&c))
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::StubSimulator => {
            let stdin = std::io::stdin();
            serve_stub(stdin.lock(), std::io::stdout().lock())?;
            Ok(0)
        }
        Command::Run { config, flags } => {
            let c = load(&config, &flags)?;
            let threads = resolve_threads(flags.threads)?;
            let dir = output_dir(&c, flags.out.as_deref());
            prepare_output_dir(&dir)?;
            let result = run_ensemble(&c, threads)?;
            let files = emit_outputs(&c, &result, &dir)?;
            println!("{}: {} chains, {} iterations -> {} ({})", c.name, c.n_chains, c.n_iterations, dir.display(), files.join(", "));
            report_failures(&result.chains.iter().filter_map(|c| c.error.clone()).collect::<Vec<_>>())
        }
        Command::Compare { configs, flags } => {
            let loaded = configs.iter().map(|a| load(a, &flags)).collect::<Result<Vec<_>>>()?;
            let first = &loaded[0];
            if loaded.iter().any(|c| c.target != first.target || c.diagnostics.partition != first.diagnostics.partition) {
                return Err(Error::config("compare: every config must share the target and partition", None));
            }
            if first.diagnostics.partition.is_none() {
                return Err(Error::config("compare: a partition is required", None));
            }
            let mut names: Vec<String> = loaded.iter().map(|c| c.name.clone()).collect();
            names.sort();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::config("compare: experiment names must differ", None));
            }
            let threads = resolve_threads(flags.threads)?;
            let dir = flags.out.clone().unwrap_or_else(|| PathBuf::from("aimh-out/compare"));
            prepare_output_dir(&dir)?;
            let mut tables = Vec::new();
            let mut errors = Vec::new();
            for c in &loaded {
                let sub = dir.join(&c.name);
                prepare_output_dir(&sub)?;
                let result = run_ensemble(c, threads)?;
                emit_outputs(c, &result, &sub)?;
                errors.extend(result.chains.iter().filter_map(|ch| ch.error.clone()));
                tables.push((c.name.clone(), convergence_table(c, &result)?.expect("partition checked")));
            }
            std::fs::write(dir.join("comparison.csv"), comparison_csv(&tables))?;
            println!("compared {} -> {}", names.join(", "), dir.join("comparison.csv").display());
            report_failures(&errors)
        }
        Command::Diagnose { config, flags } => {
            let c = load(&config, &flags)?;
            let report = diagnose(&c)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(dir) = &flags.out {
                prepare_output_dir(dir)?;
                std::fs::write(dir.join("diagnose.json"), format!("{text}\n"))?;
            }
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(0)
        }
    }
}

fn report_failures(errors: &[String]) -> Result<i32> {
    if errors.is_empty() {
        return Ok(0);
    }
    eprintln!("error: {} chain(s) failed; first: {}", errors.len(), errors[0]);
    Ok(2)
}

/// Points at which `inf q/π` is searched: a midpoint grid on a box support,
/// plus exact target draws where the target is sampleable.
fn search_points(target: &dyn TargetDensity, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    if let Some(b) = target.support().bounds() {
        let per_axis = match b.len() {
            1 => 20_000,
            2 => 400,
            3 => 40,
            _ => 8,
        };
        let total = (per_axis as u64).pow(b.len() as u32).min(1 << 20);
        for k in 0..total {
            let mut rem = k;
            let x = b
                .iter()
                .map(|(lo, hi)| {
                    let i = rem % per_axis as u64;
                    rem /= per_axis as u64;
                    lo + (hi - lo) * (i as f64 + 0.5) / per_axis as f64
                })
                .collect();
            pts.push(x);
        }
    }
    let mut rng = ChainRng::seed_from_u64(seed);
    for _ in 0..20_000 {
        match target.sample_direct(&mut rng) {
            Some(x) => pts.push(x),
            None => break,
        }
    }
    pts
}

/// Doeblin constant of the first kernel before any adaptation, the bound
/// it implies at the snapshot iterations, and the noise floor.
pub fn diagnose(c: &ExperimentConfig) -> Result<serde_json::Value> {
    let target = build_target(&c.target, false)?;
    let schedule = build_schedule(c, target.as_ref())?;
    let kernel = schedule.kernel(0);
    let empty = History::new();
    let estimate: Option<DoeblinEstimate> = match target.log_norm_const() {
        Some(_) if kernel.is_independent() && kernel.is_normalized() => {
            let pts = search_points(target.as_ref(), child_seed(c.seed, u64::MAX - 1));
            let anchor = pts.first().cloned().unwrap_or_else(|| vec![0.0; target.dim()]);
            let log_pi = |x: &[f64]| target.log_pi(x).unwrap_or(f64::NEG_INFINITY);
            Some(doeblin_estimate(|z| kernel.log_density(z, &anchor, &empty), log_pi, pts.iter().map(|p| p.as_slice())))
        }
        _ => None,
    };
    let a = c.diagnostics.doeblin.or(estimate.as_ref().map(|e| e.a));
    let iterations = snapshot_grid(c.n_iterations, &c.diagnostics.snapshots, true);
    let bound = match a {
        Some(a) => {
            let per_step: Vec<f64> = (1..=c.n_iterations)
                .map(|i| if schedule.kernel(schedule.index_for(i)).is_independent() { a } else { 0.0 })
                .collect();
            let b = tv_bound(&per_step)?;
            iterations.iter().map(|&i| json!([i, if i == 0 { 2.0 } else { b[i as usize - 1] }])).collect::<Vec<_>>()
        }
        None => Vec::new(),
    };
    let floor = match &c.diagnostics.partition {
        Some(p) => Some(partition_noise_floor(c, &build_partition(p, &c.target)?, c.n_chains)?),
        None => None,
    };
    Ok(json!({
        "name": c.name,
        "doeblin_estimate": estimate.map(|e| json!({ "a": e.a, "argmin": e.argmin, "points": e.points })),
        "doeblin_used": a,
        "tv_bound": bound,
        "noise_floor": floor,
        "n_chains": c.n_chains,
    }))
}
