//! Plot-ready CSV files and the JSON run manifest.
//!
//! | file | header |
//! |------|--------|
//! | `convergence.csv` | `iteration,tv,noise_floor,tv_bound` |
//! | `acceptance.csv` | `chain,status,iterations,accepted,acceptance_rate,independent_iterations,regenerations,evaluations` |
//! | `kernel_stats.csv` | `chain,kernel,stat,value` |
//! | `mode_jumps.csv` | `chain,crossings,crossings_after_burn_in,jump_statistic` |
//! | `trace_<chain>.csv` | `iteration,accepted,alpha,kernel,regeneration,x1,…,xd` |
//! | `comparison.csv` | `iteration,<name>,…` (from `compare`) |
//!
//! Numbers are written in shortest round-trip decimal form; a missing
//! value is `NaN`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::diagnostics::{noise_floor, noise_floor_analytic, tv_binned, tv_bound, BinPartition};
use crate::error::{Error, Result};
use crate::numeric::child_seed;

use super::build::{build_partition, build_schedule, build_target};
use super::config::ExperimentConfig;
use super::ensemble::EnsembleResult;

/// Creates `dir` and checks that it accepts files.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".aimh-write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Binned total variation at each snapshot with its noise floor and bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub iterations: Vec<u64>,
    pub tv: Vec<f64>,
    pub noise_floor: f64,
    pub tv_bound: Vec<f64>,
}

/// Noise floor of the partition for `n` exact draws: simulated when the
/// target can be sampled, otherwise the multinomial approximation.
pub fn partition_noise_floor(config: &ExperimentConfig, partition: &BinPartition, n: usize) -> Result<f64> {
    let target = build_target(&config.target, false)?;
    match noise_floor(target.as_ref(), partition, n, config.diagnostics.noise_floor_replicates, child_seed(config.seed, u64::MAX)) {
        Err(Error::NotSampleable) => Ok(noise_floor_analytic(partition, n)),
        r => r,
    }
}

/// `2 (1 − a)^k` with `k` the independent iterations up to each snapshot.
fn bound_series(config: &ExperimentConfig, iterations: &[u64]) -> Result<Vec<f64>> {
    let Some(a) = config.diagnostics.doeblin else {
        return Ok(vec![f64::NAN; iterations.len()]);
    };
    let target = build_target(&config.target, false)?;
    let schedule = build_schedule(config, target.as_ref())?;
    let n = iterations.last().copied().unwrap_or(0);
    let per_step: Vec<f64> = (1..=n).map(|i| if schedule.kernel(schedule.index_for(i)).is_independent() { a } else { 0.0 }).collect();
    let b = tv_bound(&per_step)?;
    Ok(iterations.iter().map(|&i| if i == 0 { 2.0 } else { b[i as usize - 1] }).collect())
}

pub fn convergence_table(config: &ExperimentConfig, result: &EnsembleResult) -> Result<Option<ConvergenceTable>> {
    let Some(spec) = &config.diagnostics.partition else { return Ok(None) };
    let partition = build_partition(spec, &config.target)?;
    let iterations = result.snapshot_iterations.clone();
    let tv = (0..iterations.len())
        .map(|k| {
            let mut states = result.states_at(k).peekable();
            if states.peek().is_none() {
                f64::NAN
            } else {
                tv_binned(states, &partition)
            }
        })
        .collect();
    let noise_floor = partition_noise_floor(config, &partition, config.n_chains)?;
    let tv_bound = bound_series(config, &iterations)?;
    Ok(Some(ConvergenceTable { iterations, tv, noise_floor, tv_bound }))
}

fn write(dir: &Path, name: &str, body: String, files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), body)?;
    files.push(name.to_string());
    Ok(())
}

/// Writes every requested file plus `manifest.json`; returns the file names.
pub fn emit_outputs(config: &ExperimentConfig, result: &EnsembleResult, dir: &Path) -> Result<Vec<String>> {
    prepare_output_dir(dir)?;
    let diag = &config.diagnostics;
    let mut files = Vec::new();

    if let Some(t) = convergence_table(config, result)? {
        let mut s = String::from("iteration,tv,noise_floor,tv_bound\n");
        for ((i, tv), b) in t.iterations.iter().zip(&t.tv).zip(&t.tv_bound) {
            writeln!(s, "{i},{tv},{},{b}", t.noise_floor).unwrap();
        }
        write(dir, "convergence.csv", s, &mut files)?;
    }

    if diag.acceptance {
        let mut s = String::from("chain,status,iterations,accepted,acceptance_rate,independent_iterations,regenerations,evaluations\n");
        let mut k = String::from("chain,kernel,stat,value\n");
        for c in &result.chains {
            let status = if c.is_ok() { "ok" } else { "error" };
            writeln!(
                s,
                "{},{status},{},{},{},{},{},{}",
                c.index,
                c.iterations,
                c.accepted,
                c.acceptance_rate(),
                c.independent_iterations,
                c.regenerations,
                c.evaluations
            )
            .unwrap();
            for (kernel, stat, v) in &c.kernel_stats {
                writeln!(k, "{},{kernel},{stat},{v}", c.index).unwrap();
            }
        }
        write(dir, "acceptance.csv", s, &mut files)?;
        write(dir, "kernel_stats.csv", k, &mut files)?;
    }

    if diag.regions.is_some() {
        let mut s = String::from("chain,crossings,crossings_after_burn_in,jump_statistic\n");
        for c in &result.chains {
            writeln!(s, "{},{},{},{}", c.index, c.crossings, c.crossings_after_burn_in, c.jump_statistic).unwrap();
        }
        write(dir, "mode_jumps.csv", s, &mut files)?;
    }

    for c in result.chains.iter().filter(|c| !c.trace.is_empty()) {
        let dim = c.trace[0].state.len();
        let mut s = String::from("iteration,accepted,alpha,kernel,regeneration");
        for d in 1..=dim {
            write!(s, ",x{d}").unwrap();
        }
        s.push('\n');
        for r in &c.trace {
            write!(s, "{},{},{},{},{}", r.iteration, r.accepted as u8, r.alpha, r.kernel, r.regeneration as u8).unwrap();
            for v in &r.state {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        write(dir, &format!("trace_{}.csv", c.index), s, &mut files)?;
    }

    let chains: Vec<_> = result
        .chains
        .iter()
        .map(|c| match &c.error {
            None => json!({ "index": c.index, "seed": c.seed, "status": "ok", "iterations": c.iterations }),
            Some(m) => json!({ "index": c.index, "seed": c.seed, "status": "error", "iterations": c.iterations, "message": m }),
        })
        .collect();
    files.push("manifest.json".into());
    let manifest = json!({
        "name": config.name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "n_chains": config.n_chains,
        "n_iterations": config.n_iterations,
        "snapshot_iterations": result.snapshot_iterations,
        "files": files,
        "failed_chains": result.failed(),
        "config": config,
        "chains": chains,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    Ok(files)
}

/// One column per run, rows at the union of their snapshot iterations.
pub fn comparison_csv(runs: &[(String, ConvergenceTable)]) -> String {
    let mut iterations: Vec<u64> = runs.iter().flat_map(|(_, t)| t.iterations.iter().copied()).collect();
    iterations.sort_unstable();
    iterations.dedup();
    let mut s = String::from("iteration");
    for (name, _) in runs {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    for i in iterations {
        write!(s, "{i}").unwrap();
        for (_, t) in runs {
            let v = t.iterations.iter().position(|&j| j == i).map_or(f64::NAN, |k| t.tv[k]);
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Output directory: the flag when given, the config's otherwise.
pub fn output_dir(config: &ExperimentConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&config.output.dir))
}
