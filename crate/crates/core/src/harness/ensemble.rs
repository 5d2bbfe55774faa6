//! Seeded parallel ensembles of independent chains.

use std::sync::Arc;

use rayon::prelude::*;

use crate::chain::{Chain, TargetDensity, DEFAULT_INIT_ATTEMPTS};
use crate::diagnostics::nearest_mode;
use crate::error::{Error, Result};
use crate::numeric::child_seed;

use super::build::{build_initial, build_schedule, build_target, target_is_per_chain};
use super::config::{ExperimentConfig, RegionSpec};

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "AIMH_THREADS";

/// One row of a chain trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub accepted: bool,
    pub alpha: f64,
    pub kernel: usize,
    pub regeneration: bool,
    pub state: Vec<f64>,
}

/// Everything kept from one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub index: usize,
    pub seed: u64,
    /// Message of the error that stopped the chain, if any.
    pub error: Option<String>,
    pub iterations: u64,
    pub accepted: u64,
    pub independent_iterations: u64,
    pub regenerations: u64,
    pub evaluations: u64,
    /// States at the snapshot iterations reached, in order.
    pub snapshots: Vec<Vec<f64>>,
    /// Region changes over the whole run and after burn-in.
    pub crossings: u64,
    pub crossings_after_burn_in: u64,
    /// Iterations since the chain was last in another region.
    pub jump_statistic: u64,
    pub trace: Vec<TraceRow>,
    /// Final `stats()` of every kernel, tagged with the kernel index.
    pub kernel_stats: Vec<(usize, &'static str, f64)>,
}

impl ChainOutcome {
    fn new(index: usize, seed: u64) -> Self {
        Self {
            index,
            seed,
            error: None,
            iterations: 0,
            accepted: 0,
            independent_iterations: 0,
            regenerations: 0,
            evaluations: 0,
            snapshots: Vec::new(),
            crossings: 0,
            crossings_after_burn_in: 0,
            jump_statistic: 0,
            trace: Vec::new(),
            kernel_stats: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iterations as f64
        }
    }
}

/// Result of [`run_ensemble`]; chains in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub snapshot_iterations: Vec<u64>,
    pub chains: Vec<ChainOutcome>,
}

impl EnsembleResult {
    /// States of the chains that reached snapshot `k`, in index order.
    pub fn states_at(&self, k: usize) -> impl Iterator<Item = &[f64]> {
        self.chains.iter().filter_map(move |c| c.snapshots.get(k).map(|s| s.as_slice()))
    }

    pub fn failed(&self) -> usize {
        self.chains.iter().filter(|c| !c.is_ok()).count()
    }
}

/// `{0} ∪ {1, 2, 4, …} ∪ extra ∪ {n}`, restricted to `[0, n]`, sorted.
pub fn snapshot_grid(n: u64, extra: &[u64], geometric: bool) -> Vec<u64> {
    let mut s = vec![0, n];
    if geometric {
        let mut i = 1u64;
        while i <= n {
            s.push(i);
            i = match i.checked_mul(2) {
                Some(v) => v,
                None => break,
            };
        }
    }
    s.extend(extra.iter().copied().filter(|&e| e <= n));
    s.sort_unstable();
    s.dedup();
    s
}

/// Resolves the worker count: explicit value, then the environment, then
/// one per core.
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize> {
    if let Some(t) = explicit {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::config(format!("{THREADS_ENV}: expected a thread count, got {v:?}"), None)),
        Err(_) => Ok(0),
    }
}

fn region_label(regions: &RegionSpec, x: &[f64]) -> usize {
    match regions {
        RegionSpec::Modes { points } => nearest_mode(x, points),
        RegionSpec::Split { coord, at } => (x[*coord] >= *at) as usize,
    }
}

/// Runs one chain of the ensemble.
pub fn run_member(config: &ExperimentConfig, shared: Option<&Arc<dyn TargetDensity>>, index: usize, snapshots: &[u64]) -> ChainOutcome {
    let seed = child_seed(config.seed, index as u64);
    let mut out = ChainOutcome::new(index, seed);
    if let Err(e) = drive(config, shared, snapshots, &mut out) {
        out.error = Some(e.to_string());
    }
    out
}

fn drive(config: &ExperimentConfig, shared: Option<&Arc<dyn TargetDensity>>, snapshots: &[u64], out: &mut ChainOutcome) -> Result<()> {
    let target = match shared {
        Some(t) => t.clone(),
        None => build_target(&config.target, true)?,
    };
    let schedule = build_schedule(config, target.as_ref())?;
    let initial = build_initial(&config.initial, &target)?;
    let mut chain = Chain::new(target.clone(), schedule, initial.as_ref(), out.seed, DEFAULT_INIT_ATTEMPTS)?;
    if let Some(a) = config.diagnostics.doeblin {
        let normalized = chain.schedule().kernels().iter().all(|k| !k.is_independent() || k.is_normalized());
        if target.log_norm_const().is_some() && normalized {
            chain = chain.with_regeneration(Box::new(move |_| a))?;
        }
    }
    let diag = &config.diagnostics;
    let trace_cap = if out.index < diag.traces { diag.trace_cap } else { 0 };
    let mut next_snap = 0;
    let record = |it: u64, x: &[f64], next: &mut usize, out: &mut ChainOutcome| {
        while *next < snapshots.len() && snapshots[*next] == it {
            out.snapshots.push(x.to_vec());
            *next += 1;
        }
    };
    record(0, &chain.state().current, &mut next_snap, out);
    let mut label = diag.regions.as_ref().map(|r| region_label(r, &chain.state().current));
    let mut last_other: Option<u64> = None;
    let result = (|| {
        for _ in 0..config.n_iterations {
            let r = chain.step()?;
            out.iterations = r.iteration;
            out.accepted += r.accepted as u64;
            out.independent_iterations += r.kernel_was_independent as u64;
            out.regenerations += r.regeneration_detected as u64;
            if let (Some(regions), Some(prev)) = (&diag.regions, label) {
                let l = region_label(regions, &r.state);
                if l != prev {
                    out.crossings += 1;
                    out.crossings_after_burn_in += (r.iteration > diag.burn_in) as u64;
                    last_other = Some(r.iteration - 1);
                }
                label = Some(l);
            }
            if r.iteration <= trace_cap {
                out.trace.push(TraceRow {
                    iteration: r.iteration,
                    accepted: r.accepted,
                    alpha: r.alpha,
                    kernel: r.kernel_index,
                    regeneration: r.regeneration_detected,
                    state: r.state.clone(),
                });
            }
            record(r.iteration, &r.state, &mut next_snap, out);
        }
        Ok::<(), Error>(())
    })();
    out.jump_statistic = match last_other {
        Some(j) => out.iterations - j,
        None => out.iterations,
    };
    out.evaluations = chain.evaluations();
    out.kernel_stats =
        chain.schedule().kernels().iter().enumerate().flat_map(|(i, k)| k.stats().into_iter().map(move |(n, v)| (i, n, v))).collect();
    result
}

/// Runs `n_chains` chains on a pool of `threads` workers (0 = one per core).
/// Chain `i` is seeded from the master seed and `i` alone, so the result
/// does not depend on the thread count.
pub fn run_ensemble(config: &ExperimentConfig, threads: usize) -> Result<EnsembleResult> {
    let snapshots = snapshot_grid(config.n_iterations, &config.diagnostics.snapshots, config.diagnostics.geometric_snapshots);
    let shared = if target_is_per_chain(&config.target) { None } else { Some(build_target(&config.target, false)?) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let chains = pool.install(|| {
        (0..config.n_chains).into_par_iter().map(|i| run_member(config, shared.as_ref(), i, &snapshots)).collect::<Vec<_>>()
    });
    Ok(EnsembleResult { snapshot_iterations: snapshots, chains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::preset;

    #[test]
    fn grid_contents() {
        assert_eq!(snapshot_grid(10, &[3, 50], true), vec![0, 1, 2, 3, 4, 8, 10]);
        assert_eq!(snapshot_grid(0, &[], true), vec![0]);
        assert_eq!(snapshot_grid(6, &[5], false), vec![0, 5, 6]);
    }

    #[test]
    fn zero_iterations_keeps_initial_states() {
        let mut c = preset("ex1").unwrap();
        c.n_chains = 4;
        c.n_iterations = 0;
        let r = run_ensemble(&c, 1).unwrap();
        assert_eq!(r.snapshot_iterations, vec![0]);
        assert_eq!(r.chains.len(), 4);
        for ch in &r.chains {
            assert_eq!(ch.snapshots.len(), 1);
            assert_eq!(ch.iterations, 0);
            assert!(ch.is_ok());
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut c = preset("ex2").unwrap();
        c.n_chains = 6;
        c.n_iterations = 40;
        let a = run_ensemble(&c, 1).unwrap();
        let b = run_ensemble(&c, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_errors_are_recorded_per_chain() {
        let mut c = preset("ex4").unwrap();
        c.n_chains = 2;
        c.n_iterations = 5;
        if let crate::harness::config::TargetSpec::Ex4 { simulator, .. } = &mut c.target {
            *simulator = Some(vec!["/nonexistent/simulator".into()]);
        }
        let r = run_ensemble(&c, 1).unwrap();
        assert_eq!(r.failed(), 2);
        assert!(r.chains.iter().all(|ch| ch.snapshots.is_empty()));
    }

    #[test]
    fn crossing_counts_follow_labels() {
        let mut c = preset("ex1").unwrap();
        c.n_chains = 1;
        c.n_iterations = 300;
        c.diagnostics.traces = 1;
        c.diagnostics.burn_in = 100;
        let r = run_ensemble(&c, 1).unwrap();
        let ch = &r.chains[0];
        let modes = vec![vec![1.0 / 3.0], vec![2.0 / 3.0]];
        let states = std::iter::once(ch.snapshots[0].as_slice()).chain(ch.trace.iter().map(|t| t.state.as_slice()));
        let j = crate::diagnostics::mode_jump_stat(states, &modes);
        assert_eq!(ch.crossings as usize, j.crossing_iterations.len());
        assert_eq!(ch.crossings_after_burn_in as usize, j.crossings_after(100));
        assert_eq!(ch.jump_statistic, *j.statistic.last().unwrap());
    }
}
