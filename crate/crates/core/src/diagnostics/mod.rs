//! Convergence measures, Doeblin constants and total-variation bounds.
//!
//! Convergence is measured across an ensemble: at a fixed iteration, the
//! states of many independent chains are binned and compared with the
//! target's bin probabilities.

mod partition;

pub use partition::{
    cauchy_partition, ex1_partition, gauss13_partition, mode_shell_partition, shell_radii, BinPartition, CellRule,
    GAUSS13_SHELL_QUANTILES,
};

use rand::SeedableRng;

use crate::chain::{ChainRng, StepRecord, TargetDensity};
use crate::error::{Error, Result};
use crate::numeric::{child_seed, integrate_composite, squared_distance};

/// `Σ_j |r_j − p_j|` over the cells of `partition`, where `r_j` is the
/// fraction of `states` in cell `j`. States outside every cell count towards
/// an overflow cell whose target probability is the partition's remainder.
/// Ranges over `[0, 2]`.
pub fn tv_binned<'a, I>(states: I, partition: &BinPartition) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let counts = partition.counts(states);
    tv_from_counts(&counts, partition)
}

/// [`tv_binned`] from precomputed counts (overflow last).
pub fn tv_from_counts(counts: &[u64], partition: &BinPartition) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return f64::NAN;
    }
    let n = n as f64;
    let probs = partition.probabilities();
    let mut tv: f64 = probs.iter().zip(counts).map(|(p, c)| (*c as f64 / n - p).abs()).sum();
    tv += (counts[probs.len()] as f64 / n - partition.overflow_probability()).abs();
    tv
}

/// Approximate expected [`tv_binned`] for `n` exact draws:
/// `Σ_j √(2 p_j (1 − p_j) / (π n))`.
pub fn noise_floor_analytic(partition: &BinPartition, n: usize) -> f64 {
    let nf = n as f64;
    partition
        .probabilities()
        .iter()
        .chain(std::iter::once(&partition.overflow_probability()))
        .map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * nf)).sqrt())
        .sum()
}

/// Monte Carlo noise floor: mean [`tv_binned`] over `replicates` sets of `n`
/// exact draws from `target`.
pub fn noise_floor(target: &dyn TargetDensity, partition: &BinPartition, n: usize, replicates: usize, seed: u64) -> Result<f64> {
    if n == 0 || replicates == 0 {
        return Err(Error::InvalidArgument("noise floor needs n > 0 and replicates > 0".into()));
    }
    let mut total = 0.0;
    for r in 0..replicates {
        let mut rng = ChainRng::seed_from_u64(child_seed(seed, r as u64));
        let mut counts = vec![0u64; partition.len() + 1];
        for _ in 0..n {
            let x = target.sample_direct(&mut rng).ok_or(Error::NotSampleable)?;
            counts[partition.cell_or_overflow(&x)] += 1;
        }
        total += tv_from_counts(&counts, partition);
    }
    Ok(total / replicates as f64)
}

/// Ensemble TV measure at a series of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub iterations: Vec<u64>,
    pub tv: Vec<f64>,
    pub ensemble_size: usize,
    pub noise_floor: f64,
}

impl ConvergenceSeries {
    /// First listed iteration with `tv ≤ level`.
    pub fn first_below(&self, level: f64) -> Option<u64> {
        self.iterations.iter().zip(&self.tv).find(|(_, t)| **t <= level).map(|(i, _)| *i)
    }
}

/// Result of a Doeblin-constant search.
#[derive(Debug, Clone, PartialEq)]
pub struct DoeblinEstimate {
    /// `min q/π` over the evaluated points; zero if `q` vanishes where `π`
    /// does not.
    pub a: f64,
    /// Point attaining the minimum.
    pub argmin: Vec<f64>,
    /// Number of points evaluated.
    pub points: usize,
}

/// `min q(z)/π(z)` over `points` where `π(z) > 0`, with normalized log
/// densities. Over a grid this is an upper bound on the true infimum;
/// it is exact when the grid contains the minimizer.
pub fn doeblin_estimate<'a, I>(log_q: impl Fn(&[f64]) -> f64, log_pi: impl Fn(&[f64]) -> f64, points: I) -> DoeblinEstimate
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut best = DoeblinEstimate { a: f64::INFINITY, argmin: Vec::new(), points: 0 };
    for z in points {
        best.points += 1;
        let lp = log_pi(z);
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let r = (log_q(z) - lp).exp();
        if r < best.a {
            best.a = r;
            best.argmin = z.to_vec();
        }
    }
    best.a = best.a.min(1.0).max(0.0);
    best
}

/// Exact Doeblin constant of a one-dimensional proposal that is constant
/// between `breaks` against a continuous target whose maxima on any interval
/// lie at the interval's ends or at one of `peaks`.
pub fn doeblin_piecewise_constant(q: impl Fn(f64) -> f64, breaks: &[f64], peaks: &[f64], pi: impl Fn(f64) -> f64) -> DoeblinEstimate {
    let mut b = breaks.to_vec();
    b.sort_by(f64::total_cmp);
    b.dedup();
    let mut best = DoeblinEstimate { a: f64::INFINITY, argmin: Vec::new(), points: 0 };
    for w in b.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let qv = q(0.5 * (lo + hi));
        let candidates = [lo, hi].into_iter().chain(peaks.iter().copied().filter(|p| lo < *p && *p < hi));
        for x in candidates {
            best.points += 1;
            let p = pi(x);
            if p > 0.0 && qv / p < best.a {
                best.a = qv / p;
                best.argmin = vec![x];
            }
        }
    }
    best.a = best.a.min(1.0).max(0.0);
    best
}

/// Running bound `2 ∏_{j ≤ i} (1 − a_j)` on the total variation distance.
pub fn tv_bound(a: &[f64]) -> Result<Vec<f64>> {
    check_constants(a)?;
    let mut prod = 2.0;
    Ok(a.iter().map(|aj| {
        prod *= 1.0 - aj;
        prod
    })
    .collect())
}

/// Ensemble mean of per-chain running products, `2 E ∏ (1 − a_j(ỹ^{j−1}))`.
/// Chains may have different lengths; the mean at step `i` is over the
/// chains that reached it.
pub fn tv_bound_ensemble(per_chain: &[Vec<f64>]) -> Result<Vec<f64>> {
    let len = per_chain.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut sum = vec![0.0; len];
    let mut n = vec![0usize; len];
    for chain in per_chain {
        for (i, b) in tv_bound(chain)?.into_iter().enumerate() {
            sum[i] += b;
            n[i] += 1;
        }
    }
    Ok(sum.into_iter().zip(n).map(|(s, k)| s / k as f64).collect())
}

fn check_constants(a: &[f64]) -> Result<()> {
    match a.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::InvalidArgument(format!("Doeblin constant {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Fraction of accepted proposals among `records`.
pub fn acceptance_rate(records: &[StepRecord]) -> f64 {
    if records.is_empty() {
        return f64::NAN;
    }
    records.iter().filter(|r| r.accepted).count() as f64 / records.len() as f64
}

/// Index of the nearest of `modes` (first on ties).
pub fn nearest_mode(x: &[f64], modes: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, m) in modes.iter().enumerate() {
        let d = squared_distance(x, m);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Per-iteration mode-jump statistic and crossing count.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeJumps {
    /// For `i = 1..=n`: `i − j`, with `j` the last index `≤ i` at which the
    /// chain was nearest a different mode than at `i`, or `i` if none.
    pub statistic: Vec<u64>,
    /// Iterations `i ≥ 1` at which the nearest mode changed.
    pub crossing_iterations: Vec<u64>,
}

impl ModeJumps {
    /// Crossings at iterations after `burn_in`.
    pub fn crossings_after(&self, burn_in: u64) -> usize {
        self.crossing_iterations.iter().filter(|i| **i > burn_in).count()
    }
}

/// Mode-jump statistic for the state sequence `x_0, x_1, …, x_n`.
pub fn mode_jump_stat<'a, I>(states: I, modes: &[Vec<f64>]) -> ModeJumps
where
    I: IntoIterator<Item = &'a [f64]>,
{
    jump_stat_from_labels(states.into_iter().map(|x| nearest_mode(x, modes)))
}

/// Same statistic for arbitrary region labels.
pub fn jump_stat_from_labels(labels: impl IntoIterator<Item = usize>) -> ModeJumps {
    let mut out = ModeJumps { statistic: Vec::new(), crossing_iterations: Vec::new() };
    let mut labels = labels.into_iter();
    let Some(mut prev) = labels.next() else { return out };
    // last index at which the label differed from the current one
    let mut last_other: Option<u64> = None;
    for (k, l) in labels.enumerate() {
        let i = k as u64 + 1;
        if l != prev {
            out.crossing_iterations.push(i);
            last_other = Some(i - 1);
        }
        out.statistic.push(last_other.map_or(i, |j| i - j));
        prev = l;
    }
    out
}

/// `π̄(x*) / p̂(x*)` for one-dimensional `states`, where `p̂` is the fraction
/// of states within `h/2` of `x*` divided by `h` and `π̄` is the target's own
/// average over the same window. Both sides smooth identically, so the ratio
/// tends to one for an ensemble at equilibrium. `+inf` when no state is in
/// the window.
pub fn point_density_ratio<'a, I>(states: I, x_star: f64, h: f64, target: &dyn TargetDensity) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut n = 0usize;
    let mut inside = 0usize;
    for s in states {
        n += 1;
        if (s[0] - x_star).abs() < 0.5 * h {
            inside += 1;
        }
    }
    let log_z = target.log_norm_const().ok_or(Error::UnnormalizedTarget)?;
    let density = |x: f64| target.evaluate(&[x]).map_or(0.0, |e| (e.log_f - log_z).exp());
    let breaks = [x_star - 0.5 * h, x_star, x_star + 0.5 * h];
    let pi_bar = integrate_composite(density, &breaks, 64, 10) / h;
    if inside == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(pi_bar / (inside as f64 / (n as f64 * h)))
}

/// Default window width for [`point_density_ratio`].
pub const DENSITY_RATIO_WIDTH: f64 = 0.005;
