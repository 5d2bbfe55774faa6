//! The adaptive independent Metropolis–Hastings chain.
//!
//! A chain keeps its current state, the cached log-density at that state and
//! the proposal history: the states at which the target has been evaluated,
//! excluding the current one. Independent-proposal iterations extend the
//! history with whichever of the proposal and the previous state the chain
//! did not keep; state-dependent iterations leave it untouched.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-chain random stream.
pub type ChainRng = ChaCha8Rng;

/// Default cap on initial-state redraws.
pub const DEFAULT_INIT_ATTEMPTS: usize = 1000;

/// Domain of a target density.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// All of ℝⁿ.
    Unbounded,
    /// Open axis-aligned box, one `(low, high)` pair per coordinate.
    Box(Vec<(f64, f64)>),
    /// Finite set of points.
    Finite(Vec<Vec<f64>>),
}

impl Support {
    pub fn unit_box(dim: usize) -> Self {
        Support::Box(vec![(0.0, 1.0); dim])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Support::Unbounded => x.iter().all(|v| v.is_finite()),
            Support::Box(b) => b.len() == x.len() && b.iter().zip(x).all(|((lo, hi), v)| lo < v && v < hi),
            Support::Finite(points) => points.iter().any(|p| p.as_slice() == x),
        }
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        match self {
            Support::Box(b) => Some(b),
            _ => None,
        }
    }
}

/// Result of one target evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Log of the unnormalized density; `-inf` outside the support.
    pub log_f: f64,
    /// Simulator response behind the density, for targets built on one.
    pub response: Option<f64>,
}

impl Evaluation {
    pub fn density(log_f: f64) -> Self {
        Self { log_f, response: None }
    }

    pub fn outside() -> Self {
        Self::density(f64::NEG_INFINITY)
    }
}

/// Unnormalized target density `f = cπ`, the only view of π a chain has.
pub trait TargetDensity: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn support(&self) -> &Support;

    /// Evaluates `log f` at `x`. Fallible because some targets call out to a
    /// simulator; `x` outside the support yields `log_f = -inf`, not an error.
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;

    /// `ln ∫ f` when known analytically or computed numerically.
    fn log_norm_const(&self) -> Option<f64> {
        None
    }

    /// An exact draw from π, for targets that allow it.
    fn sample_direct(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    /// Normalized log density `ln π(x)`.
    fn log_pi(&self, x: &[f64]) -> Result<f64> {
        let z = self.log_norm_const().ok_or(Error::UnnormalizedTarget)?;
        Ok(self.evaluate(x)?.log_f - z)
    }
}

/// One element of the proposal history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub state: Vec<f64>,
    /// Cached `log f(state)`.
    pub log_f: f64,
    /// Cached simulator response at `state`, when the target has one.
    pub response: Option<f64>,
    /// Iteration whose step appended this entry.
    pub iteration_added: u64,
}

/// Ordered proposal history. Only the chain appends to it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    entries: Vec<HistoryEntry>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&HistoryEntry> {
        self.entries.last()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, HistoryEntry> {
        self.entries.iter()
    }

    /// Appends an entry. Exposed for tests and tools that build histories
    /// by hand; a running chain appends through its own step.
    pub fn push(&mut self, entry: HistoryEntry) {
        self.entries.push(entry);
    }
}

impl FromIterator<HistoryEntry> for History {
    fn from_iter<I: IntoIterator<Item = HistoryEntry>>(iter: I) -> Self {
        Self { entries: iter.into_iter().collect() }
    }
}

/// Proposal kernel `q_i(z | x_{i-1}, history)`.
///
/// Within one iteration `log_density` must describe a fixed function whose
/// (possibly unknown) normalizer does not depend on its arguments, and
/// `sample` must draw from exactly that density. When `is_independent` is
/// true neither method may read `x_prev`. `adapt` sees only the history.
pub trait ProposalKernel: Send {
    fn name(&self) -> &str;

    fn is_independent(&self) -> bool;

    /// Whether `log_density` is normalized. Unnormalized kernels are valid in
    /// the acceptance ratio but cannot drive regeneration detection.
    fn is_normalized(&self) -> bool {
        true
    }

    fn sample(&mut self, x_prev: &[f64], history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>>;

    /// `ln q(point | x_prev, history)`.
    fn log_density(&self, point: &[f64], x_prev: &[f64], history: &History) -> f64;

    /// Called after every iteration with the updated history.
    fn adapt(&mut self, _history: &History) {}

    /// Kernel-specific counters for reporting.
    fn stats(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

/// Which kernel runs at which iteration: a repeating pattern of kernel indices.
pub struct KernelSchedule {
    kernels: Vec<Box<dyn ProposalKernel>>,
    pattern: Vec<usize>,
}

impl KernelSchedule {
    pub fn single(kernel: Box<dyn ProposalKernel>) -> Self {
        Self { kernels: vec![kernel], pattern: vec![0] }
    }

    /// Runs `local` on every `every`-th iteration and `independent` otherwise.
    pub fn interleaved(independent: Box<dyn ProposalKernel>, local: Box<dyn ProposalKernel>, every: usize) -> Result<Self> {
        if every == 0 {
            return Err(Error::InvalidArgument("interleave period must be positive".into()));
        }
        let mut pattern = vec![0; every];
        pattern[every - 1] = 1;
        Ok(Self { kernels: vec![independent, local], pattern })
    }

    pub fn cycle(kernels: Vec<Box<dyn ProposalKernel>>, pattern: Vec<usize>) -> Result<Self> {
        if kernels.is_empty() || pattern.is_empty() || pattern.iter().any(|&k| k >= kernels.len()) {
            return Err(Error::InvalidArgument("schedule pattern must index existing kernels".into()));
        }
        Ok(Self { kernels, pattern })
    }

    /// Kernel index used at iteration `i` (1-based).
    pub fn index_for(&self, iteration: u64) -> usize {
        let pos = (iteration.saturating_sub(1) % self.pattern.len() as u64) as usize;
        self.pattern[pos]
    }

    pub fn kernels(&self) -> &[Box<dyn ProposalKernel>] {
        &self.kernels
    }

    pub fn kernel(&self, index: usize) -> &dyn ProposalKernel {
        self.kernels[index].as_ref()
    }
}

/// Distribution of the initial state `x_0`.
pub trait InitialDistribution: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct FixedPoint(pub Vec<f64>);

impl InitialDistribution for FixedPoint {
    fn sample(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(self.0.clone())
    }
}

/// Uniform on an axis-aligned box.
#[derive(Debug, Clone)]
pub struct UniformInit(pub Vec<(f64, f64)>);

impl InitialDistribution for UniformInit {
    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(self.0.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
    }
}

/// Exact draws from the target itself.
pub struct FromTarget(pub Arc<dyn TargetDensity>);

impl InitialDistribution for FromTarget {
    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.0.sample_direct(rng)
    }
}

impl<F> InitialDistribution for F
where
    F: Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync,
{
    fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(self(rng))
    }
}

/// Lower bound `a_i(history)` of the strong Doeblin constant, supplied by the caller.
pub type DoeblinBound = Box<dyn Fn(&History) -> f64 + Send>;

/// `x_i` together with its cached evaluation and the history.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: Vec<f64>,
    pub current_log_f: f64,
    pub current_response: Option<f64>,
    pub iteration: u64,
    pub history: History,
    pub last_regeneration: Option<u64>,
}

/// What happened in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub iteration: u64,
    pub proposal: Vec<f64>,
    pub alpha: f64,
    /// The uniform draw compared against `alpha`.
    pub u: f64,
    pub accepted: bool,
    pub kernel_index: usize,
    pub kernel_was_independent: bool,
    pub regeneration_detected: bool,
    /// `x_i` after the step.
    pub state: Vec<f64>,
}

/// Full record of one chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial: Vec<f64>,
    pub records: Vec<StepRecord>,
    pub accepted: u64,
    pub independent_iterations: u64,
    pub regenerations: u64,
    pub history_len: usize,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `x_0, x_1, …, x_n`.
    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        std::iter::once(self.initial.as_slice()).chain(self.records.iter().map(|r| r.state.as_slice()))
    }
}

/// `ln α` for the step from `x` to `z`, from cached log-densities.
///
/// `log_q_z` is `ln q(z | x, ỹ)`, `log_q_x` is `ln q(x | z, ỹ)`.
pub fn log_acceptance(log_f_z: f64, log_f_x: f64, log_q_x: f64, log_q_z: f64) -> Result<f64> {
    if log_q_z == f64::NEG_INFINITY || log_q_z.is_nan() {
        return Err(Error::ZeroProposalDensity);
    }
    if log_f_z == f64::NEG_INFINITY || log_q_x == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let ratio = (log_f_z + log_q_x) - (log_f_x + log_q_z);
    if ratio.is_nan() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(ratio.min(0.0))
}

/// Metropolis–Hastings acceptance probability of `z` from `x_prev` under the
/// kernel's density at the given history.
pub fn acceptance_probability(
    target: &dyn TargetDensity,
    kernel: &dyn ProposalKernel,
    x_prev: &[f64],
    z: &[f64],
    history: &History,
) -> Result<f64> {
    let log_f_z = if target.support().contains(z) { target.evaluate(z)?.log_f } else { f64::NEG_INFINITY };
    let log_f_x = target.evaluate(x_prev)?.log_f;
    let log_q_z = kernel.log_density(z, x_prev, history);
    let log_q_x = kernel.log_density(x_prev, z, history);
    Ok(log_acceptance(log_f_z, log_f_x, log_q_x, log_q_z)?.exp())
}

/// Rejection-coupling test: true iff `u · q(z) / π(z) ≤ a`.
///
/// `log_q_z` must be the normalized proposal log-density at `z`; when the
/// test passes, `z` is an exact draw from π and is always accepted.
pub fn detect_regeneration(u: f64, log_f_z: f64, log_q_z: f64, log_norm_const: Option<f64>, a: f64) -> Result<bool> {
    let log_norm = log_norm_const.ok_or(Error::UnnormalizedTarget)?;
    if a <= 0.0 || log_f_z == f64::NEG_INFINITY {
        return Ok(false);
    }
    if u <= 0.0 {
        return Ok(true);
    }
    let log_pi_z = log_f_z - log_norm;
    Ok(u.ln() + log_q_z - log_pi_z <= a.ln())
}

/// One adaptive independent Metropolis–Hastings chain.
pub struct Chain {
    target: Arc<dyn TargetDensity>,
    schedule: KernelSchedule,
    state: ChainState,
    rng: ChainRng,
    regeneration: Option<DoeblinBound>,
    evaluations: u64,
}

impl Chain {
    /// Draws `x_0` from `initial`, redrawing up to `max_attempts` times while it
    /// falls outside the support or has zero density. The history starts empty.
    pub fn new(
        target: Arc<dyn TargetDensity>,
        schedule: KernelSchedule,
        initial: &dyn InitialDistribution,
        seed: u64,
        max_attempts: usize,
    ) -> Result<Self> {
        let mut rng = ChainRng::seed_from_u64(seed);
        let mut evaluations = 0;
        for _ in 0..max_attempts.max(1) {
            let x0 = initial
                .sample(&mut rng)
                .ok_or_else(|| Error::InvalidArgument("initial distribution cannot be sampled".into()))?;
            if x0.len() != target.dim() || !target.support().contains(&x0) {
                continue;
            }
            let eval = target.evaluate(&x0)?;
            evaluations += 1;
            if eval.log_f.is_finite() {
                let mut chain = Self {
                    target,
                    schedule,
                    state: ChainState {
                        current: x0,
                        current_log_f: eval.log_f,
                        current_response: eval.response,
                        iteration: 0,
                        history: History::new(),
                        last_regeneration: None,
                    },
                    rng,
                    regeneration: None,
                    evaluations,
                };
                chain.adapt_all();
                return Ok(chain);
            }
        }
        Err(Error::InitialOutOfSupport { attempts: max_attempts.max(1) })
    }

    /// Enables regeneration detection with the given Doeblin lower bound.
    pub fn with_regeneration(mut self, bound: DoeblinBound) -> Result<Self> {
        if self.target.log_norm_const().is_none() {
            return Err(Error::UnnormalizedTarget);
        }
        self.regeneration = Some(bound);
        Ok(self)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn history(&self) -> &History {
        &self.state.history
    }

    pub fn schedule(&self) -> &KernelSchedule {
        &self.schedule
    }

    pub fn target(&self) -> &Arc<dyn TargetDensity> {
        &self.target
    }

    /// Number of target evaluations so far, including the initial state.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    fn adapt_all(&mut self) {
        let history = &self.state.history;
        for k in self.schedule.kernels.iter_mut() {
            k.adapt(history);
        }
    }

    /// Runs one iteration.
    pub fn step(&mut self) -> Result<StepRecord> {
        let iteration = self.state.iteration + 1;
        let k = self.schedule.index_for(iteration);
        let kernel = self.schedule.kernels[k].as_mut();
        let independent = kernel.is_independent();
        let st = &self.state;

        let z = kernel.sample(&st.current, &st.history, &mut self.rng)?;
        let eval_z = if z.len() == self.target.dim() && self.target.support().contains(&z) {
            self.evaluations += 1;
            self.target.evaluate(&z)?
        } else {
            Evaluation::outside()
        };
        let log_q_z = kernel.log_density(&z, &st.current, &st.history);
        let log_q_x = kernel.log_density(&st.current, &z, &st.history);
        let log_alpha = log_acceptance(eval_z.log_f, st.current_log_f, log_q_x, log_q_z)?;
        let alpha = log_alpha.exp();
        let u: f64 = self.rng.random();
        let accepted = u <= alpha;

        let mut regenerated = false;
        if let (Some(bound), true) = (&self.regeneration, independent) {
            if !kernel.is_normalized() {
                return Err(Error::UnnormalizedKernel);
            }
            let a = bound(&st.history);
            regenerated = detect_regeneration(u, eval_z.log_f, log_q_z, self.target.log_norm_const(), a)?;
            debug_assert!(!regenerated || accepted, "regeneration implies acceptance");
        }

        let st = &mut self.state;
        if independent {
            let entry = if accepted {
                HistoryEntry {
                    state: std::mem::take(&mut st.current),
                    log_f: st.current_log_f,
                    response: st.current_response,
                    iteration_added: iteration,
                }
            } else {
                HistoryEntry {
                    state: z.clone(),
                    log_f: eval_z.log_f,
                    response: eval_z.response,
                    iteration_added: iteration,
                }
            };
            st.history.push(entry);
        }
        if accepted {
            st.current = z.clone();
            st.current_log_f = eval_z.log_f;
            st.current_response = eval_z.response;
        }
        st.iteration = iteration;
        if regenerated {
            st.last_regeneration = Some(iteration);
        }
        let record = StepRecord {
            iteration,
            proposal: z,
            alpha,
            u,
            accepted,
            kernel_index: k,
            kernel_was_independent: independent,
            regeneration_detected: regenerated,
            state: st.current.clone(),
        };
        self.adapt_all();
        Ok(record)
    }

    /// Runs `n` iterations and records them.
    pub fn run(&mut self, n: u64) -> Result<Trace> {
        let mut trace = Trace {
            initial: self.state.current.clone(),
            records: Vec::with_capacity(n as usize),
            accepted: 0,
            independent_iterations: 0,
            regenerations: 0,
            history_len: self.state.history.len(),
        };
        for _ in 0..n {
            let r = self.step()?;
            trace.accepted += r.accepted as u64;
            trace.independent_iterations += r.kernel_was_independent as u64;
            trace.regenerations += r.regeneration_detected as u64;
            trace.records.push(r);
        }
        trace.history_len = self.state.history.len();
        Ok(trace)
    }
}

/// Builds a chain and runs it for `n_iterations`.
pub fn run_chain(
    target: Arc<dyn TargetDensity>,
    schedule: KernelSchedule,
    initial: &dyn InitialDistribution,
    n_iterations: u64,
    seed: u64,
) -> Result<Trace> {
    Chain::new(target, schedule, initial, seed, DEFAULT_INIT_ATTEMPTS)?.run(n_iterations)
}
