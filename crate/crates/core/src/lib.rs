//! Adaptive independent Metropolis–Hastings sampling.
//!
//! A [`Chain`] proposes from kernels that may adapt to every state at which
//! the target has been evaluated, except the current one. With independent
//! kernels the target stays invariant given the history, and a Doeblin lower
//! bound on the proposal turns each iteration into a rejection-sampling
//! attempt whose success is detectable.
//!
//! Modules:
//! - [`chain`]: the chain itself, the kernel and target contracts.
//! - [`proposals`]: fixed, local and adaptive kernels.
//! - [`targets`]: test densities and an external-simulator client.
//! - [`diagnostics`]: binned total variation, Doeblin constants and bounds.
//! - [`harness`]: configuration, parallel ensembles, outputs and the CLI.

pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod proposals;
pub mod targets;

pub use chain::{
    acceptance_probability, detect_regeneration, log_acceptance, run_chain, Chain, ChainState, Evaluation, History,
    HistoryEntry, InitialDistribution, KernelSchedule, ProposalKernel, StepRecord, Support, TargetDensity, Trace,
};
pub use error::{Error, Result};
