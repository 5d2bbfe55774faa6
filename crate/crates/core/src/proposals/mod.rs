//! Proposal kernels.
//!
//! Independent kernels ignore the current state and may adapt to the
//! history; state-dependent kernels never see the history grow while they
//! run.

mod doeblin;
mod fixed;
mod mixture;
mod mode_list;
mod random_walk;
mod suppressed;
mod surrogate;
mod two_mode;

pub use doeblin::{doeblin_floor, DoeblinMixture, HeavyTail};
pub use fixed::{DensitySpec, FixedIndependenceKernel};
pub use mixture::{mixture_weights, MixtureParams, NormalMixtureKernel, TAU0};
pub use mode_list::{mode_list_update, ModeItem, ModeList, Update};
pub use random_walk::RandomWalkKernel;
pub use suppressed::{rho, SuppressedMixtureKernel, SuppressionParams, CONTROLLER_WINDOW, RECENT_WINDOWS};
pub use surrogate::{
    surrogate_fit, NormalEquations, SurrogateKernel, SurrogateModel, SURROGATE_MIN_POINTS, SURROGATE_RIDGE,
};
pub use two_mode::{TwoModeKernel, Window};
