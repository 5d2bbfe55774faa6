//! Target densities.

mod example1;
mod example4;
pub mod external;
mod gauss;
mod simple;

pub use example1::{ex1_log_density, ex1_log_integral, ex1_normalize, Example1Target, EX1_MODE_HIGH, EX1_MODE_LOW};
pub use example4::{ex4_f, ex4_log_likelihood, Example4Target, EX4_DATUM, EX4_DIM, EX4_SIGMA2};
pub use external::{serve_stub, ExternalEvaluator};
pub use gauss::{
    cauchy_quantile_bins, gauss13_layout, CauchyTarget, GaussMixtureTarget, GAUSS13_R_INNER, GAUSS13_R_OUTER,
    GAUSS13_SIGMA,
};
pub use simple::{DiscreteTarget, UniformTarget};
