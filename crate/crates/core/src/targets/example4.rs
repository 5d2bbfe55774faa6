use std::f64::consts::PI;
use std::sync::Mutex;

use crate::chain::{Evaluation, Support, TargetDensity};
use crate::error::{Error, Result};
use crate::targets::external::ExternalEvaluator;

/// Default observed datum.
pub const EX4_DATUM: f64 = 2.5;
/// Default observation variance.
pub const EX4_SIGMA2: f64 = 0.005;
/// Default dimension.
pub const EX4_DIM: usize = 5;

/// Simulator response `3 sin(π x₁) − x₁/2 + Σ_{i≥2} sin(π xᵢ / 2)`.
pub fn ex4_f(x: &[f64]) -> f64 {
    let mut v = 3.0 * (PI * x[0]).sin() - 0.5 * x[0];
    for xi in &x[1..] {
        v += (0.5 * PI * xi).sin();
    }
    v
}

/// `−(f(x) − d)² / σ²` on the open unit box; `-inf` outside.
pub fn ex4_log_likelihood(x: &[f64], datum: f64, sigma2: f64) -> f64 {
    if !x.iter().all(|v| 0.0 < *v && *v < 1.0) {
        return f64::NEG_INFINITY;
    }
    let r = ex4_f(x) - datum;
    -r * r / sigma2
}

enum Response {
    Analytic,
    External(Mutex<ExternalEvaluator>),
}

/// Posterior on the unit box under a flat prior and a Gaussian likelihood of
/// one scalar simulator response. The response is reported alongside each
/// evaluation.
pub struct Example4Target {
    dim: usize,
    datum: f64,
    sigma2: f64,
    response: Response,
    support: Support,
}

impl Example4Target {
    pub fn new(dim: usize, datum: f64, sigma2: f64) -> Result<Self> {
        if dim == 0 || !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("needs dim > 0 and σ² > 0".into()));
        }
        Ok(Self { dim, datum, sigma2, response: Response::Analytic, support: Support::unit_box(dim) })
    }

    /// Obtains responses from an external simulator instead.
    pub fn with_evaluator(mut self, evaluator: ExternalEvaluator) -> Self {
        self.response = Response::External(Mutex::new(evaluator));
        self
    }

    pub fn datum(&self) -> f64 {
        self.datum
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn is_external(&self) -> bool {
        matches!(self.response, Response::External(_))
    }
}

impl Default for Example4Target {
    fn default() -> Self {
        Self::new(EX4_DIM, EX4_DATUM, EX4_SIGMA2).expect("valid defaults")
    }
}

impl TargetDensity for Example4Target {
    fn name(&self) -> &str {
        "ex4"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        if !self.support.contains(x) {
            return Ok(Evaluation::outside());
        }
        let f = match &self.response {
            Response::Analytic => ex4_f(x),
            Response::External(ev) => ev.lock().map_err(|_| Error::SimulatorDied)?.evaluate(x)?,
        };
        let r = f - self.datum;
        Ok(Evaluation { log_f: -r * r / self.sigma2, response: Some(f) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_at_corner_limits() {
        let x = [0.5, 1.0 - 1e-15, 1.0 - 1e-15, 1.0 - 1e-15, 1.0 - 1e-15];
        assert!((ex4_f(&x) - 6.75).abs() < 1e-12);
        let z = [1e-300; 5];
        assert!(ex4_f(&z).abs() < 1e-290);
    }

    #[test]
    fn likelihood_peaks_at_datum() {
        let x = [0.1, 0.2, 0.3, 0.4, 0.5];
        let d = ex4_f(&x);
        assert_eq!(ex4_log_likelihood(&x, d, 0.005), 0.0);
        assert_eq!(ex4_log_likelihood(&[1.0, 0.2, 0.3, 0.4, 0.5], d, 0.005), f64::NEG_INFINITY);
    }

    #[test]
    fn target_caches_response() {
        let t = Example4Target::default();
        let x = [0.2, 0.4, 0.6, 0.8, 0.1];
        let e = t.evaluate(&x).unwrap();
        assert_eq!(e.response, Some(ex4_f(&x)));
        assert_eq!(e.log_f, ex4_log_likelihood(&x, 2.5, 0.005));
    }
}
