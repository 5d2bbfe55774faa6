use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::chain::{History, ProposalKernel};
use crate::error::{Error, Result};

/// Fewest responses a fit is attempted with.
pub const SURROGATE_MIN_POINTS: usize = 10;
/// Default ridge added to the normal equations.
pub const SURROGATE_RIDGE: f64 = 1e-8;
const MAX_REJECTIONS: u64 = 1_000_000;

/// Quadratic-in-first-coordinate regression `a₀ + Σ aᵢ xᵢ + b x₁²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    /// `a₀, a₁, …, a_n`.
    pub linear: Vec<f64>,
    pub b: f64,
    pub fit_count: usize,
    pub ridge: f64,
}

impl SurrogateModel {
    pub fn dim(&self) -> usize {
        self.linear.len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut v = self.linear[0] + self.b * x[0] * x[0];
        for (a, xi) in self.linear[1..].iter().zip(x) {
            v += a * xi;
        }
        v
    }

    /// First coordinate of the stationary point along `x₁`, `−a₁ / 2b`.
    pub fn vertex(&self) -> Option<f64> {
        (self.b != 0.0).then(|| -self.linear[1] / (2.0 * self.b))
    }

    /// Constant model, used before enough data has been seen.
    pub fn constant(dim: usize, value: f64) -> Self {
        let mut linear = vec![0.0; dim + 1];
        linear[0] = value;
        Self { linear, b: 0.0, fit_count: 0, ridge: 0.0 }
    }
}

/// Running normal equations `XᵀX β = Xᵀy` for the surrogate design.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    dim: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    count: usize,
    row: Vec<f64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        let p = dim + 2;
        Self { dim, xtx: vec![0.0; p * p], xty: vec![0.0; p], count: 0, row: vec![0.0; p] }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, x: &[f64], y: f64) {
        let p = self.dim + 2;
        self.row[0] = 1.0;
        self.row[1..=self.dim].copy_from_slice(&x[..self.dim]);
        self.row[p - 1] = x[0] * x[0];
        for i in 0..p {
            let ri = self.row[i];
            self.xty[i] += ri * y;
            for j in 0..p {
                self.xtx[i * p + j] += ri * self.row[j];
            }
        }
        self.count += 1;
    }

    pub fn solve(&self, ridge: f64) -> Result<SurrogateModel> {
        if self.count < SURROGATE_MIN_POINTS {
            return Err(Error::InsufficientData { have: self.count, need: SURROGATE_MIN_POINTS });
        }
        let p = self.dim + 2;
        let mut a = DMatrix::from_row_slice(p, p, &self.xtx);
        for i in 0..p {
            a[(i, i)] += ridge;
        }
        let rhs = DVector::from_column_slice(&self.xty);
        let beta = match a.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => a.lu().solve(&rhs).ok_or(Error::SingularFit)?,
        };
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularFit);
        }
        Ok(SurrogateModel { linear: beta.as_slice()[..p - 1].to_vec(), b: beta[p - 1], fit_count: self.count, ridge })
    }
}

/// Least-squares surrogate fit to the cached simulator responses of every
/// history entry.
pub fn surrogate_fit(history: &History, ridge: f64) -> Result<SurrogateModel> {
    let first = history.entries().first().ok_or(Error::InsufficientData { have: 0, need: SURROGATE_MIN_POINTS })?;
    let mut ne = NormalEquations::new(first.state.len());
    for e in history.iter() {
        let y = e.response.ok_or(Error::MissingResponse(e.iteration_added))?;
        ne.add(&e.state, y);
    }
    ne.solve(ridge)
}

/// Independence proposal on the unit box with density proportional to
/// `exp(−(f̂(x) − d)² / (w σ²))`, refitted from the history after every
/// iteration once enough responses exist. Uniform before that.
#[derive(Debug, Clone)]
pub struct SurrogateKernel {
    dim: usize,
    datum: f64,
    sigma2: f64,
    widen: f64,
    ridge: f64,
    model: Option<SurrogateModel>,
    equations: NormalEquations,
    consumed: usize,
}

impl SurrogateKernel {
    pub fn new(dim: usize, datum: f64, sigma2: f64, widen: f64) -> Result<Self> {
        if dim == 0 || !(sigma2 > 0.0) || !(widen > 0.0) {
            return Err(Error::InvalidArgument("surrogate kernel needs dim > 0, σ² > 0 and w > 0".into()));
        }
        Ok(Self {
            dim,
            datum,
            sigma2,
            widen,
            ridge: SURROGATE_RIDGE,
            model: None,
            equations: NormalEquations::new(dim),
            consumed: 0,
        })
    }

    /// Starts from a fixed model instead of the uniform bootstrap.
    pub fn with_model(mut self, model: SurrogateModel) -> Self {
        self.model = Some(model);
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn model(&self) -> Option<&SurrogateModel> {
        self.model.as_ref()
    }

    /// `ln l̂(x)`; zero while no model exists.
    pub fn log_weight(&self, x: &[f64]) -> f64 {
        match &self.model {
            Some(m) => {
                let r = m.predict(x) - self.datum;
                -r * r / (self.widen * self.sigma2)
            }
            None => 0.0,
        }
    }

    fn in_box(x: &[f64]) -> bool {
        x.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

impl ProposalKernel for SurrogateKernel {
    fn name(&self) -> &str {
        "surrogate-adaptive"
    }

    fn is_independent(&self) -> bool {
        true
    }

    fn is_normalized(&self) -> bool {
        self.model.is_none()
    }

    fn sample(&mut self, _x_prev: &[f64], _history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim];
        for _ in 0..MAX_REJECTIONS {
            x.iter_mut().for_each(|v| *v = rng.random::<f64>());
            let lw = self.log_weight(&x);
            if lw >= 0.0 || rng.random::<f64>() < lw.exp() {
                return Ok(x);
            }
        }
        Err(Error::SurrogateDegenerate(MAX_REJECTIONS))
    }

    fn log_density(&self, point: &[f64], _x_prev: &[f64], _history: &History) -> f64 {
        if point.len() != self.dim || !Self::in_box(point) {
            return f64::NEG_INFINITY;
        }
        self.log_weight(point)
    }

    fn adapt(&mut self, history: &History) {
        if history.len() == self.consumed {
            return;
        }
        for e in &history.entries()[self.consumed..] {
            if let Some(y) = e.response {
                self.equations.add(&e.state, y);
            }
        }
        self.consumed = history.len();
        if self.equations.count() >= SURROGATE_MIN_POINTS {
            match self.equations.solve(self.ridge) {
                Ok(m) => self.model = Some(m),
                Err(e) => log::warn!("surrogate refit failed: {e}"),
            }
        }
    }

    fn stats(&self) -> Vec<(&'static str, f64)> {
        let v = self.model.as_ref().and_then(|m| m.vertex()).unwrap_or(f64::NAN);
        vec![("vertex", v)]
    }
}
