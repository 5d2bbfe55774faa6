use rand::{Rng, RngCore};

use crate::chain::{History, ProposalKernel, Support};
use crate::error::{Error, Result};
use crate::numeric::MvNormal;

#[derive(Debug, Clone)]
enum Step {
    /// Uniform window of side `length` per coordinate, clipped to `bounds`.
    Uniform { length: f64, bounds: Option<Vec<(f64, f64)>> },
    /// Normal increment with fixed covariance.
    Normal(MvNormal),
}

/// State-dependent local proposal. Never extends the history.
#[derive(Debug, Clone)]
pub struct RandomWalkKernel {
    step: Step,
}

impl RandomWalkKernel {
    /// Uniform window of length `length` around the current state. Near the
    /// edge of a box support the window is clipped and the density
    /// renormalized to the clipped window.
    pub fn uniform(length: f64, support: Support) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidArgument("random-walk step length must be positive".into()));
        }
        let bounds = support.bounds().map(|b| b.to_vec());
        Ok(Self { step: Step::Uniform { length, bounds } })
    }

    /// Normal increments with covariance `shape` (its mean is ignored).
    pub fn normal(shape: MvNormal) -> Self {
        Self { step: Step::Normal(shape) }
    }

    fn window(length: f64, bounds: Option<&[(f64, f64)]>, i: usize, center: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (center - 0.5 * length, center + 0.5 * length);
        if let Some(b) = bounds {
            lo = lo.max(b[i].0);
            hi = hi.min(b[i].1);
        }
        (lo, hi)
    }
}

impl ProposalKernel for RandomWalkKernel {
    fn name(&self) -> &str {
        match self.step {
            Step::Uniform { .. } => "random-walk-uniform",
            Step::Normal(_) => "random-walk-normal",
        }
    }

    fn is_independent(&self) -> bool {
        false
    }

    fn sample(&mut self, x_prev: &[f64], _history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        match &self.step {
            Step::Uniform { length, bounds } => Ok(x_prev
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let (lo, hi) = Self::window(*length, bounds.as_deref(), i, c);
                    lo + (hi - lo) * rng.random::<f64>()
                })
                .collect()),
            Step::Normal(n) => Ok(n.sample_centered(rng, x_prev)),
        }
    }

    fn log_density(&self, point: &[f64], x_prev: &[f64], _history: &History) -> f64 {
        match &self.step {
            Step::Uniform { length, bounds } => {
                let mut acc = 0.0;
                for (i, (&p, &c)) in point.iter().zip(x_prev).enumerate() {
                    let (lo, hi) = Self::window(*length, bounds.as_deref(), i, c);
                    if !(lo <= p && p <= hi) || hi <= lo {
                        return f64::NEG_INFINITY;
                    }
                    acc -= (hi - lo).ln();
                }
                acc
            }
            Step::Normal(n) => n.log_pdf_centered(point, x_prev),
        }
    }
}
