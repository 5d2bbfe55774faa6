use rand::{Rng, RngCore};

use crate::chain::{Evaluation, Support, TargetDensity};
use crate::error::{Error, Result};

/// Uniform density on an open box.
#[derive(Debug, Clone)]
pub struct UniformTarget {
    support: Support,
    log_volume: f64,
}

impl UniformTarget {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidArgument("uniform target needs finite low < high".into()));
        }
        let log_volume = bounds.iter().map(|(lo, hi)| (hi - lo).ln()).sum();
        Ok(Self { support: Support::Box(bounds), log_volume })
    }

    pub fn unit_box(dim: usize) -> Self {
        Self::new(vec![(0.0, 1.0); dim]).expect("unit box is valid")
    }
}

impl TargetDensity for UniformTarget {
    fn name(&self) -> &str {
        "uniform"
    }

    fn dim(&self) -> usize {
        self.support.bounds().map_or(0, |b| b.len())
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        Ok(if self.support.contains(x) { Evaluation::density(-self.log_volume) } else { Evaluation::outside() })
    }

    fn log_norm_const(&self) -> Option<f64> {
        Some(0.0)
    }

    fn sample_direct(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let b = self.support.bounds()?;
        Some(b.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
    }
}

/// Target on a finite set of points with given unnormalized weights.
#[derive(Debug, Clone)]
pub struct DiscreteTarget {
    support: Support,
    log_weights: Vec<f64>,
    log_total: f64,
}

impl DiscreteTarget {
    pub fn new(points: Vec<Vec<f64>>, weights: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("discrete target needs one nonnegative weight per point".into()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument("discrete target points differ in dimension".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("discrete target needs positive total weight".into()));
        }
        Ok(Self { support: Support::Finite(points), log_weights: weights.iter().map(|w| w.ln()).collect(), log_total: total.ln() })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        match &self.support {
            Support::Finite(p) => p,
            _ => unreachable!(),
        }
    }

    /// Normalized probabilities in point order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| (w - self.log_total).exp()).collect()
    }
}

impl TargetDensity for DiscreteTarget {
    fn name(&self) -> &str {
        "discrete"
    }

    fn dim(&self) -> usize {
        self.points()[0].len()
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        Ok(match self.points().iter().position(|p| p.as_slice() == x) {
            Some(i) => Evaluation::density(self.log_weights[i]),
            None => Evaluation::outside(),
        })
    }

    fn log_norm_const(&self) -> Option<f64> {
        Some(self.log_total)
    }

    fn sample_direct(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let mut u = rng.random::<f64>();
        let probs = self.probabilities();
        for (p, pt) in probs.iter().zip(self.points()) {
            if u < *p {
                return Some(pt.clone());
            }
            u -= p;
        }
        self.points().last().cloned()
    }
}
