use rand::{Rng, RngCore};

use crate::chain::{History, ProposalKernel};
use crate::error::{Error, Result};
use crate::numeric::MvNormal;

/// Density of a non-adaptive independence proposal.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    /// Uniform on a closed axis-aligned box.
    UniformBox(Vec<(f64, f64)>),
    Normal(MvNormal),
}

/// Independence sampler proposal: same density at every iteration.
#[derive(Debug, Clone)]
pub struct FixedIndependenceKernel {
    spec: DensitySpec,
    log_volume: f64,
}

impl FixedIndependenceKernel {
    pub fn new(spec: DensitySpec) -> Result<Self> {
        let log_volume = match &spec {
            DensitySpec::UniformBox(b) => {
                if b.is_empty() || b.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(Error::InvalidArgument("uniform box needs finite low < high".into()));
                }
                b.iter().map(|(lo, hi)| (hi - lo).ln()).sum()
            }
            DensitySpec::Normal(_) => 0.0,
        };
        Ok(Self { spec, log_volume })
    }

    pub fn uniform(bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(DensitySpec::UniformBox(bounds))
    }

    pub fn normal(normal: MvNormal) -> Self {
        Self { spec: DensitySpec::Normal(normal), log_volume: 0.0 }
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn log_pdf(&self, z: &[f64]) -> f64 {
        match &self.spec {
            DensitySpec::UniformBox(b) => {
                if b.len() == z.len() && b.iter().zip(z).all(|((lo, hi), v)| lo <= v && v <= hi) {
                    -self.log_volume
                } else {
                    f64::NEG_INFINITY
                }
            }
            DensitySpec::Normal(n) => n.log_pdf(z),
        }
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match &self.spec {
            DensitySpec::UniformBox(b) => b.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect(),
            DensitySpec::Normal(n) => n.sample(rng),
        }
    }
}

impl ProposalKernel for FixedIndependenceKernel {
    fn name(&self) -> &str {
        match self.spec {
            DensitySpec::UniformBox(_) => "independent-uniform",
            DensitySpec::Normal(_) => "independent-normal",
        }
    }

    fn is_independent(&self) -> bool {
        true
    }

    fn sample(&mut self, _x_prev: &[f64], _history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(self.draw(rng))
    }

    fn log_density(&self, point: &[f64], _x_prev: &[f64], _history: &History) -> f64 {
        self.log_pdf(point)
    }
}
