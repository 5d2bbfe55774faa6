use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::chain::{History, ProposalKernel};
use crate::error::{Error, Result};
use crate::numeric::log_add_exp;

/// Heavy-tailed component mixed into an independent proposal.
#[derive(Debug, Clone, PartialEq)]
pub enum HeavyTail {
    /// Uniform on a closed box.
    UniformBox(Vec<(f64, f64)>),
    /// Multivariate Student-t with one degree of freedom and diagonal scale.
    Cauchy { center: Vec<f64>, scales: Vec<f64> },
}

impl HeavyTail {
    pub fn log_pdf(&self, z: &[f64]) -> f64 {
        match self {
            HeavyTail::UniformBox(b) => {
                if b.len() == z.len() && b.iter().zip(z).all(|((lo, hi), v)| lo <= v && v <= hi) {
                    -b.iter().map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            }
            HeavyTail::Cauchy { center, scales } => {
                let d = center.len() as f64;
                let q: f64 = z.iter().zip(center).zip(scales).map(|((v, c), s)| ((v - c) / s).powi(2)).sum();
                let log_det: f64 = scales.iter().map(|s| s.ln()).sum();
                ln_gamma(0.5 * (1.0 + d)) - ln_gamma(0.5) - 0.5 * d * std::f64::consts::PI.ln() - log_det
                    - 0.5 * (1.0 + d) * q.ln_1p()
            }
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            HeavyTail::UniformBox(b) => b.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect(),
            HeavyTail::Cauchy { center, scales } => {
                let w: f64 = rng.sample::<f64, _>(StandardNormal).abs();
                center
                    .iter()
                    .zip(scales)
                    .map(|(c, s)| c + s * rng.sample::<f64, _>(StandardNormal) / w)
                    .collect()
            }
        }
    }
}

/// `(1 − ε) q + ε g` for an independent kernel `q` and heavy-tailed `g`.
///
/// If `g ≥ b π` everywhere, every iteration satisfies the Doeblin condition
/// with constant at least `ε b`.
pub struct DoeblinMixture {
    inner: Box<dyn ProposalKernel>,
    eps: f64,
    tail: HeavyTail,
}

impl DoeblinMixture {
    pub fn new(inner: Box<dyn ProposalKernel>, eps: f64, tail: HeavyTail) -> Result<Self> {
        if !inner.is_independent() {
            return Err(Error::InvalidArgument("Doeblin mixture needs an independent inner kernel".into()));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidArgument("mixing weight must lie in [0, 1]".into()));
        }
        Ok(Self { inner, eps, tail })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn tail(&self) -> &HeavyTail {
        &self.tail
    }

    pub fn inner(&self) -> &dyn ProposalKernel {
        self.inner.as_ref()
    }
}

/// Doeblin constant guaranteed by the tail alone: `ε · inf g/π`.
pub fn doeblin_floor(eps: f64, inf_g_over_pi: f64) -> f64 {
    (eps * inf_g_over_pi).clamp(0.0, 1.0)
}

impl ProposalKernel for DoeblinMixture {
    fn name(&self) -> &str {
        "doeblin-mixture"
    }

    fn is_independent(&self) -> bool {
        true
    }

    fn is_normalized(&self) -> bool {
        self.eps == 1.0 || self.inner.is_normalized()
    }

    fn sample(&mut self, x_prev: &[f64], history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        if self.eps > 0.0 && rng.random::<f64>() < self.eps {
            Ok(self.tail.sample(rng))
        } else {
            self.inner.sample(x_prev, history, rng)
        }
    }

    fn log_density(&self, point: &[f64], x_prev: &[f64], history: &History) -> f64 {
        if self.eps == 0.0 {
            return self.inner.log_density(point, x_prev, history);
        }
        if self.eps == 1.0 {
            return self.tail.log_pdf(point);
        }
        log_add_exp(
            (1.0 - self.eps).ln() + self.inner.log_density(point, x_prev, history),
            self.eps.ln() + self.tail.log_pdf(point),
        )
    }

    fn adapt(&mut self, history: &History) {
        self.inner.adapt(history);
    }

    fn stats(&self) -> Vec<(&'static str, f64)> {
        self.inner.stats()
    }
}
