use std::f64::consts::PI;

use rand::{Rng, RngCore};

use crate::chain::{Evaluation, Support, TargetDensity};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, MvNormal};

/// Default inner-mode offset from the centre.
pub const GAUSS13_R_INNER: f64 = 0.05;
/// Default radius of the outer ring.
pub const GAUSS13_R_OUTER: f64 = 1.5;
/// Default per-coordinate standard deviation of every mode.
pub const GAUSS13_SIGMA: f64 = 0.01;

/// Thirteen planar mode locations: the origin, four points at distance
/// `r_inner` on the axes, and eight points evenly spaced on the circle of
/// radius `r_outer`.
pub fn gauss13_layout(r_inner: f64, r_outer: f64) -> Vec<Vec<f64>> {
    let mut modes = vec![vec![0.0, 0.0]];
    modes.extend([[r_inner, 0.0], [0.0, r_inner], [-r_inner, 0.0], [0.0, -r_inner]].map(|p| p.to_vec()));
    for k in 0..8 {
        let t = PI * k as f64 / 4.0;
        modes.push(vec![r_outer * t.cos(), r_outer * t.sin()]);
    }
    modes
}

/// Finite mixture of multivariate normals, `Σ ω_j φ(μ_j, Σ_j)`.
#[derive(Debug, Clone)]
pub struct GaussMixtureTarget {
    components: Vec<MvNormal>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    support: Support,
}

impl GaussMixtureTarget {
    pub fn new(components: Vec<MvNormal>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidArgument("mixture needs one weight per component".into()));
        }
        let dim = components[0].dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::InvalidArgument("mixture components differ in dimension".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("mixture weights must be nonnegative and sum to 1".into()));
        }
        Ok(Self { log_weights: weights.iter().map(|w| w.ln()).collect(), weights, components, support: Support::Unbounded })
    }

    /// Equal-weight isotropic mixture at `modes` with standard deviation `sigma`.
    pub fn isotropic(modes: &[Vec<f64>], sigma: f64) -> Result<Self> {
        let comps = modes.iter().map(|m| MvNormal::isotropic(m.clone(), sigma * sigma)).collect::<Result<Vec<_>>>()?;
        let w = vec![1.0 / modes.len() as f64; modes.len()];
        Self::new(comps, w)
    }

    /// The thirteen-mode planar mixture with default layout.
    pub fn gauss13() -> Self {
        Self::isotropic(&gauss13_layout(GAUSS13_R_INNER, GAUSS13_R_OUTER), GAUSS13_SIGMA).expect("valid default layout")
    }

    pub fn components(&self) -> &[MvNormal] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0f64; 32];
        let n = self.components.len();
        if n <= buf.len() {
            for (b, (c, lw)) in buf.iter_mut().zip(self.components.iter().zip(&self.log_weights)) {
                *b = lw + c.log_pdf(x);
            }
            log_sum_exp(&buf[..n])
        } else {
            let v: Vec<f64> = self.components.iter().zip(&self.log_weights).map(|(c, lw)| lw + c.log_pdf(x)).collect();
            log_sum_exp(&v)
        }
    }
}

impl TargetDensity for GaussMixtureTarget {
    fn name(&self) -> &str {
        "gauss-mixture"
    }

    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation::density(self.log_density(x)))
    }

    fn log_norm_const(&self) -> Option<f64> {
        Some(0.0)
    }

    fn sample_direct(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let mut u: f64 = rng.random();
        for (w, c) in self.weights.iter().zip(&self.components) {
            if u < *w {
                return Some(c.sample(rng));
            }
            u -= w;
        }
        Some(self.components.last()?.sample(rng))
    }
}

/// Standard Cauchy density `1 / (π (1 + x²))`.
#[derive(Debug, Clone)]
pub struct CauchyTarget {
    support: Support,
}

impl CauchyTarget {
    pub fn new() -> Self {
        Self { support: Support::Unbounded }
    }
}

impl Default for CauchyTarget {
    fn default() -> Self {
        Self::new()
    }
}

impl TargetDensity for CauchyTarget {
    fn name(&self) -> &str {
        "cauchy"
    }

    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        if !x[0].is_finite() {
            return Ok(Evaluation::outside());
        }
        Ok(Evaluation::density(-(x[0] * x[0]).ln_1p() - PI.ln()))
    }

    fn log_norm_const(&self) -> Option<f64> {
        Some(0.0)
    }

    fn sample_direct(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(vec![(PI * (rng.random::<f64>() - 0.5)).tan()])
    }
}

/// Edges `t_k = tan(πk / 2m)`, `k = 0..=m`, splitting `|x|` of a standard
/// Cauchy variable into `m` equally likely bins; the last edge is `+inf`.
pub fn cauchy_quantile_bins(m: usize) -> Vec<f64> {
    assert!(m >= 2, "need at least two bins");
    (0..=m).map(|k| if k == m { f64::INFINITY } else { (PI * k as f64 / (2.0 * m as f64)).tan() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::distance;
    use rand::SeedableRng;

    #[test]
    fn layout_has_thirteen_distinct_points() {
        let l = gauss13_layout(0.05, 1.5);
        assert_eq!(l.len(), 13);
        for i in 0..13 {
            for j in 0..i {
                assert!(distance(&l[i], &l[j]) > 0.04);
            }
        }
    }

    #[test]
    fn layout_spacing_in_sigma_units() {
        let l = gauss13_layout(0.05, 1.5);
        let s = GAUSS13_SIGMA;
        // centre to inner mode: 5σ
        assert!((distance(&l[0], &l[1]) / s - 5.0).abs() < 1e-9);
        // neighbouring outer modes: 2 r sin(π/8) ≈ 1.148, over 100σ
        let outer_gap = distance(&l[5], &l[6]);
        assert!((outer_gap - 3.0 * (PI / 8.0).sin()).abs() < 1e-12);
        assert!(outer_gap / s > 100.0);
    }

    #[test]
    fn weights_sum_to_one() {
        let t = GaussMixtureTarget::gauss13();
        assert!((t.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_density_matches_linear_scale() {
        let t = GaussMixtureTarget::gauss13();
        let two_pi_s2 = 2.0 * PI * GAUSS13_SIGMA * GAUSS13_SIGMA;
        for x in [[0.0, 0.0], [0.01, 0.02], [0.05, 0.0], [1.5, 0.01], [0.03, 0.03], [0.7, 0.7]] {
            let naive: f64 = gauss13_layout(0.05, 1.5)
                .iter()
                .map(|m| {
                    let d2 = (x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2);
                    (1.0 / 13.0) * (-d2 / (2.0 * GAUSS13_SIGMA * GAUSS13_SIGMA)).exp() / two_pi_s2
                })
                .sum();
            if naive > 1e-300 {
                let got = t.log_density(&x).exp();
                assert!(((got - naive) / naive).abs() < 1e-10, "{x:?}");
            }
        }
    }

    #[test]
    fn cauchy_is_symmetric() {
        let t = CauchyTarget::new();
        for x in [0.1, 1.0, 37.5, 1e8] {
            assert_eq!(t.evaluate(&[x]).unwrap().log_f, t.evaluate(&[-x]).unwrap().log_f);
        }
    }

    #[test]
    fn quantile_edges() {
        assert!((cauchy_quantile_bins(2)[1] - 1.0).abs() < 1e-15);
        let e = cauchy_quantile_bins(20);
        // invert the |x| CDF (2/π) atan(t) = 1/20 by bisection
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 / PI * mid.atan() < 0.05 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((e[1] - lo).abs() < 1e-14);
        assert!((e[1] - 0.0787).abs() < 1e-4);
    }

    #[test]
    fn direct_cauchy_draws_fill_bins_evenly() {
        let t = CauchyTarget::new();
        let edges = cauchy_quantile_bins(20);
        let mut counts = vec![0u64; 20];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1_000_000 {
            let a = t.sample_direct(&mut rng).unwrap()[0].abs();
            let k = edges.partition_point(|e| *e <= a) - 1;
            counts[k.min(19)] += 1;
        }
        let (_, p) = crate::numeric::chi_square_gof(&counts, &[0.05; 20]);
        assert!(p > 1e-3, "p = {p}");
    }

    #[test]
    fn normal_over_cauchy_ratio_vanishes_in_tails() {
        let t = CauchyTarget::new();
        let q = MvNormal::isotropic(vec![0.0], 1.0).unwrap();
        let ratio = |x: f64| (q.log_pdf(&[x]) - t.evaluate(&[x]).unwrap().log_f).exp();
        let mut prev = ratio(2.0);
        for x in [4.0, 8.0, 16.0, 32.0] {
            let r = ratio(x);
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-200);
    }
}
