use std::f64::consts::LN_2;

use rand::{Rng, RngCore};

use crate::chain::{Evaluation, Support, TargetDensity};
use crate::error::{Error, Result};
use crate::numeric::{integrate_composite, log_add_exp};

/// Left mode.
pub const EX1_MODE_LOW: f64 = 1.0 / 3.0;
/// Right mode.
pub const EX1_MODE_HIGH: f64 = 2.0 / 3.0;

/// `ln f(x)` for `f(x) = 4 min{x + 2/3, 4/3 − x}^α + min{x + 1/3, 5/3 − x}^α`
/// on `(0, 1)`; `-inf` elsewhere.
pub fn ex1_log_density(x: f64, alpha: f64) -> f64 {
    if !(0.0 < x && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    let m1 = (x + 2.0 / 3.0).min(4.0 / 3.0 - x).ln();
    let m2 = (x + 1.0 / 3.0).min(5.0 / 3.0 - x).ln();
    log_add_exp(2.0 * LN_2 + alpha * m1, alpha * m2)
}

/// Breakpoints that resolve the two kinks for quadrature: the kinks plus a
/// geometric ladder around each.
fn quadrature_breaks(alpha: f64, refine: usize) -> Vec<f64> {
    let width = 1.0 / (alpha + 1.0);
    let mut b = vec![0.0, 1.0, EX1_MODE_LOW, EX1_MODE_HIGH];
    for m in [EX1_MODE_LOW, EX1_MODE_HIGH] {
        let mut h = width / 8.0 / refine as f64;
        while h < 1.0 / 3.0 {
            for p in [m - h, m + h] {
                if 0.0 < p && p < 1.0 {
                    b.push(p);
                }
            }
            h *= 2.0;
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `ln ∫₀¹ f` by composite Gauss–Legendre quadrature. `refine` scales the
/// resolution; 1 is the default.
pub fn ex1_log_integral(alpha: f64, refine: usize) -> f64 {
    let refine = refine.max(1);
    let breaks = quadrature_breaks(alpha, refine);
    // integrate f / f(1/3) to keep values in range
    let peak = ex1_log_density(EX1_MODE_LOW, alpha);
    let total = integrate_composite(|x| (ex1_log_density(x, alpha) - peak).exp(), &breaks, 2 * refine, 20);
    total.ln() + peak
}

/// Normalizing constant `c` with `π = c f`.
pub fn ex1_normalize(alpha: f64) -> f64 {
    (-ex1_log_integral(alpha, 1)).exp()
}

/// Two sharp modes at 1/3 and 2/3 on `(0, 1)`, the left one four times
/// higher.
#[derive(Debug, Clone)]
pub struct Example1Target {
    alpha: f64,
    log_norm: f64,
    support: Support,
    pieces: [(f64, f64, bool); 4],
    /// Cumulative probabilities of the four power-law pieces.
    cumulative: [f64; 4],
}

impl Example1Target {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument("exponent must be positive".into()));
        }
        let e = alpha + 1.0;
        let a = 1.0 - (2.0f64 / 3.0).powf(e);
        let b = 1.0 - (1.0f64 / 3.0).powf(e);
        // each piece is y^α on (lo, 1) with x = y − shift, or x = shift − y when reflected
        let pieces = [(2.0 / 3.0, 2.0 / 3.0, false), (1.0 / 3.0, 4.0 / 3.0, true), (1.0 / 3.0, 1.0 / 3.0, false), (2.0 / 3.0, 5.0 / 3.0, true)];
        let masses = [4.0 * a, 4.0 * b, b, a];
        let total: f64 = masses.iter().sum();
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for (c, m) in cumulative.iter_mut().zip(masses) {
            acc += m / total;
            *c = acc;
        }
        Ok(Self { alpha, log_norm: ex1_log_integral(alpha, 1), support: Support::unit_box(1), pieces, cumulative })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Normalized density `π(x)`.
    pub fn pi(&self, x: f64) -> f64 {
        (ex1_log_density(x, self.alpha) - self.log_norm).exp()
    }

    /// Exact distribution function `∫₀ˣ π`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let e = self.alpha + 1.0;
        let mut below = 0.0;
        for (k, &(lo, shift, reflected)) in self.pieces.iter().enumerate() {
            let scale = if k < 2 { 4.0 } else { 1.0 };
            let part = if reflected {
                let y = (shift - x).max(lo);
                if y >= 1.0 { 0.0 } else { 1.0 - y.powf(e) }
            } else {
                let y = (x + shift).min(1.0);
                (y.powf(e) - lo.powf(e)).max(0.0)
            };
            below += scale * part;
        }
        let total = 5.0 * (2.0 - (2.0f64 / 3.0).powf(e) - (1.0f64 / 3.0).powf(e));
        (below / total).clamp(0.0, 1.0)
    }

    /// `x` with `cdf(x) = p`, by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl TargetDensity for Example1Target {
    fn name(&self) -> &str {
        "ex1"
    }

    fn dim(&self) -> usize {
        1
    }

    fn support(&self) -> &Support {
        &self.support
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation::density(ex1_log_density(x[0], self.alpha)))
    }

    fn log_norm_const(&self) -> Option<f64> {
        Some(self.log_norm)
    }

    fn sample_direct(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let u: f64 = rng.random();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(3);
        let (lo, shift, reflected) = self.pieces[k];
        let e = self.alpha + 1.0;
        loop {
            let v: f64 = rng.random();
            let lo_e = lo.powf(e);
            let y = (lo_e + v * (1.0 - lo_e)).powf(1.0 / e);
            let x = if reflected { shift - y } else { y - shift };
            if 0.0 < x && x < 1.0 {
                return Some(vec![x]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_integral(alpha: f64) -> f64 {
        let e = alpha + 1.0;
        5.0 * (2.0 - (2.0f64 / 3.0).powf(e) - (1.0f64 / 3.0).powf(e)) / e
    }

    #[test]
    fn integral_matches_closed_form() {
        for alpha in [1.0, 30.0, 2000.0] {
            let got = ex1_log_integral(alpha, 1);
            let want = closed_form_integral(alpha).ln();
            assert!((got - want).abs() < 1e-10, "alpha {alpha}: {got} vs {want}");
        }
    }

    #[test]
    fn normalizer_is_stable_under_refinement() {
        assert!((ex1_log_integral(2000.0, 1) - ex1_log_integral(2000.0, 2)).abs() < 1e-8);
    }

    #[test]
    fn peak_ratio_is_four() {
        let r = ex1_log_density(1.0 / 3.0, 2000.0) - ex1_log_density(2.0 / 3.0, 2000.0);
        // the other term contributes (2/3 / 1)^2000 at each peak: negligible
        assert!((r - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn grid_argmax_at_modes() {
        let n = 1_000_000;
        let grid = |lo: f64, hi: f64| {
            (1..n)
                .map(|i| lo + (hi - lo) * i as f64 / n as f64)
                .max_by(|a, b| ex1_log_density(*a, 2000.0).total_cmp(&ex1_log_density(*b, 2000.0)))
                .unwrap()
        };
        assert!((grid(0.0, 0.5) - 1.0 / 3.0).abs() < 1e-6);
        assert!((grid(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let t = Example1Target::new(2000.0).unwrap();
        for x in [0.2, 1.0 / 3.0, 0.334, 0.5, 0.6667, 0.9] {
            let mut breaks = vec![0.0, x];
            for m in [EX1_MODE_LOW, EX1_MODE_HIGH] {
                if m < x {
                    breaks.push(m);
                }
            }
            breaks.sort_by(f64::total_cmp);
            let q = integrate_composite(|v| t.pi(v), &breaks, 400, 20);
            assert!((t.cdf(x) - q).abs() < 1e-9, "x = {x}: {} vs {q}", t.cdf(x));
        }
        assert!((t.cdf(t.quantile(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn mass_near_modes() {
        let t = Example1Target::new(2000.0).unwrap();
        let h = 0.0025;
        let mass = t.cdf(EX1_MODE_LOW + h) - t.cdf(EX1_MODE_LOW - h) + t.cdf(EX1_MODE_HIGH + h) - t.cdf(EX1_MODE_HIGH - h);
        assert!((mass - 0.996).abs() <= 0.003, "mass = {mass}");
    }

    #[test]
    fn outside_unit_interval() {
        assert_eq!(ex1_log_density(0.0, 2.0), f64::NEG_INFINITY);
        assert_eq!(ex1_log_density(1.2, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn direct_samples_match_density() {
        use rand::SeedableRng;
        let t = Example1Target::new(30.0).unwrap();
        let edges: Vec<f64> = (0..=25).map(|i| i as f64 / 25.0).collect();
        let probs: Vec<f64> = edges
            .windows(2)
            .map(|w| integrate_composite(|x| t.pi(x), &[w[0], w[1]], 4, 20))
            .collect();
        let mut counts = vec![0u64; 25];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100_000 {
            let x = t.sample_direct(&mut rng).unwrap()[0];
            counts[((x * 25.0) as usize).min(24)] += 1;
        }
        let (_, p) = crate::numeric::chi_square_gof(&counts, &probs);
        assert!(p > 1e-3, "p = {p}");
    }
}
