//! Numerical building blocks shared by kernels, targets and diagnostics:
//! log-space arithmetic, a small multivariate normal, Gauss–Legendre
//! quadrature and seed splitting.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(exp(a) + exp(b))` without overflow; `-inf` operands are handled exactly.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(v)`; returns `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Multivariate normal with a dense covariance, stored as its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MvNormal {
    mean: Vec<f64>,
    // row-major lower triangle, dim x dim
    chol: Vec<f64>,
    diagonal: bool,
    log_norm: f64,
}

impl MvNormal {
    pub fn new(mean: Vec<f64>, cov: &[Vec<f64>]) -> Result<Self> {
        let n = mean.len();
        if n == 0 || cov.len() != n || cov.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "covariance must be {n}x{n} for a mean of length {n}"
            )));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = cov[i][j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::InvalidArgument(
                            "covariance is not positive definite".into(),
                        ));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        let diagonal = (0..n).all(|i| (0..i).all(|j| l[i * n + j] == 0.0));
        let log_det_half: f64 = (0..n).map(|i| l[i * n + i].ln()).sum();
        Ok(Self {
            mean,
            chol: l,
            diagonal,
            log_norm: -0.5 * n as f64 * LN_2PI - log_det_half,
        })
    }

    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        let n = variances.len();
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { variances[i] } else { 0.0 }).collect())
            .collect();
        Self::new(mean, &cov)
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::diagonal(mean, &vec![variance; n])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| self.l(i, k) * self.l(j, k)).sum())
                    .collect()
            })
            .collect()
    }

    /// Same covariance, different mean.
    pub fn recentered(&self, mean: &[f64]) -> Self {
        Self {
            mean: mean.to_vec(),
            ..self.clone()
        }
    }

    /// Covariance multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        let s = factor.sqrt();
        Self {
            mean: self.mean.clone(),
            chol: self.chol.iter().map(|v| v * s).collect(),
            diagonal: self.diagonal,
            log_norm: self.log_norm - 0.5 * self.dim() as f64 * factor.ln(),
        }
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.chol[i * self.dim() + j]
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis2(&self, x: &[f64]) -> f64 {
        self.mahalanobis2_from(x, &self.mean)
    }

    fn mahalanobis2_from(&self, x: &[f64], center: &[f64]) -> f64 {
        let n = self.dim();
        if self.diagonal {
            return (0..n)
                .map(|i| {
                    let y = (x[i] - center[i]) / self.l(i, i);
                    y * y
                })
                .sum();
        }
        let mut y = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if n <= 16 {
            &mut y[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = x[i] - center[i];
            for k in 0..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i);
            acc += y[i] * y[i];
        }
        acc
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis2(x)
    }

    /// Log density of the same shape centred at `center` instead of the stored mean.
    pub fn log_pdf_centered(&self, x: &[f64], center: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis2_from(x, center)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_centered(rng, &self.mean)
    }

    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R, center: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| center[i] + (0..=i).map(|k| self.l(i, k) * eps[k]).sum::<f64>())
            .collect()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule: `panels` equal panels per segment between
/// consecutive `breaks`, `order` nodes per panel.
pub fn integrate_composite<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    panels: usize,
    order: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let s: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, wt)| wt * f(mid + 0.5 * h * x))
                .sum();
            total += 0.5 * h * s;
        }
    }
    total
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Child seed for chain `index` of a run with `master` seed:
/// `splitmix64(master ^ splitmix64(index + 1))`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pearson chi-square statistic and its upper-tail p-value.
pub fn chi_square_gof(counts: &[u64], probabilities: &[f64]) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let stat: f64 = counts
        .iter()
        .zip(probabilities)
        .filter(|(_, p)| **p > 0.0)
        .map(|(c, p)| {
            let e = n * p;
            (*c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = probabilities.iter().filter(|p| **p > 0.0).count().saturating_sub(1).max(1);
    let p_value = ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(0.0);
    (stat, p_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn log_add_exp_matches_linear() {
        let v = log_add_exp(2f64.ln(), 3f64.ln());
        assert!((v - 5f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.0), 1.0);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn normal_log_pdf_at_mode() {
        let n = MvNormal::isotropic(vec![0.0], 1.0).unwrap();
        assert!((n.log_pdf(&[0.0]) + 0.5 * LN_2PI).abs() < 1e-15);
        let full = MvNormal::new(vec![0.0, 0.0], &[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        // det = 1.75; inverse = [[1, -0.5], [-0.5, 2]] / 1.75
        let x = [0.3, -0.7];
        let q = (x[0] * x[0] - x[0] * x[1] + 2.0 * x[1] * x[1]) / 1.75;
        let expected = -LN_2PI - 0.5 * 1.75f64.ln() - 0.5 * q;
        assert!((full.log_pdf(&x) - expected).abs() < 1e-14);
        let cov = full.covariance();
        assert!((cov[0][1] - 0.5).abs() < 1e-15 && (cov[0][0] - 2.0).abs() < 1e-15);
        let scaled = full.scaled(0.09);
        let expected = -LN_2PI - 0.5 * (1.75f64 * 0.09 * 0.09).ln() - 0.5 * q / 0.09;
        assert!((scaled.log_pdf(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn normal_rejects_indefinite() {
        assert!(MvNormal::new(vec![0.0, 0.0], &[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn normal_sample_moments() {
        let n = MvNormal::new(vec![1.0, -1.0], &[vec![1.0, 0.6], vec![0.6, 2.0]]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = 100_000;
        let (mut s0, mut s1, mut s01) = (0.0, 0.0, 0.0);
        for _ in 0..m {
            let x = n.sample(&mut rng);
            s0 += x[0];
            s1 += x[1];
            s01 += (x[0] - 1.0) * (x[1] + 1.0);
        }
        assert!((s0 / m as f64 - 1.0).abs() < 0.02);
        assert!((s1 / m as f64 + 1.0).abs() < 0.02);
        assert!((s01 / m as f64 - 0.6).abs() < 0.03);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m18: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((m18 - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn composite_and_adaptive_agree_on_exponential() {
        let f = |x: f64| (-2000.0 * x).exp();
        let exact = (1.0 - (-2000.0f64).exp()) / 2000.0;
        let c = integrate_composite(f, &[0.0, 1.0], 2000, 10);
        let a = integrate_adaptive(&f, 0.0, 1.0, 1e-14);
        assert!((c - exact).abs() / exact < 1e-12);
        assert!((a - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| child_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(child_seed(7, 3), child_seed(7, 3));
        assert_ne!(child_seed(7, 3), child_seed(8, 3));
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let (_, p) = chi_square_gof(&[250, 250, 250, 250], &[0.25; 4]);
        assert!(p > 0.99);
        let (_, p) = chi_square_gof(&[400, 200, 200, 200], &[0.25; 4]);
        assert!(p < 1e-6);
    }
}
