use std::collections::VecDeque;

use rand::{Rng, RngCore};

use crate::chain::{History, ProposalKernel};
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, squared_distance};
use crate::proposals::mixture::{MixtureCore, MixtureParams, TAU0};
use crate::proposals::mode_list::{ModeItem, ModeList};

/// Samples per controller window.
pub const CONTROLLER_WINDOW: u64 = 50;

/// Closed controller windows kept for [`SuppressedMixtureKernel::recent_base_fraction`].
pub const RECENT_WINDOWS: usize = 20;

/// Consecutive base-term rejections tolerated before sampling gives up.
const MAX_ENVELOPE_TRIES: usize = 1_000_000;

/// Suppression factor at `z`: for the first listed `ξ_t` (among the first
/// `n0`) within `eps2` of `z`, `max(δ, f(ξ_t)/φ₀(ξ_t))`; otherwise `c`.
///
/// `xi` items carry `log_f`; `log_base` evaluates `ln φ₀`.
pub fn rho(z: &[f64], xi: &[ModeItem], n0: usize, delta: f64, c: f64, eps2: f64, log_base: impl Fn(&[f64]) -> f64) -> f64 {
    let r2 = eps2 * eps2;
    xi.iter()
        .take(n0)
        .find(|it| squared_distance(z, &it.state) < r2)
        .map_or(c, |it| suppressed_value(it, delta, &log_base))
}

fn suppressed_value(it: &ModeItem, delta: f64, log_base: impl Fn(&[f64]) -> f64) -> f64 {
    (it.log_f - log_base(&it.state)).exp().max(delta)
}

/// Parameters of the suppression list on top of [`MixtureParams`].
#[derive(Debug, Clone)]
pub struct SuppressionParams {
    /// Cap of the ξ list (`N`).
    pub cap: usize,
    /// Number of ξ entries consulted by `ρ` (`N₀`).
    pub n0: usize,
    /// Ball radius and list spacing (`ε₂`).
    pub radius: f64,
    /// Floor of the suppression factor (`δ`).
    pub delta: f64,
    /// Exponent in the ξ score `φ₀^p / f`.
    pub power: f64,
    /// Starting value of the envelope constant `c`.
    pub c0: f64,
}

impl Default for SuppressionParams {
    fn default() -> Self {
        Self { cap: 1000, n0: 1000, radius: 0.05, delta: 0.1, power: 1.3, c0: 1.0 }
    }
}

/// Mixture proposal whose base term is damped near over-proposed low-density
/// states: `τ₀ ρ(z) φ₀(z) + Σ τ_j φ_j(z)`.
///
/// The density is unnormalized; its normalizer changes only in `adapt`.
/// Sampling is by rejection against `τ₀ c φ₀ + Σ τ_j φ_j`, valid while
/// `ρ ≤ c`. The constant `c` is steered in `adapt` so that about half the
/// proposals come from the base term.
#[derive(Debug, Clone)]
pub struct SuppressedMixtureKernel {
    core: MixtureCore,
    supp: SuppressionParams,
    xi: ModeList,
    xi_consumed: usize,
    c: f64,
    /// Unnormalized mode weights `τ_j`, summing to one when modes exist.
    tau: Vec<f64>,
    window_samples: u64,
    window_base: u64,
    total_samples: u64,
    total_base: u64,
    /// `(base, samples)` of the most recent closed controller windows.
    recent: VecDeque<(u64, u64)>,
    log_base_cache: Vec<f64>,
}

impl SuppressedMixtureKernel {
    pub fn new(mixture: MixtureParams, supp: SuppressionParams) -> Result<Self> {
        if !(supp.delta > 0.0 && supp.c0 > 0.0 && supp.radius > 0.0 && supp.power > 0.0) || supp.cap == 0 {
            return Err(Error::InvalidArgument("suppression needs positive δ, c₀, ε₂, p and cap".into()));
        }
        let core = MixtureCore::new(mixture.base, mixture.mode_shape, mixture.m0, mixture.cap, mixture.spacing);
        let xi = ModeList::new(supp.cap, supp.radius);
        let c = supp.c0;
        let mut k = Self {
            core,
            supp,
            xi,
            xi_consumed: 0,
            c,
            tau: Vec::new(),
            window_samples: 0,
            window_base: 0,
            total_samples: 0,
            total_base: 0,
            recent: VecDeque::with_capacity(RECENT_WINDOWS),
            log_base_cache: Vec::new(),
        };
        k.refresh_tau();
        Ok(k)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn modes(&self) -> &ModeList {
        &self.core.modes
    }

    pub fn suppression_list(&self) -> &ModeList {
        &self.xi
    }

    /// Fraction of all draws so far that came from the base term.
    pub fn base_fraction(&self) -> f64 {
        if self.total_samples == 0 {
            f64::NAN
        } else {
            self.total_base as f64 / self.total_samples as f64
        }
    }

    /// Fraction of base-term draws over the last [`RECENT_WINDOWS`] closed
    /// controller windows; NaN before the first window closes.
    pub fn recent_base_fraction(&self) -> f64 {
        let (b, n) = self.recent.iter().fold((0, 0), |(b, n), &(wb, wn)| (b + wb, n + wn));
        if n == 0 {
            f64::NAN
        } else {
            b as f64 / n as f64
        }
    }

    pub fn rho(&self, z: &[f64]) -> f64 {
        let r2 = self.supp.radius * self.supp.radius;
        self.xi
            .items()
            .iter()
            .take(self.supp.n0)
            .zip(&self.log_base_cache)
            .find(|(it, _)| squared_distance(z, &it.state) < r2)
            .map_or(self.c, |(it, lb)| (it.log_f - lb).exp().max(self.supp.delta))
    }

    /// Largest suppression value over the consulted ξ entries.
    fn max_rho_xi(&self) -> f64 {
        self.xi
            .items()
            .iter()
            .take(self.supp.n0)
            .zip(&self.log_base_cache)
            .map(|(it, lb)| (it.log_f - lb).exp().max(self.supp.delta))
            .fold(self.supp.delta, f64::max)
    }

    fn refresh_tau(&mut self) {
        let lf: Vec<f64> = self.core.in_use().iter().map(|i| i.log_f).collect();
        self.tau = super::mixture::mixture_weights(&lf, self.core.m0).0;
        // modes part of `core.log_weights` is reused with the (τ₀ + 1) scaling
        self.core.reweight();
    }

    /// Unnormalized log density.
    pub fn log_pdf(&self, z: &[f64]) -> f64 {
        let base = TAU0.ln() + self.rho(z).ln() + self.core.base.log_pdf(z);
        if self.tau.is_empty() {
            return base;
        }
        // core weights are τ/(τ₀ + 1); undo the common factor
        let modes = self.core.log_modes_term(z) + (TAU0 + 1.0).ln();
        log_add_exp(base, modes)
    }

    fn clamp_c(&mut self) {
        let lo = self.max_rho_xi().max(self.supp.delta);
        let hi = 1e3 * self.supp.delta;
        self.c = self.c.min(hi).max(lo);
    }

    fn absorb_xi(&mut self, history: &History) {
        let mut changed = false;
        for e in &history.entries()[self.xi_consumed..] {
            if e.log_f.is_finite() {
                let lb = self.core.base.log_pdf(&e.state);
                let score = self.supp.power * lb - e.log_f;
                let upd = self.xi.update(ModeItem { state: e.state.clone(), log_score: score, log_f: e.log_f });
                changed |= upd != crate::proposals::mode_list::Update::Unchanged;
            }
        }
        self.xi_consumed = history.len();
        if changed {
            self.log_base_cache = self.xi.items().iter().take(self.supp.n0).map(|it| self.core.base.log_pdf(&it.state)).collect();
        }
    }
}

impl ProposalKernel for SuppressedMixtureKernel {
    fn name(&self) -> &str {
        "suppressed-mixture-adaptive"
    }

    fn is_independent(&self) -> bool {
        true
    }

    fn is_normalized(&self) -> bool {
        false
    }

    fn sample(&mut self, _x_prev: &[f64], _history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let modes_total: f64 = self.tau.iter().sum();
        let base_weight = TAU0 * self.c;
        let p_base = base_weight / (base_weight + modes_total);
        for _ in 0..MAX_ENVELOPE_TRIES {
            if rng.random::<f64>() < p_base {
                let z = self.core.base.sample(rng);
                let r = self.rho(&z);
                if r > self.c {
                    log::warn!("suppression factor {r} exceeds envelope {}; raising it", self.c);
                    self.c = r;
                    return Err(Error::KernelSampling("suppression envelope violated".into()));
                }
                if rng.random::<f64>() * self.c < r {
                    self.window_base += 1;
                    self.total_base += 1;
                    self.window_samples += 1;
                    self.total_samples += 1;
                    return Ok(z);
                }
            } else {
                self.window_samples += 1;
                self.total_samples += 1;
                return Ok(self.core.sample_mode(rng));
            }
        }
        Err(Error::KernelSampling("suppressed base term rejected every draw".into()))
    }

    fn log_density(&self, point: &[f64], _x_prev: &[f64], _history: &History) -> f64 {
        self.log_pdf(point)
    }

    fn adapt(&mut self, history: &History) {
        if history.len() > self.core.consumed {
            self.core.absorb(history);
            self.refresh_tau();
        }
        if history.len() > self.xi_consumed {
            self.absorb_xi(history);
        }
        if self.window_samples >= CONTROLLER_WINDOW {
            let p_hat = self.window_base as f64 / self.window_samples as f64;
            self.c *= (0.5 * (0.5 - p_hat)).exp();
            if self.recent.len() == RECENT_WINDOWS {
                self.recent.pop_front();
            }
            self.recent.push_back((self.window_base, self.window_samples));
            self.window_samples = 0;
            self.window_base = 0;
        }
        self.clamp_c();
    }

    fn stats(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("modes", self.core.modes.len() as f64),
            ("suppressed", self.xi.len() as f64),
            ("c", self.c),
            ("base_fraction", self.base_fraction()),
            ("recent_base_fraction", self.recent_base_fraction()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::HistoryEntry;
    use crate::numeric::MvNormal;
    use crate::proposals::NormalMixtureKernel;
    use rand::SeedableRng;

    fn mixture_params() -> MixtureParams {
        MixtureParams {
            base: MvNormal::isotropic(vec![0.0, 0.0], 1.0).unwrap(),
            mode_shape: MvNormal::isotropic(vec![0.0, 0.0], 0.03f64.powi(2)).unwrap(),
            m0: 20,
            cap: 25,
            spacing: 0.05,
        }
    }

    fn xi_item(x: f64, y: f64, ratio: f64) -> ModeItem {
        let base = MvNormal::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let lb = base.log_pdf(&[x, y]);
        ModeItem { state: vec![x, y], log_score: 0.0, log_f: ratio.ln() + lb }
    }

    fn base_log(z: &[f64]) -> f64 {
        MvNormal::isotropic(vec![0.0, 0.0], 1.0).unwrap().log_pdf(z)
    }

    #[test]
    fn recent_fraction_counts_closed_windows_only() {
        let mut k = SuppressedMixtureKernel::new(mixture_params(), SuppressionParams::default()).unwrap();
        let mut rng = crate::chain::ChainRng::seed_from_u64(9);
        let h = History::new();
        assert!(k.recent_base_fraction().is_nan());
        for _ in 0..CONTROLLER_WINDOW - 1 {
            k.sample(&[0.0, 0.0], &h, &mut rng).unwrap();
            k.adapt(&h);
        }
        assert!(k.recent_base_fraction().is_nan());
        k.sample(&[0.0, 0.0], &h, &mut rng).unwrap();
        k.adapt(&h);
        // no modes yet, so every draw is from the base term
        assert_eq!(k.recent_base_fraction(), 1.0);
        for _ in 0..CONTROLLER_WINDOW * (RECENT_WINDOWS as u64 + 5) {
            k.sample(&[0.0, 0.0], &h, &mut rng).unwrap();
            k.adapt(&h);
        }
        assert_eq!(k.recent.len(), RECENT_WINDOWS);
    }

    #[test]
    fn rho_empty_list_is_c() {
        assert_eq!(rho(&[0.1, 0.2], &[], 1000, 0.1, 3.5, 0.05, base_log), 3.5);
    }

    #[test]
    fn rho_floor_at_delta() {
        let xi = [xi_item(0.3, 0.3, 0.02)];
        assert!((rho(&[0.3, 0.3], &xi, 1000, 0.1, 2.0, 0.05, base_log) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rho_takes_first_match() {
        let xi = [xi_item(0.30, 0.3, 0.4), xi_item(0.33, 0.3, 0.7)];
        let z = [0.315, 0.3];
        let naive = xi.iter().position(|it| crate::numeric::distance(&z, &it.state) < 0.05).unwrap();
        assert_eq!(naive, 0);
        assert!((rho(&z, &xi, 1000, 0.1, 2.0, 0.05, base_log) - 0.4).abs() < 1e-12);
        // only the first n0 entries are consulted
        let z = [0.37, 0.3];
        assert!((rho(&z, &xi, 2, 0.1, 2.0, 0.05, base_log) - 0.7).abs() < 1e-12);
        assert_eq!(rho(&z, &xi, 1, 0.1, 2.0, 0.05, base_log), 2.0);
    }

    fn history(points: &[([f64; 2], f64)]) -> History {
        points
            .iter()
            .map(|(s, lf)| HistoryEntry { state: s.to_vec(), log_f: *lf, response: None, iteration_added: 0 })
            .collect()
    }

    #[test]
    fn empty_suppression_list_matches_plain_mixture_with_unit_c() {
        let h = history(&[([0.5, 0.5], 2.0), ([-1.0, 0.2], 1.0)]);
        let supp = SuppressionParams { n0: 0, ..Default::default() };
        let mut q4 = SuppressedMixtureKernel::new(mixture_params(), supp).unwrap();
        let mut q3 = NormalMixtureKernel::new(mixture_params());
        q4.adapt(&h);
        q3.adapt(&h);
        assert_eq!(q4.c(), 1.0);
        // same density up to the (τ₀ + 1) normalizer
        let shift = (TAU0 + 1.0).ln();
        for z in [[0.5, 0.5], [0.0, 0.0], [-1.01, 0.19], [2.0, -2.0]] {
            assert!((q4.log_pdf(&z) - shift - q3.log_pdf(&z)).abs() < 1e-12);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 40_000;
        let near = |k: &mut dyn ProposalKernel, rng: &mut rand_chacha::ChaCha8Rng| {
            (0..n).filter(|_| crate::numeric::distance(&k.sample(&[0.0, 0.0], &h, rng).unwrap(), &[0.5, 0.5]) < 0.1).count()
        };
        let a = near(&mut q4, &mut rng) as f64 / n as f64;
        let b = near(&mut q3, &mut rng) as f64 / n as f64;
        assert!((a - b).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn suppressed_ball_scales_base_term() {
        let mut k = SuppressedMixtureKernel::new(mixture_params(), SuppressionParams { c0: 2.0, ..Default::default() }).unwrap();
        let xi = xi_item(1.0, 1.0, 0.2);
        k.xi.update(ModeItem { log_score: 5.0, ..xi.clone() });
        k.log_base_cache = vec![base_log(&xi.state)];
        let z = [1.01, 1.0];
        let expect_in = TAU0.ln() + 0.2f64.ln() + base_log(&z);
        assert!((k.log_pdf(&z) - expect_in).abs() < 1e-12);
        let far = [-1.0, -1.0];
        let expect_out = TAU0.ln() + 2.0f64.ln() + base_log(&far);
        assert!((k.log_pdf(&far) - expect_out).abs() < 1e-12);
        // ratio of base-term factors: 0.2 / 2
        assert!(((k.log_pdf(&z) - base_log(&z)) - (k.log_pdf(&far) - base_log(&far)) - 0.1f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn envelope_constant_stays_above_every_suppression_value() {
        let mut k = SuppressedMixtureKernel::new(mixture_params(), SuppressionParams::default()).unwrap();
        // small ratios: c stays within [δ, 10³δ]
        let h = history(&[([1.0, 1.0], -4.0), ([-1.0, 0.5], -40.0)]);
        k.adapt(&h);
        assert!(k.max_rho_xi() < 100.0);
        assert!(k.c() >= k.max_rho_xi() && k.c() <= 100.0);
        // f/φ₀ ≈ 930 at the origin exceeds 10³δ; the envelope bound wins
        let mut k = SuppressedMixtureKernel::new(mixture_params(), SuppressionParams::default()).unwrap();
        let h = history(&[([0.0, 0.0], 5.0), ([1.0, 1.0], -1.0), ([-1.0, 0.5], -40.0)]);
        k.adapt(&h);
        let expect = (5.0 - base_log(&[0.0, 0.0])).exp();
        assert!(expect > 100.0);
        assert!((k.c() - expect).abs() < 1e-9 * expect);
        assert_eq!(k.c(), k.max_rho_xi());
    }
}
