use rand::{Rng, RngCore};

use crate::chain::{History, ProposalKernel};
use crate::error::Result;
use crate::numeric::{log_sum_exp, MvNormal};
use crate::proposals::mode_list::{ModeItem, ModeList};

/// Weight of the broad base component before normalization.
pub const TAU0: f64 = 0.5;

/// Mode weights `τ_j = 1/(5 M₀) + c f(ν_j)`, with `c` fixed by `Σ τ_j = 1`.
///
/// `log_f` holds the cached `ln f(ν_j)` of the modes in use (`m ≤ M₀` of
/// them). Returns the weights and `τ₀`. If every `f(ν_j)` is zero the weights
/// are equal.
pub fn mixture_weights(log_f: &[f64], m0: usize) -> (Vec<f64>, f64) {
    let m = log_f.len();
    if m == 0 {
        return (Vec::new(), TAU0);
    }
    debug_assert!(m <= m0);
    let floor = 1.0 / (5.0 * m0 as f64);
    let total = log_sum_exp(log_f);
    if total == f64::NEG_INFINITY {
        return (vec![1.0 / m as f64; m], TAU0);
    }
    let spread = 1.0 - m as f64 * floor;
    let w = log_f.iter().map(|lf| floor + spread * (lf - total).exp()).collect();
    (w, TAU0)
}

/// Shared state of the normal-mixture proposals: a broad base normal plus
/// narrow normals at the leading entries of a mode list scored by
/// `R(y) = f(y) / φ_base(y)`.
#[derive(Debug, Clone)]
pub(crate) struct MixtureCore {
    pub base: MvNormal,
    pub mode_shape: MvNormal,
    pub m0: usize,
    pub modes: ModeList,
    /// ln of the normalized component probabilities; index 0 is the base.
    pub log_weights: Vec<f64>,
    pub consumed: usize,
}

impl MixtureCore {
    pub fn new(base: MvNormal, mode_shape: MvNormal, m0: usize, cap: usize, spacing: f64) -> Self {
        let mut core = Self {
            base,
            mode_shape,
            m0: m0.max(1),
            modes: ModeList::new(cap.max(1), spacing),
            log_weights: vec![0.0],
            consumed: 0,
        };
        core.reweight();
        core
    }

    pub fn in_use(&self) -> &[ModeItem] {
        let m = self.m0.min(self.modes.len());
        &self.modes.items()[..m]
    }

    pub fn log_ratio_score(&self, state: &[f64], log_f: f64) -> f64 {
        log_f - self.base.log_pdf(state)
    }

    pub fn reweight(&mut self) {
        let lf: Vec<f64> = self.in_use().iter().map(|i| i.log_f).collect();
        let (tau, tau0) = mixture_weights(&lf, self.m0);
        let total = tau0 + tau.iter().sum::<f64>();
        self.log_weights.clear();
        self.log_weights.push((tau0 / total).ln());
        self.log_weights.extend(tau.iter().map(|t| (t / total).ln()));
    }

    /// Feeds every history entry not yet seen into the mode list; returns
    /// the new entries' range start.
    pub fn absorb(&mut self, history: &History) -> usize {
        let start = self.consumed;
        for e in &history.entries()[start..] {
            if e.log_f.is_finite() {
                let s = self.log_ratio_score(&e.state, e.log_f);
                self.modes.update(ModeItem { state: e.state.clone(), log_score: s, log_f: e.log_f });
            }
        }
        self.consumed = history.len();
        start
    }

    /// Log density of the mode part only, each term weighted by its
    /// normalized component probability.
    pub fn log_modes_term(&self, z: &[f64]) -> f64 {
        let mut terms = [0.0f64; 96];
        let mut heap = Vec::new();
        let items = self.in_use();
        let buf: &mut [f64] = if items.len() <= terms.len() {
            &mut terms[..items.len()]
        } else {
            heap.resize(items.len(), 0.0);
            &mut heap
        };
        for (j, it) in items.iter().enumerate() {
            buf[j] = self.log_weights[j + 1] + self.mode_shape.log_pdf_centered(z, &it.state);
        }
        log_sum_exp(buf)
    }

    pub fn log_base_weight(&self) -> f64 {
        self.log_weights[0]
    }

    /// Probability mass of the mode components (`1 - base weight`).
    pub fn modes_mass(&self) -> f64 {
        if self.log_weights.len() == 1 {
            0.0
        } else {
            1.0 - self.log_weights[0].exp()
        }
    }

    /// Draws from mode component `j` chosen by its normalized weight.
    pub fn sample_mode(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mass = self.modes_mass();
        let mut r = rng.random::<f64>() * mass;
        let items = self.in_use();
        for (j, it) in items.iter().enumerate() {
            let w = self.log_weights[j + 1].exp();
            if r < w {
                return self.mode_shape.sample_centered(rng, &it.state);
            }
            r -= w;
        }
        self.mode_shape.sample_centered(rng, &items[items.len() - 1].state)
    }
}

/// Adaptive normal-mixture independence proposal
/// `q ∝ τ₀ φ(ν₀, Λ₀) + Σ τ_j φ(ν_j, Λ_j)`.
///
/// Component probabilities are `(τ₀, τ_1, …, τ_m) / (τ₀ + 1)`; with an empty
/// mode list the kernel is exactly the base normal.
#[derive(Debug, Clone)]
pub struct NormalMixtureKernel {
    core: MixtureCore,
}

/// Construction parameters shared by the mixture kernels.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    pub base: MvNormal,
    /// Covariance of the mode components; the mean is ignored.
    pub mode_shape: MvNormal,
    /// Number of listed modes used in the proposal (`M₀`).
    pub m0: usize,
    /// List cap (`M`).
    pub cap: usize,
    /// Minimum spacing (`ε₁`).
    pub spacing: f64,
}

impl NormalMixtureKernel {
    pub fn new(params: MixtureParams) -> Self {
        Self { core: MixtureCore::new(params.base, params.mode_shape, params.m0, params.cap, params.spacing) }
    }

    pub fn modes(&self) -> &ModeList {
        &self.core.modes
    }

    /// Normalized component probabilities, base first.
    pub fn component_weights(&self) -> Vec<f64> {
        self.core.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn log_pdf(&self, z: &[f64]) -> f64 {
        let base = self.core.log_base_weight() + self.core.base.log_pdf(z);
        if self.core.in_use().is_empty() {
            return base;
        }
        crate::numeric::log_add_exp(base, self.core.log_modes_term(z))
    }
}

impl ProposalKernel for NormalMixtureKernel {
    fn name(&self) -> &str {
        "normal-mixture-adaptive"
    }

    fn is_independent(&self) -> bool {
        true
    }

    fn sample(&mut self, _x_prev: &[f64], _history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        if rng.random::<f64>() < self.core.modes_mass() {
            Ok(self.core.sample_mode(rng))
        } else {
            Ok(self.core.base.sample(rng))
        }
    }

    fn log_density(&self, point: &[f64], _x_prev: &[f64], _history: &History) -> f64 {
        self.log_pdf(point)
    }

    fn adapt(&mut self, history: &History) {
        if history.len() > self.core.consumed {
            self.core.absorb(history);
            self.core.reweight();
        }
    }

    fn stats(&self) -> Vec<(&'static str, f64)> {
        vec![("modes", self.core.modes.len() as f64)]
    }
}
