use rand::{Rng, RngCore};

use crate::chain::{History, ProposalKernel};
use crate::error::{Error, Result};

/// Adaptive one-dimensional independence proposal: uniform on the interval
/// plus a local window around the best state seen so far on each side of a
/// split point. Each window carries mass `p`; the rest is uniform.
#[derive(Debug, Clone)]
pub struct TwoModeKernel {
    p: f64,
    length: f64,
    split: f64,
    lo: f64,
    hi: f64,
    // (state, log f) of the best entry left and right of the split
    best: [Option<(f64, f64)>; 2],
    consumed: usize,
    windows: Vec<Window>,
    uniform_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl TwoModeKernel {
    pub fn new(p: f64, length: f64, split: f64, bounds: (f64, f64)) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::InvalidArgument("two-mode kernel needs 0 < p < 0.5".into()));
        }
        if !(length > 0.0 && length < hi - lo) || !(lo < split && split < hi) {
            return Err(Error::InvalidArgument("two-mode kernel needs 0 < L < width and split inside the interval".into()));
        }
        Ok(Self { p, length, split, lo, hi, best: [None, None], consumed: 0, windows: Vec::new(), uniform_mass: 1.0 })
    }

    /// Current best guesses for the two modes.
    pub fn centers(&self) -> [Option<f64>; 2] {
        [self.best[0].map(|b| b.0), self.best[1].map(|b| b.0)]
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn uniform_mass(&self) -> f64 {
        self.uniform_mass
    }

    /// Smallest value the density takes on the interval.
    pub fn density_floor(&self) -> f64 {
        self.uniform_mass / (self.hi - self.lo)
    }

    fn clip(&self, a: f64, b: f64, mass: f64) -> Window {
        Window { lo: a.max(self.lo), hi: b.min(self.hi), mass }
    }

    fn rebuild(&mut self) {
        let half = 0.5 * self.length;
        let centers: Vec<f64> = self.centers().into_iter().flatten().collect();
        self.windows = match centers.as_slice() {
            [a, b] if (a - b).abs() < self.length => {
                vec![self.clip(a.min(*b) - half, a.max(*b) + half, 2.0 * self.p)]
            }
            cs => cs.iter().map(|c| self.clip(c - half, c + half, self.p)).collect(),
        };
        self.uniform_mass = 1.0 - self.windows.iter().map(|w| w.mass).sum::<f64>();
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(self.lo <= x && x <= self.hi) {
            return 0.0;
        }
        let mut d = self.uniform_mass / (self.hi - self.lo);
        for w in &self.windows {
            if w.lo < x && x < w.hi {
                d += w.mass / (w.hi - w.lo);
            }
        }
        d
    }
}

impl ProposalKernel for TwoModeKernel {
    fn name(&self) -> &str {
        "two-mode-adaptive"
    }

    fn is_independent(&self) -> bool {
        true
    }

    fn sample(&mut self, _x_prev: &[f64], _history: &History, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mut r = rng.random::<f64>();
        if r < self.uniform_mass {
            return Ok(vec![self.lo + (self.hi - self.lo) * rng.random::<f64>()]);
        }
        r -= self.uniform_mass;
        for w in &self.windows {
            if r < w.mass {
                return Ok(vec![w.lo + (w.hi - w.lo) * rng.random::<f64>()]);
            }
            r -= w.mass;
        }
        let w = self.windows.last().expect("window mass present");
        Ok(vec![w.lo + (w.hi - w.lo) * rng.random::<f64>()])
    }

    fn log_density(&self, point: &[f64], _x_prev: &[f64], _history: &History) -> f64 {
        self.density(point[0]).ln()
    }

    fn adapt(&mut self, history: &History) {
        let mut changed = false;
        for e in &history.entries()[self.consumed..] {
            let x = e.state[0];
            let side = if x < self.split {
                0
            } else if x > self.split {
                1
            } else {
                continue;
            };
            if e.log_f.is_finite() && self.best[side].is_none_or(|(_, lf)| e.log_f > lf) {
                self.best[side] = Some((x, e.log_f));
                changed = true;
            }
        }
        self.consumed = history.len();
        if changed {
            self.rebuild();
        }
    }

    fn stats(&self) -> Vec<(&'static str, f64)> {
        vec![("windows", self.windows.len() as f64)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::HistoryEntry;
    use crate::numeric::integrate_composite;

    fn entry(x: f64, log_f: f64) -> HistoryEntry {
        HistoryEntry { state: vec![x], log_f, response: None, iteration_added: 0 }
    }

    fn kernel_with(entries: &[(f64, f64)]) -> TwoModeKernel {
        let mut k = TwoModeKernel::new(0.4, 0.02, 0.5, (0.0, 1.0)).unwrap();
        let h: History = entries.iter().map(|&(x, f)| entry(x, f)).collect();
        k.adapt(&h);
        k
    }

    fn mass(k: &TwoModeKernel) -> f64 {
        let mut breaks = vec![0.0, 1.0];
        for w in k.windows() {
            breaks.extend([w.lo, w.hi]);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        integrate_composite(|x| k.density(x), &breaks, 4, 10)
    }

    #[test]
    fn empty_history_is_uniform() {
        let k = kernel_with(&[]);
        assert_eq!(k.density(0.1), 1.0);
        assert_eq!(k.density(0.9), 1.0);
        assert!((mass(&k) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_windows_density_values() {
        let k = kernel_with(&[(1.0 / 3.0, 0.0), (2.0 / 3.0, -1.0), (0.2, -5.0), (0.9, -3.0)]);
        assert_eq!(k.centers(), [Some(1.0 / 3.0), Some(2.0 / 3.0)]);
        assert!((k.density(1.0 / 3.0) - 20.2).abs() < 1e-9);
        assert!((k.density(2.0 / 3.0 + 0.005) - 20.2).abs() < 1e-9);
        assert!((k.density(0.5) - 0.2).abs() < 1e-12);
        assert!((mass(&k) - 1.0).abs() < 1e-12);
        assert!((k.density_floor() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn missing_side_returns_mass_to_uniform() {
        let k = kernel_with(&[(0.3, 0.0)]);
        assert!((k.uniform_mass() - 0.6).abs() < 1e-15);
        assert!((mass(&k) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_window_is_clipped_with_mass_preserved() {
        let k = kernel_with(&[(0.004, 0.0), (0.999, 0.0)]);
        let w = k.windows();
        assert_eq!(w[0].lo, 0.0);
        assert!((w[0].hi - 0.014).abs() < 1e-15);
        assert!((k.density(0.01) - (0.2 + 0.4 / 0.014)).abs() < 1e-9);
        assert!((mass(&k) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_windows_merge() {
        let k = kernel_with(&[(0.495, 0.0), (0.505, 0.0)]);
        assert_eq!(k.windows().len(), 1);
        let w = k.windows()[0];
        assert!((w.mass - 0.8).abs() < 1e-15);
        assert!((w.hi - w.lo - 0.03).abs() < 1e-12);
        assert!((mass(&k) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_is_argmax_of_cached_values() {
        let k = kernel_with(&[(0.1, 1.0), (0.2, 3.0), (0.3, 2.0), (0.7, 5.0), (0.8, 4.0), (0.5, 99.0)]);
        assert_eq!(k.centers(), [Some(0.2), Some(0.7)]);
    }
}
