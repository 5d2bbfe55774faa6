use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numeric::squared_distance;
use crate::targets::{cauchy_quantile_bins, gauss13_layout, Example1Target, GAUSS13_R_INNER, GAUSS13_R_OUTER, GAUSS13_SIGMA};

use super::nearest_mode;

/// Mass quantiles of the inner shell boundaries around each mode.
pub const GAUSS13_SHELL_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// How a state is mapped to a cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellRule {
    /// Cell `k` is `[edges[k], edges[k+1])` in coordinate `coord`.
    Intervals { coord: usize, edges: Vec<f64> },
    /// Same, applied to `|x₁|`.
    AbsIntervals { edges: Vec<f64> },
    /// Nearest mode first, then the shell of the distance to it. Cell
    /// `m · (radii.len() + 1) + s` is shell `s` of mode `m`; `radii` are the
    /// inner boundaries and the last shell is unbounded.
    ModeShells { modes: Vec<Vec<f64>>, radii: Vec<f64> },
    /// One cell per listed point.
    Points(Vec<Vec<f64>>),
}

/// Disjoint cells with target probabilities. Mass not covered by any cell
/// belongs to an implicit overflow cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    rule: CellRule,
    probabilities: Vec<f64>,
}

impl BinPartition {
    pub fn new(rule: CellRule, probabilities: Vec<f64>) -> Result<Self> {
        let n = match &rule {
            CellRule::Intervals { edges, .. } | CellRule::AbsIntervals { edges } => {
                if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidArgument("interval edges must increase".into()));
                }
                edges.len() - 1
            }
            CellRule::ModeShells { modes, radii } => {
                if modes.is_empty() || radii.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidArgument("shell radii must increase".into()));
                }
                modes.len() * (radii.len() + 1)
            }
            CellRule::Points(p) => p.len(),
        };
        let total: f64 = probabilities.iter().sum();
        if probabilities.len() != n || probabilities.iter().any(|p| !(*p >= 0.0)) || total > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!("need {n} cell probabilities summing to at most 1")));
        }
        Ok(Self { rule, probabilities })
    }

    pub fn rule(&self) -> &CellRule {
        &self.rule
    }

    /// Number of cells, not counting overflow.
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn overflow_probability(&self) -> f64 {
        (1.0 - self.probabilities.iter().sum::<f64>()).max(0.0)
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        match &self.rule {
            CellRule::Intervals { coord, edges } => interval_cell(x[*coord], edges),
            CellRule::AbsIntervals { edges } => interval_cell(x[0].abs(), edges),
            CellRule::ModeShells { modes, radii } => {
                let m = nearest_mode(x, modes);
                let r2 = squared_distance(x, &modes[m]);
                let s = radii.partition_point(|r| r * r <= r2);
                Some(m * (radii.len() + 1) + s)
            }
            CellRule::Points(p) => p.iter().position(|q| q.as_slice() == x),
        }
    }

    /// Cell index, with `len()` standing for overflow.
    pub fn cell_or_overflow(&self, x: &[f64]) -> usize {
        self.cell_of(x).unwrap_or(self.len())
    }

    /// Cell counts of `states`, overflow last.
    pub fn counts<'a, I>(&self, states: I) -> Vec<u64>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut c = vec![0u64; self.len() + 1];
        for s in states {
            c[self.cell_or_overflow(s)] += 1;
        }
        c
    }
}

fn interval_cell(v: f64, edges: &[f64]) -> Option<usize> {
    if !(edges[0] <= v && v < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.partition_point(|e| *e <= v) - 1)
}

/// Radii of the shells holding the given probability quantiles of an
/// isotropic planar normal with standard deviation `sigma`.
pub fn shell_radii(sigma: f64, quantiles: &[f64]) -> Vec<f64> {
    quantiles.iter().map(|q| sigma * (-2.0 * (1.0 - q).ln()).sqrt()).collect()
}

/// Cell probabilities of a mode-shell partition under the equal-weight
/// isotropic mixture at its own modes, by a midpoint rule on each
/// component's polar coordinates with the radius mapped through its
/// distribution function. `n` points per axis.
fn shell_probabilities(modes: &[Vec<f64>], sigma: f64, part: &BinPartition, n: usize) -> Vec<f64> {
    let mut probs = vec![0.0; part.len()];
    let w = 1.0 / (modes.len() as f64 * (n * n) as f64);
    let angles: Vec<(f64, f64)> = (0..n).map(|j| (std::f64::consts::TAU * (j as f64 + 0.5) / n as f64).sin_cos()).collect();
    for mu in modes {
        for i in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let r = sigma * (-2.0 * (1.0 - s).ln()).sqrt();
            for (sn, cs) in &angles {
                let x = [mu[0] + r * cs, mu[1] + r * sn];
                if let Some(c) = part.cell_of(&x) {
                    probs[c] += w;
                }
            }
        }
    }
    probs
}

/// Equal-weight planar mixture partition: nearest mode, then the shells at
/// the given mass quantiles. Probabilities from a `n × n` polar grid per
/// component.
pub fn mode_shell_partition(modes: Vec<Vec<f64>>, sigma: f64, quantiles: &[f64], n: usize) -> BinPartition {
    let radii = shell_radii(sigma, quantiles);
    let cells = modes.len() * (radii.len() + 1);
    let mut part = BinPartition::new(CellRule::ModeShells { modes: modes.clone(), radii }, vec![0.0; cells]).expect("valid shells");
    part.probabilities = shell_probabilities(&modes, sigma, &part, n);
    part
}

/// The 52-cell partition of the default thirteen-mode mixture (cached).
pub fn gauss13_partition() -> BinPartition {
    static CACHE: OnceLock<BinPartition> = OnceLock::new();
    CACHE
        .get_or_init(|| mode_shell_partition(gauss13_layout(GAUSS13_R_INNER, GAUSS13_R_OUTER), GAUSS13_SIGMA, &GAUSS13_SHELL_QUANTILES, 1024))
        .clone()
}

/// `m` equally likely intervals of the two-mode target on `(0, 1)`.
pub fn ex1_partition(target: &Example1Target, m: usize) -> BinPartition {
    let mut edges: Vec<f64> = (0..=m).map(|k| target.quantile(k as f64 / m as f64)).collect();
    edges[0] = 0.0;
    edges[m] = 1.0;
    BinPartition::new(CellRule::Intervals { coord: 0, edges }, vec![1.0 / m as f64; m]).expect("increasing quantiles")
}

/// `m` equally likely bins of `|x|` for the standard Cauchy target.
pub fn cauchy_partition(m: usize) -> BinPartition {
    BinPartition::new(CellRule::AbsIntervals { edges: cauchy_quantile_bins(m) }, vec![1.0 / m as f64; m]).expect("valid edges")
}
