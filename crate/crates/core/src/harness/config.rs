//! Experiment configuration.
//!
//! A configuration is a TOML document. Every table rejects unknown keys.
//! A top-level `preset = "<name>"` loads a complete preset first; keys in
//! the document then override it, tables merging key by key. A table whose
//! `kind` differs from the preset's replaces it wholesale, and arrays always
//! replace.
//!
//! ```toml
//! preset = "ex1"
//! n_chains = 500
//!
//! [diagnostics]
//! snapshots = [1500]
//! ```

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

/// Preset names accepted by `preset = "..."`.
pub const PRESETS: [&str; 12] = [
    "ex1",
    "ex1-independent",
    "ex1-random-walk",
    "ex2",
    "ex2-suppressed",
    "ex2-independent",
    "ex2-random-walk",
    "ex3",
    "ex3-independent",
    "ex4",
    "ex4-independent",
    "ex4-random-walk",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed; chain `i` uses a seed split from it. At most `2^63 − 1`.
    pub seed: u64,
    pub n_chains: usize,
    pub n_iterations: u64,
    pub target: TargetSpec,
    pub initial: InitialSpec,
    pub kernels: Vec<KernelSpec>,
    /// Kernel indices cycled over iterations `1, 2, …`.
    #[serde(default = "default_schedule")]
    pub schedule: Vec<usize>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Ensemble size restored by `--full-scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<Scale>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_schedule() -> Vec<usize> {
    vec![0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    pub n_chains: usize,
    pub n_iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Two sharp power-law modes on `(0, 1)`.
    Ex1 {
        #[serde(default = "d_alpha")]
        alpha: f64,
    },
    /// Thirteen equal planar normal modes.
    Gauss13 {
        #[serde(default = "d_r_inner")]
        r_inner: f64,
        #[serde(default = "d_r_outer")]
        r_outer: f64,
        #[serde(default = "d_sigma")]
        sigma: f64,
    },
    /// Equal-weight isotropic normal mixture.
    GaussMixture { modes: Vec<Vec<f64>>, sigma: f64 },
    /// Standard Cauchy on the line.
    Cauchy {},
    /// Likelihood of a simulator response against a datum on `(0, 1)^dim`.
    Ex4 {
        #[serde(default = "d_ex4_dim")]
        dim: usize,
        #[serde(default = "d_datum")]
        datum: f64,
        #[serde(default = "d_sigma2")]
        sigma2: f64,
        /// Program and arguments speaking the simulator protocol; in-process when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        simulator: Option<Vec<String>>,
        #[serde(default = "d_timeout")]
        timeout_secs: f64,
    },
    /// Uniform on a box.
    Uniform { bounds: Vec<(f64, f64)> },
}

fn d_alpha() -> f64 {
    2000.0
}
fn d_r_inner() -> f64 {
    crate::targets::GAUSS13_R_INNER
}
fn d_r_outer() -> f64 {
    crate::targets::GAUSS13_R_OUTER
}
fn d_sigma() -> f64 {
    crate::targets::GAUSS13_SIGMA
}
fn d_ex4_dim() -> usize {
    crate::targets::EX4_DIM
}
fn d_datum() -> f64 {
    crate::targets::EX4_DATUM
}
fn d_sigma2() -> f64 {
    crate::targets::EX4_SIGMA2
}
fn d_timeout() -> f64 {
    crate::targets::external::DEFAULT_TIMEOUT.as_secs_f64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Uniform { bounds: Vec<(f64, f64)> },
    Point { x: Vec<f64> },
    Normal { mean: Vec<f64>, variances: Vec<f64> },
    /// Exact draws from the target.
    Target {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Uniform on `bounds`, or on the target's box support when absent.
    IndependentUniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounds: Option<Vec<(f64, f64)>>,
    },
    IndependentNormal { mean: Vec<f64>, variances: Vec<f64> },
    /// Per-coordinate uniform step of width `length`, clipped to the support.
    RandomWalkUniform { length: f64 },
    RandomWalkNormal { variances: Vec<f64> },
    /// Uniform plus windows around the best state on either side of `split`.
    TwoMode {
        #[serde(default = "d_p")]
        p: f64,
        #[serde(default = "d_length")]
        length: f64,
        #[serde(default = "d_split")]
        split: f64,
    },
    /// Base normal plus normal bumps at the best-scored history states.
    Mixture {
        base_mean: Vec<f64>,
        base_variances: Vec<f64>,
        mode_variances: Vec<f64>,
        m0: usize,
        cap: usize,
        spacing: f64,
    },
    /// Mixture whose base term is damped near states where it overshot.
    Suppressed {
        base_mean: Vec<f64>,
        base_variances: Vec<f64>,
        mode_variances: Vec<f64>,
        m0: usize,
        cap: usize,
        spacing: f64,
        #[serde(default = "d_supp_cap")]
        suppression_cap: usize,
        #[serde(default = "d_supp_cap")]
        n0: usize,
        #[serde(default = "d_radius")]
        radius: f64,
        #[serde(default = "d_delta")]
        delta: f64,
        #[serde(default = "d_power")]
        power: f64,
        #[serde(default = "d_c0")]
        c0: f64,
    },
    /// Uniform proposals thinned by a quadratic fit to the simulator
    /// responses; datum and variance come from the target.
    Surrogate {
        #[serde(default = "d_widen")]
        widen: f64,
        #[serde(default = "d_ridge")]
        ridge: f64,
    },
    /// `(1 − eps)·inner + eps·tail`.
    Doeblin { eps: f64, tail: TailSpec, inner: Box<KernelSpec> },
}

fn d_p() -> f64 {
    0.4
}
fn d_length() -> f64 {
    0.02
}
fn d_split() -> f64 {
    0.5
}
fn d_supp_cap() -> usize {
    1000
}
fn d_radius() -> f64 {
    0.05
}
fn d_delta() -> f64 {
    0.1
}
fn d_power() -> f64 {
    1.3
}
fn d_c0() -> f64 {
    1.0
}
fn d_widen() -> f64 {
    5.0
}
fn d_ridge() -> f64 {
    crate::proposals::SURROGATE_RIDGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TailSpec {
    Uniform { bounds: Vec<(f64, f64)> },
    Cauchy { center: Vec<f64>, scales: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSpec {
    /// Cells for the binned total-variation series (`convergence.csv`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    /// Snapshot iterations on top of the geometric grid.
    pub snapshots: Vec<u64>,
    /// Include `0, 1, 2, 4, …` as snapshots.
    pub geometric_snapshots: bool,
    /// Replicates of the simulated noise floor.
    pub noise_floor_replicates: usize,
    /// Known Doeblin constant of every independent iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doeblin: Option<f64>,
    /// Per-chain counters (`acceptance.csv`).
    pub acceptance: bool,
    /// Region labels for jump statistics (`mode_jumps.csv`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionSpec>,
    pub burn_in: u64,
    /// Number of leading chains whose trace is written.
    pub traces: usize,
    pub trace_cap: u64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            partition: None,
            snapshots: Vec::new(),
            geometric_snapshots: true,
            noise_floor_replicates: 20,
            doeblin: None,
            acceptance: false,
            regions: None,
            burn_in: 0,
            traces: 0,
            trace_cap: 10_000,
        }
    }
}

impl DiagnosticsSpec {
    pub fn is_empty(&self) -> bool {
        self.partition.is_none() && !self.acceptance && self.regions.is_none() && self.traces == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartitionSpec {
    /// Equally likely intervals of the two-mode target.
    Ex1 {
        #[serde(default = "d_bins")]
        bins: usize,
    },
    /// Nearest mode then quartile shells of the thirteen-mode mixture.
    Gauss13 {},
    /// Equally likely bins of `|x|` for the standard Cauchy.
    Cauchy {
        #[serde(default = "d_bins")]
        bins: usize,
    },
    /// Equal-width bins of one coordinate over a box target.
    Grid { coord: usize, bins: usize },
}

fn d_bins() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    /// Label of the nearest point.
    Modes { points: Vec<Vec<f64>> },
    /// `x[coord] < at` versus the rest.
    Split { coord: usize, at: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: "aimh-out".into() }
    }
}

/// `x₁` at which the first term of the example-4 response peaks; it
/// separates the two high-likelihood regions.
pub fn ex4_saddle() -> f64 {
    (1.0 / (6.0 * std::f64::consts::PI)).acos() / std::f64::consts::PI
}

fn unit(dim: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); dim]
}

/// The named preset, desk-scale.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let diag = DiagnosticsSpec::default;
    let ex1 = |kernel: KernelSpec| ExperimentConfig {
        name: name.into(),
        seed: 1,
        n_chains: 2000,
        n_iterations: 3000,
        target: TargetSpec::Ex1 { alpha: d_alpha() },
        initial: InitialSpec::Uniform { bounds: unit(1) },
        kernels: vec![kernel],
        schedule: vec![0],
        diagnostics: DiagnosticsSpec {
            partition: Some(PartitionSpec::Ex1 { bins: 20 }),
            snapshots: vec![3000],
            acceptance: true,
            regions: Some(RegionSpec::Modes { points: vec![vec![1.0 / 3.0], vec![2.0 / 3.0]] }),
            burn_in: 500,
            ..diag()
        },
        output: OutputSpec { dir: format!("aimh-out/{name}") },
        full_scale: Some(Scale { n_chains: 10_000, n_iterations: 10_000 }),
    };
    let ex2_mixture = || KernelSpec::Mixture {
        base_mean: vec![0.0, 0.0],
        base_variances: vec![1.0, 1.0],
        mode_variances: vec![0.03 * 0.03, 0.03 * 0.03],
        m0: 20,
        cap: 25,
        spacing: 0.05,
    };
    let ex2 = |kernel: KernelSpec| ExperimentConfig {
        name: name.into(),
        seed: 2,
        n_chains: 2000,
        n_iterations: 3000,
        target: TargetSpec::Gauss13 { r_inner: d_r_inner(), r_outer: d_r_outer(), sigma: d_sigma() },
        initial: InitialSpec::Normal { mean: vec![0.0, 0.0], variances: vec![1.0, 1.0] },
        kernels: vec![kernel],
        schedule: vec![0],
        diagnostics: DiagnosticsSpec {
            partition: Some(PartitionSpec::Gauss13 {}),
            snapshots: vec![3000],
            acceptance: true,
            regions: Some(RegionSpec::Modes {
                points: crate::targets::gauss13_layout(d_r_inner(), d_r_outer()),
            }),
            burn_in: 500,
            ..diag()
        },
        output: OutputSpec { dir: format!("aimh-out/{name}") },
        full_scale: Some(Scale { n_chains: 20_000, n_iterations: 10_000 }),
    };
    let ex3 = |kernel: KernelSpec| ExperimentConfig {
        name: name.into(),
        seed: 3,
        n_chains: 2000,
        n_iterations: 2000,
        target: TargetSpec::Cauchy {},
        initial: InitialSpec::Normal { mean: vec![0.0], variances: vec![1.0] },
        kernels: vec![kernel],
        schedule: vec![0],
        diagnostics: DiagnosticsSpec {
            partition: Some(PartitionSpec::Cauchy { bins: 20 }),
            snapshots: vec![2000],
            acceptance: true,
            ..diag()
        },
        output: OutputSpec { dir: format!("aimh-out/{name}") },
        full_scale: Some(Scale { n_chains: 10_000, n_iterations: 10_000 }),
    };
    let ex4 = |kernel: KernelSpec| ExperimentConfig {
        name: name.into(),
        seed: 4,
        n_chains: 4,
        n_iterations: 50_000,
        target: TargetSpec::Ex4 {
            dim: d_ex4_dim(),
            datum: d_datum(),
            sigma2: d_sigma2(),
            simulator: None,
            timeout_secs: d_timeout(),
        },
        initial: InitialSpec::Uniform { bounds: unit(d_ex4_dim()) },
        kernels: vec![kernel],
        schedule: vec![0],
        diagnostics: DiagnosticsSpec {
            acceptance: true,
            regions: Some(RegionSpec::Split { coord: 0, at: ex4_saddle() }),
            burn_in: 5000,
            traces: 1,
            trace_cap: 50_000,
            ..diag()
        },
        output: OutputSpec { dir: format!("aimh-out/{name}") },
        full_scale: Some(Scale { n_chains: 20, n_iterations: 50_000 }),
    };
    Ok(match name {
        "ex1" => ex1(KernelSpec::TwoMode { p: d_p(), length: d_length(), split: d_split() }),
        "ex1-independent" => ex1(KernelSpec::IndependentUniform { bounds: None }),
        "ex1-random-walk" => ex1(KernelSpec::RandomWalkUniform { length: d_length() }),
        "ex2" => ex2(ex2_mixture()),
        "ex2-suppressed" => match ex2_mixture() {
            KernelSpec::Mixture { base_mean, base_variances, mode_variances, m0, cap, spacing } => ex2(KernelSpec::Suppressed {
                base_mean,
                base_variances,
                mode_variances,
                m0,
                cap,
                spacing,
                suppression_cap: d_supp_cap(),
                n0: d_supp_cap(),
                radius: d_radius(),
                delta: d_delta(),
                power: d_power(),
                c0: d_c0(),
            }),
            _ => unreachable!(),
        },
        "ex2-independent" => ex2(KernelSpec::IndependentNormal { mean: vec![0.0, 0.0], variances: vec![1.0, 1.0] }),
        "ex2-random-walk" => ex2(KernelSpec::RandomWalkNormal { variances: vec![0.09, 0.09] }),
        "ex3" => ex3(KernelSpec::Mixture {
            base_mean: vec![0.0],
            base_variances: vec![1.0],
            mode_variances: vec![0.25],
            m0: 70,
            cap: 80,
            spacing: 0.05,
        }),
        "ex3-independent" => ex3(KernelSpec::IndependentNormal { mean: vec![0.0], variances: vec![1.0] }),
        "ex4" => ex4(KernelSpec::Surrogate { widen: d_widen(), ridge: d_ridge() }),
        "ex4-independent" => ex4(KernelSpec::IndependentUniform { bounds: None }),
        "ex4-random-walk" => ex4(KernelSpec::RandomWalkUniform { length: 0.1 }),
        other => {
            return Err(Error::config(format!("preset: unknown preset {other:?}, expected one of {}", PRESETS.join(", ")), None))
        }
    })
}

/// Parses, fills from the preset if one is named, and validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut doc: Table = text.parse().map_err(|e: toml::de::Error| {
        Error::config(format!("syntax: {}", e.message()), e.span().map(|s| line_at(text, s.start)))
    })?;
    let merged = match doc.remove("preset") {
        Some(Value::String(name)) => {
            let base = preset(&name).map_err(|e| match e {
                Error::Config { message, .. } => Error::config(message, locate(text, "preset")),
                other => other,
            })?;
            let mut table = Table::try_from(&base).expect("presets serialize");
            merge(&mut table, doc);
            table
        }
        Some(_) => return Err(Error::config("preset: expected a string", locate(text, "preset"))),
        None => doc,
    };
    if !merged.contains_key("target") {
        return Err(Error::config("missing target", None));
    }
    let rendered = toml::to_string(&merged).expect("table renders");
    let config: ExperimentConfig = toml::from_str(&rendered).map_err(|e| translate(&e, &rendered, text))?;
    validate(&config, text)?;
    Ok(config)
}

/// Serializes a config so that [`parse_config`] returns it unchanged.
pub fn emit_config(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("configs serialize")
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) if b.get("kind") == o.get("kind") || o.get("kind").is_none() => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line of `text` that assigns `key` or opens a table named `key`.
fn locate(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        let assigns = l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='));
        let header = l.starts_with('[') && l.trim_matches(|c| c == '[' || c == ']').rsplit('.').next() == Some(key);
        assigns || header
    }).map(|i| i + 1)
}

/// Maps an error in the merged document back to the key and line of the
/// user's text.
fn translate(e: &toml::de::Error, rendered: &str, text: &str) -> Error {
    let msg = e.message();
    let key = msg
        .split_once("unknown field `")
        .and_then(|(_, r)| r.split_once('`'))
        .map(|(k, _)| k.to_string())
        .or_else(|| {
            let span = e.span()?;
            let line = rendered[..span.start].rsplit('\n').next().unwrap_or("");
            let full = rendered[span.start..].split('\n').next().unwrap_or("");
            let whole = format!("{line}{full}");
            let whole = whole.trim();
            // a missing top-level field spans the whole document; naming its first key would mislead
            if msg.starts_with("missing field") && !whole.starts_with('[') && !whole.contains('{') {
                return None;
            }
            if whole.starts_with('[') {
                Some(whole.trim_matches(|c| c == '[' || c == ']').rsplit('.').next()?.to_string())
            } else {
                Some(whole.split_once('=')?.0.trim().trim_matches('"').to_string())
            }
        });
    match key {
        Some(k) => Error::config(format!("{k}: {msg}"), locate(text, &k)),
        None => Error::config(msg.to_string(), None),
    }
}

fn validate(c: &ExperimentConfig, text: &str) -> Result<()> {
    let fail = |key: &str, what: &str| Err(Error::config(format!("{key}: {what}"), locate(text, key)));
    if c.n_chains == 0 {
        return fail("n_chains", "must be at least 1");
    }
    if c.seed > i64::MAX as u64 {
        return fail("seed", "must fit in a signed 64-bit integer");
    }
    if c.kernels.is_empty() {
        return fail("kernels", "at least one kernel is required");
    }
    if c.schedule.is_empty() || c.schedule.iter().any(|&k| k >= c.kernels.len()) {
        return fail("schedule", "indices must name configured kernels");
    }
    if let Some(s) = &c.full_scale {
        if s.n_chains == 0 {
            return fail("n_chains", "full-scale ensemble must have at least 1 chain");
        }
    }
    if let Some(a) = c.diagnostics.doeblin {
        if !(0.0..=1.0).contains(&a) {
            return fail("doeblin", "must lie in [0, 1]");
        }
    }
    if c.diagnostics.partition.is_some() && c.diagnostics.noise_floor_replicates == 0 {
        return fail("noise_floor_replicates", "must be at least 1");
    }
    if let TargetSpec::Ex4 { timeout_secs, simulator, .. } = &c.target {
        if !(*timeout_secs > 0.0) {
            return fail("timeout_secs", "must be positive");
        }
        if simulator.as_ref().is_some_and(|s| s.is_empty()) {
            return fail("simulator", "needs a program name");
        }
    }
    super::build::check(c).map_err(|e| match e {
        Error::InvalidArgument(m) | Error::Config { message: m, .. } => Error::config(m, None),
        other => other,
    })
}
