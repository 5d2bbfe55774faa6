//! Turns configuration specs into targets, kernels and partitions.

use std::sync::Arc;
use std::time::Duration;

use crate::chain::{ChainRng, FixedPoint, FromTarget, InitialDistribution, KernelSchedule, ProposalKernel, TargetDensity, UniformInit};
use crate::diagnostics::{
    cauchy_partition, ex1_partition, gauss13_partition, mode_shell_partition, BinPartition, CellRule, GAUSS13_SHELL_QUANTILES,
};
use crate::error::{Error, Result};
use crate::numeric::MvNormal;
use crate::proposals::{
    DoeblinMixture, FixedIndependenceKernel, HeavyTail, MixtureParams, NormalMixtureKernel, RandomWalkKernel,
    SuppressedMixtureKernel, SuppressionParams, SurrogateKernel, TwoModeKernel,
};
use crate::targets::{
    gauss13_layout, CauchyTarget, Example1Target, Example4Target, ExternalEvaluator, GaussMixtureTarget, UniformTarget,
    GAUSS13_R_INNER, GAUSS13_R_OUTER, GAUSS13_SIGMA,
};

use super::config::{ExperimentConfig, InitialSpec, KernelSpec, PartitionSpec, TailSpec, TargetSpec};

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Builds the target. An external simulator is spawned only when `spawn`
/// is set; otherwise the response is computed in process.
pub fn build_target(spec: &TargetSpec, spawn: bool) -> Result<Arc<dyn TargetDensity>> {
    Ok(match spec {
        TargetSpec::Ex1 { alpha } => Arc::new(Example1Target::new(*alpha)?),
        TargetSpec::Gauss13 { r_inner, r_outer, sigma } => {
            if !(0.0 < *r_inner && r_inner < r_outer) {
                return Err(bad("gauss13 needs 0 < r_inner < r_outer"));
            }
            Arc::new(GaussMixtureTarget::isotropic(&gauss13_layout(*r_inner, *r_outer), *sigma)?)
        }
        TargetSpec::GaussMixture { modes, sigma } => Arc::new(GaussMixtureTarget::isotropic(modes, *sigma)?),
        TargetSpec::Cauchy {} => Arc::new(CauchyTarget::new()),
        TargetSpec::Ex4 { dim, datum, sigma2, simulator, timeout_secs } => {
            let t = Example4Target::new(*dim, *datum, *sigma2)?;
            match (simulator, spawn) {
                (Some(cmd), true) => {
                    let timeout = Duration::from_secs_f64(*timeout_secs);
                    Arc::new(t.with_evaluator(ExternalEvaluator::spawn(cmd[0].as_str(), &cmd[1..].iter().map(String::as_str).collect::<Vec<_>>(), timeout)?))
                }
                _ => Arc::new(t),
            }
        }
        TargetSpec::Uniform { bounds } => Arc::new(UniformTarget::new(bounds.clone())?),
    })
}

/// True when every chain needs its own target instance.
pub fn target_is_per_chain(spec: &TargetSpec) -> bool {
    matches!(spec, TargetSpec::Ex4 { simulator: Some(_), .. })
}

fn diagonal(mean: &[f64], variances: &[f64], dim: usize, what: &str) -> Result<MvNormal> {
    if mean.len() != dim || variances.len() != dim {
        return Err(bad(format!("{what}: expected {dim} coordinates")));
    }
    MvNormal::diagonal(mean.to_vec(), variances)
}

fn box_of(target: &dyn TargetDensity, what: &str) -> Result<Vec<(f64, f64)>> {
    target.support().bounds().map(|b| b.to_vec()).ok_or_else(|| bad(format!("{what} needs a bounded target support")))
}

fn mixture_params(
    target: &dyn TargetDensity,
    base_mean: &[f64],
    base_variances: &[f64],
    mode_variances: &[f64],
    m0: usize,
    cap: usize,
    spacing: f64,
) -> Result<MixtureParams> {
    let dim = target.dim();
    if m0 == 0 || cap < m0 || !(spacing > 0.0) {
        return Err(bad("mixture needs 0 < m0 <= cap and spacing > 0"));
    }
    let zeros = vec![0.0; dim];
    Ok(MixtureParams {
        base: diagonal(base_mean, base_variances, dim, "mixture base")?,
        mode_shape: diagonal(&zeros, mode_variances, dim, "mixture mode shape")?,
        m0,
        cap,
        spacing,
    })
}

pub fn build_kernel(spec: &KernelSpec, target: &dyn TargetDensity, target_spec: &TargetSpec) -> Result<Box<dyn ProposalKernel>> {
    let dim = target.dim();
    Ok(match spec {
        KernelSpec::IndependentUniform { bounds } => {
            let b = match bounds {
                Some(b) => b.clone(),
                None => box_of(target, "independent-uniform without bounds")?,
            };
            if b.len() != dim {
                return Err(bad(format!("independent-uniform: expected {dim} bounds")));
            }
            Box::new(FixedIndependenceKernel::uniform(b)?)
        }
        KernelSpec::IndependentNormal { mean, variances } => {
            Box::new(FixedIndependenceKernel::normal(diagonal(mean, variances, dim, "independent-normal")?))
        }
        KernelSpec::RandomWalkUniform { length } => Box::new(RandomWalkKernel::uniform(*length, target.support().clone())?),
        KernelSpec::RandomWalkNormal { variances } => {
            Box::new(RandomWalkKernel::normal(diagonal(&vec![0.0; dim], variances, dim, "random-walk-normal")?))
        }
        KernelSpec::TwoMode { p, length, split } => {
            let b = box_of(target, "two-mode")?;
            if dim != 1 {
                return Err(bad("two-mode needs a one-dimensional target"));
            }
            Box::new(TwoModeKernel::new(*p, *length, *split, b[0])?)
        }
        KernelSpec::Mixture { base_mean, base_variances, mode_variances, m0, cap, spacing } => Box::new(
            NormalMixtureKernel::new(mixture_params(target, base_mean, base_variances, mode_variances, *m0, *cap, *spacing)?),
        ),
        KernelSpec::Suppressed {
            base_mean,
            base_variances,
            mode_variances,
            m0,
            cap,
            spacing,
            suppression_cap,
            n0,
            radius,
            delta,
            power,
            c0,
        } => Box::new(SuppressedMixtureKernel::new(
            mixture_params(target, base_mean, base_variances, mode_variances, *m0, *cap, *spacing)?,
            SuppressionParams { cap: *suppression_cap, n0: *n0, radius: *radius, delta: *delta, power: *power, c0: *c0 },
        )?),
        KernelSpec::Surrogate { widen, ridge } => match target_spec {
            TargetSpec::Ex4 { dim, datum, sigma2, .. } => {
                if !(*ridge >= 0.0) {
                    return Err(bad("surrogate ridge must be non-negative"));
                }
                Box::new(SurrogateKernel::new(*dim, *datum, *sigma2, *widen)?.with_ridge(*ridge))
            }
            _ => return Err(bad("surrogate kernel needs an ex4 target")),
        },
        KernelSpec::Doeblin { eps, tail, inner } => {
            let tail = match tail {
                TailSpec::Uniform { bounds } => {
                    if bounds.len() != dim || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
                        return Err(bad(format!("doeblin tail: expected {dim} increasing bounds")));
                    }
                    HeavyTail::UniformBox(bounds.clone())
                }
                TailSpec::Cauchy { center, scales } => {
                    if center.len() != dim || scales.len() != dim || scales.iter().any(|s| !(*s > 0.0)) {
                        return Err(bad(format!("doeblin tail: expected {dim} centre coordinates and positive scales")));
                    }
                    HeavyTail::Cauchy { center: center.clone(), scales: scales.clone() }
                }
            };
            Box::new(DoeblinMixture::new(build_kernel(inner, target, target_spec)?, *eps, tail)?)
        }
    })
}

pub fn build_schedule(config: &ExperimentConfig, target: &dyn TargetDensity) -> Result<KernelSchedule> {
    let kernels = config.kernels.iter().map(|k| build_kernel(k, target, &config.target)).collect::<Result<Vec<_>>>()?;
    KernelSchedule::cycle(kernels, config.schedule.clone())
}

pub fn build_initial(spec: &InitialSpec, target: &Arc<dyn TargetDensity>) -> Result<Box<dyn InitialDistribution>> {
    let dim = target.dim();
    Ok(match spec {
        InitialSpec::Uniform { bounds } => {
            if bounds.len() != dim || bounds.iter().any(|(lo, hi)| !(lo <= hi)) {
                return Err(bad(format!("initial: expected {dim} bounds")));
            }
            Box::new(UniformInit(bounds.clone()))
        }
        InitialSpec::Point { x } => {
            if x.len() != dim {
                return Err(bad(format!("initial: expected {dim} coordinates")));
            }
            Box::new(FixedPoint(x.clone()))
        }
        InitialSpec::Normal { mean, variances } => {
            let n = diagonal(mean, variances, dim, "initial")?;
            Box::new(move |rng: &mut dyn rand::RngCore| n.sample(rng))
        }
        InitialSpec::Target {} => {
            if target.sample_direct(&mut <ChainRng as rand::SeedableRng>::seed_from_u64(0)).is_none() {
                return Err(Error::NotSampleable);
            }
            Box::new(FromTarget(target.clone()))
        }
    })
}

/// The partition and its cell probabilities for the configured target.
pub fn build_partition(spec: &PartitionSpec, target: &TargetSpec) -> Result<BinPartition> {
    match (spec, target) {
        (PartitionSpec::Ex1 { bins }, TargetSpec::Ex1 { alpha }) if *bins > 0 => Ok(ex1_partition(&Example1Target::new(*alpha)?, *bins)),
        (PartitionSpec::Gauss13 {}, TargetSpec::Gauss13 { r_inner, r_outer, sigma }) => {
            if (*r_inner, *r_outer, *sigma) == (GAUSS13_R_INNER, GAUSS13_R_OUTER, GAUSS13_SIGMA) {
                Ok(gauss13_partition())
            } else {
                Ok(mode_shell_partition(gauss13_layout(*r_inner, *r_outer), *sigma, &GAUSS13_SHELL_QUANTILES, 1024))
            }
        }
        (PartitionSpec::Gauss13 {}, TargetSpec::GaussMixture { modes, sigma }) if modes.iter().all(|m| m.len() == 2) => {
            Ok(mode_shell_partition(modes.clone(), *sigma, &GAUSS13_SHELL_QUANTILES, 1024))
        }
        (PartitionSpec::Cauchy { bins }, TargetSpec::Cauchy {}) if *bins > 0 => Ok(cauchy_partition(*bins)),
        (PartitionSpec::Grid { coord, bins }, TargetSpec::Uniform { bounds }) if *coord < bounds.len() && *bins > 0 => {
            let (lo, hi) = bounds[*coord];
            let mut edges: Vec<f64> = (0..=*bins).map(|k| lo + (hi - lo) * k as f64 / *bins as f64).collect();
            // closed upper end: the last cell keeps `hi`
            edges[*bins] = f64::from_bits(hi.to_bits() + 1);
            BinPartition::new(CellRule::Intervals { coord: *coord, edges }, vec![1.0 / *bins as f64; *bins])
        }
        _ => Err(bad("partition does not fit the target (ex1 ↔ ex1, gauss13 ↔ planar mixtures, cauchy ↔ cauchy, grid ↔ uniform)")),
    }
}

/// Builds everything once without spawning a simulator.
pub(crate) fn check(config: &ExperimentConfig) -> Result<()> {
    let target = build_target(&config.target, false)?;
    build_schedule(config, target.as_ref())?;
    build_initial(&config.initial, &target)?;
    if let Some(p) = &config.diagnostics.partition {
        build_partition(p, &config.target)?;
    }
    Ok(())
}
