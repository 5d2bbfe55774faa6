//! Experiment harness: configuration, seeded parallel ensembles, outputs
//! and the command-line interface.
//!
//! An ensemble runs `n_chains` independent chains, chain `i` seeded by
//! splitting the master seed with `i`. States at snapshot iterations are
//! binned across the ensemble, so every output depends only on the seed and
//! the configuration.

mod build;
pub mod cli;
pub mod config;
mod ensemble;
mod output;

pub use build::{build_initial, build_kernel, build_partition, build_schedule, build_target};
pub use config::{
    emit_config, ex4_saddle, parse_config, preset, DiagnosticsSpec, ExperimentConfig, InitialSpec, KernelSpec, OutputSpec,
    PartitionSpec, RegionSpec, Scale, TailSpec, TargetSpec, PRESETS,
};
pub use ensemble::{resolve_threads, run_ensemble, run_member, snapshot_grid, ChainOutcome, EnsembleResult, TraceRow, THREADS_ENV};
pub use output::{
    comparison_csv, convergence_table, emit_outputs, output_dir, partition_noise_floor, prepare_output_dir, ConvergenceTable,
};
