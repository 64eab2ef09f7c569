//! Experiment configuration, seeded runs, real-system evaluation, metric files and plots.

mod config;
mod diagnose;
mod eval;
mod plot;
mod protocol;
mod run;

pub use config::{DatasetConfig, DatasetProtocol, EnvConfig, ExperimentConfig, ProtocolKind};
pub use diagnose::{checkpoint_discriminators, diagnose_checkpoint, simulator_probes, DIAGNOSTIC_STREAM, PROBE_STREAM};
pub use eval::{
    angular_speed, evaluate_policy, gap_diagnostic, quartile_u_means, random_policy_returns, rollout_returns, DiagnosticRow,
    ReturnStats,
};
pub use plot::{curve_svg, emit_curves, metrics_csv, parse_metrics_csv, Series, METRICS_HEADER};
pub use protocol::{generate_dataset, ProtocolOutcome, ProtocolSummary};
pub use run::{resolve_dataset, run_experiment, run_with_dataset, write_json, EvalPoint, RunReport, RunSummary, SeedSummary};
