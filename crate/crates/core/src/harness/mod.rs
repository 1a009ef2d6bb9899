//! Experiment configuration, campaigns, gradient checks and result files.

pub mod campaign;
pub mod config;
pub mod gradcheck;
pub mod output;

pub use campaign::{aggregate, run_experiment, sweep_layers, sweep_power, Aggregate, CampaignResults, Receiver, Scenario, TrialResult};
pub use config::{ChannelSource, ExperimentConfig, GradCheckConfig, MethodKind};
pub use gradcheck::{gradient_check, gradient_check_with, GradCheckReport};
pub use output::OutputFormat;
