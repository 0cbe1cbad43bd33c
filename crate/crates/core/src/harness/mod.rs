//! Monte Carlo campaigns, configuration files, and campaign reports.

pub mod config;
pub mod montecarlo;
pub mod report;

pub use config::{default_config, default_scenario, load_config, parse_config, ScenarioConfig};
pub use montecarlo::{
    coverage_study, replication_seed, run_montecarlo, EstimatorKind, IntervalKind,
    MonteCarloSummary, Replication,
};
pub use report::{
    summarize, write_ecdfs_csv, write_estimate_csv, write_histograms_csv, write_samples_csv,
    write_summary_csv, Summary1d,
};
