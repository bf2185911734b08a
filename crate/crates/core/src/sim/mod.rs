//! Monte-Carlo outage simulation.

pub mod config;
pub mod output;
pub mod run;

pub use config::{config_help, SimConfig, CONFIG_KEYS};
pub use output::{emit_results, parse_results_csv, results_to_csv, Manifest};
pub use run::{estimate_outage, run_trial, trial_rng, OutagePoint, TrialContext, TrialOutcome};
