//! Experiment configuration, error norms, convergence tables, decay fits
//! and the property suite.

pub mod config;
pub mod experiments;
pub mod norms;
pub mod properties;
pub mod rates;
pub mod run;

pub use config::{ExperimentConfig, ProblemKind};
pub use norms::{analytic_errors, Analytic, DiscreteNorms, ErrorRecord, ErrorSeries};
pub use properties::{verify_all, PropertyCheck};
pub use rates::{convergence_rates, decay_analysis, DecayFit, RateRow, RateTable};
pub use run::{run_experiment, table_from_runs, Manifest, RunRecord};
