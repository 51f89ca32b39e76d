//! File formats, multi-run experiments and the command-line front end for
//! the logit-Q learning dynamics in [`logitq_core`].

pub mod cli;
pub mod experiment;
pub mod io;

pub use experiment::{run_experiment, summarize, ExperimentBundle, ExperimentConfig, RunRecord, Summary};
