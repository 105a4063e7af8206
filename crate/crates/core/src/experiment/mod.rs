//! Experiment commands shared by the command-line tool and the Python bindings.
//!
//! Every command is a pure function of its configuration and seeds: rerunning
//! it writes byte-identical reports.

mod commands;
mod config;

pub use commands::{
    ablate, baseline_run, ensemble_run, evaluate, export_embeddings, gen_synth, noise, prepare_out_dir, sweep, train,
    write_report, Outcome, SeedFailure,
};
pub use config::{dataset_summary, RunConfig, SweepParam};
