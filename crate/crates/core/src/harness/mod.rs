//! Experiment orchestration: sweep configuration, per-cell runs, CSV
//! outputs and the command-line front end.

pub mod cli;
mod config;
mod sweep;

pub use config::{parse_p_grid, DataSource, ModelKind, PSpec, PUnit, SweepConfig, TrainingConfig, ENV_JOBS, ENV_OUT};
pub use sweep::{
    aggregate, cell_dataset, flips_for, read_aggregates_csv, read_records_csv, reconstruct_cell, reconstruction_dataset,
    run_cell, run_cell_on, run_sweep, train_cell_model, write_sweep_outputs, AggregateRow, CellFailure, Stage,
    SweepOutcome, SweepRecord, AGGREGATE_COLUMNS, RECORD_COLUMNS,
};
