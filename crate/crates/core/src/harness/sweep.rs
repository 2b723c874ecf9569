use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, cifar, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::features::{
    assumption_check, hermite_coefficients, sample_rf_weights, train_rf, train_two_layer_until, Activation, SavedModel,
    TwoLayerModel,
};
use crate::harness::config::{DataSource, ModelKind, SweepConfig};
use crate::metrics::{assignment_rho, span_residual, training_mse};
use crate::numkit::{DenseMatrix, RngStream};
use crate::recon::{reconstruct, ReconOutcome, ReconProblem};

// Stream labels: every random draw in a cell comes from its own stream, so
// nothing depends on which cells ran before or alongside it.
const DATA_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;
const RECON_STREAM: u64 = 3;

/// One row of `records.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub train_mse: f64,
    pub rho: f64,
    pub residual: f64,
    pub converged: bool,
    pub recon_iters: usize,
    pub train_ms: f64,
    pub recon_ms: f64,
}

impl SweepRecord {
    /// Equality on everything except wall-clock times.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            train_ms: 0.0,
            recon_ms: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Data,
    Train,
    Reconstruct,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Data => "data",
            Stage::Train => "train",
            Stage::Reconstruct => "reconstruct",
            Stage::Evaluate => "evaluate",
        })
    }
}

/// A cell that stopped with an error; one row of `failures.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub stage: Stage,
    pub message: String,
}

/// One row of `aggregates.csv`: population mean and standard deviation
/// over the seeds that finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub p: usize,
    pub rho_mean: f64,
    pub rho_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub residual_mean: f64,
    pub residual_std: f64,
    pub n_seeds: usize,
}

/// Training data for one seed.
pub fn cell_dataset(config: &SweepConfig, seed: u64) -> Result<Dataset> {
    match config.source {
        DataSource::Synthetic => synthetic_cell_data(config, seed),
        DataSource::CifarBinary | DataSource::CifarOnehot => {
            let dir = config
                .cifar_dir
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("CIFAR sources need cifar_dir".into()))?;
            let records = cifar::read_cifar_files(&cifar::training_batch_paths(dir))?;
            cifar_cell_data(config, &records)
        }
    }
}

fn synthetic_cell_data(config: &SweepConfig, seed: u64) -> Result<Dataset> {
    let mut rng = RngStream::derive(seed, &[DATA_STREAM]);
    let mut ds = if config.k == 1 {
        datagen::synthetic_dataset(&mut rng, config.n, config.d)?
    } else {
        let x = datagen::sphere_uniform(&mut rng, config.n, config.d)?;
        Dataset::new(
            x,
            datagen::round_robin_one_hot(config.n, config.k),
            DatasetMeta {
                source: "synthetic-sphere-onehot".into(),
                ..Default::default()
            },
        )?
    };
    ds.meta.seed = Some(seed);
    Ok(ds)
}

fn cifar_cell_data(config: &SweepConfig, records: &[cifar::CifarRecord]) -> Result<Dataset> {
    match config.source {
        DataSource::CifarBinary => cifar::build_cifar_subset(records, config.classes[0], config.classes[1], config.n),
        _ => cifar::one_hot_labels(records, &config.classes, config.n / config.classes.len()),
    }
}

/// Trains the configured model with `p` last-layer parameters.
///
/// For two-layer networks `p = k·h`, so the hidden width is `p / k`.
pub fn train_cell_model(config: &SweepConfig, data: &Dataset, p: usize, seed: u64) -> Result<SavedModel> {
    let act = config.activation()?;
    let mut rng = RngStream::derive(seed, &[MODEL_STREAM, p as u64]);
    match config.model {
        ModelKind::Rf => {
            let weights = sample_rf_weights(&mut rng, p, data.d())?;
            Ok(SavedModel::RandomFeatures(train_rf(weights, act, data.x(), data.y())?))
        }
        ModelKind::TwoLayer => {
            let k = data.k();
            if !p.is_multiple_of(k) {
                return Err(Error::InvalidArgument(format!("p = {p} is not a multiple of k = {k}")));
            }
            let init = TwoLayerModel::init(&mut rng, data.d(), p / k, k, act)?;
            let t = &config.training;
            let (model, _) = train_two_layer_until(init, data.x(), data.y(), t.step, t.max_steps, t.target_mse)?;
            Ok(SavedModel::TwoLayer(model))
        }
    }
}

/// Whether reconstructions should be matched up to sign for `act`.
pub fn flips_for(act: &Activation) -> Result<bool> {
    let profile = hermite_coefficients(act, crate::features::hermite::DEFAULT_MAX_ORDER, crate::features::hermite::DEFAULT_QUAD_POINTS)?;
    Ok(assumption_check(&profile).sign_ambiguity_warning)
}

/// Candidate rows recovered from `model` for `n` training samples.
pub fn reconstruct_cell(config: &SweepConfig, model: &SavedModel, n: usize, p: usize, seed: u64) -> Result<ReconOutcome> {
    let problem = ReconProblem::new(model.feature_map(), model.readout_targets(), n)?;
    reconstruct(&problem, &config.recon, &mut RngStream::derive(seed, &[RECON_STREAM, p as u64]))
}

fn predictor(model: &SavedModel) -> &dyn crate::features::Predictor {
    match model {
        SavedModel::RandomFeatures(m) => m,
        SavedModel::TwoLayer(m) => m,
    }
}

/// Generate, train, reconstruct and evaluate one `(p, seed)` cell.
pub fn run_cell(config: &SweepConfig, p: usize, seed: u64) -> std::result::Result<SweepRecord, CellFailure> {
    let fail = |stage: Stage, e: Error| CellFailure {
        d: config.d,
        n: config.n,
        p,
        seed,
        stage,
        message: e.to_string(),
    };
    let data = cell_dataset(config, seed).map_err(|e| fail(Stage::Data, e))?;
    run_cell_on(config, &data, p, seed)
}

/// [`run_cell`] on already generated data.
pub fn run_cell_on(config: &SweepConfig, data: &Dataset, p: usize, seed: u64) -> std::result::Result<SweepRecord, CellFailure> {
    let fail = |stage: Stage, e: Error| CellFailure {
        d: data.d(),
        n: data.n(),
        p,
        seed,
        stage,
        message: e.to_string(),
    };
    let started = Instant::now();
    let model = train_cell_model(config, data, p, seed).map_err(|e| fail(Stage::Train, e))?;
    let train_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let outcome = reconstruct_cell(config, &model, data.n(), p, seed).map_err(|e| fail(Stage::Reconstruct, e))?;
    let recon_ms = started.elapsed().as_secs_f64() * 1e3;

    let evaluate = || -> Result<(f64, f64, f64)> {
        let flips = flips_for(model.feature_map().activation())?;
        let rho = assignment_rho(data.x(), &outcome.x_hat, flips)?.rho;
        let residual = span_residual(model.feature_map(), data.x(), &outcome.x_hat)?;
        let mse = training_mse(predictor(&model), data.x(), data.y())?;
        Ok((rho, residual, mse))
    };
    let (rho, residual, train_mse) = evaluate().map_err(|e| fail(Stage::Evaluate, e))?;
    Ok(SweepRecord {
        d: data.d(),
        n: data.n(),
        p,
        seed,
        train_mse,
        rho,
        residual,
        converged: outcome.converged,
        recon_iters: outcome.iterations,
        train_ms,
        recon_ms,
    })
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Successful cells ordered by `(p, seed)` in grid order.
    pub records: Vec<SweepRecord>,
    pub failures: Vec<CellFailure>,
    pub aggregates: Vec<AggregateRow>,
}

/// Runs every `(p, seed)` cell on a pool of `jobs` workers.
///
/// Results are collected in grid order whatever the completion order, so
/// records and aggregates do not depend on `jobs`.
pub fn run_sweep(config: &SweepConfig, jobs: usize) -> Result<SweepOutcome> {
    config.validate()?;
    let grid = config.resolved_grid()?;
    let datasets: Vec<std::result::Result<Dataset, CellFailure>> = seed_datasets(config)
        .into_iter()
        .zip(&config.seeds)
        .map(|(r, &seed)| {
            r.map_err(|e| CellFailure {
                d: config.d,
                n: config.n,
                p: 0,
                seed,
                stage: Stage::Data,
                message: e.to_string(),
            })
        })
        .collect();

    let cells: Vec<(usize, usize)> = grid
        .iter()
        .flat_map(|&p| (0..config.seeds.len()).map(move |si| (p, si)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<std::result::Result<SweepRecord, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, si)| match &datasets[si] {
                Ok(data) => run_cell_on(config, data, p, config.seeds[si]),
                Err(f) => Err(CellFailure { p, ..f.clone() }),
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    let aggregates = aggregate(&records);
    Ok(SweepOutcome {
        records,
        failures,
        aggregates,
    })
}

/// Data depends only on the seed, so it is built once per seed; CIFAR
/// files are read once for the whole sweep.
fn seed_datasets(config: &SweepConfig) -> Vec<Result<Dataset>> {
    match config.source {
        DataSource::Synthetic => config.seeds.iter().map(|&s| synthetic_cell_data(config, s)).collect(),
        DataSource::CifarBinary | DataSource::CifarOnehot => {
            let records = config
                .cifar_dir
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("CIFAR sources need cifar_dir".into()))
                .and_then(|dir| cifar::read_cifar_files(&cifar::training_batch_paths(dir)));
            config
                .seeds
                .iter()
                .map(|_| match &records {
                    Ok(r) => cifar_cell_data(config, r),
                    Err(e) => Err(Error::InvalidArgument(e.to_string())),
                })
                .collect()
        }
    }
}

/// Per-`p` statistics in ascending `p`, accumulating in record order.
pub fn aggregate(records: &[SweepRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<usize, Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.p).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(p, rs)| {
            let stats = |f: fn(&SweepRecord) -> f64| {
                let k = rs.len() as f64;
                let mean = rs.iter().map(|r| f(r)).sum::<f64>() / k;
                let var = rs.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / k;
                (mean, var.sqrt())
            };
            let (rho_mean, rho_std) = stats(|r| r.rho);
            let (mse_mean, mse_std) = stats(|r| r.train_mse);
            let (residual_mean, residual_std) = stats(|r| r.residual);
            AggregateRow {
                p,
                rho_mean,
                rho_std,
                mse_mean,
                mse_std,
                residual_mean,
                residual_std,
                n_seeds: rs.len(),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const RECORD_COLUMNS: [&str; 11] = [
    "d", "n", "p", "seed", "train_mse", "rho", "residual", "converged", "recon_iters", "train_ms", "recon_ms",
];
pub const AGGREGATE_COLUMNS: [&str; 8] = [
    "p", "rho_mean", "rho_std", "mse_mean", "mse_std", "residual_mean", "residual_std", "n_seeds",
];
const FAILURE_COLUMNS: [&str; 6] = ["d", "n", "p", "seed", "stage", "message"];

/// Writes `records.csv` and `aggregates.csv`, plus `failures.csv` when
/// some cells failed.
pub fn write_sweep_outputs(dir: impl AsRef<Path>, outcome: &SweepOutcome) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("records.csv"), &outcome.records, &RECORD_COLUMNS)?;
    write_csv(&dir.join("aggregates.csv"), &outcome.aggregates, &AGGREGATE_COLUMNS)?;
    let failures = dir.join("failures.csv");
    if outcome.failures.is_empty() {
        if failures.exists() {
            std::fs::remove_file(failures)?;
        }
    } else {
        write_csv(&failures, &outcome.failures, &FAILURE_COLUMNS)?;
    }
    Ok(())
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    read_csv(path)
}

pub fn read_aggregates_csv(path: impl AsRef<Path>) -> Result<Vec<AggregateRow>> {
    read_csv(path)
}

fn read_csv<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    csv::Reader::from_path(path)?.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Candidate rows as an unlabeled dataset carrying the source's metadata,
/// so exported images use the same pixel normalization.
pub fn reconstruction_dataset(x_hat: DenseMatrix, like: &DatasetMeta) -> Result<Dataset> {
    Dataset::unlabeled(
        x_hat,
        DatasetMeta {
            source: format!("reconstruction-of-{}", like.source),
            ..like.clone()
        },
    )
}
