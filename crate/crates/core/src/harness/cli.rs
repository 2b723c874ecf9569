use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datagen::{Dataset, Image};
use crate::error::{Error, Result};
use crate::features::{assumption_check, hermite_coefficients, ActivationKind, SavedModel};
use crate::harness::config::{parse_p_grid, DataSource, ModelKind, SweepConfig, ENV_JOBS, ENV_OUT};
use crate::harness::sweep::{
    cell_dataset, flips_for, reconstruct_cell, reconstruction_dataset, run_sweep, train_cell_model, write_sweep_outputs,
};
use crate::metrics::{assignment_rho, span_residual, training_mse, MetricsReport};
use crate::recon::{reconstruct_from, write_trace_csv, ReconProblem, ReconState};

#[derive(Parser, Debug)]
#[command(name = "reconlaw", version, about = "Train random-features models and reconstruct their training data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Sweep configuration (JSON); flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [env: RECONLAW_OUT].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_activation)]
    activation: Option<ActivationKind>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a training set and write `dataset.rlds`.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        cifar_dir: Option<PathBuf>,
    },
    /// Fit a model with `p` last-layer parameters and write `model.rlrm`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Recover the training rows from a saved model.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Number of rows to recover.
        #[arg(long)]
        n: usize,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Step size (the configured default suits d ≈ 100; smaller inputs need smaller steps).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Compare a reconstruction with the training set and print a JSON report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        reconstruction: PathBuf,
    },
    /// Run every (p, seed) cell of a sweep and write records and aggregates.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid such as `0.5n,n,2n,1dn,10dn`.
        #[arg(long)]
        p_grid: Option<String>,
        /// Worker threads [env: RECONLAW_JOBS; default: available cores].
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print Hermite coefficients of an activation and the sign-identifiability check.
    Hermite {
        #[arg(long, value_parser = parse_activation)]
        activation: ActivationKind,
        #[arg(long, default_value_t = crate::features::hermite::DEFAULT_MAX_ORDER)]
        max_order: usize,
        #[arg(long, default_value_t = crate::features::hermite::DEFAULT_QUAD_POINTS)]
        quad_points: usize,
    },
    /// Write a PPM grid: rows of originals, each followed by the matched reconstructions.
    ExportImages {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        reconstruction: PathBuf,
        /// Output image file.
        #[arg(long)]
        out: PathBuf,
        /// Model used to decide whether matching allows sign flips (default: allow).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        columns: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SourceArg {
    Synthetic,
    CifarBinary,
    CifarOnehot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Rf,
    TwoLayer,
}

fn parse_activation(s: &str) -> std::result::Result<ActivationKind, String> {
    match s.parse::<crate::features::Activation>() {
        Ok(a) => Ok(a.kind()),
        Err(e) => Err(format!("{e} (expected relu, tanh, relu+tanh or identity)")),
    }
}

impl Common {
    fn config(&self) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(p) => SweepConfig::load(p)?,
            None => SweepConfig::default(),
        };
        if let Some(a) = self.activation {
            cfg.activation = a;
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Ok(dir) = std::env::var(ENV_OUT) {
            cfg.out_dir = PathBuf::from(dir);
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        Ok(cfg)
    }

    fn seed(&self, cfg: &SweepConfig) -> u64 {
        self.seed.unwrap_or(cfg.seeds[0])
    }
}

fn jobs(flag: Option<usize>) -> Result<usize> {
    if let Some(j) = flag {
        return Ok(j.max(1));
    }
    match std::env::var(ENV_JOBS) {
        Ok(v) => v
            .parse::<usize>()
            .map(|j| j.max(1))
            .map_err(|_| Error::InvalidArgument(format!("{ENV_JOBS}={v} is not a worker count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn predictor(model: &SavedModel) -> &dyn crate::features::Predictor {
    match model {
        SavedModel::RandomFeatures(m) => m,
        SavedModel::TwoLayer(m) => m,
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::GenData {
            common,
            source,
            d,
            n,
            k,
            cifar_dir,
        } => {
            let mut cfg = common.config()?;
            if let Some(s) = source {
                cfg.source = match s {
                    SourceArg::Synthetic => DataSource::Synthetic,
                    SourceArg::CifarBinary => DataSource::CifarBinary,
                    SourceArg::CifarOnehot => DataSource::CifarOnehot,
                };
                if cfg.source != DataSource::Synthetic && d.is_none() {
                    cfg.d = crate::datagen::cifar::CIFAR_PIXELS;
                }
                if cfg.source == DataSource::CifarOnehot && k.is_none() {
                    cfg.k = 10;
                }
            }
            cfg.d = d.unwrap_or(cfg.d);
            cfg.n = n.unwrap_or(cfg.n);
            cfg.k = k.unwrap_or(cfg.k);
            if cifar_dir.is_some() {
                cfg.cifar_dir = cifar_dir;
            }
            cfg.validate()?;
            let seed = common.seed(&cfg);
            let data = cell_dataset(&cfg, seed)?;
            ensure_dir(&cfg.out_dir)?;
            let path = cfg.out_dir.join("dataset.rlds");
            data.save(&path)?;
            println!("wrote {} (n = {}, d = {}, k = {})", path.display(), data.n(), data.d(), data.k());
            Ok(0)
        }
        Command::Train { common, data, p, model } => {
            let mut cfg = common.config()?;
            if let Some(m) = model {
                cfg.model = match m {
                    ModelArg::Rf => ModelKind::Rf,
                    ModelArg::TwoLayer => ModelKind::TwoLayer,
                };
            }
            let seed = common.seed(&cfg);
            let data = Dataset::load(&data)?;
            let trained = train_cell_model(&cfg, &data, p, seed)?;
            let mse = training_mse(predictor(&trained), data.x(), data.y())?;
            ensure_dir(&cfg.out_dir)?;
            let path = cfg.out_dir.join("model.rlrm");
            trained.save(&path)?;
            println!("wrote {} (p = {p}, train_mse = {mse:.3e})", path.display());
            Ok(0)
        }
        Command::Reconstruct {
            common,
            model,
            n,
            resume,
            max_iter,
            step,
        } => {
            let mut cfg = common.config()?;
            if let Some(m) = max_iter {
                cfg.recon.max_iter = m;
            }
            if let Some(s) = step {
                cfg.recon.step = s;
            }
            cfg.recon.validate()?;
            let seed = common.seed(&cfg);
            let saved = SavedModel::load(&model)?;
            let p = saved.feature_map().feature_dim();
            let outcome = match resume {
                Some(path) => {
                    let problem = ReconProblem::new(saved.feature_map(), saved.readout_targets(), n)?;
                    reconstruct_from(&problem, &cfg.recon, ReconState::load(path)?)?
                }
                None => reconstruct_cell(&cfg, &saved, n, p, seed)?,
            };
            ensure_dir(&cfg.out_dir)?;
            let meta = crate::datagen::DatasetMeta {
                source: "reconstruction".into(),
                seed: Some(seed),
                ..Default::default()
            };
            reconstruction_dataset(outcome.x_hat.clone(), &meta)?.save(cfg.out_dir.join("reconstruction.rlds"))?;
            write_trace_csv(std::fs::File::create(cfg.out_dir.join("trace.csv"))?, &outcome.trace)?;
            outcome.state.save(cfg.out_dir.join("checkpoint.rlrm"))?;
            println!(
                "converged = {}, iterations = {}, normalized loss = {:.3e}",
                outcome.converged, outcome.iterations, outcome.final_loss
            );
            Ok(0)
        }
        Command::Evaluate {
            common,
            data,
            model,
            reconstruction,
        } => {
            let data = Dataset::load(&data)?;
            let saved = SavedModel::load(&model)?;
            let recon = Dataset::load(&reconstruction)?;
            let flips = flips_for(saved.feature_map().activation())?;
            let assignment = assignment_rho(data.x(), recon.x(), flips)?;
            let residual = span_residual(saved.feature_map(), data.x(), recon.x())?;
            let mse = training_mse(predictor(&saved), data.x(), data.y())?;
            let report = MetricsReport::new(assignment, residual, mse);
            let json = serde_json::to_string_pretty(&report)?;
            println!("{json}");
            let out = common.out.clone().or_else(|| std::env::var(ENV_OUT).ok().map(PathBuf::from));
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                std::fs::write(dir.join("metrics.json"), json)?;
            }
            Ok(0)
        }
        Command::Sweep { common, p_grid, jobs: j } => {
            let mut cfg = common.config()?;
            if let Some(g) = p_grid {
                cfg.p_grid = parse_p_grid(&g)?;
            }
            cfg.validate()?;
            let workers = jobs(j)?;
            let outcome = run_sweep(&cfg, workers)?;
            write_sweep_outputs(&cfg.out_dir, &outcome)?;
            std::fs::write(cfg.out_dir.join("config.json"), cfg.to_json()?)?;
            println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>6}", "p", "rho_mean", "rho_std", "mse_mean", "resid_mean", "seeds");
            for a in &outcome.aggregates {
                println!(
                    "{:>8} {:>10.4} {:>10.4} {:>10.2e} {:>10.2e} {:>6}",
                    a.p, a.rho_mean, a.rho_std, a.mse_mean, a.residual_mean, a.n_seeds
                );
            }
            for f in &outcome.failures {
                eprintln!("cell p = {} seed = {} failed at {}: {}", f.p, f.seed, f.stage, f.message);
            }
            println!(
                "{} records written to {}",
                outcome.records.len(),
                cfg.out_dir.join("records.csv").display()
            );
            Ok(if outcome.failures.is_empty() { 0 } else { 1 })
        }
        Command::Hermite {
            activation,
            max_order,
            quad_points,
        } => {
            let act = crate::features::Activation::from_kind(activation)
                .ok_or_else(|| Error::InvalidArgument("custom activation".into()))?;
            let profile = hermite_coefficients(&act, max_order, quad_points)?;
            for (l, mu) in profile.coefficients.iter().enumerate() {
                println!("mu_{l} = {mu:+.12e}");
            }
            println!("E[phi^2] = {:.12e}", profile.second_moment);
            println!("{}", assumption_check(&profile));
            Ok(0)
        }
        Command::ExportImages {
            data,
            reconstruction,
            out,
            model,
            columns,
        } => {
            let data = Dataset::load(&data)?;
            let recon = Dataset::load(&reconstruction)?;
            let flips = match model {
                Some(m) => flips_for(SavedModel::load(m)?.feature_map().activation())?,
                None => true,
            };
            let grid = comparison_grid(&data, recon.x(), flips, columns)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            grid.write_ppm(&mut std::io::BufWriter::new(std::fs::File::create(&out)?))?;
            println!("wrote {} ({}x{})", out.display(), grid.width, grid.height);
            Ok(0)
        }
    }
}

/// Originals and their matched (and, if allowed, sign-corrected)
/// reconstructions in alternating image rows.
pub fn comparison_grid(data: &Dataset, x_hat: &crate::numkit::DenseMatrix, flips: bool, columns: usize) -> Result<Image> {
    let columns = columns.max(1);
    let assignment = assignment_rho(data.x(), x_hat, flips)?;
    let mut tiles = Vec::new();
    let indices: Vec<usize> = (0..data.n()).collect();
    for chunk in indices.chunks(columns) {
        let mut originals = Vec::with_capacity(columns);
        let mut recovered = Vec::with_capacity(columns);
        for &i in chunk {
            originals.push(data.render_row(data.x().row(i), i)?);
            let sign = assignment.sign_flips[i] as f64;
            let row: Vec<f64> = x_hat.row(assignment.permutation[i]).iter().map(|v| sign * v).collect();
            recovered.push(data.render_row(&row, i)?);
        }
        let (w, h) = (originals[0].width, originals[0].height);
        originals.resize(columns, Image::blank(w, h));
        recovered.resize(columns, Image::blank(w, h));
        tiles.extend(originals);
        tiles.extend(recovered);
    }
    Image::grid(&tiles, columns, 1)
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 1 when a stage failed, 2 for usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
