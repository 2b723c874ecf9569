//! Train a random-features model on sphere data and recover its training set.
//!
//! Usage: `cargo run --release --example reconstruct_synthetic [d n p seed]`

use std::error::Error;

use reconlaw::datagen::synthetic_dataset;
use reconlaw::features::{sample_rf_weights, train_rf, Activation};
use reconlaw::metrics::{assignment_rho, span_residual};
use reconlaw::numkit::RngStream;
use reconlaw::recon::{reconstruct, ReconConfig, ReconProblem};

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let arg = |i: usize, default: usize| args.get(i).copied().unwrap_or(default);
    let (d, n) = (arg(0, 20), arg(1, 4));
    let p = arg(2, 10 * d * n);
    let seed = arg(3, 0) as u64;

    let mut data_rng = RngStream::derive(seed, &[0]);
    let data = synthetic_dataset(&mut data_rng, n, d)?;
    let weights = sample_rf_weights(&mut RngStream::derive(seed, &[1]), p, d)?;
    let model = train_rf(weights, Activation::relu(), data.x(), data.y())?;

    let problem = ReconProblem::new(&model, model.readout_targets(), n)?;
    // the default step is tuned for d = 100; the angular step grows like step/d
    let config = ReconConfig { step: 0.2 * d as f64, max_iter: 50_000, ..ReconConfig::default() };
    let out = reconstruct(&problem, &config, &mut RngStream::derive(seed, &[2]))?;
    for t in out.trace.iter().step_by((out.trace.len() / 10).max(1)) {
        println!("iter {:>7}  loss {:.3e}  {:>8.0} ms", t.iteration, t.normalized_loss, t.wall_ms);
    }

    let rho = assignment_rho(data.x(), &out.x_hat, true)?.rho;
    let residual = span_residual(&model, data.x(), &out.x_hat)?;
    println!(
        "d={d} n={n} p={p}: converged={} after {} iterations, rho={rho:.4}, residual={residual:.2e}",
        out.converged, out.iterations
    );
    Ok(())
}
