//! Train a two-layer ReLU network with full-batch gradient descent on
//! one-hot targets, then reconstruct its training set from the change in
//! the last layer.
//!
//! Usage: `cargo run --release --example two_layer_reconstruction [d n k seeds step max_steps]`
//!
//! The defaults give `p = k·h = 4dn` last-layer parameters.

use std::error::Error;

use reconlaw::harness::{parse_p_grid, run_sweep, ModelKind, SweepConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let d: usize = arg(0, "30").parse()?;
    let n: usize = arg(1, "6").parse()?;
    let k: usize = arg(2, "3").parse()?;
    let seeds: u64 = arg(3, "3").parse()?;

    let mut config = SweepConfig {
        d,
        n,
        k,
        model: ModelKind::TwoLayer,
        p_grid: parse_p_grid("4dn")?,
        seeds: (0..seeds).collect(),
        ..SweepConfig::default()
    };
    // desk-scale schedule: a larger step than the full-scale default and an
    // early stop once the labels are fitted
    config.training.step = arg(4, "1e-3").parse()?;
    config.training.max_steps = arg(5, "500000").parse()?;
    config.training.target_mse = 1e-6;
    config.recon.max_iter = 20_000;
    config.validate()?;

    let outcome = run_sweep(&config, 1)?;
    for r in &outcome.records {
        println!(
            "seed {}: p = {} (width {}), train_mse = {:.2e}, rho = {:.4}, residual = {:.2e}, converged = {} in {} iterations",
            r.seed,
            r.p,
            r.p / k,
            r.train_mse,
            r.rho,
            r.residual,
            r.converged,
            r.recon_iters
        );
    }
    for f in &outcome.failures {
        println!("seed {} failed at {}: {}", f.seed, f.stage, f.message);
    }
    Ok(())
}
