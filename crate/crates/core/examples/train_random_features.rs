//! Fit random-features regressors of growing width to the same data and
//! watch the training error vanish once `p ≥ n`.
//!
//! Usage: `cargo run --release --example train_random_features [d n]`

use std::error::Error;

use reconlaw::datagen::synthetic_dataset;
use reconlaw::features::{sample_rf_weights, train_rf, Activation};
use reconlaw::metrics::training_mse;
use reconlaw::numkit::{DenseMatrix, RngStream};

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let d = args.first().copied().unwrap_or(20);
    let n = args.get(1).copied().unwrap_or(10);
    let data = synthetic_dataset(&mut RngStream::new(0), n, d)?;

    for p in [n, 2 * n, d * n, 10 * d * n] {
        let weights = sample_rf_weights(&mut RngStream::derive(0, &[p as u64]), p, d)?;
        let model = train_rf(weights, Activation::relu(), data.x(), data.y())?;
        let theta: &DenseMatrix = model.theta_star();
        let norm = theta.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
        println!(
            "p = {p:>6}: train_mse = {:.2e}, |theta*| = {norm:.4}",
            training_mse(&model, data.x(), data.y())?
        );
    }

    // p < n cannot interpolate and is rejected
    let narrow = sample_rf_weights(&mut RngStream::new(1), n / 2, d)?;
    if let Err(e) = train_rf(narrow, Activation::relu(), data.x(), data.y()) {
        println!("p = {:>6}: {e}", n / 2);
    }
    Ok(())
}
