//! Flip one candidate row and compare reconstruction losses. With an odd
//! activation the feature span cannot tell `x` from `−x`; adding a ReLU
//! breaks the symmetry.
//!
//! Usage: `cargo run --example sign_ambiguity`

use std::error::Error;

use reconlaw::datagen::sphere_uniform;
use reconlaw::features::{sample_rf_weights, train_rf, Activation};
use reconlaw::numkit::{gaussian_matrix, RngStream};
use reconlaw::recon::{recon_loss, ReconProblem};

fn main() -> Result<(), Box<dyn Error>> {
    let (d, n, p) = (8, 3, 64);
    for act in [Activation::tanh(), Activation::relu_plus_tanh()] {
        let mut rng = RngStream::new(11);
        let x = sphere_uniform(&mut rng, n, d)?;
        let y = gaussian_matrix(&mut rng, n, 1, 1.0)?;
        let model = train_rf(sample_rf_weights(&mut rng, p, d)?, act.clone(), &x, &y)?;
        let problem = ReconProblem::new(&model, model.readout_targets(), n)?;

        let x_hat = sphere_uniform(&mut rng, n, d)?;
        let mut flipped = x_hat.clone();
        flipped.row_mut(0).iter_mut().for_each(|v| *v = -*v);
        let before = recon_loss(&problem, &x_hat)?.normalized(&problem);
        let after = recon_loss(&problem, &flipped)?.normalized(&problem);
        println!(
            "{:>10}: loss {before:.6e} -> {after:.6e} after flipping row 0 (relative change {:.2e})",
            act.name(),
            (after - before).abs() / before
        );
    }
    Ok(())
}
