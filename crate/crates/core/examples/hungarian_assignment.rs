//! Match reconstructed rows to the originals with the Hungarian algorithm,
//! with and without sign flips.
//!
//! Usage: `cargo run --example hungarian_assignment`

use std::error::Error;

use reconlaw::datagen::sphere_uniform;
use reconlaw::metrics::assignment_rho;
use reconlaw::numkit::{gaussian_matrix, RngStream};

fn main() -> Result<(), Box<dyn Error>> {
    let (n, d) = (6, 10);
    let mut rng = RngStream::new(5);
    let x = sphere_uniform(&mut rng, n, d)?;

    // shuffled, slightly perturbed copy with two rows negated
    let perm = rng.permutation(n);
    let noise = gaussian_matrix(&mut rng, n, d, 0.05)?;
    let mut x_hat = x.select_rows(&perm);
    x_hat.as_mut_slice().iter_mut().zip(noise.as_slice()).for_each(|(v, e)| *v += e);
    x_hat.normalize_rows((d as f64).sqrt());
    for i in [1, 4] {
        x_hat.row_mut(i).iter_mut().for_each(|v| *v = -*v);
    }

    println!("shuffle applied: {perm:?}");
    for flips in [false, true] {
        let a = assignment_rho(&x, &x_hat, flips)?;
        println!(
            "sign flips {}: rho = {:.4}, permutation = {:?}, signs = {:?}",
            if flips { "allowed" } else { "off    " },
            a.rho,
            a.permutation,
            a.sign_flips
        );
    }
    Ok(())
}
