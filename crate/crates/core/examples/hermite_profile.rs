//! Hermite coefficients of the built-in activations and what they imply for
//! sign identifiability.
//!
//! Usage: `cargo run --example hermite_profile [activation ...]`

use std::error::Error;

use reconlaw::features::hermite::{DEFAULT_MAX_ORDER, DEFAULT_QUAD_POINTS};
use reconlaw::features::{assumption_check, hermite_coefficients, Activation};

fn main() -> Result<(), Box<dyn Error>> {
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = ["identity", "relu", "tanh", "relu+tanh"].map(String::from).to_vec();
    }
    for name in names {
        let act: Activation = name.parse()?;
        let profile = hermite_coefficients(&act, DEFAULT_MAX_ORDER, DEFAULT_QUAD_POINTS)?;
        let mus: Vec<String> = profile.coefficients.iter().map(|m| format!("{m:+.4}")).collect();
        println!("mu_0..mu_{} = [{}]", profile.max_order(), mus.join(", "));
        println!("E[phi^2] - sum mu_l^2 = {:.2e}", profile.parseval_gap(profile.max_order()));
        println!("{}\n", assumption_check(&profile));
    }
    Ok(())
}
