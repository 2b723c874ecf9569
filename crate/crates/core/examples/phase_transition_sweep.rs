//! A small phase-transition sweep: training error drops at `p ≈ n`,
//! reconstruction error only past `p ≈ dn`. Writes `records.csv` and
//! `aggregates.csv`.
//!
//! Usage: `cargo run --release --example phase_transition_sweep [out_dir]`

use std::error::Error;

use reconlaw::harness::{parse_p_grid, run_sweep, write_sweep_outputs, SweepConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("phase_transition").display().to_string());
    let mut config = SweepConfig {
        d: 10,
        n: 5,
        p_grid: parse_p_grid("n,2n,0.5dn,1dn,4dn,10dn")?,
        seeds: vec![0, 1, 2],
        out_dir: out.into(),
        ..SweepConfig::default()
    };
    // the default step suits d ≈ 100; the angular step scales like step/d
    config.recon.step = 2.0;
    config.recon.max_iter = 20_000;
    config.validate()?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let outcome = run_sweep(&config, jobs)?;
    write_sweep_outputs(&config.out_dir, &outcome)?;

    println!("{:>6} {:>10} {:>10} {:>10}", "p", "train_mse", "rho", "residual");
    for a in &outcome.aggregates {
        println!("{:>6} {:>10.2e} {:>10.4} {:>10.2e}", a.p, a.mse_mean, a.rho_mean, a.residual_mean);
    }
    for f in &outcome.failures {
        println!("p = {} seed = {} failed at {}: {}", f.p, f.seed, f.stage, f.message);
    }
    println!("outputs in {}", config.out_dir.display());
    Ok(())
}
