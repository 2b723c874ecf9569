//! Read CIFAR-10 binary batches, build a balanced frog-vs-truck subset on
//! the `√3072` sphere and export the selected images as a PPM grid.
//!
//! Usage: `cargo run --release --example cifar_subset [cifar_dir] [n]`
//!
//! Without a directory a small batch of random records stands in for the
//! real files.

use std::error::Error;

use reconlaw::datagen::cifar::{read_cifar_files, training_batch_paths, CIFAR_PIXELS};
use reconlaw::datagen::{build_cifar_subset, parse_cifar_batch, serialize_cifar_batch, CifarRecord, Image};
use reconlaw::numkit::RngStream;

const FROG: u8 = 6;
const TRUCK: u8 = 9;

fn stand_in_records(count: usize) -> Result<Vec<CifarRecord>, Box<dyn Error>> {
    let mut rng = RngStream::new(0);
    let records = (0..count)
        .map(|i| {
            let pixels = (0..CIFAR_PIXELS).map(|_| rng.below(256) as u8).collect();
            CifarRecord::new((i % 10) as u8, pixels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    // round trip through the on-disk format
    Ok(parse_cifar_batch(&serialize_cifar_batch(&records))?)
}

fn main() -> Result<(), Box<dyn Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let records = match args.first() {
        Some(dir) => read_cifar_files(&training_batch_paths(dir))?,
        None => stand_in_records(100)?,
    };
    println!("{} records loaded", records.len());

    let data = build_cifar_subset(&records, FROG, TRUCK, n)?;
    for i in 0..data.n() {
        let norm = data.x().row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("row {i:>2}: label {:+.0}, norm {norm:.10}", data.y().get(i, 0));
    }

    let tiles = (0..data.n())
        .map(|i| data.render_row(data.x().row(i), i))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = Image::grid(&tiles, n.min(10), 1)?;
    let out = std::env::temp_dir().join("cifar_subset.ppm");
    grid.write_ppm(&mut std::io::BufWriter::new(std::fs::File::create(&out)?))?;
    println!("wrote {}", out.display());
    Ok(())
}
