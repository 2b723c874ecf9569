//! CIFAR-10 binary batches: 3073-byte records, label byte then the red,
//! green and blue 32×32 planes.

use std::path::Path;

use crate::datagen::{Dataset, DatasetMeta, PixelNormalization};
use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_PIXELS: usize = 3 * CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR_RECORD_LEN: usize = CIFAR_PIXELS + 1;
pub const CIFAR_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

/// Coordinate standard deviations are floored here before dividing.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CifarRecord {
    pub label: u8,
    pixels: Vec<u8>,
}

impl CifarRecord {
    pub fn new(label: u8, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != CIFAR_PIXELS {
            return Err(Error::shape("CifarRecord pixels", CIFAR_PIXELS, pixels.len()));
        }
        if label as usize >= CIFAR_CLASSES.len() {
            return Err(Error::InvalidArgument(format!("label {label} out of range")));
        }
        Ok(Self { label, pixels })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

pub fn parse_cifar_batch(bytes: &[u8]) -> Result<Vec<CifarRecord>> {
    let tail = bytes.len() % CIFAR_RECORD_LEN;
    if tail != 0 {
        return Err(Error::Format {
            offset: bytes.len() - tail,
            message: format!("trailing {tail} bytes do not form a {CIFAR_RECORD_LEN}-byte record"),
        });
    }
    bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .enumerate()
        .map(|(i, chunk)| {
            let label = chunk[0];
            if label as usize >= CIFAR_CLASSES.len() {
                return Err(Error::Format {
                    offset: i * CIFAR_RECORD_LEN,
                    message: format!("label byte {label} out of range"),
                });
            }
            Ok(CifarRecord {
                label,
                pixels: chunk[1..].to_vec(),
            })
        })
        .collect()
}

pub fn serialize_cifar_batch(records: &[CifarRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(records.len() * CIFAR_RECORD_LEN);
    for r in records {
        out.push(r.label);
        out.extend_from_slice(&r.pixels);
    }
    out
}

/// Reads and concatenates batch files in the given order.
pub fn read_cifar_files<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<CifarRecord>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(parse_cifar_batch(&std::fs::read(p)?)?);
    }
    Ok(all)
}

/// The five training batches of the standard binary distribution under `dir`.
pub fn training_batch_paths(dir: impl AsRef<Path>) -> Vec<std::path::PathBuf> {
    (1..=5)
        .map(|i| dir.as_ref().join(format!("data_batch_{i}.bin")))
        .collect()
}

fn first_of_class(records: &[CifarRecord], class: u8, count: usize) -> Result<Vec<&CifarRecord>> {
    let picked: Vec<&CifarRecord> = records.iter().filter(|r| r.label == class).take(count).collect();
    if picked.len() < count {
        return Err(Error::InsufficientClass {
            class,
            found: picked.len(),
            needed: count,
        });
    }
    Ok(picked)
}

/// Scales bytes to [0, 1], standardizes each coordinate with statistics of
/// the selected rows, then rescales each row to norm `√d`.
fn standardize_onto_sphere(records: &[&CifarRecord]) -> (DenseMatrix, PixelNormalization) {
    let n = records.len();
    let d = CIFAR_PIXELS;
    let mut x = DenseMatrix::from_fn(n, d, |i, j| records[i].pixels[j] as f64 / 255.0);
    let mut mean = vec![0.0; d];
    for row in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut std = vec![0.0; d];
    for row in x.row_iter() {
        for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt().max(STD_FLOOR));
    for i in 0..n {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) / std[j];
        }
    }
    let radius = (d as f64).sqrt();
    let row_scale: Vec<f64> = x
        .row_norms()
        .into_iter()
        .map(|nrm| if nrm > 0.0 { radius / nrm } else { 1.0 })
        .collect();
    x.normalize_rows(radius);
    (
        x,
        PixelNormalization {
            mean,
            std,
            row_scale,
            channels: 3,
            width: CIFAR_SIDE,
            height: CIFAR_SIDE,
        },
    )
}

/// Binary task: the first `n/2` records of `class_a` (label −1) followed by
/// the first `n/2` of `class_b` (label +1), in scan order.
pub fn build_cifar_subset(records: &[CifarRecord], class_a: u8, class_b: u8, n: usize) -> Result<Dataset> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("subset size must be even and positive, got {n}")));
    }
    if class_a == class_b {
        return Err(Error::InvalidArgument("the two classes must differ".into()));
    }
    let half = n / 2;
    let mut picked = first_of_class(records, class_a, half)?;
    picked.extend(first_of_class(records, class_b, half)?);
    let (x, normalization) = standardize_onto_sphere(&picked);
    let y = DenseMatrix::from_fn(n, 1, |i, _| if i < half { -1.0 } else { 1.0 });
    Dataset::new(
        x,
        y,
        DatasetMeta {
            source: "cifar-binary".into(),
            seed: None,
            class_names: [class_a, class_b].iter().map(|&c| class_name(c)).collect(),
            normalization: Some(normalization),
        },
    )
}

/// Multi-class task: `per_class` records of each listed class, grouped by
/// class in the listed order, with one-hot 10-dimensional targets.
pub fn one_hot_labels(records: &[CifarRecord], classes: &[u8], per_class: usize) -> Result<Dataset> {
    if classes.is_empty() || per_class == 0 {
        return Err(Error::InvalidArgument("need at least one class and one record per class".into()));
    }
    let mut picked = Vec::with_capacity(classes.len() * per_class);
    for &c in classes {
        picked.extend(first_of_class(records, c, per_class)?);
    }
    let (x, normalization) = standardize_onto_sphere(&picked);
    let y = DenseMatrix::from_fn(picked.len(), CIFAR_CLASSES.len(), |i, j| {
        if picked[i].label as usize == j {
            1.0
        } else {
            0.0
        }
    });
    Dataset::new(
        x,
        y,
        DatasetMeta {
            source: "cifar-onehot".into(),
            seed: None,
            class_names: classes.iter().map(|&c| class_name(c)).collect(),
            normalization: Some(normalization),
        },
    )
}

fn class_name(c: u8) -> String {
    CIFAR_CLASSES.get(c as usize).copied().unwrap_or("unknown").to_string()
}
