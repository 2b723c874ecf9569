use rand_chacha::ChaCha12Rng;
use rand_core::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// Identifier of the generator behind [`RngStream`], recorded in outputs.
pub const RNG_ALGORITHM: &str = "chacha12-boxmuller";

/// Seeded, splittable random stream.
///
/// ChaCha is counter based: a `(seed, stream)` pair selects an independent
/// keystream, so sweep cells can each own a stream without coordinating.
/// Normals come from the Box–Muller transform on 53-bit uniforms.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
            spare_normal: None,
        }
    }

    /// Independent stream for `(seed, label)`, e.g. one per sweep cell and purpose.
    pub fn derive(seed: u64, labels: &[u64]) -> Self {
        Self::with_stream(seed, mix_labels(labels))
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        // Lemire's multiply-shift; the bias at these sizes is far below 2^-40
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Fisher–Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            p.swap(i, j);
        }
        p
    }
}

fn mix_labels(labels: &[u64]) -> u64 {
    // splitmix64 finalizer folded over the labels
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &l in labels {
        h ^= l.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

/// `rows × cols` matrix of i.i.d. `N(0, std²)` entries, filled row-major.
pub fn gaussian_matrix(rng: &mut RngStream, rows: usize, cols: usize, std: f64) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyShape { rows, cols });
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gaussian std must be positive, got {std}"
        )));
    }
    let data = (0..rows * cols).map(|_| std * rng.standard_normal()).collect();
    Ok(DenseMatrix::from_raw(rows, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_and_empty_shape_are_rejected() {
        let mut rng = RngStream::new(1);
        assert!(gaussian_matrix(&mut rng, 2, 2, 0.0).is_err());
        assert!(matches!(
            gaussian_matrix(&mut rng, 0, 3, 1.0),
            Err(Error::EmptyShape { rows: 0, cols: 3 })
        ));
    }

    #[test]
    fn large_sample_moments() {
        let mut rng = RngStream::new(7);
        let m = gaussian_matrix(&mut rng, 1000, 1000, 1.0).unwrap();
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = gaussian_matrix(&mut RngStream::new(42), 13, 9, 0.5).unwrap();
        let b = gaussian_matrix(&mut RngStream::new(42), 13, 9, 0.5).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = gaussian_matrix(&mut RngStream::new(43), 13, 9, 0.5).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = RngStream::derive(5, &[0, 1]);
        let mut b = RngStream::derive(5, &[1, 0]);
        let mut c = RngStream::derive(5, &[0, 1]);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_ne!(x, y);
        assert_eq!(x, z);
    }

    #[test]
    fn permutation_is_bijection() {
        let mut rng = RngStream::new(3);
        let mut p = rng.permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
