use crate::datagen::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::numkit::{gaussian_matrix, DenseMatrix, RngStream};

/// `n` i.i.d. rows uniform on the radius-`√d` sphere (normalized Gaussians).
pub fn sphere_uniform(rng: &mut RngStream, n: usize, d: usize) -> Result<DenseMatrix> {
    let mut x = gaussian_matrix(rng, n, d, 1.0)?;
    x.normalize_rows((d as f64).sqrt());
    Ok(x)
}

/// Linear teacher `y = X g + ε` with `g ~ N(0, signal_scale²/d)` and
/// `ε ~ N(0, noise_variance)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearTeacher {
    pub signal_scale: f64,
    pub noise_variance: f64,
}

impl Default for LinearTeacher {
    fn default() -> Self {
        Self {
            signal_scale: 1.0,
            noise_variance: 0.25,
        }
    }
}

impl LinearTeacher {
    pub fn labels(&self, rng: &mut RngStream, x: &DenseMatrix) -> Result<DenseMatrix> {
        let (n, d) = x.shape();
        if n == 0 || d == 0 {
            return Err(Error::EmptyShape { rows: n, cols: d });
        }
        if self.signal_scale < 0.0 || self.noise_variance < 0.0 {
            return Err(Error::InvalidArgument("teacher scales must be non-negative".into()));
        }
        let g = if self.signal_scale > 0.0 {
            gaussian_matrix(rng, d, 1, self.signal_scale / (d as f64).sqrt())?
        } else {
            DenseMatrix::zeros(d, 1)
        };
        let mut y = x.matmul(&g)?;
        if self.noise_variance > 0.0 {
            let eps = gaussian_matrix(rng, n, 1, self.noise_variance.sqrt())?;
            for (yi, e) in y.as_mut_slice().iter_mut().zip(eps.as_slice()) {
                *yi += e;
            }
        }
        Ok(y)
    }
}

/// Scalar labels from the default teacher: `g_i ~ N(0, 1/d)`, noise variance 0.25.
pub fn noisy_linear_labels(rng: &mut RngStream, x: &DenseMatrix) -> Result<DenseMatrix> {
    LinearTeacher::default().labels(rng, x)
}

/// `n × k` one-hot targets with sample `i` in class `i mod k`.
pub fn round_robin_one_hot(n: usize, k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, k, |i, j| if i % k == j { 1.0 } else { 0.0 })
}

/// Sphere inputs with noisy linear labels, drawn from one stream.
pub fn synthetic_dataset(rng: &mut RngStream, n: usize, d: usize) -> Result<Dataset> {
    let x = sphere_uniform(rng, n, d)?;
    let y = noisy_linear_labels(rng, &x)?;
    Dataset::new(
        x,
        y,
        DatasetMeta {
            source: "synthetic-sphere".into(),
            seed: Some(rng.seed()),
            ..Default::default()
        },
    )
}
