//! Reconstruction quality: matched distance `ρ`, span residual and training error.

mod assignment;

use serde::{Deserialize, Serialize};

pub use assignment::{assignment_rho, hungarian, AssignmentResult};

use crate::error::{Error, Result};
use crate::features::{FeatureMap, Predictor};
use crate::numkit::{DenseMatrix, DenseVector};

/// `(1/(n√p)) Σ_i ‖P⊥_Φ̂ φ(x_i)‖`: how far each true feature vector sits from
/// the span of the candidate features.
///
/// The projection is applied twice, which removes the error left by a
/// single inexact Gram solve when `Φ̂` is square or nearly so.
pub fn span_residual(map: &dyn FeatureMap, x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x.cols() != map.input_dim() || x_hat.cols() != map.input_dim() {
        return Err(Error::shape("span_residual inputs", map.input_dim(), if x.cols() != map.input_dim() { x.cols() } else { x_hat.cols() }));
    }
    if x.rows() == 0 || x_hat.rows() == 0 {
        return Err(Error::EmptyShape { rows: x.rows().min(x_hat.rows()), cols: x.cols() });
    }
    let phi = map.feature_map(x)?;
    let phi_hat = map.feature_map(x_hat)?;
    let gram = phi_hat.gram();
    let mut residuals: Vec<Vec<f64>> = phi.row_iter().map(<[f64]>::to_vec).collect();
    for _ in 0..2 {
        let rhs = residuals
            .iter()
            .map(|r| phi_hat.mat_vec(r).map(DenseVector::from_raw))
            .collect::<Result<Vec<_>>>()?;
        let (alpha, _, _) = crate::recon::solve_gram(&gram, &rhs)?;
        for (r, a) in residuals.iter_mut().zip(&alpha) {
            let proj = phi_hat.t_mat_vec(a.as_slice())?;
            r.iter_mut().zip(&proj).for_each(|(v, q)| *v -= q);
        }
    }
    let n = x.rows() as f64;
    let p = map.feature_dim() as f64;
    Ok(residuals.iter().map(|r| crate::numkit::norm(r)).sum::<f64>() / (n * p.sqrt()))
}

/// `(1/(n·k)) Σ_i ‖f(x_i) − y_i‖²`.
pub fn training_mse(model: &dyn Predictor, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let pred = model.predict(x)?;
    if pred.shape() != y.shape() {
        return Err(Error::shape("training_mse targets", format!("{:?}", pred.shape()), format!("{:?}", y.shape())));
    }
    let sq: f64 = pred.as_slice().iter().zip(y.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sq / y.as_slice().len() as f64)
}

/// The JSON document written by `evaluate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rho: f64,
    pub residual: f64,
    pub train_mse: f64,
    pub permutation: Vec<usize>,
    pub sign_flips: Vec<i8>,
}

impl MetricsReport {
    pub fn new(assignment: AssignmentResult, residual: f64, train_mse: f64) -> Self {
        Self {
            rho: assignment.rho,
            residual,
            train_mse,
            permutation: assignment.permutation,
            sign_flips: assignment.sign_flips,
        }
    }
}
