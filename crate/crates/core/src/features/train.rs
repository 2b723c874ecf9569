use crate::error::{Error, Result};
use crate::features::{Activation, FeatureMap, RFModel, TwoLayerModel};
use crate::numkit::{min_norm_solve, DenseMatrix};

/// Relative tolerance on `‖x_i‖ = √d` for training inputs.
pub const ROW_NORM_TOL: f64 = 1e-8;

pub(crate) fn check_sphere_rows(x: &DenseMatrix, context: &'static str) -> Result<()> {
    let radius = (x.cols() as f64).sqrt();
    for (i, n) in x.row_norms().into_iter().enumerate() {
        if (n - radius).abs() > ROW_NORM_TOL * radius {
            return Err(Error::InvalidArgument(format!(
                "{context}: row {i} has norm {n}, expected {radius}"
            )));
        }
    }
    Ok(())
}

/// Fits the readout of a random-features model to `targets` with the
/// minimum-norm interpolator, the limit of gradient descent from zero.
pub fn train_rf(weights: DenseMatrix, activation: Activation, inputs: &DenseMatrix, targets: &DenseMatrix) -> Result<RFModel> {
    if inputs.rows() != targets.rows() {
        return Err(Error::shape("train_rf targets", inputs.rows(), targets.rows()));
    }
    check_sphere_rows(inputs, "train_rf")?;
    let (n, p) = (inputs.rows(), weights.rows());
    if p < n {
        return Err(Error::InvalidArgument(format!(
            "random features cannot interpolate with p = {p} < n = {n}"
        )));
    }
    let mut model = RFModel::new(weights, activation, DenseMatrix::zeros(p, targets.cols()))?;
    let phi = model.feature_map(inputs)?;
    model.theta_star = min_norm_solve(&phi, targets)?;
    Ok(model)
}

/// Mean squared loss `Σ_i ‖f(x_i) − y_i‖² / n` and its gradients with
/// respect to `θ⁽¹⁾` (`h × d`) and `θ⁽²⁾` (`k × h`).
pub fn two_layer_loss_and_grad(model: &TwoLayerModel, inputs: &DenseMatrix, targets: &DenseMatrix) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    let n = inputs.rows();
    if targets.shape() != (n, model.theta2.rows()) {
        return Err(Error::shape(
            "two-layer targets",
            format!("({n}, {})", model.theta2.rows()),
            format!("{:?}", targets.shape()),
        ));
    }
    let pre = model.preactivations(inputs)?;
    let act = &model.activation;
    let hidden = pre.map(|z| act.value(z));
    let out = hidden.matmul_transpose(&model.theta2)?;
    let residual = out.sub(targets)?;
    let loss = residual.as_slice().iter().map(|r| r * r).sum::<f64>() / n as f64;

    let scale = 2.0 / n as f64;
    let grad2 = residual.transpose_matmul(&hidden)?.scale(scale);
    // back through the hidden layer: (R θ⁽²⁾) ∘ φ′(Z)
    let mut delta = residual.matmul(&model.theta2)?;
    for (dv, &z) in delta.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        *dv *= scale * act.derivative(z);
    }
    let grad1 = delta.transpose_matmul(inputs)?;
    Ok((loss, grad1, grad2))
}

/// Full-batch gradient descent on both layers for exactly `steps` steps.
pub fn train_two_layer(model: TwoLayerModel, inputs: &DenseMatrix, targets: &DenseMatrix, step: f64, steps: usize) -> Result<TwoLayerModel> {
    train_two_layer_until(model, inputs, targets, step, steps, 0.0).map(|(m, _)| m)
}

/// Like [`train_two_layer`], stopping early once the loss drops below
/// `target_mse`. Returns the model and the number of steps taken.
pub fn train_two_layer_until(
    mut model: TwoLayerModel,
    inputs: &DenseMatrix,
    targets: &DenseMatrix,
    step: f64,
    max_steps: usize,
    target_mse: f64,
) -> Result<(TwoLayerModel, usize)> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if inputs.cols() != model.input_dim() {
        return Err(Error::shape("train_two_layer inputs", model.input_dim(), inputs.cols()));
    }
    for t in 0..max_steps {
        let (loss, g1, g2) = two_layer_loss_and_grad(&model, inputs, targets)?;
        if !loss.is_finite() || !g1.is_finite() || !g2.is_finite() {
            return Err(Error::TrainingDiverged { step: t });
        }
        if loss < target_mse {
            return Ok((model, t));
        }
        for (w, g) in model.theta1.as_mut_slice().iter_mut().zip(g1.as_slice()) {
            *w -= step * g;
        }
        for (w, g) in model.theta2.as_mut_slice().iter_mut().zip(g2.as_slice()) {
            *w -= step * g;
        }
    }
    if !model.theta1.is_finite() || !model.theta2.is_finite() {
        return Err(Error::TrainingDiverged { step: max_steps });
    }
    Ok((model, max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{sample_rf_weights, Predictor};
    use crate::numkit::{gaussian_matrix, RngStream};

    fn sphere(rng: &mut RngStream, n: usize, d: usize) -> DenseMatrix {
        let mut x = gaussian_matrix(rng, n, d, 1.0).unwrap();
        x.normalize_rows((d as f64).sqrt());
        x
    }

    fn mse(model: &impl Predictor, x: &DenseMatrix, y: &DenseMatrix) -> f64 {
        let r = model.predict(x).unwrap().sub(y).unwrap();
        r.as_slice().iter().map(|v| v * v).sum::<f64>() / r.as_slice().len() as f64
    }

    #[test]
    fn single_sample_is_interpolated() {
        let mut rng = RngStream::new(1);
        for p in [1, 2, 7] {
            let x = sphere(&mut rng, 1, 4);
            let y = DenseMatrix::new(1, 1, vec![0.7]).unwrap();
            let m = train_rf(sample_rf_weights(&mut rng, p, 4).unwrap(), Activation::tanh(), &x, &y).unwrap();
            assert!((m.predict(&x).unwrap().get(0, 0) - 0.7).abs() < 1e-8);
        }
    }

    #[test]
    fn synthetic_relu_fit_is_exact() {
        let mut rng = RngStream::new(2);
        let x = sphere(&mut rng, 20, 100);
        let y = gaussian_matrix(&mut rng, 20, 1, 1.0).unwrap();
        let m = train_rf(sample_rf_weights(&mut rng, 200, 100).unwrap(), Activation::relu(), &x, &y).unwrap();
        assert!(mse(&m, &x, &y) < 1e-10);
    }

    #[test]
    fn underparameterized_is_rejected() {
        let mut rng = RngStream::new(3);
        let x = sphere(&mut rng, 10, 5);
        let y = DenseMatrix::zeros(10, 1);
        let w = sample_rf_weights(&mut rng, 5, 5).unwrap();
        assert!(matches!(train_rf(w, Activation::relu(), &x, &y), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn off_sphere_inputs_are_rejected() {
        let mut rng = RngStream::new(3);
        let x = gaussian_matrix(&mut rng, 2, 5, 1.0).unwrap();
        let w = sample_rf_weights(&mut rng, 20, 5).unwrap();
        assert!(train_rf(w, Activation::relu(), &x, &DenseMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn readout_matches_direct_dense_solve() {
        // Φᵀ(ΦΦᵀ)⁻¹Y with the Gram inverted by Gauss–Jordan
        let mut rng = RngStream::new(4);
        let (n, d, p) = (12, 6, 40);
        let x = sphere(&mut rng, n, d);
        let y = gaussian_matrix(&mut rng, n, 1, 1.0).unwrap();
        let m = train_rf(sample_rf_weights(&mut rng, p, d).unwrap(), Activation::tanh(), &x, &y).unwrap();
        let phi = m.feature_map(&x).unwrap();
        let g = phi.gram();
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = g.row(i).to_vec();
                r.push(y.get(i, 0));
                r
            })
            .collect();
        for c in 0..n {
            let piv = (c..n).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).unwrap();
            aug.swap(c, piv);
            let pv = aug[c][c];
            aug[c].iter_mut().for_each(|v| *v /= pv);
            for r in 0..n {
                if r != c {
                    let f = aug[r][c];
                    for k in 0..=n {
                        aug[r][k] -= f * aug[c][k];
                    }
                }
            }
        }
        let alpha: Vec<f64> = aug.iter().map(|r| r[n]).collect();
        let theta = phi.t_mat_vec(&alpha).unwrap();
        let scale = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in m.theta_star().as_slice().iter().zip(&theta) {
            assert!((a - b).abs() < 1e-8 * scale.max(1.0));
        }
    }

    #[test]
    fn zero_steps_leave_model_unchanged() {
        let mut rng = RngStream::new(5);
        let m = TwoLayerModel::init(&mut rng, 4, 8, 2, Activation::relu()).unwrap();
        let x = sphere(&mut rng, 3, 4);
        let y = DenseMatrix::zeros(3, 2);
        let t = train_two_layer(m.clone(), &x, &y, 1e-3, 0).unwrap();
        assert_eq!(t.theta1(), m.theta1());
        assert_eq!(t.theta2(), m.theta2());
    }

    #[test]
    fn two_layer_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(6);
        let m = TwoLayerModel::init(&mut rng, 5, 12, 2, Activation::tanh()).unwrap();
        let x = sphere(&mut rng, 4, 5);
        let y = gaussian_matrix(&mut rng, 4, 2, 1.0).unwrap();
        let (_, g1, g2) = two_layer_loss_and_grad(&m, &x, &y).unwrap();
        let h = 1e-6;
        let loss_at = |m: &TwoLayerModel| two_layer_loss_and_grad(m, &x, &y).unwrap().0;
        for idx in [0, 7, 30, 59] {
            let mut plus = m.clone();
            plus.theta1.as_mut_slice()[idx] += h;
            let mut minus = m.clone();
            minus.theta1.as_mut_slice()[idx] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let an = g1.as_slice()[idx];
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "theta1[{idx}]: {fd} vs {an}");
        }
        for idx in [0, 5, 23] {
            let mut plus = m.clone();
            plus.theta2.as_mut_slice()[idx] += h;
            let mut minus = m.clone();
            minus.theta2.as_mut_slice()[idx] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let an = g2.as_slice()[idx];
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "theta2[{idx}]: {fd} vs {an}");
        }
    }

    #[test]
    fn wide_network_reaches_small_training_loss() {
        let mut rng = RngStream::new(7);
        let (d, n, h, k) = (10, 4, 256, 2);
        let x = sphere(&mut rng, n, d);
        let y = DenseMatrix::from_fn(n, k, |i, j| if i % k == j { 1.0 } else { 0.0 });
        let m = TwoLayerModel::init(&mut rng, d, h, k, Activation::relu()).unwrap();
        let trained = train_two_layer(m.clone(), &x, &y, 1e-3, 50_000).unwrap();
        assert!(mse(&trained, &x, &y) < 1e-4);
        assert_eq!(trained.theta2_init(), m.theta2_init());
    }

    #[test]
    fn huge_step_reports_divergence() {
        let mut rng = RngStream::new(8);
        let m = TwoLayerModel::init(&mut rng, 4, 64, 1, Activation::identity()).unwrap();
        let x = sphere(&mut rng, 3, 4);
        let y = DenseMatrix::new(3, 1, vec![1.0, -1.0, 1.0]).unwrap();
        assert!(matches!(
            train_two_layer(m, &x, &y, 1e6, 500),
            Err(Error::TrainingDiverged { .. })
        ));
    }
}
