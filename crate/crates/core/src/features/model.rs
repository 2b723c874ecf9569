use crate::error::{Error, Result};
use crate::features::Activation;
use crate::numkit::{gaussian_matrix, DenseMatrix, DenseVector, RngStream};

/// A penultimate-layer feature map `x ↦ φ(W x)` with a known first layer.
///
/// Both the random-features model and the two-layer network expose their
/// features this way; the reconstruction engine only needs this trait.
pub trait FeatureMap: Send + Sync {
    /// First-layer weights, `p × d`.
    fn weights(&self) -> &DenseMatrix;

    fn activation(&self) -> &Activation;

    fn input_dim(&self) -> usize {
        self.weights().cols()
    }

    fn feature_dim(&self) -> usize {
        self.weights().rows()
    }

    /// `m × d` inputs to their `m × p` pre-activations `X Wᵀ`.
    fn preactivations(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::shape("feature_map inputs", self.input_dim(), inputs.cols()));
        }
        inputs.matmul_transpose(self.weights())
    }

    /// `m × d` inputs to their `m × p` feature matrix.
    fn feature_map(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        let act = self.activation();
        Ok(self.preactivations(inputs)?.map(|z| act.value(z)))
    }

    /// `Wᵀ(φ′(W x̂) ∘ c)`: the pullback of a feature-space cotangent to input space.
    fn feature_jvp_transpose(&self, x_hat: &DenseVector, cotangent: &DenseVector) -> Result<DenseVector> {
        let w = self.weights();
        if x_hat.len() != self.input_dim() {
            return Err(Error::shape("feature_jvp_transpose x_hat", self.input_dim(), x_hat.len()));
        }
        if cotangent.len() != self.feature_dim() {
            return Err(Error::shape("feature_jvp_transpose cotangent", self.feature_dim(), cotangent.len()));
        }
        let act = self.activation();
        let pre = w.mat_vec(x_hat.as_slice())?;
        let scaled: Vec<f64> = pre
            .iter()
            .zip(cotangent.as_slice())
            .map(|(&z, &c)| act.derivative(z) * c)
            .collect();
        Ok(DenseVector::from_raw(w.t_mat_vec(&scaled)?))
    }
}

/// Models that produce `k`-dimensional outputs.
pub trait Predictor {
    fn output_dim(&self) -> usize;

    /// `m × d` inputs to `m × k` outputs.
    fn predict(&self, inputs: &DenseMatrix) -> Result<DenseMatrix>;
}

/// `f(x) = φ(V x)ᵀ θ*` with a frozen Gaussian first layer.
#[derive(Clone, Debug)]
pub struct RFModel {
    pub(crate) weights: DenseMatrix,
    pub(crate) activation: Activation,
    pub(crate) theta_star: DenseMatrix,
}

impl RFModel {
    pub fn new(weights: DenseMatrix, activation: Activation, theta_star: DenseMatrix) -> Result<Self> {
        if theta_star.rows() != weights.rows() {
            return Err(Error::shape("RFModel theta_star rows", weights.rows(), theta_star.rows()));
        }
        Ok(Self {
            weights,
            activation,
            theta_star,
        })
    }

    /// `p × k` trained readout.
    pub fn theta_star(&self) -> &DenseMatrix {
        &self.theta_star
    }

    /// One readout vector per output, the reconstruction targets.
    pub fn readout_targets(&self) -> Vec<DenseVector> {
        (0..self.theta_star.cols())
            .map(|j| DenseVector::from_raw(self.theta_star.column(j)))
            .collect()
    }
}

impl FeatureMap for RFModel {
    fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    fn activation(&self) -> &Activation {
        &self.activation
    }
}

impl Predictor for RFModel {
    fn output_dim(&self) -> usize {
        self.theta_star.cols()
    }

    fn predict(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        self.feature_map(inputs)?.matmul(&self.theta_star)
    }
}

/// Entries `N(0, 1/d)`, which keeps pre-activations of order one on the √d sphere.
pub fn sample_rf_weights(rng: &mut RngStream, p: usize, d: usize) -> Result<DenseMatrix> {
    gaussian_matrix(rng, p, d, 1.0 / (d as f64).sqrt())
}

/// `f(x) = θ⁽²⁾ φ(θ⁽¹⁾ x)`, both layers trained.
#[derive(Clone, Debug)]
pub struct TwoLayerModel {
    pub(crate) theta1: DenseMatrix,
    pub(crate) theta2: DenseMatrix,
    theta2_init: DenseMatrix,
    pub(crate) activation: Activation,
}

impl TwoLayerModel {
    /// `theta1` is `h × d`; `theta2` is `k × h` and is recorded as the
    /// initialization of the last layer.
    pub fn new(theta1: DenseMatrix, theta2: DenseMatrix, activation: Activation) -> Result<Self> {
        let init = theta2.clone();
        Self::from_parts(theta1, theta2, init, activation)
    }

    pub fn from_parts(theta1: DenseMatrix, theta2: DenseMatrix, theta2_init: DenseMatrix, activation: Activation) -> Result<Self> {
        if theta2.cols() != theta1.rows() {
            return Err(Error::shape("TwoLayerModel theta2 columns", theta1.rows(), theta2.cols()));
        }
        if theta2_init.shape() != theta2.shape() {
            return Err(Error::shape(
                "TwoLayerModel theta2_init",
                format!("{:?}", theta2.shape()),
                format!("{:?}", theta2_init.shape()),
            ));
        }
        Ok(Self {
            theta1,
            theta2,
            theta2_init,
            activation,
        })
    }

    /// First layer `N(0, 1/d)`, second layer `N(0, 1/h)`.
    pub fn init(rng: &mut RngStream, d: usize, h: usize, k: usize, activation: Activation) -> Result<Self> {
        let theta1 = gaussian_matrix(rng, h, d, 1.0 / (d as f64).sqrt())?;
        let theta2 = gaussian_matrix(rng, k, h, 1.0 / (h as f64).sqrt())?;
        Self::new(theta1, theta2, activation)
    }

    pub fn theta1(&self) -> &DenseMatrix {
        &self.theta1
    }

    pub fn theta2(&self) -> &DenseMatrix {
        &self.theta2
    }

    pub fn theta2_init(&self) -> &DenseMatrix {
        &self.theta2_init
    }

    pub fn width(&self) -> usize {
        self.theta1.rows()
    }

    /// Rows of `θ⁽²⁾ − θ⁽²⁾_init`, one reconstruction target per output.
    pub fn readout_targets(&self) -> Vec<DenseVector> {
        self.theta2
            .row_iter()
            .zip(self.theta2_init.row_iter())
            .map(|(a, b)| DenseVector::from_raw(a.iter().zip(b).map(|(x, y)| x - y).collect()))
            .collect()
    }
}

impl FeatureMap for TwoLayerModel {
    fn weights(&self) -> &DenseMatrix {
        &self.theta1
    }

    fn activation(&self) -> &Activation {
        &self.activation
    }
}

impl Predictor for TwoLayerModel {
    fn output_dim(&self) -> usize {
        self.theta2.rows()
    }

    fn predict(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        self.feature_map(inputs)?.matmul_transpose(&self.theta2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rf(weights: DenseMatrix, act: Activation) -> RFModel {
        let p = weights.rows();
        RFModel::new(weights, act, DenseMatrix::zeros(p, 1)).unwrap()
    }

    #[test]
    fn identity_features_are_linear() {
        let m = rf(DenseMatrix::identity(2), Activation::identity());
        let x = DenseMatrix::new(1, 2, vec![3.0, -1.0]).unwrap();
        assert_eq!(m.feature_map(&x).unwrap().as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn relu_clips_negative_preactivations() {
        let m = rf(DenseMatrix::identity(2), Activation::relu());
        let x = DenseMatrix::new(1, 2, vec![-2.0, 5.0]).unwrap();
        assert_eq!(m.feature_map(&x).unwrap().as_slice(), &[0.0, 5.0]);
    }

    #[test]
    fn tanh_matches_scalar_loop() {
        let mut rng = RngStream::new(2);
        let v = gaussian_matrix(&mut rng, 3, 4, 0.5).unwrap();
        let x = gaussian_matrix(&mut rng, 5, 4, 1.0).unwrap();
        let m = rf(v.clone(), Activation::tanh());
        let phi = m.feature_map(&x).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut z = 0.0;
                for c in 0..4 {
                    z += v.get(j, c) * x.get(i, c);
                }
                assert!((phi.get(i, j) - z.tanh()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = rf(DenseMatrix::identity(3), Activation::tanh());
        assert!(m.feature_map(&DenseMatrix::zeros(2, 4)).is_err());
        assert!(m.feature_jvp_transpose(&DenseVector::zeros(3), &DenseVector::zeros(2)).is_err());
    }

    #[test]
    fn jvp_transpose_identity_and_zero_cotangent() {
        let mut rng = RngStream::new(8);
        let v = gaussian_matrix(&mut rng, 6, 3, 1.0).unwrap();
        let c = DenseVector::new((0..6).map(|i| i as f64 - 2.5).collect()).unwrap();
        let x = DenseVector::new(vec![0.3, -0.2, 1.0]).unwrap();
        let lin = rf(v.clone(), Activation::identity());
        let got = lin.feature_jvp_transpose(&x, &c).unwrap();
        assert_eq!(got.as_slice(), v.t_mat_vec(c.as_slice()).unwrap().as_slice());
        let zero = rf(v, Activation::tanh()).feature_jvp_transpose(&x, &DenseVector::zeros(6)).unwrap();
        assert!(zero.as_slice().iter().all(|&z| z == 0.0));
    }

    #[test]
    fn jvp_transpose_matches_directional_difference() {
        let mut rng = RngStream::new(21);
        let (d, p) = (5, 20);
        let m = rf(sample_rf_weights(&mut rng, p, d).unwrap(), Activation::tanh());
        let x: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let c: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
        let g = m
            .feature_jvp_transpose(&DenseVector::new(x.clone()).unwrap(), &DenseVector::new(c.clone()).unwrap())
            .unwrap();
        let objective = |x: &[f64]| -> f64 {
            let phi = m.feature_map(&DenseMatrix::new(1, d, x.to_vec()).unwrap()).unwrap();
            phi.as_slice().iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        for _ in 0..10 {
            let u: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let h = 1e-5;
            let plus: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a - h * b).collect();
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let an: f64 = g.as_slice().iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "fd {fd} vs {an}");
        }
    }

    #[test]
    fn odd_activation_features_are_odd() {
        let mut rng = RngStream::new(4);
        let m = rf(sample_rf_weights(&mut rng, 30, 6).unwrap(), Activation::tanh());
        let x = gaussian_matrix(&mut rng, 3, 6, 1.0).unwrap();
        let pos = m.feature_map(&x).unwrap();
        let neg = m.feature_map(&x.scale(-1.0)).unwrap();
        assert_eq!(pos.as_slice(), neg.scale(-1.0).as_slice());
    }

    #[test]
    fn two_layer_shapes_and_targets() {
        let mut rng = RngStream::new(6);
        let mut m = TwoLayerModel::init(&mut rng, 4, 10, 3, Activation::relu()).unwrap();
        assert_eq!(m.feature_dim(), 10);
        assert_eq!(m.output_dim(), 3);
        assert!(m.readout_targets().iter().all(|t| t.norm() == 0.0));
        m.theta2.as_mut_slice()[0] += 1.0;
        assert_eq!(m.readout_targets()[0][0], 1.0);
        let out = m.predict(&gaussian_matrix(&mut rng, 2, 4, 1.0).unwrap()).unwrap();
        assert_eq!(out.shape(), (2, 3));
    }
}
