//! Activations, their Hermite analysis, feature maps and trainers.

mod activation;
pub mod hermite;
mod model;
pub mod persist;
mod train;

pub use activation::{Activation, ActivationKind};
pub use hermite::{assumption_check, hermite_coefficients, AssumptionReport, HermiteProfile};
pub use model::{sample_rf_weights, FeatureMap, Predictor, RFModel, TwoLayerModel};
pub use persist::SavedModel;
pub use train::{train_rf, train_two_layer, train_two_layer_until, two_layer_loss_and_grad, ROW_NORM_TOL};
