//! Training sets on the radius-`√d` sphere: synthetic teacher data and
//! CIFAR-10 subsets.

pub mod cifar;
mod dataset;
mod synthetic;

pub use cifar::{build_cifar_subset, one_hot_labels, parse_cifar_batch, serialize_cifar_batch, CifarRecord};
pub use dataset::{Dataset, DatasetMeta, Image, PixelNormalization, DATASET_NORM_TOL};
pub use synthetic::{noisy_linear_labels, round_robin_one_hot, sphere_uniform, synthetic_dataset, LinearTeacher};
