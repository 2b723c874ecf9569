//! Dense linear algebra and seeded sampling shared by the trainers and the
//! reconstruction engine.

mod cg;
mod matrix;
mod rng;
mod tridiag;

pub use cg::{
    cg_solve, default_max_iter, min_norm_solve, CgSolution, ACCEPTABLE_RELATIVE_RESIDUAL,
    DEFAULT_CG_TOL, MAX_GRAM_CONDITION,
};
pub use matrix::{axpy, dot, norm, DenseMatrix, DenseVector};
pub use rng::{gaussian_matrix, RngStream, RNG_ALGORITHM};
pub use tridiag::symmetric_tridiagonal_eigen;
