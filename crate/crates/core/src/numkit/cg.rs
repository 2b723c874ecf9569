use crate::error::{Error, Result};
use crate::numkit::matrix::{axpy, dot, norm};
use crate::numkit::tridiag::symmetric_tridiagonal_eigen;
use crate::numkit::{DenseMatrix, DenseVector};

/// Default relative residual target for inner solves.
pub const DEFAULT_CG_TOL: f64 = 1e-12;

/// Gram systems with a larger condition estimate are refused by [`min_norm_solve`].
pub const MAX_GRAM_CONDITION: f64 = 1e14;

/// Iterates accepted by callers when the strict tolerance stalls in floating point.
pub const ACCEPTABLE_RELATIVE_RESIDUAL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CgSolution {
    pub solution: DenseVector,
    pub iterations: usize,
    pub converged: bool,
    /// `‖b − A x‖ / ‖b‖`, recomputed from scratch at exit.
    pub relative_residual: f64,
    /// `λ_max / λ_min` of the Lanczos tridiagonal built from the CG
    /// coefficients; 1 when no iteration was needed.
    pub condition_estimate: f64,
}

pub fn default_max_iter(n: usize) -> usize {
    10 * n.max(1)
}

/// Conjugate gradient on a dense symmetric positive definite system.
///
/// Restarts from the true residual when the recursive residual has drifted,
/// so the reported `relative_residual` is always the actual one.
pub fn cg_solve(gram: &DenseMatrix, rhs: &DenseVector, tol: f64, max_iter: usize) -> Result<CgSolution> {
    let n = gram.rows();
    if gram.cols() != n {
        return Err(Error::shape("cg_solve", "square matrix", format!("{:?}", gram.shape())));
    }
    if rhs.len() != n {
        return Err(Error::shape("cg_solve rhs", n, rhs.len()));
    }
    check_symmetric(gram)?;

    let b = rhs.as_slice();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution {
            solution: DenseVector::zeros(n),
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
            condition_estimate: 1.0,
        });
    }

    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut condition_estimate = 1.0;
    let mut best_true = f64::INFINITY;
    let mut best_x = x.clone();
    let mut previous_rel = f64::INFINITY;

    loop {
        let mut r = residual(gram, &x, b);
        let true_rel = norm(&r) / b_norm;
        if !true_rel.is_finite() {
            return Err(Error::NonFinite("cg_solve residual"));
        }
        if true_rel < best_true {
            best_true = true_rel;
            best_x.copy_from_slice(&x);
        }
        if true_rel <= tol || iterations >= max_iter {
            break;
        }
        // a restart cycle that did not halve the residual will not do better
        if true_rel > 0.5 * previous_rel {
            break;
        }
        previous_rel = true_rel;

        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut ap = vec![0.0; n];
        while iterations < max_iter {
            for (i, out) in ap.iter_mut().enumerate() {
                *out = dot(gram.row(i), &p);
            }
            let pap = dot(&p, &ap);
            if !pap.is_finite() {
                return Err(Error::NonFinite("cg_solve curvature"));
            }
            if pap <= 0.0 {
                // not positive definite along p; the caller sees converged=false
                condition_estimate = f64::INFINITY;
                break;
            }
            let alpha = rr / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            iterations += 1;
            let rr_new = dot(&r, &r);
            if !rr_new.is_finite() {
                return Err(Error::NonFinite("cg_solve residual"));
            }
            let beta = rr_new / rr;
            alphas.push(alpha);
            betas.push(beta);
            if rr_new.sqrt() <= tol * b_norm {
                break;
            }
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        if condition_estimate.is_finite() && !alphas.is_empty() {
            let est = lanczos_condition(&alphas, &betas);
            if est > condition_estimate || condition_estimate == 1.0 {
                condition_estimate = est;
            }
        }
        if condition_estimate.is_infinite() {
            break;
        }
    }

    let final_rel = norm(&residual(gram, &x, b)) / b_norm;
    let (solution, relative_residual) = if final_rel <= best_true {
        (x, final_rel)
    } else {
        (best_x, best_true)
    };
    Ok(CgSolution {
        solution: DenseVector::from_raw(solution),
        iterations,
        converged: relative_residual <= tol,
        relative_residual,
        condition_estimate,
    })
}

fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(i, bi)| bi - dot(a.row(i), x))
        .collect()
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::NonFinite("cg_solve matrix"));
    }
    let n = a.rows();
    let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    let asymmetry = if scale > 0.0 { worst / scale } else { 0.0 };
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Extreme Ritz values of the Lanczos matrix implied by a CG run.
fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    let mut diag = Vec::with_capacity(m);
    let mut off = Vec::with_capacity(m.saturating_sub(1));
    for k in 0..m {
        let prev = if k == 0 { 0.0 } else { betas[k - 1] / alphas[k - 1] };
        diag.push(1.0 / alphas[k] + prev);
        if k + 1 < m {
            off.push(betas[k].sqrt() / alphas[k]);
        }
    }
    match symmetric_tridiagonal_eigen(&diag, &off) {
        Ok((vals, _)) => {
            let lo = vals[0];
            let hi = vals[m - 1];
            if lo <= 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Minimum-norm interpolator `Φᵀ(ΦΦᵀ)⁻¹Y`, one CG solve per target column.
///
/// `features` is `n × p` with `p ≥ n`; returns the `p × k` readout.
pub fn min_norm_solve(features: &DenseMatrix, targets: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, p) = features.shape();
    if n == 0 || p == 0 {
        return Err(Error::EmptyShape { rows: n, cols: p });
    }
    if targets.rows() != n {
        return Err(Error::shape("min_norm_solve targets", n, targets.rows()));
    }
    if p < n {
        return Err(Error::InvalidArgument(format!(
            "interpolation needs at least as many features as samples (p = {p} < n = {n})"
        )));
    }
    let gram = features.gram();
    let k = targets.cols();
    let mut alpha = DenseMatrix::zeros(n, k);
    for j in 0..k {
        let rhs = DenseVector::from_raw(targets.column(j));
        let sol = cg_solve(&gram, &rhs, DEFAULT_CG_TOL, default_max_iter(n))?;
        if sol.condition_estimate > MAX_GRAM_CONDITION {
            return Err(Error::IllConditioned {
                condition_estimate: sol.condition_estimate,
            });
        }
        if sol.relative_residual > ACCEPTABLE_RELATIVE_RESIDUAL {
            return Err(Error::CgFailure {
                iterations: sol.iterations,
                relative_residual: sol.relative_residual,
                condition_estimate: sol.condition_estimate,
            });
        }
        for (i, v) in sol.solution.as_slice().iter().enumerate() {
            alpha.set(i, j, *v);
        }
    }
    features.transpose_matmul(&alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{gaussian_matrix, RngStream};

    /// Gaussian elimination with partial pivoting, used only as a reference.
    fn direct_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = a.row(i).to_vec();
                row.push(b[i]);
                row
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
                .unwrap();
            m.swap(col, piv);
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    fn random_spd(rng: &mut RngStream, n: usize) -> DenseMatrix {
        let b = gaussian_matrix(rng, n, n, 1.0).unwrap();
        let mut a = b.gram();
        for i in 0..n {
            a.set(i, i, a.get(i, i) + 1.0);
        }
        a
    }

    #[test]
    fn identity_system() {
        let rhs = DenseVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let sol = cg_solve(&DenseMatrix::identity(3), &rhs, DEFAULT_CG_TOL, 30).unwrap();
        assert!(sol.converged);
        for (a, b) in sol.solution.as_slice().iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let sol = cg_solve(&DenseMatrix::identity(4), &DenseVector::zeros(4), 1e-12, 40).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!(sol.solution.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_spd_matches_direct_solve() {
        let mut rng = RngStream::new(11);
        for n in [8, 3, 16] {
            let a = random_spd(&mut rng, n);
            let b: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
            let x_ref = direct_solve(&a, &b);
            let sol = cg_solve(&a, &DenseVector::new(b).unwrap(), DEFAULT_CG_TOL, default_max_iter(n)).unwrap();
            assert!(sol.converged);
            let err: f64 = sol.solution.as_slice().iter().zip(&x_ref).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err / norm(&x_ref) < 1e-8, "n={n} rel err {}", err / norm(&x_ref));
        }
    }

    #[test]
    fn condition_estimate_tracks_diagonal_spectrum() {
        let a = DenseMatrix::from_fn(5, 5, |i, j| if i == j { 10f64.powi(i as i32) } else { 0.0 });
        let rhs = DenseVector::new(vec![1.0; 5]).unwrap();
        let sol = cg_solve(&a, &rhs, DEFAULT_CG_TOL, 50).unwrap();
        assert!((sol.condition_estimate / 1e4 - 1.0).abs() < 1e-6, "{}", sol.condition_estimate);
    }

    #[test]
    fn asymmetric_and_nan_inputs_are_errors() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let rhs = DenseVector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(cg_solve(&a, &rhs, 1e-12, 10), Err(Error::NotSymmetric { .. })));
        let mut bad = DenseMatrix::identity(2);
        bad.as_mut_slice()[0] = f64::NAN;
        assert!(cg_solve(&bad, &rhs, 1e-12, 10).is_err());
    }

    #[test]
    fn min_norm_orthonormal_features() {
        let phi = DenseMatrix::identity(2);
        let y = DenseMatrix::new(2, 1, vec![3.0, 4.0]).unwrap();
        let theta = min_norm_solve(&phi, &y).unwrap();
        assert!((theta.get(0, 0) - 3.0).abs() < 1e-14);
        assert!((theta.get(1, 0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn min_norm_single_row_closed_form() {
        let phi = DenseMatrix::new(1, 3, vec![1.0, 2.0, 2.0]).unwrap();
        let y = DenseMatrix::new(1, 1, vec![3.0]).unwrap();
        let theta = min_norm_solve(&phi, &y).unwrap();
        for (got, want) in theta.as_slice().iter().zip([1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn min_norm_interpolates_and_beats_null_space_perturbations() {
        let mut rng = RngStream::new(5);
        let phi = gaussian_matrix(&mut rng, 5, 50, 1.0).unwrap();
        let y = gaussian_matrix(&mut rng, 5, 1, 1.0).unwrap();
        let theta = min_norm_solve(&phi, &y).unwrap();
        let fit = phi.matmul(&theta).unwrap();
        assert!(fit.sub(&y).unwrap().frobenius_norm() / y.frobenius_norm() < 1e-8);

        // null-space directions: z − Φᵀ(ΦΦᵀ)⁻¹Φz via a second solve
        for _ in 0..5 {
            let z = gaussian_matrix(&mut rng, 50, 1, 1.0).unwrap();
            let phi_z = phi.matmul(&z).unwrap();
            let proj = min_norm_solve(&phi, &phi_z).unwrap();
            let null = z.sub(&proj).unwrap();
            assert!(phi.matmul(&null).unwrap().frobenius_norm() < 1e-8);
            let other: Vec<f64> = theta.as_slice().iter().zip(null.as_slice()).map(|(a, b)| a + b).collect();
            assert!(theta.frobenius_norm() <= norm(&other));
        }
    }

    #[test]
    fn min_norm_rejects_wide_sample_count() {
        let phi = DenseMatrix::identity(3).select_rows(&[0, 1, 2, 0]);
        let y = DenseMatrix::zeros(4, 1);
        assert!(matches!(min_norm_solve(&phi, &y), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn min_norm_rejects_singular_gram() {
        // duplicate rows make ΦΦᵀ singular
        let phi = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 0.0]]).unwrap();
        let y = DenseMatrix::new(2, 1, vec![1.0, -1.0]).unwrap();
        assert!(min_norm_solve(&phi, &y).is_err());
    }
}
