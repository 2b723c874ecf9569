use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// Optimal matching of true rows to reconstructed rows.
///
/// `permutation[i]` is the reconstructed row matched to true row `i` and
/// `sign_flips[i]` the sign applied to it before measuring distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub permutation: Vec<usize>,
    pub sign_flips: Vec<i8>,
    pub rho: f64,
    pub per_pair: Vec<f64>,
}

/// Minimum-cost perfect matching on a square cost matrix, returning the
/// column assigned to each row.
///
/// Shortest augmenting paths with row and column potentials, `O(n³)`.
/// Among equally cheap columns the lowest index is taken, so results are
/// reproducible.
pub fn hungarian(cost: &DenseMatrix) -> Result<Vec<usize>> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::shape("hungarian", "square cost matrix", format!("{:?}", cost.shape())));
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite("hungarian cost"));
    }
    // 1-based arrays with a virtual column 0, as in the classic formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    Ok(assignment)
}

fn distance(a: &[f64], b: &[f64], sign: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - sign * y).powi(2)).sum::<f64>().sqrt()
}

/// Pair cost and sign: plain distance, or the smaller of `‖x − x̂‖` and
/// `‖x + x̂‖` when flips are allowed (ties keep `+1`).
pub(crate) fn pair_cost(x: &[f64], x_hat: &[f64], allow_sign_flips: bool) -> (f64, i8) {
    let plus = distance(x, x_hat, 1.0);
    if allow_sign_flips {
        let minus = distance(x, x_hat, -1.0);
        if minus < plus {
            return (minus, -1);
        }
    }
    (plus, 1)
}

/// `ρ = (1/(n√d)) min_Π Σ_i ‖x_i − s_i x̂_Π(i)‖`, minimized over permutations
/// and, optionally, per-row signs.
pub fn assignment_rho(x: &DenseMatrix, x_hat: &DenseMatrix, allow_sign_flips: bool) -> Result<AssignmentResult> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape("assignment_rho", format!("{:?}", x.shape()), format!("{:?}", x_hat.shape())));
    }
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyShape { rows: n, cols: d });
    }
    let cost = DenseMatrix::from_fn(n, n, |i, j| pair_cost(x.row(i), x_hat.row(j), allow_sign_flips).0);
    let permutation = hungarian(&cost)?;
    let (per_pair, sign_flips): (Vec<f64>, Vec<i8>) = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| pair_cost(x.row(i), x_hat.row(j), allow_sign_flips))
        .unzip();
    let rho = per_pair.iter().sum::<f64>() / (n as f64 * (d as f64).sqrt());
    Ok(AssignmentResult {
        permutation,
        sign_flips,
        rho,
        per_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{gaussian_matrix, RngStream};

    fn all_permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_permutations(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force_cost(c: &DenseMatrix) -> f64 {
        all_permutations(c.rows())
            .into_iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn small_matrices_match_enumeration() {
        let mut rng = RngStream::new(1);
        for n in 1..=6 {
            for _ in 0..10 {
                let c = DenseMatrix::from_fn(n, n, |_, _| rng.uniform_range(0.0, 10.0));
                let a = hungarian(&c).unwrap();
                let mut seen = a.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                let total: f64 = a.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
                assert!((total - brute_force_cost(&c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn known_assignment() {
        let c = DenseMatrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]).unwrap();
        assert_eq!(hungarian(&c).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn ties_prefer_lowest_column() {
        let c = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
        assert_eq!(hungarian(&c).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn integer_costs_with_negative_entries() {
        let mut rng = RngStream::new(2);
        for _ in 0..20 {
            let c = DenseMatrix::from_fn(5, 5, |_, _| rng.below(7) as f64 - 3.0);
            let a = hungarian(&c).unwrap();
            let total: f64 = a.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
            assert_eq!(total, brute_force_cost(&c));
        }
    }

    #[test]
    fn identical_rows_give_zero() {
        let x = gaussian_matrix(&mut RngStream::new(3), 6, 4, 1.0).unwrap();
        let r = assignment_rho(&x, &x, false).unwrap();
        assert_eq!(r.rho, 0.0);
        assert_eq!(r.permutation, (0..6).collect::<Vec<_>>());
        assert!(r.sign_flips.iter().all(|&s| s == 1));
    }

    #[test]
    fn negated_rows_need_flips() {
        let x = gaussian_matrix(&mut RngStream::new(4), 5, 3, 1.0).unwrap();
        let neg = x.scale(-1.0);
        let r = assignment_rho(&x, &neg, true).unwrap();
        assert_eq!(r.rho, 0.0);
        assert!(r.sign_flips.iter().all(|&s| s == -1));
        assert!(assignment_rho(&x, &neg, false).unwrap().rho > 0.5);
    }

    #[test]
    fn permuting_candidates_changes_matching_not_rho() {
        let mut rng = RngStream::new(5);
        let x = gaussian_matrix(&mut rng, 6, 5, 1.0).unwrap();
        let y = gaussian_matrix(&mut rng, 6, 5, 1.0).unwrap();
        let perm = rng.permutation(6);
        let a = assignment_rho(&x, &y, true).unwrap();
        let b = assignment_rho(&x, &y.select_rows(&perm), true).unwrap();
        assert!((a.rho - b.rho).abs() < 1e-14);
        for i in 0..6 {
            assert_eq!(perm[b.permutation[i]], a.permutation[i]);
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(assignment_rho(&DenseMatrix::zeros(2, 3), &DenseMatrix::zeros(3, 3), true).is_err());
        assert!(hungarian(&DenseMatrix::zeros(2, 3)).is_err());
    }
}
