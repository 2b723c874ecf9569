use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::numkit::{cg_solve, default_max_iter, dot, DenseMatrix, DenseVector, ACCEPTABLE_RELATIVE_RESIDUAL, DEFAULT_CG_TOL, MAX_GRAM_CONDITION};

/// Gram systems whose condition estimate exceeds this get a diagonal jitter.
pub const JITTER_CONDITION: f64 = 1e12;
/// Jitter size relative to the mean Gram diagonal.
pub const JITTER_SCALE: f64 = 1e-10;
/// Normalized losses in `(-LOSS_CLAMP, 0)` are solver noise and read as 0.
pub const LOSS_CLAMP: f64 = 1e-9;

/// A feature map together with the readout directions it must explain.
///
/// For random features the single target is `θ*`; for a two-layer network
/// there is one target per output, the rows of `θ⁽²⁾ − θ⁽²⁾_init`.
pub struct ReconProblem<'a> {
    map: &'a dyn FeatureMap,
    targets: Vec<DenseVector>,
    n_candidates: usize,
    target_sq_norm: f64,
}

impl<'a> ReconProblem<'a> {
    pub fn new(map: &'a dyn FeatureMap, targets: Vec<DenseVector>, n_candidates: usize) -> Result<Self> {
        if n_candidates == 0 {
            return Err(Error::InvalidArgument("at least one candidate row is needed".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidArgument("no reconstruction targets".into()));
        }
        let p = map.feature_dim();
        for t in &targets {
            if t.len() != p {
                return Err(Error::shape("ReconProblem target", p, t.len()));
            }
            if !t.as_slice().iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("ReconProblem target"));
            }
        }
        let target_sq_norm: f64 = targets.iter().map(|t| t.dot(t)).sum();
        if target_sq_norm == 0.0 {
            return Err(Error::InvalidArgument("targets are identically zero".into()));
        }
        Ok(Self {
            map,
            targets,
            n_candidates,
            target_sq_norm,
        })
    }

    pub fn map(&self) -> &dyn FeatureMap {
        self.map
    }

    pub fn targets(&self) -> &[DenseVector] {
        &self.targets
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn input_dim(&self) -> usize {
        self.map.input_dim()
    }

    /// `Σ_t ‖θ_t‖²`, the normalizer that makes the loss of order one.
    pub fn target_sq_norm(&self) -> f64 {
        self.target_sq_norm
    }

    fn check_candidates(&self, x_hat: &DenseMatrix) -> Result<()> {
        let want = (self.n_candidates, self.input_dim());
        if x_hat.shape() != want {
            return Err(Error::shape("candidate matrix", format!("{want:?}"), format!("{:?}", x_hat.shape())));
        }
        if !x_hat.is_finite() {
            return Err(Error::NonFinite("candidate matrix"));
        }
        Ok(())
    }
}

/// Loss value with the per-target Gram solutions and projection residuals.
#[derive(Clone, Debug)]
pub struct LossParts {
    /// `Σ_t ‖P⊥ θ_t‖²`.
    pub loss: f64,
    /// `α_t = (Φ̂Φ̂ᵀ)⁻¹ Φ̂ θ_t`.
    pub alpha: Vec<DenseVector>,
    /// `r_t = θ_t − Φ̂ᵀ α_t`.
    pub residual: Vec<DenseVector>,
    pub condition_estimate: f64,
    pub jittered: bool,
}

impl LossParts {
    pub fn normalized(&self, problem: &ReconProblem) -> f64 {
        self.loss / problem.target_sq_norm()
    }
}

/// Solves `G α_t = b_t` for every right-hand side, adding a small diagonal
/// shift once if the first attempt looks numerically singular.
pub(crate) fn solve_gram(gram: &DenseMatrix, rhs: &[DenseVector]) -> Result<(Vec<DenseVector>, f64, bool)> {
    let n = gram.rows();
    let attempt = |g: &DenseMatrix| -> Result<(Vec<crate::numkit::CgSolution>, f64)> {
        let sols = rhs
            .iter()
            .map(|b| cg_solve(g, b, DEFAULT_CG_TOL, default_max_iter(n)))
            .collect::<Result<Vec<_>>>()?;
        let cond = sols.iter().map(|s| s.condition_estimate).fold(1.0, f64::max);
        Ok((sols, cond))
    };
    let (mut sols, mut cond) = attempt(gram)?;
    let mut jittered = false;
    if cond > JITTER_CONDITION {
        let trace: f64 = (0..n).map(|i| gram.get(i, i)).sum();
        let shift = JITTER_SCALE * trace / n as f64;
        let mut shifted = gram.clone();
        for i in 0..n {
            shifted.set(i, i, gram.get(i, i) + shift);
        }
        (sols, cond) = attempt(&shifted)?;
        jittered = true;
    }
    if cond > MAX_GRAM_CONDITION {
        return Err(Error::IllConditioned { condition_estimate: cond });
    }
    if let Some(bad) = sols.iter().find(|s| s.relative_residual > ACCEPTABLE_RELATIVE_RESIDUAL) {
        return Err(Error::CgFailure {
            iterations: bad.iterations,
            relative_residual: bad.relative_residual,
            condition_estimate: cond,
        });
    }
    Ok((sols.into_iter().map(|s| s.solution).collect(), cond, jittered))
}

/// Projection data from a precomputed candidate feature matrix.
fn loss_from_features(problem: &ReconProblem, phi_hat: &DenseMatrix) -> Result<LossParts> {
    let gram = phi_hat.gram();
    let rhs = problem
        .targets
        .iter()
        .map(|t| phi_hat.mat_vec(t.as_slice()).map(DenseVector::from_raw))
        .collect::<Result<Vec<_>>>()?;
    let (alpha, condition_estimate, jittered) = solve_gram(&gram, &rhs)?;
    let mut loss = 0.0;
    let mut residual = Vec::with_capacity(alpha.len());
    for (t, a) in problem.targets.iter().zip(&alpha) {
        let proj = phi_hat.t_mat_vec(a.as_slice())?;
        let r: Vec<f64> = t.as_slice().iter().zip(&proj).map(|(x, y)| x - y).collect();
        // θᵀθ − θᵀΦ̂ᵀα, formed from the residual to avoid cancelling two large sums
        loss += dot(t.as_slice(), &r);
        residual.push(DenseVector::from_raw(r));
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("reconstruction loss"));
    }
    let normalized = loss / problem.target_sq_norm;
    if normalized < 0.0 {
        if normalized > -LOSS_CLAMP {
            loss = 0.0;
        } else {
            return Err(Error::NegativeLoss { loss: normalized });
        }
    }
    Ok(LossParts {
        loss,
        alpha,
        residual,
        condition_estimate,
        jittered,
    })
}

/// `‖P⊥_Φ̂ θ‖²` summed over targets, with `Φ̂` the features of `x_hat`.
pub fn recon_loss(problem: &ReconProblem, x_hat: &DenseMatrix) -> Result<LossParts> {
    problem.check_candidates(x_hat)?;
    let phi_hat = problem.map.feature_map(x_hat)?;
    loss_from_features(problem, &phi_hat)
}

/// Loss and gradient sharing one feature pass.
pub(crate) fn loss_and_grad(problem: &ReconProblem, x_hat: &DenseMatrix) -> Result<(LossParts, DenseMatrix)> {
    problem.check_candidates(x_hat)?;
    let map = problem.map;
    let act = map.activation();
    let pre = map.preactivations(x_hat)?;
    let (n, p) = pre.shape();
    let mut phi_hat = DenseMatrix::zeros(n, p);
    // holds φ′ first, then the pulled-back cotangent in place
    let mut pulled = DenseMatrix::zeros(n, p);
    act.evaluate(pre.as_slice(), phi_hat.as_mut_slice(), pulled.as_mut_slice());
    let parts = loss_from_features(problem, &phi_hat)?;

    // ∂L/∂Φ̂ = −2 Σ_t α_t r_tᵀ, then chain through φ′ and the first layer.
    let mut cotangent = vec![0.0; p];
    for i in 0..n {
        cotangent.iter_mut().for_each(|c| *c = 0.0);
        for (a, r) in parts.alpha.iter().zip(&parts.residual) {
            crate::numkit::axpy(-2.0 * a[i], r.as_slice(), &mut cotangent);
        }
        for (w, c) in pulled.row_mut(i).iter_mut().zip(&cotangent) {
            *w *= c;
        }
    }
    let grad = pulled.matmul(map.weights())?;
    if !grad.is_finite() {
        return Err(Error::NonFinite("reconstruction gradient"));
    }
    Ok((parts, grad))
}

/// Gradient of [`recon_loss`] with respect to the candidate rows.
pub fn recon_grad(problem: &ReconProblem, x_hat: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(loss_and_grad(problem, x_hat)?.1)
}
