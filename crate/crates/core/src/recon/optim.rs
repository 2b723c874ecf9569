use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gaussian_matrix, DenseMatrix, RngStream};
use crate::recon::problem::{loss_and_grad, ReconProblem};

/// Rows must stay on the radius-`√d` sphere to this relative tolerance.
pub const SPHERE_TOL: f64 = 1e-8;

/// Momentum gradient descent settings.
///
/// The step multiplies the gradient of the *normalized* loss
/// `L / Σ‖θ_t‖²`, so one setting works across model scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub step: f64,
    pub momentum: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub log_every: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self::synthetic()
    }
}

impl ReconConfig {
    pub fn synthetic() -> Self {
        Self {
            step: 20.0,
            momentum: 0.9,
            max_iter: 500_000,
            threshold: 1e-7,
            log_every: 100,
        }
    }

    /// The larger step used on standardized CIFAR images.
    pub fn cifar() -> Self {
        Self {
            step: 2e3,
            ..Self::synthetic()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidArgument(format!("threshold must be positive, got {}", self.threshold)));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub normalized_loss: f64,
    pub wall_ms: f64,
}

/// Candidate rows, momentum buffer, iteration count and logged losses.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconState {
    x_hat: DenseMatrix,
    momentum: DenseMatrix,
    iteration: usize,
    trace: Vec<TracePoint>,
}

fn check_sphere(x: &DenseMatrix) -> Result<()> {
    let radius = (x.cols() as f64).sqrt();
    for (i, n) in x.row_norms().into_iter().enumerate() {
        if !((n - radius).abs() <= SPHERE_TOL * radius) {
            return Err(Error::InvalidArgument(format!("candidate row {i} has norm {n}, expected {radius}")));
        }
    }
    Ok(())
}

impl ReconState {
    /// Starts from `x_hat` with zero momentum; rows must already be on the sphere.
    pub fn new(x_hat: DenseMatrix) -> Result<Self> {
        let (n, d) = x_hat.shape();
        if n == 0 || d == 0 {
            return Err(Error::EmptyShape { rows: n, cols: d });
        }
        check_sphere(&x_hat)?;
        Ok(Self {
            momentum: DenseMatrix::zeros(n, d),
            x_hat,
            iteration: 0,
            trace: Vec::new(),
        })
    }

    /// Standard Gaussian rows retracted onto the sphere.
    pub fn random(rng: &mut RngStream, n: usize, d: usize) -> Result<Self> {
        let mut x = gaussian_matrix(rng, n, d, 1.0)?;
        x.normalize_rows((d as f64).sqrt());
        Self::new(x)
    }

    pub(crate) fn from_parts(x_hat: DenseMatrix, momentum: DenseMatrix, iteration: usize, trace: Vec<TracePoint>) -> Result<Self> {
        if momentum.shape() != x_hat.shape() {
            return Err(Error::shape("momentum", format!("{:?}", x_hat.shape()), format!("{:?}", momentum.shape())));
        }
        let mut s = Self::new(x_hat)?;
        s.momentum = momentum;
        s.iteration = iteration;
        s.trace = trace;
        Ok(s)
    }

    pub fn x_hat(&self) -> &DenseMatrix {
        &self.x_hat
    }

    pub fn momentum(&self) -> &DenseMatrix {
        &self.momentum
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    pub fn into_x_hat(self) -> DenseMatrix {
        self.x_hat
    }

    fn log(&mut self, normalized_loss: f64, started: Instant) {
        if self.trace.last().map(|t| t.iteration) != Some(self.iteration) {
            self.trace.push(TracePoint {
                iteration: self.iteration,
                normalized_loss,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
}

/// One heavy-ball step followed by row-wise retraction to the sphere.
pub fn recon_step(state: ReconState, grad: &DenseMatrix, config: &ReconConfig) -> Result<ReconState> {
    if grad.shape() != state.x_hat.shape() {
        return Err(Error::shape("recon_step gradient", format!("{:?}", state.x_hat.shape()), format!("{:?}", grad.shape())));
    }
    let ReconState {
        x_hat,
        mut momentum,
        iteration,
        trace,
    } = state;
    for (m, g) in momentum.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *m = config.momentum * *m + g;
    }
    let mut next = x_hat.clone();
    crate::numkit::axpy(-config.step, momentum.as_slice(), next.as_mut_slice());
    let radius = (next.cols() as f64).sqrt();
    next.normalize_rows(radius);
    if !next.is_finite() || next.row_norms().contains(&0.0) {
        return Err(Error::ReconDiverged {
            iteration: iteration + 1,
            last_good: Some(Box::new(x_hat)),
        });
    }
    Ok(ReconState {
        x_hat: next,
        momentum,
        iteration: iteration + 1,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct ReconOutcome {
    pub x_hat: DenseMatrix,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    /// The state at exit, for checkpointing or resuming.
    pub state: ReconState,
}

/// Minimizes the normalized loss from Gaussian initial rows.
pub fn reconstruct(problem: &ReconProblem, config: &ReconConfig, rng: &mut RngStream) -> Result<ReconOutcome> {
    let state = ReconState::random(rng, problem.n_candidates(), problem.input_dim())?;
    reconstruct_from(problem, config, state)
}

/// Continues an existing run until the threshold or `config.max_iter`
/// total iterations.
pub fn reconstruct_from(problem: &ReconProblem, config: &ReconConfig, mut state: ReconState) -> Result<ReconOutcome> {
    config.validate()?;
    let want = (problem.n_candidates(), problem.input_dim());
    if state.x_hat.shape() != want {
        return Err(Error::shape("initial state", format!("{want:?}"), format!("{:?}", state.x_hat.shape())));
    }
    let started = Instant::now();
    let inv_norm = 1.0 / problem.target_sq_norm();
    loop {
        let (parts, mut grad) = match loss_and_grad(problem, &state.x_hat) {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                return Err(Error::ReconDiverged {
                    iteration: state.iteration,
                    last_good: Some(Box::new(state.x_hat)),
                })
            }
            Err(e) => return Err(e),
        };
        let normalized = parts.loss * inv_norm;
        let converged = normalized < config.threshold;
        if converged || state.iteration >= config.max_iter || state.iteration.is_multiple_of(config.log_every) {
            state.log(normalized, started);
        }
        if converged || state.iteration >= config.max_iter {
            return Ok(ReconOutcome {
                x_hat: state.x_hat.clone(),
                trace: state.trace.clone(),
                converged,
                iterations: state.iteration,
                final_loss: normalized,
                state,
            });
        }
        grad.as_mut_slice().iter_mut().for_each(|g| *g *= inv_norm);
        state = recon_step(state, &grad, config)?;
    }
}
