//! Hermite expansion of activations under the standard Gaussian.
//!
//! Coefficients use the orthonormal probabilists' basis, `E[h_l h_m] = δ_lm`,
//! so the identity map has `μ₁ = 1`. Smooth activations are integrated with
//! Gauss–Hermite; activations with kinks are integrated piecewise with
//! Gauss–Legendre panels split at the kinks, because Gauss–Hermite only
//! converges algebraically across a kink.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Activation;
use crate::numkit::symmetric_tridiagonal_eigen;

pub const DEFAULT_MAX_ORDER: usize = 8;
pub const DEFAULT_QUAD_POINTS: usize = 200;
/// Coefficients at or below this magnitude count as zero.
pub const COEFFICIENT_ZERO_TOL: f64 = 1e-8;
const CONVERGENCE_TOL: f64 = 1e-8;
/// The Gaussian mass beyond this radius is below 1e-55.
const TRUNCATION_RADIUS: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteProfile {
    pub activation: String,
    /// `μ_0 … μ_L`.
    pub coefficients: Vec<f64>,
    /// `E[φ(ρ)²]` for `ρ ~ N(0, 1)`.
    pub second_moment: f64,
    /// `Σ_{l ≥ 3} μ_l²` over the computed orders.
    pub sum_sq_order_ge_3: f64,
    pub mixed_parity_order_ge_3: bool,
}

impl HermiteProfile {
    pub fn max_order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn mu(&self, l: usize) -> f64 {
        self.coefficients[l]
    }

    /// `E[φ²] − Σ_{l ≤ order} μ_l²`.
    pub fn parseval_gap(&self, order: usize) -> f64 {
        let partial: f64 = self.coefficients[..=order.min(self.max_order())]
            .iter()
            .map(|m| m * m)
            .sum();
        self.second_moment - partial
    }
}

/// Hermite coefficients `μ_0 … μ_max_order` of `act`.
///
/// The quadrature is repeated at twice the node count; if any coefficient
/// moves by more than 1e-8 the result is rejected. The finer estimate is
/// returned.
pub fn hermite_coefficients(act: &Activation, max_order: usize, quad_points: usize) -> Result<HermiteProfile> {
    if quad_points < 2 * max_order + 2 {
        return Err(Error::InvalidArgument(format!(
            "{quad_points} quadrature points cannot resolve order {max_order}"
        )));
    }
    let coarse = expand(act, max_order, &gaussian_rule(act.kinks(), quad_points)?);
    let (fine, second_moment) = {
        let rule = gaussian_rule(act.kinks(), 2 * quad_points)?;
        let m2 = rule.iter().map(|&(x, w)| w * act.value(x).powi(2)).sum::<f64>();
        (expand(act, max_order, &rule), m2)
    };
    for (order, (a, b)) in coarse.iter().zip(&fine).enumerate() {
        let change = (a - b).abs();
        if change > CONVERGENCE_TOL {
            return Err(Error::Quadrature { order, change });
        }
    }

    let nonzero = |l: &usize| fine[*l].abs() > COEFFICIENT_ZERO_TOL;
    let odd = (3..=max_order).step_by(2).any(|l| nonzero(&l));
    let even = (4..=max_order).step_by(2).any(|l| nonzero(&l));
    Ok(HermiteProfile {
        activation: act.name().to_string(),
        sum_sq_order_ge_3: fine.iter().skip(3).map(|m| m * m).sum(),
        mixed_parity_order_ge_3: odd && even,
        second_moment,
        coefficients: fine,
    })
}

fn expand(act: &Activation, max_order: usize, rule: &[(f64, f64)]) -> Vec<f64> {
    let mut mu = vec![0.0; max_order + 1];
    let mut he = vec![0.0; max_order + 1];
    for &(x, w) in rule {
        if w == 0.0 {
            continue;
        }
        normalized_hermite(x, &mut he);
        let fw = w * act.value(x);
        for (m, h) in mu.iter_mut().zip(&he) {
            *m += fw * h;
        }
    }
    mu
}

/// Orthonormal probabilists' Hermite polynomials at `x`, orders `0..out.len()`.
pub fn normalized_hermite(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for l in 1..out.len() - 1 {
        out[l + 1] = (x * out[l] - (l as f64).sqrt() * out[l - 1]) / ((l + 1) as f64).sqrt();
    }
}

/// Nodes and weights integrating against the standard normal density.
fn gaussian_rule(kinks: &[f64], points: usize) -> Result<Vec<(f64, f64)>> {
    if kinks.is_empty() {
        return gauss_hermite(points);
    }
    let mut breaks = vec![-TRUNCATION_RADIUS];
    breaks.extend(kinks.iter().copied().filter(|k| k.abs() < TRUNCATION_RADIUS));
    breaks.push(TRUNCATION_RADIUS);
    breaks.dedup();

    // unit-width panels inside each smooth segment
    let mut panels = Vec::new();
    for pair in breaks.windows(2) {
        let count = (pair[1] - pair[0]).ceil().max(1.0) as usize;
        let width = (pair[1] - pair[0]) / count as f64;
        for i in 0..count {
            panels.push((pair[0] + i as f64 * width, pair[0] + (i + 1) as f64 * width));
        }
    }
    let per_panel = points.div_ceil(panels.len()).max(10);
    let base = gauss_legendre(per_panel)?;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut rule = Vec::with_capacity(panels.len() * per_panel);
    for (a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(t, w) in &base {
            let x = mid + half * t;
            rule.push((x, w * half * density(x)));
        }
    }
    Ok(rule)
}

/// Golub–Welsch for the probabilists' Hermite weight, normalized to unit mass.
pub fn gauss_hermite(points: usize) -> Result<Vec<(f64, f64)>> {
    let diag = vec![0.0; points];
    let off: Vec<f64> = (1..points).map(|k| (k as f64).sqrt()).collect();
    let (nodes, first) = symmetric_tridiagonal_eigen(&diag, &off)?;
    Ok(nodes.into_iter().zip(first).map(|(x, z)| (x, z * z)).collect())
}

/// Golub–Welsch for Legendre on [−1, 1].
pub fn gauss_legendre(points: usize) -> Result<Vec<(f64, f64)>> {
    let diag = vec![0.0; points];
    let off: Vec<f64> = (1..points)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (nodes, first) = symmetric_tridiagonal_eigen(&diag, &off)?;
    Ok(nodes.into_iter().zip(first).map(|(x, z)| (x, 2.0 * z * z)).collect())
}

/// Which of the activation conditions for sign-identifiable reconstruction hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub activation: String,
    pub mu0_zero: bool,
    pub mu1_nonzero: bool,
    pub mu2_zero: bool,
    pub mixed_parity: bool,
    /// Set when no two non-zero coefficients of order ≥ 3 have different
    /// parity: then `x` and `−x` give the same feature span and
    /// reconstructions may come back sign-flipped.
    pub sign_ambiguity_warning: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.mu0_zero && self.mu1_nonzero && self.mu2_zero && self.mixed_parity
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "yes" } else { "no" };
        writeln!(f, "activation: {}", self.activation)?;
        writeln!(f, "  mu_0 = 0:              {}", mark(self.mu0_zero))?;
        writeln!(f, "  mu_1 != 0:             {}", mark(self.mu1_nonzero))?;
        writeln!(f, "  mu_2 = 0:              {}", mark(self.mu2_zero))?;
        writeln!(f, "  mixed parity (l >= 3): {}", mark(self.mixed_parity))?;
        if self.sign_ambiguity_warning {
            write!(
                f,
                "  warning: sign ambiguity possible, reconstructions may match -x_i instead of x_i"
            )
        } else {
            write!(f, "  sign of each sample is identifiable")
        }
    }
}

pub fn assumption_check(profile: &HermiteProfile) -> AssumptionReport {
    let zero = |l: usize| profile.coefficients.get(l).is_none_or(|m| m.abs() <= COEFFICIENT_ZERO_TOL);
    AssumptionReport {
        activation: profile.activation.clone(),
        mu0_zero: zero(0),
        mu1_nonzero: !zero(1),
        mu2_zero: zero(2),
        mixed_parity: profile.mixed_parity_order_ge_3,
        sign_ambiguity_warning: !profile.mixed_parity_order_ge_3,
    }
}
