//! Constrained-TV proximal step solved through its dual.
//!
//! For a single layer the subproblem is
//!
//! ```text
//! min_{0 ≤ L ≤ 1}  ½‖L − d‖² + β·Σ|∇L − E|
//! ```
//!
//! Writing `|x| = max_{|p| ≤ 1} p·x` and exchanging min and max gives a
//! smooth dual over the box `𝒫 = {(p,q) : |p|, |q| ≤ 1}`:
//!
//! ```text
//! H(p,q) = ½(‖d − β𝓛(p,q)‖² − ‖H_C(d − β𝓛(p,q))‖²) + β(⟨p,E₁⟩ + ⟨q,E₂⟩)
//! ∇H(p,q) = −β·𝓛ᵀ P_C(d − β𝓛(p,q)) + β(E₁,E₂)
//! ```
//!
//! where `𝓛` is [`div_adjoint`], `𝓛ᵀ` is [`grad_forward`] and `H_C = I − P_C`.
//! `∇H` is `8β²`-Lipschitz, which fixes the step of the fast gradient
//! projection. The primal solution is `P_C(d − β𝓛(p,q))`.

use crate::error::{Error, Result};
use crate::grid::{
    clamp_unit, div_adjoint, grad_forward, project_dual_ball, residual_from_box, DualPair, Image,
};

/// Default inner iteration cap.
pub const DEFAULT_FGP_ITERS: usize = 50;
/// Default stopping tolerance on the primal iterate (max-norm change).
pub const DEFAULT_FGP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxParams {
    pub beta: f64,
    pub max_iters: usize,
    /// Stop once `‖L_k − L_{k−1}‖_∞ ≤ tol`. Zero disables the test.
    pub tol: f64,
    /// Initial dual iterate; projected onto `𝒫` before use.
    pub warm_start: Option<DualPair>,
}

impl ProxParams {
    pub fn new(beta: f64) -> Self {
        ProxParams {
            beta,
            max_iters: DEFAULT_FGP_ITERS,
            tol: DEFAULT_FGP_TOL,
            warm_start: None,
        }
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_warm_start(mut self, dual: Option<DualPair>) -> Self {
        self.warm_start = dual;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::argument(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::argument(format!(
                "tolerance must be nonnegative, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::argument("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProxResult {
    /// Primal minimizer, inside `[0, 1]`.
    pub solution: Image,
    /// Final dual iterate, inside `𝒫`.
    pub dual: DualPair,
    pub iters_used: usize,
    pub duality_gap: f64,
}

fn check_inputs(pair: &DualPair, d: &Image, target: &DualPair) -> Result<()> {
    pair.check_fits(d, "dual variable")?;
    target.check_fits(d, "gradient target")
}

/// `d − β·𝓛(p,q)`.
fn shifted_target(pair: &DualPair, d: &Image, beta: f64) -> Image {
    let div = div_adjoint(pair);
    d.zip_map(&div, |x, v| x - beta * v)
}

/// Dual objective `H(p,q)`.
pub fn dual_objective(pair: &DualPair, d: &Image, beta: f64, target: &DualPair) -> Result<f64> {
    check_inputs(pair, d, target)?;
    let v = shifted_target(pair, d, beta);
    let outside = residual_from_box(&v).norm_sq();
    Ok(0.5 * (v.norm_sq() - outside) + beta * pair.dot(target))
}

/// Gradient `∇H(p,q)`.
pub fn grad_h(pair: &DualPair, d: &Image, beta: f64, target: &DualPair) -> Result<DualPair> {
    check_inputs(pair, d, target)?;
    Ok(grad_h_unchecked(pair, d, beta, target))
}

fn grad_h_unchecked(pair: &DualPair, d: &Image, beta: f64, target: &DualPair) -> DualPair {
    let primal = clamp_unit(&shifted_target(pair, d, beta));
    grad_forward(&primal).zip_map(target, |g, e| beta * (e - g))
}

/// `P_C(d − β𝓛(p,q))`.
pub fn primal_from_dual(pair: &DualPair, d: &Image, beta: f64) -> Result<Image> {
    pair.check_fits(d, "dual variable")?;
    Ok(clamp_unit(&shifted_target(pair, d, beta)))
}

/// Primal objective `½‖L − d‖² + β·Σ|∇L − E|`.
pub fn prox_objective(l: &Image, d: &Image, beta: f64, target: &DualPair) -> Result<f64> {
    l.check_dims(d, "prox objective")?;
    target.check_fits(l, "gradient target")?;
    let fit = 0.5 * l.zip_map(d, |a, b| a - b).norm_sq();
    let tv: f64 = grad_forward(l)
        .iter()
        .zip(target.iter())
        .map(|(g, e)| (g - e).abs())
        .sum();
    Ok(fit + beta * tv)
}

/// Primal objective at `L` minus the dual lower bound `½‖d‖² − H(p,q)`.
///
/// Both points must be feasible. The result is nonnegative up to rounding
/// and vanishes only at a saddle point.
pub fn duality_gap(
    l: &Image,
    pair: &DualPair,
    d: &Image,
    beta: f64,
    target: &DualPair,
) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if l.as_slice().iter().any(|&v| !(-SLACK..=1.0 + SLACK).contains(&v)) {
        return Err(Error::argument("primal point lies outside [0,1]"));
    }
    if pair.iter().any(|v| v.abs() > 1.0 + SLACK) {
        return Err(Error::argument("dual point lies outside the unit box"));
    }
    let primal = prox_objective(l, d, beta, target)?;
    let dual = 0.5 * d.norm_sq() - dual_objective(pair, d, beta, target)?;
    Ok(primal - dual)
}

/// Fast gradient projection on the dual, returning the recovered primal.
///
/// The momentum sequence `(p̃, q̃)` is kept unprojected; only the gradient
/// step result is projected onto `𝒫`. Iteration stops after `max_iters`
/// steps or once the primal iterate moves by at most `tol` in max-norm.
pub fn fgp_solve(d: &Image, target: &DualPair, params: &ProxParams) -> Result<ProxResult> {
    params.validate()?;
    target.check_fits(d, "gradient target")?;
    let (h, w) = d.dims();
    let beta = params.beta;

    let mut prev = match &params.warm_start {
        Some(ws) => {
            ws.check_fits(d, "warm start")?;
            project_dual_ball(ws)
        }
        None => DualPair::zeros(h, w),
    };

    if beta == 0.0 || h * w == 1 {
        let solution = clamp_unit(d);
        let duality_gap = duality_gap(&solution, &prev, d, beta, target)?;
        return Ok(ProxResult {
            solution,
            dual: prev,
            iters_used: 0,
            duality_gap,
        });
    }

    let step = 1.0 / (8.0 * beta * beta);
    let mut extrap = prev.clone();
    let mut t = 1.0_f64;
    let mut primal_prev = clamp_unit(&shifted_target(&prev, d, beta));
    let mut iters_used = 0;

    for _ in 0..params.max_iters {
        iters_used += 1;
        let grad = grad_h_unchecked(&extrap, d, beta, target);
        let next = project_dual_ball(&extrap.zip_map(&grad, |x, g| x - step * g));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        extrap = next.zip_map(&prev, |a, b| a + momentum * (a - b));

        let primal = clamp_unit(&shifted_target(&next, d, beta));
        let change = primal.max_abs_diff(&primal_prev);
        prev = next;
        primal_prev = primal;
        t = t_next;
        if params.tol > 0.0 && change <= params.tol {
            break;
        }
    }

    let duality_gap = duality_gap(&primal_prev, &prev, d, beta, target)?;
    Ok(ProxResult {
        solution: primal_prev,
        dual: prev,
        iters_used,
        duality_gap,
    })
}
