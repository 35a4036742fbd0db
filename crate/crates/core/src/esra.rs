//! Accelerated proximal-gradient outer loop.
//!
//! Each iteration takes a gradient step on the data term from the
//! extrapolated point `Y_k`, splits the result into one target per layer and
//! solves the `m+1` constrained-TV problems independently. The layer solves
//! run on a rayon pool; each is a pure function of its inputs and results are
//! collected in layer order, so the output does not depend on the worker
//! count.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fgp::{fgp_solve, ProxParams, ProxResult, DEFAULT_FGP_ITERS, DEFAULT_FGP_TOL};
use crate::grid::{DualPair, Image, LayerVector};
use crate::mixing::{grad_f, lipschitz_f, objective_f, Objective, ProblemInstance};

pub const DEFAULT_OUTER_ITERS: usize = 100;
pub const DEFAULT_STEP_MULTIPLIER: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct EsraParams {
    pub total_iters: usize,
    /// Constant step `L_s`; `None` means `2·L(f)`.
    pub step_constant: Option<f64>,
    pub fgp_iters: usize,
    pub fgp_tol: f64,
    /// Start each inner solve from the previous outer iteration's duals.
    pub warm_start: bool,
    /// Size of the worker pool for the per-layer solves; `None` uses the
    /// rayon default.
    pub workers: Option<usize>,
    /// Starting point `l₀`; zero when unset.
    pub init: Option<LayerVector>,
}

impl Default for EsraParams {
    fn default() -> Self {
        EsraParams {
            total_iters: DEFAULT_OUTER_ITERS,
            step_constant: None,
            fgp_iters: DEFAULT_FGP_ITERS,
            fgp_tol: DEFAULT_FGP_TOL,
            warm_start: false,
            workers: None,
            init: None,
        }
    }
}

impl EsraParams {
    /// The step constant for `inst`, after checking it is an upper bound on
    /// `L(f)`.
    pub fn resolve_step(&self, coeffs: &[f64]) -> Result<f64> {
        let lf = lipschitz_f(coeffs);
        let step = self.step_constant.unwrap_or(DEFAULT_STEP_MULTIPLIER * lf);
        if !step.is_finite() || step < lf * (1.0 - 1e-12) {
            return Err(Error::argument(format!(
                "step constant {step} is below the Lipschitz constant {lf}"
            )));
        }
        Ok(step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: Objective,
    /// Wall time since the solve started.
    pub elapsed_ms: f64,
    /// Inner iterations used, one entry per layer.
    pub fgp_iters: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective.total).collect()
    }
}

/// `t_k = (1 + √(1 + 4t_{k−1}²)) / 2`.
pub fn momentum_t(t_prev: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt())
}

/// `Y_{k+1} = l_k + ((t_{k−1} − 1)/t_k)·(l_k − l_{k−1})`.
pub fn extrapolate(
    current: &LayerVector,
    previous: &LayerVector,
    t_prev: f64,
    t_curr: f64,
) -> Result<LayerVector> {
    current.check_same(previous, "extrapolation")?;
    let coef = (t_prev - 1.0) / t_curr;
    Ok(LayerVector::from_layers_unchecked(
        current
            .layers()
            .iter()
            .zip(previous.layers())
            .map(|(a, b)| a.zip_map(b, |x, y| x + coef * (x - y)))
            .collect(),
    ))
}

/// Per-layer prox targets `dᵢ = Yⁱ − (1/L_s)·(∇f(Y))ⁱ`.
pub fn split_prox_targets(
    point: &LayerVector,
    inst: &ProblemInstance,
    step: f64,
) -> Result<Vec<Image>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::argument(format!(
            "step constant must be positive, got {step}"
        )));
    }
    let grad = grad_f(point, inst)?;
    let inv = 1.0 / step;
    Ok(point
        .layers()
        .iter()
        .zip(grad.layers())
        .map(|(y, g)| y.zip_map(g, |a, b| a - inv * b))
        .collect())
}

/// Output of one parallel prox step.
#[derive(Debug, Clone)]
pub struct PactvOutput {
    pub layers: LayerVector,
    pub duals: Vec<DualPair>,
    pub iters: Vec<usize>,
    pub gaps: Vec<f64>,
}

/// Worker pool for the per-layer solves.
pub struct ProxPool {
    pool: Option<rayon::ThreadPool>,
}

impl ProxPool {
    /// `Some(1)` runs on the calling thread.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        match workers {
            Some(0) => Err(Error::argument("worker count must be positive")),
            Some(1) => Ok(ProxPool { pool: None }),
            other => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(other.unwrap_or(0))
                    .build()
                    .map_err(|e| Error::argument(format!("cannot start worker pool: {e}")))?;
                Ok(ProxPool { pool: Some(pool) })
            }
        }
    }

    /// Solves the `m+1` constrained-TV problems, one per entry of `targets`.
    pub fn prox(
        &self,
        targets: &[Image],
        inst: &ProblemInstance,
        beta: f64,
        settings: &ProxParams,
        warm: Option<&[DualPair]>,
    ) -> Result<PactvOutput> {
        if targets.len() != inst.layer_count() {
            return Err(Error::shape(format!(
                "{} prox targets for {} layers",
                targets.len(),
                inst.layer_count()
            )));
        }
        if let Some(w) = warm {
            if w.len() != targets.len() {
                return Err(Error::shape(format!(
                    "{} warm-start duals for {} layers",
                    w.len(),
                    targets.len()
                )));
            }
        }
        let solve_one = |index: usize| -> Result<ProxResult> {
            let params = ProxParams {
                beta,
                max_iters: settings.max_iters,
                tol: settings.tol,
                warm_start: warm.map(|w| w[index].clone()),
            };
            fgp_solve(&targets[index], &inst.targets()[index], &params).map_err(|e| Error::Layer {
                index: index + 1,
                source: Box::new(e),
            })
        };
        let results: Result<Vec<ProxResult>> = match &self.pool {
            None => (0..targets.len()).map(solve_one).collect(),
            Some(pool) => pool.install(|| {
                (0..targets.len())
                    .into_par_iter()
                    .map(solve_one)
                    .collect()
            }),
        };
        let results = results?;

        let mut layers = Vec::with_capacity(results.len());
        let mut duals = Vec::with_capacity(results.len());
        let mut iters = Vec::with_capacity(results.len());
        let mut gaps = Vec::with_capacity(results.len());
        for r in results {
            layers.push(r.solution);
            duals.push(r.dual);
            iters.push(r.iters_used);
            gaps.push(r.duality_gap);
        }
        Ok(PactvOutput {
            layers: LayerVector::new(layers)?,
            duals,
            iters,
            gaps,
        })
    }
}

/// One parallel prox step on a throwaway pool.
pub fn pactv_prox(
    targets: &[Image],
    inst: &ProblemInstance,
    beta: f64,
    settings: &ProxParams,
    workers: Option<usize>,
) -> Result<LayerVector> {
    Ok(ProxPool::new(workers)?
        .prox(targets, inst, beta, settings, None)?
        .layers)
}

pub fn esra_solve(
    inst: &ProblemInstance,
    params: &EsraParams,
) -> Result<(LayerVector, SolveTrace)> {
    esra_solve_observed(inst, params, |_, _| {})
}

/// Like [`esra_solve`], calling `observer(k, l_k)` after every iteration.
pub fn esra_solve_observed(
    inst: &ProblemInstance,
    params: &EsraParams,
    mut observer: impl FnMut(usize, &LayerVector),
) -> Result<(LayerVector, SolveTrace)> {
    if params.total_iters == 0 {
        return Err(Error::argument("total_iters must be positive"));
    }
    let step = params.resolve_step(inst.coeffs())?;
    let beta = inst.lambda() / step;
    let (h, w) = inst.dims();

    let mut previous = match &params.init {
        Some(init) => {
            inst.check_layers(init)?;
            if !init.layers().iter().all(Image::is_intensity) {
                return Err(Error::argument("initial layers must lie in [0,1]"));
            }
            init.clone()
        }
        None => LayerVector::zeros(inst.layer_count(), h, w),
    };
    let pool = ProxPool::new(params.workers)?;
    let settings = ProxParams::new(beta)
        .with_iters(params.fgp_iters)
        .with_tol(params.fgp_tol);

    let start = Instant::now();
    let mut point = previous.clone();
    let mut t_prev = 1.0;
    let mut duals: Option<Vec<DualPair>> = None;
    let mut trace = SolveTrace::default();

    for k in 1..=params.total_iters {
        let targets = split_prox_targets(&point, inst, step)?;
        let warm = if params.warm_start { duals.as_deref() } else { None };
        let out = pool.prox(&targets, inst, beta, &settings, warm)?;
        let current = out.layers;

        let t_curr = momentum_t(t_prev);
        point = extrapolate(&current, &previous, t_prev, t_curr)?;

        let objective = objective_f(&current, inst)?;
        if !objective.total.is_finite() {
            return Err(Error::Numerical {
                iter: k,
                msg: format!("objective evaluated to {}", objective.total),
            });
        }
        trace.records.push(TraceRecord {
            iter: k,
            objective,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            fgp_iters: out.iters,
        });
        observer(k, &current);

        if params.warm_start {
            duals = Some(out.duals);
        }
        previous = current;
        t_prev = t_curr;
    }
    Ok((previous, trace))
}
