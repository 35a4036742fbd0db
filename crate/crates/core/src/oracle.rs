//! Slow reference solvers for cross-checking the production path.
//!
//! Not for production use. Everything here works on flat slices with
//! explicit index loops and shares no arithmetic with `grid`, `fgp` or
//! `esra`, so agreement between the two is meaningful. Results are compared
//! through objective values rather than iterates; subgradient iterates are not
//! unique.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::esra::EsraParams;
use crate::grid::{DualPair, Image, LayerVector};
use crate::mixing::ProblemInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub iters: usize,
    /// Step at iteration `k` is `step_c / √k`.
    pub step_c: f64,
    /// Seeds the random starting point.
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            iters: 1_000_000,
            step_c: 1.0,
            seed: 0,
        }
    }
}

/// `½‖x − d‖² + β·Σ|∇x − E|` evaluated with explicit neighbor loops.
pub fn naive_prox_objective(
    x: &[f64],
    height: usize,
    width: usize,
    d: &[f64],
    target: &DualPair,
    beta: f64,
) -> f64 {
    let (e1, e2) = (target.p(), target.q());
    let mut fit = 0.0;
    for k in 0..height * width {
        fit += 0.5 * (x[k] - d[k]) * (x[k] - d[k]);
    }
    let mut tv = 0.0;
    for i in 0..height {
        for j in 0..width {
            if i + 1 < height {
                tv += (x[(i + 1) * width + j] - x[i * width + j] - e1[i * width + j]).abs();
            }
            if j + 1 < width {
                tv += (x[i * width + j + 1] - x[i * width + j] - e2[i * (width - 1) + j]).abs();
            }
        }
    }
    fit + beta * tv
}

/// Full layer-separation objective evaluated pixel by pixel.
pub fn naive_objective(layers: &LayerVector, inst: &ProblemInstance) -> f64 {
    let (h, w) = inst.dims();
    let mut smooth = 0.0;
    for (i, (mix, &a)) in inst.mixtures().iter().zip(inst.coeffs()).enumerate() {
        let base = layers.layers()[0].as_slice();
        let refl = layers.layers()[i + 1].as_slice();
        let obs = mix.as_slice();
        for k in 0..h * w {
            let r = obs[k] - a * base[k] - refl[k];
            smooth += 0.5 * r * r;
        }
    }
    let mut tv = 0.0;
    for (layer, target) in layers.layers().iter().zip(inst.targets()) {
        tv += naive_prox_objective(layer.as_slice(), h, w, layer.as_slice(), target, 1.0);
    }
    smooth + inst.lambda() * tv
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Projected subgradient descent on the constrained-TV subproblem with
/// steps `c/√k`, returning the best iterate seen.
pub fn prox_subgradient_reference(
    d: &Image,
    target: &DualPair,
    beta: f64,
    cfg: &OracleConfig,
) -> Result<Image> {
    if !(beta >= 0.0) {
        return Err(Error::argument(format!("beta must be nonnegative, got {beta}")));
    }
    if cfg.iters == 0 || !(cfg.step_c > 0.0) {
        return Err(Error::argument("oracle needs iters ≥ 1 and a positive step"));
    }
    if target.dims() != d.dims() {
        return Err(Error::shape("gradient target does not fit the image"));
    }
    let (h, w) = d.dims();
    let dv = d.as_slice();
    let (e1, e2) = (target.p(), target.q());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Vec<f64> = (0..h * w).map(|_| rng.gen::<f64>()).collect();
    let mut best = x.clone();
    let mut best_val = naive_prox_objective(&x, h, w, dv, target, beta);
    let mut g = vec![0.0; h * w];

    for k in 1..=cfg.iters {
        for idx in 0..h * w {
            g[idx] = x[idx] - dv[idx];
        }
        for i in 0..h {
            for j in 0..w {
                let here = i * w + j;
                if i + 1 < h {
                    let below = here + w;
                    let s = beta * sign(x[below] - x[here] - e1[here]);
                    g[below] += s;
                    g[here] -= s;
                }
                if j + 1 < w {
                    let right = here + 1;
                    let s = beta * sign(x[right] - x[here] - e2[i * (w - 1) + j]);
                    g[right] += s;
                    g[here] -= s;
                }
            }
        }
        let step = cfg.step_c / (k as f64).sqrt();
        for idx in 0..h * w {
            x[idx] = (x[idx] - step * g[idx]).clamp(0.0, 1.0);
        }
        let val = naive_prox_objective(&x, h, w, dv, target, beta);
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&x);
        }
    }
    Image::new(h, w, best)
}

/// Exhaustive minimization over a uniform grid on `[0,1]^n`, `n ≤ 3` pixels.
pub fn grid_search_reference(
    d: &Image,
    target: &DualPair,
    beta: f64,
    resolution: usize,
) -> Result<Image> {
    let (h, w) = d.dims();
    let n = h * w;
    if n > 3 {
        return Err(Error::argument(format!(
            "grid search handles at most 3 pixels, got {n}"
        )));
    }
    if !(2..=2001).contains(&resolution) {
        return Err(Error::argument(format!(
            "resolution must be in 2..=2001, got {resolution}"
        )));
    }
    if target.dims() != d.dims() {
        return Err(Error::shape("gradient target does not fit the image"));
    }
    let spacing = 1.0 / (resolution - 1) as f64;
    let total = resolution.pow(n as u32);
    let mut x = vec![0.0; n];
    let mut best = vec![0.0; n];
    let mut best_val = f64::INFINITY;
    for code in 0..total {
        let mut c = code;
        for v in x.iter_mut() {
            *v = (c % resolution) as f64 * spacing;
            c /= resolution;
        }
        let val = naive_prox_objective(&x, h, w, d.as_slice(), target, beta);
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&x);
        }
    }
    Image::new(h, w, best)
}

/// Iterates `l_1, …, l_N` of accelerated projected gradient on the
/// penalty-free problem, using the monolithic stacked vector.
pub fn accelerated_projected_gradient_trajectory(
    inst: &ProblemInstance,
    params: &EsraParams,
) -> Result<Vec<LayerVector>> {
    if inst.lambda() != 0.0 {
        return Err(Error::argument(
            "the accelerated projected gradient reference requires lambda = 0",
        ));
    }
    let (h, w) = inst.dims();
    let n = h * w;
    let m = inst.mixture_count();
    let a = inst.coeffs();
    let step = params
        .step_constant
        .unwrap_or_else(|| 2.0 * (a.iter().map(|c| c * c).sum::<f64>() + 1.0));

    let mut x_prev: Vec<f64> = match &params.init {
        Some(init) => init.to_flat(),
        None => vec![0.0; (m + 1) * n],
    };
    if x_prev.len() != (m + 1) * n {
        return Err(Error::shape("initial point does not match the instance"));
    }
    let mut y = x_prev.clone();
    let mut t = 1.0_f64;
    let mut grad = vec![0.0; (m + 1) * n];
    let mut out = Vec::with_capacity(params.total_iters);

    for _ in 0..params.total_iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..m {
            let b = inst.mixtures()[i].as_slice();
            for px in 0..n {
                let r = a[i] * y[px] + y[(i + 1) * n + px] - b[px];
                grad[px] += a[i] * r;
                grad[(i + 1) * n + px] = r;
            }
        }
        let x: Vec<f64> = y
            .iter()
            .zip(&grad)
            .map(|(yv, g)| (yv - g / step).clamp(0.0, 1.0))
            .collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        for idx in 0..y.len() {
            y[idx] = x[idx] + (t - 1.0) / t_next * (x[idx] - x_prev[idx]);
        }
        t = t_next;
        out.push(unflatten(&x, m + 1, h, w)?);
        x_prev = x;
    }
    Ok(out)
}

/// Final iterate of [`accelerated_projected_gradient_trajectory`].
pub fn accelerated_projected_gradient_reference(
    inst: &ProblemInstance,
    params: &EsraParams,
) -> Result<LayerVector> {
    accelerated_projected_gradient_trajectory(inst, params)?
        .pop()
        .ok_or_else(|| Error::argument("total_iters must be positive"))
}

fn unflatten(flat: &[f64], count: usize, h: usize, w: usize) -> Result<LayerVector> {
    let layers = (0..count)
        .map(|i| Image::new(h, w, flat[i * h * w..(i + 1) * h * w].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    LayerVector::new(layers)
}

/// Power iteration for the top eigenpair of `AᵀA` on `(m+1)` layers of
/// `h×w` pixels. Returns the Rayleigh quotient and a unit direction in the
/// stacked layout.
pub fn top_mixing_eigenpair(
    coeffs: &[f64],
    height: usize,
    width: usize,
    iters: usize,
    seed: u64,
) -> (f64, Vec<f64>) {
    let n = height * width;
    let m = coeffs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..(m + 1) * n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let apply = |v: &[f64]| {
        let mut out = vec![0.0; v.len()];
        for (i, &a) in coeffs.iter().enumerate() {
            for px in 0..n {
                let r = a * v[px] + v[(i + 1) * n + px];
                out[px] += a * r;
                out[(i + 1) * n + px] += r;
            }
        }
        out
    };
    let normalize = |v: &mut Vec<f64>| {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    };
    normalize(&mut v);
    for _ in 0..iters {
        v = apply(&v);
        normalize(&mut v);
    }
    let av = apply(&v);
    let rayleigh = v.iter().zip(&av).map(|(a, b)| a * b).sum();
    (rayleigh, v)
}
