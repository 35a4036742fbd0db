//! The mixing model `Iᵢ = aᵢ·L¹ + L^{i+1}` and the composite objective.
//!
//! The stacked operator `A` is never formed; its action and the action of
//! its transpose are computed layer by layer.

use crate::error::{Error, Result};
use crate::grid::{grad_forward, DualPair, Image, LayerVector};

/// Observed mixtures plus everything needed to define the objective.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    mixtures: Vec<Image>,
    coeffs: Vec<f64>,
    targets: Vec<DualPair>,
    lambda: f64,
}

impl ProblemInstance {
    pub fn new(
        mixtures: Vec<Image>,
        coeffs: Vec<f64>,
        targets: Vec<DualPair>,
        lambda: f64,
    ) -> Result<Self> {
        let m = mixtures.len();
        if m == 0 {
            return Err(Error::shape("at least one mixture is required"));
        }
        if coeffs.len() != m {
            return Err(Error::shape(format!(
                "{m} mixtures but {} coefficients",
                coeffs.len()
            )));
        }
        if targets.len() != m + 1 {
            return Err(Error::shape(format!(
                "{m} mixtures need {} gradient targets, got {}",
                m + 1,
                targets.len()
            )));
        }
        for mix in &mixtures[1..] {
            mixtures[0].check_dims(mix, "mixture dimensions differ")?;
        }
        for (i, t) in targets.iter().enumerate() {
            t.check_fits(&mixtures[0], &format!("gradient target {}", i + 1))?;
        }
        if let Some(a) = coeffs.iter().find(|a| !a.is_finite()) {
            return Err(Error::argument(format!("non-finite mixing coefficient {a}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::argument(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(ProblemInstance {
            mixtures,
            coeffs,
            targets,
            lambda,
        })
    }

    pub fn mixtures(&self) -> &[Image] {
        &self.mixtures
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn targets(&self) -> &[DualPair] {
        &self.targets
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of mixtures `m`.
    pub fn mixture_count(&self) -> usize {
        self.mixtures.len()
    }

    pub fn layer_count(&self) -> usize {
        self.mixtures.len() + 1
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mixtures[0].dims()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        ProblemInstance::new(
            self.mixtures.clone(),
            self.coeffs.clone(),
            self.targets.clone(),
            lambda,
        )
    }

    pub(crate) fn check_layers(&self, layers: &LayerVector) -> Result<()> {
        if layers.count() != self.layer_count() || layers.dims() != self.dims() {
            return Err(Error::shape(format!(
                "instance expects {} layers of {:?}, got {} of {:?}",
                self.layer_count(),
                self.dims(),
                layers.count(),
                layers.dims()
            )));
        }
        Ok(())
    }
}

/// Predicted mixtures `Îᵢ = aᵢ·L¹ + L^{i+1}`.
pub fn apply_mixing(layers: &LayerVector, coeffs: &[f64]) -> Result<Vec<Image>> {
    if layers.count() != coeffs.len() + 1 {
        return Err(Error::shape(format!(
            "{} coefficients need {} layers, got {}",
            coeffs.len(),
            coeffs.len() + 1,
            layers.count()
        )));
    }
    let base = &layers.layers()[0];
    Ok(coeffs
        .iter()
        .zip(&layers.layers()[1..])
        .map(|(&a, refl)| base.zip_map(refl, |t, r| a * t + r))
        .collect())
}

fn mixing_residuals(layers: &LayerVector, inst: &ProblemInstance) -> Result<Vec<Image>> {
    inst.check_layers(layers)?;
    let predicted = apply_mixing(layers, inst.coeffs())?;
    Ok(predicted
        .iter()
        .zip(inst.mixtures())
        .map(|(pred, obs)| pred.zip_map(obs, |a, b| a - b))
        .collect())
}

/// `Aᵀ(A·l − b)`: the first block collects `Σᵢ aᵢ·rᵢ`, block `i+1` is `rᵢ`.
pub fn grad_f(layers: &LayerVector, inst: &ProblemInstance) -> Result<LayerVector> {
    let residuals = mixing_residuals(layers, inst)?;
    let (h, w) = inst.dims();
    let mut first = vec![0.0; h * w];
    for (&a, r) in inst.coeffs().iter().zip(&residuals) {
        for (acc, &v) in first.iter_mut().zip(r.as_slice()) {
            *acc += a * v;
        }
    }
    let mut blocks = Vec::with_capacity(inst.layer_count());
    blocks.push(Image::from_vec_unchecked(h, w, first));
    blocks.extend(residuals);
    Ok(LayerVector::from_layers_unchecked(blocks))
}

/// Largest eigenvalue of `AᵀA`, which is `Σᵢ aᵢ² + 1`.
pub fn lipschitz_f(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|a| a * a).sum::<f64>() + 1.0
}

/// The objective split into its data and gradient-penalty parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub smooth: f64,
    pub tv: f64,
}

/// `½Σᵢ‖Iᵢ − aᵢL¹ − L^{i+1}‖²` only.
pub fn smooth_objective(layers: &LayerVector, inst: &ProblemInstance) -> Result<f64> {
    let residuals = mixing_residuals(layers, inst)?;
    Ok(0.5 * residuals.iter().map(Image::norm_sq).sum::<f64>())
}

/// `Σ‖∇L − E‖₁` for one layer.
pub fn gradient_residual_l1(layer: &Image, target: &DualPair) -> Result<f64> {
    target.check_fits(layer, "gradient target")?;
    let grad = grad_forward(layer);
    Ok(grad.iter().zip(target.iter()).map(|(g, e)| (g - e).abs()).sum())
}

/// Full objective `λ·Σⁱ‖∇Lⁱ − Eⁱ‖₁ + ½Σᵢ‖Iᵢ − aᵢL¹ − L^{i+1}‖²`.
pub fn objective_f(layers: &LayerVector, inst: &ProblemInstance) -> Result<Objective> {
    let smooth = smooth_objective(layers, inst)?;
    let mut tv = 0.0;
    for (layer, target) in layers.layers().iter().zip(inst.targets()) {
        tv += gradient_residual_l1(layer, target)?;
    }
    let tv = inst.lambda() * tv;
    Ok(Objective {
        total: smooth + tv,
        smooth,
        tv,
    })
}
