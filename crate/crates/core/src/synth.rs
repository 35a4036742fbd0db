//! Seeded synthetic layers and instances for demos, benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{grad_forward, DualPair, Image, LayerVector};
use crate::mixing::{apply_mixing, ProblemInstance};

/// Piecewise-constant layers built from random rectangles.
///
/// The first layer takes levels up to 204/255, the others up to 102/255, so
/// mixtures with coefficients below 0.75 stay inside `[0,1]`. Every value is
/// a multiple of 1/255 and survives an 8-bit PGM round trip unchanged.
pub fn synthetic_layers(height: usize, width: usize, count: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|layer| {
            let top: u32 = if layer == 0 { 204 } else { 102 };
            let mut data = vec![rng.gen_range(0..=top) as f64 / 255.0; height * width];
            let rects = 3 + rng.gen_range(0..4);
            for _ in 0..rects {
                let r0 = rng.gen_range(0..height);
                let c0 = rng.gen_range(0..width);
                let r1 = rng.gen_range(r0..height) + 1;
                let c1 = rng.gen_range(c0..width) + 1;
                let level = rng.gen_range(0..=top) as f64 / 255.0;
                for r in r0..r1 {
                    data[r * width + c0..r * width + c1].fill(level);
                }
            }
            Image::from_vec_unchecked(height, width, data)
        })
        .collect()
}

/// Default mixing coefficients for `m` mixtures: 0.7, 0.6, 0.5, …
pub fn default_coeffs(m: usize) -> Vec<f64> {
    (0..m).map(|i| (0.7 - 0.1 * i as f64).max(0.1)).collect()
}

pub fn exact_targets(layers: &[Image]) -> Vec<DualPair> {
    layers.iter().map(grad_forward).collect()
}

/// A noise-free instance with exact gradient targets, plus its ground truth.
pub fn random_instance(
    height: usize,
    width: usize,
    m: usize,
    lambda: f64,
    seed: u64,
) -> Result<(ProblemInstance, LayerVector)> {
    let truth = LayerVector::new(synthetic_layers(height, width, m + 1, seed))?;
    let coeffs = default_coeffs(m);
    let mixtures = apply_mixing(&truth, &coeffs)?;
    let targets = exact_targets(truth.layers());
    Ok((
        ProblemInstance::new(mixtures, coeffs, targets, lambda)?,
        truth,
    ))
}
