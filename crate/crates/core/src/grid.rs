//! Grid types and the discrete difference operators.
//!
//! `grad_forward` takes an `h×w` image to the pair of forward differences
//! `(p, q)`, with `p` holding the `(h−1)×w` vertical differences and `q` the
//! `h×(w−1)` horizontal ones. `div_adjoint` is its exact adjoint, so
//! `⟨div_adjoint(p,q), L⟩ = ⟨(p,q), grad_forward(L)⟩` holds for every image
//! `L`. Entries of `p`/`q` outside the grid are treated as zero.

use crate::error::{Error, Result};

/// An `h×w` real image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "{height}x{width} image needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "non-finite pixel at index {pos}"
            )));
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    /// Builds an image from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        assert!(
            rows.iter().all(|r| r.as_ref().len() == width),
            "ragged rows"
        );
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Image::new(height, width, data).expect("valid literal image")
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Image {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub(crate) fn from_vec_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Image {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// True when every value lies in `[0, 1]`.
    pub fn is_intensity(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image::from_vec_unchecked(
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise `f(self, other)`; dimensions must already match.
    pub(crate) fn zip_map(&self, other: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
        debug_assert!(self.same_dims(other));
        Image::from_vec_unchecked(
            self.height,
            self.width,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn dot(&self, other: &Image) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A pair `(p, q)` with `p` of shape `(h−1)×w` and `q` of shape `h×(w−1)`.
///
/// Dual variables, gradients of images and gradient targets all use this
/// layout. `h = 1` gives an empty `p`, `w = 1` an empty `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    height: usize,
    width: usize,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl DualPair {
    pub fn new(height: usize, width: usize, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "pair dimensions must be positive, got {height}x{width}"
            )));
        }
        let (np, nq) = Self::component_lens(height, width);
        if p.len() != np || q.len() != nq {
            return Err(Error::shape(format!(
                "pair for {height}x{width} grid needs p[{np}] and q[{nq}], got p[{}] and q[{}]",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(Error::argument("non-finite entry in pair"));
        }
        Ok(DualPair {
            height,
            width,
            p,
            q,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "pair dimensions must be positive");
        let (np, nq) = Self::component_lens(height, width);
        DualPair {
            height,
            width,
            p: vec![0.0; np],
            q: vec![0.0; nq],
        }
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        p: Vec<f64>,
        q: Vec<f64>,
    ) -> Self {
        debug_assert_eq!((p.len(), q.len()), Self::component_lens(height, width));
        DualPair {
            height,
            width,
            p,
            q,
        }
    }

    /// Lengths of the `p` and `q` blocks for an `h×w` grid.
    pub fn component_lens(height: usize, width: usize) -> (usize, usize) {
        ((height - 1) * width, height * (width - 1))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p_mut(&mut self) -> &mut [f64] {
        &mut self.p
    }

    pub fn q_mut(&mut self) -> &mut [f64] {
        &mut self.q
    }

    /// All entries, `p` block first.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.p.iter().chain(&self.q)
    }

    pub fn fits(&self, image: &Image) -> bool {
        self.dims() == image.dims()
    }

    pub(crate) fn check_fits(&self, image: &Image, what: &str) -> Result<()> {
        if self.fits(image) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: pair for {}x{} grid used with {}x{} image",
                self.height,
                self.width,
                image.height(),
                image.width()
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DualPair {
        DualPair::from_parts_unchecked(
            self.height,
            self.width,
            self.p.iter().map(|&v| f(v)).collect(),
            self.q.iter().map(|&v| f(v)).collect(),
        )
    }

    pub(crate) fn zip_map(&self, other: &DualPair, f: impl Fn(f64, f64) -> f64) -> DualPair {
        debug_assert_eq!(self.dims(), other.dims());
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
        DualPair::from_parts_unchecked(
            self.height,
            self.width,
            zip(&self.p, &other.p),
            zip(&self.q, &other.q),
        )
    }

    pub fn dot(&self, other: &DualPair) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Sum of absolute values over both blocks.
    pub fn l1_norm(&self) -> f64 {
        self.iter().map(|v| v.abs()).sum()
    }

    /// True when every entry lies in `[−1, 1]`.
    pub fn is_dual_feasible(&self) -> bool {
        self.iter().all(|v| v.abs() <= 1.0)
    }
}

/// The `m+1` latent layers, all of the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerVector {
    layers: Vec<Image>,
}

impl LayerVector {
    pub fn new(layers: Vec<Image>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::shape(format!(
                "need at least two layers, got {}",
                layers.len()
            )));
        }
        for layer in &layers[1..] {
            layers[0].check_dims(layer, "layer dimensions differ")?;
        }
        Ok(LayerVector { layers })
    }

    pub fn zeros(count: usize, height: usize, width: usize) -> Self {
        assert!(count >= 2, "need at least two layers");
        LayerVector {
            layers: vec![Image::zeros(height, width); count],
        }
    }

    pub(crate) fn from_layers_unchecked(layers: Vec<Image>) -> Self {
        LayerVector { layers }
    }

    pub fn layers(&self) -> &[Image] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Image> {
        self.layers
    }

    pub fn count(&self) -> usize {
        self.layers.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.layers[0].dims()
    }

    /// The flattened stack `[vec(L¹); …; vec(L^{m+1})]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.as_slice().iter().copied())
            .collect()
    }

    pub(crate) fn check_same(&self, other: &LayerVector, what: &str) -> Result<()> {
        if self.count() != other.count() || self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "{what}: {} layers of {:?} vs {} layers of {:?}",
                self.count(),
                self.dims(),
                other.count(),
                other.dims()
            )));
        }
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.layers.iter().map(Image::norm_sq).sum()
    }

    pub fn max_abs_diff(&self, other: &LayerVector) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Forward differences: `p[i,j] = L[i+1,j] − L[i,j]`, `q[i,j] = L[i,j+1] − L[i,j]`.
pub fn grad_forward(image: &Image) -> DualPair {
    let (h, w) = image.dims();
    let v = image.as_slice();
    let mut p = Vec::with_capacity((h - 1) * w);
    for i in 0..h.saturating_sub(1) {
        for j in 0..w {
            p.push(v[(i + 1) * w + j] - v[i * w + j]);
        }
    }
    let mut q = Vec::with_capacity(h * (w - 1));
    for i in 0..h {
        let row = &v[i * w..(i + 1) * w];
        q.extend(row.windows(2).map(|pair| pair[1] - pair[0]));
    }
    DualPair::from_parts_unchecked(h, w, p, q)
}

/// Adjoint of [`grad_forward`]:
/// `out[i,j] = p[i−1,j] − p[i,j] + q[i,j−1] − q[i,j]`, with out-of-grid
/// entries of `p` and `q` read as zero.
pub fn div_adjoint(pair: &DualPair) -> Image {
    let (h, w) = pair.dims();
    let (p, q) = (pair.p(), pair.q());
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            if i > 0 {
                acc += p[(i - 1) * w + j];
            }
            if i + 1 < h {
                acc -= p[i * w + j];
            }
            if j > 0 {
                acc += q[i * (w - 1) + j - 1];
            }
            if j + 1 < w {
                acc -= q[i * (w - 1) + j];
            }
            out[i * w + j] = acc;
        }
    }
    Image::from_vec_unchecked(h, w, out)
}

/// Elementwise clamp to `[lo, hi]`.
pub fn project_box(image: &Image, lo: f64, hi: f64) -> Result<Image> {
    if !(lo <= hi) {
        return Err(Error::argument(format!(
            "box bounds out of order: lo={lo} hi={hi}"
        )));
    }
    Ok(image.map(|v| v.clamp(lo, hi)))
}

pub(crate) fn clamp_unit(image: &Image) -> Image {
    image.map(|v| v.clamp(0.0, 1.0))
}

/// Clamps every entry of both blocks to `[−1, 1]`.
pub fn project_dual_ball(pair: &DualPair) -> DualPair {
    pair.map(|v| v.clamp(-1.0, 1.0))
}

/// `L − P_C(L)` for the unit box `C`.
pub fn residual_from_box(image: &Image) -> Image {
    image.map(|v| v - v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grad_forward(&Image::filled(5, 3, 0.42));
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(g.p().len(), 12);
        assert_eq!(g.q().len(), 10);
    }

    #[test]
    fn gradient_two_by_two() {
        let g = grad_forward(&Image::from_rows(&[[0.0, 1.0], [2.0, 3.0]]));
        assert_eq!(g.p(), &[2.0, 2.0]);
        assert_eq!(g.q(), &[1.0, 1.0]);
    }

    #[test]
    fn single_pixel_has_empty_pair() {
        let g = grad_forward(&Image::filled(1, 1, 3.0));
        assert!(g.p().is_empty() && g.q().is_empty());
        assert_eq!(div_adjoint(&g), Image::zeros(1, 1));
    }

    #[test]
    fn degenerate_rows_and_columns() {
        let row = grad_forward(&Image::from_rows(&[[1.0, 4.0, 2.0]]));
        assert!(row.p().is_empty());
        assert_eq!(row.q(), &[3.0, -2.0]);
        let col = grad_forward(&Image::from_rows(&[[1.0], [4.0], [2.0]]));
        assert_eq!(col.p(), &[3.0, -2.0]);
        assert!(col.q().is_empty());
    }

    #[test]
    fn divergence_hand_case() {
        let pair = DualPair::new(2, 2, vec![2.0, 2.0], vec![1.0, 1.0]).unwrap();
        let div = div_adjoint(&pair);
        assert_eq!(div, Image::from_rows(&[[-3.0, -1.0], [1.0, 3.0]]));
        let img = Image::from_rows(&[[0.0, 1.0], [2.0, 3.0]]);
        assert_eq!(div.dot(&img), 10.0);
        assert_eq!(pair.dot(&grad_forward(&img)), 10.0);
    }

    #[test]
    fn divergence_of_zero_is_zero() {
        assert_eq!(div_adjoint(&DualPair::zeros(4, 3)), Image::zeros(4, 3));
    }

    #[test]
    fn mismatched_pair_is_rejected() {
        let err = DualPair::new(2, 2, vec![1.0], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn box_projection() {
        let img = Image::from_rows(&[[1.3, -0.2, 0.5]]);
        assert_eq!(
            project_box(&img, 0.0, 1.0).unwrap().as_slice(),
            &[1.0, 0.0, 0.5]
        );
        assert!(matches!(
            project_box(&img, 1.0, 0.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn dual_projection() {
        let pair = DualPair::new(2, 2, vec![2.5, 0.3], vec![-3.0, -0.9]).unwrap();
        let proj = project_dual_ball(&pair);
        assert_eq!(proj.p(), &[1.0, 0.3]);
        assert_eq!(proj.q(), &[-1.0, -0.9]);
        assert_eq!(project_dual_ball(&proj), proj);
    }

    #[test]
    fn box_residual() {
        let r = residual_from_box(&Image::from_rows(&[[1.3, 0.5, -0.2]]));
        let expect = [0.3, 0.0, -0.2];
        for (a, b) in r.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_pixels_are_rejected() {
        assert!(Image::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn layer_vector_requires_matching_layers() {
        assert!(LayerVector::new(vec![Image::zeros(2, 2)]).is_err());
        assert!(LayerVector::new(vec![Image::zeros(2, 2), Image::zeros(2, 3)]).is_err());
        assert!(LayerVector::new(vec![Image::zeros(2, 2), Image::zeros(2, 2)]).is_ok());
    }
}
