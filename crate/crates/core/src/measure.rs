//! Finitely supported probability measures on `ℝ^d`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{norm, sqrt};

/// Tolerance on `|Σ w − 1|` for validated measures.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Radius of the ball that private algorithms assume data lives in.
pub const DOMAIN_RADIUS: f64 = 0.5;

/// A probability measure `Σ_i w_i δ_{x_i}` stored row-major.
///
/// Invariants: at least one atom, finite coordinates, nonnegative weights
/// summing to 1 within [`WEIGHT_TOLERANCE`]. Duplicate atoms are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(r.dim, r.coords, r.weights)
    }
}

impl DiscreteMeasure {
    /// Validating constructor. `coords.len()` must equal `dim * weights.len()`.
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::unchecked_shape(dim, coords, weights)?;
        let sum: f64 = m.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::WeightSum { sum });
        }
        Ok(m)
    }

    /// Like [`DiscreteMeasure::new`] but rescales the weights to sum to 1.
    /// Weights already within [`WEIGHT_TOLERANCE`] of unit mass are kept
    /// bit-for-bit. Returns the measure and the original weight sum.
    pub fn normalized(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<(Self, f64)> {
        let mut m = Self::unchecked_shape(dim, coords, weights)?;
        let sum: f64 = m.weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::WeightSum { sum });
        }
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            for w in &mut m.weights {
                *w /= sum;
            }
        }
        Ok((m, sum))
    }

    /// Uniform weights over the rows of `coords`.
    pub fn uniform(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::Invalid("coordinate buffer is not a multiple of the dimension"));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        Self::new(dim, coords, alloc::vec![1.0 / n as f64; n])
    }

    /// Uniform measure from a list of points of equal length.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyMeasure)?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::uniform(dim, coords)
    }

    /// Dirac mass at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::from_points(&[x])
    }

    fn unchecked_shape(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("dimension must be positive"));
        }
        if weights.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if coords.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coordinates"));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite("weights"));
            }
            if value < 0.0 {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        Ok(Self { dim, coords, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Always false; measures have at least one atom.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major coordinates, `len() * dim()` values.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// True when every weight equals `1/len()` within the weight tolerance.
    pub fn has_uniform_weights(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= WEIGHT_TOLERANCE)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        for (x, w) in self.points().zip(&self.weights) {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += w * xi;
            }
        }
        out
    }

    /// Largest atom norm.
    pub fn radius(&self) -> f64 {
        self.points().map(norm).fold(0.0, f64::max)
    }

    /// Errors with [`Error::OutsideBall`] if an atom lies outside `B(0, 1/2)`.
    pub fn check_bounded(&self) -> Result<()> {
        for (index, x) in self.points().enumerate() {
            let n = norm(x);
            if n > DOMAIN_RADIUS * (1.0 + 1e-12) {
                return Err(Error::OutsideBall { index, norm: n });
            }
        }
        Ok(())
    }

    /// Same weights, points mapped through `f` into dimension `dim`.
    pub fn map_points(&self, dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut coords = alloc::vec![0.0; dim * self.len()];
        for (x, out) in self.points().zip(coords.chunks_exact_mut(dim)) {
            f(x, out);
        }
        Self::new(dim, coords, self.weights.clone())
    }

    /// Radially shrinks atoms outside `B(0, radius)` onto its boundary.
    pub fn clipped_to_ball(&self, radius: f64) -> Self {
        let mut out = self.clone();
        for x in out.coords.chunks_exact_mut(self.dim) {
            clip_to_ball(x, radius);
        }
        out
    }

    /// Sub-measure on the given atom indices with weights renormalized.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        let mut weights = Vec::with_capacity(indices.len());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
            weights.push(self.weights[i]);
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Self::uniform(self.dim, coords);
        }
        Self::normalized(self.dim, coords, weights).map(|(m, _)| m)
    }
}

/// Shrinks `x` radially onto `B(0, radius)` if it lies outside.
pub fn clip_to_ball(x: &mut [f64], radius: f64) {
    let n = sqrt(x.iter().map(|v| v * v).sum());
    if n > radius {
        let s = radius / n;
        for v in x {
            *v *= s;
        }
    }
}

/// A weighted family `(μ_1, …, μ_k)` with weights `β` summing to 1.
///
/// All measures share a dimension. Atom counts may differ, which happens for
/// private coresets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    measures: Vec<DiscreteMeasure>,
    betas: Vec<f64>,
}

impl Dataset {
    /// Uniform `β_i = 1/k`.
    pub fn new(measures: Vec<DiscreteMeasure>) -> Result<Self> {
        let k = measures.len();
        Self::with_betas(measures, alloc::vec![1.0 / k.max(1) as f64; k])
    }

    pub fn with_betas(measures: Vec<DiscreteMeasure>, betas: Vec<f64>) -> Result<Self> {
        let first = measures.first().ok_or(Error::EmptyDataset)?;
        let dim = first.dim();
        for m in &measures {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.dim() });
            }
        }
        if betas.len() != measures.len() {
            return Err(Error::DimensionMismatch { expected: measures.len(), found: betas.len() });
        }
        for (index, &value) in betas.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        let sum: f64 = betas.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::WeightSum { sum });
        }
        Ok(Self { measures, betas })
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    /// Number of measures `k`.
    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn measure(&self, i: usize) -> &DiscreteMeasure {
        &self.measures[i]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DiscreteMeasure)> {
        self.betas.iter().copied().zip(&self.measures)
    }

    /// The shared atom count `n`, if all measures have one.
    pub fn common_atom_count(&self) -> Option<usize> {
        let n = self.measures[0].len();
        self.measures.iter().all(|m| m.len() == n).then_some(n)
    }

    pub fn check_bounded(&self) -> Result<()> {
        self.measures.iter().try_for_each(DiscreteMeasure::check_bounded)
    }

    /// Applies `f` to every measure, keeping the `β`.
    pub fn try_map(&self, f: impl FnMut(&DiscreteMeasure) -> Result<DiscreteMeasure>) -> Result<Self> {
        let measures = self.measures.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::with_betas(measures, self.betas.clone())
    }

    pub fn into_measures(self) -> Vec<DiscreteMeasure> {
        self.measures
    }
}
