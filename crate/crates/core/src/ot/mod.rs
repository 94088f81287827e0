//! Optimal transport between discrete measures.
//!
//! [`exact_ot`] solves the transport linear program with a network simplex,
//! [`sinkhorn_ot`] solves its entropic relaxation in the log domain and rounds
//! the result onto the exact coupling polytope. One-dimensional problems have
//! a closed form through quantile functions ([`wasserstein_1d`]).

mod exact;
mod grid;
pub mod network_simplex;
mod quantile;
mod sinkhorn;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{check_p, ground_cost, pow};
use crate::measure::{Dataset, DiscreteMeasure};

pub use exact::{exact_ot, exact_ot_with_cap, DEFAULT_EXACT_CAP};
pub use grid::{planar_w1_grid, PlanarW1};
pub use quantile::{quantile_plan_1d, wasserstein_1d};
pub use sinkhorn::{sinkhorn_ot, SinkhornOutput, SinkhornParams};

/// A coupling of a source and a target measure, `rows × cols`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<f64>,
    /// `Σ_ij T_ij ‖x_i − y_j‖^p`.
    pub cost: f64,
    pub p: f64,
}

impl TransportPlan {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.chunks_exact(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.cols];
        for r in self.matrix.chunks_exact(self.cols) {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    /// Largest absolute marginal violation against `src` and `dst`.
    pub fn marginal_error(&self, src: &DiscreteMeasure, dst: &DiscreteMeasure) -> f64 {
        let r = self.row_sums().iter().zip(src.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let c = self.col_sums().iter().zip(dst.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.max(c)
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// How to compute transport between two measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OtMethod {
    /// Network simplex, refusing problems with more than `max_atoms` atoms on a side.
    Exact { max_atoms: usize },
    Sinkhorn(SinkhornParams),
}

impl OtMethod {
    /// Exact solver with the default atom cap.
    pub const fn exact() -> Self {
        OtMethod::Exact { max_atoms: DEFAULT_EXACT_CAP }
    }

    /// Exact solver without a practical cap.
    pub const fn exact_uncapped() -> Self {
        OtMethod::Exact { max_atoms: usize::MAX }
    }

    pub fn plan(&self, src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
        match *self {
            OtMethod::Exact { max_atoms } => exact_ot_with_cap(src, dst, p, max_atoms),
            OtMethod::Sinkhorn(params) => sinkhorn_ot(src, dst, p, &params).map(|o| o.plan),
        }
    }
}

impl Default for OtMethod {
    fn default() -> Self {
        Self::exact()
    }
}

pub(crate) fn check_same_dim(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(())
}

/// Row-major `‖x_i − y_j‖^p`.
pub fn cost_matrix(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64) -> Result<Vec<f64>> {
    check_same_dim(src, dst)?;
    check_p(p)?;
    let mut c = Vec::with_capacity(src.len() * dst.len());
    for x in src.points() {
        for y in dst.points() {
            c.push(ground_cost(x, y, p));
        }
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    Ok(c)
}

/// `W_p^p(μ, ν)`.
///
/// With [`OtMethod::Exact`] one-dimensional inputs use the quantile formula,
/// which is exact and ignores the atom cap.
pub fn wasserstein_pp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, method: &OtMethod) -> Result<f64> {
    check_same_dim(mu, nu)?;
    check_p(p)?;
    match method {
        OtMethod::Exact { .. } if mu.dim() == 1 => wasserstein_1d(mu, nu, p).map(|w| pow(w, p)),
        _ => method.plan(mu, nu, p).map(|t| t.cost),
    }
}

/// `W_p(μ, ν)`.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64, method: &OtMethod) -> Result<f64> {
    match method {
        OtMethod::Exact { .. } if mu.dim() == 1 && nu.dim() == 1 => wasserstein_1d(mu, nu, p),
        _ => wasserstein_pp(mu, nu, p, method).map(|c| pow(c.max(0.0), 1.0 / p)),
    }
}

/// Barycenter objective `Σ_i β_i W_p^p(μ_i, ν)`.
pub fn barycenter_cost(data: &Dataset, nu: &DiscreteMeasure, p: f64, method: &OtMethod) -> Result<f64> {
    let mut total = 0.0;
    for (beta, mu) in data.iter() {
        total += beta * wasserstein_pp(mu, nu, p, method)?;
    }
    Ok(total)
}

/// Total variation `½ Σ |μ(x) − ν(x)|`, matching atoms by exact coordinates.
pub fn total_variation(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    check_same_dim(mu, nu)?;
    let mut atoms: Vec<(&[f64], f64)> = mu.points().zip(mu.weights().iter().copied()).collect();
    atoms.extend(nu.points().zip(nu.weights().iter().map(|w| -w)));
    atoms.sort_by(|a, b| lex_cmp(a.0, b.0));
    let mut total = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let mut diff = atoms[i].1;
        let mut j = i + 1;
        while j < atoms.len() && atoms[j].0 == atoms[i].0 {
            diff += atoms[j].1;
            j += 1;
        }
        total += diff.abs();
        i = j;
    }
    Ok(0.5 * total)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    core::cmp::Ordering::Equal
}
