use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::check_same_dim;
use super::network_simplex::FlowNetwork;
use crate::error::{Error, Result};
use crate::math::{floor, sqrt};
use crate::measure::DiscreteMeasure;

/// Lattice steps of the 16-neighbour stencil (first octant generators and
/// their images under the dihedral group).
const STENCIL: [(i64, i64); 16] = [
    (1, 0), (0, 1), (-1, 0), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (2, 1), (1, 2), (-2, 1), (-1, 2),
    (2, -1), (1, -2), (-2, -1), (-1, -2),
];

/// Stencil path length over Euclidean length is at most `1 / cos(θ/2)`, where
/// `θ = atan(1/2)` is the widest angle between neighbouring stencil steps.
pub fn stencil_distortion() -> f64 {
    1.0 / libm::cos(0.5 * libm::atan(0.5))
}

/// Approximate `W_1` between large planar measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarW1 {
    /// Transshipment cost on the binned measures under the stencil metric.
    pub value: f64,
    /// Certified bracket for the true `W_1`.
    pub lower: f64,
    pub upper: f64,
}

/// Bins both measures onto a `resolution × resolution` grid covering their
/// joint bounding square and solves the transshipment problem on the
/// 16-neighbour lattice graph.
///
/// Binning moves each unit of mass by at most half a cell diagonal and the
/// lattice metric overestimates Euclidean length by at most
/// [`stencil_distortion`], which gives the `[lower, upper]` bracket.
pub fn planar_w1_grid(a: &DiscreteMeasure, b: &DiscreteMeasure, resolution: usize) -> Result<PlanarW1> {
    check_same_dim(a, b)?;
    if a.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: a.dim() });
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter { name: "resolution", value: resolution as f64 });
    }
    let g = resolution;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for x in a.points().chain(b.points()) {
        for k in 0..2 {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let h = side / g as f64;
    let bin = |x: &[f64]| -> usize {
        let ix = (floor((x[0] - lo[0]) / h) as usize).min(g - 1);
        let iy = (floor((x[1] - lo[1]) / h) as usize).min(g - 1);
        iy * g + ix
    };
    let mut supply = alloc::vec![0.0; g * g];
    for (x, w) in a.points().zip(a.weights()) {
        supply[bin(x)] += w;
    }
    let scale = a.weights().iter().sum::<f64>() / b.weights().iter().sum::<f64>();
    for (x, w) in b.points().zip(b.weights()) {
        supply[bin(x)] -= w * scale;
    }

    let mut net = FlowNetwork::with_arc_capacity(supply, 16 * g * g);
    let step_cost: Vec<f64> = STENCIL.iter().map(|&(dx, dy)| h * sqrt((dx * dx + dy * dy) as f64)).collect();
    for iy in 0..g as i64 {
        for ix in 0..g as i64 {
            for (&(dx, dy), &c) in STENCIL.iter().zip(&step_cost) {
                let (jx, jy) = (ix + dx, iy + dy);
                if jx >= 0 && jy >= 0 && jx < g as i64 && jy < g as i64 {
                    net.add_arc((iy * g as i64 + ix) as usize, (jy * g as i64 + jx) as usize, c);
                }
            }
        }
    }
    let value = net.solve()?.cost;
    let slack = h * core::f64::consts::SQRT_2;
    Ok(PlanarW1 { value, lower: (value / stencil_distortion() - slack).max(0.0), upper: value + slack })
}
