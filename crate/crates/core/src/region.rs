//! Planar polygonal regions used to mask coreset synthesis.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sqrt;

/// A union of closed rings under the even-odd rule. Every ring has at least
/// three distinct vertices and repeats its first vertex at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct RegionPolygon {
    rings: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for RegionPolygon {
    type Error = Error;
    fn try_from(rings: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        Self::new(rings)
    }
}

impl From<RegionPolygon> for Vec<Vec<[f64; 2]>> {
    fn from(r: RegionPolygon) -> Self {
        r.rings
    }
}

impl RegionPolygon {
    /// Validates the rings and closes any that do not repeat their first vertex.
    pub fn new(mut rings: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::Invalid("region needs at least one ring"));
        }
        for (i, ring) in rings.iter_mut().enumerate() {
            if ring.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("region vertices"));
            }
            let mut distinct: Vec<[f64; 2]> = Vec::new();
            for v in ring.iter() {
                if !distinct.contains(v) {
                    distinct.push(*v);
                }
            }
            if distinct.len() < 3 {
                return Err(Error::DegenerateRing { ring: i });
            }
            if ring.first() != ring.last() {
                let first = ring[0];
                ring.push(first);
            }
        }
        Ok(Self { rings })
    }

    pub fn rings(&self) -> &[Vec<[f64; 2]>] {
        &self.rings
    }

    /// Even-odd membership; points on any edge count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        point_in_polygon(p, self)
    }

    /// Closest point of the region to `p` (`p` itself when inside).
    pub fn nearest_point(&self, p: [f64; 2]) -> [f64; 2] {
        if self.contains(p) {
            return p;
        }
        let mut best = p;
        let mut best_d = f64::INFINITY;
        for ring in &self.rings {
            for e in ring.windows(2) {
                let q = closest_on_segment(p, e[0], e[1]);
                let d = (q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]);
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
        }
        best
    }
}

fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    [a[0] + t * dx, a[1] + t * dy]
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let q = closest_on_segment(p, a, b);
    let scale = 1.0 + sqrt((b[0] - a[0]) * (b[0] - a[0]) + (b[1] - a[1]) * (b[1] - a[1]));
    (q[0] - p[0]).abs() <= 1e-12 * scale && (q[1] - p[1]).abs() <= 1e-12 * scale
}

/// Even-odd point-in-polygon test over all rings. Boundary points are inside.
pub fn point_in_polygon(p: [f64; 2], region: &RegionPolygon) -> bool {
    let mut inside = false;
    for ring in &region.rings {
        for e in ring.windows(2) {
            let (a, b) = (e[0], e[1]);
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}
