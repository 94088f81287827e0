use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln, pow, sq_dist, sqrt};
use crate::measure::DiscreteMeasure;

/// Result of [`clusterability_profile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    /// Mass outside every ball; an upper bound on the minimal such mass.
    pub c: f64,
    pub centers: Vec<Vec<f64>>,
}

fn covered_mass(mu: &DiscreteMeasure, centers: &[Vec<f64>], r2: f64) -> f64 {
    mu.points()
        .zip(mu.weights())
        .filter(|(x, _)| centers.iter().any(|c| sq_dist(x, c) <= r2))
        .map(|(_, w)| w)
        .sum()
}

/// Covers the mass of `measure` with `m` balls of radius `delta` and reports
/// the uncovered fraction.
///
/// Centers are chosen greedily among the atoms by uncovered mass gained, then
/// each is moved to the mean of the atoms in its ball while that increases
/// the covered mass.
pub fn clusterability_profile(measure: &DiscreteMeasure, m: usize, delta: f64) -> Result<ClusterProfile> {
    if m == 0 {
        return Err(Error::InvalidParameter { name: "m", value: 0.0 });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter { name: "delta", value: delta });
    }
    let n = measure.len();
    let r2 = delta * delta;
    let mut covered = alloc::vec![false; n];
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m.min(n) {
        let mut best = (0.0, usize::MAX);
        for c in 0..n {
            let cx = measure.point(c);
            let gain: f64 = (0..n)
                .filter(|&l| !covered[l] && sq_dist(measure.point(l), cx) <= r2)
                .map(|l| measure.weight(l))
                .sum();
            if gain > best.0 {
                best = (gain, c);
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let cx = measure.point(best.1).to_vec();
        for l in 0..n {
            if sq_dist(measure.point(l), &cx) <= r2 {
                covered[l] = true;
            }
        }
        centers.push(cx);
    }

    let mut mass = covered_mass(measure, &centers, r2);
    for _ in 0..20 {
        let mut improved = false;
        for b in 0..centers.len() {
            let mut mean = alloc::vec![0.0; measure.dim()];
            let mut w = 0.0;
            for (x, &a) in measure.points().zip(measure.weights()) {
                if sq_dist(x, &centers[b]) <= r2 {
                    w += a;
                    mean.iter_mut().zip(x).for_each(|(m, xi)| *m += a * xi);
                }
            }
            if w == 0.0 {
                continue;
            }
            mean.iter_mut().for_each(|m| *m /= w);
            let old = core::mem::replace(&mut centers[b], mean);
            let trial = covered_mass(measure, &centers, r2);
            if trial > mass {
                mass = trial;
                improved = true;
            } else {
                centers[b] = old;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(ClusterProfile { c: (1.0 - mass).clamp(0.0, 1.0), centers })
}

/// High-probability bound on `W_p^p(μ, μ̂_n)` for an `(m, Δ, c)`-clusterable
/// source `μ` and its `n`-sample empirical measure:
/// `(1−c)((9^p+3)√(m/((1−c−r)n)) + √(ln(4/ξ)/(2(1−c−r)n))) + c + r` with
/// `r = √(ln(4/ξ)/(2n))`. `None` when `1 − c − r ≤ 0`.
pub fn clusterable_convergence_bound(m: usize, n: usize, c: f64, xi: f64, p: f64) -> Option<f64> {
    let n = n as f64;
    let l = ln(4.0 / xi);
    let r = sqrt(l / (2.0 * n));
    let eff = (1.0 - c - r) * n;
    if !(eff > 0.0) {
        return None;
    }
    Some((1.0 - c) * ((pow(9.0, p) + 3.0) * sqrt(m as f64 / eff) + sqrt(l / (2.0 * eff))) + c + r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn atoms_are_fully_covered() {
        let mu = DiscreteMeasure::new(2, vec![0.0, 0.0, 0.3, 0.1, -0.2, 0.4], vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(clusterability_profile(&mu, 3, 1e-6).unwrap().c, 0.0);
    }

    #[test]
    fn one_ball_leaves_far_half() {
        let coords = vec![-0.4, -0.39, -0.41, 0.4, 0.39, 0.41];
        let mu = DiscreteMeasure::uniform(1, coords).unwrap();
        let prof = clusterability_profile(&mu, 1, 0.05).unwrap();
        assert!(prof.c >= 0.5 - 1e-12);
    }

    #[test]
    fn bound_shrinks_with_n() {
        let a = clusterable_convergence_bound(4, 1_000, 0.0, 0.1, 1.0).unwrap();
        let b = clusterable_convergence_bound(4, 100_000, 0.0, 0.1, 1.0).unwrap();
        assert!(b < a);
        assert!(clusterable_convergence_bound(4, 2, 0.9, 0.1, 1.0).is_none());
    }
}
