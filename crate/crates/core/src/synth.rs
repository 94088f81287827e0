//! Synthetic data: Gaussian mixtures, uniform balls, grayscale images, and
//! the instability instances used to show that exact barycenter supports are
//! not stable under neighbouring inputs.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::{cos, pow, sin, sqrt};
use crate::measure::{clip_to_ball, DiscreteMeasure, DOMAIN_RADIUS};

/// `n` i.i.d. points uniform in the centred ball of the given radius.
pub fn uniform_ball<R: Rng + ?Sized>(n: usize, d: usize, radius: f64, rng: &mut R) -> Result<DiscreteMeasure> {
    if n == 0 || d == 0 {
        return Err(Error::EmptyMeasure);
    }
    let mut coords = Vec::with_capacity(n * d);
    let mut z = alloc::vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let norm = sqrt(z.iter().map(|v| v * v).sum());
        let u: f64 = rng.random();
        let r = radius * pow(u, 1.0 / d as f64) / norm.max(f64::MIN_POSITIVE);
        coords.extend(z.iter().map(|v| v * r));
    }
    DiscreteMeasure::uniform(d, coords)
}

/// The four mixture centres `(±1/4, ±1/4, 0, …, 0)` in `ℝ^d`, `d ≥ 2`.
pub fn quadrant_centers(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (sx, sy) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let mut c = alloc::vec![0.0; d.max(2)];
        c[0] = 0.25 * sx;
        c[1] = 0.25 * sy;
        out.push(c);
    }
    out
}

/// Default per-coordinate standard deviation of mixture components.
pub const DEFAULT_MIXTURE_STDDEV: f64 = 0.05;

/// `n` points from an equal-weight isotropic Gaussian mixture, radially
/// clipped into the radius-1/2 ball.
pub fn gen_gaussian_mixture<R: Rng + ?Sized>(
    n: usize,
    centers: &[Vec<f64>],
    stddev: f64,
    rng: &mut R,
) -> Result<DiscreteMeasure> {
    let d = centers.first().ok_or(Error::Invalid("mixture needs at least one centre"))?.len();
    if centers.iter().any(|c| c.len() != d) {
        return Err(Error::Invalid("mixture centres differ in dimension"));
    }
    if !(stddev >= 0.0) {
        return Err(Error::InvalidParameter { name: "stddev", value: stddev });
    }
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    let mut coords = Vec::with_capacity(n * d);
    let mut x = alloc::vec![0.0; d];
    for _ in 0..n {
        let c = &centers[rng.random_range(0..centers.len())];
        for (xi, ci) in x.iter_mut().zip(c) {
            let z: f64 = StandardNormal.sample(rng);
            *xi = ci + stddev * z;
        }
        clip_to_ball(&mut x, DOMAIN_RADIUS);
        coords.extend_from_slice(&x);
    }
    DiscreteMeasure::uniform(d, coords)
}

/// The one-dimensional neighbouring pair `(μ, μ')` on `n` atoms.
///
/// `μ` has atoms at `1/n, 2/n, …, 1` and `μ'` moves the first atom to
/// `(2 + e)/n`; both are shifted by `−(1 + 1/n)/2` to centre them in the
/// unit-diameter ball. `W_1(μ, μ') = (1 + e)/n²`.
pub fn gen_counterexample_1d(n: usize, e: f64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if n < 3 {
        return Err(Error::InvalidParameter { name: "n", value: n as f64 });
    }
    if !(e > 0.0 && e < 1.0) {
        return Err(Error::InvalidParameter { name: "e", value: e });
    }
    let shift = 0.5 * (1.0 + 1.0 / n as f64);
    let base: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64 - shift).collect();
    let mut moved = base.clone();
    moved[0] = (2.0 + e) / n as f64 - shift;
    Ok((DiscreteMeasure::uniform(1, base)?, DiscreteMeasure::uniform(1, moved)?))
}

/// `n` equally spaced points on the circle of the given radius, starting at angle `phase`.
pub fn circle(n: usize, radius: f64, phase: f64) -> Result<DiscreteMeasure> {
    let coords = (0..n)
        .flat_map(|i| {
            let t = phase + 2.0 * core::f64::consts::PI * i as f64 / n as f64;
            [radius * cos(t), radius * sin(t)]
        })
        .collect();
    DiscreteMeasure::uniform(2, coords)
}

/// Neighbouring pair for the planar instability instance: `n` equally spaced
/// points on the radius-`r` circle (at half-step angles, so no point lies on
/// either axis), and a copy with the point nearest angle `angle` moved
/// radially outward by `push`.
pub fn gen_circle_instance(n: usize, r: f64, angle: f64, push: f64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if n < 4 {
        return Err(Error::InvalidParameter { name: "n", value: n as f64 });
    }
    let step = 2.0 * core::f64::consts::PI / n as f64;
    let mu = circle(n, r, 0.5 * step)?;
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for i in 0..n {
        let t = 0.5 * step + i as f64 * step;
        let gap = libm::fabs(libm::remainder(t - angle, 2.0 * core::f64::consts::PI));
        if gap < best_gap {
            best_gap = gap;
            best = i;
        }
    }
    let mut coords = mu.coords().to_vec();
    let scale = (r + push) / r;
    coords[2 * best] *= scale;
    coords[2 * best + 1] *= scale;
    Ok((mu, DiscreteMeasure::uniform(2, coords)?))
}

/// Grayscale image (row-major, `height × width`, nonnegative intensities) to
/// a measure with one atom per nonzero pixel. Pixel centres are mapped into
/// `[−1/4, 1/4]²`, rows running top to bottom.
pub fn image_to_measure(pixels: &[f64], height: usize, width: usize) -> Result<DiscreteMeasure> {
    if height == 0 || width == 0 || pixels.len() != height * width {
        return Err(Error::DimensionMismatch { expected: height * width, found: pixels.len() });
    }
    let side = height.max(width) as f64;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let v = pixels[r * width + c];
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NonFinite("pixel intensities"));
            }
            if v > 0.0 {
                coords.push(0.5 * ((c as f64 + 0.5) - 0.5 * width as f64) / side);
                coords.push(0.5 * (0.5 * height as f64 - (r as f64 + 0.5)) / side);
                weights.push(v);
            }
        }
    }
    if weights.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    DiscreteMeasure::normalized(2, coords, weights).map(|(m, _)| m)
}
