//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use privbary_core::DiscreteMeasure;
use rand::Rng;

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn cost(a: &[f64], b: &[f64], p: f64) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    s.sqrt().powf(p)
}

/// `W_p^p` between two uniform measures by enumerating every permutation of
/// the `lcm(n, m)`-fold replicated atoms. Uniform transport polytopes have
/// permutation matrices as vertices, so the minimum is exact.
pub fn brute_force_wpp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> f64 {
    let l = lcm(mu.len(), nu.len());
    assert!(l <= 9, "enumeration only for tiny instances");
    let xs: Vec<&[f64]> = (0..l).map(|i| mu.point(i / (l / mu.len()))).collect();
    let ys: Vec<&[f64]> = (0..l).map(|j| nu.point(j / (l / nu.len()))).collect();
    let c: Vec<Vec<f64>> = xs.iter().map(|x| ys.iter().map(|y| cost(x, y, p)).collect()).collect();
    let mut perm: Vec<usize> = (0..l).collect();
    let mut best = f64::INFINITY;
    heap_permutations(&mut perm, l, &mut |pm| {
        let s: f64 = pm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        best = best.min(s);
    });
    best / l as f64
}

fn heap_permutations(a: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        f(a);
        return;
    }
    for i in 0..k - 1 {
        heap_permutations(a, k - 1, f);
        if k % 2 == 0 { a.swap(i, k - 1) } else { a.swap(0, k - 1) }
    }
    heap_permutations(a, k - 1, f);
}

/// Uniform measure with `n` atoms drawn uniformly from `[−1/2, 1/2]^d`
/// shrunk into the radius-1/2 ball.
pub fn random_uniform_measure<R: Rng>(n: usize, d: usize, rng: &mut R) -> DiscreteMeasure {
    let coords: Vec<f64> = (0..n * d).map(|_| rng.random_range(-0.5..0.5) / (d as f64).sqrt()).collect();
    DiscreteMeasure::uniform(d, coords).unwrap()
}

/// Atom counts `(n, m)` in `1..=max` with `lcm(n, m) ≤ cap`.
pub fn small_sizes<R: Rng>(max: usize, cap: usize, rng: &mut R) -> (usize, usize) {
    loop {
        let (a, b) = (rng.random_range(1..=max), rng.random_range(1..=max));
        if lcm(a, b) <= cap {
            return (a, b);
        }
    }
}
