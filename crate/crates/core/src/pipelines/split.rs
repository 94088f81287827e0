use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{pow, round};
use crate::measure::DiscreteMeasure;
use crate::rng::rng_from_seed;

/// What happens to the `n mod k'` atoms left after slicing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderPolicy {
    /// Discard them; every part has exactly `⌊n/k'⌋` atoms.
    #[default]
    Drop,
    /// Give one each to the first parts.
    Distribute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub parts: Vec<DiscreteMeasure>,
    pub dropped: usize,
}

/// Shuffles the atoms of a uniform-weight measure and slices them into `k'`
/// disjoint uniform-weight parts.
pub fn split_distribution(measure: &DiscreteMeasure, k_prime: usize, seed: u64, policy: RemainderPolicy) -> Result<Split> {
    let n = measure.len();
    if k_prime == 0 || k_prime > n {
        return Err(Error::InvalidParameter { name: "k_prime", value: k_prime as f64 });
    }
    if !measure.has_uniform_weights() {
        return Err(Error::Invalid("splitting needs a uniform-weight measure"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let size = n / k_prime;
    let extra = n - size * k_prime;
    let mut parts = Vec::with_capacity(k_prime);
    let mut start = 0;
    for j in 0..k_prime {
        let len = match policy {
            RemainderPolicy::Drop => size,
            RemainderPolicy::Distribute => size + usize::from(j < extra),
        };
        let mut idx = order[start..start + len].to_vec();
        idx.sort_unstable();
        parts.push(measure.restrict(&idx)?);
        start += len;
    }
    let dropped = n - start;
    Ok(Split { parts, dropped })
}

/// `round(n^{1/(2p+1)} m^{(p−1)/(2p+1)} d^{p/(2p+1)} (ε k)^{−2p/(2p+1)})`,
/// clamped to `[1, n]`.
pub fn optimal_k_prime(n: usize, m: usize, d: usize, epsilon: f64, k: usize, p: f64) -> usize {
    let q = 2.0 * p + 1.0;
    let v = pow(n as f64, 1.0 / q)
        * pow(m as f64, (p - 1.0) / q)
        * pow(d as f64, p / q)
        * pow(epsilon * k as f64, -2.0 * p / q);
    let r = round(v);
    if !(r >= 1.0) {
        1
    } else if r >= n as f64 {
        n.max(1)
    } else {
        r as usize
    }
}
