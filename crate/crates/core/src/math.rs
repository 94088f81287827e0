//! Float helpers backed by `libm`, so results do not depend on whether `std`
//! happens to be linked.

pub use libm::{ceil, cos, exp, expm1, floor, log, log1p, pow, round, sin, sqrt};

#[inline]
pub fn ln(x: f64) -> f64 {
    log(x)
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(a.iter().map(|x| x * x).sum())
}

/// `‖a − b‖^p`, exact for `p ∈ {1, 2}`.
#[inline]
pub fn ground_cost(a: &[f64], b: &[f64], p: f64) -> f64 {
    let s = sq_dist(a, b);
    if p == 2.0 {
        s
    } else if p == 1.0 {
        sqrt(s)
    } else {
        pow(sqrt(s), p)
    }
}

/// Numerically stable `ln Σ exp(v_i)`; `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ln(v.map(|x| exp(x - m)).sum::<f64>())
}

pub fn check_p(p: f64) -> crate::Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(crate::Error::InvalidParameter { name: "p", value: p })
    }
}
