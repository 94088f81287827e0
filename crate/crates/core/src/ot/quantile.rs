use alloc::vec::Vec;

use super::{check_same_dim, TransportPlan};
use crate::error::{Error, Result};
use crate::math::{check_p, pow};
use crate::measure::DiscreteMeasure;

fn sorted_order(m: &DiscreteMeasure) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| m.point(a)[0].total_cmp(&m.point(b)[0]));
    idx
}

/// Walks the monotone (quantile) coupling, calling `f(i, j, mass)` per block.
fn monotone_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure, mut f: impl FnMut(usize, usize, f64)) -> Result<()> {
    check_same_dim(mu, nu)?;
    if mu.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: mu.dim() });
    }
    let (oa, ob) = (sorted_order(mu), sorted_order(nu));
    let scale = mu.weights().iter().sum::<f64>() / nu.weights().iter().sum::<f64>();
    let (mut i, mut j) = (0, 0);
    let mut ra = mu.weight(oa[0]);
    let mut rb = nu.weight(ob[0]) * scale;
    loop {
        let t = ra.min(rb);
        if t > 0.0 {
            f(oa[i], ob[j], t);
        }
        ra -= t;
        rb -= t;
        // The side with less remaining mass advances; both advance on a tie.
        let adv_a = ra <= rb;
        let adv_b = rb <= ra;
        if adv_a {
            i += 1;
        }
        if adv_b {
            j += 1;
        }
        if i == oa.len() || j == ob.len() {
            break;
        }
        if adv_a {
            ra = mu.weight(oa[i]);
        }
        if adv_b {
            rb = nu.weight(ob[j]) * scale;
        }
    }
    Ok(())
}

/// Exact `W_p` between one-dimensional measures via quantile functions.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_p(p)?;
    let mut total = 0.0;
    monotone_coupling(mu, nu, |i, j, t| {
        total += t * pow((mu.point(i)[0] - nu.point(j)[0]).abs(), p);
    })?;
    Ok(pow(total, 1.0 / p))
}

/// The monotone coupling, optimal for every `p ≥ 1` on the line.
pub fn quantile_plan_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    check_p(p)?;
    let cols = nu.len();
    let mut matrix = alloc::vec![0.0; mu.len() * cols];
    let mut cost = 0.0;
    monotone_coupling(mu, nu, |i, j, t| {
        matrix[i * cols + j] += t;
        cost += t * pow((mu.point(i)[0] - nu.point(j)[0]).abs(), p);
    })?;
    Ok(TransportPlan { rows: mu.len(), cols, matrix, cost, p })
}
