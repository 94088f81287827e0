use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{cost_matrix, TransportPlan};
use crate::error::{Error, Result};
use crate::math::{exp, ln, log_sum_exp};
use crate::measure::DiscreteMeasure;

/// Entropic regularisation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    /// Regularisation strength, in the units of the ground cost.
    pub reg: f64,
    pub max_iters: usize,
    /// Stop once the L1 row-marginal violation drops below this.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { reg: 1e-3, max_iters: 1000, tol: 1e-9 }
    }
}

impl SinkhornParams {
    pub fn new(reg: f64, max_iters: usize) -> Self {
        Self { reg, max_iters, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornOutput {
    /// Rounded onto the exact coupling polytope; `plan.cost` is the
    /// unregularised cost of this coupling.
    pub plan: TransportPlan,
    pub iterations: usize,
    pub converged: bool,
    /// L1 row-marginal violation before rounding.
    pub marginal_violation: f64,
    /// `⟨T, C⟩ + reg · KL(T ‖ a ⊗ b)` at the returned plan.
    pub entropic_objective: f64,
}

/// Log-domain Sinkhorn iterations followed by rounding onto the couplings.
///
/// Because the returned plan is an exact coupling, `plan.cost` is never below
/// the exact transport cost.
pub fn sinkhorn_ot(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64, params: &SinkhornParams) -> Result<SinkhornOutput> {
    if !(params.reg > 0.0) || !params.reg.is_finite() {
        return Err(Error::InvalidParameter { name: "reg", value: params.reg });
    }
    if params.max_iters == 0 {
        return Err(Error::InvalidParameter { name: "max_iters", value: 0.0 });
    }
    let (n, m) = (src.len(), dst.len());
    let c = cost_matrix(src, dst, p)?;
    let a = src.weights();
    let b = dst.weights();
    let la: Vec<f64> = a.iter().map(|&w| ln(w)).collect();
    let lb: Vec<f64> = b.iter().map(|&w| ln(w)).collect();
    let inv = 1.0 / params.reg;
    let reg = params.reg;
    let mut f = alloc::vec![0.0; n];
    let mut g = alloc::vec![0.0; m];

    let row_violation = |f: &[f64], g: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let r: f64 = (0..m).map(|j| exp((f[i] + g[j] - c[i * m + j]) * inv)).sum();
                (r - a[i]).abs()
            })
            .sum()
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    while iterations < params.max_iters {
        iterations += 1;
        for i in 0..n {
            let row = &c[i * m..(i + 1) * m];
            let lse = log_sum_exp(g.iter().zip(row).map(|(gj, cij)| (gj - cij) * inv));
            f[i] = if la[i] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { reg * (la[i] - lse) };
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| (f[i] - c[i * m + j]) * inv));
            g[j] = if lb[j] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { reg * (lb[j] - lse) };
        }
        if iterations % 10 == 0 || iterations == params.max_iters {
            violation = row_violation(&f, &g);
            if violation <= params.tol {
                converged = true;
                break;
            }
        }
    }
    if !violation.is_finite() {
        return Err(Error::NonFinite("sinkhorn potentials"));
    }

    let mut t = alloc::vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            t[i * m + j] = exp((f[i] + g[j] - c[i * m + j]) * inv);
        }
    }
    round_to_couplings(&mut t, a, b);

    let mut cost = 0.0;
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..m {
            let tij = t[i * m + j];
            cost += tij * c[i * m + j];
            if tij > 0.0 {
                kl += tij * (ln(tij) - la[i] - lb[j]);
            }
        }
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite("sinkhorn plan"));
    }
    Ok(SinkhornOutput {
        plan: TransportPlan { rows: n, cols: m, matrix: t, cost, p },
        iterations,
        converged,
        marginal_violation: violation,
        entropic_objective: cost + reg * kl,
    })
}

/// Projects a nonnegative matrix onto the couplings of `a` and `b`: scale
/// rows and columns down where they exceed their marginal, then add a rank-one
/// correction for the remaining deficit.
fn round_to_couplings(t: &mut [f64], a: &[f64], b: &[f64]) {
    let m = b.len();
    for (i, row) in t.chunks_exact_mut(m).enumerate() {
        let r: f64 = row.iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
    let mut cols = alloc::vec![0.0; m];
    for row in t.chunks_exact(m) {
        for (c, v) in cols.iter_mut().zip(row) {
            *c += v;
        }
    }
    let scale: Vec<f64> = cols.iter().zip(b).map(|(&c, &bj)| if c > bj { bj / c } else { 1.0 }).collect();
    for row in t.chunks_exact_mut(m) {
        for (v, s) in row.iter_mut().zip(&scale) {
            *v *= s;
        }
    }
    let err_r: Vec<f64> = t.chunks_exact(m).zip(a).map(|(row, &ai)| (ai - row.iter().sum::<f64>()).max(0.0)).collect();
    let mut err_c = b.to_vec();
    for row in t.chunks_exact(m) {
        for (e, v) in err_c.iter_mut().zip(row) {
            *e -= v;
        }
    }
    err_c.iter_mut().for_each(|e| *e = e.max(0.0));
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for (row, er) in t.chunks_exact_mut(m).zip(&err_r) {
            for (v, ec) in row.iter_mut().zip(&err_c) {
                *v += er * ec / total;
            }
        }
    }
}
