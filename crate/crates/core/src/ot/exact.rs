use alloc::vec::Vec;

use super::network_simplex::FlowNetwork;
use super::{check_same_dim, cost_matrix, TransportPlan};
use crate::error::{Error, Result};
use crate::math::check_p;
use crate::measure::DiscreteMeasure;

/// Default atom cap for [`exact_ot`]; larger problems should go through
/// [`exact_ot_with_cap`] or Sinkhorn.
pub const DEFAULT_EXACT_CAP: usize = 256;

/// Optimal coupling for `‖x − y‖^p`, limited to [`DEFAULT_EXACT_CAP`] atoms per side.
pub fn exact_ot(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    exact_ot_with_cap(src, dst, p, DEFAULT_EXACT_CAP)
}

/// Optimal coupling with a caller-chosen atom cap.
pub fn exact_ot_with_cap(src: &DiscreteMeasure, dst: &DiscreteMeasure, p: f64, cap: usize) -> Result<TransportPlan> {
    check_same_dim(src, dst)?;
    check_p(p)?;
    let atoms = src.len().max(dst.len());
    if atoms > cap {
        return Err(Error::OracleCapExceeded { atoms, cap });
    }
    let (n, m) = (src.len(), dst.len());
    let cost = cost_matrix(src, dst, p)?;

    // Sink weights are rescaled so supplies balance to rounding error.
    let sa: f64 = src.weights().iter().sum();
    let sb: f64 = dst.weights().iter().sum();
    let mut supply = Vec::with_capacity(n + m);
    supply.extend_from_slice(src.weights());
    supply.extend(dst.weights().iter().map(|b| -b * sa / sb));

    let mut net = FlowNetwork::with_arc_capacity(supply, n * m);
    for i in 0..n {
        for j in 0..m {
            net.add_arc(i, n + j, cost[i * m + j]);
        }
    }
    let sol = net.solve()?;
    let matrix: Vec<f64> = sol.flow.iter().map(|f| f.max(0.0)).collect();
    let total = matrix.iter().zip(&cost).map(|(t, c)| t * c).sum();
    Ok(TransportPlan { rows: n, cols: m, matrix, cost: total, p })
}
