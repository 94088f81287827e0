//! Evaluation of private barycenters against non-private references.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measure::{Dataset, DiscreteMeasure};
use crate::ot::{barycenter_cost, wasserstein_p, OtMethod};

/// Costs are `Σ_i β_i W_p^p(μ_i, ν)` on the raw data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cost_private: f64,
    pub cost_nonprivate: f64,
    /// `W_p` between the private and non-private barycenters.
    pub w_p_between: f64,
}

impl Evaluation {
    /// `cost_private / cost_nonprivate`.
    pub fn cost_ratio(&self) -> f64 {
        self.cost_private / self.cost_nonprivate
    }
}

pub fn evaluate(
    private: &DiscreteMeasure,
    nonprivate: &DiscreteMeasure,
    data: &Dataset,
    p: f64,
    method: &OtMethod,
) -> Result<Evaluation> {
    Ok(Evaluation {
        cost_private: barycenter_cost(data, private, p, method)?,
        cost_nonprivate: barycenter_cost(data, nonprivate, p, method)?,
        w_p_between: wasserstein_p(private, nonprivate, p, method)?,
    })
}
