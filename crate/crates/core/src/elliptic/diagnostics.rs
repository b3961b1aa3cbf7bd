use serde::{Deserialize, Serialize};

use super::EllipticSolution;
use crate::error::{Error, Result};
use crate::geometry::{ddc, trace_with, HermitianFormField, ScalarField};

/// Smooth nonnegative weight vanishing on the locus where the background
/// degenerates; nodes with `weight >= threshold` form the compact subset.
#[derive(Debug, Clone)]
pub struct DegeneracySurrogate {
    pub weight: ScalarField,
    pub threshold: f64,
}

impl DegeneracySurrogate {
    pub fn new(weight: ScalarField, threshold: f64) -> Result<Self> {
        if weight.min() < 0.0 {
            return Err(Error::Precondition(format!("surrogate weight is negative (min {})", weight.min())));
        }
        if !(threshold >= 0.0) {
            return Err(Error::Precondition(format!("threshold must be nonnegative, got {threshold}")));
        }
        Ok(Self { weight, threshold })
    }

    /// Weight `max(min eig alpha, 0)`.
    pub fn from_background(alpha: &HermitianFormField, threshold: f64) -> Result<Self> {
        Self::new(alpha.map_scalar(|m| m.min_eigenvalue().max(0.0)), threshold)
    }

    fn in_compact(&self, node: usize) -> bool {
        self.weight.values()[node] >= self.threshold
    }
}

/// Constants `A` and `a` in `Q = log tr_omega alpha_delta - A (psi - a log weight)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QConstants {
    #[serde(rename = "A")]
    pub big_a: f64,
    pub a: f64,
}

impl Default for QConstants {
    fn default() -> Self {
        Self { big_a: 1.0, a: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    /// `sup tr_omega alpha_delta` over the compact subset; `None` if empty.
    pub compact_trace: Option<f64>,
    pub global_trace: f64,
    /// `sup Q` over nodes with positive weight.
    pub q_sup: Option<f64>,
    /// Largest entry of `dd^c psi` over the compact subset.
    pub compact_c2: Option<f64>,
    pub compact_nodes: usize,
}

/// Trace of `alpha_delta = alpha + delta omega + dd^c psi` against `omega`,
/// globally and on the compact subset cut out by the surrogate.
pub fn trace_diagnostic(
    solution: &EllipticSolution,
    alpha: &HermitianFormField,
    omega: &HermitianFormField,
    surrogate: &DegeneracySurrogate,
    q: QConstants,
) -> Result<TraceReport> {
    let d = ddc(&solution.psi)?;
    let alpha_delta = alpha.axpy(solution.delta, omega)?.add(&d)?;
    let tr = trace_with(omega, &alpha_delta)?;
    let mut report = TraceReport {
        compact_trace: None,
        global_trace: tr.max(),
        q_sup: None,
        compact_c2: None,
        compact_nodes: 0,
    };
    let max_opt = |o: Option<f64>, v: f64| Some(o.map_or(v, |m: f64| m.max(v)));
    for node in 0..tr.values().len() {
        let t = tr.values()[node];
        let w = surrogate.weight.values()[node];
        if surrogate.in_compact(node) {
            report.compact_nodes += 1;
            report.compact_trace = max_opt(report.compact_trace, t);
            report.compact_c2 = max_opt(report.compact_c2, d.at(node).max_abs_entry());
        }
        if w > 0.0 {
            let qv = t.ln() - q.big_a * (solution.psi.values()[node] - q.a * w.ln());
            report.q_sup = max_opt(report.q_sup, qv);
        }
    }
    Ok(report)
}
