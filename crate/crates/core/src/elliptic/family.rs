use serde::Serialize;

use super::{
    solve_ma_newton, trace_diagnostic, DegeneracySurrogate, EllipticProblem, EllipticSolution,
    NewtonOptions, QConstants, TraceReport,
};
use crate::error::{Error, Result};
use crate::geometry::{integrate, wedge2, HermitianFormField, ScalarField};

/// `2^-1, 2^-2, ..., 2^-12`.
pub fn default_delta_schedule() -> Vec<f64> {
    (1..=12).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone)]
pub struct FamilyOptions {
    pub schedule: Vec<f64>,
    pub newton: NewtonOptions,
    pub rhs_density: Option<ScalarField>,
    /// Surrogate for the compact-subset trace; without one the compact
    /// trace is taken over the whole torus.
    pub surrogate: Option<DegeneracySurrogate>,
    pub q_constants: QConstants,
    /// Keep every `psi_delta`, not only the last.
    pub keep_solutions: bool,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            schedule: default_delta_schedule(),
            newton: NewtonOptions::default(),
            rhs_density: None,
            surrogate: None,
            q_constants: QConstants::default(),
            keep_solutions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRecord {
    pub delta: f64,
    pub c_delta: f64,
    pub sup_psi: f64,
    /// `sup |psi_delta - psi_previous|`; absent for the first entry.
    pub cauchy_increment: Option<f64>,
    pub newton_iters: usize,
    pub compact_trace: Option<f64>,
    pub global_trace: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyDiagnostics {
    pub records: Vec<FamilyRecord>,
    pub traces: Vec<TraceReport>,
    pub mass_defects: Vec<f64>,
    pub solutions: Vec<EllipticSolution>,
}

impl FamilyDiagnostics {
    pub fn cauchy_increments(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.cauchy_increment).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.records).expect("records serialize")
    }
}

/// Solves the regularized problems along a decreasing `delta` schedule,
/// warm-starting each solve from the previous solution.
pub fn solve_degenerate_family(
    alpha: &HermitianFormField,
    omega: &HermitianFormField,
    options: &FamilyOptions,
) -> Result<(EllipticSolution, FamilyDiagnostics)> {
    let sched = &options.schedule;
    if sched.is_empty() {
        return Err(Error::Precondition("empty delta schedule".into()));
    }
    if sched.iter().any(|d| !(*d >= 0.0)) || sched.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition(
            "delta schedule must be nonnegative and strictly decreasing".into(),
        ));
    }
    if integrate(&wedge2(alpha)) <= 0.0 {
        return Err(Error::DegenerateClass(integrate(&wedge2(alpha))));
    }
    let surrogate = match &options.surrogate {
        Some(s) => s.clone(),
        None => DegeneracySurrogate::new(ScalarField::constant(alpha.grid(), 1.0), 0.0)?,
    };

    let mut guess = ScalarField::zeros(alpha.grid());
    let mut diag = FamilyDiagnostics {
        records: Vec::new(),
        traces: Vec::new(),
        mass_defects: Vec::new(),
        solutions: Vec::new(),
    };
    let mut last = None;
    for &delta in sched {
        let wrap = |e: Error| Error::Family {
            delta,
            source: Box::new(e),
        };
        let problem =
            EllipticProblem::new(alpha.clone(), omega.clone(), delta, options.rhs_density.clone()).map_err(wrap)?;
        let sol = solve_ma_newton(&problem, &guess, &options.newton).map_err(wrap)?;
        let trace = trace_diagnostic(&sol, alpha, omega, &surrogate, options.q_constants).map_err(wrap)?;
        let increment = last
            .as_ref()
            .map(|prev: &EllipticSolution| sol.psi.sup_distance(&prev.psi))
            .transpose()?;
        diag.records.push(FamilyRecord {
            delta,
            c_delta: sol.c_delta,
            sup_psi: sol.psi.sup_abs(),
            cauchy_increment: increment,
            newton_iters: sol.newton_iterations,
            compact_trace: trace.compact_trace,
            global_trace: trace.global_trace,
        });
        diag.traces.push(trace);
        diag.mass_defects.push(sol.mass_defect);
        guess = sol.psi.clone();
        if let Some(prev) = last.replace(sol) {
            if options.keep_solutions {
                diag.solutions.push(prev);
            }
        }
    }
    let last = last.expect("schedule is nonempty");
    if options.keep_solutions {
        diag.solutions.push(last.clone());
    }
    Ok((last, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Hermitian2;
    use crate::geometry::Grid;

    #[test]
    fn positive_constant_background_is_trivial() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let alpha = HermitianFormField::constant(&g, Hermitian2::diag(2.0, 0.5));
        let (sol, d) = solve_degenerate_family(&alpha, &id, &FamilyOptions::default()).unwrap();
        assert_eq!(sol.psi.sup_abs(), 0.0);
        assert_eq!(d.records.len(), 12);
        assert!(d.cauchy_increments().iter().all(|&c| c == 0.0));
        assert!(d.records[0].cauchy_increment.is_none());
    }

    #[test]
    fn schedule_validation() {
        let g = Grid::reduced(8).unwrap();
        let id = HermitianFormField::identity(&g);
        let mut o = FamilyOptions::default();
        o.schedule = vec![0.25, 0.5];
        assert!(matches!(solve_degenerate_family(&id, &id, &o), Err(Error::Precondition(_))));
        o.schedule = vec![];
        assert!(solve_degenerate_family(&id, &id, &o).is_err());
    }

    #[test]
    fn inner_failure_reports_delta() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let u = ScalarField::from_fn(&g, |x| (2.0 * std::f64::consts::PI * x[0]).cos() / (std::f64::consts::PI * std::f64::consts::PI)).unwrap();
        let alpha = HermitianFormField::with_potential(Hermitian2::IDENTITY, &u).unwrap();
        let mut o = FamilyOptions::default();
        o.schedule = vec![0.0];
        match solve_degenerate_family(&alpha, &id, &o) {
            Err(Error::Family { delta, .. }) => assert_eq!(delta, 0.0),
            other => panic!("{other:?}"),
        }
    }
}
