//! The critical equation as a complex Monge-Ampere equation
//! `(alpha + delta omega + dd^c psi)^2 = c_delta f omega^2`, solved by damped
//! Newton iteration with continuation in `delta`.

pub mod cg;
mod comparison;
mod diagnostics;
mod family;

pub use comparison::{comparison_h_epsilon, HEpsilonReport, HEpsilonTracker, DEFAULT_SLACK};
pub use diagnostics::{trace_diagnostic, DegeneracySurrogate, QConstants, TraceReport};
pub use family::{
    default_delta_schedule, solve_degenerate_family, FamilyDiagnostics, FamilyOptions, FamilyRecord,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{integrate, wedge2, ClassVector, HermitianFormField, ScalarField};

/// Tolerance on `min eig alpha` for a background to count as semipositive.
pub const SEMIPOSITIVE_TOLERANCE: f64 = -1e-10;

/// Data of `(alpha + delta omega + dd^c psi)^2 = c_delta f omega^2`.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub alpha: HermitianFormField,
    pub omega: HermitianFormField,
    pub delta: f64,
    pub rhs_density: ScalarField,
    pub c_delta: f64,
}

impl EllipticProblem {
    /// Validates the data and fixes `c_delta` so both sides have the same
    /// integral. `rhs_density` defaults to `f = 1`.
    pub fn new(
        alpha: HermitianFormField,
        omega: HermitianFormField,
        delta: f64,
        rhs_density: Option<ScalarField>,
    ) -> Result<Self> {
        alpha.grid().check_same(omega.grid())?;
        if !(delta >= 0.0) {
            return Err(Error::Precondition(format!("delta must be nonnegative, got {delta}")));
        }
        let (node, w_min) = omega.min_eigenvalue();
        if w_min <= 0.0 {
            return Err(Error::SingularMetric { node, min_eig: w_min });
        }
        let (node, a_min) = alpha.min_eigenvalue();
        if a_min < SEMIPOSITIVE_TOLERANCE {
            return Err(Error::Precondition(format!(
                "alpha is not semipositive: min eig {a_min} at node {node}"
            )));
        }
        let f = match rhs_density {
            Some(f) => {
                f.grid().check_same(alpha.grid())?;
                if f.min() < 0.0 {
                    return Err(Error::Precondition(format!("density is negative somewhere (min {})", f.min())));
                }
                f
            }
            None => ScalarField::constant(alpha.grid(), 1.0),
        };
        let c_delta = normalization_constant(&alpha, &omega, delta, &f)?;
        Ok(Self {
            alpha,
            omega,
            delta,
            rhs_density: f,
            c_delta,
        })
    }

    /// `alpha + delta omega`.
    pub fn background(&self) -> Result<HermitianFormField> {
        self.alpha.axpy(self.delta, &self.omega)
    }

    /// The same data at another `delta`.
    pub fn at_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.alpha.clone(), self.omega.clone(), delta, Some(self.rhs_density.clone()))
    }

    /// Pointwise `c_delta f omega^2`.
    pub fn target(&self) -> ScalarField {
        let w2 = wedge2(&self.omega);
        self.rhs_density
            .zip_with(&w2, |f, w| self.c_delta * f * w)
            .expect("same grid")
    }
}

/// `c_delta = int (alpha + delta omega)^2 / int f omega^2`.
pub fn normalization_constant(
    alpha: &HermitianFormField,
    omega: &HermitianFormField,
    delta: f64,
    f: &ScalarField,
) -> Result<f64> {
    let den = integrate(&f.mul(&wedge2(omega))?);
    if den == 0.0 {
        return Err(Error::ZeroDenominator("normalization constant"));
    }
    Ok(integrate(&wedge2(&alpha.axpy(delta, omega)?)) / den)
}

/// Class-level value of `c_delta` for `f = 1`:
/// `([alpha]^2 + 2 delta [alpha].[omega] + delta^2 [omega]^2) / [omega]^2`.
pub fn normalization_constant_from_classes(alpha: ClassVector, omega: ClassVector, delta: f64) -> f64 {
    (alpha.square() + 2.0 * delta * alpha.pairing(omega) + delta * delta * omega.square()) / omega.square()
}

/// `sup |(alpha + dd^c psi)^2 - c f omega^2|`.
pub fn residual_ma(
    psi: &ScalarField,
    alpha: &HermitianFormField,
    omega: &HermitianFormField,
    c_target: f64,
    f: &ScalarField,
) -> Result<f64> {
    let lhs = wedge2(&alpha.plus_ddc(psi)?);
    let w2 = wedge2(omega);
    let mut worst: f64 = 0.0;
    for i in 0..lhs.values().len() {
        worst = worst.max((lhs.values()[i] - c_target * f.values()[i] * w2.values()[i]).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    pub tol_newton: f64,
    pub max_iterations: usize,
    /// Line search keeps `min eig alpha_delta` at or above this.
    pub eig_floor: f64,
    pub cg_rtol: f64,
    pub cg_max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol_newton: 1e-11,
            max_iterations: 100,
            eig_floor: 1e-10,
            cg_rtol: 1e-13,
            cg_max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    /// Mean-zero solution.
    pub psi: ScalarField,
    /// Final `sup |log (alpha_delta^2 / (c_delta f omega^2))|`.
    pub residual_sup: f64,
    pub newton_iterations: usize,
    pub residual_series: Vec<f64>,
    pub min_eig_series: Vec<f64>,
    pub cg_iterations: usize,
    /// `|int alpha_delta^2 - int c_delta f omega^2|` relative to the latter.
    pub mass_defect: f64,
    pub delta: f64,
    pub c_delta: f64,
}

fn log_residual(a: &HermitianFormField, log_target: &[f64]) -> ScalarField {
    let values = (0..a.len()).map(|i| a.at(i).wedge2().ln() - log_target[i]).collect();
    ScalarField::from_vec_unchecked(a.grid(), values)
}

/// Damped Newton iteration on `log alpha_delta^2 - log(c_delta f omega^2)`.
///
/// The linearization is the `alpha_delta`-trace Laplacian; each step is
/// damped by backtracking until `alpha_delta` stays above
/// `options.eig_floor` and the sup residual decreases.
pub fn solve_ma_newton(
    problem: &EllipticProblem,
    initial_guess: &ScalarField,
    options: &NewtonOptions,
) -> Result<EllipticSolution> {
    let base = problem.background()?;
    initial_guess.grid().check_same(base.grid())?;
    if problem.rhs_density.min() <= 0.0 {
        return Err(Error::Precondition(
            "newton iteration needs a strictly positive density".into(),
        ));
    }
    let log_target: Vec<f64> = problem.target().values().iter().map(|v| v.ln()).collect();

    let mut psi = initial_guess.mean_zero();
    let mut a = base.plus_ddc(&psi)?;
    let (_, mut min_eig) = a.min_eigenvalue();
    if min_eig < options.eig_floor {
        return Err(Error::ContinuationNeeded { min_eig });
    }
    let mut f = log_residual(&a, &log_target);
    let mut res = f.sup_abs();
    let mut residual_series = vec![res];
    let mut min_eig_series = vec![min_eig];
    let mut iterations = 0;
    let mut cg_iterations = 0;

    while res >= options.tol_newton {
        if iterations >= options.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        // -A ^ dd^c v = (A^2 / 2) F
        let rhs = ScalarField::from_vec_unchecked(
            a.grid(),
            (0..a.len()).map(|i| 0.5 * a.at(i).wedge2() * f.values()[i]).collect(),
        );
        let lin = cg::solve(&a, &rhs, options.cg_rtol, options.cg_max_iterations);
        cg_iterations += lin.iterations;
        let dir = lin.solution;

        let mut s = 1.0;
        let mut accepted = None;
        let mut best_eig = f64::NEG_INFINITY;
        for _ in 0..40 {
            let trial = psi.axpy(s, &dir)?;
            let a_trial = base.plus_ddc(&trial)?;
            let (_, e) = a_trial.min_eigenvalue();
            best_eig = best_eig.max(e);
            if e >= options.eig_floor {
                let f_trial = log_residual(&a_trial, &log_target);
                let r_trial = f_trial.sup_abs();
                if r_trial <= (1.0 - 1e-4 * s) * res || r_trial < options.tol_newton {
                    accepted = Some((trial, a_trial, f_trial, r_trial, e));
                    break;
                }
            }
            s *= 0.5;
        }
        match accepted {
            Some((p, an, fnew, rnew, e)) => {
                psi = p;
                a = an;
                f = fnew;
                res = rnew;
                min_eig = e;
            }
            None if best_eig < options.eig_floor => {
                return Err(Error::ContinuationNeeded { min_eig: best_eig });
            }
            None => {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: res,
                })
            }
        }
        residual_series.push(res);
        min_eig_series.push(min_eig);
    }

    let lhs_mass = integrate(&wedge2(&a));
    let rhs_mass = integrate(&problem.target());
    Ok(EllipticSolution {
        psi: psi.mean_zero(),
        residual_sup: res,
        newton_iterations: iterations,
        residual_series,
        min_eig_series,
        cg_iterations,
        mass_defect: (lhs_mass - rhs_mass).abs() / rhs_mass.abs(),
        delta: problem.delta,
        c_delta: problem.c_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Grid, Hermitian2};
    use std::f64::consts::PI;

    #[test]
    fn normalization_examples() {
        let g = Grid::reduced(8).unwrap();
        let id = HermitianFormField::identity(&g);
        let one = ScalarField::constant(&g, 1.0);
        assert_eq!(normalization_constant(&id, &id, 0.0, &one).unwrap(), 1.0);
        assert!((normalization_constant(&id, &id, 0.5, &one).unwrap() - 2.25).abs() < 1e-15);
        let a = HermitianFormField::constant(&g, Hermitian2::diag(2.0, 0.5));
        assert!((normalization_constant(&a, &id, 0.0, &one).unwrap() - 1.0).abs() < 1e-15);
        let zero = ScalarField::zeros(&g);
        assert!(matches!(
            normalization_constant(&id, &id, 0.0, &zero),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn trivial_solves_take_no_iterations() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let p = EllipticProblem::new(id.clone(), id.clone(), 0.0, None).unwrap();
        let s = solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()).unwrap();
        assert_eq!(s.newton_iterations, 0);
        assert_eq!(s.psi.sup_abs(), 0.0);

        let a = HermitianFormField::constant(&g, Hermitian2::diag(2.0, 0.5));
        let p = EllipticProblem::new(a, id, 0.0, None).unwrap();
        let s = solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()).unwrap();
        assert_eq!(s.newton_iterations, 0);
        assert_eq!(s.psi.sup_abs(), 0.0);
    }

    #[test]
    fn cosine_density_has_closed_form_solution() {
        let g = Grid::reduced(64).unwrap();
        let id = HermitianFormField::identity(&g);
        let f = ScalarField::from_fn(&g, |x| 1.0 + 0.1 * (2.0 * PI * x[0]).cos()).unwrap();
        let p = EllipticProblem::new(id.clone(), id.clone(), 0.0, Some(f.clone())).unwrap();
        let s = solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()).unwrap();
        let exact = ScalarField::from_fn(&g, |x| -(0.1 / (PI * PI)) * (2.0 * PI * x[0]).cos()).unwrap();
        assert!(s.psi.sup_distance(&exact).unwrap() <= 1e-8);
        assert!(residual_ma(&s.psi, &id, &id, 1.0, &f).unwrap() <= 1e-8);
        assert!(s.mass_defect <= 1e-10);
    }

    #[test]
    fn residual_example() {
        let g = Grid::reduced(8).unwrap();
        let id = HermitianFormField::identity(&g);
        let one = ScalarField::constant(&g, 1.0);
        let zero = ScalarField::zeros(&g);
        assert_eq!(residual_ma(&zero, &id, &id, 1.0, &one).unwrap(), 0.0);
        assert_eq!(residual_ma(&zero, &id.scale(2.0), &id, 1.0, &one).unwrap(), 6.0);
    }

    #[test]
    fn non_positive_start_needs_continuation() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let u = ScalarField::from_fn(&g, |x| (1.0 / (PI * PI)) * (2.0 * PI * x[0]).cos()).unwrap();
        // alpha = diag(1 - cos, 1) vanishes on x1 = 0
        let alpha = HermitianFormField::with_potential(Hermitian2::IDENTITY, &u).unwrap();
        let p = EllipticProblem::new(alpha, id, 0.0, None).unwrap();
        assert!(matches!(
            solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()),
            Err(Error::ContinuationNeeded { .. })
        ));
    }

    #[test]
    fn problem_validation() {
        let g = Grid::reduced(8).unwrap();
        let id = HermitianFormField::identity(&g);
        let neg = HermitianFormField::constant(&g, Hermitian2::diag(1.0, -0.1));
        assert!(matches!(
            EllipticProblem::new(neg, id.clone(), 0.0, None),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            EllipticProblem::new(id.clone(), id.clone(), -1.0, None),
            Err(Error::Precondition(_))
        ));
        let f = ScalarField::constant(&g, -1.0);
        assert!(EllipticProblem::new(id.clone(), id, 0.0, Some(f)).is_err());
    }
}
