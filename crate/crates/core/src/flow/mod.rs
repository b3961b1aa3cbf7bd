//! Time integration of the J-flow `d phi/dt = c - 2 chi_phi ^ omega / chi_phi^2`.

mod run;

pub use run::{run_flow, FlowConfig, FlowParams, Sample, Status, Trajectory};

use crate::error::{Error, Result};
use crate::functionals::{functional_i_with, functional_j_with};
use crate::geometry::{topological_constant, trace_with, HermitianFormField, ScalarField};

/// Background data of a flow: the two metrics and the constant `c`.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub chi: HermitianFormField,
    pub omega: HermitianFormField,
    pub c: f64,
}

impl FlowProblem {
    /// Uses the topological constant of the classes.
    pub fn new(chi: HermitianFormField, omega: HermitianFormField) -> Result<Self> {
        chi.grid().check_same(omega.grid())?;
        let c = topological_constant(&chi, &omega)?;
        Ok(Self { chi, omega, c })
    }

    pub fn with_constant(chi: HermitianFormField, omega: HermitianFormField, c: f64) -> Result<Self> {
        chi.grid().check_same(omega.grid())?;
        Ok(Self { chi, omega, c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitors {
    pub i: f64,
    pub j: f64,
    pub sup_abs_rhs: f64,
    pub min_eig_chi_phi: f64,
    pub dt_current: f64,
}

/// A point of the flow together with cached `chi_phi` and right-hand side.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub phi: ScalarField,
    pub time: f64,
    pub chi_phi: HermitianFormField,
    pub monitors: Monitors,
    rhs: ScalarField,
}

impl FlowState {
    pub fn new(problem: &FlowProblem, phi: ScalarField, time: f64) -> Result<Self> {
        let chi_phi = problem.chi.plus_ddc(&phi)?;
        let rhs = rhs_from_form(&chi_phi, &problem.omega, problem.c)?;
        let i = functional_i_with(&phi, &problem.chi, &chi_phi)?;
        let j = functional_j_with(&phi, &problem.chi, &problem.omega, &chi_phi)?;
        let (_, min_eig) = chi_phi.min_eigenvalue();
        let monitors = Monitors {
            i,
            j,
            sup_abs_rhs: rhs.sup_abs(),
            min_eig_chi_phi: min_eig,
            dt_current: 0.0,
        };
        Ok(Self {
            phi,
            time,
            chi_phi,
            monitors,
            rhs,
        })
    }

    /// `d phi/dt` at this state.
    pub fn rhs(&self) -> &ScalarField {
        &self.rhs
    }

    /// `int phi_dot^2 chi_phi^2`, the rate at which J decreases.
    pub fn dissipation(&self) -> f64 {
        let n = self.rhs.values().len();
        (0..n)
            .map(|i| self.rhs.values()[i].powi(2) * self.chi_phi.at(i).wedge2())
            .sum::<f64>()
            / n as f64
    }
}

/// Pointwise `c - 2 chi_phi ^ omega / chi_phi^2` for a given `chi_phi`.
pub fn rhs_from_form(chi_phi: &HermitianFormField, omega: &HermitianFormField, c: f64) -> Result<ScalarField> {
    chi_phi.grid().check_same(omega.grid())?;
    let mut out = Vec::with_capacity(chi_phi.len());
    for i in 0..chi_phi.len() {
        let a = chi_phi.at(i);
        let min_eig = a.min_eigenvalue();
        if min_eig <= 0.0 {
            return Err(Error::NotInPositiveCone { node: i, min_eig });
        }
        out.push(c - 2.0 * a.wedge11(omega.at(i)) / a.wedge2());
    }
    ScalarField::new(chi_phi.grid(), out)
}

pub fn flow_rhs(
    phi: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    c: f64,
) -> Result<ScalarField> {
    rhs_from_form(&chi.plus_ddc(phi)?, omega, c)
}

/// Sup-norm gap between the two algebraic forms of the `c = 1` right-hand
/// side: `1 - 2 chi_phi ^ omega / chi_phi^2` and
/// `((chi_phi - omega)^2 - omega^2) / chi_phi^2`.
pub fn rhs_rewrite_check(phi: &ScalarField, chi: &HermitianFormField, omega: &HermitianFormField) -> Result<f64> {
    let chi_phi = chi.plus_ddc(phi)?;
    chi_phi.grid().check_same(omega.grid())?;
    let mut worst: f64 = 0.0;
    for i in 0..chi_phi.len() {
        let (a, w) = (chi_phi.at(i), omega.at(i));
        let direct = 1.0 - 2.0 * a.wedge11(w) / a.wedge2();
        let rewritten = (a.sub(w).wedge2() - w.wedge2()) / a.wedge2();
        worst = worst.max((direct - rewritten).abs());
    }
    Ok(worst)
}

/// `sup |c chi_phi^2 - 2 chi_phi ^ omega| / chi_phi^2`.
pub fn stationarity_residual(state: &FlowState, omega: &HermitianFormField, c: f64) -> Result<f64> {
    state.chi_phi.grid().check_same(omega.grid())?;
    Ok((0..state.chi_phi.len())
        .map(|i| {
            let a = state.chi_phi.at(i);
            (c * a.wedge2() - 2.0 * a.wedge11(omega.at(i))).abs() / a.wedge2()
        })
        .fold(0.0, f64::max))
}

/// Time step from the parabolic CFL rule
/// `cfl * h^2 * min eig(chi_phi) / max tr_{chi_phi} omega`.
pub fn cfl_time_step(state: &FlowState, omega: &HermitianFormField, cfl_factor: f64) -> Result<f64> {
    let h = state.phi.grid().spacing();
    let tr = trace_with(&state.chi_phi, omega)?.max();
    Ok(cfl_factor * h * h * state.monitors.min_eig_chi_phi / tr)
}

pub const MAX_HALVINGS: usize = 20;

/// One explicit RK4 step. A tentative state whose `chi_phi` has minimum
/// eigenvalue below `floor` (or whose stages leave the positive cone) is
/// rejected and the step retried with half the time step, at most
/// [`MAX_HALVINGS`] times.
pub fn step(problem: &FlowProblem, state: &FlowState, dt: f64, floor: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
    }
    let mut dt = dt;
    let mut last_node = 0;
    for _ in 0..=MAX_HALVINGS {
        match rk4_attempt(problem, state, dt) {
            Ok(next) if next.monitors.min_eig_chi_phi >= floor => {
                let mut next = next;
                next.monitors.dt_current = dt;
                return Ok(next);
            }
            Ok(next) => last_node = next.chi_phi.min_eigenvalue().0,
            Err(Error::NotInPositiveCone { node, .. }) => last_node = node,
            Err(e) => return Err(e),
        }
        dt *= 0.5;
    }
    Err(Error::Stiffness {
        node: last_node,
        dt,
        halvings: MAX_HALVINGS,
    })
}

fn rk4_attempt(problem: &FlowProblem, state: &FlowState, dt: f64) -> Result<FlowState> {
    let rhs_at = |phi: &ScalarField| flow_rhs(phi, &problem.chi, &problem.omega, problem.c);
    let k1 = state.rhs();
    let k2 = rhs_at(&state.phi.axpy(0.5 * dt, k1)?)?;
    let k3 = rhs_at(&state.phi.axpy(0.5 * dt, &k2)?)?;
    let k4 = rhs_at(&state.phi.axpy(dt, &k3)?)?;
    let w = dt / 6.0;
    let values = (0..k1.values().len())
        .map(|i| {
            state.phi.values()[i]
                + w * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i])
        })
        .collect();
    let phi = ScalarField::new(state.phi.grid(), values)?;
    FlowState::new(problem, phi, state.time + dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_band_limited, Grid, Hermitian2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::reduced(16).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let zero = ScalarField::zeros(&g);
        assert!(flow_rhs(&zero, &id.scale(2.0), &id, 1.0).unwrap().sup_abs() < 1e-15);
        assert!(flow_rhs(&zero, &id, &id, 2.0).unwrap().sup_abs() < 1e-15);
        let chi = HermitianFormField::constant(&g, Hermitian2::diag(1.0, 2.0));
        assert!(flow_rhs(&zero, &chi, &id, 1.5).unwrap().sup_abs() < 1e-15);
    }

    #[test]
    fn rhs_rejects_non_positive_state() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let phi = ScalarField::from_fn(&g, |x| 0.2 * (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
        // min eig of chi_phi = 1 - 0.2 pi^2 < 0
        assert!(matches!(
            flow_rhs(&phi, &id, &id, 2.0),
            Err(Error::NotInPositiveCone { .. })
        ));
    }

    #[test]
    fn rewrite_identity_holds() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let zero = ScalarField::zeros(&g);
        assert!(rhs_rewrite_check(&zero, &id.scale(2.0), &id).unwrap() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = random_band_limited(&g, 3, 0.02, &mut rng).unwrap();
        assert!(rhs_rewrite_check(&phi, &id.scale(2.0), &id).unwrap() < 1e-13);
    }

    #[test]
    fn stationarity_examples() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let p = FlowProblem::with_constant(id.scale(2.0), id.clone(), 1.0).unwrap();
        let s = FlowState::new(&p, ScalarField::zeros(&g), 0.0).unwrap();
        assert!(stationarity_residual(&s, &id, 1.0).unwrap() < 1e-15);
        let p = FlowProblem::with_constant(id.clone(), id.clone(), 1.0).unwrap();
        let s = FlowState::new(&p, ScalarField::zeros(&g), 0.0).unwrap();
        // |1 * 2 - 2 * 2| / 2
        assert!((stationarity_residual(&s, &id, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_state_does_not_move() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let p = FlowProblem::new(id.scale(2.0), id).unwrap();
        let s = FlowState::new(&p, ScalarField::zeros(&g), 0.0).unwrap();
        for dt in [1e-4, 0.1, 3.0] {
            let next = step(&p, &s, dt, 0.1).unwrap();
            assert_eq!(next.phi, s.phi);
            assert_eq!(next.time, dt);
        }
    }

    #[test]
    fn step_rejects_bad_dt() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let p = FlowProblem::new(id.scale(2.0), id).unwrap();
        let s = FlowState::new(&p, ScalarField::zeros(&g), 0.0).unwrap();
        assert!(matches!(step(&p, &s, 0.0, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn huge_step_halves_then_gives_up_or_succeeds() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let p = FlowProblem::new(id.scale(2.0), id).unwrap();
        let phi = ScalarField::from_fn(&g, |x| 0.05 * (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
        let s = FlowState::new(&p, phi, 0.0).unwrap();
        let next = step(&p, &s, 10.0, 1.5).unwrap();
        assert!(next.monitors.dt_current < 10.0);
        assert!(next.monitors.min_eig_chi_phi >= 1.5);
        // A floor above the reachable minimum eigenvalue cannot be met.
        assert!(matches!(step(&p, &s, 1e-3, 5.0), Err(Error::Stiffness { .. })));
    }
}
