use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{cfl_time_step, step, FlowProblem, FlowState};
use crate::elliptic::{HEpsilonReport, HEpsilonTracker, DEFAULT_SLACK};
use crate::error::{Error, Result};
use crate::functionals::check_normalized;
use crate::geometry::{HermitianFormField, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub cfl_factor: f64,
    pub tol_stationary: f64,
    pub t_max: f64,
    /// Flow time between recorded samples.
    pub sample_interval: f64,
    /// Steps are rejected when `min eig chi_phi` drops below this fraction of
    /// its initial value.
    pub positivity_floor_fraction: f64,
    /// Required initial margin `min eig chi_phi0 / min eig chi`.
    pub initial_margin: f64,
    /// Slack allowed per step on the decrease of J.
    pub monotonicity_slack: f64,
    /// Hard cap on the number of steps; `0` means unlimited.
    pub max_steps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            cfl_factor: 0.2,
            tol_stationary: 1e-9,
            t_max: 1e4,
            sample_interval: 0.05,
            positivity_floor_fraction: 0.01,
            initial_margin: 0.05,
            monotonicity_slack: 1e-8,
            max_steps: 0,
        }
    }
}

/// Everything `run_flow` needs.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub chi: HermitianFormField,
    pub omega: HermitianFormField,
    pub phi0: ScalarField,
    pub params: FlowParams,
    /// Stationary solution to measure distance and comparison functions
    /// against.
    pub reference: Option<ScalarField>,
    /// `eps` values for the comparison function; requires `reference`.
    pub h_epsilons: Vec<f64>,
    /// Keep a copy of `phi` at every recorded sample.
    pub keep_snapshots: bool,
}

impl FlowConfig {
    pub fn new(chi: HermitianFormField, omega: HermitianFormField, phi0: ScalarField) -> Self {
        Self {
            chi,
            omega,
            phi0,
            params: FlowParams::default(),
            reference: None,
            h_epsilons: Vec::new(),
            keep_snapshots: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Converged,
    MaxTime,
    PositivityFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub time: f64,
    pub i: f64,
    pub j: f64,
    pub sup_abs_rhs: f64,
    pub min_eig: f64,
    pub sup_abs_phi: f64,
    pub dt: f64,
    /// `sup |phi - psi|` after removing both means.
    pub ref_distance: Option<f64>,
    /// `sup (phi - psi) - eps t`, one per configured `eps`.
    pub h_eps: Vec<f64>,
    /// Accumulated `int int phi_dot^2 chi_phi^2 dt` since `t = 0`.
    pub dissipated: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub status: Status,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_state: FlowState,
    pub steps: usize,
    pub h_epsilons: Vec<f64>,
    /// Per-`eps` comparison over every step.
    pub comparisons: Vec<HEpsilonReport>,
    /// `max_t |I(t) - I(0)|` over all steps.
    pub max_i_drift: f64,
    /// Largest single-step increase of J (negative if J strictly decreased).
    pub max_j_increase: f64,
    /// `max_t |J(t) - J(0) + dissipated(t)|` over all steps.
    pub max_energy_defect: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn initial_i(&self) -> f64 {
        self.samples[0].i
    }

    pub fn initial_j(&self) -> f64 {
        self.samples[0].j
    }

    /// Relative drift of I over the run.
    pub fn relative_i_drift(&self) -> f64 {
        self.max_i_drift / (1.0 + self.initial_i().abs())
    }

    /// Trajectory CSV: `time,I,J,sup_abs_rhs,min_eig,sup_abs_phi,dt` and one
    /// `H_eps` column per comparison parameter.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "time,I,J,sup_abs_rhs,min_eig,sup_abs_phi,dt")?;
        match self.h_epsilons.len() {
            0 => {}
            1 => write!(w, ",H_eps")?,
            _ => {
                for e in &self.h_epsilons {
                    write!(w, ",H_eps_{e:e}")?;
                }
            }
        }
        writeln!(w)?;
        for s in &self.samples {
            write!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.time, s.i, s.j, s.sup_abs_rhs, s.min_eig, s.sup_abs_phi, s.dt
            )?;
            for h in &s.h_eps {
                write!(w, ",{h:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Smallest eigenvalue of `chi` over the grid.
fn min_eig(f: &HermitianFormField) -> f64 {
    f.min_eigenvalue().1
}

/// Integrates the flow from `config.phi0` until `sup |phi_dot| <
/// tol_stationary` or `t_max` is reached.
pub fn run_flow(config: &FlowConfig) -> Result<Trajectory> {
    let p = &config.params;
    check_normalized(&config.chi, &config.omega)?;
    if !(p.cfl_factor > 0.0 && p.t_max > 0.0 && p.sample_interval > 0.0 && p.tol_stationary > 0.0) {
        return Err(Error::Precondition(
            "cfl_factor, t_max, sample_interval and tol_stationary must be positive".into(),
        ));
    }
    if !config.h_epsilons.is_empty() && config.reference.is_none() {
        return Err(Error::Precondition("comparison parameters need a reference solution".into()));
    }
    let problem = FlowProblem::with_constant(config.chi.clone(), config.omega.clone(), 1.0)?;
    config.phi0.grid().check_same(problem.chi.grid())?;

    let chi_min = min_eig(&problem.chi);
    if chi_min <= 0.0 {
        return Err(Error::Precondition(format!("chi is not positive (min eig {chi_min})")));
    }
    let state0 = FlowState::new(&problem, config.phi0.clone(), 0.0).map_err(|e| match e {
        Error::NotInPositiveCone { node, min_eig } => Error::Precondition(format!(
            "initial potential leaves the positive cone at node {node} (min eig {min_eig})"
        )),
        e => e,
    })?;
    let margin = state0.monitors.min_eig_chi_phi;
    if margin < p.initial_margin * chi_min {
        return Err(Error::Precondition(format!(
            "initial min eig {margin} is below {} x min eig chi = {}",
            p.initial_margin,
            p.initial_margin * chi_min
        )));
    }
    let floor = p.positivity_floor_fraction * margin;

    let reference = config.reference.as_ref().map(|r| {
        let mean = r.mean();
        (r.clone(), mean)
    });
    let mut trackers = config
        .h_epsilons
        .iter()
        .map(|&e| HEpsilonTracker::new(config.reference.clone().unwrap(), e, DEFAULT_SLACK))
        .collect::<Result<Vec<_>>>()?;

    let mut state = state0;
    let i0 = state.monitors.i;
    let j0 = state.monitors.j;
    let mut dissipated = 0.0;
    let mut diss_prev = state.dissipation();
    let mut traj = Trajectory {
        status: Status::MaxTime,
        samples: Vec::new(),
        snapshots: Vec::new(),
        final_state: state.clone(),
        steps: 0,
        h_epsilons: config.h_epsilons.clone(),
        comparisons: Vec::new(),
        max_i_drift: 0.0,
        max_j_increase: f64::NEG_INFINITY,
        max_energy_defect: 0.0,
        warnings: Vec::new(),
    };

    let mut h_now: Vec<f64> = trackers
        .iter_mut()
        .map(|t| t.observe(0.0, &state.phi))
        .collect::<Result<_>>()?;
    record(&mut traj, &state, reference.as_ref(), &h_now, dissipated, config.keep_snapshots);
    let mut next_sample = p.sample_interval;
    let mut violations = 0usize;

    loop {
        if state.monitors.sup_abs_rhs < p.tol_stationary {
            traj.status = Status::Converged;
            break;
        }
        if state.time >= p.t_max || (p.max_steps > 0 && traj.steps >= p.max_steps) {
            traj.status = Status::MaxTime;
            break;
        }
        let mut dt = cfl_time_step(&state, &problem.omega, p.cfl_factor)?;
        if dt < 1e-14 {
            traj.status = Status::PositivityFloor;
            traj.warnings.push(format!(
                "time step {dt:e} collapsed at t = {}; min eig {}",
                state.time, state.monitors.min_eig_chi_phi
            ));
            break;
        }
        dt = dt.min(p.t_max - state.time);
        let next = step(&problem, &state, dt, floor)?;
        traj.steps += 1;

        let diss_next = next.dissipation();
        dissipated += 0.5 * (diss_prev + diss_next) * (next.time - state.time);
        diss_prev = diss_next;

        let dj = next.monitors.j - state.monitors.j;
        traj.max_j_increase = traj.max_j_increase.max(dj);
        if dj > p.monotonicity_slack {
            violations += 1;
            if violations <= 5 {
                traj.warnings.push(format!(
                    "J increased by {dj:e} at t = {} (monotonicity violation)",
                    next.time
                ));
            }
        }
        traj.max_i_drift = traj.max_i_drift.max((next.monitors.i - i0).abs());
        traj.max_energy_defect = traj
            .max_energy_defect
            .max((next.monitors.j - j0 + dissipated).abs());
        h_now = trackers
            .iter_mut()
            .map(|t| t.observe(next.time, &next.phi))
            .collect::<Result<_>>()?;

        state = next;
        if state.time >= next_sample - 1e-12 {
            record(&mut traj, &state, reference.as_ref(), &h_now, dissipated, config.keep_snapshots);
            while next_sample <= state.time + 1e-12 {
                next_sample += p.sample_interval;
            }
        }
    }
    if violations > 5 {
        traj.warnings.push(format!("{violations} monotonicity violations in total"));
    }
    if traj.samples.last().map(|s| s.time) != Some(state.time) {
        record(&mut traj, &state, reference.as_ref(), &h_now, dissipated, config.keep_snapshots);
    }
    if traj.steps == 0 {
        traj.max_j_increase = 0.0;
    }
    traj.comparisons = trackers.iter().filter_map(|t| t.report()).collect();
    traj.final_state = state;
    Ok(traj)
}

fn record(
    traj: &mut Trajectory,
    state: &FlowState,
    reference: Option<&(ScalarField, f64)>,
    h_eps: &[f64],
    dissipated: f64,
    keep: bool,
) {
    let m = &state.monitors;
    let ref_distance = reference.map(|(r, r_mean)| {
        let shift = state.phi.mean() - r_mean;
        state
            .phi
            .values()
            .iter()
            .zip(r.values())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b - shift).abs()))
    });
    traj.samples.push(Sample {
        time: state.time,
        i: m.i,
        j: m.j,
        sup_abs_rhs: m.sup_abs_rhs,
        min_eig: m.min_eig_chi_phi,
        sup_abs_phi: state.phi.sup_abs(),
        dt: m.dt_current,
        ref_distance,
        h_eps: h_eps.to_vec(),
        dissipated,
    });
    if keep {
        traj.snapshots.push((state.time, state.phi.clone()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn stationary_run_converges_immediately() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let cfg = FlowConfig::new(id.scale(2.0), id, ScalarField::zeros(&g));
        let t = run_flow(&cfg).unwrap();
        assert_eq!(t.status, Status::Converged);
        assert_eq!(t.steps, 0);
        assert_eq!(t.samples.len(), 1);
        assert_eq!(t.samples[0].j, 0.0);
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("time,I,J,sup_abs_rhs,min_eig,sup_abs_phi,dt\n"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn rejects_unnormalized_background() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let cfg = FlowConfig::new(id.clone(), id, ScalarField::zeros(&g));
        assert!(matches!(run_flow(&cfg), Err(Error::Normalization(_))));
    }

    #[test]
    fn rejects_initial_data_without_margin() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        // min eig chi_phi0 = 2 - pi^2 a; a = 0.2 gives about 0.026 < 0.05 * 2
        let phi = ScalarField::from_fn(&g, |x| 0.2 * (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
        let cfg = FlowConfig::new(id.scale(2.0), id, phi);
        assert!(matches!(run_flow(&cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn short_run_conserves_i_and_decreases_j() {
        let g = Grid::reduced(16).unwrap();
        let id = HermitianFormField::identity(&g);
        let phi = ScalarField::from_fn(&g, |x| 0.05 * (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
        let mut cfg = FlowConfig::new(id.scale(2.0), id, phi);
        cfg.params.t_max = 0.2;
        cfg.reference = Some(ScalarField::zeros(&g));
        cfg.h_epsilons = vec![0.01];
        let t = run_flow(&cfg).unwrap();
        assert_eq!(t.status, Status::MaxTime);
        assert!((t.final_state.time - 0.2).abs() < 1e-15);
        assert!(t.relative_i_drift() < 1e-10, "{}", t.relative_i_drift());
        assert!(t.max_j_increase <= 1e-12);
        assert!(t.max_energy_defect < 1e-6);
        assert!(t.comparisons[0].passed());
        let last = t.samples.last().unwrap();
        assert!(last.j < t.initial_j());
        assert!(last.ref_distance.unwrap() < 0.1);
    }
}
