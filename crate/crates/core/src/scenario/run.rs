use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{EllipticSolver, ParsedScenario, Prepared, SnapshotPolicy};
use crate::elliptic::{
    normalization_constant_from_classes, solve_degenerate_family, solve_ma_newton, trace_diagnostic,
    DegeneracySurrogate, EllipticProblem, EllipticSolution, FamilyDiagnostics, FamilyOptions, QConstants,
};
use crate::error::Result;
use crate::flow::{run_flow, stationarity_residual, FlowConfig, FlowProblem, FlowState, Status, Trajectory};
use crate::functionals::{functional_i, gradient_check, FunctionalReport};
use crate::geometry::{dump, random_band_limited, HermitianFormField, ScalarField};

/// Relative drift of I allowed over a run.
pub const I_DRIFT_TOLERANCE: f64 = 1e-6;
pub const ENERGY_TOLERANCE: f64 = 1e-6;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const GRADIENT_STEP: f64 = 1e-5;
pub const MASS_TOLERANCE: f64 = 1e-10;
pub const C_DELTA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Verdict {
    fn at_most(value: f64, tolerance: f64) -> Self {
        Self {
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

/// Gauge-aligned comparison of two potentials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitComparison {
    /// `sup |(a - mean a) - (b - mean b)|`.
    pub sup_difference: f64,
    /// Standard deviation of `a - b`.
    pub std_difference: f64,
    #[serde(rename = "I_first", skip_serializing_if = "Option::is_none")]
    pub i_first: Option<f64>,
    #[serde(rename = "I_second", skip_serializing_if = "Option::is_none")]
    pub i_second: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares a flow limit with an elliptic solution up to an additive
/// constant. With `chi`, the I values of both are reported as well.
pub fn compare_limits(
    flow_phi: &ScalarField,
    psi: &ScalarField,
    chi: Option<&HermitianFormField>,
    tolerance: f64,
) -> Result<LimitComparison> {
    flow_phi.grid().check_same(psi.grid())?;
    let diff = flow_phi.zip_with(psi, |a, b| a - b)?;
    let sup_difference = diff.mean_zero().sup_abs();
    let (i_first, i_second) = match chi {
        Some(chi) => (Some(functional_i(flow_phi, chi)?), Some(functional_i(psi, chi)?)),
        None => (None, None),
    };
    Ok(LimitComparison {
        sup_difference,
        std_difference: diff.std_dev(),
        i_first,
        i_second,
        tolerance,
        passed: sup_difference <= tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticSummary {
    pub solver: EllipticSolver,
    pub newton_iterations: usize,
    pub residual: f64,
    pub mass_defect: f64,
    pub sup_psi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compact_trace: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_trace: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub steps: usize,
    pub final_time: f64,
    pub max_i_drift: f64,
    pub max_j_increase: f64,
    pub max_energy_defect: f64,
    pub min_eig_initial: f64,
    pub min_eig_lowest: f64,
    pub sup_phi_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub name: String,
    /// Flow status, or `ELLIPTIC_ONLY`.
    pub status: String,
    #[serde(rename = "I0")]
    pub i0: Option<f64>,
    #[serde(rename = "I_end")]
    pub i_end: Option<f64>,
    #[serde(rename = "J0")]
    pub j0: Option<f64>,
    #[serde(rename = "J_end")]
    pub j_end: Option<f64>,
    /// Stationarity residual of the terminal flow state, or the elliptic
    /// residual when the flow is skipped.
    pub residual: f64,
    pub c_raw: f64,
    pub verdicts: BTreeMap<String, Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elliptic: Option<EllipticSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<LimitComparison>,
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| v.passed)
    }

    pub fn failed_verdicts(&self) -> Vec<&str> {
        self.verdicts
            .iter()
            .filter(|(_, v)| !v.passed)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub summary: RunSummary,
    pub trajectory: Option<Trajectory>,
    pub elliptic: Option<EllipticSolution>,
    pub family: Option<FamilyDiagnostics>,
    pub prepared: Prepared,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl ScenarioOutcome {
    /// Writes `summary.json`, `timing.json`, `trajectory.csv`,
    /// `family.json` and field dumps into `dir`.
    pub fn write_outputs(&self, dir: &Path, snapshots: SnapshotPolicy) -> Result<()> {
        fs::create_dir_all(dir)?;
        let summary = serde_json::to_string_pretty(&self.summary)?;
        fs::write(dir.join("summary.json"), summary + "\n")?;
        fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&self.timings)? + "\n")?;
        let fields = dir.join("fields");
        if let Some(t) = &self.trajectory {
            t.write_csv(std::io::BufWriter::new(fs::File::create(dir.join("trajectory.csv"))?))?;
            match snapshots {
                SnapshotPolicy::None => {}
                SnapshotPolicy::Final => {
                    fs::create_dir_all(&fields)?;
                    dump::save(&t.final_state.phi, fields.join("phi_final.jfb"))?;
                }
                SnapshotPolicy::All => {
                    fs::create_dir_all(&fields)?;
                    for (i, (_, phi)) in t.snapshots.iter().enumerate() {
                        dump::save(phi, fields.join(format!("phi_{i:05}.jfb")))?;
                    }
                    dump::save(&t.final_state.phi, fields.join("phi_final.jfb"))?;
                }
            }
        }
        if let Some(e) = &self.elliptic {
            if snapshots != SnapshotPolicy::None {
                fs::create_dir_all(&fields)?;
                dump::save(&e.psi, fields.join("psi.jfb"))?;
            }
        }
        if let Some(f) = &self.family {
            fs::write(dir.join("family.json"), serde_json::to_string_pretty(&f.to_json())? + "\n")?;
            if snapshots == SnapshotPolicy::All {
                fs::create_dir_all(&fields)?;
                for s in &f.solutions {
                    dump::save(&s.psi, fields.join(format!("psi_delta_{:e}.jfb", s.delta)))?;
                }
            }
        }
        Ok(())
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs the enabled stages of a parsed scenario: elliptic solve, flow,
/// comparison. Writes outputs when `out_dir` (or the scenario's output
/// directory) is set.
pub fn run_scenario(parsed: &ParsedScenario, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    let cfg = &parsed.config;
    // Invariants are checked again right before execution.
    let prep = cfg.prepare(&parsed.base_dir)?;
    let mut verdicts = BTreeMap::new();
    let mut warnings = parsed.warnings.clone();
    let mut timings = BTreeMap::new();
    let alpha = prep.chi.sub(&prep.omega)?;

    let mut elliptic = None;
    let mut family = None;
    let mut elliptic_summary = None;
    if cfg.stages.elliptic {
        let start = Instant::now();
        let newton = cfg.elliptic.newton_options();
        let surrogate = match &cfg.diagnostics.trace {
            Some(t) => Some(stage(
                "elliptic",
                match &t.weight {
                    Some(w) => w.build(&prep.grid).and_then(|w| DegeneracySurrogate::new(w, t.threshold)),
                    None => DegeneracySurrogate::from_background(&alpha, t.threshold),
                },
            )?),
            None => None,
        };
        let q = cfg
            .diagnostics
            .trace
            .as_ref()
            .map(|t| QConstants { big_a: t.big_a, a: t.a })
            .unwrap_or_default();
        let (sol, trace) = match cfg.elliptic.solver {
            EllipticSolver::Direct => {
                let problem = stage(
                    "elliptic",
                    EllipticProblem::new(alpha.clone(), prep.omega.clone(), 0.0, Some(prep.rhs_density.clone())),
                )?;
                let sol = stage("elliptic", solve_ma_newton(&problem, &ScalarField::zeros(&prep.grid), &newton))?;
                let trace = match &surrogate {
                    Some(s) => Some(stage("elliptic", trace_diagnostic(&sol, &alpha, &prep.omega, s, q))?),
                    None => None,
                };
                (sol, trace)
            }
            EllipticSolver::Family => {
                let options = FamilyOptions {
                    schedule: cfg.elliptic.delta_schedule.clone(),
                    newton,
                    rhs_density: Some(prep.rhs_density.clone()),
                    surrogate: surrogate.clone(),
                    q_constants: q,
                    keep_solutions: cfg.output.snapshots == SnapshotPolicy::All,
                };
                let (sol, diag) = stage("elliptic", solve_degenerate_family(&alpha, &prep.omega, &options))?;
                family_verdicts(&mut verdicts, &diag, &alpha, &prep, cfg);
                let trace = diag.traces.last().cloned();
                family = Some(diag);
                (sol, trace)
            }
        };
        verdicts.insert(
            "elliptic_residual".into(),
            Verdict::at_most(sol.residual_sup, cfg.elliptic.tol_newton),
        );
        verdicts.insert("elliptic_mass_identity".into(), Verdict::at_most(sol.mass_defect, MASS_TOLERANCE));
        elliptic_summary = Some(EllipticSummary {
            solver: cfg.elliptic.solver,
            newton_iterations: sol.newton_iterations,
            residual: sol.residual_sup,
            mass_defect: sol.mass_defect,
            sup_psi: sol.psi.sup_abs(),
            compact_trace: trace.as_ref().and_then(|t| t.compact_trace),
            global_trace: trace.as_ref().map(|t| t.global_trace),
        });
        elliptic = Some(sol);
        timings.insert("elliptic".into(), start.elapsed().as_secs_f64());
    }

    if cfg.diagnostics.gradient_check {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let dir = random_band_limited(&prep.grid, 4.min(prep.grid.resolution() / 2), 1.0, &mut rng)?;
        let err = stage(
            "diagnostics",
            gradient_check(&prep.phi0, &dir, &prep.chi, &prep.omega, GRADIENT_STEP),
        )?;
        verdicts.insert("gradient_check".into(), Verdict::at_most(err, GRADIENT_TOLERANCE));
    }

    let mut trajectory = None;
    let mut flow_summary = None;
    let mut status = "ELLIPTIC_ONLY".to_string();
    let (mut i0, mut i_end, mut j0, mut j_end) = (None, None, None, None);
    let mut residual = elliptic.as_ref().map_or(f64::NAN, |e| e.residual_sup);
    if cfg.stages.flow {
        let start = Instant::now();
        let mut fc = FlowConfig::new(prep.chi.clone(), prep.omega.clone(), prep.phi0.clone());
        fc.params = cfg.flow;
        fc.reference = elliptic.as_ref().map(|e| e.psi.clone());
        fc.h_epsilons = cfg.diagnostics.h_epsilon.clone();
        fc.keep_snapshots = cfg.output.snapshots == SnapshotPolicy::All;
        let traj = stage("flow", run_flow(&fc))?;
        let problem = FlowProblem::with_constant(prep.chi.clone(), prep.omega.clone(), 1.0)?;
        let terminal = FlowState::new(&problem, traj.final_state.phi.clone(), traj.final_state.time)?;
        residual = stationarity_residual(&terminal, &prep.omega, 1.0)?;
        let report = FunctionalReport::evaluate(&traj.final_state.phi, &prep.chi, &prep.omega, None)?;
        status = serde_json::to_value(traj.status)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        i0 = Some(traj.initial_i());
        j0 = Some(traj.initial_j());
        i_end = Some(report.i_value);
        j_end = Some(report.j_value);

        verdicts.insert(
            "i_conservation".into(),
            Verdict::at_most(traj.relative_i_drift(), I_DRIFT_TOLERANCE),
        );
        verdicts.insert(
            "j_monotonicity".into(),
            Verdict::at_most(traj.max_j_increase.max(0.0), cfg.flow.monotonicity_slack),
        );
        verdicts.insert(
            "energy_identity".into(),
            Verdict::at_most(traj.max_energy_defect, ENERGY_TOLERANCE),
        );
        verdicts.insert(
            "positivity".into(),
            Verdict {
                passed: traj.status != Status::PositivityFloor,
                value: traj.samples.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min),
                tolerance: cfg.flow.positivity_floor_fraction * traj.samples[0].min_eig,
            },
        );
        for c in &traj.comparisons {
            verdicts.insert(
                format!("h_eps_{:e}", c.epsilon),
                Verdict {
                    passed: c.passed(),
                    value: (c.upper_max - c.upper_initial).max(c.lower_initial - c.lower_min),
                    tolerance: c.slack,
                },
            );
        }
        flow_summary = Some(FlowSummary {
            steps: traj.steps,
            final_time: traj.final_state.time,
            max_i_drift: traj.max_i_drift,
            max_j_increase: traj.max_j_increase,
            max_energy_defect: traj.max_energy_defect,
            min_eig_initial: traj.samples[0].min_eig,
            min_eig_lowest: traj.samples.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min),
            sup_phi_max: traj.samples.iter().map(|s| s.sup_abs_phi).fold(0.0, f64::max),
        });
        warnings.extend(traj.warnings.iter().cloned());
        trajectory = Some(traj);
        timings.insert("flow".into(), start.elapsed().as_secs_f64());
    }

    let mut comparison = None;
    if cfg.stages.compare {
        if let (Some(t), Some(e)) = (&trajectory, &elliptic) {
            let c = stage(
                "compare",
                compare_limits(&t.final_state.phi, &e.psi, Some(&prep.chi), cfg.diagnostics.compare_tolerance),
            )?;
            verdicts.insert(
                "flow_elliptic_agreement".into(),
                Verdict::at_most(c.sup_difference, c.tolerance),
            );
            comparison = Some(c);
        }
    }

    let summary = RunSummary {
        scenario: parsed.hash.clone(),
        name: cfg.name.clone(),
        status,
        i0,
        i_end,
        j0,
        j_end,
        residual,
        c_raw: prep.c_raw,
        verdicts,
        elliptic: elliptic_summary,
        flow: flow_summary,
        comparison,
        warnings,
    };
    let outcome = ScenarioOutcome {
        summary,
        trajectory,
        elliptic,
        family,
        prepared: prep,
        timings,
    };
    let dir: Option<PathBuf> = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.as_ref().map(|d| parsed.base_dir.join(d)));
    if let Some(dir) = dir {
        outcome.write_outputs(&dir, cfg.output.snapshots)?;
    }
    Ok(outcome)
}

fn family_verdicts(
    verdicts: &mut BTreeMap<String, Verdict>,
    diag: &FamilyDiagnostics,
    alpha: &HermitianFormField,
    prep: &Prepared,
    cfg: &super::ScenarioConfig,
) {
    if cfg.elliptic.rhs.is_one() {
        let worst = diag
            .records
            .iter()
            .map(|r| {
                let closed = normalization_constant_from_classes(alpha.class(), prep.omega.class(), r.delta);
                (r.c_delta - closed).abs()
            })
            .fold(0.0, f64::max);
        verdicts.insert("family_c_delta".into(), Verdict::at_most(worst, C_DELTA_TOLERANCE));
    }
    let worst_mass = diag.mass_defects.iter().copied().fold(0.0, f64::max);
    verdicts.insert("family_mass_identity".into(), Verdict::at_most(worst_mass, MASS_TOLERANCE));
    if let Some(t) = &cfg.diagnostics.trace {
        let traces: Vec<f64> = diag.records.iter().filter_map(|r| r.compact_trace).collect();
        let variation = relative_spread(&traces);
        verdicts.insert(
            "compact_trace_variation".into(),
            Verdict::at_most(variation, t.max_variation),
        );
    }
}

/// `(max - min) / max` of a positive series; infinite if empty.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi.abs()
}
