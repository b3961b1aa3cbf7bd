use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use jflow::geometry::{dump, FourierMode, Grid, ScalarField};
use jflow::scenario::{parse_scenario, run_scenario, EllipticSolver, InitialPhi, ParseOptions, ScenarioConfig};
use jflow::Error;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/scenarios")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jflow"))
}

fn parse(text: &str) -> jflow::Result<jflow::scenario::ParsedScenario> {
    ScenarioConfig::parse_str(text, &ParseOptions::default())
}

fn violations(text: &str, options: &ParseOptions) -> Vec<String> {
    match ScenarioConfig::parse_str(text, options) {
        Err(Error::Config(v)) => v,
        other => panic!("expected a config error, got {other:?}"),
    }
}

const SMALL: &str = r#"
name = "small"

[grid]
resolution = 16

[chi]
matrix = [[2.0, 0.0], [0.0, 2.0]]

[initial_phi]
kind = "fourier"
modes = [{ k = [1, 0], cos = 0.02 }]

[flow]
t_max = 20.0

[diagnostics]
h_epsilon = [0.01]
"#;

#[test]
fn shipped_scenarios_validate() {
    let mut count = 0;
    for entry in fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        let parsed = parse_scenario(&path, &ParseOptions { strict: true, ..Default::default() })
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.hash.len(), 64);
        count += 1;
    }
    assert!(count >= 4);
}

#[test]
fn defaults_and_initial_data() {
    let p = parse(SMALL).unwrap();
    assert_eq!(p.config.grid.resolution, 16);
    assert_eq!(p.config.elliptic.solver, EllipticSolver::Direct);
    assert_eq!(p.config.initial_phi, InitialPhi::Fourier { modes: vec![FourierMode::cos(&[1, 0], 0.02)] });
    assert!(p.config.stages.flow && p.config.stages.elliptic && p.config.stages.compare);
}

#[test]
fn every_violation_is_reported() {
    let text = r#"
[grid]
resolution = 16

[omega]
matrix = [[1.0, 0.3], [0.0, 1.0]]

[flow]
t_max = -1.0
cfl_factor = 0.0

[diagnostics]
h_epsilon = [-0.5]
"#;
    let v = violations(text, &ParseOptions::default());
    for needle in ["omega.matrix is not symmetric", "flow.t_max", "flow.cfl_factor", "h_epsilon entries"] {
        assert!(v.iter().any(|m| m.contains(needle)), "missing {needle} in {v:?}");
    }
}

#[test]
fn hypotheses_are_checked() {
    // c = 2 * 2 * 1 / (2 * 1) is not 1
    let unnormalized = "[grid]\nresolution = 16\n[chi]\nmatrix = [[1.0, 0.0], [0.0, 1.0]]\n";
    let v = violations(unnormalized, &ParseOptions::default());
    assert!(v.iter().any(|m| m.contains("topological constant")), "{v:?}");

    // c = (3 + 1.5) / (3 * 1.5) = 1, but omega_22 = 1 + 0.8 cos(2 pi x2) exceeds chi_22
    let below = r#"
[grid]
resolution = 16
[chi]
matrix = [[3.0, 0.0], [0.0, 1.5]]
[omega]
potential = [{ k = [0, 1], cos = -0.08105694691387022 }]
"#;
    let v = violations(below, &ParseOptions::default());
    assert!(v.iter().any(|m| m.contains("not semipositive")), "{v:?}");
    assert!(!v.iter().any(|m| m.contains("topological constant")), "{v:?}");

    let bad_grid = "[grid]\nresolution = 12\n";
    let v = violations(bad_grid, &ParseOptions::default());
    assert!(v.iter().any(|m| m.contains("power of two")), "{v:?}");
}

#[test]
fn unknown_keys_warn_or_fail() {
    let text = format!("{SMALL}\n[flow_typo]\nx = 1\n");
    let lenient = parse(&text).unwrap();
    assert!(lenient.warnings.iter().any(|w| w.contains("flow_typo")));
    let v = violations(&text, &ParseOptions { strict: true, ..Default::default() });
    assert!(v.iter().any(|m| m.contains("unknown key `flow_typo`")), "{v:?}");
}

#[test]
fn overrides_apply_before_validation() {
    let options = ParseOptions {
        overrides: vec!["grid.resolution=32".into(), "flow.t_max=0.25".into(), "name=renamed".into()],
        ..Default::default()
    };
    let p = ScenarioConfig::parse_str(SMALL, &options).unwrap();
    assert_eq!(p.config.grid.resolution, 32);
    assert_eq!(p.config.flow.t_max, 0.25);
    assert_eq!(p.config.name, "renamed");
    assert_ne!(p.hash, parse(SMALL).unwrap().hash);

    let broken = ParseOptions { overrides: vec!["grid.resolution".into()], ..Default::default() };
    assert!(violations(SMALL, &broken).iter().any(|m| m.contains("key=value")));
}

#[test]
fn stage_gating_is_validated() {
    let text = format!("{SMALL}\n[stages]\nelliptic = false\n");
    let v = violations(&text, &ParseOptions::default());
    assert!(v.iter().any(|m| m.contains("h_epsilon needs")), "{v:?}");
    assert!(v.iter().any(|m| m.contains("stages.compare needs")), "{v:?}");

    let text = "[grid]\nresolution = 16\n[stages]\nflow = false\nelliptic = false\ncompare = false\n";
    assert!(violations(text, &ParseOptions::default()).iter().any(|m| m.contains("no stage")));

    let text = "[grid]\nresolution = 16\n[elliptic.rhs]\nconstant = 2.0\n";
    assert!(violations(text, &ParseOptions::default()).iter().any(|m| m.contains("elliptic.rhs = 1")));
}

#[test]
fn runs_are_deterministic() {
    let p = parse(SMALL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_scenario(&p, Some(a.path())).unwrap();
    run_scenario(&p, Some(b.path())).unwrap();
    assert!(first.summary.passed(), "{:?}", first.summary.failed_verdicts());
    for file in ["summary.json", "trajectory.csv", "fields/phi_final.jfb", "fields/psi.jfb"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], p.hash.as_str());
    assert_eq!(summary["status"], "CONVERGED");
    assert_eq!(summary["verdicts"]["h_eps_1e-2"]["passed"], true);
}

#[test]
fn initial_data_from_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::reduced(16).unwrap();
    let phi = ScalarField::from_fn(&g, |x| 0.01 * (2.0 * std::f64::consts::PI * x[1]).sin()).unwrap();
    dump::save(&phi, dir.path().join("phi0.jfb")).unwrap();
    let text = "[grid]\nresolution = 16\n[initial_phi]\nkind = \"file\"\npath = \"phi0.jfb\"\n";
    let path = dir.path().join("s.toml");
    fs::write(&path, text).unwrap();
    let p = parse_scenario(&path, &ParseOptions::default()).unwrap();
    let prepared = p.config.prepare(&p.base_dir).unwrap();
    assert_eq!(prepared.phi0.values(), phi.values());

    let wrong = "[grid]\nresolution = 32\n[initial_phi]\nkind = \"file\"\npath = \"phi0.jfb\"\n";
    fs::write(&path, wrong).unwrap();
    assert!(matches!(parse_scenario(&path, &ParseOptions::default()), Err(Error::Config(_))));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, SMALL).unwrap();
    let out = dir.path().join("out");

    let status = bin().arg("validate").arg(&good).output().unwrap().status;
    assert_eq!(status.code(), Some(0));

    let run = bin().arg("run").arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(printed["name"], "small");
    assert!(out.join("summary.json").exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[grid]\nresolution = 7\n").unwrap();
    assert_eq!(bin().arg("validate").arg(&bad).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("run").arg(&bad).output().unwrap().status.code(), Some(2));

    // an unreachable tolerance turns the agreement verdict into a failure
    let strict = bin()
        .arg("run")
        .arg(&good)
        .args(["--override", "diagnostics.compare_tolerance=1e-30"])
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(1), "{}", String::from_utf8_lossy(&strict.stderr));

    let phi = out.join("fields/phi_final.jfb");
    let psi = out.join("fields/psi.jfb");
    let same = bin().arg("compare").arg(&phi).arg(&phi).output().unwrap();
    assert_eq!(same.status.code(), Some(0));
    let cross = bin().arg("compare").arg(&phi).arg(&psi).args(["--tolerance", "1e-6"]).output().unwrap();
    assert_eq!(cross.status.code(), Some(0), "{}", String::from_utf8_lossy(&cross.stdout));
    let missing = bin().arg("compare").arg(&phi).arg(dir.path().join("nope.jfb")).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
}
