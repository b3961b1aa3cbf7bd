use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elliptic::{default_delta_schedule, NewtonOptions, QConstants};
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::functionals::NORMALIZATION_TOLERANCE;
use crate::geometry::{
    dump, fourier_field, random_band_limited, topological_constant, FourierMode, Grid, Hermitian2,
    HermitianFormField, Mode, ScalarField,
};

/// Tolerance on `min eig (chi - omega)`.
pub const HYPOTHESIS_TOLERANCE: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    /// Rescale `chi` so that `c = 1`.
    pub auto_normalize_c: bool,
    pub grid: GridSpec,
    pub omega: FormSpec,
    pub chi: FormSpec,
    pub initial_phi: InitialPhi,
    pub stages: Stages,
    pub flow: FlowParams,
    pub elliptic: EllipticSpec,
    pub diagnostics: DiagnosticsSpec,
    pub output: OutputSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            auto_normalize_c: false,
            grid: GridSpec::default(),
            omega: FormSpec::default(),
            chi: FormSpec {
                matrix: [[2.0, 0.0], [0.0, 2.0]],
                ..FormSpec::default()
            },
            initial_phi: InitialPhi::Zero,
            stages: Stages::default(),
            flow: FlowParams::default(),
            elliptic: EllipticSpec::default(),
            diagnostics: DiagnosticsSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub mode: Mode,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Reduced,
            resolution: 32,
        }
    }
}

/// Constant Hermitian part plus `dd^c` of a trigonometric potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormSpec {
    /// Real part of the matrix; must be symmetric.
    pub matrix: [[f64; 2]; 2],
    /// Imaginary part of the `(1,2)` entry.
    pub a12_imag: f64,
    pub potential: Vec<FourierMode>,
}

impl Default for FormSpec {
    fn default() -> Self {
        Self {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            a12_imag: 0.0,
            potential: Vec::new(),
        }
    }
}

impl FormSpec {
    pub fn constant_part(&self) -> Hermitian2 {
        Hermitian2::new(
            self.matrix[0][0],
            self.matrix[1][1],
            num_complex::Complex64::new(self.matrix[0][1], self.a12_imag),
        )
    }

    pub fn build(&self, grid: &Grid) -> Result<HermitianFormField> {
        let m = self.constant_part();
        if self.potential.is_empty() {
            Ok(HermitianFormField::constant(grid, m))
        } else {
            HermitianFormField::with_potential(m, &fourier_field(grid, &self.potential)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialPhi {
    Zero,
    Fourier { modes: Vec<FourierMode> },
    /// Binary field dump, resolved relative to the scenario file.
    File { path: PathBuf },
    /// Seeded band-limited field with the given sup norm.
    Random { band: usize, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stages {
    pub elliptic: bool,
    pub flow: bool,
    pub compare: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            elliptic: true,
            flow: true,
            compare: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllipticSolver {
    /// One Newton solve at `delta = 0`.
    Direct,
    /// Continuation along `delta_schedule`.
    Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EllipticSpec {
    pub solver: EllipticSolver,
    pub delta_schedule: Vec<f64>,
    pub tol_newton: f64,
    pub max_iterations: usize,
    pub eig_floor: f64,
    pub cg_rtol: f64,
    pub cg_max_iterations: usize,
    pub rhs: DensitySpec,
}

impl Default for EllipticSpec {
    fn default() -> Self {
        let n = NewtonOptions::default();
        Self {
            solver: EllipticSolver::Direct,
            delta_schedule: default_delta_schedule(),
            tol_newton: n.tol_newton,
            max_iterations: n.max_iterations,
            eig_floor: n.eig_floor,
            cg_rtol: n.cg_rtol,
            cg_max_iterations: n.cg_max_iterations,
            rhs: DensitySpec::default(),
        }
    }
}

impl EllipticSpec {
    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol_newton: self.tol_newton,
            max_iterations: self.max_iterations,
            eig_floor: self.eig_floor,
            cg_rtol: self.cg_rtol,
            cg_max_iterations: self.cg_max_iterations,
        }
    }
}

/// `(constant + sum of modes)^power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensitySpec {
    pub constant: f64,
    pub modes: Vec<FourierMode>,
    pub power: u32,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self {
            constant: 1.0,
            modes: Vec::new(),
            power: 1,
        }
    }
}

impl DensitySpec {
    pub fn is_one(&self) -> bool {
        self.constant == 1.0 && self.modes.is_empty()
    }

    pub fn build(&self, grid: &Grid) -> Result<ScalarField> {
        let base = fourier_field(grid, &self.modes)?.shift(self.constant);
        Ok(base.map(|v| v.powi(self.power as i32)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSpec {
    pub threshold: f64,
    /// Surrogate weight; when absent, `max(min eig alpha, 0)` is used.
    pub weight: Option<DensitySpec>,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub a: f64,
    /// Largest allowed relative spread of the compact-subset trace across
    /// the family.
    pub max_variation: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        let q = QConstants::default();
        Self {
            threshold: 0.1,
            weight: None,
            big_a: q.big_a,
            a: q.a,
            max_variation: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsSpec {
    pub h_epsilon: Vec<f64>,
    pub gradient_check: bool,
    pub trace: Option<TraceSpec>,
    /// Tolerance of the flow/elliptic agreement verdict.
    pub compare_tolerance: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            h_epsilon: Vec::new(),
            gradient_check: false,
            trace: None,
            compare_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotPolicy {
    None,
    Final,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub directory: Option<PathBuf>,
    pub snapshots: SnapshotPolicy,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            snapshots: SnapshotPolicy::Final,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Unknown keys are errors instead of warnings.
    pub strict: bool,
    /// `dotted.key=value` assignments applied before deserialization.
    pub overrides: Vec<String>,
    /// Directory for relative paths inside the scenario.
    pub base_dir: Option<PathBuf>,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct ParsedScenario {
    pub config: ScenarioConfig,
    /// Hex SHA-256 of the resolved configuration.
    pub hash: String,
    pub warnings: Vec<String>,
    pub base_dir: PathBuf,
}

/// Fields derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Grid,
    pub chi: HermitianFormField,
    pub omega: HermitianFormField,
    pub phi0: ScalarField,
    pub rhs_density: ScalarField,
    /// Topological constant before any rescaling.
    pub c_raw: f64,
    pub chi_scale: f64,
}

fn apply_override(root: &mut toml::Value, assignment: &str) -> std::result::Result<(), String> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override key `{key}` is malformed"));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| format!("override `{key}`: `{part}` is not inside a table"))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| format!("override `{key}` does not address a table entry"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    /// Parses and validates scenario text.
    pub fn parse_str(text: &str, options: &ParseOptions) -> Result<ParsedScenario> {
        let mut root: toml::Value = toml::from_str::<toml::Table>(text)
            .map(toml::Value::Table)
            .map_err(|e| Error::Config(vec![format!("syntax: {e}")]))?;
        let mut violations = Vec::new();
        for o in &options.overrides {
            if let Err(e) = apply_override(&mut root, o) {
                violations.push(e);
            }
        }
        let mut unknown = Vec::new();
        let config: ScenarioConfig = match serde_ignored::deserialize(root.clone(), |path| {
            unknown.push(path.to_string())
        }) {
            Ok(c) => c,
            Err(e) => {
                violations.push(format!("schema: {e}"));
                return Err(Error::Config(violations));
            }
        };
        let mut warnings = Vec::new();
        for key in unknown {
            if options.strict {
                violations.push(format!("unknown key `{key}`"));
            } else {
                warnings.push(format!("ignored unknown key `{key}`"));
            }
        }
        let base_dir = options.base_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        if let Err(Error::Config(v)) = config.prepare(&base_dir) {
            violations.extend(v);
        }
        if !violations.is_empty() {
            return Err(Error::Config(violations));
        }
        let canonical = serde_json::to_string(&config)?;
        let hash = Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(ParsedScenario {
            config,
            hash,
            warnings,
            base_dir,
        })
    }

    /// Validates the configuration and builds its fields, collecting every
    /// violation.
    pub fn prepare(&self, base_dir: &Path) -> Result<Prepared> {
        let mut v: Vec<String> = Vec::new();
        self.check_parameters(&mut v);
        let grid = match Grid::new(self.grid.mode, self.grid.resolution) {
            Ok(g) => g,
            Err(e) => {
                v.push(format!("grid: {e}"));
                return Err(Error::Config(v));
            }
        };
        let built = self.build_fields(&grid, base_dir, &mut v);
        match built {
            Some(p) if v.is_empty() => Ok(p),
            _ => Err(Error::Config(v)),
        }
    }

    fn check_parameters(&self, v: &mut Vec<String>) {
        for (name, f) in [("omega", &self.omega), ("chi", &self.chi)] {
            if f.matrix[0][1] != f.matrix[1][0] {
                v.push(format!("{name}.matrix is not symmetric"));
            }
            if f.matrix.iter().flatten().chain([&f.a12_imag]).any(|x| !x.is_finite()) {
                v.push(format!("{name}.matrix has non-finite entries"));
            }
        }
        let p = &self.flow;
        for (name, x) in [
            ("flow.cfl_factor", p.cfl_factor),
            ("flow.tol_stationary", p.tol_stationary),
            ("flow.t_max", p.t_max),
            ("flow.sample_interval", p.sample_interval),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive and finite, got {x}"));
            }
        }
        if !(0.0..1.0).contains(&p.positivity_floor_fraction) {
            v.push(format!(
                "flow.positivity_floor_fraction must lie in [0, 1), got {}",
                p.positivity_floor_fraction
            ));
        }
        let e = &self.elliptic;
        if e.delta_schedule.is_empty() && e.solver == EllipticSolver::Family {
            v.push("elliptic.delta_schedule is empty".into());
        }
        if e.delta_schedule.iter().any(|d| !(*d >= 0.0)) || e.delta_schedule.windows(2).any(|w| w[1] >= w[0]) {
            v.push("elliptic.delta_schedule must be nonnegative and strictly decreasing".into());
        }
        if !(e.tol_newton > 0.0) {
            v.push(format!("elliptic.tol_newton must be positive, got {}", e.tol_newton));
        }
        let d = &self.diagnostics;
        for eps in &d.h_epsilon {
            if !(*eps > 0.0) {
                v.push(format!("diagnostics.h_epsilon entries must be positive, got {eps}"));
            }
        }
        if !d.h_epsilon.is_empty() && !(self.stages.flow && self.stages.elliptic) {
            v.push("diagnostics.h_epsilon needs both the elliptic and the flow stage".into());
        }
        if let Some(t) = &d.trace {
            if !(t.threshold >= 0.0) {
                v.push(format!("diagnostics.trace.threshold must be nonnegative, got {}", t.threshold));
            }
            if !self.stages.elliptic {
                v.push("diagnostics.trace needs the elliptic stage".into());
            }
        }
        if !(d.compare_tolerance > 0.0) {
            v.push(format!("diagnostics.compare_tolerance must be positive, got {}", d.compare_tolerance));
        }
        if self.stages.compare && !(self.stages.flow && self.stages.elliptic) {
            v.push("stages.compare needs both the elliptic and the flow stage".into());
        }
        if self.stages.compare && !e.rhs.is_one() {
            v.push("stages.compare needs elliptic.rhs = 1, the density of the flow's critical equation".into());
        }
        if self.stages.flow && e.solver == EllipticSolver::Family && self.stages.compare {
            v.push("stages.compare needs elliptic.solver = \"direct\"".into());
        }
        if !(self.stages.flow || self.stages.elliptic) {
            v.push("no stage enabled".into());
        }
    }

    fn build_fields(&self, grid: &Grid, base_dir: &Path, v: &mut Vec<String>) -> Option<Prepared> {
        let push = |v: &mut Vec<String>, what: &str, e: Error| v.push(format!("{what}: {e}"));
        let omega = self.omega.build(grid).map_err(|e| push(v, "omega", e)).ok();
        let chi = self.chi.build(grid).map_err(|e| push(v, "chi", e)).ok();
        let phi0 = match &self.initial_phi {
            InitialPhi::Zero => Ok(ScalarField::zeros(grid)),
            InitialPhi::Fourier { modes } => fourier_field(grid, modes),
            InitialPhi::File { path } => dump::load(base_dir.join(path)).and_then(|f| {
                f.grid().check_same(grid)?;
                Ok(f)
            }),
            InitialPhi::Random { band, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                random_band_limited(grid, *band, *amplitude, &mut rng)
            }
        }
        .map_err(|e| push(v, "initial_phi", e))
        .ok();
        let rhs_density = self.elliptic.rhs.build(grid).map_err(|e| push(v, "elliptic.rhs", e)).ok();
        if let Some(f) = &rhs_density {
            if f.min() < 0.0 {
                v.push(format!("elliptic.rhs density is negative somewhere (min {})", f.min()));
            }
        }
        let (omega, chi, phi0, rhs_density) = (omega?, chi?, phi0?, rhs_density?);

        let (node, w_min) = omega.min_eigenvalue();
        if w_min <= 0.0 {
            v.push(format!("omega is not positive: min eig {w_min} at node {node}"));
            return None;
        }
        let c_raw = match topological_constant(&chi, &omega) {
            Ok(c) => c,
            Err(e) => {
                v.push(format!("chi: {e}"));
                return None;
            }
        };
        let (chi, chi_scale) = if self.auto_normalize_c {
            (chi.scale(c_raw), c_raw)
        } else {
            (chi, 1.0)
        };
        let c = topological_constant(&chi, &omega).unwrap_or(f64::NAN);
        if !((c - 1.0).abs() <= NORMALIZATION_TOLERANCE) {
            v.push(format!(
                "topological constant c = {c} is not 1 (set auto_normalize_c = true to rescale chi)"
            ));
        }
        let (node, gap) = chi.sub(&omega).expect("same grid").min_eigenvalue();
        if gap < HYPOTHESIS_TOLERANCE {
            v.push(format!("chi - omega is not semipositive: min eig {gap} at node {node}"));
        }
        if self.stages.flow {
            let (_, chi_min) = chi.min_eigenvalue();
            match chi.plus_ddc(&phi0) {
                Ok(chi_phi) => {
                    let (node, m) = chi_phi.min_eigenvalue();
                    let need = self.flow.initial_margin * chi_min;
                    if !(m >= need) || chi_min <= 0.0 {
                        v.push(format!(
                            "initial_phi fails the positivity margin: min eig chi_phi0 = {m} at node {node}, need >= {need}"
                        ));
                    }
                }
                Err(e) => v.push(format!("initial_phi: {e}")),
            }
        }
        Some(Prepared {
            grid: grid.clone(),
            chi,
            omega,
            phi0,
            rhs_density,
            c_raw,
            chi_scale,
        })
    }
}

/// Reads, overrides and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>, options: &ParseOptions) -> Result<ParsedScenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let mut options = options.clone();
    if options.base_dir.is_none() {
        options.base_dir = Some(path.parent().map(Path::to_path_buf).unwrap_or_default());
    }
    ScenarioConfig::parse_str(&text, &options)
}
