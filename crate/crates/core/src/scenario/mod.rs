//! Declarative scenarios: TOML configuration, validation, stage
//! orchestration and machine-readable reports.
//!
//! ```toml
//! name = "cosine"
//!
//! [grid]
//! mode = "reduced"
//! resolution = 32
//!
//! [chi]
//! matrix = [[2.0, 0.0], [0.0, 2.0]]
//!
//! [initial_phi]
//! kind = "fourier"
//! modes = [{ k = [1, 0], cos = 0.05 }]
//! ```

mod config;
mod run;

pub use config::{
    parse_scenario, DensitySpec, DiagnosticsSpec, EllipticSolver, EllipticSpec, FormSpec, GridSpec, InitialPhi,
    OutputSpec, ParseOptions, ParsedScenario, Prepared, ScenarioConfig, SnapshotPolicy, Stages, TraceSpec,
    HYPOTHESIS_TOLERANCE,
};
pub use run::{
    compare_limits, relative_spread, run_scenario, EllipticSummary, FlowSummary, LimitComparison, RunSummary,
    ScenarioOutcome, Verdict,
};
