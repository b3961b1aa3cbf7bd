use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    #[error("degenerate class: [chi]^2 = {0} is not positive")]
    DegenerateClass(f64),

    #[error("singular metric: minimum eigenvalue {min_eig} at node {node}")]
    SingularMetric { node: usize, min_eig: f64 },

    #[error("state left the positive cone: minimum eigenvalue {min_eig} at node {node}")]
    NotInPositiveCone { node: usize, min_eig: f64 },

    #[error("time step underflow after {halvings} halvings (dt = {dt:e}); positivity lost at node {node}")]
    Stiffness { node: usize, dt: f64, halvings: usize },

    #[error("background is not normalized: topological constant c = {0}, expected 1")]
    Normalization(f64),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("line search could not keep the form positive (min eig {min_eig:e}); continuation in delta needed")]
    ContinuationNeeded { min_eig: f64 },

    #[error("newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("regularized family failed at delta = {delta}: {source}")]
    Family {
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed field dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
