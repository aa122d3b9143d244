use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has length {got}, expected {expected} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),

    #[error("node index {index} out of range for {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("edge weight vector `{name}` has length {got}, expected {expected}")]
    WeightLength {
        name: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("edge weight `{name}`[{index}] = {value} must be strictly positive")]
    NonPositiveWeight {
        name: &'static str,
        index: usize,
        value: f64,
    },

    #[error("no connected graph sampled after {attempts} attempts (num_nodes={num_nodes}, edge_prob={edge_prob})")]
    ConnectivityRetriesExhausted {
        attempts: usize,
        num_nodes: usize,
        edge_prob: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point outside mirror-map domain: {0}")]
    OutOfDomain(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("reference solve failed: KKT residual {residual:e} exceeds gate {gate:e}")]
    ReferenceFailure { residual: f64, gate: f64 },

    #[error("reference inconsistency: duality gap {gap:e} below tolerance {tol:e}; the stored (x*, u*) pair is not a valid KKT certificate")]
    ReferenceInconsistency { gap: f64, tol: f64 },

    #[error("step size {alpha} exceeds the cap {cap} for {algorithm}")]
    StepSizeCap {
        alpha: f64,
        cap: f64,
        algorithm: &'static str,
    },

    #[error("solver internal error: {0}")]
    SolverInternal(String),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
