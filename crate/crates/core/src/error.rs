use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("VNF type {vnf_type} does not fit on EC {ec}")]
    InfeasiblePlacement { vnf_type: usize, ec: usize },

    #[error("no active request of VNF type {vnf_type} on EC {ec}")]
    DepartureUnderflow { vnf_type: usize, ec: usize },

    #[error("state space has more than {cap} states")]
    ScenarioTooLarge { cap: usize },

    #[error("action {action} is not admissible in this state")]
    InadmissibleAction { action: String },

    #[error("policy evaluation did not converge within {sweeps} sweeps (last delta {delta:e})")]
    NonConvergence { sweeps: usize, delta: f64 },

    #[error("invalid rate: {0}")]
    InvalidRate(String),

    #[error("trace format: {0}")]
    TraceFormat(String),

    #[error("state not found in solved policy: {0}")]
    StateNotFound(String),

    #[error("scenario hash mismatch: artifact {artifact}, scenario {scenario}")]
    ScenarioMismatch { artifact: String, scenario: String },

    #[error("policy chose infeasible EC {ec} for request {seq}")]
    InfeasibleDecision { seq: u64, ec: usize },

    #[error("resource invariant violated on EC {ec}")]
    ResourceViolation { ec: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    MismatchedTraces(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
