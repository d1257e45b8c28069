use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A design or analysis configuration violates one of its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A numeric argument fell outside its mathematical domain.
    #[error("{name} must lie in {range}, got {value}")]
    OutOfDomain {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    /// An arm statistic was requested before the arm received any subjects.
    #[error("arm {0} has no observations")]
    EmptyArm(usize),

    /// A statistic was requested on a degenerate sample configuration.
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    /// Node-doubling quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: last delta {delta:e} above tolerance {tol:e} at {nodes} nodes")]
    QuadratureNonConvergence { tol: f64, delta: f64, nodes: usize },

    /// A simulated trial failed; carries the stream id for reproduction.
    #[error("trial stream {stream_id} failed: {source}")]
    Trial {
        stream_id: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
