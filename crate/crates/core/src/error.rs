use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("cycle detected: branch {from} -> {to} closes a loop")]
    Cycle { from: String, to: String },

    #[error("node {0} is not connected to the source")]
    Disconnected(String),

    #[error("load on node {node} phase {phase} but the phase is not available on the path to source")]
    LoadOnAbsentPhase { node: String, phase: char },

    #[error("unknown node id {0}")]
    UnknownNode(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("power flow did not converge after {iterations} iterations (worst mismatch {mismatch:.3e} pu at node {node})")]
    NonConvergence {
        iterations: usize,
        mismatch: f64,
        node: String,
    },

    #[error("zero voltage on loaded phase {phase} of node {node}")]
    ZeroVoltage { node: String, phase: char },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
