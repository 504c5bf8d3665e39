use crate::grid::NodeId;

/// Errors raised while reading or validating a grid description.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: node {node} is defined twice with different kinds")]
    DuplicateNode { line: usize, node: NodeId },
    #[error("node {0} is defined more than once")]
    DuplicateNodeId(NodeId),
    #[error("branch {from}-{to} references node {missing}, which is never declared")]
    UndeclaredNode {
        from: NodeId,
        to: NodeId,
        missing: NodeId,
    },
    #[error("branch {0}-{0} connects a node to itself")]
    SelfLoop(NodeId),
    #[error("branch {from}-{to} has non-positive resistance {r}")]
    NonPositiveResistance { from: NodeId, to: NodeId, r: f64 },
    #[error("node {node}: {message}")]
    InvalidNodeParameter { node: NodeId, message: String },
    #[error("grid is not connected: node {0} cannot be reached from node {1}")]
    DisconnectedGraph(NodeId, NodeId),
    #[error("grid has no constant-power terminal")]
    MissingPowerTerminal,
    #[error("grid has no constant-voltage terminal")]
    MissingVoltageTerminal,
}

/// Errors raised by the linear-algebra layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("D_RR + G_RR is singular; cannot eliminate resistance nodes")]
    SingularReduction,
    #[error("reduced conductance matrix B_PP is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Errors raised by the fixed-point iteration and the certificate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("voltage at position {0} is zero; the map is undefined there")]
    ZeroVoltageEntry(usize),
    #[error("iteration diverged after {iterations} iterations (last step {last_step:e})")]
    Diverged { iterations: usize, last_step: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("power vector is zero; no load to scale")]
    ZeroLoad,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Errors raised by the independent oracles and the load sweep.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("Newton Jacobian is singular at iteration {0}")]
    SingularJacobian(usize),
    #[error("Newton iteration did not converge in {0} iterations")]
    MaxIterations(usize),
    #[error("solver still converges at multiplier {0}; no collapse point found")]
    NoDivergenceFound(f64),
    #[error("solver does not converge at nominal load")]
    NominalNotConverged,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
