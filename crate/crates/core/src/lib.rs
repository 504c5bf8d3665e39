//! Power flow for low-voltage DC grids with constant-power terminals.
//!
//! The pipeline is:
//!
//! 1. [`grid::parse_grid`] and [`grid::validate`] read a grid file and split
//!    the nodes into voltage, resistance and power terminals.
//! 2. [`network::Network::new`] assembles the conductance matrix and
//!    eliminates the resistance nodes, leaving `P = diag(V)·(J + B·V)`.
//! 3. [`certificate::certify`] evaluates the contraction constant of the
//!    fixed-point map before any iteration runs.
//! 4. [`solver::solve`] iterates the map (Jacobi or Gauss-Seidel) and
//!    recovers the full network state.
//!
//! ```
//! use lvdc_flow::prelude::*;
//!
//! let spec = parse_grid(lvdc_flow::cases::REFERENCE_FEEDER)?;
//! let pg = validate(&spec)?;
//! let net = Network::new(&pg)?;
//! let p = DVector::from_vec(pg.powers());
//!
//! let cert = certify(&net.reduced, &p, VoltageBall::default())?;
//! assert!(cert.contractive);
//!
//! let result = solve(&net, &p, &SolverConfig::default())?;
//! assert!(result.converged && result.iterations <= 5);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The `book/` directory at the repository root walks through each step.

pub mod cases;
pub mod certificate;
pub mod cli;
pub mod error;
pub mod grid;
pub mod network;
pub mod oracle;
pub mod output;
pub mod solver;
pub mod sweep;

pub mod prelude {
    pub use crate::certificate::{certify, critical_multiplier, matrix_max_norm, Certificate, VoltageBall};
    pub use crate::error::{AnalysisError, GridError, NetworkError, SolveError};
    pub use crate::grid::{parse_grid, render, scale_loads, validate, GridSpec, NodeId, NodeKind};
    pub use crate::network::{build_blocks, recover_vr, reduce, Network, ReducedSystem};
    pub use crate::oracle::{analytic_two_node, multistart_probe, newton_solve, TwoNode};
    pub use crate::solver::{apply_map, power_balance, residual, solve, InitialPoint, Method, SolverConfig};
    pub use crate::sweep::{empirical_critical_load, load_sweep, SweepConfig, SweepRow};
    pub use nalgebra::DVector;
}

/// Chapters of the guide in `book/`, compiled so their examples stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grid-files.md")]
    mod grid_files {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/certificate.md")]
    mod certificate {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    mod sweeps {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
