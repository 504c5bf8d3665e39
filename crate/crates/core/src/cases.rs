//! Grid files shipped under `cases/`.

/// The 10-node reference feeder.
pub const REFERENCE_FEEDER: &str = include_str!("../../../cases/reference_feeder.grid");

/// One line feeding one constant-power load: `r = 0.1`, `p = -1`, `v = 1`.
pub const TWO_NODE: &str = include_str!("../../../cases/two_node.grid");

/// Meshed feeder with two slacks and a droop terminal.
pub const MESHED_DROOP: &str = include_str!("../../../cases/meshed_droop.grid");

pub const ALL: [&str; 3] = [REFERENCE_FEEDER, TWO_NODE, MESHED_DROOP];
