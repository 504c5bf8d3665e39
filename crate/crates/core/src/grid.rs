//! Grid descriptions: node kinds, branches, the text file format, and the
//! validation step that splits nodes into voltage, resistance and power
//! partitions.
//!
//! Sign convention: a positive power injects into the grid, a negative
//! power consumes from it.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// 1-based node label as it appears in a grid file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Terminal behaviour of a node. All quantities are per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Constant-voltage terminal (slack).
    Voltage { v_set: f64 },
    /// Constant-power terminal; `p > 0` injects.
    Power { p: f64 },
    /// Constant-resistance terminal stored as a shunt conductance. `g = 0`
    /// is a step node.
    Resistance { g: f64 },
    /// Constant power in parallel with a shunt conductance.
    Droop { p: f64, g: f64 },
}

impl NodeKind {
    pub fn step() -> Self {
        NodeKind::Resistance { g: 0.0 }
    }

    /// Scheduled power, if the node has a power component.
    pub fn power(&self) -> Option<f64> {
        match *self {
            NodeKind::Power { p } | NodeKind::Droop { p, .. } => Some(p),
            _ => None,
        }
    }

    fn check(&self, node: NodeId) -> Result<(), GridError> {
        let bad = |message: &str| {
            Err(GridError::InvalidNodeParameter {
                node,
                message: message.to_string(),
            })
        };
        match *self {
            NodeKind::Voltage { v_set } if !(v_set > 0.0 && v_set.is_finite()) => {
                bad("voltage setpoint must be positive")
            }
            NodeKind::Power { p } if !p.is_finite() => bad("power must be finite"),
            NodeKind::Resistance { g } if !(g >= 0.0 && g.is_finite()) => {
                bad("shunt conductance must be non-negative")
            }
            NodeKind::Droop { p, g } if !(g > 0.0 && g.is_finite() && p.is_finite()) => {
                bad("droop conductance must be positive")
            }
            _ => Ok(()),
        }
    }
}

/// A resistive line between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub from: NodeId,
    pub to: NodeId,
    /// Series resistance in per-unit ohms.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: Vec<(NodeId, NodeKind)>,
    pub branches: Vec<BranchSpec>,
}

impl GridSpec {
    pub fn kind(&self, id: NodeId) -> Option<NodeKind> {
        self.nodes.iter().find(|(n, _)| *n == id).map(|(_, k)| *k)
    }
}

/// Which partition a node falls in after validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Voltage,
    Resistance,
    Power,
}

/// A validated grid with its node partition. Each index list is sorted by
/// ascending [`NodeId`]; droop nodes sit in `p_nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedGrid {
    pub grid: GridSpec,
    pub v_nodes: Vec<NodeId>,
    pub r_nodes: Vec<NodeId>,
    pub p_nodes: Vec<NodeId>,
    slots: HashMap<NodeId, (Part, usize)>,
    kinds: HashMap<NodeId, NodeKind>,
}

impl PartitionedGrid {
    /// Partition and position of a node.
    pub fn slot(&self, id: NodeId) -> Option<(Part, usize)> {
        self.slots.get(&id).copied()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[&id]
    }

    pub fn node_count(&self) -> usize {
        self.slots.len()
    }

    /// Setpoints of the voltage nodes in partition order.
    pub fn v_set(&self) -> Vec<f64> {
        self.v_nodes
            .iter()
            .map(|id| match self.kinds[id] {
                NodeKind::Voltage { v_set } => v_set,
                _ => unreachable!("v_nodes only holds voltage terminals"),
            })
            .collect()
    }

    /// Scheduled powers of the power nodes in partition order.
    pub fn powers(&self) -> Vec<f64> {
        self.p_nodes
            .iter()
            .map(|id| self.kinds[id].power().unwrap_or(0.0))
            .collect()
    }

    /// Shunt conductances of the resistance nodes (the diagonal of D_RR).
    pub fn r_conductances(&self) -> Vec<f64> {
        self.r_nodes
            .iter()
            .map(|id| match self.kinds[id] {
                NodeKind::Resistance { g } => g,
                _ => unreachable!("r_nodes only holds resistance terminals"),
            })
            .collect()
    }

    /// Droop shunt conductances of the power nodes; zero for pure power nodes.
    pub fn p_conductances(&self) -> Vec<f64> {
        self.p_nodes
            .iter()
            .map(|id| match self.kinds[id] {
                NodeKind::Droop { g, .. } => g,
                _ => 0.0,
            })
            .collect()
    }
}

/// Parse a grid file.
///
/// The file holds `slack <id> <v_set>` lines and branch lines of the form
/// `<from> <to> <r> <TYPE> [values]`, where TYPE describes the `to` node:
///
/// | TYPE    | values    | node kind                       |
/// |---------|-----------|---------------------------------|
/// | `STEP`  |           | resistance with `g = 0`         |
/// | `P`     | `p`       | constant power                  |
/// | `R`     | `R`       | resistance with `g = 1/R`       |
/// | `DROOP` | `p g`     | power plus shunt conductance    |
/// | `-`     |           | none; `to` is declared elsewhere |
///
/// `#` starts a comment. A node may be typed by several branches (meshes,
/// parallel lines) as long as every declaration agrees.
pub fn parse_grid(text: &str) -> Result<GridSpec, GridError> {
    let mut kinds: BTreeMap<NodeId, NodeKind> = BTreeMap::new();
    let mut branches = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let syntax = |message: String| GridError::Syntax { line, message };

        if tokens[0].eq_ignore_ascii_case("slack") {
            if tokens.len() != 3 {
                return Err(syntax("expected `slack <node-id> <v_set>`".into()));
            }
            let node = parse_node(tokens[1]).map_err(syntax)?;
            let v_set = parse_f64(tokens[2], "v_set").map_err(syntax)?;
            if !(v_set > 0.0) {
                return Err(syntax(format!("slack voltage must be positive, got {v_set}")));
            }
            // A slack line always wins over nothing, but never over a typed node.
            if kinds.contains_key(&node) {
                return Err(GridError::DuplicateNode { line, node });
            }
            kinds.insert(node, NodeKind::Voltage { v_set });
            continue;
        }

        if tokens.len() < 4 {
            return Err(syntax("expected `<from> <to> <r> <TYPE> [<value>]`".into()));
        }
        let from = parse_node(tokens[0]).map_err(syntax)?;
        let to = parse_node(tokens[1]).map_err(syntax)?;
        let r = parse_f64(tokens[2], "r").map_err(syntax)?;
        if from == to {
            return Err(GridError::SelfLoop(from));
        }
        if !(r > 0.0) {
            return Err(GridError::NonPositiveResistance { from, to, r });
        }
        let ty = tokens[3].to_ascii_uppercase();
        let values = &tokens[4..];
        let expect = |n: usize| {
            if values.len() == n {
                Ok(())
            } else {
                Err(syntax(format!(
                    "type {ty} takes {n} value(s), got {}",
                    values.len()
                )))
            }
        };
        let kind = match ty.as_str() {
            "STEP" => {
                expect(0)?;
                Some(NodeKind::step())
            }
            "P" => {
                expect(1)?;
                Some(NodeKind::Power {
                    p: parse_f64(values[0], "power").map_err(syntax)?,
                })
            }
            "R" => {
                expect(1)?;
                let res = parse_f64(values[0], "resistance").map_err(syntax)?;
                if !(res > 0.0) {
                    return Err(syntax(format!("terminal resistance must be positive, got {res}")));
                }
                Some(NodeKind::Resistance { g: 1.0 / res })
            }
            "DROOP" => {
                expect(2)?;
                let p = parse_f64(values[0], "power").map_err(syntax)?;
                let g = parse_f64(values[1], "conductance").map_err(syntax)?;
                if !(g > 0.0) {
                    return Err(syntax(format!("droop conductance must be positive, got {g}")));
                }
                Some(NodeKind::Droop { p, g })
            }
            "-" => {
                expect(0)?;
                None
            }
            other => return Err(syntax(format!("unknown terminal type `{other}`"))),
        };
        if let Some(kind) = kind {
            declare(&mut kinds, line, to, kind)?;
        }
        branches.push(BranchSpec { from, to, r });
    }

    for b in &branches {
        for end in [b.from, b.to] {
            if !kinds.contains_key(&end) {
                return Err(GridError::UndeclaredNode {
                    from: b.from,
                    to: b.to,
                    missing: end,
                });
            }
        }
    }

    Ok(GridSpec {
        nodes: kinds.into_iter().collect(),
        branches,
    })
}

fn declare(
    kinds: &mut BTreeMap<NodeId, NodeKind>,
    line: usize,
    node: NodeId,
    kind: NodeKind,
) -> Result<(), GridError> {
    match kinds.get(&node) {
        Some(prev) if *prev != kind => Err(GridError::DuplicateNode { line, node }),
        Some(_) => Ok(()),
        None => {
            kinds.insert(node, kind);
            Ok(())
        }
    }
}

fn parse_node(tok: &str) -> Result<NodeId, String> {
    match tok.parse::<u32>() {
        Ok(0) | Err(_) => Err(format!("`{tok}` is not a positive node id")),
        Ok(n) => Ok(NodeId(n)),
    }
}

fn parse_f64(tok: &str, what: &str) -> Result<f64, String> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{tok}` is not a valid {what}")),
    }
}

/// Write a grid back in the file format accepted by [`parse_grid`].
///
/// Branches are re-oriented where needed so that every non-slack node is
/// typed by the first branch that touches it. Nodes with no incident
/// branch cannot be expressed and are dropped.
pub fn render(spec: &GridSpec) -> String {
    let mut out = String::new();
    let mut emitted: HashMap<NodeId, bool> = HashMap::new();
    for (id, kind) in &spec.nodes {
        if let NodeKind::Voltage { v_set } = kind {
            let _ = writeln!(out, "slack {id} {v_set}");
            emitted.insert(*id, true);
        }
    }
    let kind_of: HashMap<NodeId, NodeKind> = spec.nodes.iter().copied().collect();
    // A branch can only be written once one of its ends is declared, so
    // keep sweeping the remaining branches outward from the slacks.
    let mut pending: Vec<&BranchSpec> = spec.branches.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut deferred = Vec::new();
        for b in pending {
            let typed = |n: NodeId| emitted.contains_key(&n);
            let (from, to) = match (typed(b.from), typed(b.to)) {
                (true, true) => {
                    let _ = writeln!(out, "{} {} {} -", b.from, b.to, b.r);
                    continue;
                }
                (true, false) => (b.from, b.to),
                (false, true) => (b.to, b.from),
                (false, false) => {
                    deferred.push(b);
                    continue;
                }
            };
            let ty = match kind_of.get(&to) {
                Some(NodeKind::Resistance { g }) if *g == 0.0 => "STEP".to_string(),
                Some(NodeKind::Resistance { g }) => format!("R {}", 1.0 / g),
                Some(NodeKind::Power { p }) => format!("P {p}"),
                Some(NodeKind::Droop { p, g }) => format!("DROOP {p} {g}"),
                Some(NodeKind::Voltage { .. }) | None => "-".to_string(),
            };
            let _ = writeln!(out, "{from} {to} {} {ty}", b.r);
            emitted.insert(to, true);
        }
        if deferred.len() == before {
            // Unreachable from any slack; written as given so the parser
            // reports it.
            for b in deferred {
                let _ = writeln!(out, "{} {} {} -", b.from, b.to, b.r);
            }
            break;
        }
        pending = deferred;
    }
    out
}

/// Check the structural assumptions (at least one voltage and one power
/// terminal, connected graph, positive resistances) and build the node
/// partition.
pub fn validate(spec: &GridSpec) -> Result<PartitionedGrid, GridError> {
    let mut kinds = HashMap::with_capacity(spec.nodes.len());
    for (id, kind) in &spec.nodes {
        kind.check(*id)?;
        if kinds.insert(*id, *kind).is_some() {
            return Err(GridError::DuplicateNodeId(*id));
        }
    }
    for b in &spec.branches {
        if b.from == b.to {
            return Err(GridError::SelfLoop(b.from));
        }
        if !(b.r > 0.0 && b.r.is_finite()) {
            return Err(GridError::NonPositiveResistance {
                from: b.from,
                to: b.to,
                r: b.r,
            });
        }
        for end in [b.from, b.to] {
            if !kinds.contains_key(&end) {
                return Err(GridError::UndeclaredNode {
                    from: b.from,
                    to: b.to,
                    missing: end,
                });
            }
        }
    }

    let mut ids: Vec<NodeId> = kinds.keys().copied().collect();
    ids.sort();
    let (mut v_nodes, mut r_nodes, mut p_nodes) = (Vec::new(), Vec::new(), Vec::new());
    for id in &ids {
        match kinds[id] {
            NodeKind::Voltage { .. } => v_nodes.push(*id),
            NodeKind::Resistance { .. } => r_nodes.push(*id),
            NodeKind::Power { .. } | NodeKind::Droop { .. } => p_nodes.push(*id),
        }
    }
    if p_nodes.is_empty() {
        return Err(GridError::MissingPowerTerminal);
    }
    if v_nodes.is_empty() {
        return Err(GridError::MissingVoltageTerminal);
    }

    // Breadth-first search from the first voltage node.
    let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for b in &spec.branches {
        adj.entry(b.from).or_default().push(b.to);
        adj.entry(b.to).or_default().push(b.from);
    }
    let root = v_nodes[0];
    let mut seen: HashMap<NodeId, ()> = HashMap::from([(root, ())]);
    let mut queue = VecDeque::from([root]);
    while let Some(n) = queue.pop_front() {
        for m in adj.get(&n).into_iter().flatten() {
            if seen.insert(*m, ()).is_none() {
                queue.push_back(*m);
            }
        }
    }
    if let Some(lost) = ids.iter().find(|id| !seen.contains_key(id)) {
        return Err(GridError::DisconnectedGraph(*lost, root));
    }

    let mut slots = HashMap::with_capacity(ids.len());
    for (part, list) in [
        (Part::Voltage, &v_nodes),
        (Part::Resistance, &r_nodes),
        (Part::Power, &p_nodes),
    ] {
        for (i, id) in list.iter().enumerate() {
            slots.insert(*id, (part, i));
        }
    }

    Ok(PartitionedGrid {
        grid: spec.clone(),
        v_nodes,
        r_nodes,
        p_nodes,
        slots,
        kinds,
    })
}

/// Multiply every scheduled power (loads and generators) by `m`.
pub fn scale_loads(spec: &GridSpec, m: f64) -> GridSpec {
    scale_with(spec, |p| p * m)
}

/// Multiply only consumption (negative powers) by `m`; generation is left
/// at its nominal value.
pub fn scale_consumption(spec: &GridSpec, m: f64) -> GridSpec {
    scale_with(spec, |p| if p < 0.0 { p * m } else { p })
}

fn scale_with(spec: &GridSpec, f: impl Fn(f64) -> f64) -> GridSpec {
    let nodes = spec
        .nodes
        .iter()
        .map(|(id, kind)| {
            let kind = match *kind {
                NodeKind::Power { p } => NodeKind::Power { p: f(p) },
                NodeKind::Droop { p, g } => NodeKind::Droop { p: f(p), g },
                other => other,
            };
            (*id, kind)
        })
        .collect();
    GridSpec {
        nodes,
        branches: spec.branches.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TABLE1: &str = include_str!("../../../cases/reference_feeder.grid");

    fn kind(spec: &GridSpec, id: u32) -> NodeKind {
        spec.kind(NodeId(id)).unwrap()
    }

    #[test]
    fn parses_reference_case() {
        let spec = parse_grid(TABLE1).unwrap();
        assert_eq!(spec.nodes.len(), 10);
        assert_eq!(spec.branches.len(), 9);
        assert_eq!(kind(&spec, 1), NodeKind::Voltage { v_set: 1.0 });
        assert_eq!(kind(&spec, 2), NodeKind::step());
        assert_eq!(kind(&spec, 3), NodeKind::Power { p: -0.8 });
        assert_eq!(kind(&spec, 4), NodeKind::Power { p: -1.3 });
        assert_eq!(kind(&spec, 5), NodeKind::Power { p: 0.5 });
        assert_eq!(kind(&spec, 6), NodeKind::Resistance { g: 1.0 / 2.0 });
        assert_eq!(kind(&spec, 7), NodeKind::step());
        assert_eq!(kind(&spec, 8), NodeKind::Power { p: 0.3 });
        assert_eq!(kind(&spec, 9), NodeKind::Power { p: -0.7 });
        assert_eq!(kind(&spec, 10), NodeKind::Resistance { g: 1.0 / 1.25 });
        let net: f64 = spec.nodes.iter().filter_map(|(_, k)| k.power()).sum();
        assert!((net + 2.0).abs() < 1e-12);
    }

    #[test]
    fn parses_minimal_grid() {
        let spec = parse_grid("slack 1 1.0\n1 2 0.1 P -1.0\n").unwrap();
        assert_eq!(spec.nodes.len(), 2);
        assert_eq!(spec.branches, vec![BranchSpec { from: NodeId(1), to: NodeId(2), r: 0.1 }]);
    }

    #[test]
    fn rejects_self_loop() {
        let err = parse_grid("slack 1 1.0\n1 3 0.1 P 1.0\n3 3 0.1 P 1.0\n").unwrap_err();
        assert_eq!(err, GridError::SelfLoop(NodeId(3)));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_grid("# header\nslack 1 1.0\n1 2 abc P 1\n").unwrap_err();
        assert!(matches!(err, GridError::Syntax { line: 3, .. }), "{err:?}");
        let err = parse_grid("slack 1 1.0\n1 2 0.1 Q 1\n").unwrap_err();
        assert!(matches!(err, GridError::Syntax { line: 2, .. }));
        let err = parse_grid("slack 1 1.0\n1 2 0.1 P\n").unwrap_err();
        assert!(matches!(err, GridError::Syntax { line: 2, .. }));
    }

    #[test]
    fn conflicting_definitions_are_duplicates() {
        let err = parse_grid("slack 1 1.0\n1 2 0.1 P 1\n1 2 0.2 P 2\n").unwrap_err();
        assert_eq!(err, GridError::DuplicateNode { line: 3, node: NodeId(2) });
        let err = parse_grid("slack 1 1.0\nslack 1 1.0\n").unwrap_err();
        assert_eq!(err, GridError::DuplicateNode { line: 2, node: NodeId(1) });
        // Parallel branch with an identical declaration is fine.
        let spec = parse_grid("slack 1 1.0\n1 2 0.1 P 1\n1 2 0.2 P 1\n").unwrap();
        assert_eq!(spec.branches.len(), 2);
    }

    #[test]
    fn undeclared_from_node_is_rejected() {
        let err = parse_grid("slack 1 1.0\n5 2 0.1 P 1\n").unwrap_err();
        assert_eq!(
            err,
            GridError::UndeclaredNode { from: NodeId(5), to: NodeId(2), missing: NodeId(5) }
        );
    }

    #[test]
    fn partition_of_reference_case() {
        let pg = validate(&parse_grid(TABLE1).unwrap()).unwrap();
        let ids = |v: &[NodeId]| v.iter().map(|n| n.0).collect::<Vec<_>>();
        assert_eq!(ids(&pg.v_nodes), vec![1]);
        assert_eq!(ids(&pg.r_nodes), vec![2, 6, 7, 10]);
        assert_eq!(ids(&pg.p_nodes), vec![3, 4, 5, 8, 9]);
        assert_eq!(pg.slot(NodeId(8)), Some((Part::Power, 3)));
    }

    #[test]
    fn only_voltage_nodes_is_missing_power() {
        let spec = GridSpec {
            nodes: vec![
                (NodeId(1), NodeKind::Voltage { v_set: 1.0 }),
                (NodeId(2), NodeKind::Voltage { v_set: 1.0 }),
            ],
            branches: vec![BranchSpec { from: NodeId(1), to: NodeId(2), r: 0.1 }],
        };
        assert_eq!(validate(&spec), Err(GridError::MissingPowerTerminal));
    }

    #[test]
    fn missing_voltage_terminal() {
        let spec = GridSpec {
            nodes: vec![
                (NodeId(1), NodeKind::Power { p: 1.0 }),
                (NodeId(2), NodeKind::Power { p: -1.0 }),
            ],
            branches: vec![BranchSpec { from: NodeId(1), to: NodeId(2), r: 0.1 }],
        };
        assert_eq!(validate(&spec), Err(GridError::MissingVoltageTerminal));
    }

    #[test]
    fn removing_feeder_head_disconnects() {
        let mut spec = parse_grid(TABLE1).unwrap();
        spec.branches.retain(|b| !(b.from == NodeId(1) && b.to == NodeId(2)));
        assert!(matches!(validate(&spec), Err(GridError::DisconnectedGraph(_, NodeId(1)))));
    }

    #[test]
    fn bad_resistance_and_parameters() {
        let mut spec = parse_grid("slack 1 1.0\n1 2 0.1 P -1\n").unwrap();
        spec.branches[0].r = 0.0;
        assert!(matches!(validate(&spec), Err(GridError::NonPositiveResistance { .. })));
        let mut spec = parse_grid("slack 1 1.0\n1 2 0.1 P -1\n").unwrap();
        spec.nodes[0].1 = NodeKind::Voltage { v_set: -1.0 };
        assert!(matches!(validate(&spec), Err(GridError::InvalidNodeParameter { .. })));
    }

    #[test]
    fn scaling() {
        let spec = parse_grid(TABLE1).unwrap();
        assert_eq!(scale_loads(&spec, 1.0), spec);
        assert_eq!(kind(&scale_loads(&spec, 20.0), 4), NodeKind::Power { p: -26.0 });
        assert_eq!(kind(&scale_loads(&spec, 0.5), 5), NodeKind::Power { p: 0.25 });
        let c = scale_consumption(&spec, 2.0);
        assert_eq!(kind(&c, 5), NodeKind::Power { p: 0.5 });
        assert_eq!(kind(&c, 3), NodeKind::Power { p: -1.6 });
        assert_eq!(kind(&c, 6), kind(&spec, 6));
    }

    #[test]
    fn droop_and_link_lines() {
        let text = "slack 1 1.0\n1 2 0.1 DROOP -0.5 2.0\n2 3 0.1 P 0.2\n3 1 0.05 -\n";
        let spec = parse_grid(text).unwrap();
        assert_eq!(kind(&spec, 2), NodeKind::Droop { p: -0.5, g: 2.0 });
        let pg = validate(&spec).unwrap();
        assert_eq!(pg.p_nodes, vec![NodeId(2), NodeId(3)]);
        assert_eq!(pg.p_conductances(), vec![2.0, 0.0]);
        assert_eq!(pg.grid.branches.len(), 3);
    }

    #[test]
    fn render_round_trips_reference_case() {
        let spec = parse_grid(TABLE1).unwrap();
        let again = parse_grid(&render(&spec)).unwrap();
        let (a, b) = (validate(&spec).unwrap(), validate(&again).unwrap());
        assert_eq!((a.v_nodes, a.r_nodes, a.p_nodes), (b.v_nodes, b.r_nodes, b.p_nodes));
    }
}
