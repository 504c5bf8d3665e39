#![allow(dead_code)]

use lvdc_flow::grid::{BranchSpec, GridSpec, NodeId, NodeKind, PartitionedGrid};
use lvdc_flow::prelude::*;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct Case {
    pub pg: PartitionedGrid,
    pub net: Network,
    pub p: DVector<f64>,
}

pub fn case(spec: &GridSpec) -> Case {
    let pg = validate(spec).unwrap();
    let net = Network::new(&pg).unwrap();
    let p = DVector::from_vec(pg.powers());
    Case { pg, net, p }
}

pub fn case_text(text: &str) -> Case {
    case(&parse_grid(text).unwrap())
}

pub fn scaled(text: &str, m: f64) -> Case {
    case(&scale_loads(&parse_grid(text).unwrap(), m))
}

/// Random connected grid with `n` nodes: a random spanning tree plus a few
/// extra branches. Node 1 is always a slack and node 2 always a power node.
pub fn random_grid<R: Rng>(rng: &mut R, n: usize) -> GridSpec {
    assert!(n >= 2);
    let mut nodes = vec![
        (NodeId(1), NodeKind::Voltage { v_set: rng.gen_range(0.95..1.05) }),
        (NodeId(2), NodeKind::Power { p: rng.gen_range(-1.0..1.0) }),
    ];
    for i in 3..=n as u32 {
        let kind = match rng.gen_range(0..5) {
            0 => NodeKind::Voltage { v_set: rng.gen_range(0.95..1.05) },
            1 => NodeKind::Power { p: rng.gen_range(-1.0..1.0) },
            2 => NodeKind::Resistance { g: 0.0 },
            3 => NodeKind::Resistance { g: rng.gen_range(0.1..2.0) },
            _ => NodeKind::Droop { p: rng.gen_range(-1.0..1.0), g: rng.gen_range(0.5..5.0) },
        };
        nodes.push((NodeId(i), kind));
    }
    let mut order: Vec<u32> = (1..=n as u32).collect();
    order.shuffle(rng);
    let mut branches = Vec::new();
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        branches.push(BranchSpec { from: NodeId(parent), to: NodeId(order[k]), r: rng.gen_range(0.01..0.2) });
    }
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(1..=n as u32);
        let b = rng.gen_range(1..=n as u32);
        if a != b {
            branches.push(BranchSpec { from: NodeId(a), to: NodeId(b), r: rng.gen_range(0.01..0.2) });
        }
    }
    GridSpec { nodes, branches }
}

/// Independent evaluation of the unreduced nodal equations.
///
/// Assembles the Laplacian directly from the branch list in node-id order,
/// fixes the voltage and power node voltages, solves the resistance rows
/// `(G·V)_r = -g_r·V_r` with a full LU, and returns the resistance-node
/// voltages and the network currents at the power nodes.
pub fn full_system(spec: &GridSpec, v_p: &DVector<f64>) -> (Vec<(NodeId, f64)>, Vec<(NodeId, f64)>) {
    let mut ids: Vec<NodeId> = spec.nodes.iter().map(|(id, _)| *id).collect();
    ids.sort();
    let pos = |id: NodeId| ids.iter().position(|x| *x == id).unwrap();
    let n = ids.len();
    let mut g = DMatrix::zeros(n, n);
    for b in &spec.branches {
        let (i, j) = (pos(b.from), pos(b.to));
        g[(i, i)] += 1.0 / b.r;
        g[(j, j)] += 1.0 / b.r;
        g[(i, j)] -= 1.0 / b.r;
        g[(j, i)] -= 1.0 / b.r;
    }
    let p_ids: Vec<NodeId> = ids
        .iter()
        .copied()
        .filter(|id| matches!(spec.kind(*id), Some(NodeKind::Power { .. } | NodeKind::Droop { .. })))
        .collect();
    let mut a = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (i, id) in ids.iter().enumerate() {
        match spec.kind(*id).unwrap() {
            NodeKind::Voltage { v_set } => {
                a[(i, i)] = 1.0;
                rhs[i] = v_set;
            }
            NodeKind::Power { .. } | NodeKind::Droop { .. } => {
                a[(i, i)] = 1.0;
                rhs[i] = v_p[p_ids.iter().position(|x| x == id).unwrap()];
            }
            NodeKind::Resistance { g: shunt } => {
                for j in 0..n {
                    a[(i, j)] = g[(i, j)];
                }
                a[(i, i)] += shunt;
            }
        }
    }
    let v = a.lu().solve(&rhs).unwrap();
    let current = &g * &v;
    let v_r = ids
        .iter()
        .enumerate()
        .filter(|(_, id)| matches!(spec.kind(**id), Some(NodeKind::Resistance { .. })))
        .map(|(i, id)| (*id, v[i]))
        .collect();
    let i_p = p_ids.iter().map(|id| (*id, current[pos(*id)])).collect();
    (v_r, i_p)
}

/// Transform `T(V) = B⁻¹(diag(V)⁻¹p − J)` computed from an explicit inverse.
pub fn map_via_inverse(b_inv: &DMatrix<f64>, j: &DVector<f64>, p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    b_inv * (p.component_div(v) - j)
}
