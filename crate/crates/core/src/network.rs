//! Conductance matrix assembly and elimination of the resistance nodes.
//!
//! With the nodes ordered as voltage, resistance and power terminals, the
//! nodal equations `I = G·V` split into nine blocks. Resistance terminals
//! draw `I_R = -D_RR·V_R`, which lets `V_R` be written in terms of `V_V`
//! and `V_P`:
//!
//! ```text
//! V_R  = -(D_RR + G_RR)⁻¹ (G_RV·V_V + G_RP·V_P)
//! I_P  = J_P + B_PP·V_P
//! J_P  = (G_PV - G_PR (D_RR + G_RR)⁻¹ G_RV)·V_V
//! B_PP =  G_PP - G_PR (D_RR + G_RR)⁻¹ G_RP
//! ```
//!
//! Droop shunts are added to the diagonal of `B_PP` afterwards.

use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::NetworkError;
use crate::grid::{NodeId, Part, PartitionedGrid};
use crate::output::sci;

/// The nodal conductance matrix in partition order (V, R, P) plus the
/// terminal conductances that stay out of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceBlocks {
    g: DMatrix<f64>,
    n_v: usize,
    n_r: usize,
    n_p: usize,
    /// Diagonal of D_RR: shunt conductance of each resistance terminal.
    pub d_rr: DVector<f64>,
    /// Droop shunt conductance of each power terminal (zero if none).
    pub droop: DVector<f64>,
    pub v_index: Vec<NodeId>,
    pub r_index: Vec<NodeId>,
    pub p_index: Vec<NodeId>,
    /// Branches as `(i, j, r)` with partition-order endpoints.
    pub branches: Vec<(usize, usize, f64)>,
}

impl ConductanceBlocks {
    /// Full Laplacian in partition order.
    pub fn full(&self) -> &DMatrix<f64> {
        &self.g
    }

    fn range(&self, part: Part) -> (usize, usize) {
        match part {
            Part::Voltage => (0, self.n_v),
            Part::Resistance => (self.n_v, self.n_r),
            Part::Power => (self.n_v + self.n_r, self.n_p),
        }
    }

    /// Copy of the block `G_{row,col}`.
    pub fn block(&self, row: Part, col: Part) -> DMatrix<f64> {
        let (r0, nr) = self.range(row);
        let (c0, nc) = self.range(col);
        self.g.view((r0, c0), (nr, nc)).into_owned()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_v, self.n_r, self.n_p)
    }
}

/// Assemble the branch Laplacian of a validated grid.
///
/// Parallel branches simply accumulate. Terminal conductances are kept
/// apart: resistance terminals go to `d_rr`, droop shunts to `droop`.
pub fn build_blocks(pg: &PartitionedGrid) -> ConductanceBlocks {
    let (n_v, n_r, n_p) = (pg.v_nodes.len(), pg.r_nodes.len(), pg.p_nodes.len());
    let n = n_v + n_r + n_p;
    let index = |id: NodeId| -> usize {
        match pg.slot(id).expect("validated grid has every branch endpoint") {
            (Part::Voltage, i) => i,
            (Part::Resistance, i) => n_v + i,
            (Part::Power, i) => n_v + n_r + i,
        }
    };
    let mut g = DMatrix::zeros(n, n);
    let mut branches = Vec::with_capacity(pg.grid.branches.len());
    for b in &pg.grid.branches {
        let (i, j) = (index(b.from), index(b.to));
        branches.push((i, j, b.r));
        let y = 1.0 / b.r;
        g[(i, i)] += y;
        g[(j, j)] += y;
        g[(i, j)] -= y;
        g[(j, i)] -= y;
    }
    ConductanceBlocks {
        g,
        n_v,
        n_r,
        n_p,
        d_rr: DVector::from_vec(pg.r_conductances()),
        droop: DVector::from_vec(pg.p_conductances()),
        v_index: pg.v_nodes.clone(),
        r_index: pg.r_nodes.clone(),
        p_index: pg.p_nodes.clone(),
        branches,
    }
}

/// The nonlinear system left after elimination: `P = diag(V)·(J + B·V)`.
///
/// Immutable once built; it is `Send + Sync` and can be shared between
/// worker threads.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub b_pp: DMatrix<f64>,
    pub j_p: DVector<f64>,
    factor: Cholesky<f64, Dyn>,
    /// Diagonal of `B_PP⁻¹`: Thevenin resistance seen from each power node.
    pub r_diag: DVector<f64>,
    pub p_index: Vec<NodeId>,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.j_p.len()
    }

    /// Solve `B_PP·x = rhs` with the stored factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(rhs)
    }

    /// `B_PP⁻¹`, one column per unit right-hand side.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.factor.solve(&DMatrix::identity(self.dim(), self.dim()))
    }

    /// Network current `J_P + B_PP·v` drawn out of each power node.
    pub fn injected_current(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.j_p + &self.b_pp * v
    }
}

/// Linear map from terminal voltages back to the eliminated nodes:
/// `V_R = M_V·V_V + M_P·V_P`.
#[derive(Debug, Clone)]
pub struct RecoveryOperator {
    pub m_v: DMatrix<f64>,
    pub m_p: DMatrix<f64>,
    pub r_index: Vec<NodeId>,
}

/// Eliminate the resistance nodes.
///
/// `v_set` holds the voltage-terminal setpoints in partition order.
pub fn reduce(
    blocks: &ConductanceBlocks,
    v_set: &DVector<f64>,
) -> Result<(ReducedSystem, RecoveryOperator), NetworkError> {
    let (n_v, n_r, n_p) = blocks.dims();
    if v_set.len() != n_v {
        return Err(NetworkError::DimensionMismatch {
            expected: n_v,
            actual: v_set.len(),
        });
    }
    let g_pp = blocks.block(Part::Power, Part::Power);
    let g_pv = blocks.block(Part::Power, Part::Voltage);

    let (mut b_pp, j_coef, m_v, m_p) = if n_r == 0 {
        (
            g_pp,
            g_pv,
            DMatrix::zeros(0, n_v),
            DMatrix::zeros(0, n_p),
        )
    } else {
        let inner = blocks.block(Part::Resistance, Part::Resistance)
            + DMatrix::from_diagonal(&blocks.d_rr);
        let inner = Cholesky::new(inner).ok_or(NetworkError::SingularReduction)?;
        // X_V = (D+G_RR)⁻¹ G_RV, X_P = (D+G_RR)⁻¹ G_RP
        let x_v = inner.solve(&blocks.block(Part::Resistance, Part::Voltage));
        let x_p = inner.solve(&blocks.block(Part::Resistance, Part::Power));
        let g_pr = blocks.block(Part::Power, Part::Resistance);
        (g_pp - &g_pr * &x_p, g_pv - &g_pr * &x_v, -x_v, -x_p)
    };
    for (k, g) in blocks.droop.iter().enumerate() {
        b_pp[(k, k)] += g;
    }
    // Elimination rounds asymmetrically; the factorization reads the lower
    // triangle only, so mirror it for consumers of b_pp.
    b_pp = (&b_pp + b_pp.transpose()) * 0.5;

    let j_p = j_coef * v_set;
    let factor = Cholesky::new(b_pp.clone()).ok_or(NetworkError::NotPositiveDefinite)?;
    let r_diag = DVector::from_iterator(
        n_p,
        (0..n_p).map(|k| {
            let mut e = DVector::zeros(n_p);
            e[k] = 1.0;
            factor.solve(&e)[k]
        }),
    );
    if r_diag.iter().any(|r| !(*r > 0.0)) {
        return Err(NetworkError::NotPositiveDefinite);
    }

    Ok((
        ReducedSystem {
            b_pp,
            j_p,
            factor,
            r_diag,
            p_index: blocks.p_index.clone(),
        },
        RecoveryOperator {
            m_v,
            m_p,
            r_index: blocks.r_index.clone(),
        },
    ))
}

/// Voltages at the eliminated resistance nodes.
pub fn recover_vr(
    op: &RecoveryOperator,
    v_v: &DVector<f64>,
    v_p: &DVector<f64>,
) -> Result<DVector<f64>, NetworkError> {
    if v_v.len() != op.m_v.ncols() {
        return Err(NetworkError::DimensionMismatch {
            expected: op.m_v.ncols(),
            actual: v_v.len(),
        });
    }
    if v_p.len() != op.m_p.ncols() {
        return Err(NetworkError::DimensionMismatch {
            expected: op.m_p.ncols(),
            actual: v_p.len(),
        });
    }
    Ok(&op.m_v * v_v + &op.m_p * v_p)
}

/// Blocks, reduced system and recovery operator for one grid.
#[derive(Debug, Clone)]
pub struct Network {
    pub blocks: ConductanceBlocks,
    pub reduced: ReducedSystem,
    pub recovery: RecoveryOperator,
    pub v_set: DVector<f64>,
}

impl Network {
    pub fn new(pg: &PartitionedGrid) -> Result<Self, NetworkError> {
        let blocks = build_blocks(pg);
        let v_set = DVector::from_vec(pg.v_set());
        let (reduced, recovery) = reduce(&blocks, &v_set)?;
        Ok(Network {
            blocks,
            reduced,
            recovery,
            v_set,
        })
    }
}

/// Plain-text dump of `B_PP`, `J_P` and `r_diag`, row-major, `%.12e`.
pub fn dump_matrices(rs: &ReducedSystem) -> String {
    let n = rs.dim();
    let mut out = String::new();
    let ids: Vec<String> = rs.p_index.iter().map(|id| id.to_string()).collect();
    let _ = writeln!(out, "# power nodes: {}", ids.join(" "));
    let _ = writeln!(out, "B_PP {n} {n}");
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| sci(rs.b_pp[(i, j)], 12)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    for (label, v) in [("J_P", &rs.j_p), ("r_diag", &rs.r_diag)] {
        let _ = writeln!(out, "{label} {n} 1");
        for x in v.iter() {
            let _ = writeln!(out, "{}", sci(*x, 12));
        }
    }
    out
}
