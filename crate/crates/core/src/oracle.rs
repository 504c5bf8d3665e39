//! Independent checks on the fixed-point solver: Newton-Raphson on the
//! power mismatch, the closed-form two-node solution, and a seeded
//! multistart probe for uniqueness.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::AnalysisError;
use crate::network::ReducedSystem;
use crate::solver::{iterate, InitialPoint, SolverConfig};

const NEWTON_MAX_ITER: usize = 100;

/// Newton-Raphson on `F(v) = diag(v)·(J + B·v) − p`.
///
/// The Jacobian is `diag(J + B·v) + diag(v)·B`. Returns the root and the
/// number of Newton steps taken; stops once `max|F| < tol`.
pub fn newton_solve(
    rs: &ReducedSystem,
    p: &DVector<f64>,
    v0: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, usize), AnalysisError> {
    if v0.len() != rs.dim() || p.len() != rs.dim() {
        return Err(AnalysisError::InvalidArgument("dimension mismatch".into()));
    }
    if v0.iter().any(|v| *v == 0.0) {
        return Err(AnalysisError::InvalidArgument("Newton start has a zero entry".into()));
    }
    let mut v = v0.clone();
    for k in 0..=NEWTON_MAX_ITER {
        let current = rs.injected_current(&v);
        let f = v.component_mul(&current) - p;
        if f.amax() < tol {
            return Ok((v, k));
        }
        if k == NEWTON_MAX_ITER {
            break;
        }
        let jac = newton_jacobian(rs, &v);
        let dv = jac.lu().solve(&f).ok_or(AnalysisError::SingularJacobian(k))?;
        if dv.iter().any(|x| !x.is_finite()) {
            return Err(AnalysisError::SingularJacobian(k));
        }
        v -= dv;
    }
    Err(AnalysisError::MaxIterations(NEWTON_MAX_ITER))
}

/// Analytic Jacobian of the mismatch `diag(v)·(J + B·v) − p`.
pub fn newton_jacobian(rs: &ReducedSystem, v: &DVector<f64>) -> DMatrix<f64> {
    let current = rs.injected_current(v);
    let mut jac = DMatrix::from_diagonal(&current);
    for i in 0..v.len() {
        for j in 0..v.len() {
            jac[(i, j)] += v[i] * rs.b_pp[(i, j)];
        }
    }
    jac
}

/// Closed-form voltage of a single line feeding one power node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoNode {
    Voltage(f64),
    Infeasible,
}

/// Upper root of `v² − v_set·v − r·p = 0`.
pub fn analytic_two_node(r: f64, p: f64, v_set: f64) -> TwoNode {
    let disc = v_set * v_set + 4.0 * r * p;
    if disc < 0.0 {
        TwoNode::Infeasible
    } else {
        TwoNode::Voltage((v_set + disc.sqrt()) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub newton_v_p: Vec<f64>,
    pub newton_iterations: usize,
    /// Max-norm distance between the Newton root and the fixed-point result.
    pub agreement_norm: f64,
    /// Largest pairwise max-norm distance among converged multistart results.
    pub multistart_spread: f64,
    pub starts: usize,
    pub converged_starts: usize,
}

/// Solve from `starts` points drawn uniformly from the voltage ball and
/// compare every converged result, plus a Newton solve from flat start.
///
/// Start `i` draws from a ChaCha8 stream `i` keyed by `seed`, so the probe
/// is reproducible and independent of execution order.
pub fn multistart_probe(
    rs: &ReducedSystem,
    p: &DVector<f64>,
    cfg: &SolverConfig,
    starts: usize,
    seed: u64,
) -> Result<OracleReport, AnalysisError> {
    if starts < 2 {
        return Err(AnalysisError::InvalidArgument("multistart needs at least 2 starts".into()));
    }
    let n = rs.dim();
    let ball = cfg.ball;

    let mut finals: Vec<DVector<f64>> = Vec::with_capacity(starts);
    for i in 0..starts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let v0 = DVector::from_fn(n, |_, _| rng.gen_range(ball.v_min..=ball.v_max));
        let run_cfg = SolverConfig {
            initial_point: InitialPoint::Explicit(v0),
            record_trace: false,
            ..cfg.clone()
        };
        if let Ok(it) = iterate(rs, p, &run_cfg) {
            if it.converged {
                finals.push(it.v_p);
            }
        }
    }
    let mut spread: f64 = 0.0;
    for (i, a) in finals.iter().enumerate() {
        for b in &finals[i + 1..] {
            spread = spread.max((a - b).amax());
        }
    }

    let flat = SolverConfig {
        initial_point: InitialPoint::Flat(1.0),
        ..cfg.clone()
    };
    let reference = iterate(rs, p, &flat)?;
    let (newton_v_p, newton_iterations) = newton_solve(rs, p, &DVector::from_element(n, 1.0), 1e-12)?;

    Ok(OracleReport {
        agreement_norm: (&newton_v_p - &reference.v_p).amax(),
        newton_v_p: newton_v_p.iter().copied().collect(),
        newton_iterations,
        multistart_spread: spread,
        starts,
        converged_starts: finals.len(),
    })
}
