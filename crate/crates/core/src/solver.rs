//! Fixed-point power flow.
//!
//! The constant-power terminals satisfy `V = T(V)` with
//! `T(V) = B⁻¹·(diag(V)⁻¹·P − J)`. Two iterations are provided:
//!
//! * [`Method::Jacobi`] applies `T` to the whole vector (successive
//!   approximations). Each step is one solve with the Cholesky factor of `B`.
//! * [`Method::GaussSeidel`] sweeps the nodes in ascending partition order
//!   and updates node `k` from row `k` of `B` using the values already
//!   updated in the same sweep.
//!
//! Iteration stops when the max-norm of the step falls below the tolerance.

use nalgebra::DVector;

use crate::certificate::VoltageBall;
use crate::error::SolveError;
use crate::grid::NodeId;
use crate::network::{recover_vr, Network, ReducedSystem};

const ZERO_VOLTAGE: f64 = 1e-12;
const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPoint {
    Flat(f64),
    Explicit(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Max-norm bound on the iterate step, per-unit volts.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
    pub initial_point: InitialPoint,
    pub ball: VoltageBall,
    /// Keep every iterate in [`SolveResult::trace`].
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_iterations: 1000,
            method: Method::Jacobi,
            initial_point: InitialPoint::Flat(1.0),
            ball: VoltageBall::default(),
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), SolveError> {
        if !(self.tolerance > 0.0) {
            return Err(SolveError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        VoltageBall::new(self.ball.v_min, self.ball.v_max)?;
        Ok(())
    }

    fn start(&self, n: usize) -> Result<DVector<f64>, SolveError> {
        match &self.initial_point {
            InitialPoint::Flat(v) => Ok(DVector::from_element(n, *v)),
            InitialPoint::Explicit(v) if v.len() == n => Ok(v.clone()),
            InitialPoint::Explicit(v) => Err(SolveError::InvalidConfig(format!(
                "initial point has {} entries, expected {n}",
                v.len()
            ))),
        }
    }
}

/// Outcome of the bare iteration on the reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub v_p: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some iterate had an entry outside the voltage ball.
    pub left_ball: bool,
    /// Max-norm of `V(k+1) − V(k)` for each iteration.
    pub step_norms: Vec<f64>,
    /// Iterates `V(1), V(2), …` when tracing is on.
    pub trace: Option<Vec<DVector<f64>>>,
}

/// A full power-flow solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub v_p: DVector<f64>,
    pub v_r: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub left_ball: bool,
    pub step_norms: Vec<f64>,
    /// Max-norm of the power mismatch at the final iterate.
    pub residual_norm: f64,
    /// Ohmic losses in the branches.
    pub losses: f64,
    /// Power delivered by the voltage terminals.
    pub slack_power: f64,
    /// Every node voltage, ascending by id.
    pub voltages: Vec<(NodeId, f64)>,
    pub trace: Option<Vec<DVector<f64>>>,
}

/// Power mismatch `p_k − v_k·(J_k + (B·v)_k)` at each power node.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub mismatch: DVector<f64>,
}

impl Residual {
    pub fn max_norm(&self) -> f64 {
        if self.mismatch.is_empty() {
            0.0
        } else {
            self.mismatch.amax()
        }
    }
}

fn check_nonzero(v: &DVector<f64>) -> Result<(), SolveError> {
    match v.iter().position(|x| !(x.abs() >= ZERO_VOLTAGE)) {
        Some(k) => Err(SolveError::ZeroVoltageEntry(k)),
        None => Ok(()),
    }
}

/// One application of the map `T(v) = B⁻¹·(diag(v)⁻¹·p − J)`.
pub fn apply_map(
    rs: &ReducedSystem,
    p: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>, SolveError> {
    check_nonzero(v)?;
    let rhs = p.component_div(v) - &rs.j_p;
    Ok(rs.solve(&rhs))
}

/// Power mismatch of `v` against the schedule `p`.
pub fn residual(rs: &ReducedSystem, p: &DVector<f64>, v: &DVector<f64>) -> Residual {
    let mismatch = p - v.component_mul(&rs.injected_current(v));
    Residual { mismatch }
}

fn gauss_seidel_sweep(rs: &ReducedSystem, p: &DVector<f64>, v: &mut DVector<f64>) -> Result<(), SolveError> {
    let b = &rs.b_pp;
    for k in 0..v.len() {
        if !(v[k].abs() >= ZERO_VOLTAGE) {
            return Err(SolveError::ZeroVoltageEntry(k));
        }
        let coupling: f64 = (0..v.len()).filter(|&j| j != k).map(|j| b[(k, j)] * v[j]).sum();
        v[k] = (p[k] / v[k] - rs.j_p[k] - coupling) / b[(k, k)];
    }
    Ok(())
}

/// Run the fixed-point iteration on the reduced system alone.
///
/// Running out of iterations is reported through `converged = false`.
/// A blow-up (step above 1e6, a voltage collapsing to zero, or step norms
/// that grew over the whole run) is an error.
pub fn iterate(rs: &ReducedSystem, p: &DVector<f64>, cfg: &SolverConfig) -> Result<Iteration, SolveError> {
    cfg.check()?;
    if p.len() != rs.dim() {
        return Err(crate::error::NetworkError::DimensionMismatch {
            expected: rs.dim(),
            actual: p.len(),
        }
        .into());
    }
    let mut v = cfg.start(rs.dim())?;
    check_nonzero(&v)?;

    let mut step_norms = Vec::new();
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut left_ball = false;
    let mut converged = false;

    for k in 1..=cfg.max_iterations {
        let next = match cfg.method {
            Method::Jacobi => apply_map(rs, p, &v),
            Method::GaussSeidel => {
                let mut w = v.clone();
                gauss_seidel_sweep(rs, p, &mut w).map(|_| w)
            }
        };
        let next = next.map_err(|err| match err {
            SolveError::ZeroVoltageEntry(_) => SolveError::Diverged {
                iterations: k,
                last_step: step_norms.last().copied().unwrap_or(f64::NAN),
            },
            other => other,
        })?;
        let step = (&next - &v).amax();
        step_norms.push(step);
        v = next;
        if let Some(t) = trace.as_mut() {
            t.push(v.clone());
        }
        if !cfg.ball.contains(&v) {
            left_ball = true;
        }
        if !step.is_finite() || step > BLOW_UP || v.iter().any(|x| !(x.abs() >= ZERO_VOLTAGE)) {
            return Err(SolveError::Diverged {
                iterations: k,
                last_step: step,
            });
        }
        if step < cfg.tolerance {
            converged = true;
            break;
        }
    }

    if !converged {
        let (first, last) = (step_norms[0], *step_norms.last().unwrap());
        if last > first {
            return Err(SolveError::Diverged {
                iterations: step_norms.len(),
                last_step: last,
            });
        }
    }

    Ok(Iteration {
        iterations: step_norms.len(),
        v_p: v,
        converged,
        left_ball,
        step_norms,
        trace,
    })
}

/// Solve the power flow and recover the full network state.
///
/// `p` is the power schedule of the power nodes in partition order
/// (see [`crate::grid::PartitionedGrid::powers`]).
pub fn solve(net: &Network, p: &DVector<f64>, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    let it = iterate(&net.reduced, p, cfg)?;
    let v_r = recover_vr(&net.recovery, &net.v_set, &it.v_p)?;

    // Full voltage vector in partition order (V, R, P).
    let full = DVector::from_iterator(
        net.v_set.len() + v_r.len() + it.v_p.len(),
        net.v_set.iter().chain(v_r.iter()).chain(it.v_p.iter()).copied(),
    );
    let losses: f64 = net
        .blocks
        .branches
        .iter()
        .map(|&(i, j, r)| (full[i] - full[j]).powi(2) / r)
        .sum();
    let g = net.blocks.full();
    let n_v = net.v_set.len();
    let slack_power: f64 = (0..n_v)
        .map(|i| net.v_set[i] * g.row(i).transpose().dot(&full))
        .sum();

    let mut voltages: Vec<(NodeId, f64)> = net
        .blocks
        .v_index
        .iter()
        .chain(&net.blocks.r_index)
        .chain(&net.blocks.p_index)
        .copied()
        .zip(full.iter().copied())
        .collect();
    voltages.sort_by_key(|(id, _)| *id);

    Ok(SolveResult {
        residual_norm: residual(&net.reduced, p, &it.v_p).max_norm(),
        v_p: it.v_p,
        v_r,
        iterations: it.iterations,
        converged: it.converged,
        left_ball: it.left_ball,
        step_norms: it.step_norms,
        losses,
        slack_power,
        voltages,
        trace: it.trace,
    })
}

/// Signed power imbalance of a solution:
/// slack power + scheduled power − shunt consumption − branch losses.
///
/// Shunt consumption covers resistance terminals and droop shunts. At an
/// exact fixed point this is zero; for an iterate it equals the sum of the
/// power mismatches, so its size follows the solver tolerance.
pub fn power_balance(result: &SolveResult, net: &Network, p: &DVector<f64>) -> f64 {
    let shunt_r: f64 = net
        .blocks
        .d_rr
        .iter()
        .zip(result.v_r.iter())
        .map(|(g, v)| g * v * v)
        .sum();
    let shunt_p: f64 = net
        .blocks
        .droop
        .iter()
        .zip(result.v_p.iter())
        .map(|(g, v)| g * v * v)
        .sum();
    result.slack_power + p.sum() - shunt_r - shunt_p - result.losses
}
