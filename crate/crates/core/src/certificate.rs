//! A-priori contraction constant for the power-flow map.
//!
//! On the ball `v_min ≤ V ≤ v_max` the map `T(V) = B⁻¹(diag(V)⁻¹P − J)`
//! changes by `B⁻¹·diag(1/V − 1/U)·P`, and `|1/V − 1/U| ≤ |V − U|/v_min²`.
//! Bounding each factor with the largest-entry norm gives
//!
//! ```text
//! α_global = max|B⁻¹_ij| · max|P_k| / v_min²
//! ```
//!
//! A second, nodal figure pairs every terminal's power with its own
//! Thevenin resistance, i.e. operating current over short-circuit current
//! at minimum voltage:
//!
//! ```text
//! α_nodal = max_k |P_k|·r_kk / v_min²
//! ```
//!
//! The two are not the same number: `α_nodal ≤ α_global`, and the
//! `contractive` flag is decided by `α_global`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::grid::NodeId;
use crate::network::ReducedSystem;

/// Admissible voltage band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageBall {
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for VoltageBall {
    fn default() -> Self {
        VoltageBall {
            v_min: 0.55,
            v_max: 1.5,
        }
    }
}

impl VoltageBall {
    pub fn new(v_min: f64, v_max: f64) -> Result<Self, SolveError> {
        if !(v_min > 0.0 && v_min < v_max && v_max.is_finite()) {
            return Err(SolveError::InvalidConfig(format!(
                "voltage ball needs 0 < v_min < v_max, got [{v_min}, {v_max}]"
            )));
        }
        Ok(VoltageBall { v_min, v_max })
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        v.iter().all(|x| *x >= self.v_min && *x <= self.v_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha_global: f64,
    pub alpha_nodal: f64,
    /// Power node attaining `alpha_nodal`.
    pub worst_node: NodeId,
    /// `alpha_global < 1`.
    pub contractive: bool,
    pub ball: VoltageBall,
}

/// Largest absolute entry of a matrix (a vector is an `n × 1` matrix).
pub fn matrix_max_norm(m: &DMatrix<f64>) -> Result<f64, SolveError> {
    if m.is_empty() {
        return Err(SolveError::InvalidConfig("max norm of an empty matrix".into()));
    }
    Ok(m.amax())
}

fn vec_max_norm(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.amax()
    }
}

/// Evaluate both contraction constants for the power schedule `p`.
///
/// Nothing here depends on an iterate: the certificate is known before any
/// power flow is run.
pub fn certify(
    rs: &ReducedSystem,
    p: &DVector<f64>,
    ball: VoltageBall,
) -> Result<Certificate, SolveError> {
    if p.len() != rs.dim() {
        return Err(crate::error::NetworkError::DimensionMismatch {
            expected: rs.dim(),
            actual: p.len(),
        }
        .into());
    }
    let v2 = ball.v_min * ball.v_min;
    let alpha_global = matrix_max_norm(&rs.inverse())? * vec_max_norm(p) / v2;

    let mut worst = 0;
    let mut alpha_nodal = 0.0;
    for k in 0..rs.dim() {
        let a = p[k].abs() * rs.r_diag[k] / v2;
        if a > alpha_nodal {
            alpha_nodal = a;
            worst = k;
        }
    }
    Ok(Certificate {
        alpha_global,
        alpha_nodal,
        worst_node: rs.p_index[worst],
        contractive: alpha_global < 1.0,
        ball,
    })
}

/// Uniform load multiplier at which `α_global` reaches 1.
///
/// `α_global` is linear in a uniform scaling of `p`, so this is just
/// `1 / α_global(p)`.
pub fn critical_multiplier(
    rs: &ReducedSystem,
    p: &DVector<f64>,
    ball: VoltageBall,
) -> Result<f64, SolveError> {
    let cert = certify(rs, p, ball)?;
    if cert.alpha_global == 0.0 {
        return Err(SolveError::ZeroLoad);
    }
    Ok(1.0 / cert.alpha_global)
}
