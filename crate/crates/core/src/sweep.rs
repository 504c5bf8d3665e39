//! Uniform load-scaling studies: iterations and α versus load multiplier,
//! and the empirical collapse point.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::certificate::certify;
use crate::error::{AnalysisError, SolveError};
use crate::grid::{scale_consumption, scale_loads, validate, GridSpec};
use crate::network::Network;
use crate::solver::{solve, InitialPoint, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub m_start: f64,
    pub m_end: f64,
    pub m_step: f64,
    pub solver: SolverConfig,
    /// Scale only consumption (negative powers), leaving generation as is.
    pub loads_only: bool,
    /// Start each point from the previous solution instead of the
    /// configured initial point. Forces sequential execution.
    pub warm_start: bool,
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            m_start: 0.1,
            m_end: 20.0,
            m_step: 0.1,
            solver: SolverConfig::default(),
            loads_only: false,
            warm_start: false,
            jobs: None,
        }
    }
}

impl SweepConfig {
    /// Multipliers `m_start + i·m_step` up to `m_end` inclusive. Computed
    /// from the index so no rounding accumulates.
    pub fn multipliers(&self) -> Result<Vec<f64>, AnalysisError> {
        if !(self.m_start > 0.0 && self.m_start <= self.m_end && self.m_step > 0.0) {
            return Err(AnalysisError::InvalidArgument(format!(
                "sweep needs 0 < from <= to and step > 0, got {}..{} step {}",
                self.m_start, self.m_end, self.m_step
            )));
        }
        let count = ((self.m_end - self.m_start) / self.m_step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| self.m_start + i as f64 * self.m_step)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub m: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest power-node voltage of the last iterate; NaN after a blow-up.
    pub min_voltage: f64,
    pub left_ball: bool,
}

struct Point {
    row: SweepRow,
    v_p: Option<DVector<f64>>,
}

fn scaled(spec: &GridSpec, m: f64, loads_only: bool) -> GridSpec {
    if loads_only {
        scale_consumption(spec, m)
    } else {
        scale_loads(spec, m)
    }
}

fn run_point(spec: &GridSpec, m: f64, loads_only: bool, solver: &SolverConfig) -> Result<Point, AnalysisError> {
    let pg = validate(&scaled(spec, m, loads_only))?;
    let net = Network::new(&pg)?;
    let p = DVector::from_vec(pg.powers());
    let cert = certify(&net.reduced, &p, solver.ball)?;
    Ok(match solve(&net, &p, solver) {
        Ok(res) => Point {
            row: SweepRow {
                m,
                alpha: cert.alpha_global,
                iterations: res.iterations,
                converged: res.converged,
                min_voltage: res.v_p.min(),
                left_ball: res.left_ball,
            },
            v_p: res.converged.then_some(res.v_p),
        },
        Err(SolveError::Diverged { iterations, .. }) => Point {
            row: SweepRow {
                m,
                alpha: cert.alpha_global,
                iterations,
                converged: false,
                min_voltage: f64::NAN,
                // a blow-up or collapse always exits the ball
                left_ball: true,
            },
            v_p: None,
        },
        Err(other) => return Err(other.into()),
    })
}

/// Scale the schedule by each multiplier, certify and solve. Rows come back
/// ordered by `m`; a failed solve is recorded in its row.
pub fn load_sweep(spec: &GridSpec, cfg: &SweepConfig) -> Result<Vec<SweepRow>, AnalysisError> {
    let ms = cfg.multipliers()?;
    validate(spec)?;

    if cfg.warm_start {
        let mut rows = Vec::with_capacity(ms.len());
        let mut solver = cfg.solver.clone();
        for m in ms {
            let point = run_point(spec, m, cfg.loads_only, &solver)?;
            if let Some(v) = point.v_p {
                solver.initial_point = InitialPoint::Explicit(v);
            }
            rows.push(point.row);
        }
        return Ok(rows);
    }

    let work = || {
        ms.par_iter()
            .map(|&m| run_point(spec, m, cfg.loads_only, &cfg.solver).map(|pt| pt.row))
            .collect::<Result<Vec<_>, _>>()
    };
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AnalysisError::InvalidArgument(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn converges(spec: &GridSpec, m: f64, cfg: &SolverConfig) -> Result<bool, AnalysisError> {
    Ok(run_point(spec, m, false, cfg)?.row.converged)
}

/// Largest uniform multiplier at which the solver still converges.
///
/// Starting from `m_hint`, the multiplier is doubled until the solver fails
/// (giving up past `10·m_hint`), then the bracket is bisected to a width
/// below 1e-3. The lower end of the final bracket is returned.
pub fn empirical_critical_load(
    spec: &GridSpec,
    cfg: &SolverConfig,
    m_hint: f64,
) -> Result<f64, AnalysisError> {
    if !(m_hint > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("m_hint must be positive, got {m_hint}")));
    }
    if !converges(spec, 1.0, cfg)? {
        return Err(AnalysisError::NominalNotConverged);
    }
    let limit = 10.0 * m_hint;
    let mut lo = 1.0;
    let mut hi = m_hint.max(1.0);
    loop {
        if !converges(spec, hi, cfg)? {
            break;
        }
        lo = hi;
        if hi >= limit {
            return Err(AnalysisError::NoDivergenceFound(limit));
        }
        hi = (2.0 * hi).min(limit);
    }
    while hi - lo >= 1e-3 {
        let mid = 0.5 * (lo + hi);
        if converges(spec, mid, cfg)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
