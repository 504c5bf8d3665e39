//! Command-line front end: `solve`, `certify`, `sweep` and `verify`.
//!
//! Exit codes: 0 success, 1 verification check failed, 2 invalid input
//! (I/O, parse, validation or bad flags), 3 the solver did not converge.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use crate::certificate::{certify, critical_multiplier, Certificate, VoltageBall};
use crate::grid::{parse_grid, validate, GridSpec, PartitionedGrid};
use crate::network::{dump_matrices, Network};
use crate::oracle::multistart_probe;
use crate::output::{sci, Sci};
use crate::solver::{power_balance, solve, InitialPoint, Method, SolverConfig};
use crate::sweep::{load_sweep, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lvdc-flow", version, about = "Certified fixed-point power flow for LVDC grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the power flow and print every node voltage as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        /// Write per-iteration CSV (k, step_norm, voltages) to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate the contraction certificate without solving.
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ball: BallFlags,
    },
    /// Scale the power schedule over a range of multipliers; CSV output.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, default_value_t = 0.1)]
        from: f64,
        #[arg(long, default_value_t = 20.0)]
        to: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        /// Worker threads for independent sweep points.
        #[arg(long)]
        jobs: Option<usize>,
        /// Scale consumption only; generation keeps its nominal value.
        #[arg(long)]
        scale_loads_only: bool,
        /// Start each point from the previous solution.
        #[arg(long)]
        warm_start: bool,
    },
    /// Cross-check against Newton-Raphson and a seeded multistart probe.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random initial points.
        #[arg(long, default_value_t = 100)]
        starts: usize,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Grid file.
    grid: PathBuf,
    /// Write the main output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write B_PP, J_P and r_diag as labeled plain text.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BallFlags {
    #[arg(long, default_value_t = 0.55)]
    v_min: f64,
    #[arg(long, default_value_t = 1.5)]
    v_max: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Jacobi,
    GaussSeidel,
}

#[derive(Debug, Args)]
struct SolverFlags {
    #[command(flatten)]
    ball: BallFlags,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Jacobi)]
    method: MethodArg,
    /// Flat initial voltage for every power node.
    #[arg(long, default_value_t = 1.0)]
    flat_start: f64,
}

/// Error carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: e.to_string(),
    }
}

impl BallFlags {
    fn ball(&self) -> Result<VoltageBall, Failure> {
        VoltageBall::new(self.v_min, self.v_max).map_err(invalid)
    }
}

impl SolverFlags {
    fn config(&self) -> Result<SolverConfig, Failure> {
        let cfg = SolverConfig {
            tolerance: self.tol,
            max_iterations: self.max_iter,
            method: match self.method {
                MethodArg::Jacobi => Method::Jacobi,
                MethodArg::GaussSeidel => Method::GaussSeidel,
            },
            initial_point: InitialPoint::Flat(self.flat_start),
            ball: self.ball.ball()?,
            record_trace: false,
        };
        cfg.check().map_err(invalid)?;
        if !(self.flat_start > 0.0) {
            return Err(invalid("--flat-start must be positive"));
        }
        Ok(cfg)
    }
}

struct Loaded {
    spec: GridSpec,
    pg: PartitionedGrid,
    net: Network,
    p: DVector<f64>,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(&common.grid)
        .map_err(|e| invalid(format!("{}: {e}", common.grid.display())))?;
    let spec = parse_grid(&text).map_err(|e| invalid(format!("{}: {e}", common.grid.display())))?;
    let pg = validate(&spec).map_err(invalid)?;
    let net = Network::new(&pg).map_err(invalid)?;
    let p = DVector::from_vec(pg.powers());
    if let Some(path) = &common.dump_matrices {
        write_file(path, &dump_matrices(&net.reduced))?;
    }
    Ok(Loaded { spec, pg, net, p })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CertificateJson {
    alpha_global: Sci,
    alpha_nodal: Sci,
    worst_node: u32,
    contractive: bool,
    v_min: Sci,
    v_max: Sci,
    critical_multiplier: Option<Sci>,
}

impl CertificateJson {
    fn new(cert: &Certificate, m_star: Option<f64>) -> Self {
        CertificateJson {
            alpha_global: Sci(cert.alpha_global),
            alpha_nodal: Sci(cert.alpha_nodal),
            worst_node: cert.worst_node.0,
            contractive: cert.contractive,
            v_min: Sci(cert.ball.v_min),
            v_max: Sci(cert.ball.v_max),
            critical_multiplier: m_star.map(Sci),
        }
    }
}

#[derive(Serialize)]
struct SolveJson {
    converged: bool,
    iterations: usize,
    left_ball: bool,
    residual_norm: Sci,
    losses: Sci,
    slack_power: Sci,
    power_imbalance: Sci,
    voltages: BTreeMap<u32, Sci>,
    certificate: CertificateJson,
}

#[derive(Serialize)]
struct VerifyJson {
    newton_v_p: Vec<Sci>,
    newton_iterations: usize,
    agreement_norm: Sci,
    multistart_spread: Sci,
    starts: usize,
    converged_starts: usize,
    passed: bool,
}

fn certificate_json(loaded: &Loaded, ball: VoltageBall) -> Result<CertificateJson, Failure> {
    let cert = certify(&loaded.net.reduced, &loaded.p, ball).map_err(invalid)?;
    let m_star = critical_multiplier(&loaded.net.reduced, &loaded.p, ball).ok();
    Ok(CertificateJson::new(&cert, m_star))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn trace_csv(loaded: &Loaded, steps: &[f64], iterates: &[DVector<f64>]) -> String {
    let mut out = String::from("k,step_norm");
    for id in &loaded.pg.p_nodes {
        let _ = write!(out, ",v_{id}");
    }
    out.push('\n');
    for (k, (step, v)) in steps.iter().zip(iterates).enumerate() {
        let _ = write!(out, "{},{}", k + 1, sci(*step, 10));
        for x in v.iter() {
            let _ = write!(out, ",{}", sci(*x, 10));
        }
        out.push('\n');
    }
    out
}

/// Run the command and return (exit code, main output).
fn execute(cli: Cli) -> Result<(i32, String), Failure> {
    match cli.command {
        Command::Certify { common, ball } => {
            let loaded = load(&common)?;
            let json = certificate_json(&loaded, ball.ball()?)?;
            Ok((EXIT_OK, to_json(&json)))
        }
        Command::Solve { common, solver, trace } => {
            let loaded = load(&common)?;
            let mut cfg = solver.config()?;
            cfg.record_trace = trace.is_some();
            let certificate = certificate_json(&loaded, cfg.ball)?;
            let res = solve(&loaded.net, &loaded.p, &cfg).map_err(|e| Failure {
                code: match e {
                    crate::error::SolveError::Diverged { .. } => EXIT_NOT_CONVERGED,
                    _ => EXIT_INVALID,
                },
                message: e.to_string(),
            })?;
            if let (Some(path), Some(iterates)) = (&trace, &res.trace) {
                write_file(path, &trace_csv(&loaded, &res.step_norms, iterates))?;
            }
            let json = SolveJson {
                converged: res.converged,
                iterations: res.iterations,
                left_ball: res.left_ball,
                residual_norm: Sci(res.residual_norm),
                losses: Sci(res.losses),
                slack_power: Sci(res.slack_power),
                power_imbalance: Sci(power_balance(&res, &loaded.net, &loaded.p)),
                voltages: res.voltages.iter().map(|(id, v)| (id.0, Sci(*v))).collect(),
                certificate,
            };
            let code = if res.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
            Ok((code, to_json(&json)))
        }
        Command::Sweep {
            common,
            solver,
            from,
            to,
            step,
            jobs,
            scale_loads_only,
            warm_start,
        } => {
            let loaded = load(&common)?;
            let cfg = SweepConfig {
                m_start: from,
                m_end: to,
                m_step: step,
                solver: solver.config()?,
                loads_only: scale_loads_only,
                warm_start,
                jobs,
            };
            let rows = load_sweep(&loaded.spec, &cfg).map_err(invalid)?;
            let mut out = String::from("m,alpha,iterations,converged,min_voltage,left_ball\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    sci(r.m, 10),
                    sci(r.alpha, 10),
                    r.iterations,
                    r.converged,
                    sci(r.min_voltage, 10),
                    r.left_ball
                );
            }
            Ok((EXIT_OK, out))
        }
        Command::Verify {
            common,
            solver,
            seed,
            starts,
        } => {
            let loaded = load(&common)?;
            let cfg = solver.config()?;
            let report = multistart_probe(&loaded.net.reduced, &loaded.p, &cfg, starts, seed).map_err(|e| {
                Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: e.to_string(),
                }
            })?;
            let passed = report.agreement_norm < 1e-8 && report.multistart_spread < 1e-6;
            let json = VerifyJson {
                newton_v_p: report.newton_v_p.iter().copied().map(Sci).collect(),
                newton_iterations: report.newton_iterations,
                agreement_norm: Sci(report.agreement_norm),
                multistart_spread: Sci(report.multistart_spread),
                starts: report.starts,
                converged_starts: report.converged_starts,
                passed,
            };
            let code = if passed { EXIT_OK } else { EXIT_CHECK_FAILED };
            Ok((code, to_json(&json)))
        }
    }
}

fn out_path(cli: &Cli) -> Option<&Path> {
    let common = match &cli.command {
        Command::Solve { common, .. }
        | Command::Certify { common, .. }
        | Command::Sweep { common, .. }
        | Command::Verify { common, .. } => common,
    };
    common.out.as_deref()
}

/// Parse `args` (including the program name) and run. Output goes to
/// `stdout` unless `--out` is given; diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
            } else {
                let _ = write!(stdout, "{}", e.render());
            }
            return code;
        }
    };
    let out = out_path(&cli).map(Path::to_path_buf);
    match execute(cli) {
        Ok((code, text)) => {
            let written = match &out {
                Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
                None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(msg) = written {
                let _ = writeln!(stderr, "error: {msg}");
                return EXIT_INVALID;
            }
            code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
