//! Experiment orchestration: run one config, write its CSV, summarize.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{render, Command, ConfigError, ExperimentConfig, LKeyword, LSpec, OperatorSpec};
use crate::error::Error;
use crate::flow::{flow_diagnostics, integrate, FlowConfig, FlowStatus};
use crate::lambda::{solve_lambda_traced, LambdaOptions};
use crate::linalg::{SymMatrix, Vector};
use crate::newton::{estimate_hessian_lipschitz, run_prox_newton, NewtonStatus};
use crate::operators::{
    make_isotropic, make_logistic1d, make_quadratic, make_rotation, MonotoneOperator, DEFAULT_INNER_TOL,
};
use crate::pp::{check_certificate, run_pp_with, LambdaPolicy, PpConfig, PpStatus};

/// Largest invariant violation a successful run may report.
pub const ENVELOPE_TOL: f64 = 1e-6;

const L_ESTIMATE_SAMPLES: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] Error),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub status: String,
    pub final_gap: Option<f64>,
    pub max_invariant_violation: f64,
    pub wall_time_s: f64,
    /// Samples (flow), iterations (pp, newton) or φ evaluations (lambda).
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEnvelope {
    pub config: ExperimentConfig,
    pub provenance: String,
    pub csv_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    pub summary: Summary,
}

impl ReportEnvelope {
    pub fn success(&self) -> bool {
        matches!(
            self.summary.status.as_str(),
            "Converged" | "Stabilized" | "ZeroGradient" | "Completed"
        ) && self.summary.max_invariant_violation <= ENVELOPE_TOL
    }

    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("envelope is always serializable")
    }
}

/// `proxflow <version>+cfg.<first 12 hex digits of sha256(rendered config)>`.
pub fn provenance(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(render(cfg).as_bytes());
    let hex = hex::encode(digest);
    format!("{} {}+cfg.{}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"), &hex[..12])
}

pub fn build_operator(kind: &OperatorSpec, dim: usize) -> Result<Box<dyn MonotoneOperator>, Error> {
    Ok(match kind {
        OperatorSpec::Isotropic { alpha } => Box::new(make_isotropic(*alpha, dim)?),
        OperatorSpec::Rotation => Box::new(make_rotation()),
        OperatorSpec::Quadratic { q, b, hessian_lipschitz } => {
            let n = q.len();
            let flat: Vec<f64> = q.iter().flatten().copied().collect();
            let mut op = make_quadratic(SymMatrix::from_row_slice(n, &flat)?, Vector::from_column_slice(b))?;
            if let Some(l) = hessian_lipschitz {
                op = op.with_hessian_lipschitz(*l);
            }
            Box::new(op)
        }
        OperatorSpec::Logistic1d => Box::new(make_logistic1d()),
    })
}

pub fn default_output_path(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(format!("proxflow_{}.csv", cfg.command))
}

/// `<stem>.trace.csv` next to the main CSV.
pub fn trace_path_for(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.trace.csv"))
}

/// 17 significant digits, `.` decimal separator.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(BufWriter::new(file));
        w.write_record(&self.header).map_err(|e| io_err(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| io_err(path, e))?;
        }
        let mut inner = w.into_inner().map_err(|e| io_err(path, e))?;
        inner.flush().map_err(|e| io_err(path, e))
    }
}

struct Outcome {
    status: String,
    final_gap: Option<f64>,
    violation: f64,
    count: usize,
    table: Table,
    trace: Option<Table>,
}

fn rel_tol_for(op: &dyn MonotoneOperator, requested: f64) -> f64 {
    requested.max(LambdaOptions::for_operator(op).rel_tol)
}

fn run_flow(cfg: &ExperimentConfig, op: &dyn MonotoneOperator) -> Result<Outcome, Error> {
    let x0 = Vector::from_column_slice(&cfg.x0);
    let fc = FlowConfig {
        h: cfg.h,
        sample_stride: cfg.sample_stride,
        rel_tol: Some(rel_tol_for(op, cfg.rel_tol)),
        ..FlowConfig::default()
    };
    let traj = integrate(op, &x0, cfg.theta, cfg.t_end, &fc)?;
    let report = flow_diagnostics(&traj, op)?;
    let has_f = op.potential().is_some();
    let mut header: Vec<String> = ["t", "lambda", "speed", "tau"].iter().map(|s| s.to_string()).collect();
    header.extend((0..x0.len()).map(|i| format!("x_{i}")));
    if has_f {
        header.push("f_x".into());
        header.push("f_y".into());
    }
    let mut table = Table::new(header);
    for s in &traj.samples {
        let mut row = vec![fmt_num(s.t), fmt_num(s.lambda), fmt_num(s.speed), fmt_num(s.tau)];
        row.extend(s.x.iter().map(|v| fmt_num(*v)));
        if has_f {
            row.push(fmt_opt(s.fx));
            row.push(fmt_opt(s.fy));
        }
        table.rows.push(row);
    }
    let final_gap = match (traj.samples.last().and_then(|s| s.fx), op.known_min_value()) {
        (Some(f), Some(m)) => Some(f - m),
        _ => None,
    };
    let status = match traj.status {
        FlowStatus::Completed => "Completed",
        FlowStatus::Stabilized => "Stabilized",
    };
    Ok(Outcome {
        status: status.into(),
        final_gap,
        violation: report.max_violation(),
        count: traj.samples.len(),
        table,
        trace: None,
    })
}

fn run_pp_cmd(cfg: &ExperimentConfig, op: &dyn MonotoneOperator) -> Result<Outcome, Error> {
    let x0 = Vector::from_column_slice(&cfg.x0);
    let pc = PpConfig {
        policy: match &cfg.lambda_schedule {
            Some(s) => LambdaPolicy::Schedule(s.clone()),
            None => LambdaPolicy::ClosedLoop,
        },
        rel_tol: Some(rel_tol_for(op, cfg.rel_tol)),
        resolvent_tol: DEFAULT_INNER_TOL,
    };
    let run = run_pp_with(op, &x0, cfg.theta, cfg.sigma, cfg.max_iter, cfg.grad_tol, &pc)?;
    let closed_loop = matches!(pc.policy, LambdaPolicy::ClosedLoop);
    let mut violation = run.max_step_violation();
    let mut table = Table::new([
        "k", "lambda", "step_norm", "v_norm", "eq_residual", "f_x", "rate_bound", "bound_slack",
    ]);
    for it in &run.iterates {
        let c = &it.cert;
        let verdict = check_certificate(c, cfg.sigma, cfg.theta);
        violation = violation
            .max(-verdict.inclusion_slack)
            .max(-verdict.relative_error_slack);
        // A user schedule need not satisfy the large-step condition.
        if closed_loop {
            violation = violation.max(-verdict.large_step_slack / cfg.theta);
            if let (Some(b), Some(s)) = (it.rate_bound, it.bound_slack) {
                violation = violation.max(-s / b);
            }
        }
        table.rows.push(vec![
            it.k.to_string(),
            fmt_num(c.lambda),
            fmt_num(c.step_norm),
            fmt_num(c.v.norm()),
            fmt_num(c.eq_residual),
            fmt_num(it.fx),
            fmt_opt(it.rate_bound),
            fmt_opt(it.bound_slack),
        ]);
    }
    let status = match run.status {
        PpStatus::Converged => "Converged",
        PpStatus::MaxIter => "MaxIter",
        PpStatus::ZeroGradient => "ZeroGradient",
    };
    let final_gap = run
        .iterates
        .last()
        .map_or(run.constants.gap0, |it| it.gap);
    Ok(Outcome {
        status: status.into(),
        final_gap,
        violation: violation.max(0.0),
        count: run.iterates.len(),
        table,
        trace: None,
    })
}

fn run_newton_cmd(cfg: &ExperimentConfig, op: &dyn MonotoneOperator) -> Result<Outcome, Error> {
    let x0 = Vector::from_column_slice(&cfg.x0);
    let l = match cfg.l {
        Some(LSpec::Value(l)) => l,
        Some(LSpec::Named(LKeyword::Estimate)) => {
            let p = op.potential().ok_or(Error::MissingCapability("potential"))?;
            let radius = x0.norm().max(1.0);
            let l = estimate_hessian_lipschitz(p, &x0, radius, L_ESTIMATE_SAMPLES, cfg.seed)?;
            log::info!("estimated hessian lipschitz constant {l:e}");
            l
        }
        None => return Err(Error::InvalidArgument("L required for newton".into())),
    };
    let run = run_prox_newton(op, &x0, cfg.sigma_l, cfg.sigma_u, l, cfg.grad_tol, cfg.max_iter)?;
    let mut table = Table::new([
        "k",
        "lambda",
        "band_value",
        "grad_norm",
        "step_norm",
        "f_x",
        "bisection_count",
        "embed_a_slack",
        "embed_b_slack",
        "embed_c_slack",
    ]);
    let mut prev_f = run.f0;
    let mut f_increase = 0.0f64;
    for it in &run.iterates {
        f_increase = f_increase.max(it.fx - prev_f);
        prev_f = it.fx;
        table.rows.push(vec![
            it.k.to_string(),
            fmt_num(it.lambda),
            fmt_num(it.band_value),
            fmt_num(it.grad_norm),
            fmt_num(it.step.norm()),
            fmt_num(it.fx),
            it.bisection_count.to_string(),
            fmt_num(it.embedding.a_slack),
            fmt_num(it.embedding.b_slack),
            fmt_opt(it.embedding.c_slack),
        ]);
    }
    let theta = run.theta();
    let violation = run
        .band_violation()
        .max(run.embedding_violation() / theta.max(1.0))
        .max(f_increase / (1.0 + run.f0.abs()));
    let status = match run.status {
        NewtonStatus::Converged => "Converged",
        NewtonStatus::MaxIter => "MaxIter",
        NewtonStatus::ZeroGradient => "ZeroGradient",
    };
    let final_gap = run.iterates.last().map_or(run.gap0, |it| it.gap);
    Ok(Outcome {
        status: status.into(),
        final_gap,
        violation: violation.max(0.0),
        count: run.iterates.len(),
        table,
        trace: None,
    })
}

fn run_lambda_cmd(cfg: &ExperimentConfig, op: &dyn MonotoneOperator) -> Result<Outcome, Error> {
    let x0 = Vector::from_column_slice(&cfg.x0);
    let opts = LambdaOptions::for_operator(op).with_rel_tol(rel_tol_for(op, cfg.rel_tol));
    let mut table = Table::new(["theta", "lambda", "gamma", "phi", "evaluations"]);
    let mut trace = Table::new(["step", "lambda_lo", "lambda_hi", "lambda", "phi"]);
    match solve_lambda_traced(op, cfg.theta, &x0, &opts) {
        Ok((ev, steps)) => {
            let violation = ((ev.phi - cfg.theta).abs() / cfg.theta - opts.rel_tol).max(0.0);
            table.rows.push(vec![
                fmt_num(cfg.theta),
                fmt_num(ev.lambda),
                fmt_num(1.0 / ev.lambda),
                fmt_num(ev.phi),
                ev.evaluations.to_string(),
            ]);
            for (i, s) in steps.iter().enumerate() {
                trace.rows.push(vec![
                    i.to_string(),
                    fmt_num(s.lambda_lo),
                    fmt_num(s.lambda_hi),
                    fmt_num(s.lambda),
                    fmt_num(s.phi),
                ]);
            }
            Ok(Outcome {
                status: "Converged".into(),
                final_gap: None,
                violation,
                count: ev.evaluations,
                table,
                trace: Some(trace),
            })
        }
        Err(Error::ZeroResidual { .. }) => {
            // x0 is a zero of the operator: Λ = ∞, Γ = 0.
            table.rows.push(vec![
                fmt_num(cfg.theta),
                fmt_num(f64::INFINITY),
                fmt_num(0.0),
                fmt_num(0.0),
                "1".into(),
            ]);
            Ok(Outcome {
                status: "ZeroGradient".into(),
                final_gap: None,
                violation: 0.0,
                count: 1,
                table,
                trace: Some(trace),
            })
        }
        Err(e) => Err(e),
    }
}

/// Runs one experiment and writes its CSV (plus the λ trace for `lambda`).
/// `out` overrides the config's output path.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ReportEnvelope, HarnessError> {
    crate::config::validate(cfg)?;
    let csv_path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_path.clone())
        .unwrap_or_else(|| default_output_path(cfg));
    let op = build_operator(&cfg.operator, cfg.x0.len())?;
    log::info!("running {} on {} (dim {})", cfg.command, op.name(), op.dim());
    let start = Instant::now();
    let outcome = match cfg.command {
        Command::Flow => run_flow(cfg, op.as_ref()),
        Command::Pp => run_pp_cmd(cfg, op.as_ref()),
        Command::Newton => run_newton_cmd(cfg, op.as_ref()),
        Command::Lambda => run_lambda_cmd(cfg, op.as_ref()),
    }?;
    let wall = start.elapsed().as_secs_f64();
    outcome.table.write(&csv_path)?;
    let trace_path = match &outcome.trace {
        Some(t) => {
            let p = trace_path_for(&csv_path);
            t.write(&p)?;
            Some(p)
        }
        None => None,
    };
    log::info!(
        "{}: status {} after {} ({:.3}s), max violation {:e}",
        cfg.command,
        outcome.status,
        outcome.count,
        wall,
        outcome.violation
    );
    Ok(ReportEnvelope {
        config: cfg.clone(),
        provenance: provenance(cfg),
        csv_path,
        trace_path,
        summary: Summary {
            status: outcome.status,
            final_gap: outcome.final_gap,
            max_invariant_violation: outcome.violation,
            wall_time_s: wall,
            count: outcome.count,
        },
    })
}

/// Runs independent configs on scoped worker threads; each job owns its output file.
pub fn run_batch(jobs: &[(ExperimentConfig, PathBuf)]) -> Vec<Result<ReportEnvelope, HarnessError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(cfg, out)| s.spawn(move || run_experiment(cfg, Some(out))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment worker panicked"))
            .collect()
    })
}

/// Logging level from `PROXFLOW_LOG` (`quiet`, `info`, `trace`); warnings otherwise.
pub fn init_logging() {
    let level = match std::env::var("PROXFLOW_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("trace") => log::LevelFilter::Trace,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}
