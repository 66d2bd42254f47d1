//! Experiment configuration: a flat TOML document.
//!
//! ```toml
//! command = "flow"          # flow | pp | newton | lambda
//! op = "isotropic"          # isotropic | rotation | quadratic | logistic1d
//! alpha = 1.0
//! x0 = [1.0, 0.0]
//! theta = 1.0
//! t_end = 10.0
//! ```
//!
//! Quadratic operators take `q` (rows) and `b`; `L` is a number or `"estimate"`.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Flow,
    Pp,
    Newton,
    Lambda,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Pp => "pp",
            Command::Newton => "newton",
            Command::Lambda => "lambda",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Isotropic,
    Rotation,
    Quadratic,
    Logistic1d,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OperatorSpec {
    Isotropic { alpha: f64 },
    Rotation,
    Quadratic { q: Vec<Vec<f64>>, b: Vec<f64>, hessian_lipschitz: Option<f64> },
    Logistic1d,
}

impl OperatorSpec {
    pub fn kind(&self) -> OpKind {
        match self {
            OperatorSpec::Isotropic { .. } => OpKind::Isotropic,
            OperatorSpec::Rotation => OpKind::Rotation,
            OperatorSpec::Quadratic { .. } => OpKind::Quadratic,
            OperatorSpec::Logistic1d => OpKind::Logistic1d,
        }
    }
}

/// Hessian-Lipschitz constant for the Newton command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LSpec {
    Value(f64),
    Named(LKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LKeyword {
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub operator: OperatorSpec,
    pub x0: Vec<f64>,
    pub theta: f64,
    pub sigma: f64,
    pub sigma_l: f64,
    pub sigma_u: f64,
    #[serde(rename = "L")]
    pub l: Option<LSpec>,
    pub t_end: f64,
    pub h: f64,
    pub sample_stride: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub lambda_schedule: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<Command>,
    op: Option<OpKind>,
    alpha: Option<f64>,
    q: Option<Vec<Vec<f64>>>,
    b: Option<Vec<f64>>,
    hessian_lipschitz: Option<f64>,
    x0: Option<Vec<f64>>,
    theta: Option<f64>,
    sigma: Option<f64>,
    sigma_l: Option<f64>,
    sigma_u: Option<f64>,
    #[serde(rename = "L")]
    l: Option<LSpec>,
    t_end: Option<f64>,
    h: Option<f64>,
    sample_stride: Option<usize>,
    max_iter: Option<usize>,
    grad_tol: Option<f64>,
    rel_tol: Option<f64>,
    output_path: Option<PathBuf>,
    seed: Option<u64>,
    lambda_schedule: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}{}: {message}", key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        line: usize,
        key: Option<String>,
        message: String,
    },
    #[error("validation failed: {invariant}{}", if detail.is_empty() { String::new() } else { format!(" ({detail})") })]
    Validation { invariant: String, detail: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

fn invalid(invariant: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        invariant: invariant.to_string(),
        detail: detail.into(),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Parses a document; `command` overrides or fills the document's own command.
pub fn parse_config_for(text: &str, command: Option<Command>) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, key) = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                let line_text = text.lines().nth(line - 1).unwrap_or("");
                let key = line_text
                    .split_once('=')
                    .map(|(k, _)| k.trim().trim_matches('"').to_string())
                    .filter(|k| !k.is_empty());
                (line, key)
            }
            None => (0, None),
        };
        ConfigError::Parse {
            line,
            key,
            message: e.message().to_string(),
        }
    })?;
    let command = match (raw.command, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(invalid(
                "command matches the document",
                format!("document says `{a}`, invoked as `{b}`"),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(invalid("command required", "")),
    };
    let kind = raw.op.ok_or_else(|| invalid("op required", ""))?;
    if kind != OpKind::Quadratic && (raw.q.is_some() || raw.b.is_some() || raw.hessian_lipschitz.is_some()) {
        return Err(invalid("q, b, hessian_lipschitz only apply to op = quadratic", ""));
    }
    if kind != OpKind::Isotropic && raw.alpha.is_some() {
        return Err(invalid("alpha only applies to op = isotropic", ""));
    }
    let operator = match kind {
        OpKind::Isotropic => OperatorSpec::Isotropic {
            alpha: raw.alpha.unwrap_or(1.0),
        },
        OpKind::Rotation => OperatorSpec::Rotation,
        OpKind::Quadratic => OperatorSpec::Quadratic {
            q: raw.q.ok_or_else(|| invalid("q required for quadratic", ""))?,
            b: raw.b.ok_or_else(|| invalid("b required for quadratic", ""))?,
            hessian_lipschitz: raw.hessian_lipschitz,
        },
        OpKind::Logistic1d => OperatorSpec::Logistic1d,
    };
    let cfg = ExperimentConfig {
        command,
        operator,
        x0: raw.x0.ok_or_else(|| invalid("x0 required", ""))?,
        theta: raw.theta.unwrap_or(1.0),
        sigma: raw.sigma.unwrap_or(0.1),
        sigma_l: raw.sigma_l.unwrap_or(0.1),
        sigma_u: raw.sigma_u.unwrap_or(0.9),
        l: raw.l,
        t_end: raw.t_end.unwrap_or(10.0),
        h: raw.h.unwrap_or(0.01),
        sample_stride: raw.sample_stride.unwrap_or(1),
        max_iter: raw.max_iter.unwrap_or(1000),
        grad_tol: raw.grad_tol.unwrap_or(1e-10),
        rel_tol: raw.rel_tol.unwrap_or(1e-10),
        output_path: raw.output_path,
        seed: raw.seed.unwrap_or(0),
        lambda_schedule: raw.lambda_schedule,
    };
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let finite_pos = |v: f64| v > 0.0 && v.is_finite();
    if cfg.x0.is_empty() {
        return Err(invalid("x0 non-empty", ""));
    }
    if cfg.x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x0 finite", ""));
    }
    let dim = match &cfg.operator {
        OperatorSpec::Isotropic { alpha } => {
            if !finite_pos(*alpha) {
                return Err(invalid("alpha > 0", format!("got {alpha}")));
            }
            cfg.x0.len()
        }
        OperatorSpec::Rotation => 2,
        OperatorSpec::Logistic1d => 1,
        OperatorSpec::Quadratic { q, b, hessian_lipschitz } => {
            let n = q.len();
            if n == 0 || q.iter().any(|row| row.len() != n) {
                return Err(invalid("q square", ""));
            }
            if b.len() != n {
                return Err(invalid("len(b) = dim(q)", format!("{} vs {n}", b.len())));
            }
            if let Some(l) = hessian_lipschitz {
                if !(*l >= 0.0) {
                    return Err(invalid("hessian_lipschitz >= 0", format!("got {l}")));
                }
            }
            n
        }
    };
    if cfg.x0.len() != dim {
        return Err(invalid("len(x0) = operator dimension", format!("{} vs {dim}", cfg.x0.len())));
    }
    for (name, v) in [
        ("theta > 0", cfg.theta),
        ("t_end > 0", cfg.t_end),
        ("h > 0", cfg.h),
        ("grad_tol > 0", cfg.grad_tol),
        ("rel_tol > 0", cfg.rel_tol),
    ] {
        if !finite_pos(v) {
            return Err(invalid(name, format!("got {v}")));
        }
    }
    if !(0.0..1.0).contains(&cfg.sigma) {
        return Err(invalid("0 <= sigma < 1", format!("got {}", cfg.sigma)));
    }
    if !(cfg.sigma_u < 1.0) {
        return Err(invalid("sigma_u < 1", format!("got {}", cfg.sigma_u)));
    }
    if !(cfg.sigma_l > 0.0) {
        return Err(invalid("sigma_l > 0", format!("got {}", cfg.sigma_l)));
    }
    if !(cfg.sigma_l < cfg.sigma_u) {
        return Err(invalid("sigma_l < sigma_u", format!("{} vs {}", cfg.sigma_l, cfg.sigma_u)));
    }
    if cfg.sample_stride == 0 {
        return Err(invalid("sample_stride >= 1", ""));
    }
    if cfg.max_iter == 0 {
        return Err(invalid("max_iter >= 1", ""));
    }
    match (cfg.command, cfg.l) {
        (Command::Newton, None) => return Err(invalid("L required for newton", "")),
        (_, Some(LSpec::Value(l))) if !finite_pos(l) => return Err(invalid("L > 0", format!("got {l}"))),
        _ => {}
    }
    if let Some(s) = &cfg.lambda_schedule {
        if s.is_empty() || s.iter().any(|l| !finite_pos(*l)) {
            return Err(invalid("lambda_schedule entries > 0", ""));
        }
    }
    let needs_potential = matches!(cfg.command, Command::Pp | Command::Newton);
    if needs_potential && cfg.operator.kind() == OpKind::Rotation {
        return Err(invalid("operator has a potential", "rotation is not a gradient"));
    }
    Ok(())
}

/// Renders a config back to a document that parses to the same value.
pub fn render(cfg: &ExperimentConfig) -> String {
    let (op, alpha, q, b, hl) = match &cfg.operator {
        OperatorSpec::Isotropic { alpha } => (OpKind::Isotropic, Some(*alpha), None, None, None),
        OperatorSpec::Rotation => (OpKind::Rotation, None, None, None, None),
        OperatorSpec::Quadratic { q, b, hessian_lipschitz } => {
            (OpKind::Quadratic, None, Some(q.clone()), Some(b.clone()), *hessian_lipschitz)
        }
        OperatorSpec::Logistic1d => (OpKind::Logistic1d, None, None, None, None),
    };
    let raw = RawConfig {
        command: Some(cfg.command),
        op: Some(op),
        alpha,
        q,
        b,
        hessian_lipschitz: hl,
        x0: Some(cfg.x0.clone()),
        theta: Some(cfg.theta),
        sigma: Some(cfg.sigma),
        sigma_l: Some(cfg.sigma_l),
        sigma_u: Some(cfg.sigma_u),
        l: cfg.l,
        t_end: Some(cfg.t_end),
        h: Some(cfg.h),
        sample_stride: Some(cfg.sample_stride),
        max_iter: Some(cfg.max_iter),
        grad_tol: Some(cfg.grad_tol),
        rel_tol: Some(cfg.rel_tol),
        output_path: cfg.output_path.clone(),
        seed: Some(cfg.seed),
        lambda_schedule: cfg.lambda_schedule.clone(),
    };
    toml::to_string(&raw).expect("config values are always representable")
}
