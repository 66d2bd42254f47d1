//! The scalar map `φ(λ, x) = λ‖x − J_λ x‖` and the closed-loop equation
//! `φ(λ, x) = θ`.
//!
//! `φ(·, x)` is increasing and satisfies, for `0 < λ1 ≤ λ2`,
//! `(λ2/λ1)φ(λ1) ≤ φ(λ2) ≤ (λ2/λ1)²φ(λ1)`. A single probe therefore brackets
//! the root multiplicatively, and `ln φ` is close to affine in `ln λ`, which is
//! what the root finder below exploits.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operators::{resolvent, MonotoneOperator, ResolventKind, DEFAULT_INNER_TOL};

const MAX_STEPS: usize = 200;

/// Threshold below which `φ(1, x)` marks `x` as a numerical zero of the operator.
pub fn zero_tol(x: &Vector) -> f64 {
    1e-13 * (1.0 + x.norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiEvaluation {
    pub lambda: f64,
    pub phi: f64,
    pub y: Vector,
    pub v: Vector,
    pub inner_residual: f64,
    /// Resolvent calls spent producing this value.
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaBracket {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
}

/// One bracket update of the root finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketStep {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub lambda: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaOptions {
    pub rel_tol: f64,
    pub resolvent_tol: f64,
    /// First probe; `1` when absent.
    pub warm_start: Option<f64>,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions {
            rel_tol: 1e-10,
            resolvent_tol: DEFAULT_INNER_TOL,
            warm_start: None,
        }
    }
}

impl LambdaOptions {
    /// Defaults matched to the cost of the operator's resolvent.
    pub fn for_operator(op: &dyn MonotoneOperator) -> Self {
        match op.resolvent_kind() {
            ResolventKind::ClosedForm => Self::default(),
            ResolventKind::InnerNewton => LambdaOptions {
                rel_tol: 1e-6,
                ..Self::default()
            },
        }
    }

    pub fn with_warm_start(mut self, lambda: f64) -> Self {
        self.warm_start = Some(lambda);
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// `φ(λ, x)` with the default resolvent tolerance.
pub fn phi(op: &dyn MonotoneOperator, lambda: f64, x: &Vector) -> Result<PhiEvaluation> {
    phi_with_tol(op, lambda, x, DEFAULT_INNER_TOL)
}

pub fn phi_with_tol(
    op: &dyn MonotoneOperator,
    lambda: f64,
    x: &Vector,
    tol: f64,
) -> Result<PhiEvaluation> {
    if lambda == 0.0 {
        return Ok(PhiEvaluation {
            lambda,
            phi: 0.0,
            y: x.clone(),
            v: Vector::zeros(x.len()),
            inner_residual: 0.0,
            evaluations: 0,
        });
    }
    let r = resolvent(op, lambda, x, tol)?;
    Ok(PhiEvaluation {
        lambda,
        phi: lambda * r.displacement.norm(),
        y: r.y,
        v: r.v,
        inner_residual: r.inner_residual,
        evaluations: 1,
    })
}

/// `Γ_θ(x) = 1/Λ_θ(x)`, or 0 when `x` is a numerical zero of the operator.
pub fn gamma(op: &dyn MonotoneOperator, theta: f64, x: &Vector) -> Result<f64> {
    gamma_with(op, theta, x, &LambdaOptions::for_operator(op))
}

pub fn gamma_with(
    op: &dyn MonotoneOperator,
    theta: f64,
    x: &Vector,
    opts: &LambdaOptions,
) -> Result<f64> {
    match solve_lambda(op, theta, x, opts) {
        Ok(ev) => Ok(1.0 / ev.lambda),
        Err(Error::ZeroResidual { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Solves `φ(λ, x) = θ` to `|φ − θ| ≤ rel_tol·θ`.
pub fn solve_lambda(
    op: &dyn MonotoneOperator,
    theta: f64,
    x: &Vector,
    opts: &LambdaOptions,
) -> Result<PhiEvaluation> {
    solve_impl(op, theta, x, opts, None)
}

/// Same as [`solve_lambda`], also returning every bracket update.
pub fn solve_lambda_traced(
    op: &dyn MonotoneOperator,
    theta: f64,
    x: &Vector,
    opts: &LambdaOptions,
) -> Result<(PhiEvaluation, Vec<BracketStep>)> {
    let mut trace = Vec::new();
    let ev = solve_impl(op, theta, x, opts, Some(&mut trace))?;
    Ok((ev, trace))
}

fn solve_impl(
    op: &dyn MonotoneOperator,
    theta: f64,
    x: &Vector,
    opts: &LambdaOptions,
    mut trace: Option<&mut Vec<BracketStep>>,
) -> Result<PhiEvaluation> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidArgument("rel_tol must be positive".into()));
    }
    let tol = opts.resolvent_tol;
    let zt = zero_tol(x);
    let mut evals = 0usize;
    let eval = |lambda: f64, evals: &mut usize| -> Result<PhiEvaluation> {
        *evals += 1;
        phi_with_tol(op, lambda, x, tol)
    };

    let mut lambda0 = match opts.warm_start {
        Some(l) if l > 0.0 && l.is_finite() => l,
        _ => 1.0,
    };
    let mut p0 = eval(lambda0, &mut evals)?;
    // φ(1) ≥ φ(λ0)/max(λ0, λ0²), so only a small probe value can hide a zero.
    if p0.phi <= zt * lambda0.max(lambda0 * lambda0) {
        let p1 = if lambda0 == 1.0 { p0.clone() } else { eval(1.0, &mut evals)? };
        if p1.phi <= zt {
            return Err(Error::ZeroResidual { phi_at_one: p1.phi });
        }
        if p0.phi == 0.0 {
            lambda0 = 1.0;
            p0 = p1;
        }
    }

    let done = |mut ev: PhiEvaluation, evals: usize| {
        ev.evaluations = evals;
        ev
    };
    if (p0.phi - theta).abs() <= opts.rel_tol * theta {
        return Ok(done(p0, evals));
    }

    // Certified bracket from the sandwich inequality.
    let r = theta / p0.phi;
    let (cert_lo, cert_hi) = if r > 1.0 {
        (lambda0 * r.sqrt(), lambda0 * r)
    } else {
        (lambda0 * r, lambda0 * r.sqrt())
    };
    let ln_theta = theta.ln();
    let g = |phi: f64| phi.ln() - ln_theta;

    // Bracket in s = ln λ with g(a) < 0 < g(b). The probe is one end.
    let (mut a, mut ga, mut b, mut gb);
    let mut best;
    if r > 1.0 {
        a = lambda0.ln();
        ga = g(p0.phi);
        let mut hi = cert_hi;
        loop {
            let p = eval(hi, &mut evals)?;
            if (p.phi - theta).abs() <= opts.rel_tol * theta {
                return Ok(done(p, evals));
            }
            if p.phi > theta {
                b = hi.ln();
                gb = g(p.phi);
                best = p;
                break;
            }
            if evals > MAX_STEPS {
                return Err(Error::NoConvergence {
                    iterations: evals,
                    context: "bracketing Lambda",
                });
            }
            a = hi.ln();
            ga = g(p.phi);
            hi *= 2.0;
        }
    } else {
        b = lambda0.ln();
        gb = g(p0.phi);
        let mut lo = cert_lo;
        loop {
            let p = eval(lo, &mut evals)?;
            if (p.phi - theta).abs() <= opts.rel_tol * theta {
                return Ok(done(p, evals));
            }
            if p.phi < theta && p.phi > 0.0 {
                a = lo.ln();
                ga = g(p.phi);
                best = p;
                break;
            }
            if evals > MAX_STEPS {
                return Err(Error::NoConvergence {
                    iterations: evals,
                    context: "bracketing Lambda",
                });
            }
            if p.phi >= theta {
                b = lo.ln();
                gb = g(p.phi);
            }
            lo *= 0.5;
        }
    }

    // Illinois false position on (ln λ, ln φ − ln θ), bisection as fallback.
    let mut side = 0i8;
    for _ in 0..MAX_STEPS {
        if let Some(t) = trace.as_deref_mut() {
            t.push(BracketStep {
                lambda_lo: a.exp(),
                lambda_hi: b.exp(),
                lambda: best.lambda,
                phi: best.phi,
            });
        }
        let width = b - a;
        let mut s = b - gb * width / (gb - ga);
        if !s.is_finite() || s <= a + 1e-3 * width || s >= b - 1e-3 * width {
            s = 0.5 * (a + b);
        }
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
        let p = eval(s.exp(), &mut evals)?;
        if (p.phi - theta).abs() <= opts.rel_tol * theta {
            return Ok(done(p, evals));
        }
        let gs = g(p.phi);
        if gs < 0.0 {
            a = s;
            ga = gs;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = s;
            gb = gs;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        best = p;
    }
    Err(Error::NoConvergence {
        iterations: evals,
        context: "solving phi(lambda, x) = theta",
    })
}

/// λ-interval on which `target_lo ≤ φ(λ, x) ≤ target_hi`.
///
/// Endpoints are placed just outside the band (by about `rel_tol`), so the
/// returned interval always contains the exact one.
pub fn bracket_for_band(
    op: &dyn MonotoneOperator,
    x: &Vector,
    target_lo: f64,
    target_hi: f64,
    opts: &LambdaOptions,
) -> Result<LambdaBracket> {
    if !(target_lo > 0.0) || !(target_hi >= target_lo) || !target_hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "band must satisfy 0 < lo <= hi, got [{target_lo}, {target_hi}]"
        )));
    }
    let rel = opts.rel_tol.min(1e-9);
    let o = LambdaOptions { rel_tol: rel, ..*opts };
    let lo = solve_lambda(op, target_lo * (1.0 - 2.0 * rel), x, &o)?;
    let warm = lo.lambda * (target_hi / target_lo).sqrt();
    let hi = solve_lambda(op, target_hi * (1.0 + 2.0 * rel), x, &o.with_warm_start(warm))?;
    Ok(LambdaBracket {
        lambda_lo: lo.lambda,
        lambda_hi: hi.lambda,
        phi_lo: lo.phi,
        phi_hi: hi.phi,
    })
}
