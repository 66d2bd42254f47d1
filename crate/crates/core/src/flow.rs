//! The closed-loop flow `ẋ = J_{Λ_θ(x)} x − x` and trajectory diagnostics.

use crate::error::{Error, Result};
use crate::lambda::{solve_lambda, LambdaOptions, PhiEvaluation};
use crate::linalg::{ensure_dim, ensure_finite, Vector};
use crate::operators::{MonotoneOperator, DEFAULT_INNER_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub h: f64,
    /// Keep every `sample_stride`-th step (the final state is always kept).
    pub sample_stride: usize,
    pub speed_floor: f64,
    /// Tolerance of the λ equation; operator default when `None`.
    pub rel_tol: Option<f64>,
    pub resolvent_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            h: 0.01,
            sample_stride: 1,
            speed_floor: 1e-12,
            rel_tol: None,
            resolvent_tol: DEFAULT_INNER_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub x: Vector,
    pub lambda: f64,
    pub y: Vector,
    /// `‖y − x‖`
    pub speed: f64,
    /// `t + ln(λ(t)/λ(0))`
    pub tau: f64,
    pub fx: Option<f64>,
    pub fy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Completed,
    /// Stopped early: the speed fell below the floor or the state reached a zero.
    Stabilized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<FlowState>,
    pub theta: f64,
    pub status: FlowStatus,
    /// Max of `|λ‖y − x‖ − θ|/θ` over every accepted state and RK stage.
    pub max_constraint_residual: f64,
    pub steps: usize,
}

struct FieldEval {
    ev: PhiEvaluation,
    field: Vector,
}

fn field(
    op: &dyn MonotoneOperator,
    theta: f64,
    x: &Vector,
    warm: f64,
    opts: &LambdaOptions,
    max_res: &mut f64,
) -> Result<Option<FieldEval>> {
    match solve_lambda(op, theta, x, &opts.with_warm_start(warm)) {
        Ok(ev) => {
            *max_res = max_res.max((ev.phi - theta).abs() / theta);
            let field = &ev.y - x;
            Ok(Some(FieldEval { ev, field }))
        }
        Err(Error::ZeroResidual { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn make_state(op: &dyn MonotoneOperator, t: f64, x: &Vector, ev: &PhiEvaluation, lambda0: f64) -> FlowState {
    let pot = op.potential();
    FlowState {
        t,
        x: x.clone(),
        lambda: ev.lambda,
        y: ev.y.clone(),
        speed: (&ev.y - x).norm(),
        tau: t + (ev.lambda / lambda0).ln(),
        fx: pot.map(|p| p.value(x)),
        fy: pot.map(|p| p.value(&ev.y)),
    }
}

/// Integrates the flow from `x0` on `[0, t_end]` with classical RK4.
pub fn integrate(
    op: &dyn MonotoneOperator,
    x0: &Vector,
    theta: f64,
    t_end: f64,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    ensure_dim(x0, op.dim())?;
    ensure_finite(x0, "x0")?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if !(cfg.h > 0.0) || !cfg.h.is_finite() {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {}", cfg.h)));
    }
    let stride = cfg.sample_stride.max(1);
    let mut opts = LambdaOptions::for_operator(op);
    if let Some(r) = cfg.rel_tol {
        opts.rel_tol = r;
    }
    opts.resolvent_tol = cfg.resolvent_tol;

    let mut max_res = 0.0f64;
    let first = solve_lambda(op, theta, x0, &opts)?;
    max_res = max_res.max((first.phi - theta).abs() / theta);
    let lambda0 = first.lambda;
    let mut samples = vec![make_state(op, 0.0, x0, &first, lambda0)];
    let mut x = x0.clone();
    let mut cur = FieldEval {
        field: &first.y - x0,
        ev: first,
    };
    let mut status = FlowStatus::Completed;

    let n_steps = ((t_end / cfg.h) - 1e-9).ceil().max(1.0) as usize;
    let mut steps = 0;
    for i in 1..=n_steps {
        let t_prev = (i - 1) as f64 * cfg.h;
        let t = if i == n_steps { t_end } else { i as f64 * cfg.h };
        let dt = t - t_prev;
        let warm = cur.ev.lambda;
        let zero = || Vector::zeros(x.len());

        let k1 = cur.field.clone();
        let x2 = &x + &k1 * (0.5 * dt);
        let s2 = field(op, theta, &x2, warm, &opts, &mut max_res)?;
        let k2 = s2.as_ref().map_or_else(zero, |s| s.field.clone());
        let w2 = s2.map_or(warm, |s| s.ev.lambda);
        let x3 = &x + &k2 * (0.5 * dt);
        let s3 = field(op, theta, &x3, w2, &opts, &mut max_res)?;
        let k3 = s3.as_ref().map_or_else(zero, |s| s.field.clone());
        let w3 = s3.map_or(w2, |s| s.ev.lambda);
        let x4 = &x + &k3 * dt;
        let s4 = field(op, theta, &x4, w3, &opts, &mut max_res)?;
        let k4 = s4.as_ref().map_or_else(zero, |s| s.field.clone());

        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        steps = i;
        match field(op, theta, &x, warm, &opts, &mut max_res)? {
            None => {
                status = FlowStatus::Stabilized;
                break;
            }
            Some(next) => {
                cur = next;
                let keep = i % stride == 0 || i == n_steps;
                let slow = (&cur.ev.y - &x).norm() < cfg.speed_floor;
                if keep || slow {
                    samples.push(make_state(op, t, &x, &cur.ev, lambda0));
                }
                if slow {
                    status = FlowStatus::Stabilized;
                    break;
                }
            }
        }
    }

    Ok(Trajectory {
        samples,
        theta,
        status,
        max_constraint_residual: max_res,
        steps,
    })
}

// ---------------------------------------------------------------------------
// Scalar oracles for the two linear examples.

/// `λ(t)` for the isotropic operator `αI`: root of
/// `α ln λ − 2/λ = αt + α ln λ0 − 2/λ0`, solved by safeguarded Newton in `ln λ`.
pub fn isotropic_lambda_oracle(alpha: f64, lambda0: f64, t: f64) -> f64 {
    if t == 0.0 {
        return lambda0;
    }
    let rhs = alpha * t + alpha * lambda0.ln() - 2.0 / lambda0;
    let f = |s: f64| alpha * s - 2.0 * (-s).exp() - rhs;
    let df = |s: f64| alpha + 2.0 * (-s).exp();
    // f(ln λ0) = −αt and f(ln λ0 + t) ≥ 0 for t ≥ 0 (the other way round for t < 0).
    let (mut lo, mut hi) = {
        let (a, b) = (lambda0.ln(), lambda0.ln() + t);
        (a.min(b), a.max(b))
    };
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fs = f(s);
        if fs.abs() <= 1e-15 * (1.0 + rhs.abs()) {
            break;
        }
        if fs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - fs / df(s);
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    s.exp()
}

/// `λ(t)` for the plane rotation: root of `λ − 2/λ = t + λ0 − 2/λ0`,
/// solved by safeguarded Newton.
pub fn rotation_lambda_oracle(lambda0: f64, t: f64) -> f64 {
    if t == 0.0 {
        return lambda0;
    }
    let c = t + lambda0 - 2.0 / lambda0;
    let f = |l: f64| l - 2.0 / l - c;
    let df = |l: f64| 1.0 + 2.0 / (l * l);
    // λ − 2/λ is increasing on (0, ∞): bracket by doubling.
    let mut lo = lambda0.min(1.0);
    while f(lo) > 0.0 {
        lo *= 0.5;
    }
    let mut hi = lambda0.max(1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut l = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fl = f(l);
        if fl.abs() <= 1e-14 * (1.0 + c.abs()) {
            break;
        }
        if fl < 0.0 {
            lo = l;
        } else {
            hi = l;
        }
        let newton = l - fl / df(l);
        l = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    l
}

/// `λ(t)` for the plane rotation obtained by integrating the flow's own
/// scalar law `λ' (λ² + 2) = λ³`, i.e. `ln λ − 1/λ² = t + ln λ0 − 1/λ0²`.
///
/// The integrated trajectory follows this law; along it `λ(t)/e^t` tends to a
/// constant, so `λ − 2/λ − t` from [`rotation_lambda_oracle`] is not conserved.
pub fn rotation_lambda_exact(lambda0: f64, t: f64) -> f64 {
    if t == 0.0 {
        return lambda0;
    }
    let s0 = lambda0.ln();
    let rhs = t + s0 - (-2.0 * s0).exp();
    let f = |s: f64| s - (-2.0 * s).exp() - rhs;
    let df = |s: f64| 1.0 + 2.0 * (-2.0 * s).exp();
    let (mut lo, mut hi) = (s0.min(s0 + t), s0.max(s0 + t));
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fs = f(s);
        if fs.abs() <= 1e-15 * (1.0 + rhs.abs()) {
            break;
        }
        if fs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - fs / df(s);
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    s.exp()
}

// ---------------------------------------------------------------------------

/// Least-squares line through `(t, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_log_linear(ts: &[f64], values: &[f64]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let rate = sty / stt;
    let intercept = my - rate * mt;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - rate * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(ExpFit {
        rate,
        intercept,
        r_squared,
        points: n,
    })
}

/// Start of the window used for the exponential fits.
pub const FIT_WINDOW_START: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub samples: usize,
    /// `max (λ_i − λ_{i+1})⁺`
    pub lambda_monotonicity_violation: f64,
    /// `max over i < j of (λ_j − e^{t_j − t_i} λ_i)⁺`
    pub lambda_growth_cap_violation: f64,
    /// Same, relative: `max (λ_j / (e^{t_j − t_i} λ_i) − 1)⁺`
    pub lambda_growth_cap_rel_violation: f64,
    pub speed_monotonicity_violation: f64,
    /// `max over i < j of (e^{−(t_j − t_i)} speed_i − speed_j)⁺`
    pub speed_decay_cap_violation: f64,
    pub speed_decay_cap_rel_violation: f64,
    pub d0: f64,
    /// `d0` was estimated as `‖x0 − x(t_end)‖` (no known zero set).
    pub d0_estimated: bool,
    /// `max (speed − d0/√(2t))⁺` over samples with `t > 0.1`.
    pub speed_bound_violation: f64,
    /// `max (θ√(2t)/d0 − λ)⁺` over samples with `t > 0.1`.
    pub lambda_bound_violation: f64,
    /// `max (‖x_{i+1} − z‖ − ‖x_i − z‖)⁺` over known zeros `z`.
    pub distance_monotonicity_violation: Option<f64>,
    /// `max (f(x) − f*)(1 + C2 t)² / (f(x0) − f*)`.
    pub f_bound_max_ratio: Option<f64>,
    pub f_bound_c2: Option<f64>,
    /// Trapezoid estimate of `∫ λ (f(y) − f*) dt`.
    pub integral_estimate: Option<f64>,
    /// `½ d0²`
    pub integral_bound: f64,
    pub distance_fit: Option<ExpFit>,
    pub lambda_fit: Option<ExpFit>,
    pub max_constraint_residual: f64,
}

impl FlowReport {
    /// Largest violation among the checks that are hard assertions for this
    /// trajectory; checks relying on an estimated `d0` are left out.
    pub fn max_violation(&self) -> f64 {
        let mut m = self
            .lambda_monotonicity_violation
            .max(self.lambda_growth_cap_rel_violation)
            .max(self.speed_monotonicity_violation)
            .max(self.speed_decay_cap_rel_violation);
        if !self.d0_estimated {
            m = m.max(self.speed_bound_violation).max(self.lambda_bound_violation);
            if let Some(r) = self.f_bound_max_ratio {
                m = m.max(r - 1.0);
            }
            if let Some(i) = self.integral_estimate {
                m = m.max(i - self.integral_bound);
            }
        }
        if let Some(d) = self.distance_monotonicity_violation {
            m = m.max(d);
        }
        m.max(0.0)
    }
}

pub fn flow_diagnostics(traj: &Trajectory, op: &dyn MonotoneOperator) -> Result<FlowReport> {
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "flow diagnostics need at least 2 samples, got {}",
            s.len()
        )));
    }
    let theta = traj.theta;

    let mut lam_mono = 0.0f64;
    let mut speed_mono = 0.0f64;
    for w in s.windows(2) {
        lam_mono = lam_mono.max(w[0].lambda - w[1].lambda);
        speed_mono = speed_mono.max(w[1].speed - w[0].speed);
    }

    // Pairwise caps in one pass: running min of ln λ − t, running max of ln speed + t.
    let (mut cap_abs, mut cap_rel, mut dec_abs, mut dec_rel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut min_u = s[0].lambda.ln() - s[0].t;
    let mut max_w = s[0].speed.ln() + s[0].t;
    for st in &s[1..] {
        let u = st.lambda.ln() - st.t;
        cap_abs = cap_abs.max(st.lambda - (st.t + min_u).exp());
        cap_rel = cap_rel.max((u - min_u).exp_m1());
        min_u = min_u.min(u);
        if st.speed > 0.0 {
            let w = st.speed.ln() + st.t;
            dec_abs = dec_abs.max((max_w - st.t).exp() - st.speed);
            dec_rel = dec_rel.max(-(w - max_w).exp_m1());
            max_w = max_w.max(w);
        }
    }

    let zs = op.zero_set();
    let x0 = &s[0].x;
    let (d0, d0_estimated) = match &zs {
        Some(z) => (z.distance(x0), false),
        None => ((x0 - &s[s.len() - 1].x).norm(), true),
    };

    let (mut sb, mut lb) = (0.0f64, 0.0f64);
    for st in s.iter().filter(|st| st.t > 0.1) {
        let r = (2.0 * st.t).sqrt();
        sb = sb.max(st.speed - d0 / r);
        lb = lb.max(theta * r / d0 - st.lambda);
    }

    let distance_monotonicity_violation = zs.as_ref().map(|z| {
        let mut worst = 0.0f64;
        for rep in z.representatives() {
            for w in s.windows(2) {
                worst = worst.max((&w[1].x - &rep).norm() - (&w[0].x - &rep).norm());
            }
        }
        worst
    });

    let pot = op.potential();
    let (mut f_ratio, mut c2, mut integral) = (None, None, None);
    if let Some(p) = pot {
        if let Some(gap0) = p.gap(x0) {
            if gap0 > 0.0 && d0 > 0.0 {
                let kappa = (theta / d0.powi(3)).sqrt();
                let k = kappa * gap0.sqrt();
                let c = k / (2.0 + 3.0 * k);
                let mut worst = 0.0f64;
                for st in s {
                    let g = p.gap(&st.x).unwrap_or(0.0);
                    worst = worst.max(g * (1.0 + c * st.t).powi(2) / gap0);
                }
                f_ratio = Some(worst);
                c2 = Some(c);
            }
            let mut acc = 0.0;
            for w in s.windows(2) {
                let a = w[0].lambda * p.gap(&w[0].y).unwrap_or(0.0);
                let b = w[1].lambda * p.gap(&w[1].y).unwrap_or(0.0);
                acc += 0.5 * (a + b) * (w[1].t - w[0].t);
            }
            integral = Some(acc);
        }
    }

    let window: Vec<&FlowState> = s.iter().filter(|st| st.t >= FIT_WINDOW_START).collect();
    let ts: Vec<f64> = window.iter().map(|st| st.t).collect();
    let distance_fit = zs.as_ref().and_then(|z| {
        let d: Vec<f64> = window.iter().map(|st| z.distance(&st.x)).collect();
        fit_log_linear(&ts, &d)
    });
    let lams: Vec<f64> = window.iter().map(|st| st.lambda).collect();
    let lambda_fit = fit_log_linear(&ts, &lams);

    Ok(FlowReport {
        samples: s.len(),
        lambda_monotonicity_violation: lam_mono.max(0.0),
        lambda_growth_cap_violation: cap_abs.max(0.0),
        lambda_growth_cap_rel_violation: cap_rel.max(0.0),
        speed_monotonicity_violation: speed_mono.max(0.0),
        speed_decay_cap_violation: dec_abs.max(0.0),
        speed_decay_cap_rel_violation: dec_rel.max(0.0),
        d0,
        d0_estimated,
        speed_bound_violation: sb.max(0.0),
        lambda_bound_violation: lb.max(0.0),
        distance_monotonicity_violation,
        f_bound_max_ratio: f_ratio,
        f_bound_c2: c2,
        integral_estimate: integral,
        integral_bound: 0.5 * d0 * d0,
        distance_fit,
        lambda_fit,
        max_constraint_residual: traj.max_constraint_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_isotropic, make_rotation};

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn isotropic_oracle_satisfies_law() {
        assert_eq!(isotropic_lambda_oracle(1.0, GOLDEN, 0.0), GOLDEN);
        let l = isotropic_lambda_oracle(1.0, GOLDEN, 5.0);
        let res = l.ln() - 2.0 / l - (5.0 + GOLDEN.ln() - 2.0 / GOLDEN);
        assert!(res.abs() <= 1e-12, "{res}");
        let l = isotropic_lambda_oracle(2.5, 0.3, 7.0);
        let res = 2.5 * l.ln() - 2.0 / l - (2.5 * 7.0 + 2.5 * 0.3f64.ln() - 2.0 / 0.3);
        assert!(res.abs() <= 1e-12, "{res}");
    }

    #[test]
    fn rotation_oracle_matches_closed_form() {
        let l0 = GOLDEN.sqrt();
        assert_eq!(rotation_lambda_oracle(l0, 0.0), l0);
        for &t in &[0.5, 3.0, 10.0, 100.0] {
            let c = t + l0 - 2.0 / l0;
            let closed = (c + (c * c + 8.0).sqrt()) / 2.0;
            let l = rotation_lambda_oracle(l0, t);
            assert!((l - closed).abs() <= 1e-12 * closed, "t={t}: {l} vs {closed}");
        }
    }

    #[test]
    fn short_isotropic_run() {
        let op = make_isotropic(1.0, 2).unwrap();
        let traj = integrate(&op, &v(&[1.0, 0.0]), 1.0, 1.0, &FlowConfig::default()).unwrap();
        assert_eq!(traj.samples.len(), 101);
        assert!((traj.samples[0].lambda - GOLDEN).abs() < 1e-9);
        assert!((traj.samples.last().unwrap().t - 1.0).abs() < 1e-12);
        let rep = flow_diagnostics(&traj, &op).unwrap();
        assert_eq!(rep.lambda_monotonicity_violation, 0.0);
        assert!(rep.f_bound_max_ratio.unwrap() <= 1.0 + 1e-3);
        for st in &traj.samples {
            let want = isotropic_lambda_oracle(1.0, GOLDEN, st.t);
            assert!((st.lambda - want).abs() <= 1e-6 * want);
        }
    }

    #[test]
    fn rotation_report_has_no_potential_fields() {
        let op = make_rotation();
        let traj = integrate(&op, &v(&[1.0, 0.0]), 1.0, 0.5, &FlowConfig::default()).unwrap();
        let rep = flow_diagnostics(&traj, &op).unwrap();
        assert!(rep.f_bound_max_ratio.is_none());
        assert!(rep.integral_estimate.is_none());
        assert_eq!(rep.lambda_monotonicity_violation, 0.0);
    }

    #[test]
    fn rotation_follows_log_law() {
        let op = make_rotation();
        let traj = integrate(&op, &v(&[1.0, 0.0]), 1.0, 5.0, &FlowConfig::default()).unwrap();
        let l0 = traj.samples[0].lambda;
        for st in &traj.samples {
            let want = rotation_lambda_exact(l0, st.t);
            assert!((st.lambda - want).abs() <= 1e-6 * want, "t={}", st.t);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let op = make_isotropic(1.0, 2).unwrap();
        let traj = integrate(&op, &v(&[1.0, 0.0]), 1.0, 0.05, &FlowConfig::default()).unwrap();
        let mut one = traj.clone();
        one.samples.truncate(1);
        assert!(matches!(flow_diagnostics(&one, &op), Err(Error::InsufficientData(_))));

        let mut same = traj.clone();
        same.samples = vec![traj.samples[0].clone(), traj.samples[0].clone()];
        same.samples[1].t = 0.01;
        let rep = flow_diagnostics(&same, &op).unwrap();
        assert_eq!(rep.lambda_monotonicity_violation, 0.0);
        assert_eq!(rep.speed_monotonicity_violation, 0.0);
        assert_eq!(rep.lambda_growth_cap_violation, 0.0);

        assert!(matches!(
            integrate(&op, &v(&[0.0, 0.0]), 1.0, 1.0, &FlowConfig::default()),
            Err(Error::ZeroResidual { .. })
        ));
    }

    #[test]
    fn fit_recovers_exponential() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_log_linear(&ts, &vs).unwrap();
        assert!((f.rate + 0.7).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
