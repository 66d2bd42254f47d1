//! Large-step inexact proximal point method for convex minimization.
//!
//! Each iteration produces `(λ_k, x_k, v_k, ε_k)` with `v_k ∈ ∂_{ε_k} f(x_k)`,
//! `‖λ_k v_k + x_k − x_{k−1}‖² + 2λ_k ε_k ≤ σ²‖x_k − x_{k−1}‖²` and
//! `λ_k ‖x_k − x_{k−1}‖ ≥ θ` (unless `v_k = 0`).

use crate::error::{Error, Result};
use crate::lambda::{solve_lambda, LambdaOptions};
use crate::linalg::{ensure_dim, ensure_finite, operator_norm_estimate, Vector};
use crate::operators::{resolvent, MonotoneOperator, Potential, ZeroSet, DEFAULT_INNER_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ProxCertificate {
    pub lambda: f64,
    pub y: Vector,
    pub v: Vector,
    pub epsilon: f64,
    /// `‖λv + y − x_prev‖`
    pub eq_residual: f64,
    /// `‖y − x_prev‖`
    pub step_norm: f64,
    /// Floating-point error bound on `y − x_prev` and `λv`; zero unless set
    /// with [`ProxCertificate::with_rounding`].
    pub rounding: f64,
}

impl ProxCertificate {
    pub fn new(x_prev: &Vector, lambda: f64, y: Vector, v: Vector, epsilon: f64) -> Self {
        let eq_residual = (&v * lambda + &y - x_prev).norm();
        let step_norm = (&y - x_prev).norm();
        ProxCertificate {
            lambda,
            y,
            v,
            epsilon,
            eq_residual,
            step_norm,
            rounding: 0.0,
        }
    }

    pub fn with_rounding(mut self, rounding: f64) -> Self {
        self.rounding = rounding.max(0.0);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateVerdict {
    /// `ε ≥ 0`; built-in potentials report `v = ∇f(y)` so this is the only
    /// thing left to check.
    pub inclusion: bool,
    pub relative_error: bool,
    pub large_step: bool,
    pub inclusion_slack: f64,
    /// `(σ‖Δx‖ + r)² − ‖λv + Δx‖² − 2λε` with `r` the rounding allowance.
    pub relative_error_slack: f64,
    /// `λ(‖Δx‖ + r) − θ`, or `+∞` when `v = 0`.
    pub large_step_slack: f64,
}

impl CertificateVerdict {
    pub fn passed(&self) -> bool {
        self.inclusion && self.relative_error && self.large_step
    }
}

pub fn check_certificate(cert: &ProxCertificate, sigma: f64, theta: f64) -> CertificateVerdict {
    let inclusion_slack = cert.epsilon;
    let inclusion = cert.epsilon >= 0.0 && cert.epsilon.is_finite();
    let r = cert.rounding;
    let relative_error_slack = (sigma * cert.step_norm + r).powi(2)
        - cert.eq_residual * cert.eq_residual
        - 2.0 * cert.lambda * cert.epsilon;
    let large_step_slack = if cert.v.norm() == 0.0 {
        f64::INFINITY
    } else {
        cert.lambda * (cert.step_norm + r) - theta
    };
    CertificateVerdict {
        inclusion,
        relative_error: relative_error_slack >= 0.0,
        large_step: large_step_slack >= 0.0,
        inclusion_slack,
        relative_error_slack,
        large_step_slack,
    }
}

/// How `λ_k` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPolicy {
    /// `λ_k = Λ_θ(x_{k−1})`: the exact prox step has `λ‖x_k − x_{k−1}‖ = θ`.
    ClosedLoop,
    /// User-supplied values, used in order (the last one repeats).
    Schedule(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpConfig {
    pub policy: LambdaPolicy,
    /// Tolerance of the λ equation; operator default when `None`.
    pub rel_tol: Option<f64>,
    pub resolvent_tol: f64,
}

impl Default for PpConfig {
    fn default() -> Self {
        PpConfig {
            policy: LambdaPolicy::ClosedLoop,
            rel_tol: None,
            resolvent_tol: DEFAULT_INNER_TOL,
        }
    }
}

const MAX_TIGHTENINGS: usize = 5;

fn need_potential(op: &dyn MonotoneOperator) -> Result<&dyn Potential> {
    op.potential().ok_or(Error::MissingCapability("potential"))
}

/// One closed-loop step from `x_prev`.
pub fn pp_step(
    op: &dyn MonotoneOperator,
    x_prev: &Vector,
    theta: f64,
    sigma: f64,
    cfg: &PpConfig,
) -> Result<(Vector, ProxCertificate)> {
    step_impl(op, x_prev, theta, sigma, cfg, None, 0, None)
}

#[allow(clippy::too_many_arguments)]
fn step_impl(
    op: &dyn MonotoneOperator,
    x_prev: &Vector,
    theta: f64,
    sigma: f64,
    cfg: &PpConfig,
    fixed_lambda: Option<f64>,
    iteration: usize,
    warm: Option<f64>,
) -> Result<(Vector, ProxCertificate)> {
    let p = need_potential(op)?;
    ensure_dim(x_prev, op.dim())?;
    ensure_finite(x_prev, "x_prev")?;
    if !(0.0..1.0).contains(&sigma) {
        return Err(Error::InvalidArgument(format!("sigma must lie in [0, 1), got {sigma}")));
    }
    let g = p.gradient(x_prev);
    let gn = g.norm();
    if gn == 0.0 {
        return Err(Error::ZeroGradient(0.0));
    }

    let mut opts = LambdaOptions::for_operator(op);
    if let Some(r) = cfg.rel_tol {
        opts.rel_tol = r;
    }
    opts.resolvent_tol = cfg.resolvent_tol;
    if let Some(w) = warm {
        opts.warm_start = Some(w);
    }

    let (lambda, mut y) = match fixed_lambda {
        Some(l) => {
            let r = resolvent(op, l, x_prev, cfg.resolvent_tol)?;
            (l, r.y)
        }
        None => {
            // Aim slightly above θ so the large-step inequality survives the
            // tolerance of the root finder.
            let target = theta * (1.0 + 2.0 * opts.rel_tol);
            match solve_lambda(op, target, x_prev, &opts) {
                Ok(ev) => (ev.lambda, ev.y),
                Err(Error::ZeroResidual { .. }) => return Err(Error::ZeroGradient(gn)),
                Err(e) => return Err(e),
            }
        }
    };

    // Error in forming y − x_prev and λ∇f(y) in floating point.
    let rounding = |y: &Vector, g: &Vector| {
        let hn = operator_norm_estimate(&p.hessian(y));
        16.0 * f64::EPSILON * (x_prev.norm() + y.norm() + lambda * (hn * y.norm() + g.norm()))
    };
    let certify = |y: &Vector| {
        let g = p.gradient(y);
        let r = rounding(y, &g);
        ProxCertificate::new(x_prev, lambda, y.clone(), g, 0.0).with_rounding(r)
    };
    let mut tol = cfg.resolvent_tol;
    let mut cert = certify(&y);
    for _ in 0..MAX_TIGHTENINGS {
        if check_certificate(&cert, sigma, theta).relative_error {
            break;
        }
        tol *= 1e-3;
        y = resolvent(op, lambda, x_prev, tol)?.y;
        cert = certify(&y);
    }
    let verdict = check_certificate(&cert, sigma, theta);
    if !verdict.passed() {
        return Err(Error::CertificateRejected {
            iteration,
            reason: format!(
                "relative-error slack {:e}, large-step slack {:e}",
                verdict.relative_error_slack, verdict.large_step_slack
            ),
        });
    }
    Ok((y, cert))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Converged,
    MaxIter,
    ZeroGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpConstants {
    /// Diameter of the initial sublevel set.
    pub d0_level: Option<f64>,
    pub d0_estimated: bool,
    pub d_hat: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa0: Option<f64>,
    /// Distance from `x0` to the known solution set.
    pub dist0: Option<f64>,
    pub gap0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpIterate {
    pub k: usize,
    pub x: Vector,
    pub cert: ProxCertificate,
    pub fx: f64,
    pub gap: Option<f64>,
    /// Displayed O(1/k²) bound with `κ0`, when the constants are known.
    pub rate_bound: Option<f64>,
    /// `rate_bound − gap`
    pub bound_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpRun {
    pub x0: Vector,
    pub f0: f64,
    pub iterates: Vec<PpIterate>,
    pub theta: f64,
    pub sigma: f64,
    pub constants: PpConstants,
    pub status: PpStatus,
}

impl PpRun {
    pub fn final_x(&self) -> &Vector {
        self.iterates.last().map_or(&self.x0, |it| &it.x)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.iterates.iter().map(|it| it.cert.lambda).collect()
    }

    pub fn inv_cube_partial_sums(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.iterates
            .iter()
            .map(|it| {
                acc += it.cert.lambda.powi(-3);
                acc
            })
            .collect()
    }

    /// `‖v_j‖` for `j = 1..=k`, repeating the last value past termination.
    pub fn v_norm(&self, j: usize) -> Option<f64> {
        if j == 0 || self.iterates.is_empty() {
            return None;
        }
        let idx = (j - 1).min(self.iterates.len() - 1);
        Some(self.iterates[idx].cert.v.norm())
    }

    /// `min ‖v_j‖` over the window `j ∈ {k/2 + 1, …, k}`.
    pub fn window_min_residual(&self, k_even: usize) -> Result<f64> {
        if k_even < 2 || k_even % 2 == 1 {
            return Err(Error::BadK(k_even));
        }
        (k_even / 2 + 1..=k_even)
            .filter_map(|j| self.v_norm(j))
            .reduce(f64::min)
            .ok_or_else(|| Error::InsufficientData("run has no iterates".into()))
    }

    /// Largest violation of the per-step inequalities checked by [`step_checks`].
    pub fn max_step_violation(&self) -> f64 {
        let mut prev = &self.x0;
        let mut prev_f = self.f0;
        let mut worst = 0.0f64;
        for it in &self.iterates {
            let c = step_checks(prev, prev_f, it, self.sigma, self.theta);
            worst = worst.max(c.max_violation());
            prev = &it.x;
            prev_f = it.fx;
        }
        worst
    }
}

/// Per-step inequalities of an accepted iteration (all slacks ≥ 0 when they hold).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChecks {
    /// `f(x_{k−1}) − f(x_k) − (λ/2)‖v‖² − ((1−σ²)/(2λ))‖Δx‖²`
    pub descent_slack: f64,
    /// `‖λv‖ − (1−σ)‖Δx‖ + 2r`, `r` the certificate's rounding allowance
    pub lower_ratio_slack: f64,
    /// `(1+σ)‖Δx‖ − ‖λv‖ + 2r`
    pub upper_ratio_slack: f64,
    /// `(λ/2)‖v‖² + ((1−σ²)/(2λ))‖Δx‖² − ‖v‖^{3/2}√(θ(1−σ))`
    pub power_slack: f64,
    /// `f(x_{k−1}) − f(x_k)`
    pub f_decrease: f64,
}

impl StepChecks {
    pub fn max_violation(&self) -> f64 {
        [
            self.descent_slack,
            self.lower_ratio_slack,
            self.upper_ratio_slack,
            self.power_slack,
        ]
        .iter()
        .fold(0.0f64, |m, s| m.max(-s))
    }
}

pub fn step_checks(x_prev: &Vector, f_prev: f64, it: &PpIterate, sigma: f64, theta: f64) -> StepChecks {
    let lam = it.cert.lambda;
    let dx = (&it.x - x_prev).norm();
    let vn = it.cert.v.norm();
    let decrease_lb = 0.5 * lam * vn * vn + (1.0 - sigma * sigma) / (2.0 * lam) * dx * dx;
    let f_decrease = f_prev - it.fx;
    StepChecks {
        descent_slack: f_decrease - decrease_lb,
        lower_ratio_slack: lam * vn - (1.0 - sigma) * dx + 2.0 * it.cert.rounding,
        upper_ratio_slack: (1.0 + sigma) * dx - lam * vn + 2.0 * it.cert.rounding,
        power_slack: decrease_lb - vn.powf(1.5) * (theta * (1.0 - sigma)).sqrt(),
        f_decrease,
    }
}

/// Runs the method with the closed-loop λ policy.
pub fn run_pp(
    op: &dyn MonotoneOperator,
    x0: &Vector,
    theta: f64,
    sigma: f64,
    max_iter: usize,
    grad_tol: f64,
) -> Result<PpRun> {
    run_pp_with(op, x0, theta, sigma, max_iter, grad_tol, &PpConfig::default())
}

pub fn run_pp_with(
    op: &dyn MonotoneOperator,
    x0: &Vector,
    theta: f64,
    sigma: f64,
    max_iter: usize,
    grad_tol: f64,
    cfg: &PpConfig,
) -> Result<PpRun> {
    let p = need_potential(op)?;
    ensure_dim(x0, op.dim())?;
    ensure_finite(x0, "x0")?;
    let f0 = p.value(x0);
    if !f0.is_finite() {
        return Err(Error::InvalidArgument("f(x0) is not finite".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }

    let mut iterates: Vec<PpIterate> = Vec::new();
    let mut status = PpStatus::MaxIter;
    let mut x = x0.clone();
    let mut warm = None;
    if p.gradient(x0).norm() <= grad_tol {
        status = PpStatus::ZeroGradient;
    } else {
        for k in 1..=max_iter {
            let fixed = match &cfg.policy {
                LambdaPolicy::ClosedLoop => None,
                LambdaPolicy::Schedule(s) => match s.get(k - 1).or(s.last()) {
                    Some(l) => Some(*l),
                    None => return Err(Error::InvalidArgument("empty lambda schedule".into())),
                },
            };
            let (next, cert) = match step_impl(op, &x, theta, sigma, cfg, fixed, k, warm) {
                Ok(r) => r,
                Err(Error::ZeroGradient(_)) => {
                    status = if k == 1 { PpStatus::ZeroGradient } else { PpStatus::Converged };
                    break;
                }
                Err(e) => return Err(e),
            };
            // Λ_θ is non-decreasing along the iterates, so the last λ is a good probe.
            warm = Some(cert.lambda);
            let vn = cert.v.norm();
            let fx = p.value(&next);
            iterates.push(PpIterate {
                k,
                x: next.clone(),
                cert,
                fx,
                gap: p.gap(&next),
                rate_bound: None,
                bound_slack: None,
            });
            x = next;
            if vn <= grad_tol {
                status = PpStatus::Converged;
                break;
            }
        }
    }

    let constants = compute_constants(op, p, x0, &iterates, theta, sigma);
    if let (Some(gap0), Some(k0)) = (constants.gap0, constants.kappa0) {
        for it in iterates.iter_mut() {
            let b = rate_bound(gap0, k0, it.k);
            it.rate_bound = Some(b);
            it.bound_slack = it.gap.map(|g| b - g);
        }
    }

    Ok(PpRun {
        x0: x0.clone(),
        f0,
        iterates,
        theta,
        sigma,
        constants,
        status,
    })
}

fn compute_constants(
    op: &dyn MonotoneOperator,
    p: &dyn Potential,
    x0: &Vector,
    iterates: &[PpIterate],
    theta: f64,
    sigma: f64,
) -> PpConstants {
    let gap0 = p.gap(x0);
    let zs = op.zero_set();
    let dist0 = zs.as_ref().map(|z| z.distance(x0));
    let (d0, estimated) = match p.level_set_diameter(x0) {
        Some(d) => (Some(d), false),
        None => {
            // Max pairwise distance among the iterates and a known minimizer.
            let mut pts: Vec<&Vector> = std::iter::once(x0).chain(iterates.iter().map(|it| &it.x)).collect();
            let proj;
            if let Some(z) = &zs {
                proj = match z {
                    ZeroSet::Point(p) => p.clone(),
                    ZeroSet::Affine { .. } => z.project(x0),
                };
                pts.push(&proj);
            }
            let mut m = 0.0f64;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    m = m.max((pts[i] - pts[j]).norm());
                }
            }
            (if m > 0.0 { Some(m) } else { None }, true)
        }
    };
    let d_hat = d0.map(|d| d * (1.0 + sigma * sigma / (2.0 * (1.0 - sigma))));
    let kappa = d_hat.map(|d| (theta * (1.0 - sigma) / d.powi(3)).sqrt());
    let kappa0 = d0.map(|d| (theta * (1.0 - sigma) / d.powi(3)).sqrt());
    PpConstants {
        d0_level: d0,
        d0_estimated: estimated,
        d_hat,
        kappa,
        kappa0,
        dist0,
        gap0,
    }
}

fn rate_factor(f0_gap: f64, kappa: f64) -> f64 {
    let k = kappa * f0_gap.sqrt();
    k / (2.0 + 3.0 * k)
}

/// `f0_gap / [1 + k·κ√f0_gap/(2 + 3κ√f0_gap)]²`
pub fn rate_bound(f0_gap: f64, kappa: f64, k: usize) -> f64 {
    if f0_gap <= 0.0 {
        return 0.0;
    }
    let c = rate_factor(f0_gap, kappa);
    f0_gap / (1.0 + k as f64 * c).powi(2)
}

/// Bound on `min ‖v_j‖` over `j ∈ {k/2 + 1, …, k}`.
pub fn residual_window_bound(f0_gap: f64, kappa: f64, theta: f64, sigma: f64, k_even: usize) -> Result<f64> {
    if k_even < 2 || k_even % 2 == 1 {
        return Err(Error::BadK(k_even));
    }
    if f0_gap <= 0.0 {
        return Ok(0.0);
    }
    let k = k_even as f64;
    let c = rate_factor(f0_gap, kappa);
    let inner = f0_gap / (k * (2.0 + k * c).powi(2));
    Ok(4.0 / (theta * (1.0 - sigma)).cbrt() * inner.powf(2.0 / 3.0))
}

/// Iteration counts `(K, J)`: after `K` iterations the gap is at most `eps`,
/// and some `j ≤ 2⌈J⌉` has `‖v_j‖ ≤ eps`.
pub fn complexity_bounds(f0_gap: f64, theta: f64, sigma: f64, d0: f64, eps: f64) -> (f64, f64) {
    let kappa0 = (theta * (1.0 - sigma) / d0.powi(3)).sqrt();
    let a = 2.0 + 3.0 * kappa0 * f0_gap.max(0.0).sqrt();
    let k = a / (kappa0 * eps.sqrt());
    let j = 2.0 / (theta * (1.0 - sigma)).powf(1.0 / 6.0) * a.powf(2.0 / 3.0) / (kappa0.cbrt() * eps.sqrt());
    (k, j)
}

/// Outcome of [`decay_lemma_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum DecayVerdict {
    Holds,
    /// Hypotheses hold but `a_k > a_0/(1 + kτ√a_0/2)²`.
    ConclusionFails { k: usize },
    /// `τ√a_0 > 1`
    StepTooLarge { tau_sqrt_a0: f64 },
    /// `a_k > a_{k−1} − τ a_{k−1}^{3/2}`, or a negative term.
    RecursionFails { k: usize },
}

impl DecayVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, DecayVerdict::Holds)
    }
}

/// Checks the hypotheses and conclusion of the discrete decay lemma for
/// `a_k ≤ a_{k−1} − τ a_{k−1}^{3/2}`.
pub fn decay_lemma_check(a: &[f64], tau: f64) -> DecayVerdict {
    if a.is_empty() {
        return DecayVerdict::Holds;
    }
    let a0 = a[0];
    if a.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        let k = a.iter().position(|v| *v < 0.0 || !v.is_finite()).unwrap_or(0);
        return DecayVerdict::RecursionFails { k };
    }
    let ts = tau * a0.sqrt();
    if ts > 1.0 {
        return DecayVerdict::StepTooLarge { tau_sqrt_a0: ts };
    }
    for k in 1..a.len() {
        if a[k] > a[k - 1] - tau * a[k - 1].powf(1.5) {
            return DecayVerdict::RecursionFails { k };
        }
    }
    for (k, ak) in a.iter().enumerate() {
        let bound = a0 / (1.0 + k as f64 * ts / 2.0).powi(2);
        if *ak > bound {
            return DecayVerdict::ConclusionFails { k };
        }
    }
    DecayVerdict::Holds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::operators::{make_logistic1d, make_quadratic, Logistic1d};

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn cert(eq_residual: f64, step_norm: f64, lambda: f64, v_norm: f64) -> ProxCertificate {
        ProxCertificate {
            lambda,
            y: Vector::zeros(1),
            v: Vector::from_element(1, v_norm),
            epsilon: 0.0,
            eq_residual,
            step_norm,
            rounding: 0.0,
        }
    }

    #[test]
    fn certificate_examples() {
        let c = cert(0.0, 1.0, 2.0, 1.0);
        for s in [0.0, 0.3, 0.99] {
            assert!(check_certificate(&c, s, 1.5).passed());
        }
        let c = cert(1.0, 1.0, 2.0, 1.0);
        assert!(!check_certificate(&c, 0.5, 1.0).relative_error);
        let c = cert(0.0, 0.1, 1.0, 0.0);
        let verdict = check_certificate(&c, 0.5, 1.0);
        assert!(verdict.large_step);
        let c = cert(0.0, 0.1, 1.0, 0.3);
        assert!(!check_certificate(&c, 0.5, 1.0).large_step);
        let mut c = cert(0.0, 1.0, 2.0, 1.0);
        c.epsilon = 0.2;
        // 0.25 − 0 − 0.8 < 0
        assert!(!check_certificate(&c, 0.5, 1.0).relative_error);
        c.epsilon = 0.05;
        assert!(check_certificate(&c, 0.5, 1.0).relative_error);
    }

    #[test]
    fn step_on_quadratic() {
        let op = make_quadratic(SymMatrix::identity(2), v(&[0.0, 0.0])).unwrap();
        let (x1, c) = pp_step(&op, &v(&[1.0, 0.0]), 1.0, 0.1, &PpConfig::default()).unwrap();
        assert!((c.lambda - GOLDEN).abs() < 1e-9);
        assert!((x1[0] - 1.0 / (1.0 + GOLDEN)).abs() < 1e-9);
        assert!((x1[0] - 0.38197).abs() < 1e-5);
        assert!(check_certificate(&c, 0.1, 1.0).passed());
        assert!(matches!(
            pp_step(&op, &v(&[0.0, 0.0]), 1.0, 0.1, &PpConfig::default()),
            Err(Error::ZeroGradient(_))
        ));
    }

    #[test]
    fn step_on_logistic() {
        let op = make_logistic1d();
        let (y, c) = pp_step(&op, &v(&[2.0]), 0.5, 0.1, &PpConfig::default()).unwrap();
        let verdict = check_certificate(&c, 0.1, 0.5);
        assert!(verdict.passed(), "{verdict:?}");
        // independent check: bisection on λ f'(y) + y − 2 = 0
        let h = |t: f64| c.lambda * Logistic1d::grad_scalar(t) + t - 2.0;
        let (mut lo, mut hi) = (2.0 - c.lambda, 2.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if h(m) > 0.0 {
                hi = m
            } else {
                lo = m
            }
        }
        assert!((y[0] - 0.5 * (lo + hi)).abs() < 1e-9);
    }

    #[test]
    fn rate_bound_examples() {
        assert_eq!(rate_bound(3.0, 1.0, 0), 3.0);
        assert_eq!(rate_bound(0.0, 1.0, 7), 0.0);
        assert!((rate_bound(1.0, 1.0, 5) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn window_bound_examples() {
        assert_eq!(residual_window_bound(0.0, 1.0, 1.0, 0.1, 10).unwrap(), 0.0);
        assert!(matches!(residual_window_bound(1.0, 1.0, 1.0, 0.1, 7), Err(Error::BadK(7))));
        assert!(matches!(residual_window_bound(1.0, 1.0, 1.0, 0.1, 0), Err(Error::BadK(0))));
        let r = residual_window_bound(1.0, 1e3, 1.0, 0.1, 40).unwrap()
            / residual_window_bound(1.0, 1e3, 1.0, 0.1, 20).unwrap();
        assert!((0.2..=0.3).contains(&r), "{r}");
    }

    #[test]
    fn decay_lemma_examples() {
        assert!(decay_lemma_check(&[1.0, 0.5], 0.5).holds());
        assert!(matches!(
            decay_lemma_check(&[1.0, 1.0], 0.5),
            DecayVerdict::RecursionFails { k: 1 }
        ));
        assert!(decay_lemma_check(&[3.0, 2.0, 2.0, 1.0], 0.0).holds());
        assert!(matches!(
            decay_lemma_check(&[4.0, 0.0], 1.0),
            DecayVerdict::StepTooLarge { .. }
        ));
    }

    #[test]
    fn run_from_minimizer() {
        let op = make_quadratic(SymMatrix::identity(2), v(&[0.0, 0.0])).unwrap();
        let run = run_pp(&op, &v(&[0.0, 0.0]), 1.0, 0.1, 50, 1e-10).unwrap();
        assert_eq!(run.status, PpStatus::ZeroGradient);
        assert!(run.iterates.is_empty());
    }

    #[test]
    fn schedule_policy_is_certified() {
        let op = make_quadratic(SymMatrix::identity(1), v(&[0.0])).unwrap();
        let cfg = PpConfig {
            policy: LambdaPolicy::Schedule(vec![2.0, 4.0, 8.0]),
            ..PpConfig::default()
        };
        // Step from 1 with λ = 2: y = 1/3, λ‖Δx‖ = 4/3 ≥ 1.
        let run = run_pp_with(&op, &v(&[1.0]), 1.0, 0.1, 1, 1e-10, &cfg).unwrap();
        assert!((run.iterates[0].x[0] - 1.0 / 3.0).abs() < 1e-15);
        // θ too large for the schedule: the large-step inequality fails.
        let err = run_pp_with(&op, &v(&[1.0]), 10.0, 0.1, 3, 1e-10, &cfg).unwrap_err();
        assert!(matches!(err, Error::CertificateRejected { iteration: 1, .. }));
    }
}
