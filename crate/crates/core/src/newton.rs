//! Proximal-Newton method: one Newton step on `λ∇f(y) + y − x = 0` per
//! iteration, with `λ` chosen so that `λ‖s(λ)‖` lands in `[2σℓ/L, 2σu/L]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{ensure_dim, ensure_finite, operator_norm_estimate, shifted_solve, Vector};
use crate::lambda::{solve_lambda, LambdaOptions};
use crate::operators::{make_quadratic, MonotoneOperator, Potential, Quadratic, ZeroSet};
use crate::pp::complexity_bounds;

const MAX_BISECTIONS: usize = 200;

/// `s = −(∇²f(x) + λ⁻¹I)⁻¹∇f(x)`
pub fn newton_step(p: &dyn Potential, x: &Vector, lambda: f64) -> Result<Vector> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::BadLambda(lambda));
    }
    ensure_finite(x, "x")?;
    let g = p.gradient(x);
    if g.norm() == 0.0 {
        return Ok(Vector::zeros(x.len()));
    }
    let h = p.hessian(x);
    Ok(-shifted_solve(&h, 1.0 / lambda, &g)?)
}

/// One evaluation of the band map during the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandProbe {
    pub lambda: f64,
    pub step_norm: f64,
    pub band_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub step: Vector,
    /// `λ‖s(λ)‖`
    pub band_value: f64,
    /// Outer bracket `[√((2σℓ/L)/‖g‖), (‖H‖σu/L + √((‖H‖σu/L)² + 2‖g‖σu/L))/‖g‖]`.
    pub outer_lo: f64,
    pub outer_hi: f64,
    pub grad_norm: f64,
    pub hessian_norm: f64,
    pub probes: Vec<BandProbe>,
}

impl LambdaSelection {
    /// Probes after the first one.
    pub fn bisection_count(&self) -> usize {
        self.probes.len().saturating_sub(1)
    }
}

fn validate_band(sigma_l: f64, sigma_u: f64, l: f64) -> Result<()> {
    if !(0.0 < sigma_l && sigma_l < sigma_u && sigma_u < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < sigma_l < sigma_u < 1, got ({sigma_l}, {sigma_u})"
        )));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!("L must be positive, got {l}")));
    }
    Ok(())
}

/// Quadratic model `m(y) = ⟨g, y − x⟩ + ½⟨H(y − x), y − x⟩` of `f` at `x`.
/// Its `φ(λ, x)` is the band value `λ‖s(λ)‖`.
pub fn local_model(p: &dyn Potential, x: &Vector) -> Result<Quadratic> {
    let h = p.hessian(x);
    let b = p.gradient(x) - h.mul_vec(x);
    make_quadratic(h, b)
}

/// `[λℓ, λu]` on which the band value runs over `[2σℓ/L, 2σu/L]`, each end
/// solved to `rel_tol`.
pub fn band_interval(
    p: &dyn Potential,
    x: &Vector,
    sigma_l: f64,
    sigma_u: f64,
    l: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    validate_band(sigma_l, sigma_u, l)?;
    let model = local_model(p, x)?;
    let opts = LambdaOptions::for_operator(&model).with_rel_tol(rel_tol);
    let lo = solve_lambda(&model, 2.0 * sigma_l / l, x, &opts)?;
    let warm = lo.lambda * (sigma_u / sigma_l).sqrt();
    let hi = solve_lambda(&model, 2.0 * sigma_u / l, x, &opts.with_warm_start(warm))?;
    Ok((lo.lambda, hi.lambda))
}

/// Log-λ bisection for `2σℓ/L ≤ λ‖s(λ)‖ ≤ 2σu/L`; returns the first λ in band.
pub fn select_lambda(
    p: &dyn Potential,
    x: &Vector,
    sigma_l: f64,
    sigma_u: f64,
    l: f64,
) -> Result<LambdaSelection> {
    select_lambda_with(p, x, sigma_l, sigma_u, l, None)
}

pub fn select_lambda_with(
    p: &dyn Potential,
    x: &Vector,
    sigma_l: f64,
    sigma_u: f64,
    l: f64,
    warm: Option<f64>,
) -> Result<LambdaSelection> {
    validate_band(sigma_l, sigma_u, l)?;
    ensure_finite(x, "x")?;
    let g = p.gradient(x);
    let gn = g.norm();
    if gn == 0.0 || !gn.is_finite() {
        return Err(Error::ZeroGradient(gn));
    }
    let h = p.hessian(x);
    let hn = operator_norm_estimate(&h);
    let (t_lo, t_hi) = (2.0 * sigma_l / l, 2.0 * sigma_u / l);
    let outer_lo = (t_lo / gn).sqrt();
    let a = hn * sigma_u / l;
    let outer_hi = (a + (a * a + 2.0 * gn * sigma_u / l).sqrt()) / gn;

    // Slightly widened so the search bracket survives the error in ‖H‖.
    let (mut lo, mut hi) = ((outer_lo * (1.0 - 1e-6)).ln(), (outer_hi * (1.0 + 1e-6)).ln());
    let mut s_ln = match warm {
        Some(w) if w > 0.0 && w.is_finite() => w.ln().clamp(lo, hi),
        _ => 0.5 * (lo + hi),
    };
    let mut probes = Vec::new();
    for _ in 0..=MAX_BISECTIONS {
        let lambda = s_ln.exp();
        let step = -shifted_solve(&h, 1.0 / lambda, &g)?;
        let sn = step.norm();
        let band_value = lambda * sn;
        probes.push(BandProbe {
            lambda,
            step_norm: sn,
            band_value,
        });
        if band_value < t_lo {
            lo = s_ln;
        } else if band_value > t_hi {
            hi = s_ln;
        } else {
            return Ok(LambdaSelection {
                lambda,
                step,
                band_value,
                outer_lo,
                outer_hi,
                grad_norm: gn,
                hessian_norm: hn,
                probes,
            });
        }
        s_ln = 0.5 * (lo + hi);
    }
    Err(Error::NoConvergence {
        iterations: MAX_BISECTIONS,
        context: "lambda band search",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStatus {
    Converged,
    MaxIter,
    ZeroGradient,
}

/// Checks that the iteration is an instance of the large-step proximal point
/// method with `σ = σu`, `θ = 2σℓ/L`, `v_k = ∇f(x_k)`, `ε_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    /// `σ‖Δx‖ − ‖λv + Δx‖`
    pub a_slack: f64,
    /// Rounding error of `λ∇f(x_k)` as evaluated in floating point; `a_slack`
    /// may dip this far below zero once the iterates sit near the minimizer.
    pub a_rounding: f64,
    /// `λ‖Δx‖ − θ`
    pub b_slack: f64,
    /// `λ_k − √(σℓ/((1+σu)σu)) λ_{k−1}`; absent at `k = 1`.
    pub c_slack: Option<f64>,
}

impl EmbeddingCheck {
    pub fn passed(&self) -> bool {
        self.a_slack + self.a_rounding >= 0.0 && self.b_slack >= 0.0 && self.c_slack.is_none_or(|c| c >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonIterate {
    pub k: usize,
    /// `x_k`
    pub x: Vector,
    /// `‖∇f(x_k)‖`
    pub grad_norm: f64,
    pub lambda: f64,
    /// `s_k = x_k − x_{k−1}`
    pub step: Vector,
    pub band_value: f64,
    /// `‖∇²f(x_{k−1})‖`
    pub hessian_norm: f64,
    pub fx: f64,
    pub gap: Option<f64>,
    pub bisection_count: usize,
    /// Every band probe of the search satisfied
    /// `λ‖g‖/(λ‖H‖ + 1) ≤ ‖s‖ ≤ λ‖g‖` to rounding.
    pub step_sandwich_ok: bool,
    pub embedding: EmbeddingCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRun {
    pub x0: Vector,
    pub f0: f64,
    pub gap0: Option<f64>,
    pub iterates: Vec<NewtonIterate>,
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub l: f64,
    pub status: NewtonStatus,
    /// `‖x_k − x*‖/‖x_{k−1} − x*‖²`, when `x*` is known and the divisor is nonzero.
    pub quad_ratios: Vec<Option<f64>>,
    /// `(M′L/2)[1 + (1/σℓ)(1 + (M′L/2)‖x_{k−1} − x*‖)²]` with `M′ = 2‖∇²f(x*)⁻¹‖`.
    pub quad_constants: Vec<Option<f64>>,
}

impl NewtonRun {
    pub fn final_x(&self) -> &Vector {
        self.iterates.last().map_or(&self.x0, |it| &it.x)
    }

    pub fn theta(&self) -> f64 {
        2.0 * self.sigma_l / self.l
    }

    pub fn band_violation(&self) -> f64 {
        let (lo, hi) = (2.0 * self.sigma_l / self.l, 2.0 * self.sigma_u / self.l);
        self.iterates
            .iter()
            .map(|it| ((lo - it.band_value) / lo).max((it.band_value - hi) / hi))
            .fold(0.0f64, f64::max)
    }

    pub fn embedding_violation(&self) -> f64 {
        self.iterates
            .iter()
            .map(|it| {
                let e = &it.embedding;
                (-e.a_slack - e.a_rounding).max(-e.b_slack).max(-e.c_slack.unwrap_or(0.0))
            })
            .fold(0.0f64, f64::max)
    }

    /// Compares the observed iteration counts with `K` and `2⌈J⌉` for tolerance `eps`.
    pub fn complexity_check(&self, d0: f64, eps: f64) -> Option<ComplexityCheck> {
        let gap0 = self.gap0?;
        let (k_bound, j_bound) = iteration_bounds(gap0, self.sigma_l, self.sigma_u, self.l, d0, eps);
        let first_gap = self
            .iterates
            .iter()
            .find(|it| it.gap.is_some_and(|g| g <= eps))
            .map(|it| it.k);
        let first_grad = self.iterates.iter().find(|it| it.grad_norm <= eps).map(|it| it.k);
        Some(ComplexityCheck {
            k_bound,
            j_bound,
            first_gap_below: first_gap,
            first_grad_below: first_grad,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityCheck {
    pub k_bound: f64,
    pub j_bound: f64,
    pub first_gap_below: Option<usize>,
    pub first_grad_below: Option<usize>,
}

impl ComplexityCheck {
    pub fn holds(&self) -> bool {
        let gap_ok = self.first_gap_below.is_some_and(|k| k as f64 <= self.k_bound.max(0.0).ceil());
        let grad_ok = self
            .first_grad_below
            .is_some_and(|j| j as f64 <= 2.0 * self.j_bound.ceil());
        gap_ok && grad_ok
    }
}

/// `(K, J)` for the proximal-Newton method with `θ = 2σℓ/L` and `σ = σu`.
pub fn iteration_bounds(f0_gap: f64, sigma_l: f64, sigma_u: f64, l: f64, d0: f64, eps: f64) -> (f64, f64) {
    complexity_bounds(f0_gap, 2.0 * sigma_l / l, sigma_u, d0, eps)
}

pub fn run_prox_newton(
    op: &dyn MonotoneOperator,
    x0: &Vector,
    sigma_l: f64,
    sigma_u: f64,
    l: f64,
    grad_tol: f64,
    max_iter: usize,
) -> Result<NewtonRun> {
    let p = op.potential().ok_or(Error::MissingCapability("potential"))?;
    validate_band(sigma_l, sigma_u, l)?;
    ensure_dim(x0, op.dim())?;
    ensure_finite(x0, "x0")?;
    let f0 = p.value(x0);
    if !f0.is_finite() {
        return Err(Error::InvalidArgument("f(x0) is not finite".into()));
    }
    let theta = 2.0 * sigma_l / l;
    let c_factor = (sigma_l / ((1.0 + sigma_u) * sigma_u)).sqrt();

    let mut iterates: Vec<NewtonIterate> = Vec::new();
    let mut status = NewtonStatus::MaxIter;
    let mut x = x0.clone();
    let mut prev_lambda: Option<f64> = None;
    if p.gradient(x0).norm() <= grad_tol {
        status = NewtonStatus::ZeroGradient;
    } else {
        for k in 1..=max_iter {
            let sel = match select_lambda_with(p, &x, sigma_l, sigma_u, l, prev_lambda) {
                Ok(s) => s,
                Err(Error::ZeroGradient(_)) => {
                    status = NewtonStatus::Converged;
                    break;
                }
                Err(e) => return Err(e),
            };
            let sandwich_ok = sel.probes.iter().all(|pr| {
                let upper = pr.lambda * sel.grad_norm;
                let lower = upper / (pr.lambda * sel.hessian_norm + 1.0);
                pr.step_norm <= upper * (1.0 + 1e-12) && pr.step_norm >= lower * (1.0 - 1e-6)
            });
            let next = &x + &sel.step;
            let g_next = p.gradient(&next);
            let dn = sel.step.norm();
            let embedding = EmbeddingCheck {
                a_slack: sigma_u * dn - (&g_next * sel.lambda + &sel.step).norm(),
                a_rounding: 64.0
                    * f64::EPSILON
                    * sel.lambda
                    * (sel.hessian_norm * (x.norm() + dn) + sel.grad_norm + g_next.norm()),
                b_slack: sel.lambda * dn - theta,
                c_slack: prev_lambda.map(|pl| sel.lambda - c_factor * pl),
            };
            let gn = g_next.norm();
            let fx = p.value(&next);
            iterates.push(NewtonIterate {
                k,
                x: next.clone(),
                grad_norm: gn,
                lambda: sel.lambda,
                step: sel.step.clone(),
                band_value: sel.band_value,
                hessian_norm: sel.hessian_norm,
                fx,
                gap: p.gap(&next),
                bisection_count: sel.bisection_count(),
                step_sandwich_ok: sandwich_ok,
                embedding,
            });
            prev_lambda = Some(sel.lambda);
            x = next;
            if gn <= grad_tol {
                status = NewtonStatus::Converged;
                break;
            }
        }
    }

    let (quad_ratios, quad_constants) = quadratic_diagnostics(op, p, x0, &iterates, sigma_l, l);
    Ok(NewtonRun {
        x0: x0.clone(),
        f0,
        gap0: p.gap(x0),
        iterates,
        sigma_l,
        sigma_u,
        l,
        status,
        quad_ratios,
        quad_constants,
    })
}

fn quadratic_diagnostics(
    op: &dyn MonotoneOperator,
    p: &dyn Potential,
    x0: &Vector,
    iterates: &[NewtonIterate],
    sigma_l: f64,
    l: f64,
) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let n = iterates.len();
    let x_star = match op.zero_set() {
        Some(ZeroSet::Point(z)) => z,
        _ => return (vec![None; n], vec![None; n]),
    };
    let min_eig = p.hessian(&x_star).min_eigenvalue();
    let m_prime = if min_eig > 0.0 { Some(2.0 / min_eig) } else { None };
    let mut prev_err = (x0 - &x_star).norm();
    let mut ratios = Vec::with_capacity(n);
    let mut consts = Vec::with_capacity(n);
    for it in iterates {
        let err = (&it.x - &x_star).norm();
        ratios.push(if prev_err > 0.0 { Some(err / (prev_err * prev_err)) } else { None });
        consts.push(m_prime.map(|m| {
            let a = m * l / 2.0;
            a * (1.0 + (1.0 + a * prev_err).powi(2) / sigma_l)
        }));
        prev_err = err;
    }
    (ratios, consts)
}

/// Largest sampled `‖∇²f(u) − ∇²f(w)‖/‖u − w‖` over random pairs in the ball
/// of radius `radius` around `x0`, times a safety factor of 2.
pub fn estimate_hessian_lipschitz(
    p: &dyn Potential,
    x0: &Vector,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 || !(radius > 0.0) {
        return Err(Error::InvalidArgument(
            "need at least one sample and a positive radius".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x0.len();
    let draw = |rng: &mut ChaCha8Rng| -> Vector {
        let d = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let scale = radius * rng.gen::<f64>() / d.norm().max(1e-300);
        x0 + d * scale
    };
    let mut best = 0.0f64;
    for _ in 0..samples {
        let u = draw(&mut rng);
        let w = draw(&mut rng);
        let dist = (&u - &w).norm();
        if dist == 0.0 {
            continue;
        }
        let diff = crate::linalg::SymMatrix::new(p.hessian(&u).as_matrix() - p.hessian(&w).as_matrix())?;
        best = best.max(operator_norm_estimate(&diff) / dist);
    }
    Ok(2.0 * best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::operators::{make_logistic1d, make_quadratic};

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn step_examples() {
        let q = make_quadratic(SymMatrix::identity(2), v(&[0.0, 0.0])).unwrap();
        let s = newton_step(&q, &v(&[1.0, 0.0]), 1.0).unwrap();
        assert!((s - v(&[-0.5, 0.0])).amax() < 1e-15);
        assert_eq!(newton_step(&q, &v(&[0.0, 0.0]), 1.0).unwrap(), v(&[0.0, 0.0]));
        let lg = make_logistic1d();
        let x = v(&[1.3]);
        let s = newton_step(&lg, &x, 1e-8).unwrap();
        let g = lg.gradient(&x).norm();
        assert!((s.norm() / 1e-8 - g).abs() <= 1e-4 * g);
        assert!(matches!(newton_step(&lg, &x, 0.0), Err(Error::BadLambda(_))));
    }

    #[test]
    fn select_on_isotropic_quadratic() {
        let q = make_quadratic(SymMatrix::identity(1), v(&[0.0])).unwrap();
        let sel = select_lambda(&q, &v(&[1.0]), 0.25, 0.5, 1.0).unwrap();
        assert!(sel.lambda >= 1.0 - 1e-12 && sel.lambda <= GOLDEN + 1e-12, "{}", sel.lambda);
        assert!(sel.band_value >= 0.5 && sel.band_value <= 1.0);
        // the exact band [1, golden] sits inside the outer bracket
        assert!(sel.outer_lo <= 1.0 + 1e-12 && sel.outer_hi >= GOLDEN - 1e-12);
        assert!(GOLDEN / 1.0 >= (0.5f64 / 0.25).sqrt());
    }

    #[test]
    fn select_residual_guarantee_on_logistic() {
        let lg = make_logistic1d();
        for &x in &[3.0, -1.5, 0.2, 12.0] {
            let x = v(&[x]);
            let sel = select_lambda(&lg, &x, 0.1, 0.5, 0.1).unwrap();
            let y = &x + &sel.step;
            let res = (lg.gradient(&y) * sel.lambda + &y - &x).norm();
            assert!(res <= 0.5 * sel.step.norm(), "x={x}: {res}");
        }
        assert!(matches!(
            select_lambda(&lg, &v(&[0.0]), 0.1, 0.5, 0.1),
            Err(Error::ZeroGradient(_))
        ));
    }

    #[test]
    fn run_from_minimizer() {
        let lg = make_logistic1d();
        let run = run_prox_newton(&lg, &v(&[0.0]), 0.1, 0.5, 0.1, 1e-12, 30).unwrap();
        assert_eq!(run.status, NewtonStatus::ZeroGradient);
        assert!(run.iterates.is_empty());
    }

    #[test]
    fn bounds_limits() {
        let (k, _) = iteration_bounds(1.0, 0.1, 0.5, 0.1, 6.0, 1e300);
        assert!(k < 1e-140);
        let (k, _) = iteration_bounds(0.0, 0.1, 0.5, 0.1, 6.0, 1e-6);
        let kappa0 = (2.0 * 0.1 * 0.5 / (0.1 * 216.0f64)).sqrt();
        assert!((k - 2.0 / (kappa0 * 1e-3)).abs() < 1e-9 * k);
    }

    #[test]
    fn lipschitz_estimate_logistic() {
        let lg = make_logistic1d();
        let est = estimate_hessian_lipschitz(&lg, &v(&[0.0]), 3.0, 200, 7).unwrap();
        // max |f'''| = 1/(6√3)
        let true_l = 1.0 / (6.0 * 3f64.sqrt());
        assert!(est <= 2.0 * true_l * (1.0 + 1e-9) && est >= true_l, "{est}");
    }
}
