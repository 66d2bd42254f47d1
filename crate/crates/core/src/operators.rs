//! Monotone operators with resolvent oracles.
//!
//! An operator exposes its resolvent `J_λ = (I + λA)^{-1}` and, optionally,
//! a smooth convex potential `f` with `A = ∇f` and a description of its zero set.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{ensure_dim, ensure_finite, shifted_solve, SymMatrix, Vector};

/// Default tolerance for inner resolvent solves.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;

const INNER_MAX_ITER: usize = 100;
const INNER_MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventKind {
    ClosedForm,
    InnerNewton,
}

/// Output of one resolvent evaluation at `(λ, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventResult {
    /// `J_λ x`
    pub y: Vector,
    /// Witness of the inclusion `v ∈ A(y)`.
    pub v: Vector,
    /// `x - y`, computed without cancellation where the operator allows it.
    pub displacement: Vector,
    /// `‖λv + y − x‖`
    pub inner_residual: f64,
    pub epsilon: f64,
}

/// Smooth convex function `f` whose gradient is the operator.
pub trait Potential: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> SymMatrix;
    /// Lipschitz constant of the Hessian as stored on the operator (0 when unset).
    fn hessian_lipschitz(&self) -> f64;
    fn min_value(&self) -> Option<f64>;

    /// `f(x) - inf f`. Implementations override this when the difference can
    /// be evaluated without cancellation.
    fn gap(&self, x: &Vector) -> Option<f64> {
        self.min_value().map(|m| (self.value(x) - m).max(0.0))
    }

    /// Diameter of the sublevel set `{f ≤ f(x0)}` when known analytically.
    fn level_set_diameter(&self, _x0: &Vector) -> Option<f64> {
        None
    }
}

/// Known zero set of an operator.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroSet {
    Point(Vector),
    /// `origin + span(basis)`; the columns of `basis` are orthonormal.
    Affine { origin: Vector, basis: DMatrix<f64> },
}

impl ZeroSet {
    pub fn project(&self, x: &Vector) -> Vector {
        match self {
            ZeroSet::Point(p) => p.clone(),
            ZeroSet::Affine { origin, basis } => {
                let coeffs = basis.transpose() * (x - origin);
                origin + basis * coeffs
            }
        }
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }

    /// A few points of the set, used when checking distance monotonicity.
    pub fn representatives(&self) -> Vec<Vector> {
        match self {
            ZeroSet::Point(p) => vec![p.clone()],
            ZeroSet::Affine { origin, basis } => {
                let mut out = vec![origin.clone()];
                for j in 0..basis.ncols() {
                    let col = basis.column(j).into_owned();
                    out.push(origin + &col);
                    out.push(origin - &col);
                }
                out
            }
        }
    }
}

pub trait MonotoneOperator: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn resolvent_kind(&self) -> ResolventKind;

    /// Raw resolvent evaluation. Callers should go through [`resolvent`],
    /// which validates the arguments.
    fn resolve(&self, lambda: f64, x: &Vector, tol: f64) -> Result<ResolventResult>;

    fn potential(&self) -> Option<&dyn Potential> {
        None
    }

    fn zero_set(&self) -> Option<ZeroSet> {
        None
    }

    fn known_min_value(&self) -> Option<f64> {
        self.potential().and_then(|p| p.min_value())
    }
}

/// `J_λ x` together with the inclusion witness.
pub fn resolvent(
    op: &dyn MonotoneOperator,
    lambda: f64,
    x: &Vector,
    tol: f64,
) -> Result<ResolventResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::BadLambda(lambda));
    }
    ensure_dim(x, op.dim())?;
    ensure_finite(x, "x")?;
    op.resolve(lambda, x, tol)
}

/// Yosida approximation `A_λ x = (x − J_λ x)/λ`.
pub fn yosida(op: &dyn MonotoneOperator, lambda: f64, x: &Vector, tol: f64) -> Result<Vector> {
    let r = resolvent(op, lambda, x, tol)?;
    Ok(r.displacement / lambda)
}

fn closed_form_result(x: &Vector, lambda: f64, displacement: Vector) -> ResolventResult {
    let y = x - &displacement;
    let v = &displacement / lambda;
    ResolventResult {
        y,
        v,
        displacement,
        inner_residual: 0.0,
        epsilon: 0.0,
    }
}

/// Damped Newton on `d ↦ λ∇f(x − d) − d`, returning `y = x − d` and `v = ∇f(y)`.
///
/// Iterating on the displacement keeps `x − y` accurate when `λ` is small.
pub fn inner_newton_resolvent(
    p: &dyn Potential,
    lambda: f64,
    x: &Vector,
    tol: f64,
) -> Result<ResolventResult> {
    let tol = if tol > 0.0 { tol } else { DEFAULT_INNER_TOL };
    let residual = |d: &Vector| -> (Vector, Vector) {
        let y = x - d;
        let g = p.gradient(&y);
        let r = &g * lambda - d;
        (r, g)
    };

    let mut d = Vector::zeros(x.len());
    let (mut r, mut g) = residual(&d);
    let mut rn = r.norm();
    for _ in 0..=INNER_MAX_ITER {
        if rn <= tol * d.norm().max(1.0) {
            let y = x - &d;
            return Ok(ResolventResult {
                y,
                v: g,
                displacement: d,
                inner_residual: rn,
                epsilon: 0.0,
            });
        }
        let y = x - &d;
        let h = p.hessian(&y);
        let delta = shifted_solve(&h, 1.0 / lambda, &(&r / lambda))?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=INNER_MAX_HALVINGS {
            let trial = &d + &delta * step;
            let (rt, gt) = residual(&trial);
            let rtn = rt.norm();
            if rtn < rn {
                d = trial;
                r = rt;
                g = gt;
                rn = rtn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Stagnation at the rounding floor of the residual evaluation is
            // accepted; anything above it is a genuine failure.
            let scale = lambda * (g.norm() + h.as_matrix().norm() * (x.norm() + d.norm()));
            let floor = 64.0 * f64::EPSILON * (scale + d.norm() + x.norm());
            if rn <= floor {
                return Ok(ResolventResult {
                    y: x - &d,
                    v: g,
                    displacement: d,
                    inner_residual: rn,
                    epsilon: 0.0,
                });
            }
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: INNER_MAX_ITER,
        context: "inner Newton resolvent",
    })
}

// ---------------------------------------------------------------------------

/// `A = αI`, the gradient of `(α/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct Isotropic {
    alpha: f64,
    dim: usize,
    hessian_lipschitz: f64,
}

pub fn make_isotropic(alpha: f64, dim: usize) -> Result<Isotropic> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    Ok(Isotropic {
        alpha,
        dim,
        hessian_lipschitz: 0.0,
    })
}

impl Isotropic {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_hessian_lipschitz(mut self, l: f64) -> Self {
        self.hessian_lipschitz = l;
        self
    }
}

impl MonotoneOperator for Isotropic {
    fn name(&self) -> &str {
        "isotropic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn resolvent_kind(&self) -> ResolventKind {
        ResolventKind::ClosedForm
    }
    fn resolve(&self, lambda: f64, x: &Vector, _tol: f64) -> Result<ResolventResult> {
        let la = lambda * self.alpha;
        let d = x * (la / (1.0 + la));
        Ok(closed_form_result(x, lambda, d))
    }
    fn potential(&self) -> Option<&dyn Potential> {
        Some(self)
    }
    fn zero_set(&self) -> Option<ZeroSet> {
        Some(ZeroSet::Point(Vector::zeros(self.dim)))
    }
}

impl Potential for Isotropic {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.alpha * x.norm_squared()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        x * self.alpha
    }
    fn hessian(&self, _x: &Vector) -> SymMatrix {
        SymMatrix::scaled_identity(self.dim, self.alpha)
    }
    fn hessian_lipschitz(&self) -> f64 {
        self.hessian_lipschitz
    }
    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }
    fn gap(&self, x: &Vector) -> Option<f64> {
        Some(self.value(x))
    }
    fn level_set_diameter(&self, x0: &Vector) -> Option<f64> {
        Some(2.0 * x0.norm())
    }
}

// ---------------------------------------------------------------------------

/// Rotation by a right angle in the plane: `A(ξ, η) = (−η, ξ)`.
#[derive(Debug, Clone, Default)]
pub struct Rotation;

pub fn make_rotation() -> Rotation {
    Rotation
}

impl Rotation {
    /// Closed-form resolvent, valid for every `λ ≥ 0` (`λ = 0` gives `x`).
    pub fn resolvent_map(lambda: f64, x: &Vector) -> Vector {
        let (xi, eta) = (x[0], x[1]);
        let den = 1.0 + lambda * lambda;
        Vector::from_column_slice(&[(xi + lambda * eta) / den, (eta - lambda * xi) / den])
    }
}

impl MonotoneOperator for Rotation {
    fn name(&self) -> &str {
        "rotation"
    }
    fn dim(&self) -> usize {
        2
    }
    fn resolvent_kind(&self) -> ResolventKind {
        ResolventKind::ClosedForm
    }
    fn resolve(&self, lambda: f64, x: &Vector, _tol: f64) -> Result<ResolventResult> {
        let (xi, eta) = (x[0], x[1]);
        let den = 1.0 + lambda * lambda;
        let d = Vector::from_column_slice(&[
            lambda * (lambda * xi - eta) / den,
            lambda * (lambda * eta + xi) / den,
        ]);
        Ok(closed_form_result(x, lambda, d))
    }
    fn zero_set(&self) -> Option<ZeroSet> {
        Some(ZeroSet::Point(Vector::zeros(2)))
    }
}

// ---------------------------------------------------------------------------

/// Gradient of `f(x) = ½xᵀQx + bᵀx` with `Q` PSD.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: SymMatrix,
    b: Vector,
    hessian_lipschitz: f64,
    lambda_min: f64,
    zero_set: Option<ZeroSet>,
    min_value: Option<f64>,
}

/// Eigenvalues below this fraction of the spectral radius count as zero.
const RANK_TOL: f64 = 1e-12;

pub fn make_quadratic(q: SymMatrix, b: Vector) -> Result<Quadratic> {
    let n = q.dim();
    ensure_dim(&b, n)?;
    ensure_finite(&b, "b")?;
    if !q.is_psd() {
        return Err(Error::InvalidArgument("Q must be positive semidefinite".into()));
    }
    let eig = SymmetricEigen::new(q.as_matrix().clone());
    let radius = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = RANK_TOL * radius.max(f64::MIN_POSITIVE);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);

    // Pseudo-inverse solution of Qx = -b and the null space of Q.
    let mut origin = Vector::zeros(n);
    let mut b_range = Vector::zeros(n);
    let mut null_cols = Vec::new();
    for j in 0..n {
        let u = eig.eigenvectors.column(j).into_owned();
        let ev = eig.eigenvalues[j];
        let c = u.dot(&b);
        if ev > cut {
            origin -= &u * (c / ev);
            b_range += &u * c;
        } else {
            null_cols.push(u);
        }
    }
    let b_in_range = (&b - &b_range).norm() <= 1e-10 * (1.0 + b.norm());
    let (zero_set, min_value) = if !b_in_range {
        (None, None)
    } else {
        let fmin = 0.5 * b.dot(&origin);
        let set = if null_cols.is_empty() {
            ZeroSet::Point(origin)
        } else {
            ZeroSet::Affine {
                origin,
                basis: DMatrix::from_columns(&null_cols),
            }
        };
        (Some(set), Some(fmin))
    };
    Ok(Quadratic {
        q,
        b,
        hessian_lipschitz: 0.0,
        lambda_min,
        zero_set,
        min_value,
    })
}

impl Quadratic {
    pub fn with_hessian_lipschitz(mut self, l: f64) -> Self {
        self.hessian_lipschitz = l;
        self
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }
}

impl MonotoneOperator for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.q.dim()
    }
    fn resolvent_kind(&self) -> ResolventKind {
        ResolventKind::ClosedForm
    }
    fn resolve(&self, lambda: f64, x: &Vector, _tol: f64) -> Result<ResolventResult> {
        // (I + λQ)(x − y) = λ(Qx + b)
        let g = self.gradient(x);
        let d = shifted_solve(&self.q, 1.0 / lambda, &g)?;
        Ok(closed_form_result(x, lambda, d))
    }
    fn potential(&self) -> Option<&dyn Potential> {
        Some(self)
    }
    fn zero_set(&self) -> Option<ZeroSet> {
        self.zero_set.clone()
    }
}

impl Potential for Quadratic {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.q.mul_vec(x)) + self.b.dot(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.q.mul_vec(x) + &self.b
    }
    fn hessian(&self, _x: &Vector) -> SymMatrix {
        self.q.clone()
    }
    fn hessian_lipschitz(&self) -> f64 {
        self.hessian_lipschitz
    }
    fn min_value(&self) -> Option<f64> {
        self.min_value
    }
    fn gap(&self, x: &Vector) -> Option<f64> {
        let zs = self.zero_set.as_ref()?;
        let e = x - zs.project(x);
        Some((0.5 * e.dot(&self.q.mul_vec(&e))).max(0.0))
    }
    fn level_set_diameter(&self, x0: &Vector) -> Option<f64> {
        if self.lambda_min > 0.0 && matches!(self.zero_set, Some(ZeroSet::Point(_))) {
            let gap = self.gap(x0)?;
            Some(2.0 * (2.0 * gap / self.lambda_min).sqrt())
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------

/// `f(x) = ln(1 + eˣ) − x/2` on the real line.
#[derive(Debug, Clone)]
pub struct Logistic1d {
    hessian_lipschitz: f64,
}

pub fn make_logistic1d() -> Logistic1d {
    Logistic1d {
        hessian_lipschitz: 0.1,
    }
}

impl Logistic1d {
    /// `ln cosh(x/2)`, which equals `f(x) − ln 2`.
    pub fn gap_scalar(x: f64) -> f64 {
        let a = x.abs();
        if a < 20.0 {
            let s = (x / 4.0).sinh();
            (2.0 * s * s).ln_1p()
        } else {
            a / 2.0 + (-a).exp().ln_1p() - std::f64::consts::LN_2
        }
    }

    pub fn grad_scalar(x: f64) -> f64 {
        0.5 * (x / 2.0).tanh()
    }

    pub fn hess_scalar(x: f64) -> f64 {
        let t = (x / 2.0).tanh();
        0.25 * (1.0 - t * t)
    }

    pub fn with_hessian_lipschitz(mut self, l: f64) -> Self {
        self.hessian_lipschitz = l;
        self
    }
}

impl MonotoneOperator for Logistic1d {
    fn name(&self) -> &str {
        "logistic1d"
    }
    fn dim(&self) -> usize {
        1
    }
    fn resolvent_kind(&self) -> ResolventKind {
        ResolventKind::InnerNewton
    }
    fn resolve(&self, lambda: f64, x: &Vector, tol: f64) -> Result<ResolventResult> {
        inner_newton_resolvent(self, lambda, x, tol)
    }
    fn potential(&self) -> Option<&dyn Potential> {
        Some(self)
    }
    fn zero_set(&self) -> Option<ZeroSet> {
        Some(ZeroSet::Point(Vector::zeros(1)))
    }
}

impl Potential for Logistic1d {
    fn value(&self, x: &Vector) -> f64 {
        std::f64::consts::LN_2 + Self::gap_scalar(x[0])
    }
    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_element(1, Self::grad_scalar(x[0]))
    }
    fn hessian(&self, x: &Vector) -> SymMatrix {
        SymMatrix::from_diagonal(&[Self::hess_scalar(x[0])])
    }
    fn hessian_lipschitz(&self) -> f64 {
        self.hessian_lipschitz
    }
    fn min_value(&self) -> Option<f64> {
        Some(std::f64::consts::LN_2)
    }
    fn gap(&self, x: &Vector) -> Option<f64> {
        Some(Self::gap_scalar(x[0]))
    }
    fn level_set_diameter(&self, x0: &Vector) -> Option<f64> {
        // f is even and increasing in |x|
        Some(2.0 * x0[0].abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn isotropic_examples() {
        let op = make_isotropic(1.0, 2).unwrap();
        let r = resolvent(&op, 1.0, &v(&[2.0, 0.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[1.0, 0.0]), 1e-15));
        assert!(close(&r.v, &v(&[1.0, 0.0]), 1e-15));
        assert_eq!(r.inner_residual, 0.0);

        let r = resolvent(&op, 3.7, &v(&[0.0, 0.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[0.0, 0.0]), 0.0));

        let op = make_isotropic(2.0, 1).unwrap();
        let r = resolvent(&op, 0.5, &v(&[4.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[2.0]), 1e-15));
    }

    #[test]
    fn rotation_examples() {
        let op = make_rotation();
        let r = resolvent(&op, 1.0, &v(&[1.0, 0.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[0.5, -0.5]), 1e-15));
        let r = resolvent(&op, 2.0, &v(&[0.0, 5.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[2.0, 1.0]), 1e-14));
        assert_eq!(Rotation::resolvent_map(0.0, &v(&[0.3, -0.7])), v(&[0.3, -0.7]));
        // v = A(y)
        assert!(close(&r.v, &v(&[-r.y[1], r.y[0]]), 1e-14));
    }

    #[test]
    fn quadratic_examples() {
        let op = make_quadratic(SymMatrix::identity(2), v(&[0.0, 0.0])).unwrap();
        let r = resolvent(&op, 1.0, &v(&[2.0, 2.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[1.0, 1.0]), 1e-15));

        let op = make_quadratic(SymMatrix::from_diagonal(&[1.0, 0.0]), v(&[0.0, 0.0])).unwrap();
        let r = resolvent(&op, 3.0, &v(&[4.0, 4.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[1.0, 4.0]), 1e-15));
        assert!(matches!(op.zero_set(), Some(ZeroSet::Affine { .. })));

        let op = make_quadratic(SymMatrix::zeros(1), v(&[1.0])).unwrap();
        let r = resolvent(&op, 2.0, &v(&[5.0]), 1e-12).unwrap();
        assert!(close(&r.y, &v(&[3.0]), 1e-15));
        assert!(op.zero_set().is_none());
        assert!(op.known_min_value().is_none());
    }

    #[test]
    fn quadratic_minimizer_and_diameter() {
        let q = SymMatrix::from_diagonal(&[2.0, 8.0]);
        let op = make_quadratic(q, v(&[-2.0, 8.0])).unwrap();
        match op.zero_set().unwrap() {
            ZeroSet::Point(p) => assert!(close(&p, &v(&[1.0, -1.0]), 1e-14)),
            _ => panic!("expected a point"),
        }
        // f* = -1 - 4 = -5
        assert!((op.known_min_value().unwrap() + 5.0).abs() < 1e-14);
        let x0 = v(&[2.0, -1.0]);
        let gap = op.gap(&x0).unwrap();
        assert!((gap - 1.0).abs() < 1e-14);
        assert!((op.level_set_diameter(&x0).unwrap() - 2.0 * (2.0f64 / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn logistic_examples() {
        let op = make_logistic1d();
        assert_eq!(op.gradient(&v(&[0.0]))[0], 0.0);
        let sig = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((op.gradient(&v(&[1.0]))[0] - (sig - 0.5)).abs() < 1e-15);
        assert!((op.gradient(&v(&[1.0]))[0] - 0.2311).abs() < 1e-4);
        assert!((op.hessian(&v(&[0.0])).as_matrix()[(0, 0)] - 0.25).abs() < 1e-16);
        assert_eq!(op.known_min_value(), Some(std::f64::consts::LN_2));
        for &x in &[-30.0, -3.0, -0.1, 0.0, 1e-4, 2.0, 19.9, 20.1, 50.0] {
            let direct = (1.0f64 + f64::exp(x)).ln() - x / 2.0 - std::f64::consts::LN_2;
            let g = Logistic1d::gap_scalar(x);
            assert!((g - direct).abs() <= 1e-14 * (1.0 + direct.abs()), "x={x}: {g} vs {direct}");
        }
    }

    fn bisect_logistic_prox(lambda: f64, x: f64) -> f64 {
        // root of λ f'(y) + y − x, increasing in y
        let h = |y: f64| lambda * Logistic1d::grad_scalar(y) + y - x;
        let (mut lo, mut hi) = (x - lambda, x + lambda);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn logistic_inner_newton_matches_bisection() {
        let op = make_logistic1d();
        let r = resolvent(&op, 1.0, &v(&[1.0]), 1e-10).unwrap();
        let y = r.y[0];
        assert!((Logistic1d::grad_scalar(y) + y - 1.0).abs() <= 1e-10);
        assert!((y - bisect_logistic_prox(1.0, 1.0)).abs() <= 1e-10);
        assert_eq!(r.v[0], Logistic1d::grad_scalar(y));
        for &(lam, x) in &[(1e-6, 3.0), (1e3, 5.0), (1e8, -2.0), (0.3, -40.0)] {
            let r = resolvent(&op, lam, &v(&[x]), 1e-12).unwrap();
            assert!((r.y[0] - bisect_logistic_prox(lam, x)).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn known_zero_is_fixed() {
        let ops: Vec<Box<dyn MonotoneOperator>> = vec![
            Box::new(make_isotropic(1.5, 2).unwrap()),
            Box::new(make_rotation()),
            Box::new(make_logistic1d()),
        ];
        for op in &ops {
            let z = match op.zero_set().unwrap() {
                ZeroSet::Point(p) => p,
                _ => unreachable!(),
            };
            let r = resolvent(op.as_ref(), 2.5, &z, 1e-12).unwrap();
            assert!(close(&r.y, &z, 0.0));
            assert!(close(&r.v, &Vector::zeros(z.len()), 0.0));
            let a = yosida(op.as_ref(), 2.5, &z, 1e-12).unwrap();
            assert_eq!(a.norm(), 0.0);
        }
    }

    #[test]
    fn resolvent_rejects_bad_lambda() {
        let op = make_rotation();
        for lam in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                resolvent(&op, lam, &v(&[1.0, 0.0]), 1e-12),
                Err(Error::BadLambda(_))
            ));
        }
        assert!(matches!(
            resolvent(&op, 1.0, &v(&[1.0]), 1e-12),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn yosida_example() {
        let op = make_isotropic(1.0, 2).unwrap();
        let a = yosida(&op, 1.0, &v(&[2.0, 0.0]), 1e-12).unwrap();
        assert!(close(&a, &v(&[1.0, 0.0]), 1e-15));
    }
}
