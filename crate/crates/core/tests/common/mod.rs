#![allow(dead_code)]

use nalgebra::DMatrix;
use proxflow::linalg::{SymMatrix, Vector};
use proxflow::operators::{make_isotropic, make_quadratic, make_rotation, MonotoneOperator};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub const GOLDEN: f64 = 1.618_033_988_749_895;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec_of(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

pub fn random_vector(r: &mut impl Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| r.gen_range(-scale..scale))
}

/// `G Gᵀ` with `G` of size `n × m`, `m` in `1..=n` (so rank deficiency shows up).
pub fn random_gram(r: &mut impl Rng, n: usize) -> SymMatrix {
    let m = r.gen_range(1..=n);
    let g = DMatrix::from_fn(n, m, |_, _| r.gen_range(-1.0..1.0));
    SymMatrix::new(&g * g.transpose()).unwrap()
}

/// `10^u`, `u` uniform in `[lo, hi]`.
pub fn log_uniform(r: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(r.gen_range(lo..hi))
}

/// One of isotropic, rotation or a positive definite quadratic with a random minimizer.
pub fn random_closed_form(r: &mut impl Rng) -> Box<dyn MonotoneOperator> {
    match r.gen_range(0..3) {
        0 => {
            let n = r.gen_range(1..=5);
            Box::new(make_isotropic(log_uniform(r, -1.0, 1.0), n).unwrap())
        }
        1 => Box::new(make_rotation()),
        _ => {
            let n = r.gen_range(1..=5);
            let g = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
            let q = SymMatrix::new(&g * g.transpose() + DMatrix::identity(n, n) * 0.1).unwrap();
            let b = random_vector(r, n, 1.0);
            Box::new(make_quadratic(q, b).unwrap())
        }
    }
}

/// Smooth strongly convex quadratic with `Q ≽ 0.1 I` in dimension `n`.
pub fn random_pd_quadratic(r: &mut impl Rng, n: usize) -> proxflow::operators::Quadratic {
    let g = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
    let q = SymMatrix::new(&g * g.transpose() + DMatrix::identity(n, n) * 0.1).unwrap();
    make_quadratic(q, random_vector(r, n, 1.0)).unwrap()
}
