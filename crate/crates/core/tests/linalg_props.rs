mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use proxflow::linalg::{operator_norm_estimate, shifted_residual, shifted_solve, SymMatrix, Vector};
use proxflow::Error;
use rand::Rng;

#[test]
fn shifted_solve_residual_on_random_gram_matrices() {
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.gen_range(1..=50);
        let h = random_gram(&mut r, n);
        let mu = log_uniform(&mut r, -4.0, 2.0);
        let b = random_vector(&mut r, n, 10.0);
        let s = shifted_solve(&h, mu, &b).unwrap();
        let res = shifted_residual(&h, mu, &s, &b);
        let bound = 1e-10 * (b.norm() + 1.0);
        worst = worst.max(res / bound);
        assert!(res <= bound, "n={n} mu={mu:e}: residual {res:e} > {bound:e}");
    }
    assert!(worst <= 1.0);
}

#[test]
fn shifted_solve_rejects_indefinite() {
    let h = SymMatrix::from_diagonal(&[1.0, -5.0]);
    assert!(matches!(
        shifted_solve(&h, 1.0, &vec_of(&[1.0, 1.0])),
        Err(Error::NumericalBreakdown(_))
    ));
}

#[test]
fn operator_norm_matches_eigenvalues() {
    let mut r = rng(12);
    for _ in 0..200 {
        let n = r.gen_range(1..=20);
        let g = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let h = SymMatrix::new(&g + g.transpose()).unwrap();
        let eig = h.eigenvalues();
        let want = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let got = operator_norm_estimate(&h);
        assert!((got - want).abs() <= 1e-6 * want.max(1.0), "{got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solve_is_linear_in_rhs(seed in any::<u64>(), n in 1usize..20, lmu in -3.0f64..2.0) {
        let mut r = rng(seed);
        let h = random_gram(&mut r, n);
        let mu = 10f64.powf(lmu);
        let b = random_vector(&mut r, n, 5.0);
        let s1 = shifted_solve(&h, mu, &b).unwrap();
        let s2 = shifted_solve(&h, mu, &(&b * 2.0)).unwrap();
        let diff = (&s2 - &s1 * 2.0).norm();
        prop_assert!(diff <= 1e-10 * (1.0 + s2.norm()), "diff {diff:e}");
    }

    #[test]
    fn solve_rejects_bad_shift(mu in -10.0f64..=0.0) {
        let h = SymMatrix::identity(2);
        prop_assert!(shifted_solve(&h, mu, &Vector::zeros(2)).is_err());
    }
}
