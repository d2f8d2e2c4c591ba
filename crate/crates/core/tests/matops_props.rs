use lft_recover::matops::{self, Mat, RankTol};
use proptest::prelude::*;

fn mat(max_r: usize, max_c: usize) -> impl Strategy<Value = Mat> {
    (1..=max_r, 1..=max_c).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c).prop_map(move |v| Mat::from_vec(r, c, v))
    })
}

/// Rank-deficient product of two random factors.
fn low_rank() -> impl Strategy<Value = Mat> {
    (1..=6usize, 1..=6usize, 1..=3usize).prop_flat_map(|(r, c, k)| {
        (
            prop::collection::vec(-2.0f64..2.0, r * k),
            prop::collection::vec(-2.0f64..2.0, k * c),
        )
            .prop_map(move |(a, b)| Mat::from_vec(r, k, a) * Mat::from_vec(k, c, b))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn penrose_conditions(m in prop_oneof![mat(6, 6), low_rank()]) {
        let p = matops::pinv(&m, RankTol::AUTO).unwrap();
        let s = m.norm().max(1.0);
        prop_assert!((&m * &p * &m - &m).norm() <= 1e-9 * s);
        prop_assert!((&p * &m * &p - &p).norm() <= 1e-9 * p.norm().max(1.0));
        let mp = &m * &p;
        let pm = &p * &m;
        prop_assert!((&mp - mp.transpose()).norm() <= 1e-9);
        prop_assert!((&pm - pm.transpose()).norm() <= 1e-9);
    }

    #[test]
    fn svd_reconstructs(m in prop_oneof![mat(7, 7), low_rank()]) {
        let d = matops::svd(&m).unwrap();
        let back = &d.u * Mat::from_diagonal(&d.s) * &d.v_t;
        prop_assert!((back - &m).norm() <= 1e-12 * m.norm().max(1.0));
        prop_assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn null_bases_complement_rank(m in prop_oneof![mat(6, 6), low_rank()]) {
        let rk = matops::rank(&m, RankTol::AUTO).unwrap();
        let n = matops::right_null_basis(&m, RankTol::AUTO).unwrap();
        prop_assert_eq!(n.ncols() + rk, m.ncols());
        if n.ncols() > 0 {
            prop_assert!((n.transpose() * &n - Mat::identity(n.ncols(), n.ncols())).norm() <= 1e-10);
            prop_assert!((&m * &n).norm() <= 1e-10 * m.norm().max(1.0));
        }
        let l = matops::left_null_basis(&m, RankTol::AUTO).unwrap();
        prop_assert_eq!(l.nrows() + rk, m.nrows());
        // duality through projectors
        let lt = matops::right_null_basis(&m.transpose(), RankTol::AUTO).unwrap();
        let pl = matops::projector(&l.transpose());
        let pr = matops::projector(&lt);
        prop_assert!((pl - pr).norm() <= 1e-9);
    }

    #[test]
    fn vec_kron_identity(a in mat(4, 4), x_seed in mat(4, 4), b in mat(4, 4)) {
        // reshape the seed so the product is conformable
        let x = Mat::from_fn(a.ncols(), b.nrows(), |i, j| x_seed[(i % x_seed.nrows(), j % x_seed.ncols())]);
        let lhs = matops::vec(&(&a * &x * &b));
        let rhs = matops::kron(&b.transpose(), &a).unwrap() * matops::vec(&x);
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        prop_assert_eq!(matops::unvec(&matops::vec(&x), x.nrows(), x.ncols()), x);
    }

    #[test]
    fn sylvester_residual(a in mat(5, 5), xi in mat(4, 4), seed in mat(5, 4)) {
        let n = a.nrows().min(a.ncols());
        let m = xi.nrows().min(xi.ncols());
        let mut a = a.view((0, 0), (n, n)).into_owned();
        let mut xi = xi.view((0, 0), (m, m)).into_owned();
        // separate the spectra
        a -= Mat::identity(n, n) * (a.norm() + 1.0);
        xi += Mat::identity(m, m) * (xi.norm() + 1.0);
        let rhs = Mat::from_fn(n, m, |i, j| seed[(i % seed.nrows(), j % seed.ncols())]);
        let x = matops::solve_sylvester(&a, &xi, &rhs).unwrap();
        let res = (&a * &x - &x * &xi + &rhs).norm();
        prop_assert!(res <= 1e-9 * rhs.norm().max(1.0) * (a.norm() + xi.norm()));
    }

    #[test]
    fn general_linear_solution(coeff in low_rank(), z in prop::collection::vec(-1.0f64..1.0, 6)) {
        // a right-hand side in the range is always consistent
        let x0 = Mat::from_fn(coeff.ncols(), 1, |i, _| z[i]);
        let rhs = &coeff * &x0;
        let sol = matops::solve_general_linear(&coeff, &rhs, RankTol::AUTO).unwrap();
        prop_assert!(sol.consistent);
        prop_assert!((&coeff * &sol.particular - rhs.column(0)).norm() <= 1e-9 * rhs.norm().max(1.0));
        if sol.null_basis.ncols() > 0 {
            prop_assert!((&coeff * &sol.null_basis).norm() <= 1e-9 * coeff.norm().max(1.0));
        }
    }
}
