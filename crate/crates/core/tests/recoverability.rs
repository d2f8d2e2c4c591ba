mod common;

use lft_recover::experiment::ExampleSetup;
use lft_recover::matops::{Mat, Vector};
use lft_recover::recoverability::{
    check_recoverability_sampled, corollary1_case1, corollary1_case2, corollary2_necessary,
    theorem1_lhs, SamplingPlan, Theorem1Lhs, Theorem1Setup, Verdict,
};
use lft_recover::Error;
use rand::Rng;

fn plan(n_theta: usize, seed: u64) -> SamplingPlan {
    SamplingPlan {
        n_theta,
        n_phi: 20,
        mu_t: 1e-8,
        seed,
    }
}

#[test]
fn zero_phi_gives_zero_lhs() {
    let s = ExampleSetup::reference();
    let setup = Theorem1Setup::new(&s.plant, &s.theta_true, &s.designs.spec0).unwrap();
    assert_eq!(setup.m_phi(), 4);
    assert!(!setup.phi_free());
    match theorem1_lhs(&s.plant, &s.theta_true, &s.designs.spec0, &Vector::zeros(4)).unwrap() {
        Theorem1Lhs::Value(v) => assert_eq!(v.norm(), 0.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn random_phi_clears_threshold_on_example() {
    let s = ExampleSetup::reference();
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let th = common::random_theta(&mut rng, &s.plant);
        let phi = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        match theorem1_lhs(&s.plant, &th, &s.designs.spec1, &phi).unwrap() {
            Theorem1Lhs::Value(v) => assert!(v.norm_squared() > 1e-8 * phi.norm_squared()),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn outcome_invariant_to_phi_scale() {
    let s = ExampleSetup::reference();
    let mut rng = common::rng(22);
    for _ in 0..20 {
        let th = common::random_theta(&mut rng, &s.plant);
        let setup = Theorem1Setup::new(&s.plant, &th, &s.designs.spec0).unwrap();
        let phi = Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let pass = |p: &Vector| match setup.lhs(p).unwrap() {
            Theorem1Lhs::Value(v) => v.norm_squared() > 1e-8 * p.norm_squared(),
            _ => false,
        };
        let base = pass(&phi);
        for c in [0.5, 2.0, 10.0] {
            assert_eq!(pass(&(&phi * c)), base);
        }
    }
}

#[test]
fn sampled_check_is_deterministic_and_thread_independent() {
    let s = ExampleSetup::reference();
    let p = plan(12, 5);
    let a = check_recoverability_sampled(&s.plant, &s.designs.spec0, &p).unwrap();
    let b = check_recoverability_sampled(&s.plant, &s.designs.spec0, &p).unwrap();
    assert_eq!(a, b);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = pool.install(|| check_recoverability_sampled(&s.plant, &s.designs.spec0, &p).unwrap());
    assert_eq!(a, c);
    assert_eq!(a.verdict, Verdict::RecoverableWhp);
    let other = check_recoverability_sampled(&s.plant, &s.designs.spec0, &plan(12, 6)).unwrap();
    assert_ne!(a.samples[0].theta, other.samples[0].theta);
}

#[test]
fn case1_agrees_with_sampled_when_phi_free() {
    let mut rng = common::rng(23);
    let (mut agree_pass, mut agree_fail) = (0, 0);
    for k in 0..30 {
        let mx = rng.random_range(2..=4);
        let mth = rng.random_range(1..=2);
        let mut plant = common::random_plant(&mut rng, mx, mth);
        plant.d_zv = Mat::zeros(plant.m_z(), plant.m_v());
        let mxi = rng.random_range(1..=mx);
        let spec = common::random_xi(&mut rng, mxi, plant.m_u());
        let v = check_recoverability_sampled(&plant, &spec, &plan(1, k)).unwrap();
        if v.verdict == Verdict::IdentifiabilityFailed {
            continue;
        }
        let sample = &v.samples[0];
        let flag = corollary1_case1(&plant, &sample.theta, &spec).unwrap();
        assert_eq!(flag, sample.passed, "plant {k}");
        if flag {
            agree_pass += 1;
        } else {
            agree_fail += 1;
        }
    }
    assert!(agree_pass + agree_fail >= 20);
}

#[test]
fn case1_needs_phi_free_bracket() {
    let s = ExampleSetup::reference();
    assert!(matches!(
        corollary1_case1(&s.plant, &s.theta_true, &s.designs.spec0),
        Err(Error::InapplicableCase(_))
    ));
}

#[test]
fn case2_inapplicable_on_example() {
    // the second row of C_zx is zero, so C_zx X + D_zu Π never has full row rank
    let s = ExampleSetup::reference();
    assert!(matches!(
        corollary1_case2(&s.plant, &s.theta_true, &s.designs.spec0),
        Err(Error::InapplicableCase(_))
    ));
}

#[test]
fn case2_with_square_psi_reduces_to_top_block() {
    let mut rng = common::rng(24);
    for _ in 0..10 {
        let mut plant = common::random_plant(&mut rng, 3, 1);
        // m_v = m_z = 1 and one parameter: Ψ is 1×1 and invertible
        plant.b_xv = common::gauss_mat(&mut rng, 3, 1);
        plant.d_yv = Mat::zeros(plant.m_y(), 1);
        plant.c_zx = common::gauss_mat(&mut rng, 1, 3);
        plant.d_zu = Mat::zeros(1, plant.m_u());
        plant.d_zv = Mat::from_element(1, 1, 0.05);
        plant.p0 = Mat::zeros(1, 1);
        plant.p_basis = vec![Mat::from_element(1, 1, 1.0)];
        let spec = common::random_xi(&mut rng, 2, plant.m_u());
        let th = common::random_theta(&mut rng, &plant);
        // the top block I ⊗ [B_xv; D_yv] has full column rank
        assert!(corollary1_case2(&plant, &th, &spec).unwrap());
    }
}

#[test]
fn failing_cond2_implies_sampled_failure() {
    let mut rng = common::rng(25);
    for k in 0..25 {
        let (mx, mth) = (rng.random_range(2..=4), rng.random_range(1..=3));
        let plant = common::random_plant(&mut rng, mx, mth);
        let mxi = rng.random_range(1..=plant.m_x());
        let spec = common::random_xi(&mut rng, mxi, plant.m_u());
        let v = check_recoverability_sampled(&plant, &spec, &plan(1, k)).unwrap();
        if v.samples.is_empty() {
            continue;
        }
        let th = &v.samples[0].theta;
        let (_, cond2) = corollary2_necessary(&plant, th, &spec, 20, k).unwrap();
        if !cond2 {
            assert!(!v.samples[0].passed, "plant {k}");
        }
    }
}

#[test]
fn example_meets_necessary_conditions() {
    let s = ExampleSetup::reference();
    for spec in [&s.designs.spec0, &s.designs.spec1] {
        assert_eq!(corollary2_necessary(&s.plant, &s.theta_true, spec, 50, 1).unwrap(), (true, true));
    }
}
