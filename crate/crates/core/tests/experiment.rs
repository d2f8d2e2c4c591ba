mod common;

use lft_recover::experiment::{
    bin_table, build_example_plant, design_metric, draw_eps, log_grid, perturb, run_monte_carlo,
    search_omegas, sort_by_eps_norm, xi_derivative, ExamplePlantParams, ExampleSetup, SearchPlan,
    TrialRecord, BIN_EDGES,
};
use lft_recover::matops::Mat;
use lft_recover::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mc(s: &ExampleSetup, n: usize, std: f64, seed: u64) -> Vec<TrialRecord> {
    let d = &s.designs;
    run_monte_carlo(&s.plant, &s.theta_true, &d.spec0, &d.spec1, &s.recovery, n, std, seed).unwrap()
}

#[test]
fn monte_carlo_is_reproducible_across_thread_counts() {
    let s = ExampleSetup::reference();
    let a = mc(&s, 6, 0.17, 11);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| mc(&s, 6, 0.17, 11));
    assert_eq!(a, b);
    let c = mc(&s, 6, 0.17, 12);
    assert_ne!(a[0].eps, c[0].eps);
    for (i, r) in a.iter().enumerate() {
        assert_eq!(r.index, i);
        assert_eq!(r.eps.len(), 4);
    }
}

#[test]
fn noiseless_trials_recover_both_parameters() {
    let s = ExampleSetup::reference();
    for r in mc(&s, 2, 0.0, 3) {
        assert_eq!(r.eps_norm, 0.0);
        for d in 0..2 {
            assert!(!r.failed[d]);
            assert!(r.rel_err_zeta[d] <= 1.0, "{:?}", r.rel_err_zeta);
            assert!(r.rel_err_omega[d] <= 1.0, "{:?}", r.rel_err_omega);
        }
    }
}

#[test]
fn monte_carlo_rejects_bad_input() {
    let s = ExampleSetup::reference();
    let d = &s.designs;
    let run = |n, std| run_monte_carlo(&s.plant, &s.theta_true, &d.spec0, &d.spec1, &s.recovery, n, std, 0);
    assert!(matches!(run(0, 0.1), Err(Error::Invalid { .. })));
    assert!(matches!(run(1, -0.1), Err(Error::Invalid { .. })));
    assert!(matches!(run(1, f64::NAN), Err(Error::Invalid { .. })));
}

fn record(eps_norm: f64, rz: Option<f64>, rw: Option<f64>) -> TrialRecord {
    TrialRecord {
        index: 0,
        eps: vec![],
        eps_norm,
        theta_hat: [vec![], vec![]],
        rel_err_zeta: [0.0; 2],
        rel_err_omega: [0.0; 2],
        r_zeta: rz,
        r_omega: rw,
        converged: [true; 2],
        failed: [false; 2],
    }
}

#[test]
fn bins_are_half_open_with_overflow() {
    let recs = vec![
        record(0.05, Some(0.5), Some(2.0)),
        record(0.19999, Some(1.0), Some(0.9)),
        record(0.20, None, Some(0.1)),
        record(1.00, Some(0.1), Some(0.1)),
        record(0.01, Some(0.1), None),
    ];
    let t = bin_table(&recs, &BIN_EDGES).unwrap();
    assert_eq!(t.bins[0].total, 2);
    assert_eq!(t.bins[0].zeta_better, 1);
    assert_eq!(t.bins[0].omega_better, 1);
    assert_eq!(t.bins[1].total, 1);
    assert_eq!(t.bins[1].zeta_better, 0);
    assert_eq!(t.overflow.total, 2);
    assert_eq!(t.sums().total + t.overflow.total, recs.len());
    assert!(bin_table(&recs, &[0.1]).is_err());
    assert!(bin_table(&recs, &[0.2, 0.1]).is_err());
}

#[test]
fn bin_tally_matches_records() {
    let s = ExampleSetup::reference();
    let recs = mc(&s, 8, 0.17, 5);
    let t = bin_table(&recs, &BIN_EDGES).unwrap();
    let sums = t.sums();
    assert_eq!(sums.total + t.overflow.total, 8);
    let zb = recs.iter().filter(|r| r.r_zeta.is_some_and(|x| x < 1.0)).count();
    assert_eq!(sums.zeta_better + t.overflow.zeta_better, zb);
    let sorted = sort_by_eps_norm(&recs);
    assert!(sorted.windows(2).all(|w| w[0].eps_norm <= w[1].eps_norm));
}

#[test]
fn perturbation_is_entrywise_and_column_major() {
    let g = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let p = perturb(&g, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    assert!((p[(1, 0)] - 3.0 * 1.2).abs() < 1e-15);
    assert!((p[(0, 1)] - 2.0 * 1.3).abs() < 1e-15);
    assert!(matches!(perturb(&g, &[0.1]), Err(Error::DimensionMismatch { .. })));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(draw_eps(&mut rng, 3, 0.0), vec![0.0; 3]);
    let big = draw_eps(&mut rng, 20000, 0.17);
    let var = big.iter().map(|x| x * x).sum::<f64>() / big.len() as f64;
    assert!((var.sqrt() - 0.17).abs() < 0.005);
}

#[test]
fn omega_search_stays_in_interval_and_is_consistent() {
    let s = ExampleSetup::reference();
    let plan = SearchPlan {
        n_samples: 4,
        seed: 9,
        ..SearchPlan::default()
    };
    let r = search_omegas(&s.plant, &s.theta_true, &plan, &s.recovery).unwrap();
    let inside = |w: f64| (4.0..6.0).contains(&w);
    assert!(inside(r.omega1_best));
    assert!(inside(r.omega_pair_best.0) && inside(r.omega_pair_best.1));
    let again = design_metric(
        &s.plant,
        &s.theta_true,
        &xi_derivative(plan.sigma, r.omega1_best),
        &r.eps,
        &s.recovery,
    )
    .unwrap();
    assert_eq!(again, r.metric1_best);
    let bad = SearchPlan {
        interval: (6.0, 4.0),
        ..plan
    };
    assert!(search_omegas(&s.plant, &s.theta_true, &bad, &s.recovery).is_err());
}

#[test]
fn example_parameters_are_validated() {
    let p = ExamplePlantParams {
        r_p1: -1.0,
        ..ExamplePlantParams::default()
    };
    assert!(matches!(build_example_plant(&p), Err(Error::Invalid { .. })));
    let p = ExamplePlantParams {
        omega_p: f64::NAN,
        ..ExamplePlantParams::default()
    };
    assert!(build_example_plant(&p).is_err());
}

#[test]
fn log_grid_spans_endpoints() {
    let g = log_grid(0.1, 100.0, 400);
    assert_eq!(g.len(), 400);
    assert!((g[0] - 0.1).abs() < 1e-15 && (g[399] - 100.0).abs() < 1e-12);
    assert!(((g[1] / g[0]) - (g[399] / g[398])).abs() < 1e-12);
}
