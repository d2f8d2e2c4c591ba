#![allow(dead_code)]

use lft_recover::matops::{Mat, Vector};
use lft_recover::{InterpSpec, LftPlant, ParamBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random plant with `A_xx` shifted to be Hurwitz and a small `D_zv`, so the
/// loop is well posed on the whole box.
pub fn random_plant(rng: &mut ChaCha8Rng, mx: usize, mtheta: usize) -> LftPlant {
    let mu = rng.random_range(1..=2);
    let my = rng.random_range(1..=2);
    let mv = rng.random_range(1..=2);
    let mz = rng.random_range(1..=2);
    let mut a = gauss_mat(rng, mx, mx);
    a -= Mat::identity(mx, mx) * (a.norm() + 1.0);
    LftPlant {
        a_xx: a,
        b_xu: gauss_mat(rng, mx, mu),
        b_xv: gauss_mat(rng, mx, mv),
        c_yx: gauss_mat(rng, my, mx),
        c_zx: gauss_mat(rng, mz, mx),
        d_zu: gauss_mat(rng, mz, mu),
        d_zv: gauss_mat(rng, mz, mv) * 0.1,
        d_yu: gauss_mat(rng, my, mu),
        d_yv: gauss_mat(rng, my, mv),
        p0: gauss_mat(rng, mv, mz) * 0.5,
        p_basis: (0..mtheta).map(|_| gauss_mat(rng, mv, mz)).collect(),
        theta_box: ParamBox::new(Vector::from_element(mtheta, -1.0), Vector::from_element(mtheta, 1.0))
            .unwrap(),
    }
}

/// Block-diagonal Ξ of 2×2 rotation blocks (plus one real pole when odd) in the
/// open right half plane, away from the Hurwitz spectrum of the plant.
pub fn random_xi(rng: &mut ChaCha8Rng, mxi: usize, mu: usize) -> InterpSpec {
    let mut xi = Mat::zeros(mxi, mxi);
    let mut k = 0;
    while k + 1 < mxi {
        let s = rng.random_range(0.2..2.0);
        let w = rng.random_range(0.5..3.0);
        xi[(k, k)] = s;
        xi[(k + 1, k + 1)] = s;
        xi[(k, k + 1)] = w;
        xi[(k + 1, k)] = -w;
        k += 2;
    }
    if k < mxi {
        xi[(k, k)] = rng.random_range(0.2..2.0);
    }
    InterpSpec::new(xi, gauss_mat(rng, mu, mxi)).unwrap()
}

pub fn random_theta(rng: &mut ChaCha8Rng, plant: &LftPlant) -> Vector {
    let u: Vec<f64> = (0..plant.m_theta()).map(|_| rng.random::<f64>()).collect();
    plant.theta_box.from_unit(&u)
}

pub fn rel_err(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
