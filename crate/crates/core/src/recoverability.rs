//! Whether θ is pinned down by its RTIM: the Ψ rank condition, the sampled
//! vector-inequality test, and the closed-form rank tests for special cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::{solve_x, InterpSpec};
use crate::matops::{self, Mat, RankTol, Vector};
use crate::plant::{LftPlant, Theta};

/// Resampling budget per θ slot when a draw hits a shared eigenvalue or an
/// ill-posed loop.
const MAX_RESAMPLE: usize = 100;

pub fn check_identifiability(plant: &LftPlant) -> bool {
    matops::rank(&plant.psi_matrix(), RankTol::AUTO).is_ok_and(|r| r == plant.m_theta())
}

/// `[B_xv; D_yv]`.
pub fn v_input(plant: &LftPlant) -> Mat {
    matops::vstack(&[&plant.b_xv, &plant.d_yv])
}

/// The θ-dependent pieces of the inequality test, evaluated once per θ.
#[derive(Debug, Clone)]
pub struct Theorem1Setup {
    pub n_r: Mat,
    /// `C_zx X + D_zu Π`
    pub zx: Mat,
    /// `(I − D_zv P)⁻¹ (C_zx X + D_zu Π)`
    pub k: Mat,
    /// `(Kᵀ ⊗ I) Ψ`
    pub m0: Mat,
    /// `P_i D_zv N_r`
    pub pdn: Vec<Mat>,
    /// `I ⊗ ((I − P D_zv) N_r)`
    pub right: Mat,
    pub p: Mat,
    m_xi: usize,
}

impl Theorem1Setup {
    pub fn new(plant: &LftPlant, theta: &Theta, spec: &InterpSpec) -> Result<Self> {
        let x = solve_x(plant, theta, spec)?;
        let p = plant.eval_p(theta)?;
        let (mv, mz, mxi) = (plant.m_v(), plant.m_z(), spec.m_xi());
        let n_r = matops::right_null_basis(&v_input(plant), RankTol::AUTO)?;
        let zx = &plant.c_zx * &x + &plant.d_zu * &spec.pi;
        let ld = Mat::identity(mz, mz) - &plant.d_zv * &p;
        let k = if mz == 0 {
            zx.clone()
        } else {
            ld.lu().solve(&zx).ok_or_else(|| Error::IllPosed {
                theta: theta.iter().copied().collect(),
            })?
        };
        let m0 = matops::kron(&k.transpose(), &Mat::identity(mv, mv))? * plant.psi_matrix();
        let pdn = plant
            .p_basis
            .iter()
            .map(|pi| pi * &plant.d_zv * &n_r)
            .collect();
        let lr = (Mat::identity(mv, mv) - &p * &plant.d_zv) * &n_r;
        let right = matops::kron(&Mat::identity(mxi, mxi), &lr)?;
        Ok(Theorem1Setup {
            n_r,
            zx,
            k,
            m0,
            pdn,
            right,
            p,
            m_xi: mxi,
        })
    }

    pub fn m_phi(&self) -> usize {
        self.n_r.ncols() * self.m_xi
    }

    /// True when `D_zv N_r = 0`, i.e. the bracketed matrix does not depend on φ.
    pub fn phi_free(&self) -> bool {
        self.pdn.iter().all(|m| m.norm() <= 1e-12 * (1.0 + self.m0.norm()))
    }

    /// `(Kᵀ⊗I)Ψ − row_i[(I ⊗ P_i D_zv N_r) φ]`.
    pub fn bracket(&self, phi: &Vector) -> Result<Mat> {
        if phi.len() != self.m_phi() {
            return Err(Error::dims("phi", (self.m_phi(), 1), (phi.len(), 1)));
        }
        let mut m = self.m0.clone();
        if self.m_phi() == 0 {
            return Ok(m);
        }
        let w = self.n_r.ncols();
        let phi_mat = matops::unvec(phi, w, self.m_xi);
        for (i, pdn) in self.pdn.iter().enumerate() {
            let col = matops::vec(&(pdn * &phi_mat));
            let mut c = m.column_mut(i);
            c -= col;
        }
        Ok(m)
    }

    pub fn lhs(&self, phi: &Vector) -> Result<Theorem1Lhs> {
        if self.m_phi() == 0 {
            return Ok(Theorem1Lhs::NoFreeDirection);
        }
        let m = self.bracket(phi)?;
        let l = matops::left_null_basis(&m, RankTol::AUTO)?;
        if l.nrows() == 0 {
            return Ok(Theorem1Lhs::EmptyLeftNull);
        }
        Ok(Theorem1Lhs::Value(l * &self.right * phi))
    }
}

/// Outcome of evaluating the inequality's left side.
#[derive(Debug, Clone, PartialEq)]
pub enum Theorem1Lhs {
    Value(Vector),
    /// `[B_xv; D_yv]` has full column rank, so φ has no components.
    NoFreeDirection,
    /// The bracketed matrix has full row rank; the left side is empty.
    EmptyLeftNull,
}

pub fn theorem1_lhs(
    plant: &LftPlant,
    theta: &Theta,
    spec: &InterpSpec,
    phi: &Vector,
) -> Result<Theorem1Lhs> {
    Theorem1Setup::new(plant, theta, spec)?.lhs(phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub n_theta: usize,
    pub n_phi: usize,
    pub mu_t: f64,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            n_theta: 50,
            n_phi: 50,
            mu_t: 1e-8,
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta == 0 {
            return Err(Error::invalid("n_theta", "must be at least 1"));
        }
        if self.n_phi == 0 {
            return Err(Error::invalid("n_phi", "must be at least 1"));
        }
        if !(self.mu_t > 0.0) || !self.mu_t.is_finite() {
            return Err(Error::invalid("mu_t", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    RecoverableWhp,
    LocallyRecoverable,
    NotRecoverable,
    IdentifiabilityFailed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::RecoverableWhp => "recoverable_whp",
            Verdict::LocallyRecoverable => "locally_recoverable",
            Verdict::NotRecoverable => "not_recoverable",
            Verdict::IdentifiabilityFailed => "identifiability_failed",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSample {
    pub theta: Theta,
    /// Smallest `‖lhs‖² / ‖φ‖²` seen (0 when a structural check failed).
    pub min_ratio: f64,
    pub passed: bool,
    /// φ draws whose bracketed matrix had full row rank.
    pub empty_left_null: usize,
    /// Draws discarded before this θ was accepted.
    pub resampled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverabilityVerdict {
    pub verdict: Verdict,
    pub failed_thetas: Vec<Theta>,
    pub min_ratio: f64,
    pub samples: Vec<ThetaSample>,
    pub empty_left_null: usize,
    pub resampled: usize,
}

fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_theta(plant: &LftPlant, rng: &mut ChaCha8Rng) -> Theta {
    let u: Vec<f64> = (0..plant.m_theta()).map(|_| rng.random::<f64>()).collect();
    plant.theta_box.from_unit(&u)
}

fn draw_phi(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    if n == 0 {
        return Vector::zeros(0);
    }
    loop {
        let phi = Vector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        if phi.norm() >= 1e-12 {
            return phi;
        }
    }
}

fn sample_one(
    plant: &LftPlant,
    spec: &InterpSpec,
    plan: &SamplingPlan,
    index: usize,
) -> Result<ThetaSample> {
    let mut rng = stream_rng(plan.seed, index as u64);
    let mut resampled = 0;
    let (theta, setup) = loop {
        let theta = draw_theta(plant, &mut rng);
        match Theorem1Setup::new(plant, &theta, spec) {
            Ok(s) => break (theta, s),
            Err(Error::SharedEigenvalue { .. } | Error::IllPosed { .. })
                if resampled < MAX_RESAMPLE =>
            {
                resampled += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let mut out = ThetaSample {
        theta,
        min_ratio: f64::INFINITY,
        passed: true,
        empty_left_null: 0,
        resampled,
    };

    // φ = 0 branch: the θ-direction alone must be detectable.
    if !matops::is_fcr(&setup.m0, RankTol::AUTO)? {
        out.min_ratio = 0.0;
        out.passed = false;
        return Ok(out);
    }
    let m_phi = setup.m_phi();
    if m_phi == 0 {
        return Ok(out);
    }

    if setup.phi_free() {
        // the bracket is constant, so the worst φ is a singular vector
        let l = matops::left_null_basis(&setup.m0, RankTol::AUTO)?;
        let op = l * &setup.right;
        let s = matops::singular_values(&op)?;
        let smin = if op.nrows() < m_phi || s.is_empty() {
            0.0
        } else {
            s[s.len() - 1]
        };
        out.min_ratio = smin * smin;
        out.passed = out.min_ratio > plan.mu_t;
        return Ok(out);
    }

    for _ in 0..plan.n_phi {
        let phi = draw_phi(m_phi, &mut rng);
        let pp = phi.norm_squared();
        match setup.lhs(&phi)? {
            Theorem1Lhs::Value(v) => {
                let ratio = v.norm_squared() / pp;
                out.min_ratio = out.min_ratio.min(ratio);
                if v.norm_squared() <= plan.mu_t * pp {
                    out.passed = false;
                }
            }
            Theorem1Lhs::EmptyLeftNull => {
                out.empty_left_null += 1;
                out.min_ratio = 0.0;
                out.passed = false;
            }
            Theorem1Lhs::NoFreeDirection => unreachable!("m_phi > 0"),
        }
    }
    Ok(out)
}

/// Randomized verification over θ ∈ Θ and φ in the unit box.
pub fn check_recoverability_sampled(
    plant: &LftPlant,
    spec: &InterpSpec,
    plan: &SamplingPlan,
) -> Result<RecoverabilityVerdict> {
    plan.validate()?;
    spec.check_against(plant)?;
    if !check_identifiability(plant) {
        return Ok(RecoverabilityVerdict {
            verdict: Verdict::IdentifiabilityFailed,
            failed_thetas: vec![],
            min_ratio: 0.0,
            samples: vec![],
            empty_left_null: 0,
            resampled: 0,
        });
    }
    let samples = (0..plan.n_theta)
        .into_par_iter()
        .map(|j| sample_one(plant, spec, plan, j))
        .collect::<Result<Vec<_>>>()?;
    let failed_thetas: Vec<Theta> = samples
        .iter()
        .filter(|s| !s.passed)
        .map(|s| s.theta.clone())
        .collect();
    let verdict = if failed_thetas.is_empty() {
        Verdict::RecoverableWhp
    } else if failed_thetas.len() == samples.len() {
        Verdict::NotRecoverable
    } else {
        Verdict::LocallyRecoverable
    };
    Ok(RecoverabilityVerdict {
        verdict,
        failed_thetas,
        min_ratio: samples.iter().map(|s| s.min_ratio).fold(f64::INFINITY, f64::min),
        empty_left_null: samples.iter().map(|s| s.empty_left_null).sum(),
        resampled: samples.iter().map(|s| s.resampled).sum(),
        samples,
    })
}

/// First special case: needs `D_zv N_r = 0`; tests full row rank of
/// `[Ψᵀ(K ⊗ I); I ⊗ N_rᵀ]`.
pub fn corollary1_case1(plant: &LftPlant, theta: &Theta, spec: &InterpSpec) -> Result<bool> {
    let s = Theorem1Setup::new(plant, theta, spec)?;
    if !s.phi_free() {
        return Err(Error::InapplicableCase(
            "D_zv restricted to the null space of [B_xv; D_yv] is nonzero".into(),
        ));
    }
    let mv = plant.m_v();
    let top = plant.psi_matrix().transpose() * matops::kron(&s.k, &Mat::identity(mv, mv))?;
    let bottom = matops::kron(&Mat::identity(s.m_xi, s.m_xi), &s.n_r.transpose())?;
    matops::is_frr(&matops::vstack(&[&top, &bottom]), RankTol::AUTO)
}

/// Second special case: needs `C_zx X + D_zu Π` of full row rank; tests full
/// column rank of `[I ⊗ [B_xv; D_yv]; Ψ_l^⊥ (I ⊗ (I − P D_zv))]`.
pub fn corollary1_case2(plant: &LftPlant, theta: &Theta, spec: &InterpSpec) -> Result<bool> {
    let s = Theorem1Setup::new(plant, theta, spec)?;
    if s.zx.nrows() == 0 || !matops::is_frr(&s.zx, RankTol::AUTO)? {
        return Err(Error::InapplicableCase(
            "C_zx X + D_zu Pi does not have full row rank".into(),
        ));
    }
    let (mv, mz) = (plant.m_v(), plant.m_z());
    let iz = Mat::identity(mz, mz);
    let top = matops::kron(&iz, &v_input(plant))?;
    let psi_l = matops::left_null_basis(&plant.psi_matrix(), RankTol::AUTO)?;
    let lp = Mat::identity(mv, mv) - &s.p * &plant.d_zv;
    let bottom = psi_l * matops::kron(&iz, &lp)?;
    matops::is_fcr(&matops::vstack(&[&top, &bottom]), RankTol::AUTO)
}

/// Necessary conditions: `cond1` holds when the bracket is rank deficient in
/// rows at every sampled φ, `cond2` when
/// `[(C_zx X + D_zu Π)ᵀ ⊗ I; Ψ_l^⊥((I − D_zv P)ᵀ ⊗ I)]` has full column rank.
pub fn corollary2_necessary(
    plant: &LftPlant,
    theta: &Theta,
    spec: &InterpSpec,
    phi_samples: usize,
    seed: u64,
) -> Result<(bool, bool)> {
    let s = Theorem1Setup::new(plant, theta, spec)?;
    let mut rng = stream_rng(seed, 0);
    let mut cond1 = true;
    let draws = if s.m_phi() == 0 { 1 } else { phi_samples.max(1) };
    for _ in 0..draws {
        let phi = draw_phi(s.m_phi(), &mut rng);
        let m = s.bracket(&phi)?;
        if matops::is_frr(&m, RankTol::AUTO)? {
            cond1 = false;
            break;
        }
    }
    let (mv, mz) = (plant.m_v(), plant.m_z());
    let iv = Mat::identity(mv, mv);
    let top = matops::kron(&s.zx.transpose(), &iv)?;
    let psi_l = matops::left_null_basis(&plant.psi_matrix(), RankTol::AUTO)?;
    let ld = Mat::identity(mz, mz) - &plant.d_zv * &s.p;
    let bottom = psi_l * matops::kron(&ld.transpose(), &iv)?;
    let cond2 = matops::is_fcr(&matops::vstack(&[&top, &bottom]), RankTol::AUTO)?;
    Ok((cond1, cond2))
}
