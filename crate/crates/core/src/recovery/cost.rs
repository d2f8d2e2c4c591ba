use crate::error::{Error, Result};
use crate::matops::{self, Mat, Vector};
use crate::plant::Theta;

use super::problem::{AlphaVec, RecoveryProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Fixed gradient step.
    pub step: f64,
    /// Stop once consecutive costs differ by at most this much.
    pub eps_it: f64,
    pub max_iter: usize,
    pub init_theta: Theta,
    /// Project θ onto the parameter box after every gradient step.
    pub clamp_to_box: bool,
    /// Halve the step until the smooth part decreases (off by default).
    pub backtracking: bool,
}

impl RecoveryConfig {
    /// Constants used for the fourth-order example.
    pub fn example_defaults() -> Self {
        RecoveryConfig {
            lambda1: 2.0,
            lambda2: 10.0,
            step: 0.05,
            eps_it: 1e-10,
            max_iter: 2500,
            init_theta: Vector::from_vec(vec![1.0, 10.0]),
            clamp_to_box: true,
            backtracking: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive and finite"))
            }
        };
        pos("lambda1", self.lambda1)?;
        pos("lambda2", self.lambda2)?;
        pos("step", self.step)?;
        pos("eps_it", self.eps_it)?;
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        if self.init_theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("init_theta", "non-finite entry"));
        }
        Ok(())
    }
}

/// `Σ_{i≥2} σ_i(m)`.
pub fn tail_singular_sum(m: &Mat) -> f64 {
    let s = matops::singular_values(m).expect("finite matrix");
    s.iter().skip(1).sum()
}

impl RecoveryProblem {
    pub(crate) fn smooth_cost_flat(&self, cfg: &RecoveryConfig, z: &Vector, r_in: &Mat) -> f64 {
        let e = self.e_flat(z);
        let r = self.r_flat(z);
        0.5 * e.norm_squared() + 0.5 * cfg.lambda1 * (r - r_in).norm_squared()
    }

    pub(crate) fn cost_flat(&self, cfg: &RecoveryConfig, z: &Vector, r_in: &Mat) -> f64 {
        self.smooth_cost_flat(cfg, z, r_in) + cfg.lambda1 * cfg.lambda2 * tail_singular_sum(r_in)
    }

    pub(crate) fn grad_flat(&self, cfg: &RecoveryConfig, z: &Vector, r_in: &Mat) -> Vector {
        let e = self.e_flat(z);
        let diff = self.r_flat(z) - r_in;
        self.design.tr_mul(&e) + self.r_adjoint(&diff) * cfg.lambda1
    }
}

fn check_r_in(prob: &RecoveryProblem, r_in: &Mat) -> Result<()> {
    let shape = prob.dims.r_shape();
    if r_in.shape() != shape {
        return Err(Error::dims("R_in", shape, r_in.shape()));
    }
    Ok(())
}

/// `½‖e‖² + λ₁[½‖R − R_in‖² + λ₂ Σ_{i≥2} σ_i(R_in)]`.
pub fn cost_j(
    prob: &RecoveryProblem,
    cfg: &RecoveryConfig,
    theta: &Theta,
    alpha: &AlphaVec,
    r_in: &Mat,
) -> Result<f64> {
    check_r_in(prob, r_in)?;
    Ok(prob.cost_flat(cfg, &prob.flatten(theta, alpha)?, r_in))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub d_theta: Vector,
    pub d_alpha: AlphaVec,
}

/// Gradient of the smooth part of the cost in `(θ, α)`.
pub fn grad_j(
    prob: &RecoveryProblem,
    cfg: &RecoveryConfig,
    theta: &Theta,
    alpha: &AlphaVec,
    r_in: &Mat,
) -> Result<Gradient> {
    check_r_in(prob, r_in)?;
    let g = prob.grad_flat(cfg, &prob.flatten(theta, alpha)?, r_in);
    let (d_theta, d_alpha) = prob.unflatten(&g);
    Ok(Gradient { d_theta, d_alpha })
}
