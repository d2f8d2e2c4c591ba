//! Alternating gradient step on `(θ, α)` and closed-form update of `R_in`.

use crate::error::{Error, Result};
use crate::matops::{self, Mat, RankTol, Vector};
use crate::plant::Theta;

use super::cost::RecoveryConfig;
use super::problem::{AlphaVec, RecoveryProblem};
use super::prox::prox_rin_detailed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub cost: f64,
    pub e_norm: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub theta_hat: Theta,
    pub alpha_hat: AlphaVec,
    pub r_in: Mat,
    /// Cost after initialization followed by one entry per iteration.
    pub cost_trace: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    pub iterations: usize,
    /// Iterations in which the shrinkage step had no admissible τ.
    pub prox_fallbacks: usize,
    /// `rank T_1(α̂) = m_ξ`, checked after the run.
    pub t1_full_rank: bool,
}

const DIVERGED: f64 = 1e100;

/// Least-squares `α_s` for fixed θ with `α_{s,i} = θ_i α_s` and `α_t = 0`.
pub fn init_alpha_ls(prob: &RecoveryProblem, init_theta: &Theta) -> Result<AlphaVec> {
    let d = &prob.dims;
    if init_theta.len() != d.m_theta {
        return Err(Error::dims("init_theta", (d.m_theta, 1), (init_theta.len(), 1)));
    }
    let alpha_t = Vector::zeros(d.width_t);
    if d.width_s == 0 {
        return Ok(AlphaVec::tied(alpha_t, Vector::zeros(0), init_theta));
    }
    let mut coeff = prob.ws0.clone();
    let mut rhs = prob.gamma_vec.clone();
    for i in 0..d.m_theta {
        coeff += &prob.ws[i] * init_theta[i];
        rhs -= &prob.w[i] * init_theta[i];
    }
    let alpha_s = matops::pinv(&coeff, RankTol::AUTO)? * rhs;
    Ok(AlphaVec::tied(alpha_t, alpha_s, init_theta))
}

fn trace_point(prob: &RecoveryProblem, cost: f64, z: &Vector) -> TracePoint {
    let s = matops::singular_values(&prob.r_flat(z)).expect("finite R");
    TracePoint {
        cost,
        e_norm: prob.e_flat(z).norm(),
        sigma1: s.get(0).copied().unwrap_or(0.0),
        sigma2: s.get(1).copied().unwrap_or(0.0),
    }
}

pub fn recover(prob: &RecoveryProblem, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    let alpha0 = init_alpha_ls(prob, &cfg.init_theta)?;
    recover_from(prob, cfg, &cfg.init_theta, &alpha0)
}

/// Runs the iteration from a given `(θ⁰, α⁰)` with `R_in⁰ = R(θ⁰, α⁰)`.
pub fn recover_from(
    prob: &RecoveryProblem,
    cfg: &RecoveryConfig,
    theta0: &Theta,
    alpha0: &AlphaVec,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let d = prob.dims;
    let mut z = prob.flatten(theta0, alpha0)?;
    let clamp = |z: &mut Vector| {
        if cfg.clamp_to_box {
            let mut th = z.rows(0, d.m_theta).into_owned();
            prob.theta_box.clamp(&mut th);
            z.rows_mut(0, d.m_theta).copy_from(&th);
        }
    };
    clamp(&mut z);
    let mut r_in = prob.r_flat(&z);
    let mut j_prev = prob.cost_flat(cfg, &z, &r_in);
    let mut cost_trace = vec![j_prev];
    let mut trace = vec![trace_point(prob, j_prev, &z)];
    let mut converged = false;
    let mut iterations = 0;
    let mut prox_fallbacks = 0;

    for k in 1..=cfg.max_iter {
        iterations = k;
        let g = prob.grad_flat(cfg, &z, &r_in);
        let mut step = cfg.step;
        let mut next = &z - &g * step;
        clamp(&mut next);
        if cfg.backtracking {
            let f0 = prob.smooth_cost_flat(cfg, &z, &r_in);
            while prob.smooth_cost_flat(cfg, &next, &r_in) > f0 && step > 1e-12 {
                step *= 0.5;
                next = &z - &g * step;
                clamp(&mut next);
            }
        }
        z = next;
        // far past any meaningful scale; the SVD below would overflow
        if z.iter().any(|x| !(x.abs() < DIVERGED)) {
            return Err(Error::NonFinite {
                iter: k,
                theta: z.rows(0, d.m_theta).iter().copied().collect(),
            });
        }
        let p = prox_rin_detailed(&prob.r_flat(&z), cfg.lambda2);
        if !p.hypothesis_met {
            prox_fallbacks += 1;
        }
        r_in = p.r_in;
        let j = prob.cost_flat(cfg, &z, &r_in);
        cost_trace.push(j);
        trace.push(trace_point(prob, j, &z));
        if (j - j_prev).abs() <= cfg.eps_it {
            converged = true;
            break;
        }
        j_prev = j;
    }

    let (theta_hat, alpha_hat) = prob.unflatten(&z);
    let t1 = prob.eval_t1(&alpha_hat)?;
    let t1_full_rank = matops::is_fcr(&t1, RankTol::AUTO)?;
    Ok(RecoveryResult {
        theta_hat,
        alpha_hat,
        r_in,
        cost_trace,
        trace,
        converged,
        iterations,
        prox_fallbacks,
        t1_full_rank,
    })
}
