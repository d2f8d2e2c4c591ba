//! Parameter recovery from an RTIM by rank-penalized least squares.
//!
//! [`build_problem`] turns `(plant, Ξ, Π, Γ)` into an affine residual
//! `e = design · [θ; α] − γ` plus the block matrix `R(θ, α)`, whose rank is one
//! exactly when the α blocks are θ-scaled copies of `(α_t, α_s)`.
//! [`recover`] alternates a fixed-step gradient move on `(θ, α)` with the
//! closed-form [`prox_rin`] update of the instrumental matrix.

mod cost;
mod problem;
mod prox;
mod solver;

pub use cost::{cost_j, grad_j, tail_singular_sum, Gradient, RecoveryConfig};
pub use problem::{
    build_problem, eval_r, theorem2_consistency, AlphaVec, Consistency, Dims, ProblemBase,
    RecoveryProblem,
};
pub use prox::{canonical_signs, prox_rin, prox_rin_detailed, surrogate_cost, ProxOutput};
pub use solver::{init_alpha_ls, recover, recover_from, RecoveryResult, TracePoint};
