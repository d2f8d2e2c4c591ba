//! Right tangential interpolation of LFT-structured LTI plants and recovery of
//! the physical parameters behind them.
//!
//! The plant is `[A B; C D](θ) = base + [B_xv; D_yv](I − P(θ)D_zv)⁻¹P(θ)[C_zx D_zu]`
//! with `P(θ) = P_0 + Σ θ_i P_i`. For an interpolation pair `(Ξ, Π)` the RTIM is
//! `Γ = C X + D Π` where `A X + B Π = X Ξ`.
//!
//! * [`plant`]: the LFT model and its state-space realization.
//! * [`interp`]: RTIMs and transfer-function oracles.
//! * [`recoverability`]: whether Γ determines θ.
//! * [`recovery`]: estimating θ from an exact or noisy Γ.
//! * [`robustness`]: first-order error amplification.
//! * [`experiment`]: the fourth-order example and its noise study.

pub mod error;
pub mod experiment;
pub mod interp;
pub mod io;
pub mod matops;
pub mod plant;
pub mod recoverability;
pub mod recovery;
pub mod robustness;

pub use nalgebra;
pub use num_complex;

pub use error::{Error, Result};
pub use interp::{compute_rtim, derivative_oracle, solve_x, InterpSpec, Provenance, Rtim};
pub use matops::{Mat, RankTol, Vector};
pub use plant::{LftPlant, ParamBox, StateSpace, Theta};
