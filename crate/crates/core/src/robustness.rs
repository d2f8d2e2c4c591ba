//! First-order sensitivity of the recovered θ to errors in Γ.

use crate::error::Result;
use crate::interp::{solve_x, InterpSpec};
use crate::matops::{self, Mat, RankTol};
use crate::plant::{LftPlant, Theta};

#[derive(Debug, Clone)]
pub struct RMatrices {
    pub r_xv: Mat,
    pub r_xx: Mat,
    pub r_yv: Mat,
    pub r_yx: Mat,
}

/// Linearization of `A T_1 + B Π = T_1 Ξ` and `C T_1 + D Π = Γ` in `(θ, T_1)`.
pub fn build_r_matrices(
    plant: &LftPlant,
    theta: &Theta,
    spec: &InterpSpec,
    t1: &Mat,
) -> Result<RMatrices> {
    spec.check_against(plant)?;
    let (mx, mv, mz, mxi) = (plant.m_x(), plant.m_v(), plant.m_z(), spec.m_xi());
    if t1.shape() != (mx, mxi) {
        return Err(crate::error::Error::dims("T_1", (mx, mxi), t1.shape()));
    }
    let ss = plant.assemble_system(theta)?;
    let p = plant.eval_p(theta)?;
    let ill = || crate::error::Error::IllPosed {
        theta: theta.iter().copied().collect(),
    };
    let ld = Mat::identity(mz, mz) - &plant.d_zv * &p;
    let zx = &plant.c_zx * t1 + &plant.d_zu * &spec.pi;
    let k = if mz == 0 { zx } else { ld.lu().solve(&zx).ok_or_else(ill)? };
    let lv = Mat::identity(mv, mv) - &p * &plant.d_zv;
    let gv = if mv == 0 {
        lv.clone()
    } else {
        lv.try_inverse().ok_or_else(ill)?
    };
    let psi = plant.psi_matrix();
    let kt = k.transpose();
    let i_xi = Mat::identity(mxi, mxi);
    Ok(RMatrices {
        r_xv: matops::kron(&kt, &(&plant.b_xv * &gv))? * &psi,
        r_xx: matops::sylvester_operator(&ss.a, &spec.xi)?,
        r_yv: matops::kron(&kt, &(&plant.d_yv * &gv))? * &psi,
        r_yx: matops::kron(&i_xi, &ss.c)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub robust: bool,
    /// `‖[I 0] N ([R_yv R_yx] N)^†‖₂`; absent when not robust.
    pub amplification: Option<f64>,
    pub condition_matrix_rank: usize,
    /// Shape of `[R_yv R_yx] N`.
    pub condition_shape: (usize, usize),
    /// `[R_xv R_xx]` had full column rank, leaving an empty null basis.
    pub empty_null: bool,
}

pub fn check_robustness(plant: &LftPlant, theta: &Theta, spec: &InterpSpec) -> Result<RobustnessReport> {
    let t1 = solve_x(plant, theta, spec)?;
    let r = build_r_matrices(plant, theta, spec, &t1)?;
    let top = matops::hstack(&[&r.r_xv, &r.r_xx]);
    let n = matops::right_null_basis(&top, RankTol::AUTO)?;
    robustness_from_basis(&r, &n, plant.m_theta())
}

/// Same report for a caller-provided orthonormal null basis of `[R_xv R_xx]`.
pub fn robustness_from_basis(r: &RMatrices, n: &Mat, m_theta: usize) -> Result<RobustnessReport> {
    let bottom = matops::hstack(&[&r.r_yv, &r.r_yx]);
    let cm = &bottom * n;
    if n.ncols() == 0 {
        return Ok(RobustnessReport {
            robust: true,
            amplification: Some(0.0),
            condition_matrix_rank: 0,
            condition_shape: cm.shape(),
            empty_null: true,
        });
    }
    let rank = matops::rank(&cm, RankTol::AUTO)?;
    let robust = rank == cm.ncols();
    let amplification = if robust {
        let sel = n.rows(0, m_theta) * matops::pinv(&cm, RankTol::AUTO)?;
        Some(matops::singular_values(&sel)?.get(0).copied().unwrap_or(0.0))
    } else {
        None
    };
    Ok(RobustnessReport {
        robust,
        amplification,
        condition_matrix_rank: rank,
        condition_shape: cm.shape(),
        empty_null: false,
    })
}
