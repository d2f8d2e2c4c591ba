//! Constant data of the vectorized consistency equation and the affine maps
//! `e(θ, α, Γ)`, `T_1(α, Γ)` and `R(θ, α)`.

use crate::error::{Error, Result};
use crate::interp::{solve_x, InterpSpec, Rtim};
use crate::matops::{self, Mat, RankTol, Vector};
use crate::plant::{LftPlant, ParamBox, Theta};
use crate::recoverability::v_input;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub m_x: usize,
    pub m_xi: usize,
    pub m_u: usize,
    pub m_y: usize,
    pub m_v: usize,
    pub m_z: usize,
    pub m_theta: usize,
    pub width_t: usize,
    pub width_s: usize,
}

impl Dims {
    /// Length of `e`.
    pub fn n_e(&self) -> usize {
        self.m_v * self.m_xi
    }

    /// Length of the composite α.
    pub fn n_alpha(&self) -> usize {
        (self.width_t + self.width_s) * (1 + self.m_theta)
    }

    /// Length of `[θ; α]`.
    pub fn n_z(&self) -> usize {
        self.m_theta + self.n_alpha()
    }

    /// Shape of `R(θ, α)`.
    pub fn r_shape(&self) -> (usize, usize) {
        (1 + self.width_t + self.width_s, 1 + self.m_theta)
    }
}

/// Composite α in the fixed order `[α_t, α_s, α_{t,1..m}, α_{s,1..m}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVec {
    pub alpha_t: Vector,
    pub alpha_s: Vector,
    pub alpha_t_i: Vec<Vector>,
    pub alpha_s_i: Vec<Vector>,
}

impl AlphaVec {
    pub fn zeros(d: &Dims) -> Self {
        AlphaVec {
            alpha_t: Vector::zeros(d.width_t),
            alpha_s: Vector::zeros(d.width_s),
            alpha_t_i: vec![Vector::zeros(d.width_t); d.m_theta],
            alpha_s_i: vec![Vector::zeros(d.width_s); d.m_theta],
        }
    }

    /// `α_{·,i} = θ_i α_·`, the rank-one pattern.
    pub fn tied(alpha_t: Vector, alpha_s: Vector, theta: &Theta) -> Self {
        AlphaVec {
            alpha_t_i: theta.iter().map(|t| &alpha_t * *t).collect(),
            alpha_s_i: theta.iter().map(|t| &alpha_s * *t).collect(),
            alpha_t,
            alpha_s,
        }
    }

    pub fn to_flat(&self) -> Vector {
        let parts = std::iter::once(&self.alpha_t)
            .chain(std::iter::once(&self.alpha_s))
            .chain(&self.alpha_t_i)
            .chain(&self.alpha_s_i);
        let data: Vec<f64> = parts.flat_map(|v| v.iter().copied()).collect();
        Vector::from_vec(data)
    }

    pub fn from_flat(d: &Dims, v: &[f64]) -> Result<Self> {
        if v.len() != d.n_alpha() {
            return Err(Error::dims("alpha", (d.n_alpha(), 1), (v.len(), 1)));
        }
        let (wt, ws, m) = (d.width_t, d.width_s, d.m_theta);
        let take = |off: usize, n: usize| Vector::from_column_slice(&v[off..off + n]);
        let mut off = 0;
        let alpha_t = take(off, wt);
        off += wt;
        let alpha_s = take(off, ws);
        off += ws;
        let mut alpha_t_i = Vec::with_capacity(m);
        for _ in 0..m {
            alpha_t_i.push(take(off, wt));
            off += wt;
        }
        let mut alpha_s_i = Vec::with_capacity(m);
        for _ in 0..m {
            alpha_s_i.push(take(off, ws));
            off += ws;
        }
        Ok(AlphaVec {
            alpha_t,
            alpha_s,
            alpha_t_i,
            alpha_s_i,
        })
    }

    fn check(&self, d: &Dims) -> Result<()> {
        let ok = self.alpha_t.len() == d.width_t
            && self.alpha_s.len() == d.width_s
            && self.alpha_t_i.len() == d.m_theta
            && self.alpha_s_i.len() == d.m_theta
            && self.alpha_t_i.iter().all(|v| v.len() == d.width_t)
            && self.alpha_s_i.iter().all(|v| v.len() == d.width_s);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(
                "alpha",
                format!("block lengths do not match width_t = {}, width_s = {}", d.width_t, d.width_s),
            ))
        }
    }
}

/// Everything that depends on the plant and `(Ξ, Π)` but not on Γ.
#[derive(Debug, Clone)]
pub struct ProblemBase {
    pub dims: Dims,
    pub upsilon_t: Mat,
    pub upsilon_s: Mat,
    pub upsilon_s_pinv: Mat,
    pub upsilon_s_null: Mat,
    pub wt0: Mat,
    pub ws0: Mat,
    pub wt: Vec<Mat>,
    pub ws: Vec<Mat>,
    pub theta_box: ParamBox,
    n_l: Mat,
    n_r: Mat,
    bv_pinv: Mat,
    l0: Mat,
    l: Vec<Mat>,
    xi: Mat,
    pi: Mat,
    plant: LftPlant,
}

impl ProblemBase {
    pub fn new(plant: &LftPlant, spec: &InterpSpec) -> Result<Self> {
        plant.validate()?;
        spec.check_against(plant)?;
        let (mx, my, mv, mz, mxi, m) = (
            plant.m_x(),
            plant.m_y(),
            plant.m_v(),
            plant.m_z(),
            spec.m_xi(),
            plant.m_theta(),
        );
        let tol = RankTol::AUTO;
        let bv = v_input(plant);
        let n_l = matops::left_null_basis(&bv, tol)?;
        let n_r = matops::right_null_basis(&bv, tol)?;
        let bv_pinv = matops::pinv(&bv, tol)?;
        let i_xi = Mat::identity(mxi, mxi);

        let mut top = Mat::zeros(mx + my, mx);
        top.view_mut((0, 0), (mx, mx)).fill_with_identity();
        let upsilon_t = matops::kron(&i_xi, &top)?;
        let ac = matops::vstack(&[&plant.a_xx, &plant.c_yx]);
        // vec([TΞ; 0] − [A_xx; C_yx] T) = G vec(T)
        let g_op = matops::kron(&spec.xi.transpose(), &Mat::identity(mx + my, mx + my))?
            * &upsilon_t
            - matops::kron(&i_xi, &ac)?;
        let upsilon_s = matops::kron(&i_xi, &n_l)? * &g_op;
        let upsilon_s_pinv = matops::pinv(&upsilon_s, tol)?;
        let upsilon_s_null = matops::right_null_basis(&upsilon_s, tol)?;

        let iv = Mat::identity(mv, mv);
        let l0 = matops::kron(&i_xi, &(&plant.p0 * &plant.c_zx))?
            + matops::kron(&i_xi, &((&plant.p0 * &plant.d_zv - &iv) * &bv_pinv))? * &g_op;
        let l: Vec<Mat> = plant
            .p_basis
            .iter()
            .map(|pi| {
                Ok(matops::kron(&i_xi, &(pi * &plant.c_zx))?
                    + matops::kron(&i_xi, &(pi * &plant.d_zv * &bv_pinv))? * &g_op)
            })
            .collect::<Result<_>>()?;

        let wt0 = &l0 * &upsilon_s_null;
        let ws0 = matops::kron(&i_xi, &((&plant.p0 * &plant.d_zv - &iv) * &n_r))?;
        let wt = l.iter().map(|li| li * &upsilon_s_null).collect();
        let ws = plant
            .p_basis
            .iter()
            .map(|pi| matops::kron(&i_xi, &(pi * &plant.d_zv * &n_r)))
            .collect::<Result<_>>()?;

        let dims = Dims {
            m_x: mx,
            m_xi: mxi,
            m_u: plant.m_u(),
            m_y: my,
            m_v: mv,
            m_z: mz,
            m_theta: m,
            width_t: upsilon_s_null.ncols(),
            width_s: n_r.ncols() * mxi,
        };
        Ok(ProblemBase {
            dims,
            upsilon_t,
            upsilon_s,
            upsilon_s_pinv,
            upsilon_s_null,
            wt0,
            ws0,
            wt,
            ws,
            theta_box: plant.theta_box.clone(),
            n_l,
            n_r,
            bv_pinv,
            l0,
            l,
            xi: spec.xi.clone(),
            pi: spec.pi.clone(),
            plant: plant.clone(),
        })
    }

    /// Attaches an RTIM (exact or estimated), computing the Γ-dependent terms.
    pub fn instantiate(&self, rtim: &Rtim) -> Result<RecoveryProblem> {
        let d = self.dims;
        let gamma = &rtim.gamma;
        if gamma.shape() != (d.m_y, d.m_xi) {
            return Err(Error::dims("Gamma", (d.m_y, d.m_xi), gamma.shape()));
        }
        if gamma.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("Gamma", "non-finite entry"));
        }
        let p = &self.plant;
        let bu_pi = &p.b_xu * &self.pi;
        let du_pi = &p.d_yu * &self.pi;
        let rhs = matops::vstack(&[&bu_pi, &(&du_pi - gamma)]);
        let g = &self.upsilon_s_pinv * matops::vec(&(&self.n_l * rhs));
        let q0 = matops::vstack(&[&(-&bu_pi), &(gamma - &du_pi)]);
        let bq = &self.bv_pinv * &q0;

        let mv = d.m_v;
        let base = (Mat::identity(mv, mv) - &p.p0 * &p.d_zv) * &bq - &p.p0 * &p.d_zu * &self.pi;
        let gamma_vec = matops::vec(&base) - &self.l0 * &g;
        let zu_pi = &p.d_zu * &self.pi;
        let w: Vec<Vector> = p
            .p_basis
            .iter()
            .zip(&self.l)
            .map(|(pi, li)| matops::vec(&(pi * (&zu_pi + &p.d_zv * &bq))) + li * &g)
            .collect();

        let t10 = matops::unvec(&g, d.m_x, d.m_xi);
        let design = assemble_design(&d, &w, &self.wt0, &self.ws0, &self.wt, &self.ws);
        Ok(RecoveryProblem {
            upsilon_t: self.upsilon_t.clone(),
            upsilon_s: self.upsilon_s.clone(),
            upsilon_s_pinv: self.upsilon_s_pinv.clone(),
            upsilon_s_null: self.upsilon_s_null.clone(),
            t10,
            gamma_vec,
            w,
            wt0: self.wt0.clone(),
            ws0: self.ws0.clone(),
            wt: self.wt.clone(),
            ws: self.ws.clone(),
            dims: d,
            theta_box: self.theta_box.clone(),
            gamma: gamma.clone(),
            design,
        })
    }

    /// The α that the true `X(θ)` induces: `α_t` from `vec X = vec T_10 + Υ α_t`,
    /// `α_s` from the null-space component of the loop signal.
    pub fn induced_alpha(&self, theta: &Theta, rtim: &Rtim) -> Result<AlphaVec> {
        let p = &self.plant;
        let spec = InterpSpec {
            xi: self.xi.clone(),
            pi: self.pi.clone(),
        };
        let x = solve_x(p, theta, &spec)?;
        let prob = self.instantiate(rtim)?;
        let alpha_t =
            self.upsilon_s_null.transpose() * (matops::vec(&x) - matops::vec(&prob.t10));
        let y = p.loop_gain(theta)? * (&p.c_zx * &x + &p.d_zu * &self.pi);
        let lhs = matops::vstack(&[&(&x * &self.xi), &rtim.gamma]);
        let ab = matops::hstack(&[&p.a_xx, &p.b_xu]);
        let cd = matops::hstack(&[&p.c_yx, &p.d_yu]);
        let xp = matops::vstack(&[&x, &self.pi]);
        let q = lhs - matops::vstack(&[&(&ab * &xp), &(&cd * &xp)]);
        let omega = self.n_r.transpose() * (y - &self.bv_pinv * q);
        Ok(AlphaVec::tied(alpha_t, matops::vec(&omega), theta))
    }
}

fn assemble_design(d: &Dims, w: &[Vector], wt0: &Mat, ws0: &Mat, wt: &[Mat], ws: &[Mat]) -> Mat {
    let mut out = Mat::zeros(d.n_e(), d.n_z());
    let mut c = 0;
    for wi in w {
        out.set_column(c, wi);
        c += 1;
    }
    for block in std::iter::once(wt0)
        .chain(std::iter::once(ws0))
        .chain(wt)
        .chain(ws)
    {
        out.view_mut((0, c), block.shape()).copy_from(block);
        c += block.ncols();
    }
    debug_assert_eq!(c, d.n_z());
    out
}

#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    pub upsilon_t: Mat,
    pub upsilon_s: Mat,
    pub upsilon_s_pinv: Mat,
    pub upsilon_s_null: Mat,
    pub t10: Mat,
    pub gamma_vec: Vector,
    pub w: Vec<Vector>,
    pub wt0: Mat,
    pub ws0: Mat,
    pub wt: Vec<Mat>,
    pub ws: Vec<Mat>,
    pub dims: Dims,
    pub theta_box: ParamBox,
    pub gamma: Mat,
    /// `[w_1 … w_m | W_t0 | W_s0 | W_t,1 … | W_s,1 …]`, so `e = design · [θ; α] − γ`.
    pub design: Mat,
}

pub fn build_problem(plant: &LftPlant, spec: &InterpSpec, rtim: &Rtim) -> Result<RecoveryProblem> {
    ProblemBase::new(plant, spec)?.instantiate(rtim)
}

impl RecoveryProblem {
    pub fn flatten(&self, theta: &Theta, alpha: &AlphaVec) -> Result<Vector> {
        let d = &self.dims;
        if theta.len() != d.m_theta {
            return Err(Error::dims("theta", (d.m_theta, 1), (theta.len(), 1)));
        }
        alpha.check(d)?;
        let a = alpha.to_flat();
        let mut z = Vector::zeros(d.n_z());
        z.rows_mut(0, d.m_theta).copy_from(theta);
        z.rows_mut(d.m_theta, d.n_alpha()).copy_from(&a);
        Ok(z)
    }

    pub fn unflatten(&self, z: &Vector) -> (Theta, AlphaVec) {
        let d = &self.dims;
        let theta = z.rows(0, d.m_theta).into_owned();
        let alpha = AlphaVec::from_flat(d, &z.as_slice()[d.m_theta..]).expect("flat length");
        (theta, alpha)
    }

    pub(crate) fn e_flat(&self, z: &Vector) -> Vector {
        &self.design * z - &self.gamma_vec
    }

    /// `R` from a flat `[θ; α]`.
    pub(crate) fn r_flat(&self, z: &Vector) -> Mat {
        let d = &self.dims;
        let (m, wt, ws) = (d.m_theta, d.width_t, d.width_s);
        let (rows, cols) = d.r_shape();
        let mut r = Mat::zeros(rows, cols);
        r[(0, 0)] = 1.0;
        for i in 0..m {
            r[(0, i + 1)] = z[i];
        }
        let mut off = m;
        r.view_mut((1, 0), (wt, 1)).copy_from(&z.rows(off, wt));
        off += wt;
        r.view_mut((1 + wt, 0), (ws, 1)).copy_from(&z.rows(off, ws));
        off += ws;
        for i in 0..m {
            r.view_mut((1, i + 1), (wt, 1)).copy_from(&z.rows(off, wt));
            off += wt;
        }
        for i in 0..m {
            r.view_mut((1 + wt, i + 1), (ws, 1)).copy_from(&z.rows(off, ws));
            off += ws;
        }
        r
    }

    /// Scatters a matrix shaped like `R` back onto the `[θ; α]` layout.
    pub(crate) fn r_adjoint(&self, g: &Mat) -> Vector {
        let d = &self.dims;
        let (m, wt, ws) = (d.m_theta, d.width_t, d.width_s);
        let mut z = Vector::zeros(d.n_z());
        for i in 0..m {
            z[i] = g[(0, i + 1)];
        }
        let mut off = m;
        let mut put = |z: &mut Vector, r0: usize, c: usize, n: usize| {
            for k in 0..n {
                z[off + k] = g[(r0 + k, c)];
            }
            off += n;
        };
        put(&mut z, 1, 0, wt);
        put(&mut z, 1 + wt, 0, ws);
        for i in 0..m {
            put(&mut z, 1, i + 1, wt);
        }
        for i in 0..m {
            put(&mut z, 1 + wt, i + 1, ws);
        }
        z
    }

    /// `Σ w_i θ_i + Σ W_{t,i} α_{t,i} + Σ W_{s,i} α_{s,i} + W_{t,0} α_t + W_{s,0} α_s − γ`.
    pub fn eval_e(&self, theta: &Theta, alpha: &AlphaVec) -> Result<Vector> {
        Ok(self.e_flat(&self.flatten(theta, alpha)?))
    }

    /// `T_1 = T_10 + unvec(Υ_null α_t)`.
    pub fn eval_t1(&self, alpha: &AlphaVec) -> Result<Mat> {
        let d = &self.dims;
        if alpha.alpha_t.len() != d.width_t {
            return Err(Error::dims("alpha_t", (d.width_t, 1), (alpha.alpha_t.len(), 1)));
        }
        let extra = &self.upsilon_s_null * &alpha.alpha_t;
        Ok(&self.t10 + matops::unvec(&extra, d.m_x, d.m_xi))
    }

    pub fn eval_r(&self, theta: &Theta, alpha: &AlphaVec) -> Result<Mat> {
        Ok(self.r_flat(&self.flatten(theta, alpha)?))
    }
}

/// `[[1, θᵀ], [α_t, α_{t,i}…], [α_s, α_{s,i}…]]` without a built problem.
pub fn eval_r(theta: &Theta, alpha: &AlphaVec) -> Mat {
    let (m, wt, ws) = (theta.len(), alpha.alpha_t.len(), alpha.alpha_s.len());
    let mut r = Mat::zeros(1 + wt + ws, 1 + m);
    r[(0, 0)] = 1.0;
    for i in 0..m {
        r[(0, i + 1)] = theta[i];
    }
    r.view_mut((1, 0), (wt, 1)).copy_from(&alpha.alpha_t);
    r.view_mut((1 + wt, 0), (ws, 1)).copy_from(&alpha.alpha_s);
    for i in 0..m {
        r.view_mut((1, i + 1), (wt, 1)).copy_from(&alpha.alpha_t_i[i]);
        r.view_mut((1 + wt, i + 1), (ws, 1)).copy_from(&alpha.alpha_s_i[i]);
    }
    r
}

#[derive(Debug, Clone)]
pub struct Consistency {
    pub consistent: bool,
    pub t1: Mat,
    pub residual: f64,
}

/// Solves `A(θ)T_1 + B(θ)Π = T_1Ξ` and checks `C(θ)T_1 + D(θ)Π = Γ` against
/// `tol · max(1, ‖Γ‖)` together with `rank T_1 = m_ξ`.
pub fn theorem2_consistency(
    plant: &LftPlant,
    theta: &Theta,
    spec: &InterpSpec,
    rtim: &Rtim,
    tol: f64,
) -> Result<Consistency> {
    spec.check_against(plant)?;
    if rtim.gamma.shape() != (plant.m_y(), spec.m_xi()) {
        return Err(Error::dims("Gamma", (plant.m_y(), spec.m_xi()), rtim.gamma.shape()));
    }
    let ss = plant.assemble_system(theta)?;
    let t1 = matops::solve_sylvester(&ss.a, &spec.xi, &(&ss.b * &spec.pi))?;
    let residual = (&ss.c * &t1 + &ss.d * &spec.pi - &rtim.gamma).norm();
    let fcr = matops::is_fcr(&t1, RankTol::AUTO)?;
    Ok(Consistency {
        consistent: residual <= tol * rtim.gamma.norm().max(1.0) && fcr,
        t1,
        residual,
    })
}
