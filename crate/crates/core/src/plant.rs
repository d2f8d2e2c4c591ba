//! LFT-structured plant: constant blocks, affine `P(θ)`, well-posedness and
//! the assembled state-space matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matops::{self, Mat, RankTol, Vector};

pub type Theta = Vector;

/// Axis-aligned parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub lower: Vector,
    pub upper: Vector,
}

impl ParamBox {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        let b = ParamBox { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::invalid("theta_box", "lower and upper differ in length"));
        }
        for i in 0..self.lower.len() {
            let (l, u) = (self.lower[i], self.upper[i]);
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::invalid("theta_box", format!("bound {i} is not finite")));
            }
            if l > u {
                return Err(Error::invalid("theta_box", format!("lower[{i}] > upper[{i}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        theta.len() == self.dim()
            && (0..self.dim()).all(|i| theta[i] >= self.lower[i] && theta[i] <= self.upper[i])
    }

    pub fn clamp(&self, theta: &mut Theta) {
        for i in 0..self.dim() {
            theta[i] = theta[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Theta {
        Vector::from_fn(self.dim(), |i, _| {
            self.lower[i] + u[i] * (self.upper[i] - self.lower[i])
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LftPlant {
    pub a_xx: Mat,
    pub b_xu: Mat,
    pub b_xv: Mat,
    pub c_yx: Mat,
    pub c_zx: Mat,
    pub d_zu: Mat,
    pub d_zv: Mat,
    pub d_yu: Mat,
    pub d_yv: Mat,
    pub p0: Mat,
    pub p_basis: Vec<Mat>,
    pub theta_box: ParamBox,
}

/// `(A, B, C, D)` at a fixed θ.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

fn check(block: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::dims(block, (rows, cols), m.shape()));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(block, "non-finite entry"));
    }
    Ok(())
}

impl LftPlant {
    /// Checks every block against the sizes implied by `A_xx`, `B_xu`, `B_xv`,
    /// `C_yx` and `C_zx`.
    pub fn validate(&self) -> Result<()> {
        let mx = self.a_xx.nrows();
        let (mu, mv) = (self.b_xu.ncols(), self.b_xv.ncols());
        let (my, mz) = (self.c_yx.nrows(), self.c_zx.nrows());
        check("A_xx", &self.a_xx, mx, mx)?;
        check("B_xu", &self.b_xu, mx, mu)?;
        check("B_xv", &self.b_xv, mx, mv)?;
        check("C_yx", &self.c_yx, my, mx)?;
        check("C_zx", &self.c_zx, mz, mx)?;
        check("D_zu", &self.d_zu, mz, mu)?;
        check("D_zv", &self.d_zv, mz, mv)?;
        check("D_yu", &self.d_yu, my, mu)?;
        check("D_yv", &self.d_yv, my, mv)?;
        check("P[0]", &self.p0, mv, mz)?;
        if self.p_basis.is_empty() {
            return Err(Error::invalid("P", "at least one parameter matrix P_1 is required"));
        }
        for (i, p) in self.p_basis.iter().enumerate() {
            check(&format!("P[{}]", i + 1), p, mv, mz)?;
        }
        self.theta_box.validate()?;
        if self.theta_box.dim() != self.p_basis.len() {
            return Err(Error::invalid(
                "theta_box",
                format!(
                    "has dimension {} but there are {} parameter matrices",
                    self.theta_box.dim(),
                    self.p_basis.len()
                ),
            ));
        }
        Ok(())
    }

    pub fn m_x(&self) -> usize {
        self.a_xx.nrows()
    }
    pub fn m_u(&self) -> usize {
        self.b_xu.ncols()
    }
    pub fn m_y(&self) -> usize {
        self.c_yx.nrows()
    }
    pub fn m_v(&self) -> usize {
        self.b_xv.ncols()
    }
    pub fn m_z(&self) -> usize {
        self.c_zx.nrows()
    }
    pub fn m_theta(&self) -> usize {
        self.p_basis.len()
    }

    fn check_theta(&self, theta: &Theta) -> Result<()> {
        if theta.len() != self.m_theta() {
            return Err(Error::dims("theta", (self.m_theta(), 1), (theta.len(), 1)));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("theta", "non-finite entry"));
        }
        Ok(())
    }

    /// `P_0 + Σ θ_i P_i`.
    pub fn eval_p(&self, theta: &Theta) -> Result<Mat> {
        self.check_theta(theta)?;
        let mut p = self.p0.clone();
        for (t, pi) in theta.iter().zip(&self.p_basis) {
            p += pi * *t;
        }
        Ok(p)
    }

    /// `I − P(θ) D_zv`.
    pub fn loop_matrix(&self, theta: &Theta) -> Result<Mat> {
        let p = self.eval_p(theta)?;
        Ok(Mat::identity(self.m_v(), self.m_v()) - p * &self.d_zv)
    }

    pub fn is_well_posed(&self, theta: &Theta, tol: RankTol) -> bool {
        match self.loop_matrix(theta) {
            Ok(m) if m.nrows() == 0 => true,
            Ok(m) => matops::is_fcr(&m, tol).unwrap_or(false),
            Err(_) => false,
        }
    }

    /// `(I − P(θ)D_zv)⁻¹ P(θ)`, the feedback gain closing the `v`/`z` loop.
    pub fn loop_gain(&self, theta: &Theta) -> Result<Mat> {
        let p = self.eval_p(theta)?;
        let m = Mat::identity(self.m_v(), self.m_v()) - &p * &self.d_zv;
        if self.m_v() == 0 {
            return Ok(p);
        }
        if !matops::is_fcr(&m, RankTol::AUTO)? {
            return Err(Error::IllPosed {
                theta: theta.iter().copied().collect(),
            });
        }
        m.lu().solve(&p).ok_or_else(|| Error::IllPosed {
            theta: theta.iter().copied().collect(),
        })
    }

    pub fn assemble_system(&self, theta: &Theta) -> Result<StateSpace> {
        let g = self.loop_gain(theta)?;
        let gx = &g * &self.c_zx;
        let gu = &g * &self.d_zu;
        Ok(StateSpace {
            a: &self.a_xx + &self.b_xv * &gx,
            b: &self.b_xu + &self.b_xv * &gu,
            c: &self.c_yx + &self.d_yv * &gx,
            d: &self.d_yu + &self.d_yv * &gu,
        })
    }

    /// `[vec P_1 … vec P_mθ]`.
    pub fn psi_matrix(&self) -> Mat {
        let cols: Vec<Vector> = self.p_basis.iter().map(matops::vec).collect();
        Mat::from_columns(&cols)
    }

    /// `H(s) = C(sI − A)⁻¹B + D`.
    pub fn transfer_value(&self, theta: &Theta, s: Complex64) -> Result<DMatrix<Complex64>> {
        let ss = self.assemble_system(theta)?;
        let r = resolvent_solve(&ss.a, s, &to_complex(&ss.b), 1)?;
        Ok(to_complex(&ss.c) * r + to_complex(&ss.d))
    }
}

pub(crate) fn to_complex(m: &Mat) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Applies `(sI − A)^{-k}` to `rhs`.
pub(crate) fn resolvent_solve(
    a: &Mat,
    s: Complex64,
    rhs: &DMatrix<Complex64>,
    k: usize,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let m = DMatrix::<Complex64>::identity(n, n) * s - to_complex(a);
    let lu = m.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && (dmax == 0.0 || dmin <= 64.0 * n as f64 * f64::EPSILON * dmax) {
        return Err(Error::SingularResolvent);
    }
    let mut out = rhs.clone();
    for _ in 0..k {
        out = lu.solve(&out).ok_or(Error::SingularResolvent)?;
    }
    Ok(out)
}
