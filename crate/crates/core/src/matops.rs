//! Dense real-matrix helpers: ranks, null spaces, pseudoinverses, Kronecker
//! products and vectorized Sylvester solves.
//!
//! Every rank decision goes through [`RankTol`], a cutoff relative to the
//! largest singular value.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value cutoff. `None` picks `max(rows, cols) * eps * 64`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RankTol {
    pub rel_tol: Option<f64>,
}

impl RankTol {
    pub const AUTO: RankTol = RankTol { rel_tol: None };

    pub fn rel(rel_tol: f64) -> Self {
        assert!(rel_tol >= 0.0, "rel_tol must be nonnegative");
        RankTol {
            rel_tol: Some(rel_tol),
        }
    }

    pub fn cutoff(&self, rows: usize, cols: usize) -> f64 {
        self.rel_tol
            .unwrap_or_else(|| rows.max(cols) as f64 * f64::EPSILON * 64.0)
    }
}

/// Thin SVD with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vector,
    pub v_t: Mat,
}

pub fn svd(m: &Mat) -> Result<Svd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("SVD of a matrix with non-finite entries".into()));
    }
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok(Svd {
            u: Mat::zeros(m.nrows(), 0),
            s: Vector::zeros(0),
            v_t: Mat::zeros(0, m.ncols()),
        });
    }
    // nalgebra's bidiagonal SVD loses accuracy on inputs with several exact
    // zero singular values, so the decomposition itself comes from faer
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let d = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (d.U(), d.S().column_vector(), d.V());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    Ok(Svd {
        u: Mat::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]),
        s: Vector::from_fn(k, |j, _| s[order[j]]),
        v_t: Mat::from_fn(k, m.ncols(), |i, j| v[(j, order[i])]),
    })
}

pub fn singular_values(m: &Mat) -> Result<Vector> {
    Ok(svd(m)?.s)
}

fn rank_of(s: &Vector, rows: usize, cols: usize, tol: RankTol) -> usize {
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let cut = tol.cutoff(rows, cols) * smax;
    s.iter().filter(|&&x| x > cut).count()
}

pub fn rank(m: &Mat, tol: RankTol) -> Result<usize> {
    let s = singular_values(m)?;
    Ok(rank_of(&s, m.nrows(), m.ncols(), tol))
}

pub fn is_fcr(m: &Mat, tol: RankTol) -> Result<bool> {
    Ok(rank(m, tol)? == m.ncols())
}

pub fn is_frr(m: &Mat, tol: RankTol) -> Result<bool> {
    Ok(rank(m, tol)? == m.nrows())
}

/// Orthonormal basis of `{x : m x = 0}` as columns.
pub fn right_null_basis(m: &Mat, tol: RankTol) -> Result<Mat> {
    let (r, c) = m.shape();
    if c == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    if r == 0 {
        return Ok(Mat::identity(c, c));
    }
    // pad wide matrices so the SVD yields a full set of right vectors
    let padded = if r < c {
        let mut p = Mat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let d = svd(&padded)?;
    let rk = rank_of(&d.s, r, c, tol);
    Ok(d.v_t.rows(rk, c - rk).transpose())
}

/// Orthonormal basis of `{y : y m = 0}` as rows.
pub fn left_null_basis(m: &Mat, tol: RankTol) -> Result<Mat> {
    Ok(right_null_basis(&m.transpose(), tol)?.transpose())
}

pub fn pinv(m: &Mat, tol: RankTol) -> Result<Mat> {
    let (r, c) = m.shape();
    let d = svd(m)?;
    let rk = rank_of(&d.s, r, c, tol);
    let mut out = Mat::zeros(c, r);
    for i in 0..rk {
        let vi = d.v_t.row(i).transpose();
        let ui = d.u.column(i);
        out += (vi * ui.transpose()) / d.s[i];
    }
    Ok(out)
}

pub fn kron(a: &Mat, b: &Mat) -> Result<Mat> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some() => Ok(a.kronecker(b)),
        _ => Err(Error::Size {
            rows: a.nrows().saturating_mul(b.nrows()),
            cols: a.ncols().saturating_mul(b.ncols()),
        }),
    }
}

/// Column-stacking vectorization.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    assert_eq!(v.len(), rows * cols, "unvec length");
    Mat::from_column_slice(rows, cols, v.as_slice())
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub particular: Vector,
    pub null_basis: Mat,
    pub consistent: bool,
}

/// Minimum-norm solution of `coeff x = rhs` plus the homogeneous solution space.
pub fn solve_general_linear(coeff: &Mat, rhs: &Mat, tol: RankTol) -> Result<LinearSolution> {
    if rhs.ncols() != 1 {
        return Err(Error::dims("rhs", (coeff.nrows(), 1), rhs.shape()));
    }
    if rhs.nrows() != coeff.nrows() {
        return Err(Error::dims("rhs", (coeff.nrows(), 1), rhs.shape()));
    }
    let b = rhs.column(0).into_owned();
    let x = pinv(coeff, tol)? * &b;
    let resid = (coeff * &x - &b).norm();
    let scale = coeff.norm() * x.norm() + b.norm();
    let bound = tol.cutoff(coeff.nrows(), coeff.ncols()).sqrt() * scale;
    Ok(LinearSolution {
        null_basis: right_null_basis(coeff, tol)?,
        consistent: resid <= bound,
        particular: x,
    })
}

/// `I ⊗ a − xiᵀ ⊗ I`, the vectorized Sylvester operator `X ↦ aX − X xi`.
pub fn sylvester_operator(a: &Mat, xi: &Mat) -> Result<Mat> {
    let ia = kron(&Mat::identity(xi.nrows(), xi.nrows()), a)?;
    let xa = kron(&xi.transpose(), &Mat::identity(a.nrows(), a.nrows()))?;
    Ok(ia - xa)
}

/// Solves `a X − X xi + rhs = 0`.
pub fn solve_sylvester(a: &Mat, xi: &Mat, rhs: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::dims("a", (a.nrows(), a.nrows()), a.shape()));
    }
    if !xi.is_square() {
        return Err(Error::dims("xi", (xi.nrows(), xi.nrows()), xi.shape()));
    }
    let (mx, mxi) = (a.nrows(), xi.nrows());
    if rhs.shape() != (mx, mxi) {
        return Err(Error::dims("rhs", (mx, mxi), rhs.shape()));
    }
    if mx == 0 || mxi == 0 {
        return Ok(Mat::zeros(mx, mxi));
    }
    let k = sylvester_operator(a, xi)?;
    let s = singular_values(&k)?;
    let smax = s[0];
    let smin = s[s.len() - 1];
    let n = k.nrows();
    if smax == 0.0 || smin <= RankTol::AUTO.cutoff(n, n) * smax {
        return Err(Error::SharedEigenvalue { sigma_min: smin });
    }
    let b = -vec(rhs);
    let x = k
        .lu()
        .solve(&b)
        .ok_or(Error::SharedEigenvalue { sigma_min: smin })?;
    Ok(unvec(&x, mx, mxi))
}

/// Stacks blocks vertically; all must share a column count.
pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), b.shape()).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Stacks blocks horizontally; all must share a row count.
pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), b.shape()).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Orthogonal projector onto the column space of an orthonormal basis.
pub fn projector(basis: &Mat) -> Mat {
    basis * basis.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn svd_of_exact_rank_one_wide() {
        let m = Mat::from_row_slice(
            2,
            3,
            &[
                -0.22380363835293401, 1.4012264832741985, -1.7851990187016413,
                0.17350339181449687, -1.0862984593886769, 1.383972517552173,
            ],
        );
        let d = svd(&m).unwrap();
        assert!((d.s.norm() - m.norm()).abs() < 1e-12);
        let back = &d.u * Mat::from_diagonal(&d.s) * &d.v_t;
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn rank_basic() {
        assert_eq!(rank(&Mat::identity(3, 3), RankTol::AUTO).unwrap(), 3);
        assert_eq!(rank(&Mat::zeros(2, 4), RankTol::AUTO).unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = rand_mat(&mut rng, 4, 1);
        let v = rand_mat(&mut rng, 3, 1);
        let m = &u * v.transpose();
        let s = singular_values(&m).unwrap();
        assert!(s[1] / s[0] < RankTol::AUTO.cutoff(4, 3));
        assert_eq!(rank(&m, RankTol::AUTO).unwrap(), 1);
    }

    #[test]
    fn null_bases() {
        let n = right_null_basis(&Mat::from_row_slice(1, 2, &[1.0, 0.0]), RankTol::AUTO).unwrap();
        assert_eq!(n.shape(), (2, 1));
        assert!((n[(1, 0)].abs() - 1.0).abs() < 1e-15 && n[(0, 0)].abs() < 1e-15);

        let l = left_null_basis(&Mat::from_row_slice(2, 1, &[1.0, 0.0]), RankTol::AUTO).unwrap();
        assert_eq!(l.shape(), (1, 2));
        assert!((l[(0, 1)].abs() - 1.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fcr = rand_mat(&mut rng, 5, 3);
        assert_eq!(right_null_basis(&fcr, RankTol::AUTO).unwrap().ncols(), 0);
        assert_eq!(left_null_basis(&fcr.transpose(), RankTol::AUTO).unwrap().nrows(), 0);

        let m = rand_mat(&mut rng, 3, 2) * rand_mat(&mut rng, 2, 5);
        let n = right_null_basis(&m, RankTol::AUTO).unwrap();
        assert_eq!(n.ncols(), 3);
        assert!((&m * &n).norm() <= 1e-10 * m.norm());
        assert!((n.transpose() * &n - Mat::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn left_right_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = rand_mat(&mut rng, 5, 2) * rand_mat(&mut rng, 2, 4);
        let l = left_null_basis(&m, RankTol::AUTO).unwrap();
        let r = right_null_basis(&m.transpose(), RankTol::AUTO).unwrap();
        assert!((projector(&l.transpose()) - projector(&r)).norm() < 1e-10);
        assert!((&l * &m).norm() < 1e-10);
    }

    #[test]
    fn pinv_cases() {
        let i = Mat::identity(3, 3);
        assert!((pinv(&i, RankTol::AUTO).unwrap() - &i).norm() < 1e-15);
        let z = pinv(&Mat::zeros(2, 3), RankTol::AUTO).unwrap();
        assert_eq!(z.shape(), (3, 2));
        assert_eq!(z.norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = rand_mat(&mut rng, 4, 2);
        let p = pinv(&m, RankTol::AUTO).unwrap();
        assert!((p * m - Mat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn kron_and_vec() {
        let k = kron(&Mat::identity(2, 2), &Mat::identity(3, 3)).unwrap();
        assert_eq!(k, Mat::identity(6, 6));
        let s = kron(&Mat::from_element(1, 1, 3.0), &Mat::from_element(1, 1, -2.0)).unwrap();
        assert_eq!(s[(0, 0)], -6.0);

        let m = Mat::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&Mat::identity(2, 2)).as_slice(), &[1.0, 0.0, 0.0, 1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = rand_mat(&mut rng, 3, 4);
        assert_eq!(unvec(&vec(&r), 3, 4), r);

        let (a, x, b) = (
            rand_mat(&mut rng, 2, 2),
            rand_mat(&mut rng, 2, 2),
            rand_mat(&mut rng, 2, 2),
        );
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a).unwrap() * vec(&x);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn general_linear() {
        let b = Mat::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let s = solve_general_linear(&Mat::identity(3, 3), &b, RankTol::AUTO).unwrap();
        assert!(s.consistent);
        assert_eq!(s.null_basis.ncols(), 0);
        assert!((s.particular - b.column(0)).norm() < 1e-15);

        let s = solve_general_linear(&Mat::zeros(3, 2), &b, RankTol::AUTO).unwrap();
        assert!(!s.consistent);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = rand_mat(&mut rng, 2, 5);
        let r = rand_mat(&mut rng, 2, 1);
        let s = solve_general_linear(&c, &r, RankTol::AUTO).unwrap();
        assert!(s.consistent);
        assert!((&c * &s.particular - r.column(0)).norm() <= 1e-10);
        assert_eq!(s.null_basis.ncols(), 3);
    }

    #[test]
    fn sylvester_cases() {
        let x = solve_sylvester(
            &Mat::from_element(1, 1, -1.0),
            &Mat::from_element(1, 1, 0.0),
            &Mat::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);

        let x = solve_sylvester(&-Mat::identity(2, 2), &Mat::identity(2, 2), &Mat::zeros(2, 2))
            .unwrap();
        assert_eq!(x.norm(), 0.0);

        let a = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let err = solve_sylvester(&a, &Mat::identity(1, 1), &Mat::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, Error::SharedEigenvalue { .. }));
    }

    #[test]
    fn shape_errors() {
        let e = solve_sylvester(&Mat::zeros(2, 3), &Mat::identity(1, 1), &Mat::zeros(2, 1));
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
        let e = solve_general_linear(&Mat::identity(2, 2), &Mat::zeros(2, 2), RankTol::AUTO);
        assert!(e.is_err());
    }
}
