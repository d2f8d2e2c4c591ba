//! Right tangential interpolation matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matops::{self, Mat};
use crate::plant::{resolvent_solve, to_complex, LftPlant, Theta};

/// Interpolation points and directions `(Ξ, Π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpSpec {
    pub xi: Mat,
    pub pi: Mat,
}

impl InterpSpec {
    pub fn new(xi: Mat, pi: Mat) -> Result<Self> {
        let s = InterpSpec { xi, pi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.xi.is_square() {
            return Err(Error::dims("Xi", (self.xi.nrows(), self.xi.nrows()), self.xi.shape()));
        }
        if self.pi.ncols() != self.xi.nrows() {
            return Err(Error::dims(
                "Pi",
                (self.pi.nrows(), self.xi.nrows()),
                self.pi.shape(),
            ));
        }
        if self.xi.iter().chain(self.pi.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("Xi/Pi", "non-finite entry"));
        }
        Ok(())
    }

    pub fn m_xi(&self) -> usize {
        self.xi.nrows()
    }

    /// Checks `(Ξ, Π)` against a plant: `Π` must have `m_u` rows and `m_x ≥ m_ξ`.
    pub fn check_against(&self, plant: &LftPlant) -> Result<()> {
        self.validate()?;
        if self.pi.nrows() != plant.m_u() {
            return Err(Error::dims("Pi", (plant.m_u(), self.m_xi()), self.pi.shape()));
        }
        if plant.m_x() < self.m_xi() {
            return Err(Error::DimensionOrder {
                m_x: plant.m_x(),
                m_xi: self.m_xi(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Exact,
    Estimate { noise: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rtim {
    pub gamma: Mat,
    pub provenance: Provenance,
}

impl Rtim {
    pub fn estimate(gamma: Mat, noise: impl Into<String>) -> Self {
        Rtim {
            gamma,
            provenance: Provenance::Estimate {
                noise: noise.into(),
            },
        }
    }
}

/// Unique `X(θ)` with `A(θ)X + B(θ)Π − XΞ = 0`.
pub fn solve_x(plant: &LftPlant, theta: &Theta, spec: &InterpSpec) -> Result<Mat> {
    spec.check_against(plant)?;
    let ss = plant.assemble_system(theta)?;
    matops::solve_sylvester(&ss.a, &spec.xi, &(&ss.b * &spec.pi))
}

/// `Γ = C(θ)X(θ) + D(θ)Π`.
pub fn compute_rtim(plant: &LftPlant, theta: &Theta, spec: &InterpSpec) -> Result<Rtim> {
    spec.check_against(plant)?;
    let ss = plant.assemble_system(theta)?;
    let x = matops::solve_sylvester(&ss.a, &spec.xi, &(&ss.b * &spec.pi))?;
    Ok(Rtim {
        gamma: &ss.c * x + &ss.d * &spec.pi,
        provenance: Provenance::Exact,
    })
}

/// `dᵏH/dsᵏ(λ) η` for `k ∈ {0, 1}`.
pub fn derivative_oracle(
    plant: &LftPlant,
    theta: &Theta,
    lambda: Complex64,
    k: u32,
    eta: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    if eta.len() != plant.m_u() {
        return Err(Error::dims("eta", (plant.m_u(), 1), (eta.len(), 1)));
    }
    let ss = plant.assemble_system(theta)?;
    let b_eta = to_complex(&ss.b) * eta;
    let b_eta = DMatrix::from_column_slice(b_eta.len(), 1, b_eta.as_slice());
    let c = to_complex(&ss.c);
    match k {
        0 => {
            let r = resolvent_solve(&ss.a, lambda, &b_eta, 1)?;
            Ok((c * r).column(0) + to_complex(&ss.d) * eta)
        }
        1 => {
            let r = resolvent_solve(&ss.a, lambda, &b_eta, 2)?;
            Ok(-(c * r).column(0))
        }
        _ => Err(Error::invalid("k", "only k = 0 and k = 1 are supported")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::Vector;
    use crate::plant::ParamBox;

    fn scalar() -> LftPlant {
        let one = |v: f64| Mat::from_element(1, 1, v);
        LftPlant {
            a_xx: one(-1.0),
            b_xu: one(1.0),
            b_xv: one(0.0),
            c_yx: one(1.0),
            c_zx: one(0.0),
            d_zu: one(0.0),
            d_zv: one(0.0),
            d_yu: one(0.0),
            d_yv: one(0.0),
            p0: one(0.0),
            p_basis: vec![one(1.0)],
            theta_box: ParamBox::new(Vector::from_element(1, 0.0), Vector::from_element(1, 1.0))
                .unwrap(),
        }
    }

    #[test]
    fn scalar_rtim() {
        let p = scalar();
        let th = Vector::zeros(1);
        let spec = InterpSpec::new(Mat::zeros(1, 1), Mat::identity(1, 1)).unwrap();
        let x = solve_x(&p, &th, &spec).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);
        let g = compute_rtim(&p, &th, &spec).unwrap();
        assert!((g.gamma[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(g.provenance, Provenance::Exact);

        let zero = InterpSpec::new(Mat::zeros(1, 1), Mat::zeros(1, 1)).unwrap();
        assert_eq!(compute_rtim(&p, &th, &zero).unwrap().gamma.norm(), 0.0);
    }

    #[test]
    fn shared_eigenvalue() {
        let p = scalar();
        let spec = InterpSpec::new(-Mat::identity(1, 1), Mat::identity(1, 1)).unwrap();
        let e = solve_x(&p, &Vector::zeros(1), &spec);
        assert!(matches!(e, Err(Error::SharedEigenvalue { .. })));
    }

    #[test]
    fn rejects_wide_xi() {
        let p = scalar();
        let spec = InterpSpec::new(Mat::identity(2, 2), Mat::zeros(1, 2)).unwrap();
        let e = compute_rtim(&p, &Vector::zeros(1), &spec);
        assert!(matches!(e, Err(Error::DimensionOrder { m_x: 1, m_xi: 2 })));
    }

    #[test]
    fn first_derivative_closed_form() {
        let p = scalar();
        let eta = DVector::from_element(1, Complex64::new(1.0, 0.0));
        let l = Complex64::new(-0.05, 0.0);
        let d1 = derivative_oracle(&p, &Vector::zeros(1), l, 1, &eta).unwrap();
        assert!((d1[0].re + 1.0 / (0.95 * 0.95)).abs() < 1e-14);
        let d0 = derivative_oracle(&p, &Vector::zeros(1), l, 0, &eta).unwrap();
        let h = p.transfer_value(&Vector::zeros(1), l).unwrap();
        assert!((d0[0] - h[(0, 0)]).norm() < 1e-15);
        assert!(derivative_oracle(&p, &Vector::zeros(1), l, 2, &eta).is_err());
    }
}
