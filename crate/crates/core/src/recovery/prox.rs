//! Closed-form minimizer of `½‖R − R_in‖² + λ₂(‖R_in‖_* − u₁ᵀ R_in v₁)`.

use crate::matops::{self, Mat};

#[derive(Debug, Clone)]
pub struct ProxOutput {
    pub r_in: Mat,
    /// Number of leading triples kept (the top one unshrunk).
    pub tau: usize,
    /// False when every singular value reached `λ₂`, so no admissible τ exists.
    pub hypothesis_met: bool,
}

/// Keeps the leading singular triple and soft-thresholds the rest by `λ₂`.
pub fn prox_rin(r: &Mat, lambda2: f64) -> Mat {
    prox_rin_detailed(r, lambda2).r_in
}

pub fn prox_rin_detailed(r: &Mat, lambda2: f64) -> ProxOutput {
    assert!(r.ncols() >= 1, "R must have at least one column");
    let d = matops::svd(r).expect("finite R");
    let (u, v_t) = canonical_signs(d.u, d.v_t);
    let s = d.s;
    let k = s.len();
    let mut out = Mat::zeros(r.nrows(), r.ncols());
    let tau_limit = r.ncols() - 1;
    let mut tau = None;
    for t in 0..=tau_limit {
        let next = if t < k { s[t] } else { 0.0 };
        if next < lambda2 {
            tau = Some(t);
            break;
        }
    }
    for i in 0..k {
        let sigma = if i == 0 { s[0] } else { (s[i] - lambda2).max(0.0) };
        if sigma > 0.0 {
            out += (u.column(i) * v_t.row(i)) * sigma;
        }
    }
    ProxOutput {
        r_in: out,
        tau: tau.unwrap_or(k),
        hypothesis_met: tau.is_some(),
    }
}

/// Flips singular pairs so each left vector's first nonzero entry is positive.
pub fn canonical_signs(mut u: Mat, mut v_t: Mat) -> (Mat, Mat) {
    for i in 0..u.ncols() {
        let lead = u.column(i).iter().copied().find(|x| x.abs() > 1e-300);
        if lead.is_some_and(|x| x < 0.0) {
            u.column_mut(i).neg_mut();
            v_t.row_mut(i).neg_mut();
        }
    }
    (u, v_t)
}

/// `½‖R − R_in‖² + λ₂(‖R_in‖_* − u₁ᵀ R_in v₁)` with `(u₁, v₁)` taken from `R`.
pub fn surrogate_cost(r: &Mat, r_in: &Mat, lambda2: f64) -> f64 {
    let d = matops::svd(r).expect("finite R");
    let nuc: f64 = matops::singular_values(r_in).expect("finite R_in").sum();
    let lin = if d.s.is_empty() {
        0.0
    } else {
        (d.u.column(0).transpose() * r_in * d.v_t.row(0).transpose())[(0, 0)]
    };
    0.5 * (r - r_in).norm_squared() + lambda2 * (nuc - lin)
}
