//! The fourth-order SISO example: plant, interpolation designs, ω search,
//! Monte-Carlo noise study and binning by ‖ε‖.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::{compute_rtim, InterpSpec, Rtim};
use crate::matops::{Mat, Vector};
use crate::plant::{LftPlant, ParamBox, Theta};
use crate::recovery::{recover, ProblemBase, RecoveryConfig, RecoveryResult};

pub const SIGMA: f64 = -0.05;
pub const OMEGA_DERIV: f64 = 4.4799;
pub const OMEGA_VALUE: (f64, f64) = (4.4179, 4.5306);
pub const BIN_EDGES: [f64; 6] = [0.05, 0.20, 0.35, 0.50, 0.65, 1.00];

/// Reference histogram for the 300-trial study: totals, `r_ζ < 1`, `r_ω < 1`.
pub const REFERENCE_COUNTS: [[usize; 5]; 3] = [
    [46, 153, 75, 24, 2],
    [31, 97, 43, 14, 2],
    [28, 70, 36, 10, 2],
];

/// Perturbations behind the representative cost curves.
pub const REPRESENTATIVE_EPS: [[f64; 4]; 4] = [
    [1.9477e-2, 7.9221e-3, 4.4740e-3, -3.6647e-2],
    [2.5656e-2, -4.8425e-2, -1.6932e-1, 1.5780e-4],
    [-2.7062e-1, -4.2597e-2, -4.7609e-2, 1.2500e-1],
    [8.7601e-2, -2.8810e-1, 1.8755e-1, 5.4091e-2],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExamplePlantParams {
    pub k: f64,
    pub r_z: f64,
    pub zeta_z: f64,
    pub omega_z: f64,
    pub r_p1: f64,
    pub r_p2: f64,
    pub zeta_p: f64,
    pub omega_p: f64,
}

impl Default for ExamplePlantParams {
    fn default() -> Self {
        ExamplePlantParams {
            k: 6.0,
            r_z: 2.0,
            zeta_z: 0.2,
            omega_z: 8.0,
            r_p1: 3.0,
            r_p2: 5.0,
            zeta_p: 0.1,
            omega_p: 5.0,
        }
    }
}

impl ExamplePlantParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k,
            self.r_z,
            self.zeta_z,
            self.omega_z,
            self.r_p1,
            self.r_p2,
            self.zeta_p,
            self.omega_p,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("example params", "non-finite value"));
        }
        if self.r_p1 <= 0.0 || self.r_p2 <= 0.0 || self.zeta_p * self.omega_p <= 0.0 {
            return Err(Error::invalid("example params", "denominator is not stable"));
        }
        Ok(())
    }

    pub fn theta(&self) -> Theta {
        Vector::from_vec(vec![self.zeta_p, self.omega_p])
    }

    /// `k (s + r_z)(s² + 2ζ_zω_z s + ω_z²) / ((s + r_p1)(s + r_p2)(s² + 2ζ_pω_p s + ω_p²))`.
    pub fn transfer(&self, s: Complex64) -> Complex64 {
        let num = (s + self.r_z) * (s * s + s * (2.0 * self.zeta_z * self.omega_z) + self.omega_z.powi(2));
        let den = (s + self.r_p1)
            * (s + self.r_p2)
            * (s * s + s * (2.0 * self.zeta_p * self.omega_p) + self.omega_p.powi(2));
        num * self.k / den
    }
}

/// LFT encoding with `θ = (ζ_p, ω_p)` on the box `[0.01, 1] × [1, 10]`.
pub fn build_example_plant(p: &ExamplePlantParams) -> Result<LftPlant> {
    p.validate()?;
    let plant = LftPlant {
        a_xx: Mat::from_row_slice(
            4,
            4,
            &[
                -p.r_p1, p.r_p1 - p.r_z, 0.0, 0.0, //
                0.0, -p.r_p2, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                -1.0, 1.0, 0.0, 0.0,
            ],
        ),
        b_xu: Mat::from_column_slice(4, 1, &[0.0, p.k, 0.0, 0.0]),
        b_xv: Mat::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        c_yx: Mat::from_row_slice(
            1,
            4,
            &[-1.0, 1.0, p.omega_z.powi(2), 2.0 * p.zeta_z * p.omega_z],
        ),
        c_zx: Mat::from_row_slice(
            3,
            4,
            &[
                0.0, 0.0, 0.0, -2.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, -1.0, 0.0,
            ],
        ),
        d_zu: Mat::zeros(3, 1),
        d_zv: Mat::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        d_yu: Mat::zeros(1, 1),
        d_yv: Mat::from_row_slice(1, 2, &[1.0, 0.0]),
        p0: Mat::zeros(2, 3),
        p_basis: vec![
            Mat::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            Mat::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        ],
        theta_box: ParamBox::new(
            Vector::from_vec(vec![0.01, 1.0]),
            Vector::from_vec(vec![1.0, 10.0]),
        )?,
    };
    plant.validate()?;
    Ok(plant)
}

fn rot(sigma: f64, omega: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[sigma, omega, -omega, sigma])
}

/// Real Jordan block of size two around `σ ± jω`, probed along `[1 1 0 0]`.
pub fn xi_derivative(sigma: f64, omega: f64) -> InterpSpec {
    let mut xi = Mat::zeros(4, 4);
    xi.view_mut((0, 0), (2, 2)).copy_from(&rot(sigma, omega));
    xi.view_mut((2, 2), (2, 2)).copy_from(&rot(sigma, omega));
    xi.view_mut((0, 2), (2, 2)).fill_with_identity();
    InterpSpec {
        xi,
        pi: Mat::from_row_slice(1, 4, &[1.0, 1.0, 0.0, 0.0]),
    }
}

/// Two rotation blocks at `σ₁ ± jω₁`, `σ₂ ± jω₂`, probed along `[1 1 1 1]`.
pub fn xi_values(sigma1: f64, omega1: f64, sigma2: f64, omega2: f64) -> InterpSpec {
    let mut xi = Mat::zeros(4, 4);
    xi.view_mut((0, 0), (2, 2)).copy_from(&rot(sigma1, omega1));
    xi.view_mut((2, 2), (2, 2)).copy_from(&rot(sigma2, omega2));
    InterpSpec {
        xi,
        pi: Mat::from_element(1, 4, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiDesigns {
    /// Values only.
    pub spec0: InterpSpec,
    /// Values and first derivatives.
    pub spec1: InterpSpec,
}

pub fn build_xi_designs(sigma: f64, omega_deriv: f64, omega_values: (f64, f64)) -> XiDesigns {
    XiDesigns {
        spec0: xi_values(sigma, omega_values.0, sigma, omega_values.1),
        spec1: xi_derivative(sigma, omega_deriv),
    }
}

/// Everything needed to rerun the example.
#[derive(Debug, Clone)]
pub struct ExampleSetup {
    pub params: ExamplePlantParams,
    pub plant: LftPlant,
    pub theta_true: Theta,
    pub designs: XiDesigns,
    pub recovery: RecoveryConfig,
}

impl ExampleSetup {
    pub fn reference() -> Self {
        let params = ExamplePlantParams::default();
        ExampleSetup {
            plant: build_example_plant(&params).expect("default parameters are valid"),
            theta_true: params.theta(),
            params,
            designs: build_xi_designs(SIGMA, OMEGA_DERIV, OMEGA_VALUE),
            recovery: RecoveryConfig::example_defaults(),
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` iid `N(0, std²)` draws.
pub fn draw_eps(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// `Γ̂ = Γ ∘ (1 + ε)`, entries taken column by column.
pub fn perturb(gamma: &Mat, eps: &[f64]) -> Result<Mat> {
    if eps.len() != gamma.len() {
        return Err(Error::dims("eps", (gamma.len(), 1), (eps.len(), 1)));
    }
    let mut out = gamma.clone();
    for (g, e) in out.iter_mut().zip(eps) {
        *g *= 1.0 + e;
    }
    Ok(out)
}

/// Recovery from `Γ̂ = Γ ∘ (1 + ε)` on a prebuilt problem base.
pub fn recover_perturbed(
    base: &ProblemBase,
    gamma: &Mat,
    eps: &[f64],
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    let rtim = Rtim::estimate(perturb(gamma, eps)?, "multiplicative");
    recover(&base.instantiate(&rtim)?, cfg)
}

fn rel_metric(theta: &Theta, hat: &Theta) -> f64 {
    theta
        .iter()
        .zip(hat.iter())
        .map(|(t, h)| ((t - h) / t).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub omega1_best: f64,
    pub metric1_best: f64,
    pub omega_pair_best: (f64, f64),
    pub metric0_best: f64,
    /// The shared multiplicative perturbation.
    pub eps: Vec<f64>,
    /// Candidates whose recovery failed.
    pub failures: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchPlan {
    pub sigma: f64,
    pub interval: (f64, f64),
    pub n_samples: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SearchPlan {
    fn default() -> Self {
        SearchPlan {
            sigma: SIGMA,
            interval: (4.0, 6.0),
            n_samples: 100,
            noise_std: 0.017,
            seed: 0,
        }
    }
}

/// Combined relative error at one `(Ξ, Π)` under a fixed perturbation.
pub fn design_metric(
    plant: &LftPlant,
    theta_true: &Theta,
    spec: &InterpSpec,
    eps: &[f64],
    cfg: &RecoveryConfig,
) -> Result<f64> {
    let gamma = compute_rtim(plant, theta_true, spec)?.gamma;
    let base = ProblemBase::new(plant, spec)?;
    let res = recover_perturbed(&base, &gamma, eps, cfg)?;
    Ok(rel_metric(theta_true, &res.theta_hat))
}

/// Random search for the rotation frequencies of both designs.
pub fn search_omegas(
    plant: &LftPlant,
    theta_true: &Theta,
    plan: &SearchPlan,
    cfg: &RecoveryConfig,
) -> Result<SearchResult> {
    let (lo, hi) = plan.interval;
    if !(lo < hi) {
        return Err(Error::invalid("interval", "must be nonempty"));
    }
    if plan.n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let eps = draw_eps(&mut stream_rng(plan.seed, 0), 4, plan.noise_std);
    let mut rng1 = stream_rng(plan.seed, 1);
    let singles: Vec<f64> = (0..plan.n_samples).map(|_| rng1.random_range(lo..hi)).collect();
    let mut rng2 = stream_rng(plan.seed, 2);
    let pairs: Vec<(f64, f64)> = (0..plan.n_samples)
        .map(|_| (rng2.random_range(lo..hi), rng2.random_range(lo..hi)))
        .collect();

    let m1: Vec<Option<f64>> = singles
        .par_iter()
        .map(|&w| design_metric(plant, theta_true, &xi_derivative(plan.sigma, w), &eps, cfg).ok())
        .collect();
    let m0: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let spec = xi_values(plan.sigma, a, plan.sigma, b);
            design_metric(plant, theta_true, &spec, &eps, cfg).ok()
        })
        .collect();

    let failures = m1.iter().chain(&m0).filter(|m| m.is_none()).count();
    let best = |ms: &[Option<f64>]| {
        let mut best: Option<(usize, f64)> = None;
        for (i, m) in ms.iter().enumerate() {
            if let Some(v) = *m {
                if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
        }
        best
    };
    let (i1, v1) = best(&m1).ok_or_else(|| Error::Numerical("every single-ω candidate failed".into()))?;
    let (i0, v0) = best(&m0).ok_or_else(|| Error::Numerical("every ω-pair candidate failed".into()))?;
    Ok(SearchResult {
        omega1_best: singles[i1],
        metric1_best: v1,
        omega_pair_best: pairs[i0],
        metric0_best: v0,
        eps,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub eps: Vec<f64>,
    pub eps_norm: f64,
    /// `θ̂` for the value-only and the derivative design.
    pub theta_hat: [Vec<f64>; 2],
    /// Percent relative errors of ζ̂ for `[value-only, derivative]`.
    pub rel_err_zeta: [f64; 2],
    pub rel_err_omega: [f64; 2],
    /// `|ζ − ζ̂¹| / |ζ − ζ̂⁰|`; `None` when the denominator vanishes.
    pub r_zeta: Option<f64>,
    pub r_omega: Option<f64>,
    pub converged: [bool; 2],
    /// Recovery aborted on a numerical failure.
    pub failed: [bool; 2],
}

fn ratio(num: f64, den: f64, scale: f64) -> Option<f64> {
    if den.abs() < 1e-12 * scale.abs().max(f64::MIN_POSITIVE) {
        None
    } else {
        Some((num / den).abs())
    }
}

/// Runs independent noisy recoveries; trial `i` draws from ChaCha8 stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn run_monte_carlo(
    plant: &LftPlant,
    theta_true: &Theta,
    spec0: &InterpSpec,
    spec1: &InterpSpec,
    cfg: &RecoveryConfig,
    n_trials: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if n_trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::invalid("noise_std", "must be nonnegative and finite"));
    }
    if theta_true.len() != 2 {
        return Err(Error::dims("theta", (2, 1), (theta_true.len(), 1)));
    }
    let bases = [ProblemBase::new(plant, spec0)?, ProblemBase::new(plant, spec1)?];
    let gammas = [
        compute_rtim(plant, theta_true, spec0)?.gamma,
        compute_rtim(plant, theta_true, spec1)?.gamma,
    ];
    let n_eps = gammas[0].len();
    if gammas[1].len() != n_eps {
        return Err(Error::invalid("spec", "both designs must give RTIMs of equal size"));
    }
    let (zeta, omega) = (theta_true[0], theta_true[1]);
    let records = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let eps = draw_eps(&mut stream_rng(seed, i as u64), n_eps, noise_std);
            let mut theta_hat: [Vec<f64>; 2] = [vec![f64::NAN; 2], vec![f64::NAN; 2]];
            let mut converged = [false; 2];
            let mut failed = [false; 2];
            for d in 0..2 {
                match recover_perturbed(&bases[d], &gammas[d], &eps, cfg) {
                    Ok(r) => {
                        theta_hat[d] = r.theta_hat.iter().copied().collect();
                        converged[d] = r.converged;
                    }
                    Err(e) if e.is_numerical() => failed[d] = true,
                    Err(e) => return Err(e),
                }
            }
            let dz = [zeta - theta_hat[0][0], zeta - theta_hat[1][0]];
            let dw = [omega - theta_hat[0][1], omega - theta_hat[1][1]];
            let ok = !failed[0] && !failed[1];
            Ok(TrialRecord {
                index: i,
                eps_norm: eps.iter().map(|x| x * x).sum::<f64>().sqrt(),
                eps,
                rel_err_zeta: [100.0 * (dz[0] / zeta).abs(), 100.0 * (dz[1] / zeta).abs()],
                rel_err_omega: [100.0 * (dw[0] / omega).abs(), 100.0 * (dw[1] / omega).abs()],
                r_zeta: if ok { ratio(dz[1], dz[0], zeta) } else { None },
                r_omega: if ok { ratio(dw[1], dw[0], omega) } else { None },
                theta_hat,
                converged,
                failed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records)
}

/// Records ordered by `‖ε‖₂` (stable, so ties keep trial order).
pub fn sort_by_eps_norm(records: &[TrialRecord]) -> Vec<TrialRecord> {
    let mut out = records.to_vec();
    out.sort_by(|a, b| a.eps_norm.total_cmp(&b.eps_norm));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinRow {
    pub total: usize,
    pub zeta_better: usize,
    pub omega_better: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinTable {
    pub edges: Vec<f64>,
    pub bins: Vec<BinRow>,
    /// Records whose ‖ε‖ falls outside every bin.
    pub overflow: BinRow,
}

impl BinTable {
    pub fn sums(&self) -> BinRow {
        self.bins.iter().fold(
            BinRow {
                total: 0,
                zeta_better: 0,
                omega_better: 0,
            },
            |acc, r| BinRow {
                total: acc.total + r.total,
                zeta_better: acc.zeta_better + r.zeta_better,
                omega_better: acc.omega_better + r.omega_better,
            },
        )
    }
}

/// Counts per half-open bin `[e_k, e_{k+1})` of ‖ε‖₂.
pub fn bin_table(records: &[TrialRecord], edges: &[f64]) -> Result<BinTable> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bin_edges", "need at least two strictly ascending edges"));
    }
    let empty = || BinRow {
        total: 0,
        zeta_better: 0,
        omega_better: 0,
    };
    let mut bins: Vec<BinRow> = (0..edges.len() - 1).map(|_| empty()).collect();
    let mut overflow = empty();
    for r in records {
        let slot = edges
            .windows(2)
            .position(|w| r.eps_norm >= w[0] && r.eps_norm < w[1]);
        let row = match slot {
            Some(k) => &mut bins[k],
            None => &mut overflow,
        };
        row.total += 1;
        row.zeta_better += usize::from(r.r_zeta.is_some_and(|x| x < 1.0));
        row.omega_better += usize::from(r.r_omega.is_some_and(|x| x < 1.0));
    }
    Ok(BinTable {
        edges: edges.to_vec(),
        bins,
        overflow,
    })
}

/// `(ω, |H(jω)|)` on a grid.
pub fn freq_response(plant: &LftPlant, theta: &Theta, omegas: &[f64]) -> Result<Vec<(f64, f64)>> {
    omegas
        .iter()
        .map(|&w| {
            let h = plant.transfer_value(theta, Complex64::new(0.0, w))?;
            Ok((w, h[(0, 0)].norm()))
        })
        .collect()
}

/// Logarithmic grid of `n` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(norm: f64, rz: Option<f64>, rw: Option<f64>) -> TrialRecord {
        TrialRecord {
            index: 0,
            eps: vec![],
            eps_norm: norm,
            theta_hat: [vec![], vec![]],
            rel_err_zeta: [0.0; 2],
            rel_err_omega: [0.0; 2],
            r_zeta: rz,
            r_omega: rw,
            converged: [true; 2],
            failed: [false; 2],
        }
    }

    #[test]
    fn reference_counts_are_consistent() {
        let totals: usize = REFERENCE_COUNTS[0].iter().sum();
        let z: usize = REFERENCE_COUNTS[1].iter().sum();
        let w: usize = REFERENCE_COUNTS[2].iter().sum();
        assert_eq!((totals, z, w), (300, 187, 146));
        assert_eq!(REFERENCE_COUNTS[1], [31, 97, 43, 14, 2]);
    }

    #[test]
    fn binning_edges_and_overflow() {
        let rs = vec![
            rec(0.05, Some(0.5), Some(2.0)),
            rec(0.2, Some(1.5), Some(0.1)),
            rec(0.99, None, Some(0.3)),
            rec(0.01, Some(0.1), Some(0.1)),
            rec(1.0, Some(0.1), None),
        ];
        let t = bin_table(&rs, &BIN_EDGES).unwrap();
        assert_eq!(t.bins[0].total, 1);
        assert_eq!(t.bins[1].total, 1);
        assert_eq!(t.bins[4].total, 1);
        assert_eq!(t.overflow.total, 2);
        assert_eq!(t.sums().total + t.overflow.total, rs.len());
        assert_eq!(t.bins[0].zeta_better, 1);
        assert_eq!(t.bins[1].omega_better, 1);

        let one = bin_table(&rs, &[0.0, 10.0]).unwrap();
        assert_eq!(one.bins[0].total, 5);
        assert_eq!(one.bins[0].zeta_better, 3);
        assert_eq!(one.bins[0].omega_better, 3);
        assert!(bin_table(&rs, &[0.3, 0.1]).is_err());
    }

    #[test]
    fn p_at_defaults() {
        let ps = ExamplePlantParams::default();
        let p = build_example_plant(&ps).unwrap();
        let want = Mat::from_row_slice(2, 3, &[0.0, 5.0, 0.0, 0.1, 0.0, 5.0]);
        assert!((p.eval_p(&ps.theta()).unwrap() - want).norm() < 1e-15);
    }

    #[test]
    fn sort_is_by_norm() {
        let rs = vec![rec(0.3, None, None), rec(0.1, None, None), rec(0.2, None, None)];
        let s = sort_by_eps_norm(&rs);
        assert!(s.windows(2).all(|w| w[0].eps_norm <= w[1].eps_norm));
    }

    #[test]
    fn tiny_denominator_gives_no_ratio() {
        assert_eq!(ratio(1.0, 0.0, 0.1), None);
        assert_eq!(ratio(1.0, 2.0, 0.1), Some(0.5));
    }
}
