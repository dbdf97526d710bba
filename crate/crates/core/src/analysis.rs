//! Closed-loop stability certificate for warm-started suboptimal ADMM-MPC.
//!
//! The chain of constants runs as follows. Spectral data of `M` give the
//! strong convexity and smoothness moduli `p`, `L` and the condition number
//! `κ`. A 4×4 LMI in two multipliers certifies a per-iteration contraction
//! rate `τ` of the ADMM iterates in the `F̄`-weighted norm. The solution-map
//! Lipschitz constant `L₁` and the value-function constants `δ`, `β` feed
//! the ISS gains `γ₁`, `γ₂(ℓ)`, `γ₃`, and together with the terminal-region
//! constants `c`, `d`, `r_N` they produce the iteration bound `ℓ*` and the
//! region-of-attraction radii.
//!
//! All matrix norms are spectral norms.

use nalgebra::{Matrix2, Matrix2x4, Matrix4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{CondensedProblem, CostSpec, Polytope};
use crate::qp::solve_exact_ocp;

/// Largest eigenvalue accepted as "negative semidefinite" in the LMI.
pub const LMI_EIG_TOL: f64 = 1e-9;
const LMI_GRID: usize = 60;
const LMI_LAMBDA_MIN: f64 = 1e-6;
const LMI_LAMBDA_MAX: f64 = 1e6;
const GOLDEN_ITERS: usize = 90;
const RATE_BISECTION_ITERS: usize = 40;
const ALPHA_GRID: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstants {
    /// Strong convexity modulus `p = 2σ⁻(M)`.
    pub p: f64,
    /// Smoothness modulus `L = 2σ⁺(M)`.
    pub l: f64,
    pub kappa: f64,
    /// `ρ = √(pL) κ^ε`.
    pub rho_suggested: f64,
}

pub fn spectral_constants(problem: &CondensedProblem, epsilon: f64) -> SpectralConstants {
    spectral_constants_of(problem.hessian(), epsilon)
}

pub fn spectral_constants_of(m: &Mat, epsilon: f64) -> SpectralConstants {
    let sv = linalg::singular_values(m);
    let l = 2.0 * sv[0];
    let p = 2.0 * sv[sv.len() - 1];
    let kappa = l / p;
    SpectralConstants {
        p,
        l,
        kappa,
        rho_suggested: (p * l).sqrt() * kappa.powf(epsilon),
    }
}

/// The exponent `ε` for which `ρ = √(pL) κ^ε` equals the given step size.
pub fn effective_epsilon(rho: f64, spectral: &SpectralConstants) -> f64 {
    (rho / (spectral.p * spectral.l).sqrt()).ln() / spectral.kappa.ln()
}

/// Closed-form rate `τ = 1 − α / (2 κ^{0.5 + |ε|})`.
pub fn tau_formula(alpha: f64, kappa: f64, epsilon: f64) -> f64 {
    1.0 - alpha / (2.0 * kappa.powf(0.5 + epsilon.abs()))
}

/// `F̄ = [[1, 1 − α], [1 − α, 1]]`.
pub fn fbar(alpha: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[1.0, 1.0 - alpha, 1.0 - alpha, 1.0])
}

/// Condition number of `F̄` (and of `F = F̄ ⊗ I`), from its eigenvalues `1 ± |1 − α|`.
pub fn kappa_f(alpha: f64) -> f64 {
    let d = (1.0 - alpha).abs();
    (1.0 + d) / (1.0 - d)
}

/// `‖F^{1/2}‖`.
pub fn f_sqrt_norm(alpha: f64) -> f64 {
    (1.0 + (1.0 - alpha).abs()).sqrt()
}

/// `‖F^{−1/2}‖`.
pub fn f_inv_sqrt_norm(alpha: f64) -> f64 {
    1.0 / (1.0 - (1.0 - alpha).abs()).sqrt()
}

/// Fixed pieces of the rate LMI for one `(α, κ, ε)`.
///
/// The quadratic part `[Â B̂]ᵀF̄[Â B̂]`, the weight block `diag(F̄, 0)` and the
/// two sector terms `GᵢᵀMⁱGᵢ` are precomputed; only the scalars `τ`, `λ₁`,
/// `λ₂` vary during the search.
#[derive(Debug, Clone)]
pub struct RateLmi {
    quadratic: Matrix4<f64>,
    weight: Matrix4<f64>,
    sector1: Matrix4<f64>,
    sector2: Matrix4<f64>,
}

impl RateLmi {
    pub fn new(alpha: f64, kappa: f64, epsilon: f64) -> Self {
        let ab = Matrix2x4::new(1.0, 1.0 - alpha, -alpha, -1.0, 0.0, 0.0, 0.0, 1.0);
        let g1 = Matrix2x4::new(1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let g2 = Matrix2x4::new(1.0, 1.0 - alpha, -alpha, -1.0, 0.0, 0.0, 0.0, 1.0);
        let off = kappa.powf(-0.5 - epsilon) + kappa.powf(0.5 - epsilon);
        let m1 = Matrix2::new(-2.0 * kappa.powf(-2.0 * epsilon), off, off, -2.0);
        let m2 = Matrix2::new(0.0, 1.0, 1.0, 0.0);
        let f = Matrix2::new(1.0, 1.0 - alpha, 1.0 - alpha, 1.0);
        let mut weight = Matrix4::zeros();
        weight.fixed_view_mut::<2, 2>(0, 0).copy_from(&f);
        Self {
            quadratic: ab.transpose() * f * ab,
            weight,
            sector1: g1.transpose() * m1 * g1,
            sector2: g2.transpose() * m2 * g2,
        }
    }

    /// `[Â B̂]ᵀF̄[Â B̂] − τ² diag(F̄, 0) + λ₁ G₁ᵀM¹G₁ + λ₂ G₂ᵀM²G₂`.
    pub fn matrix(&self, tau: f64, lambda1: f64, lambda2: f64) -> Matrix4<f64> {
        self.quadratic - self.weight * (tau * tau) + self.sector1 * lambda1 + self.sector2 * lambda2
    }

    pub fn max_eigenvalue(&self, tau: f64, lambda1: f64, lambda2: f64) -> f64 {
        self.matrix(tau, lambda1, lambda2).symmetric_eigenvalues().max()
    }

    /// Minimize the largest eigenvalue over `(λ₁, λ₂)` in the search box.
    ///
    /// A log-spaced grid locates the basin; the function is convex in
    /// `(λ₁, λ₂)`, so nested golden-section search on the bracketing cell
    /// refines it.
    pub fn best_multipliers(&self, tau: f64) -> LmiWitness {
        let grid: Vec<f64> = (0..LMI_GRID)
            .map(|i| {
                let t = i as f64 / (LMI_GRID - 1) as f64;
                (LMI_LAMBDA_MIN.ln() + t * (LMI_LAMBDA_MAX.ln() - LMI_LAMBDA_MIN.ln())).exp()
            })
            .collect();
        let mut best = (0, 0, f64::INFINITY);
        for (i, &l1) in grid.iter().enumerate() {
            for (j, &l2) in grid.iter().enumerate() {
                let e = self.max_eigenvalue(tau, l1, l2);
                if e < best.2 {
                    best = (i, j, e);
                }
            }
        }
        let bracket = |k: usize| (grid[k.saturating_sub(1)], grid[(k + 1).min(LMI_GRID - 1)]);
        let (lo1, hi1) = bracket(best.0);
        let (lo2, hi2) = bracket(best.1);
        let inner = |l1: f64| golden_min(|l2| self.max_eigenvalue(tau, l1, l2), lo2, hi2);
        let (l1, _) = golden_min(|l1| inner(l1).1, lo1, hi1);
        let (l2, e) = inner(l1);
        let (lambda1, lambda2, max_eig) = if e < best.2 {
            (l1, l2, e)
        } else {
            (grid[best.0], grid[best.1], best.2)
        };
        LmiWitness {
            feasible: max_eig <= LMI_EIG_TOL,
            lambda1,
            lambda2,
            max_eig,
        }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmiWitness {
    pub feasible: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Largest eigenvalue of the LMI matrix at the witness.
    pub max_eig: f64,
}

/// Search for multipliers certifying rate `τ` with `F̄` fixed.
pub fn lmi_feasible(alpha: f64, kappa: f64, epsilon: f64, tau: f64) -> LmiWitness {
    RateLmi::new(alpha, kappa, epsilon).best_multipliers(tau)
}

/// Smallest `τ ∈ (0, 1)` for which the LMI is feasible, by bisection.
///
/// Returns `None` if even `τ → 1` is not certified.
pub fn min_certified_rate(alpha: f64, kappa: f64, epsilon: f64) -> Option<(f64, LmiWitness)> {
    let lmi = RateLmi::new(alpha, kappa, epsilon);
    let mut hi = 1.0 - 1e-9;
    let mut hi_witness = lmi.best_multipliers(hi);
    if !hi_witness.feasible {
        return None;
    }
    let mut lo = 0.0;
    for _ in 0..RATE_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let w = lmi.best_multipliers(mid);
        if w.feasible {
            hi = mid;
            hi_witness = w;
        } else {
            lo = mid;
        }
    }
    Some((hi, hi_witness))
}

/// Largest `α` on a 1e−3 grid in `(0, 2)` whose LMI is feasible at
/// `τ = τ_formula(α)`, located by bisection on the grid index.
pub fn bisect_alpha(kappa: f64, epsilon: f64) -> Option<f64> {
    let feasible = |k: usize| {
        let alpha = k as f64 * ALPHA_GRID;
        let tau = tau_formula(alpha, kappa, epsilon);
        tau > 0.0 && tau < 1.0 && lmi_feasible(alpha, kappa, epsilon, tau).feasible
    };
    let top = (2.0 / ALPHA_GRID).round() as usize - 1;
    if feasible(top) {
        return Some(top as f64 * ALPHA_GRID);
    }
    if !feasible(1) {
        return None;
    }
    let (mut lo, mut hi) = (1, top);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo as f64 * ALPHA_GRID)
}

/// Rate data for one problem and ADMM parameter choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub alpha: f64,
    pub epsilon: f64,
    pub p: f64,
    pub l: f64,
    pub kappa: f64,
    pub rho_suggested: f64,
    pub tau_formula: f64,
    /// Smallest LMI-certified rate, if any.
    pub tau_lmi: Option<f64>,
    pub fbar: [[f64; 2]; 2],
    pub kappa_f: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub alpha_max: Option<f64>,
}

pub fn rate_certificate(problem: &CondensedProblem, alpha: f64, epsilon: f64) -> Result<RateCertificate> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 2)")));
    }
    let spectral = spectral_constants(problem, epsilon);
    let lmi = min_certified_rate(alpha, spectral.kappa, epsilon);
    let fb = fbar(alpha);
    Ok(RateCertificate {
        alpha,
        epsilon,
        p: spectral.p,
        l: spectral.l,
        kappa: spectral.kappa,
        rho_suggested: spectral.rho_suggested,
        tau_formula: tau_formula(alpha, spectral.kappa, epsilon),
        tau_lmi: lmi.map(|(t, _)| t),
        fbar: [[fb[(0, 0)], fb[(0, 1)]], [fb[(1, 0)], fb[(1, 1)]]],
        kappa_f: kappa_f(alpha),
        lambda1: lmi.map(|(_, w)| w.lambda1),
        lambda2: lmi.map(|(_, w)| w.lambda2),
        alpha_max: bisect_alpha(spectral.kappa, epsilon),
    })
}

/// `L₁ = ‖H^{−1/2}‖ ‖H^{−1/2} G‖ (‖H‖ + 1) + ‖G‖`, the Lipschitz constant of
/// `ξ ↦ φ*(ξ)` when no state constraint is active.
pub fn lipschitz_l1(problem: &CondensedProblem) -> f64 {
    let h = problem.h();
    let g = problem.g();
    let h_inv_sqrt = linalg::spd_power(h, -0.5);
    linalg::norm2(&h_inv_sqrt) * linalg::norm2(&(&h_inv_sqrt * g)) * (linalg::norm2(h) + 1.0) + linalg::norm2(g)
}

/// Largest sampled ratio `‖φ*(ξ) − φ*(ξ')‖ / ‖ξ − ξ'‖` on `φ = [r; y]`.
///
/// Pairs are drawn inside the ball `‖ξ‖ ≤ √(c/λ⁺(P))`, where no constraint
/// is active. This is a lower bound on the Lipschitz constant and a sanity
/// check on [`lipschitz_l1`], not a substitute for it.
pub fn empirical_l1<R: Rng>(problem: &CondensedProblem, samples: usize, rng: &mut R) -> Result<f64> {
    let region = terminal_region(problem.cost(), problem.state_set(), problem.input_set())?;
    let n = problem.n();
    let half = (region.c / linalg::lambda_max(problem.cost().p())).sqrt() / (n as f64).sqrt();
    let mut draw = || Vector::from_fn(n, |_, _| rng.random_range(-half..=half));
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let (a, b) = (draw(), draw());
        let dx = (&a - &b).norm();
        if dx == 0.0 {
            continue;
        }
        let gap = (solve_exact_ocp(problem, &a)?.phi() - solve_exact_ocp(problem, &b)?.phi()).norm();
        best = best.max(gap / dx);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalRegion {
    /// Level `c` of the largest ellipsoid `{ξᵀPξ ≤ c}` inside `{ξ ∈ 𝒳, −Kξ ∈ 𝒰}`.
    pub c: f64,
    /// `d = c λ⁻(Q) / λ⁺(P)`.
    pub d: f64,
    /// `r_N = √(N d + c)`.
    pub r_n: f64,
}

/// Terminal-region constants from the facet formula `c = min b² / (aᵀP⁻¹a)`.
///
/// Input rows whose normal `−Cᵤ K` vanishes hold for every `ξ` and are skipped.
pub fn terminal_region(cost: &CostSpec, state_set: &Polytope, input_set: &Polytope) -> Result<TerminalRegion> {
    let p = cost.p();
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("P is singular".into()))?;
    let mut c = f64::INFINITY;
    for i in 0..state_set.num_rows() {
        let a = state_set.c().row(i).transpose();
        let denom = a.dot(&(&p_inv * &a));
        if denom <= 0.0 {
            return Err(Error::DegenerateRow(i));
        }
        c = c.min(state_set.d()[i].powi(2) / denom);
    }
    let input_rows = -(input_set.c() * cost.k());
    for i in 0..input_rows.nrows() {
        let a = input_rows.row(i).transpose();
        let denom = a.dot(&(&p_inv * &a));
        if a.norm() == 0.0 {
            continue;
        }
        c = c.min(input_set.d()[i].powi(2) / denom);
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "terminal region is degenerate (c = {c}); the origin must be interior"
        )));
    }
    let d = c * linalg::lambda_min(cost.q()) / linalg::lambda_max(p);
    let r_n = (cost.horizon() as f64 * d + c).sqrt();
    Ok(TerminalRegion { c, d, r_n })
}

/// Every constant of the closed-loop certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateConstants {
    pub tau: f64,
    pub alpha: f64,
    pub kappa_f: f64,
    pub l1: f64,
    pub delta: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma3: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub c: f64,
    pub d: f64,
    pub r_n: f64,
    pub r_e: f64,
    /// Radius of the admissible suboptimality set `ℰ`.
    pub e_radius: f64,
    pub bbar_norm: f64,
    pub f_sqrt_norm: f64,
    pub f_inv_sqrt_norm: f64,
    pub p_inv_sqrt_norm: f64,
    pub a_minus_i_p_inv_sqrt_norm: f64,
    /// `−log(1 + γ₃γ₁L₁) / log τ`.
    pub ell_branch_small_gain: f64,
    /// `−log(ω₁ + ω₂γ₁‖B̄‖) / log τ`.
    pub ell_branch_invariance: f64,
    /// The small-gain branch with `‖F^{1/2}‖` from `γ₂(ℓ)` included.
    pub ell_branch_small_gain_with_f: f64,
    /// `⌈max(branches)⌉`.
    pub ell_star: u64,
    /// `⌈max⌉` using the `‖F^{1/2}‖` variant of the first branch.
    pub ell_star_with_f: u64,
}

impl CertificateConstants {
    /// `γ₂(ℓ) = L₁ ‖F^{1/2}‖ τ^ℓ / (1 − τ^ℓ)`.
    pub fn gamma2(&self, ell: usize) -> f64 {
        let t = self.tau.powi(ell as i32);
        self.l1 * self.f_sqrt_norm * t / (1.0 - t)
    }

    /// Recompute `ℓ*` from the stored constants.
    pub fn ell_star_from_constants(&self) -> u64 {
        let b1 = -(1.0 + self.gamma3 * self.gamma1 * self.l1).ln() / self.tau.ln();
        let b2 = -(self.omega1 + self.omega2 * self.gamma1 * self.bbar_norm).ln() / self.tau.ln();
        b1.max(b2).ceil() as u64
    }
}

/// Assemble the certificate for a rate choice `τ ∈ (0, 1)`.
pub fn certificate(problem: &CondensedProblem, alpha: f64, tau: f64) -> Result<CertificateConstants> {
    certificate_with_l1(problem, alpha, tau, lipschitz_l1(problem))
}

/// As [`certificate`], with an explicit Lipschitz constant.
pub fn certificate_with_l1(problem: &CondensedProblem, alpha: f64, tau: f64, l1: f64) -> Result<CertificateConstants> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} is outside (0, 1)")));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 2)")));
    }
    let cost = problem.cost();
    let plant = problem.plant();
    let n = problem.n();

    let delta_sq =
        linalg::lambda_max(problem.w()) + l1 * linalg::lambda_max(problem.h()) + 2.0 * l1 * linalg::norm2(problem.g());
    let delta = delta_sq.sqrt();
    let beta_sq = 1.0 - linalg::lambda_min(cost.q()) / delta_sq;
    if !(beta_sq > 0.0 && beta_sq < 1.0) {
        return Err(Error::IllConditioned(format!("β² = {beta_sq} is outside (0, 1)")));
    }
    let beta = beta_sq.sqrt();
    let gamma1 = delta / (1.0 - beta);

    let kf = kappa_f(alpha);
    let f_half = f_sqrt_norm(alpha);
    let f_inv_half = f_inv_sqrt_norm(alpha);
    let p_inv_sqrt = linalg::spd_power(cost.p(), -0.5);
    let p_inv_sqrt_norm = linalg::norm2(&p_inv_sqrt);
    let gamma3 = 2.0 * f_inv_half * p_inv_sqrt_norm;
    let bbar_norm = linalg::norm2(&problem.bbar());
    let a_minus_i = plant.a() - Mat::identity(n, n);
    let ami_norm = linalg::norm2(&(a_minus_i * &p_inv_sqrt));

    let omega1 = kf.sqrt() * (1.0 + l1 * bbar_norm);
    let omega2 = l1 * kf.sqrt() * ami_norm + l1 * l1 * kf.sqrt() * bbar_norm * p_inv_sqrt_norm;

    let region = terminal_region(cost, problem.state_set(), problem.input_set())?;
    let r_e = region.r_n / (gamma1 * bbar_norm);
    let e_radius = (1.0 - beta) * region.r_n / (delta * bbar_norm);

    let log_tau = tau.ln();
    let b1 = -(1.0 + gamma3 * gamma1 * l1).ln() / log_tau;
    let b2 = -(omega1 + omega2 * gamma1 * bbar_norm).ln() / log_tau;
    let b1f = -(1.0 + gamma3 * gamma1 * l1 * f_half).ln() / log_tau;

    Ok(CertificateConstants {
        tau,
        alpha,
        kappa_f: kf,
        l1,
        delta,
        beta,
        gamma1,
        gamma3,
        omega1,
        omega2,
        c: region.c,
        d: region.d,
        r_n: region.r_n,
        r_e,
        e_radius,
        bbar_norm,
        f_sqrt_norm: f_half,
        f_inv_sqrt_norm: f_inv_half,
        p_inv_sqrt_norm,
        a_minus_i_p_inv_sqrt_norm: ami_norm,
        ell_branch_small_gain: b1,
        ell_branch_invariance: b2,
        ell_branch_small_gain_with_f: b1f,
        ell_star: b1.max(b2).ceil() as u64,
        ell_star_with_f: b1f.max(b2).ceil() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MpcInstance;
    use approx::assert_relative_eq;

    #[test]
    fn identity_hessian_constants() {
        let sc = spectral_constants_of(&Mat::identity(3, 3), 0.0);
        assert_relative_eq!(sc.p, 2.0);
        assert_relative_eq!(sc.l, 2.0);
        assert_relative_eq!(sc.kappa, 1.0);
        assert_relative_eq!(sc.rho_suggested, 2.0);
    }

    #[test]
    fn kappa_f_matches_eigenvalues() {
        for &alpha in &[0.3, 1.0, 1.5, 1.95] {
            let ev = linalg::sym_eigenvalues(&fbar(alpha));
            assert_relative_eq!(kappa_f(alpha), ev[1] / ev[0], max_relative = 1e-12);
        }
        assert_relative_eq!(kappa_f(1.95), 39.0, epsilon = 1e-9);
    }

    #[test]
    fn lmi_nearly_vacuous_rate_is_feasible() {
        assert!(lmi_feasible(1.0, 10.0, 0.0, 1.0 - 1e-9).feasible);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, f) = golden_min(|x| (x - 0.3).powi(2) + 1.0, -1.0, 2.0);
        assert_relative_eq!(x, 0.3, epsilon = 1e-6);
        assert_relative_eq!(f, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_box_identity_p_gives_unit_level() {
        let plant = crate::model::Plant::new(Mat::zeros(2, 2), Mat::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        // A = 0 ⇒ K = 0, P = Q = I: the input rows vanish.
        let cost = CostSpec::new(&plant, Mat::identity(2, 2), Mat::identity(1, 1), 2).unwrap();
        let region = terminal_region(
            &cost,
            &Polytope::symmetric_box(2, 1.0).unwrap(),
            &Polytope::symmetric_box(1, 0.5).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(region.c, 1.0, epsilon = 1e-12);
        assert_relative_eq!(region.d, 1.0, epsilon = 1e-12);
        assert_relative_eq!(region.r_n, 3.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn terminal_level_scales_quadratically() {
        let inst = MpcInstance::double_integrator();
        let small = terminal_region(&inst.cost, &inst.state_set, &inst.input_set).unwrap();
        let big = terminal_region(
            &inst.cost,
            &Polytope::symmetric_box(2, 50.0).unwrap(),
            &Polytope::symmetric_box(1, 5.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(big.c, 100.0 * small.c, max_relative = 1e-12);
    }

    #[test]
    fn l1_vanishes_without_coupling() {
        // A = 0 with a single-step horizon: ξ₀ does not enter the predicted cost.
        let plant = crate::model::Plant::new(Mat::zeros(2, 2), Mat::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        let cost = CostSpec::new(&plant, Mat::identity(2, 2), Mat::identity(1, 1), 2).unwrap();
        let prob = crate::model::condense(
            &plant,
            &cost,
            &Polytope::symmetric_box(2, 1.0).unwrap(),
            &Polytope::symmetric_box(1, 1.0).unwrap(),
        )
        .unwrap();
        assert!(prob.g().amax() < 1e-15);
        assert!(lipschitz_l1(&prob) < 1e-12);
    }

    #[test]
    fn certificate_rejects_bad_tau() {
        let prob = MpcInstance::double_integrator().condense().unwrap();
        assert!(certificate(&prob, 1.95, 1.0).is_err());
        assert!(certificate(&prob, 1.95, 0.0).is_err());
    }
}
