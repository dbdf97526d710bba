//! Over-relaxed ADMM on the condensed OCP.
//!
//! One pass of the operator `𝒯(r, y; x)` is
//!
//! ```text
//!     u⁺ = argmin_u ‖u‖²_M + ρ/2 ‖u − r + v‖²        = (2M + ρI)⁻¹ ρ (r − v)
//!     r⁺ = Π_𝒲(x) (α u⁺ + (1 − α) r + v)
//!     v⁺ = v + α u⁺ + (1 − α) r − r⁺
//! ```
//!
//! with the scaled dual `v = y / ρ`. The `r` iterate is always feasible, so
//! the first input block of `r` can be applied after any number of passes.

use nalgebra::{Cholesky, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::CondensedProblem;
use crate::qp::Projector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    /// Relaxation `α ∈ (0, 2)`.
    pub alpha: f64,
    /// Step size `ρ > 0`.
    pub rho: f64,
    /// Exponent `ε` in `ρ = √(pL) κ^ε`; only used by the rate analysis.
    pub epsilon: f64,
    /// Iterations per control step, `ℓ ≥ 1`.
    pub ell: usize,
}

impl AdmmParams {
    pub fn new(alpha: f64, rho: f64, epsilon: f64, ell: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 2)")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
        }
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be finite".into()));
        }
        if ell == 0 {
            return Err(Error::InvalidParameter("ell must be at least 1".into()));
        }
        Ok(Self {
            alpha,
            rho,
            epsilon,
            ell,
        })
    }

    /// `ᾱ = 1 − α`.
    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// Optimizer state carried across iterations and control steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmIterate {
    pub r: Vector,
    /// Unscaled dual, always `ρ · v`.
    pub y: Vector,
    pub u: Vector,
    pub v: Vector,
}

impl AdmmIterate {
    pub fn zeros(s: usize) -> Self {
        Self {
            r: Vector::zeros(s),
            y: Vector::zeros(s),
            u: Vector::zeros(s),
            v: Vector::zeros(s),
        }
    }

    /// Build from `φ = [r; y]`; `u` is set to `r`.
    pub fn from_phi(phi: &Vector, rho: f64) -> Self {
        let s = phi.len() / 2;
        let r = phi.rows(0, s).into_owned();
        let y = phi.rows(s, s).into_owned();
        let v = &y / rho;
        Self { u: r.clone(), r, y, v }
    }

    pub fn s(&self) -> usize {
        self.r.len()
    }

    /// `φ = [r; y]`.
    pub fn phi(&self) -> Vector {
        stack(&self.r, &self.y)
    }

    /// `[r; v]`, the coordinates in which the convergence analysis is posed.
    pub fn scaled_phi(&self) -> Vector {
        stack(&self.r, &self.v)
    }
}

pub(crate) fn stack(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Norm induced by `F = [[1, 1 − α], [1 − α, 1]] ⊗ I` on a stacked pair.
///
/// ADMM contracts in this norm on the scaled pair `(r, v)`; see
/// [`f_distance`].
pub fn f_norm(alpha: f64, pair: &Vector) -> f64 {
    let s = pair.len() / 2;
    let a = pair.rows(0, s);
    let b = pair.rows(s, s);
    let sq = a.norm_squared() + 2.0 * (1.0 - alpha) * a.dot(&b) + b.norm_squared();
    sq.max(0.0).sqrt()
}

/// `‖(r, v) − (r', v')‖_F`, the distance in which the iterates contract.
pub fn f_distance(alpha: f64, a: &AdmmIterate, b: &AdmmIterate) -> f64 {
    f_norm(alpha, &(a.scaled_phi() - b.scaled_phi()))
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    /// `φ* = [r*; y*]`.
    pub phi_star: Vector,
    pub iterate: AdmmIterate,
    pub iterations: usize,
    /// `‖𝒯(φ*) − φ*‖_F` at termination, on the scaled pair.
    pub residual: f64,
}

impl FixedPoint {
    pub fn r_star(&self) -> &Vector {
        &self.iterate.r
    }

    pub fn y_star(&self) -> &Vector {
        &self.iterate.y
    }
}

/// `v⁺ = v + α u⁺ + (1 − α) r − r⁺`.
pub fn v_update(params: &AdmmParams, u_next: &Vector, r_prev: &Vector, r_next: &Vector, v: &Vector) -> Vector {
    v + u_next * params.alpha + r_prev * params.alpha_bar() - r_next
}

/// ADMM workspace for one problem and one parameter set.
///
/// Holds the Cholesky factor of `2M + ρI` and a warm-started projector for
/// the most recent `x_t`; create one per trajectory.
#[derive(Debug, Clone)]
pub struct AdmmSolver<'a> {
    problem: &'a CondensedProblem,
    params: AdmmParams,
    factor: Cholesky<f64, Dyn>,
    projector: Option<(Vector, Projector)>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(problem: &'a CondensedProblem, params: AdmmParams) -> Result<Self> {
        let factor = factor_system(problem, params.rho)?;
        Ok(Self {
            problem,
            params,
            factor,
            projector: None,
        })
    }

    pub fn problem(&self) -> &'a CondensedProblem {
        self.problem
    }

    pub fn params(&self) -> &AdmmParams {
        &self.params
    }

    /// Change the parameters, refactoring only if `ρ` changed.
    pub fn set_params(&mut self, params: AdmmParams) -> Result<()> {
        if params.rho != self.params.rho {
            self.factor = factor_system(self.problem, params.rho)?;
        }
        self.params = params;
        Ok(())
    }

    /// `u⁺ = (2M + ρI)⁻¹ ρ (r − v)`.
    pub fn u_update(&self, r: &Vector, v: &Vector) -> Vector {
        self.factor.solve(&((r - v) * self.params.rho))
    }

    /// `r⁺ = Π_𝒲(x_t)(α u⁺ + (1 − α) r + v)`.
    pub fn r_update(&mut self, x_t: &Vector, u_next: &Vector, r: &Vector, v: &Vector) -> Result<Vector> {
        let target = u_next * self.params.alpha + r * self.params.alpha_bar() + v;
        self.projector_for(x_t)?.project(&target)
    }

    fn projector_for(&mut self, x_t: &Vector) -> Result<&mut Projector> {
        let stale = match &self.projector {
            Some((x, _)) => x != x_t,
            None => true,
        };
        if stale {
            let set = self.problem.stack_constraints(x_t)?;
            self.projector = Some((x_t.clone(), Projector::new(set)));
        }
        Ok(&mut self.projector.as_mut().expect("just set").1)
    }

    /// One application of `𝒯`.
    pub fn step(&mut self, x_t: &Vector, it: &AdmmIterate) -> Result<AdmmIterate> {
        let u = self.u_update(&it.r, &it.v);
        let r = self.r_update(x_t, &u, &it.r, &it.v)?;
        let v = v_update(&self.params, &u, &it.r, &r, &it.v);
        let y = &v * self.params.rho;
        Ok(AdmmIterate { r, y, u, v })
    }

    /// `𝒯^ℓ` from `warm`; `ℓ = 0` returns `warm` unchanged.
    pub fn run(&mut self, x_t: &Vector, warm: &AdmmIterate, ell: usize) -> Result<AdmmIterate> {
        let mut it = warm.clone();
        for _ in 0..ell {
            it = self.step(x_t, &it)?;
        }
        Ok(it)
    }

    /// Iterate `𝒯` until `‖𝒯(φ) − φ‖_F ≤ tol · (1 + ‖(r, v)‖)`.
    pub fn solve_to_fixed_point(
        &mut self,
        x_t: &Vector,
        warm: &AdmmIterate,
        tol: f64,
        cap: usize,
    ) -> Result<FixedPoint> {
        let alpha = self.params.alpha;
        let mut it = warm.clone();
        let mut residual = f64::INFINITY;
        for k in 1..=cap {
            let next = self.step(x_t, &it)?;
            residual = f_distance(alpha, &next, &it);
            let scale = 1.0 + next.scaled_phi().norm();
            it = next;
            if residual <= tol * scale {
                return Ok(FixedPoint {
                    phi_star: it.phi(),
                    iterate: it,
                    iterations: k,
                    residual,
                });
            }
        }
        Err(Error::CapExceeded { cap, residual })
    }
}

fn factor_system(problem: &CondensedProblem, rho: f64) -> Result<Cholesky<f64, Dyn>> {
    let s = problem.s();
    let system: Mat = problem.hessian() * 2.0 + Mat::identity(s, s) * rho;
    Cholesky::new(system).ok_or(Error::SingularSystem)
}

/// Default fixed-point tolerance.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Default fixed-point iteration cap.
pub const FIXED_POINT_CAP: usize = 200_000;
