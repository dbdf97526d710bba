//! Dense strictly convex quadratic programming.
//!
//! Problems have the normal form
//!
//! ```text
//!     minimize    ½ zᵀ P z + qᵀ z
//!     subject to  E z  = e
//!                 C z ≤ d
//! ```
//!
//! and are solved with a primal active-set method. Each iteration solves the
//! equality-constrained subproblem on the current working set through a
//! null-space basis. A feasible starting point comes from a phase-1 problem
//! that minimizes the total constraint violation.
//!
//! Multipliers follow the convention `P z + q + Eᵀλ + Cᵀμ = 0`, `μ ≥ 0`.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{CondensedProblem, ConstraintSet};

const RANK_TOL: f64 = 1e-10;
const PHASE1_REG: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct QpInstance {
    pub hessian: Mat,
    pub linear: Vector,
    pub eq_mat: Mat,
    pub eq_rhs: Vector,
    pub ineq_mat: Mat,
    pub ineq_rhs: Vector,
}

impl QpInstance {
    pub fn new(
        hessian: Mat,
        linear: Vector,
        eq_mat: Mat,
        eq_rhs: Vector,
        ineq_mat: Mat,
        ineq_rhs: Vector,
    ) -> Result<Self> {
        let s = hessian.nrows();
        if hessian.ncols() != s || linear.len() != s {
            return Err(Error::DimensionMismatch("Hessian and linear term disagree".into()));
        }
        if eq_mat.ncols() != s && eq_mat.nrows() > 0 {
            return Err(Error::DimensionMismatch("equality rows have the wrong width".into()));
        }
        if ineq_mat.ncols() != s && ineq_mat.nrows() > 0 {
            return Err(Error::DimensionMismatch("inequality rows have the wrong width".into()));
        }
        if eq_mat.nrows() != eq_rhs.len() || ineq_mat.nrows() != ineq_rhs.len() {
            return Err(Error::DimensionMismatch(
                "constraint rows and right-hand sides disagree".into(),
            ));
        }
        // Normalize empty blocks to the right width.
        let eq_mat = if eq_mat.nrows() == 0 { Mat::zeros(0, s) } else { eq_mat };
        let ineq_mat = if ineq_mat.nrows() == 0 {
            Mat::zeros(0, s)
        } else {
            ineq_mat
        };
        if linalg::symmetrize(&hessian).cholesky().is_none() {
            return Err(Error::IllConditioned("QP Hessian is not positive definite".into()));
        }
        Ok(Self {
            hessian,
            linear,
            eq_mat,
            eq_rhs,
            ineq_mat,
            ineq_rhs,
        })
    }

    /// Euclidean projection onto `set`: `min ½‖z − point‖²`.
    pub fn projection(point: &Vector, set: &ConstraintSet) -> Result<Self> {
        let s = point.len();
        Self::new(
            Mat::identity(s, s),
            -point,
            set.eq_mat.clone(),
            set.eq_rhs.clone(),
            set.ineq_mat.clone(),
            set.ineq_rhs.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.hessian.nrows()
    }

    pub fn objective(&self, z: &Vector) -> f64 {
        0.5 * linalg::quad_form(&self.hessian, z) + self.linear.dot(z)
    }

    pub fn max_violation(&self, z: &Vector) -> f64 {
        let eq = if self.eq_rhs.is_empty() {
            0.0
        } else {
            (&self.eq_mat * z - &self.eq_rhs).amax()
        };
        let ineq = (&self.ineq_mat * z - &self.ineq_rhs)
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v));
        eq.max(ineq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: Vector,
    pub eq_duals: Vector,
    pub ineq_duals: Vector,
    /// Inequality rows in the final working set, ascending.
    pub active_set: Vec<usize>,
    pub status: QpStatus,
    pub iterations: usize,
    pub objective: f64,
}

/// Components of the KKT residual at a candidate solution.
#[derive(Debug, Clone, Copy)]
pub struct KktResidual {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
    pub dual_negativity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.complementarity)
            .max(self.dual_negativity)
    }
}

impl QpSolution {
    pub fn kkt_residual(&self, inst: &QpInstance) -> KktResidual {
        let grad = &inst.hessian * &self.z
            + &inst.linear
            + inst.eq_mat.transpose() * &self.eq_duals
            + inst.ineq_mat.transpose() * &self.ineq_duals;
        let slack = &inst.ineq_mat * &self.z - &inst.ineq_rhs;
        let complementarity = slack
            .iter()
            .zip(self.ineq_duals.iter())
            .fold(0.0_f64, |acc, (&s, &mu)| acc.max((s * mu).abs()));
        let dual_negativity = self.ineq_duals.iter().fold(0.0_f64, |acc, &mu| acc.max(-mu));
        KktResidual {
            stationarity: grad.amax(),
            primal: inst.max_violation(&self.z),
            complementarity,
            dual_negativity,
        }
    }
}

/// Primal active-set solver. Holds no problem data between calls, only
/// its settings; warm starts are passed explicitly.
#[derive(Debug, Clone)]
pub struct ActiveSetSolver {
    pub max_iter: usize,
    /// Relative threshold below which a step is treated as zero.
    pub step_tol: f64,
    /// Multipliers above `−dual_tol` count as nonnegative.
    pub dual_tol: f64,
    /// Largest total violation accepted from phase 1.
    pub feas_tol: f64,
}

impl Default for ActiveSetSolver {
    fn default() -> Self {
        Self {
            max_iter: 500,
            step_tol: 1e-13,
            dual_tol: 1e-11,
            feas_tol: 1e-9,
        }
    }
}

struct WorkingSystem {
    rows: Mat,
    rhs: Vector,
}

impl ActiveSetSolver {
    /// Solve from scratch: reduce equalities, run phase 1, then phase 2.
    pub fn solve(&self, inst: &QpInstance) -> Result<QpSolution> {
        let (z0, working) = self.feasible_start(inst)?;
        self.solve_from(inst, z0, &working)
    }

    /// Solve from a (numerically) feasible `z0` with a candidate working set.
    ///
    /// Rows of `working` that are not active at `z0` or that are linearly
    /// dependent on earlier ones are dropped.
    pub fn solve_from(&self, inst: &QpInstance, z0: Vector, working: &[usize]) -> Result<QpSolution> {
        let eq = reduce_equalities(inst)?;
        let scale = 1.0
            + inst
                .ineq_rhs
                .amax()
                .max(inst.eq_rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
        let act_tol = 1e-9 * scale;

        let mut z = z0;
        let mut w: Vec<usize> = Vec::new();
        let mut candidates: Vec<usize> = working.to_vec();
        candidates.sort_unstable();
        candidates.dedup();
        for &i in &candidates {
            if i < inst.ineq_mat.nrows()
                && inst.ineq_mat.row(i).dot(&z.transpose()) >= inst.ineq_rhs[i] - act_tol
                && independent_of(&eq, inst, &w, i)
            {
                w.push(i);
            }
        }
        w.sort_unstable();

        for iter in 0..self.max_iter {
            let sys = working_system(&eq, inst, &w);
            let z_eqp = solve_eqp(inst, &sys)?;
            let p = &z_eqp - &z;
            if p.norm() <= self.step_tol * (1.0 + z.norm()) {
                z = z_eqp;
                let (lambda, mu_w) = working_multipliers(inst, &sys, &eq, &z);
                let threshold = -self.dual_tol * (1.0 + mu_w.amax());
                // Most negative multiplier; ties go to the smallest row index.
                let worst = mu_w
                    .iter()
                    .enumerate()
                    .filter(|(_, &mu)| mu < threshold)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k);
                match worst {
                    None => return Ok(self.finish(inst, &eq, z, &w, lambda, mu_w, iter + 1)),
                    Some(k) => {
                        w.remove(k);
                    }
                }
            } else {
                let mut alpha = 1.0;
                let mut blocking: Option<usize> = None;
                for i in 0..inst.ineq_mat.nrows() {
                    if w.binary_search(&i).is_ok() {
                        continue;
                    }
                    let cp = inst.ineq_mat.row(i).dot(&p.transpose());
                    if cp <= 1e-14 * (1.0 + p.amax()) {
                        continue;
                    }
                    let gap = (inst.ineq_rhs[i] - inst.ineq_mat.row(i).dot(&z.transpose())).max(0.0);
                    let ratio = gap / cp;
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
                z += &p * alpha;
                if let Some(i) = blocking {
                    if independent_of(&eq, inst, &w, i) {
                        let pos = w.binary_search(&i).unwrap_or_else(|e| e);
                        w.insert(pos, i);
                    } else {
                        return Err(Error::IllConditioned(format!(
                            "blocking constraint {i} is dependent on the working set"
                        )));
                    }
                }
            }
        }
        Err(Error::MaxIterations(self.max_iter))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        inst: &QpInstance,
        eq: &ReducedEqualities,
        z: Vector,
        w: &[usize],
        lambda_reduced: Vector,
        mu_w: Vector,
        iterations: usize,
    ) -> QpSolution {
        let mut eq_duals = Vector::zeros(inst.eq_rhs.len());
        for (k, &row) in eq.kept.iter().enumerate() {
            eq_duals[row] = lambda_reduced[k];
        }
        let mut ineq_duals = Vector::zeros(inst.ineq_rhs.len());
        for (k, &i) in w.iter().enumerate() {
            ineq_duals[i] = mu_w[k].max(0.0);
        }
        let objective = inst.objective(&z);
        QpSolution {
            z,
            eq_duals,
            ineq_duals,
            active_set: w.to_vec(),
            status: QpStatus::Optimal,
            iterations,
            objective,
        }
    }

    /// Phase 1: find a point of the feasible set, or prove it empty.
    pub fn feasible_start(&self, inst: &QpInstance) -> Result<(Vector, Vec<usize>)> {
        let eq = reduce_equalities(inst)?;
        let s = inst.dim();
        let z_part = least_squares(&eq.rows, &eq.rhs, s);
        let k = inst.ineq_mat.nrows();
        let viol = &inst.ineq_mat * &z_part - &inst.ineq_rhs;
        if viol.iter().all(|&v| v <= 0.0) {
            return Ok((z_part, Vec::new()));
        }

        // Variables (z, t): min Σt + ½ε(‖z − z_part‖² + ‖t‖²)
        // s.t. E z = e, C z − t ≤ d, −t ≤ 0.
        let dim = s + k;
        let hess = Mat::identity(dim, dim) * PHASE1_REG;
        let mut lin = Vector::from_element(dim, 1.0);
        lin.rows_mut(0, s).copy_from(&(-&z_part * PHASE1_REG));
        let mut e_aux = Mat::zeros(eq.rows.nrows(), dim);
        e_aux.view_mut((0, 0), (eq.rows.nrows(), s)).copy_from(&eq.rows);
        let mut c_aux = Mat::zeros(2 * k, dim);
        c_aux.view_mut((0, 0), (k, s)).copy_from(&inst.ineq_mat);
        c_aux.view_mut((0, s), (k, k)).copy_from(&(-Mat::identity(k, k)));
        c_aux.view_mut((k, s), (k, k)).copy_from(&(-Mat::identity(k, k)));
        let mut d_aux = Vector::zeros(2 * k);
        d_aux.rows_mut(0, k).copy_from(&inst.ineq_rhs);
        let aux = QpInstance::new(hess, lin, e_aux, eq.rhs.clone(), c_aux, d_aux)?;

        let mut start = Vector::zeros(dim);
        start.rows_mut(0, s).copy_from(&z_part);
        for i in 0..k {
            start[s + i] = viol[i].max(0.0);
        }
        let phase1 = self.solve_from(&aux, start, &[])?;
        let z = phase1.z.rows(0, s).into_owned();
        let violation = inst.max_violation(&z);
        let scale = 1.0 + inst.ineq_rhs.amax().max(0.0);
        if violation > self.feas_tol * scale {
            return Err(Error::Infeasible { violation });
        }
        let act_tol = 1e-9 * scale;
        let working: Vec<usize> = (0..k)
            .filter(|&i| inst.ineq_mat.row(i).dot(&z.transpose()) >= inst.ineq_rhs[i] - act_tol)
            .collect();
        Ok((z, working))
    }
}

/// Solve with the default solver settings.
pub fn solve_qp(inst: &QpInstance) -> Result<QpSolution> {
    ActiveSetSolver::default().solve(inst)
}

/// Euclidean projection of `point` onto `set`.
pub fn project(point: &Vector, set: &ConstraintSet) -> Result<Vector> {
    let inst = QpInstance::projection(point, set)?;
    Ok(solve_qp(&inst)?.z)
}

/// Repeated projection onto one fixed set, warm started from the previous
/// result (which is feasible for the same set).
#[derive(Debug, Clone)]
pub struct Projector {
    set: ConstraintSet,
    solver: ActiveSetSolver,
    last: Option<(Vector, Vec<usize>)>,
}

impl Projector {
    pub fn new(set: ConstraintSet) -> Self {
        Self {
            set,
            solver: ActiveSetSolver::default(),
            last: None,
        }
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn project(&mut self, point: &Vector) -> Result<Vector> {
        let inst = QpInstance::projection(point, &self.set)?;
        let sol = match self.last.take() {
            Some((z0, working)) => self.solver.solve_from(&inst, z0, &working)?,
            None => self.solver.solve(&inst)?,
        };
        self.last = Some((sol.z.clone(), sol.active_set.clone()));
        Ok(sol.z)
    }
}

/// Exact solution of the condensed OCP at one initial state.
#[derive(Debug, Clone)]
pub struct ExactOcp {
    /// Optimal stacked decision `u* = [x_t; ν₀*; …]`.
    pub u: Vector,
    /// `V_N*(x_t) = ‖u*‖²_M`.
    pub value: f64,
    /// Consensus dual `y* = −∇J(u*) = −2 M u*`.
    pub y: Vector,
    pub eq_duals: Vector,
    pub ineq_duals: Vector,
    pub active_set: Vec<usize>,
}

impl ExactOcp {
    /// `φ* = [u*; y*]`.
    pub fn phi(&self) -> Vector {
        let s = self.u.len();
        let mut phi = Vector::zeros(2 * s);
        phi.rows_mut(0, s).copy_from(&self.u);
        phi.rows_mut(s, s).copy_from(&self.y);
        phi
    }
}

/// Solve `min ‖u‖²_M` over `u ∈ 𝒲(x_t)` with the active-set method.
pub fn solve_exact_ocp(problem: &CondensedProblem, x_t: &Vector) -> Result<ExactOcp> {
    let set = problem.stack_constraints(x_t)?;
    let s = problem.s();
    let inst = QpInstance::new(
        problem.hessian() * 2.0,
        Vector::zeros(s),
        set.eq_mat,
        set.eq_rhs,
        set.ineq_mat,
        set.ineq_rhs,
    )?;
    let sol = solve_qp(&inst)?;
    let value = problem.cost_of(&sol.z);
    let y = -(problem.hessian() * &sol.z) * 2.0;
    Ok(ExactOcp {
        u: sol.z,
        value,
        y,
        eq_duals: sol.eq_duals,
        ineq_duals: sol.ineq_duals,
        active_set: sol.active_set,
    })
}

/// Linearly independent subset of the equality rows.
struct ReducedEqualities {
    rows: Mat,
    rhs: Vector,
    kept: Vec<usize>,
}

fn reduce_equalities(inst: &QpInstance) -> Result<ReducedEqualities> {
    let s = inst.dim();
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..inst.eq_mat.nrows() {
        let mut trial = kept.clone();
        trial.push(i);
        let rows = select_rows(&inst.eq_mat, &trial, s);
        if linalg::rank(&rows, RANK_TOL) == trial.len() {
            kept = trial;
        }
    }
    let rows = select_rows(&inst.eq_mat, &kept, s);
    let rhs = Vector::from_iterator(kept.len(), kept.iter().map(|&i| inst.eq_rhs[i]));
    if kept.len() < inst.eq_mat.nrows() {
        let z = least_squares(&rows, &rhs, s);
        let resid = (&inst.eq_mat * &z - &inst.eq_rhs).amax();
        if resid > 1e-9 * (1.0 + inst.eq_rhs.amax()) {
            return Err(Error::Infeasible { violation: resid });
        }
    }
    Ok(ReducedEqualities { rows, rhs, kept })
}

fn select_rows(m: &Mat, idx: &[usize], cols: usize) -> Mat {
    let mut out = Mat::zeros(idx.len(), cols);
    for (k, &i) in idx.iter().enumerate() {
        out.set_row(k, &m.row(i));
    }
    out
}

fn working_system(eq: &ReducedEqualities, inst: &QpInstance, w: &[usize]) -> WorkingSystem {
    let s = inst.dim();
    let k_eq = eq.rows.nrows();
    let mut rows = Mat::zeros(k_eq + w.len(), s);
    let mut rhs = Vector::zeros(k_eq + w.len());
    rows.view_mut((0, 0), (k_eq, s)).copy_from(&eq.rows);
    rhs.rows_mut(0, k_eq).copy_from(&eq.rhs);
    for (k, &i) in w.iter().enumerate() {
        rows.set_row(k_eq + k, &inst.ineq_mat.row(i));
        rhs[k_eq + k] = inst.ineq_rhs[i];
    }
    WorkingSystem { rows, rhs }
}

fn independent_of(eq: &ReducedEqualities, inst: &QpInstance, w: &[usize], candidate: usize) -> bool {
    let mut trial = w.to_vec();
    trial.push(candidate);
    let sys = working_system(eq, inst, &trial);
    linalg::rank(&sys.rows, RANK_TOL) == sys.rows.nrows()
}

/// Minimum-norm solution of `a z = b` (pseudo-inverse).
fn least_squares(a: &Mat, b: &Vector, cols: usize) -> Vector {
    if a.nrows() == 0 {
        return Vector::zeros(cols);
    }
    let svd = a.clone().svd(true, true);
    let tol = RANK_TOL * svd.singular_values.max();
    svd.solve(b, tol).expect("SVD with U and V")
}

/// Minimizer of the objective on `{z : rows z = rhs}`.
fn solve_eqp(inst: &QpInstance, sys: &WorkingSystem) -> Result<Vector> {
    let s = inst.dim();
    let z_part = least_squares(&sys.rows, &sys.rhs, s);
    let basis = linalg::null_space(&sys.rows, RANK_TOL);
    if basis.ncols() == 0 {
        return Ok(z_part);
    }
    let reduced = basis.transpose() * &inst.hessian * &basis;
    let grad = &inst.hessian * &z_part + &inst.linear;
    let chol = linalg::symmetrize(&reduced)
        .cholesky()
        .ok_or_else(|| Error::IllConditioned("reduced Hessian is not positive definite".into()))?;
    let step = chol.solve(&(-(basis.transpose() * grad)));
    Ok(z_part + basis * step)
}

/// Multipliers `(λ, μ_W)` with `P z + q + E_Wᵀλ + C_Wᵀμ_W = 0` in least squares.
fn working_multipliers(inst: &QpInstance, sys: &WorkingSystem, eq: &ReducedEqualities, z: &Vector) -> (Vector, Vector) {
    let k_eq = eq.rows.nrows();
    let total = sys.rows.nrows();
    if total == 0 {
        return (Vector::zeros(0), Vector::zeros(0));
    }
    let grad = &inst.hessian * z + &inst.linear;
    let mult = least_squares(&sys.rows.transpose(), &(-grad), total);
    (
        mult.rows(0, k_eq).into_owned(),
        mult.rows(k_eq, total - k_eq).into_owned(),
    )
}
