//! Constrained LQR instances and their condensed quadratic-program form.
//!
//! The horizon-`N` problem is written over the stacked decision vector
//! `u = [ξ₀; ν₀; …; ν_{N−1}] ∈ ℝ^s`, `s = n + N·m`, whose cost is the
//! quadratic form `‖u‖²_M` with `M = [[W, Gᵀ], [G, H]]`. The prediction
//! matrix `Ā` maps `u` to the stacked states `[ξ₁; …; ξ_N]`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

const PBH_REL_TOL: f64 = 1e-8;
const DARE_MAX_ITER: usize = 10_000;
const DARE_REL_TOL: f64 = 1e-12;

/// Linear time-invariant plant `x⁺ = A x + B u`.
#[derive(Debug, Clone)]
pub struct Plant {
    a: Mat,
    b: Mat,
}

impl Plant {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B must be {}xm with m > 0, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !linalg::is_finite(&a) || !linalg::is_finite(&b) {
            return Err(Error::InvalidParameter("A and B must be finite".into()));
        }
        check_stabilizable(&a, &b)?;
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }
}

/// PBH test on every eigenvalue of `A` with modulus ≥ 1.
pub fn check_stabilizable(a: &Mat, b: &Mat) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    for lambda in a.clone().complex_eigenvalues().iter() {
        if lambda.norm() < 1.0 {
            continue;
        }
        let mut pbh = DMatrix::<Complex<f64>>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                let diag = if i == j { *lambda } else { Complex::new(0.0, 0.0) };
                pbh[(i, j)] = Complex::new(a[(i, j)], 0.0) - diag;
            }
            for j in 0..m {
                pbh[(i, n + j)] = Complex::new(b[(i, j)], 0.0);
            }
        }
        let sv = pbh.svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if smax == 0.0 || smin <= PBH_REL_TOL * smax {
            return Err(Error::NotStabilizable {
                re: lambda.re,
                im: lambda.im,
            });
        }
    }
    Ok(())
}

/// H-representation `{z : C z ≤ d}` of a polytope containing the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    c: Mat,
    d: Vector,
}

impl Polytope {
    pub fn new(c: Mat, d: Vector) -> Result<Self> {
        if c.nrows() != d.len() {
            return Err(Error::DimensionMismatch(format!(
                "polytope has {} rows in C but {} entries in d",
                c.nrows(),
                d.len()
            )));
        }
        if !linalg::is_finite(&c) || d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("polytope data must be finite".into()));
        }
        for i in 0..c.nrows() {
            if c.row(i).norm() == 0.0 {
                return Err(Error::DegenerateRow(i));
            }
            if d[i] < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "polytope row {i} excludes the origin (d = {})",
                    d[i]
                )));
            }
        }
        Ok(Self { c, d })
    }

    /// Axis-aligned box `lo ≤ z ≤ hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        let k = lo.len();
        let mut c = Mat::zeros(2 * k, k);
        let mut d = Vector::zeros(2 * k);
        for i in 0..k {
            c[(2 * i, i)] = 1.0;
            d[2 * i] = hi[i];
            c[(2 * i + 1, i)] = -1.0;
            d[2 * i + 1] = -lo[i];
        }
        Self::new(c, d)
    }

    /// Symmetric box `|zᵢ| ≤ bound`.
    pub fn symmetric_box(dim: usize, bound: f64) -> Result<Self> {
        Self::from_box(&vec![-bound; dim], &vec![bound; dim])
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn d(&self) -> &Vector {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.c.nrows()
    }

    /// Largest constraint violation `max(Cz − d)`, clamped at zero.
    pub fn violation(&self, z: &Vector) -> f64 {
        (&self.c * z - &self.d).iter().fold(0.0_f64, |acc, &v| acc.max(v))
    }

    pub fn contains(&self, z: &Vector, tol: f64) -> bool {
        self.violation(z) <= tol
    }
}

/// Quadratic stage and terminal weights together with the DARE solution.
#[derive(Debug, Clone)]
pub struct CostSpec {
    q: Mat,
    r: Mat,
    horizon: usize,
    p: Mat,
    k: Mat,
}

impl CostSpec {
    pub fn new(plant: &Plant, q: Mat, r: Mat, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon N must be positive".into()));
        }
        let (p, k) = solve_dare(plant, &q, &r)?;
        Ok(Self { q, r, horizon, p, k })
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Terminal weight, the stabilizing DARE solution.
    pub fn p(&self) -> &Mat {
        &self.p
    }

    /// Unconstrained LQR gain; the optimal feedback is `u = −K x`.
    pub fn k(&self) -> &Mat {
        &self.k
    }
}

fn check_spd(name: &str, m: &Mat, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be {dim}x{dim}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !linalg::is_finite(m) {
        return Err(Error::InvalidParameter(format!("{name} must be finite")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParameter(format!("{name} must be symmetric")));
    }
    let lmin = linalg::lambda_min(m);
    if lmin <= 1e-12 * m.amax() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive definite (λ_min = {lmin:.3e})"
        )));
    }
    Ok(())
}

fn lqr_gain(a: &Mat, b: &Mat, r: &Mat, p: &Mat) -> Result<Mat> {
    let lhs = r + b.transpose() * p * b;
    let rhs = b.transpose() * p * a;
    lhs.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::IllConditioned("R + BᵀPB is not positive definite".into()))
}

/// Residual `Q + AᵀPA − KᵀBᵀPA − P` of the DARE at `(P, K)`.
pub fn dare_residual(plant: &Plant, q: &Mat, p: &Mat, k: &Mat) -> Mat {
    let (a, b) = (plant.a(), plant.b());
    q + a.transpose() * p * a - k.transpose() * b.transpose() * p * a - p
}

/// Stabilizing solution of the discrete-time algebraic Riccati equation.
///
/// Runs the Riccati recursion `P ← Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA` from
/// `P₀ = Q` until the relative update falls below 1e−12.
pub fn solve_dare(plant: &Plant, q: &Mat, r: &Mat) -> Result<(Mat, Mat)> {
    let (a, b) = (plant.a(), plant.b());
    check_spd("Q", q, plant.n())?;
    check_spd("R", r, plant.m())?;
    check_stabilizable(a, b)?;

    let mut p = q.clone();
    for _ in 0..DARE_MAX_ITER {
        let k = lqr_gain(a, b, r, &p)?;
        let next = linalg::symmetrize(&(q + a.transpose() * &p * a - a.transpose() * &p * b * &k));
        let delta = (&next - &p).norm();
        let scale = p.norm();
        p = next;
        if delta <= DARE_REL_TOL * scale {
            let k = lqr_gain(a, b, r, &p)?;
            return Ok((p, k));
        }
    }
    Err(Error::NonConvergent {
        iterations: DARE_MAX_ITER,
    })
}

/// The condensed quadratic program for one problem instance.
#[derive(Debug, Clone)]
pub struct CondensedProblem {
    plant: Plant,
    cost: CostSpec,
    state_set: Polytope,
    input_set: Polytope,
    w: Mat,
    g: Mat,
    h: Mat,
    hessian: Mat,
    abar: Mat,
}

/// Build `W, G, H, M` and `Ā` for the given plant, cost and constraint sets.
pub fn condense(
    plant: &Plant,
    cost: &CostSpec,
    state_set: &Polytope,
    input_set: &Polytope,
) -> Result<CondensedProblem> {
    let (n, m, horizon) = (plant.n(), plant.m(), cost.horizon());
    if cost.q().nrows() != n || cost.r().nrows() != m {
        return Err(Error::DimensionMismatch("cost weights do not match the plant".into()));
    }
    if state_set.dim() != n || input_set.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "constraint sets have dimensions {} and {}, expected {n} and {m}",
            state_set.dim(),
            input_set.dim()
        )));
    }
    let s = n + horizon * m;

    // Block row i of Ā gives ξ_{i+1} = A^{i+1} ξ₀ + Σ_j A^{i−j} B ν_j.
    let mut powers = vec![Mat::identity(n, n)];
    for i in 1..=horizon {
        powers.push(plant.a() * &powers[i - 1]);
    }
    let mut abar = Mat::zeros(n * horizon, s);
    for i in 0..horizon {
        abar.view_mut((i * n, 0), (n, n)).copy_from(&powers[i + 1]);
        for j in 0..=i {
            let blk = &powers[i - j] * plant.b();
            abar.view_mut((i * n, n + j * m), (n, m)).copy_from(&blk);
        }
    }

    let mut stage_blocks: Vec<&Mat> = vec![cost.q(); horizon - 1];
    stage_blocks.push(cost.p());
    let qbar = linalg::block_diag(&stage_blocks);

    let mut direct: Vec<&Mat> = vec![cost.q()];
    direct.extend(std::iter::repeat_n(cost.r(), horizon));
    let hessian = linalg::symmetrize(&(abar.transpose() * &qbar * &abar + linalg::block_diag(&direct)));

    if hessian.clone().cholesky().is_none() {
        return Err(Error::IllConditioned(
            "condensed Hessian M is not positive definite".into(),
        ));
    }

    let w = hessian.view((0, 0), (n, n)).into_owned();
    let g = hessian.view((n, 0), (s - n, n)).into_owned();
    let h = hessian.view((n, n), (s - n, s - n)).into_owned();

    Ok(CondensedProblem {
        plant: plant.clone(),
        cost: cost.clone(),
        state_set: state_set.clone(),
        input_set: input_set.clone(),
        w,
        g,
        h,
        hessian,
        abar,
    })
}

impl CondensedProblem {
    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    pub fn state_set(&self) -> &Polytope {
        &self.state_set
    }

    pub fn input_set(&self) -> &Polytope {
        &self.input_set
    }

    pub fn n(&self) -> usize {
        self.plant.n()
    }

    pub fn m(&self) -> usize {
        self.plant.m()
    }

    pub fn horizon(&self) -> usize {
        self.cost.horizon()
    }

    /// Decision dimension `s = n + N·m`.
    pub fn s(&self) -> usize {
        self.n() + self.horizon() * self.m()
    }

    pub fn w(&self) -> &Mat {
        &self.w
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    /// The full Hessian `M = [[W, Gᵀ], [G, H]]`.
    pub fn hessian(&self) -> &Mat {
        &self.hessian
    }

    pub fn abar(&self) -> &Mat {
        &self.abar
    }

    /// `J(u) = ‖u‖²_M`.
    pub fn cost_of(&self, u: &Vector) -> f64 {
        linalg::quad_form(&self.hessian, u)
    }

    /// Input block `νᵢ` of a stacked decision vector.
    pub fn input_block(&self, u: &Vector, i: usize) -> Vector {
        u.rows(self.n() + i * self.m(), self.m()).into_owned()
    }

    /// First applied input `ν₀` (the selector `Ξ_φ` restricted to `r`).
    pub fn first_input(&self, u: &Vector) -> Vector {
        self.input_block(u, 0)
    }

    /// `B̄ = B Ξ_φ` as an `n × 2s` matrix acting on `φ = [r; y]`.
    pub fn bbar(&self) -> Mat {
        let s = self.s();
        let mut out = Mat::zeros(self.n(), 2 * s);
        out.view_mut((0, self.n()), (self.n(), self.m()))
            .copy_from(self.plant.b());
        out
    }

    /// Predicted states `[ξ₁; …; ξ_N]` for the stacked decision `u`.
    pub fn predict(&self, u: &Vector) -> Vector {
        &self.abar * u
    }

    /// H-representation of `𝒲(x_t)`: `r₀ = x_t`, `r₀ ∈ 𝒳`, `νᵢ ∈ 𝒰`, `Ā r ∈ 𝒳̄`.
    pub fn stack_constraints(&self, x_t: &Vector) -> Result<ConstraintSet> {
        let (n, m, horizon, s) = (self.n(), self.m(), self.horizon(), self.s());
        if x_t.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state has length {}, expected {n}",
                x_t.len()
            )));
        }
        if !self.state_set.contains(x_t, 1e-12) {
            return Err(Error::InfeasibleParameter(format!("{:?}", x_t.as_slice())));
        }
        let (cx, dx) = (self.state_set.c(), self.state_set.d());
        let (cu, du) = (self.input_set.c(), self.input_set.d());
        let kx = cx.nrows();
        let ku = cu.nrows();
        let rows = kx + horizon * ku + horizon * kx;

        let mut c = Mat::zeros(rows, s);
        let mut d = Vector::zeros(rows);
        let mut row = 0;

        // ξ₀ ∈ 𝒳; redundant with r₀ = x_t but part of 𝒰^N as defined.
        c.view_mut((row, 0), (kx, n)).copy_from(cx);
        d.rows_mut(row, kx).copy_from(dx);
        row += kx;

        for i in 0..horizon {
            c.view_mut((row, n + i * m), (ku, m)).copy_from(cu);
            d.rows_mut(row, ku).copy_from(du);
            row += ku;
        }
        for i in 0..horizon {
            let block = cx * self.abar.view((i * n, 0), (n, s));
            c.view_mut((row, 0), (kx, s)).copy_from(&block);
            d.rows_mut(row, kx).copy_from(dx);
            row += kx;
        }

        let mut e = Mat::zeros(n, s);
        e.view_mut((0, 0), (n, n)).fill_with_identity();
        Ok(ConstraintSet {
            eq_mat: e,
            eq_rhs: x_t.clone(),
            ineq_mat: c,
            ineq_rhs: d,
        })
    }

    /// Roll the plant forward from `u`'s first block, returning `[ξ₀, …, ξ_N]`.
    pub fn rollout(&self, u: &Vector) -> Vec<Vector> {
        let mut xs = vec![u.rows(0, self.n()).into_owned()];
        for i in 0..self.horizon() {
            let next = self.plant.step(&xs[i], &self.input_block(u, i));
            xs.push(next);
        }
        xs
    }
}

/// Polyhedral feasible set with explicit equality rows: `E r = e`, `C r ≤ d`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub eq_mat: Mat,
    pub eq_rhs: Vector,
    pub ineq_mat: Mat,
    pub ineq_rhs: Vector,
}

impl ConstraintSet {
    pub fn dim(&self) -> usize {
        self.ineq_mat.ncols().max(self.eq_mat.ncols())
    }

    pub fn max_violation(&self, r: &Vector) -> f64 {
        let eq = (&self.eq_mat * r - &self.eq_rhs).amax();
        let ineq = (&self.ineq_mat * r - &self.ineq_rhs)
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(v));
        eq.max(ineq)
    }

    pub fn contains(&self, r: &Vector, tol: f64) -> bool {
        self.max_violation(r) <= tol
    }

    /// Pure inequality form, equalities split into two opposite rows.
    pub fn as_inequalities(&self) -> (Mat, Vector) {
        let neg = -&self.eq_mat;
        let c = linalg::vstack(&[&self.eq_mat, &neg, &self.ineq_mat]);
        let mut d = Vector::zeros(c.nrows());
        let k = self.eq_rhs.len();
        d.rows_mut(0, k).copy_from(&self.eq_rhs);
        d.rows_mut(k, k).copy_from(&(-&self.eq_rhs));
        d.rows_mut(2 * k, self.ineq_rhs.len()).copy_from(&self.ineq_rhs);
        (c, d)
    }
}

/// Matrix in a problem file: a row-major array of rows, or a scalar that
/// stands for a multiple of the identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn to_matrix(&self, dim_hint: usize) -> Result<Mat> {
        match self {
            MatrixSpec::Scalar(v) => Ok(Mat::identity(dim_hint, dim_hint) * *v),
            MatrixSpec::Rows(rows) => rows_to_matrix(rows),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeSpec {
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: MatrixSpec,
    #[serde(rename = "R")]
    pub r: MatrixSpec,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "X")]
    pub state_set: PolytopeSpec,
    #[serde(rename = "U")]
    pub input_set: PolytopeSpec,
}

/// A complete constrained LQR instance: plant, weights, horizon and sets.
#[derive(Debug, Clone)]
pub struct MpcInstance {
    pub plant: Plant,
    pub cost: CostSpec,
    pub state_set: Polytope,
    pub input_set: Polytope,
}

impl MpcInstance {
    pub fn from_file(spec: &ProblemFile) -> Result<Self> {
        let a = rows_to_matrix(&spec.a)?;
        let b = rows_to_matrix(&spec.b)?;
        let plant = Plant::new(a, b)?;
        let q = spec.q.to_matrix(plant.n())?;
        let r = spec.r.to_matrix(plant.m())?;
        let cost = CostSpec::new(&plant, q, r, spec.horizon)?;
        let state_set = Polytope::new(
            rows_to_matrix(&spec.state_set.c)?,
            Vector::from_vec(spec.state_set.d.clone()),
        )?;
        let input_set = Polytope::new(
            rows_to_matrix(&spec.input_set.c)?,
            Vector::from_vec(spec.input_set.d.clone()),
        )?;
        Ok(Self {
            plant,
            cost,
            state_set,
            input_set,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemFile = serde_json::from_str(text)?;
        Self::from_file(&spec)
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            a: matrix_to_rows(self.plant.a()),
            b: matrix_to_rows(self.plant.b()),
            q: MatrixSpec::Rows(matrix_to_rows(self.cost.q())),
            r: MatrixSpec::Rows(matrix_to_rows(self.cost.r())),
            horizon: self.cost.horizon(),
            state_set: PolytopeSpec {
                c: matrix_to_rows(self.state_set.c()),
                d: self.state_set.d().iter().copied().collect(),
            },
            input_set: PolytopeSpec {
                c: matrix_to_rows(self.input_set.c()),
                d: self.input_set.d().iter().copied().collect(),
            },
        }
    }

    pub fn condense(&self) -> Result<CondensedProblem> {
        condense(&self.plant, &self.cost, &self.state_set, &self.input_set)
    }

    /// Double integrator with `𝒰 = [−0.5, 0.5]`, `𝒳 = [−5, 5]²`, `Q = I`, `R = 10`, `N = 3`.
    pub fn double_integrator() -> Self {
        Self::double_integrator_with_b(&[0.0, 1.0])
    }

    /// The same double integrator with input matrix `B = [0.5; 1]`.
    pub fn appendix_d() -> Self {
        Self::double_integrator_with_b(&[0.5, 1.0])
    }

    fn double_integrator_with_b(b: &[f64]) -> Self {
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = Mat::from_column_slice(2, 1, b);
        let plant = Plant::new(a, b).expect("double integrator is stabilizable");
        let cost = CostSpec::new(&plant, Mat::identity(2, 2), Mat::from_element(1, 1, 10.0), 3).expect("valid weights");
        Self {
            plant,
            cost,
            state_set: Polytope::symmetric_box(2, 5.0).expect("box"),
            input_set: Polytope::symmetric_box(1, 0.5).expect("box"),
        }
    }
}
