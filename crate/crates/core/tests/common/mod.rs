//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subopt_mpc::model::{CondensedProblem, CostSpec, MpcInstance, Plant, Polytope};
use subopt_mpc::qp::{solve_exact_ocp, QpInstance};
use subopt_mpc::{Mat, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn preset() -> CondensedProblem {
    MpcInstance::double_integrator().condense().unwrap()
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let a = gaussian_matrix(rng, n, n);
    &a * a.transpose() + Mat::identity(n, n) * 0.5
}

/// A random stabilizable instance with box constraints.
pub fn random_instance<R: Rng>(rng: &mut R) -> MpcInstance {
    loop {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let a = gaussian_matrix(rng, n, n) * 1.2;
        let b = gaussian_matrix(rng, n, m);
        let Ok(plant) = Plant::new(a, b) else { continue };
        let q = random_spd(rng, n);
        let r = random_spd(rng, m);
        let horizon = rng.random_range(1..=4);
        let Ok(cost) = CostSpec::new(&plant, q, r, horizon) else {
            continue;
        };
        return MpcInstance {
            plant,
            cost,
            state_set: Polytope::symmetric_box(n, rng.random_range(2.0..6.0)).unwrap(),
            input_set: Polytope::symmetric_box(m, rng.random_range(0.5..2.0)).unwrap(),
        };
    }
}

/// States in `𝒳` whose OCP is feasible, drawn uniformly from the preset box.
pub fn feasible_states<R: Rng>(rng: &mut R, problem: &CondensedProblem, count: usize) -> Vec<Vector> {
    let bound = problem.state_set().d()[0];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = Vector::from_fn(problem.n(), |_, _| rng.random_range(-bound..bound));
        if solve_exact_ocp(problem, &x).is_ok() {
            out.push(x);
        }
    }
    out
}

/// States with `V_N*(x) ≤ level`, found by rejection from a ball.
pub fn states_below_level<R: Rng>(rng: &mut R, problem: &CondensedProblem, level: f64, count: usize) -> Vec<Vector> {
    let radius = (level / subopt_mpc::linalg::lambda_min(problem.cost().p())).sqrt();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = Vector::from_fn(problem.n(), |_, _| rng.random_range(-radius..radius));
        if let Ok(sol) = solve_exact_ocp(problem, &x) {
            if sol.value <= level && sol.value > 1e-6 * level {
                out.push(x);
            }
        }
    }
    out
}

/// Minimize by enumerating every subset of inequalities as the active set.
///
/// Each subset's KKT system is solved directly; the candidate is kept if it
/// is primal feasible with nonnegative multipliers. Returns the best
/// objective, or `None` if no subset qualifies.
pub fn brute_force_qp(inst: &QpInstance) -> Option<(Vector, f64)> {
    let s = inst.dim();
    let k = inst.ineq_mat.nrows();
    let mut best: Option<(Vector, f64)> = None;
    for mask in 0u32..(1 << k) {
        let active: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let rows = inst.eq_mat.nrows() + active.len();
        let dim = s + rows;
        let mut kkt = Mat::zeros(dim, dim);
        let mut rhs = Vector::zeros(dim);
        kkt.view_mut((0, 0), (s, s)).copy_from(&inst.hessian);
        rhs.rows_mut(0, s).copy_from(&(-&inst.linear));
        let mut r = s;
        for i in 0..inst.eq_mat.nrows() {
            let row = inst.eq_mat.row(i);
            kkt.view_mut((r, 0), (1, s)).copy_from(&row);
            kkt.view_mut((0, r), (s, 1)).copy_from(&row.transpose());
            rhs[r] = inst.eq_rhs[i];
            r += 1;
        }
        for &i in &active {
            let row = inst.ineq_mat.row(i);
            kkt.view_mut((r, 0), (1, s)).copy_from(&row);
            kkt.view_mut((0, r), (s, 1)).copy_from(&row.transpose());
            rhs[r] = inst.ineq_rhs[i];
            r += 1;
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 {
            continue;
        }
        let z = sol.rows(0, s).into_owned();
        let mu = sol.rows(s + inst.eq_mat.nrows(), active.len());
        if inst.max_violation(&z) > 1e-9 || mu.iter().any(|&m| m < -1e-9) {
            continue;
        }
        let obj = inst.objective(&z);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((z, obj));
        }
    }
    best
}

/// A random strictly convex QP with a known interior-feasible point.
pub fn random_qp<R: Rng>(rng: &mut R) -> QpInstance {
    let s = rng.random_range(1..=5);
    let k = rng.random_range(0..=10);
    let e = rng.random_range(0..=s.min(2));
    let hessian = random_spd(rng, s);
    let linear = Vector::from_fn(s, |_, _| rng.random_range(-3.0..3.0));
    let z0 = Vector::from_fn(s, |_, _| rng.random_range(-1.0..1.0));
    let eq_mat = gaussian_matrix(rng, e, s);
    let eq_rhs = &eq_mat * &z0;
    let ineq_mat = gaussian_matrix(rng, k, s);
    let slack = Vector::from_fn(k, |_, _| rng.random_range(0.0..1.0));
    let ineq_rhs = &ineq_mat * &z0 + slack;
    QpInstance::new(hessian, linear, eq_mat, eq_rhs, ineq_mat, ineq_rhs).unwrap()
}

/// Trajectory cost `Σ ‖ξᵢ‖²_Q + ‖νᵢ‖²_R + ‖ξ_N‖²_P` by direct simulation.
pub fn rollout_cost(problem: &CondensedProblem, u: &Vector) -> f64 {
    let xs = problem.rollout(u);
    let cost = problem.cost();
    let quad = |m: &Mat, v: &Vector| v.dot(&(m * v));
    let mut total = 0.0;
    for (i, x) in xs.iter().take(problem.horizon()).enumerate() {
        total += quad(cost.q(), x) + quad(cost.r(), &problem.input_block(u, i));
    }
    total + quad(cost.p(), &xs[problem.horizon()])
}

/// DARE solution by the structured doubling algorithm.
pub fn dare_by_doubling(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Mat {
    let n = a.nrows();
    let g0 = b * r.clone().try_inverse().unwrap() * b.transpose();
    let (mut ak, mut gk, mut hk) = (a.clone(), g0, q.clone());
    for _ in 0..60 {
        let w = (Mat::identity(n, n) + &gk * &hk).try_inverse().unwrap();
        let a_next = &ak * &w * &ak;
        let g_next = &gk + &ak * &w * &gk * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w * &ak;
        let done = (&h_next - &hk).amax() <= 1e-14 * h_next.amax();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if done {
            break;
        }
    }
    hk
}
