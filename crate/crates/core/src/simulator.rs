//! Closed-loop simulation of the coupled plant–optimizer dynamics.
//!
//! At each time `t` the state `x_t` is measured, the optimizer runs `ℓ`
//! ADMM passes from the previous iterate, `φ_t = 𝒯^ℓ(φ_{t−1}; x_t)`, and the
//! first input block of `r_t` is applied. Every step is compared against the
//! fixed point `φ*(x_t)` to log the suboptimality error `e_t = φ_t − φ*(x_t)`.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{f_distance, AdmmIterate, AdmmParams, AdmmSolver, FIXED_POINT_CAP, FIXED_POINT_TOL};
use crate::analysis::CertificateConstants;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::model::CondensedProblem;
use crate::qp::solve_exact_ocp;

/// Consecutive near-zero states after which a trajectory stops early.
pub const SETTLE_STEPS: usize = 5;
/// State norm treated as "at the origin" for early stopping.
pub const SETTLE_NORM: f64 = 1e-10;
/// Relative slack on the theorem bounds, absorbing fixed-point oracle error.
pub const BOUND_REL_SLACK: f64 = 1e-3;
/// Absolute slack on the theorem bounds, at the oracle's accuracy.
pub const BOUND_ABS_SLACK: f64 = 1e-9;
/// Relative slack on the exact-MPC Lyapunov decrease.
pub const LYAPUNOV_SLACK: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `ℓ` warm-started ADMM passes per step.
    Suboptimal,
    /// Solve every step to the fixed point.
    ExactMpc,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    pub x0: Vector,
    pub ell: usize,
    /// Number of control steps `T`.
    pub steps: usize,
    /// Initial optimizer iterate `φ₋₁ = [r; y]`; zero if `None`.
    pub phi0: Option<Vector>,
    pub mode: Mode,
}

impl ClosedLoopConfig {
    pub fn new(x0: Vector, ell: usize, steps: usize) -> Self {
        Self {
            x0,
            ell,
            steps,
            phi0: None,
            mode: Mode::Suboptimal,
        }
    }

    pub fn exact(x0: Vector, steps: usize) -> Self {
        Self {
            x0,
            ell: 0,
            steps,
            phi0: None,
            mode: Mode::ExactMpc,
        }
    }

    pub fn validate(&self, problem: &CondensedProblem) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if self.mode == Mode::Suboptimal && self.ell == 0 {
            return Err(Error::InvalidParameter("ell must be at least 1".into()));
        }
        if self.x0.len() != problem.n() {
            return Err(Error::DimensionMismatch(format!(
                "x0 has length {}, expected {}",
                self.x0.len(),
                problem.n()
            )));
        }
        if !problem.state_set().contains(&self.x0, 1e-12) {
            return Err(Error::InfeasibleParameter(format!("{:?}", self.x0.as_slice())));
        }
        if let Some(phi) = &self.phi0 {
            if phi.len() != 2 * problem.s() {
                return Err(Error::DimensionMismatch(format!(
                    "phi0 has length {}, expected {}",
                    phi.len(),
                    2 * problem.s()
                )));
            }
        }
        Ok(())
    }
}

/// Memoized fixed points `φ*(ξ)`.
///
/// Each fixed point is seeded from the active-set solution, iterated to
/// [`FIXED_POINT_TOL`], and its primal cross-checked against the QP.
#[derive(Debug)]
pub struct Oracle<'a> {
    solver: AdmmSolver<'a>,
    cache: HashMap<Vec<u64>, AdmmIterate>,
}

/// Primal agreement required between the ADMM fixed point and the QP.
pub const ORACLE_AGREEMENT: f64 = 1e-6;

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a CondensedProblem, params: AdmmParams) -> Result<Self> {
        Ok(Self {
            solver: AdmmSolver::new(problem, params)?,
            cache: HashMap::new(),
        })
    }

    pub fn phi_star(&mut self, x: &Vector) -> Result<AdmmIterate> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let exact = solve_exact_ocp(self.solver.problem(), x)?;
        let seed = AdmmIterate::from_phi(&exact.phi(), self.solver.params().rho);
        let fp = self
            .solver
            .solve_to_fixed_point(x, &seed, FIXED_POINT_TOL, FIXED_POINT_CAP)?;
        let gap = (fp.r_star() - &exact.u).amax();
        if gap > ORACLE_AGREEMENT * (1.0 + exact.u.amax()) {
            return Err(Error::IllConditioned(format!(
                "fixed point and QP disagree by {gap:.3e} at {:?}",
                x.as_slice()
            )));
        }
        self.cache.insert(key, fp.iterate.clone());
        Ok(fp.iterate)
    }

    /// `ψ(ξ) = √V_N*(ξ)`.
    pub fn psi(&mut self, x: &Vector) -> Result<f64> {
        let star = self.phi_star(x)?;
        Ok(self.solver.problem().cost_of(&star.r).max(0.0).sqrt())
    }
}

/// Everything logged for one control step `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `‖e_t‖₂` on `φ = [r; y]`.
    pub e_norm2: f64,
    /// `‖e_t‖_F` on the scaled pair `(r, v)`.
    pub e_norm_f: f64,
    /// `‖B̄ e_t‖`.
    pub bbar_e_norm: f64,
    pub psi: f64,
    pub x_p_norm: f64,
    /// `‖x_t − x_{t−1}‖`; zero at `t = 0`.
    pub dx_norm: f64,
    pub x_in_x: bool,
    pub u_in_u: bool,
    /// `‖x_{t+1} − (f(x_t) + B̄e_t)‖`, the gap between the two closed-loop forms.
    pub decomposition_gap: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub x0: Vec<f64>,
    pub ell: usize,
    pub mode: Mode,
    pub records: Vec<StepRecord>,
    /// State after the last applied input.
    pub final_x: Vec<f64>,
    /// `ψ` of the final state, when the OCP there is feasible.
    pub final_psi: Option<f64>,
    /// Reason the trajectory stopped before `T`, if it was aborted.
    pub aborted: Option<String>,
}

impl TrajectoryLog {
    pub fn terminal_norm(&self) -> f64 {
        self.final_x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_bbar_e(&self) -> f64 {
        self.records.iter().fold(0.0, |a, r| a.max(r.bbar_e_norm))
    }

    pub fn input_violations(&self) -> usize {
        self.records.iter().filter(|r| !r.u_in_u).count()
    }

    pub fn state_violations(&self) -> usize {
        self.records.iter().filter(|r| !r.x_in_x).count()
    }
}

/// One closed-loop step: `φ_t = 𝒯^ℓ(φ_prev; x_t)`, `x_{t+1} = A x_t + B u_t`.
pub fn step_closed_loop(
    solver: &mut AdmmSolver<'_>,
    x_t: &Vector,
    phi_prev: &AdmmIterate,
    ell: usize,
) -> Result<(Vector, AdmmIterate)> {
    let problem = solver.problem();
    let phi = solver.run(x_t, phi_prev, ell)?;
    let u = problem.first_input(&phi.r);
    Ok((problem.plant().step(x_t, &u), phi))
}

/// Run one trajectory, logging against the fixed-point oracle.
///
/// An infeasible OCP mid-trajectory stops the run and is recorded in
/// [`TrajectoryLog::aborted`]; the records up to that point are kept.
pub fn simulate(config: &ClosedLoopConfig, problem: &CondensedProblem, params: AdmmParams) -> Result<TrajectoryLog> {
    config.validate(problem)?;
    let mut solver = AdmmSolver::new(problem, params)?;
    let mut oracle = Oracle::new(problem, params)?;
    let p = problem.cost().p();
    let bbar_b = problem.plant().b();

    let mut log = TrajectoryLog {
        x0: config.x0.iter().copied().collect(),
        ell: config.ell,
        mode: config.mode,
        records: Vec::with_capacity(config.steps),
        final_x: config.x0.iter().copied().collect(),
        final_psi: None,
        aborted: None,
    };
    let mut x = config.x0.clone();
    let mut x_prev: Option<Vector> = None;
    let mut phi = match &config.phi0 {
        Some(v) => AdmmIterate::from_phi(v, params.rho),
        None => AdmmIterate::zeros(problem.s()),
    };
    let mut settled = 0;

    for t in 0..config.steps {
        let started = Instant::now();
        let outcome = (|| -> Result<(Vector, AdmmIterate, AdmmIterate, usize)> {
            let star = oracle.phi_star(&x)?;
            let (next, phi_t, iters) = match config.mode {
                Mode::Suboptimal => {
                    let (next, phi_t) = step_closed_loop(&mut solver, &x, &phi, config.ell)?;
                    (next, phi_t, config.ell)
                }
                Mode::ExactMpc => {
                    let u = problem.first_input(&star.r);
                    (problem.plant().step(&x, &u), star.clone(), 0)
                }
            };
            Ok((next, phi_t, star, iters))
        })();
        let (x_next, phi_t, star, iterations) = match outcome {
            Ok(v) => v,
            Err(e @ (Error::Infeasible { .. } | Error::InfeasibleParameter(_))) => {
                warn!("trajectory from {:?} aborted at t = {t}: {e}", config.x0.as_slice());
                log.aborted = Some(format!("t = {t}: {e}"));
                return Ok(log);
            }
            Err(e) => return Err(e),
        };
        let wall_seconds = started.elapsed().as_secs_f64();

        let u = problem.first_input(&phi_t.r);
        let e_r = &phi_t.r - &star.r;
        let e_phi = phi_t.phi() - star.phi();
        let bbar_e = bbar_b * problem.first_input(&e_r);
        let nominal = problem.plant().step(&x, &problem.first_input(&star.r));
        let decomposition_gap = (&x_next - (nominal + &bbar_e)).amax();

        log.records.push(StepRecord {
            t,
            x: x.iter().copied().collect(),
            u: u.iter().copied().collect(),
            e_norm2: e_phi.norm(),
            e_norm_f: f_distance(params.alpha, &phi_t, &star),
            bbar_e_norm: bbar_e.norm(),
            psi: problem.cost_of(&star.r).max(0.0).sqrt(),
            x_p_norm: linalg::quad_form(p, &x).max(0.0).sqrt(),
            dx_norm: x_prev.as_ref().map_or(0.0, |xp| (&x - xp).norm()),
            x_in_x: problem.state_set().contains(&x, FEAS_TOL),
            u_in_u: problem.input_set().contains(&u, FEAS_TOL),
            decomposition_gap,
            iterations,
            wall_seconds,
        });
        debug!("t = {t}: x = {:?}, u = {:?}", x.as_slice(), u.as_slice());

        x_prev = Some(x);
        x = x_next;
        phi = phi_t;
        log.final_x = x.iter().copied().collect();

        settled = if x.norm() <= SETTLE_NORM { settled + 1 } else { 0 };
        if settled >= SETTLE_STEPS {
            break;
        }
    }
    log.final_psi = oracle.psi(&x).ok();
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    InputFeasibility,
    StateFeasibility,
    /// `ψ(x_t) ≤ β^t δ ‖x₀‖ + γ₁ sup_j ‖B̄ e_j‖`.
    IssBound,
    /// `ψ(x_{t+1}) ≤ β ψ(x_t) + δ ‖B̄ e_t‖`.
    LyapunovStep,
    /// `‖e_t‖_F ≤ τ^{ℓt} ‖e₀‖_F + γ₂(ℓ) sup_j ‖Δx_j‖`.
    ErrorBound,
    /// `‖e_t‖_F ≤ τ^ℓ ‖e_{t−1}‖_F + τ^ℓ L₁ ‖F^{1/2}‖ ‖Δx_t‖`.
    ErrorStep,
    /// `ψ(x_t) ≤ r_N`.
    TerminalSet,
    /// `‖e_t‖ ≤ r_e`.
    ErrorRegion,
    /// `δ ‖B̄‖ ‖e_t‖ ≤ (1 − β) r_N`.
    AdmissibleError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub check: Check,
    pub lhs: f64,
    pub rhs: f64,
    /// Whether the theory guarantees this check for the trajectory.
    pub guaranteed: bool,
}

impl Violation {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBounds {
    pub t: usize,
    /// Right-hand side of the ISS bound on `ψ(x_t)`.
    pub psi_bound: f64,
    /// Right-hand side of the cumulative error bound on `‖e_t‖_F`.
    pub e_bound: f64,
    pub in_terminal_set: bool,
    pub in_error_region: bool,
    pub in_admissible_errors: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub ell: usize,
    pub mode: Mode,
    pub ell_star: u64,
    /// `ℓ ≥ ℓ*` (or exact mode) and `(x₀, φ₀) ∈ Ω`.
    pub certified_regime: bool,
    pub starts_in_omega: bool,
    pub bounds: Vec<StepBounds>,
    pub violations: Vec<Violation>,
}

impl CertificateReport {
    pub fn guaranteed_failures(&self) -> usize {
        self.violations.iter().filter(|v| v.guaranteed).count()
    }

    pub fn count(&self, check: Check) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }
}

fn within(lhs: f64, rhs: f64, rel: f64) -> bool {
    lhs <= rhs * (1.0 + rel) + BOUND_ABS_SLACK
}

/// Evaluate the theorem bounds pointwise along a logged trajectory.
///
/// Feasibility of `u_t` and `x_t` is guaranteed unconditionally. The ISS,
/// error and region checks are guaranteed only in the certified regime:
/// `ℓ ≥ ℓ*` with `(x₀, φ₀) ∈ Ω`, or exact-MPC mode started in `Γ_N`.
pub fn certify_trajectory(log: &TrajectoryLog, constants: &CertificateConstants) -> CertificateReport {
    let exact = log.mode == Mode::ExactMpc;
    let c = constants;
    let tau_ell = if exact { 0.0 } else { c.tau.powi(log.ell as i32) };
    let gamma2 = if exact { 0.0 } else { c.gamma2(log.ell) };
    let x0_norm = log.x0.iter().map(|v| v * v).sum::<f64>().sqrt();

    let starts_in_omega = log
        .records
        .first()
        .is_some_and(|r| r.psi <= c.r_n * (1.0 + BOUND_REL_SLACK) && r.e_norm2 <= c.r_e);
    let certified_regime = starts_in_omega && (exact || log.ell as u64 >= c.ell_star);

    let mut bounds = Vec::with_capacity(log.records.len());
    let mut violations = Vec::new();
    let mut sup_bbar_e = 0.0_f64;
    let mut sup_dx = 0.0_f64;
    let e0 = log.records.first().map_or(0.0, |r| r.e_norm_f);
    let mut flag = |t, check, lhs: f64, rhs: f64, ok: bool, guaranteed: bool| {
        if !ok {
            violations.push(Violation {
                t,
                check,
                lhs,
                rhs,
                guaranteed,
            });
        }
    };

    for (i, rec) in log.records.iter().enumerate() {
        let t = rec.t;
        sup_bbar_e = sup_bbar_e.max(rec.bbar_e_norm);
        sup_dx = sup_dx.max(rec.dx_norm);

        flag(t, Check::InputFeasibility, 0.0, 0.0, rec.u_in_u, true);
        flag(t, Check::StateFeasibility, 0.0, 0.0, rec.x_in_x, true);

        let psi_bound = c.beta.powi(t as i32) * c.delta * x0_norm + c.gamma1 * sup_bbar_e;
        flag(
            t,
            Check::IssBound,
            rec.psi,
            psi_bound,
            within(rec.psi, psi_bound, BOUND_REL_SLACK),
            certified_regime,
        );

        let e_bound = tau_ell.powi(t as i32) * e0 + gamma2 * sup_dx;
        flag(
            t,
            Check::ErrorBound,
            rec.e_norm_f,
            e_bound,
            within(rec.e_norm_f, e_bound, BOUND_REL_SLACK),
            certified_regime,
        );

        if i > 0 && !exact {
            let prev = &log.records[i - 1];
            let rhs = tau_ell * prev.e_norm_f + tau_ell * c.l1 * c.f_sqrt_norm * rec.dx_norm;
            flag(
                t,
                Check::ErrorStep,
                rec.e_norm_f,
                rhs,
                within(rec.e_norm_f, rhs, BOUND_REL_SLACK),
                certified_regime,
            );
        }

        let next_psi = log.records.get(i + 1).map(|r| r.psi).or(log.final_psi);
        if let Some(next_psi) = next_psi {
            let rhs = c.beta * rec.psi + c.delta * rec.bbar_e_norm;
            let rel = if exact { LYAPUNOV_SLACK } else { BOUND_REL_SLACK };
            flag(
                t + 1,
                Check::LyapunovStep,
                next_psi,
                rhs,
                within(next_psi, rhs, rel),
                certified_regime,
            );
        }

        let in_terminal_set = rec.psi <= c.r_n * (1.0 + LYAPUNOV_SLACK);
        let in_error_region = rec.e_norm2 <= c.r_e;
        let admissible = c.delta * c.bbar_norm * rec.e_norm2 <= (1.0 - c.beta) * c.r_n + BOUND_ABS_SLACK;
        flag(t, Check::TerminalSet, rec.psi, c.r_n, in_terminal_set, certified_regime);
        flag(
            t,
            Check::ErrorRegion,
            rec.e_norm2,
            c.r_e,
            in_error_region || exact,
            certified_regime,
        );
        flag(
            t,
            Check::AdmissibleError,
            c.delta * c.bbar_norm * rec.e_norm2,
            (1.0 - c.beta) * c.r_n,
            admissible,
            certified_regime,
        );
        bounds.push(StepBounds {
            t,
            psi_bound,
            e_bound,
            in_terminal_set,
            in_error_region,
            in_admissible_errors: admissible,
        });
    }

    CertificateReport {
        ell: log.ell,
        mode: log.mode,
        ell_star: c.ell_star,
        certified_regime,
        starts_in_omega,
        bounds,
        violations,
    }
}

/// Per-step iteration budget in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Budget {
    Iterations(usize),
    FixedPoint,
}

impl Budget {
    fn config(&self, x0: &Vector, steps: usize) -> ClosedLoopConfig {
        match *self {
            Budget::Iterations(ell) => ClosedLoopConfig::new(x0.clone(), ell, steps),
            Budget::FixedPoint => ClosedLoopConfig::exact(x0.clone(), steps),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Budget::Iterations(ell) => ell.to_string(),
            Budget::FixedPoint => "fixed-point".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub x0_index: usize,
    pub x0: Vec<f64>,
    pub budget: Budget,
    pub terminal_norm: f64,
    pub sup_bbar_e: f64,
    pub input_violations: usize,
    pub state_violations: usize,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    /// Mean of `sup_t ‖B̄ e_t‖` over initial states, per iteration budget.
    pub mean_sup_bbar_e: Vec<(Budget, f64)>,
    /// Per initial state: whether `sup_t ‖B̄ e_t‖` is nonincreasing in `ℓ`.
    pub monotone_in_ell: Vec<bool>,
}

/// Run every `(x₀, budget)` pair, on `jobs` worker threads.
///
/// Logs come back ordered by `x₀` then budget, independent of scheduling.
pub fn run_grid(
    problem: &CondensedProblem,
    params: AdmmParams,
    x0_list: &[Vector],
    budgets: &[Budget],
    steps: usize,
    jobs: usize,
) -> Result<Vec<TrajectoryLog>> {
    let tasks: Vec<(usize, usize)> = (0..x0_list.len())
        .flat_map(|i| (0..budgets.len()).map(move |j| (i, j)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, j)| simulate(&budgets[j].config(&x0_list[i], steps), problem, params))
            .collect()
    })
}

/// Sweep the iteration budget over a set of initial states.
pub fn sweep_ell(
    problem: &CondensedProblem,
    params: AdmmParams,
    x0_list: &[Vector],
    budgets: &[Budget],
    steps: usize,
    jobs: usize,
) -> Result<(SweepTable, Vec<TrajectoryLog>)> {
    let logs = run_grid(problem, params, x0_list, budgets, steps, jobs)?;
    Ok((SweepTable::from_logs(&logs, x0_list.len(), budgets), logs))
}

impl SweepTable {
    /// Summarize logs laid out as by [`run_grid`].
    pub fn from_logs(logs: &[TrajectoryLog], num_x0: usize, budgets: &[Budget]) -> Self {
        let nb = budgets.len();
        let cells: Vec<SweepCell> = logs
            .iter()
            .enumerate()
            .map(|(k, log)| SweepCell {
                x0_index: k / nb,
                x0: log.x0.clone(),
                budget: budgets[k % nb],
                terminal_norm: log.terminal_norm(),
                sup_bbar_e: log.sup_bbar_e(),
                input_violations: log.input_violations(),
                state_violations: log.state_violations(),
                aborted: log.aborted.clone(),
            })
            .collect();
        let mean_sup_bbar_e = (0..nb)
            .map(|j| {
                let sum: f64 = (0..num_x0).map(|i| cells[i * nb + j].sup_bbar_e).sum();
                (budgets[j], sum / num_x0.max(1) as f64)
            })
            .collect();
        // Compare budgets in increasing order of effort; fixed point is the limit.
        let mut order: Vec<usize> = (0..nb).collect();
        order.sort_by_key(|&j| match budgets[j] {
            Budget::Iterations(ell) => ell,
            Budget::FixedPoint => usize::MAX,
        });
        let monotone_in_ell = (0..num_x0)
            .map(|i| {
                order
                    .windows(2)
                    .all(|w| cells[i * nb + w[1]].sup_bbar_e <= cells[i * nb + w[0]].sup_bbar_e * (1.0 + 1e-9) + 1e-15)
            })
            .collect();
        Self {
            cells,
            mean_sup_bbar_e,
            monotone_in_ell,
        }
    }
}

/// Write one CSV row per control step with the certificate bounds alongside.
///
/// Floats are printed with 12 significant digits; flags are `0`/`1`.
pub fn write_csv<W: Write>(mut out: W, log: &TrajectoryLog, report: &CertificateReport) -> Result<()> {
    let n = log.x0.len();
    let m = log.records.first().map_or(0, |r| r.u.len());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    header.extend(
        [
            "e_norm2",
            "e_norm_f",
            "psi",
            "x_p_norm",
            "x_in_x",
            "u_in_u",
            "psi_le_rn",
            "e_le_re",
            "psi_bound",
            "e_bound",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    writeln!(out, "{}", header.join(","))?;
    let fmt = |v: f64| format!("{v:.11e}");
    for (rec, b) in log.records.iter().zip(&report.bounds) {
        let mut row: Vec<String> = vec![rec.t.to_string()];
        row.extend(rec.x.iter().map(|&v| fmt(v)));
        row.extend(rec.u.iter().map(|&v| fmt(v)));
        row.push(fmt(rec.e_norm2));
        row.push(fmt(rec.e_norm_f));
        row.push(fmt(rec.psi));
        row.push(fmt(rec.x_p_norm));
        for flag in [rec.x_in_x, rec.u_in_u, b.in_terminal_set, b.in_error_region] {
            row.push(u8::from(flag).to_string());
        }
        row.push(fmt(b.psi_bound));
        row.push(fmt(b.e_bound));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::model::MpcInstance;

    fn preset() -> CondensedProblem {
        MpcInstance::double_integrator().condense().unwrap()
    }

    fn params() -> AdmmParams {
        AdmmParams::new(1.95, 50.0, 0.0, 30).unwrap()
    }

    #[test]
    fn origin_stays_at_origin() {
        let prob = preset();
        let log = simulate(&ClosedLoopConfig::new(Vector::zeros(2), 5, 10), &prob, params()).unwrap();
        assert!(log
            .records
            .iter()
            .all(|r| r.x.iter().all(|&v| v == 0.0) && r.u[0] == 0.0));
        // Early stop after the settling window.
        assert_eq!(log.records.len(), SETTLE_STEPS);
    }

    #[test]
    fn step_from_origin_is_zero() {
        let prob = preset();
        let mut solver = AdmmSolver::new(&prob, params()).unwrap();
        let (x1, phi) = step_closed_loop(&mut solver, &Vector::zeros(2), &AdmmIterate::zeros(prob.s()), 3).unwrap();
        assert_eq!(x1.amax(), 0.0);
        assert_eq!(phi.r.amax(), 0.0);
    }

    #[test]
    fn exact_mode_has_zero_error_and_matches_decomposition() {
        let prob = preset();
        let x0 = Vector::from_vec(vec![1.0, -0.5]);
        let log = simulate(&ClosedLoopConfig::exact(x0, 15), &prob, params()).unwrap();
        for r in &log.records {
            assert_eq!(r.e_norm2, 0.0);
            assert!(r.decomposition_gap < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let prob = preset();
        let bad_t = ClosedLoopConfig::new(Vector::zeros(2), 5, 0);
        assert!(simulate(&bad_t, &prob, params()).is_err());
        let outside = ClosedLoopConfig::new(Vector::from_vec(vec![6.0, 0.0]), 5, 3);
        assert!(matches!(
            simulate(&outside, &prob, params()),
            Err(Error::InfeasibleParameter(_))
        ));
    }

    #[test]
    fn exact_mode_certifies_with_zero_guaranteed_failures() {
        let prob = preset();
        let cert = analysis::certificate(&prob, 1.95, 0.8).unwrap();
        let x0 = Vector::from_vec(vec![0.2, -0.1]);
        let log = simulate(&ClosedLoopConfig::exact(x0, 20), &prob, params()).unwrap();
        let report = certify_trajectory(&log, &cert);
        assert!(report.certified_regime);
        assert_eq!(report.guaranteed_failures(), 0, "{:?}", report.violations);
    }

    #[test]
    fn csv_has_header_and_fixed_precision() {
        let prob = preset();
        let cert = analysis::certificate(&prob, 1.95, 0.8).unwrap();
        let log = simulate(
            &ClosedLoopConfig::new(Vector::from_vec(vec![1.0, 0.5]), 10, 3),
            &prob,
            params(),
        )
        .unwrap();
        let report = certify_trajectory(&log, &cert);
        let mut buf = Vec::new();
        write_csv(&mut buf, &log, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("t,x0,x1,u0,e_norm2"));
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').nth(1).unwrap(), "1.00000000000e0");
    }
}
