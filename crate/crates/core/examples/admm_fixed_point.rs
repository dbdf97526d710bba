// Run ADMM from a cold start and watch the F-norm distance to the fixed point shrink.

use subopt_mpc::admm::{f_distance, AdmmIterate, AdmmParams, AdmmSolver, FIXED_POINT_CAP, FIXED_POINT_TOL};
use subopt_mpc::model::MpcInstance;
use subopt_mpc::qp::solve_exact_ocp;
use subopt_mpc::Vector;

pub fn run_example() -> subopt_mpc::Result<()> {
    let problem = MpcInstance::double_integrator().condense()?;
    let params = AdmmParams::new(1.95, 50.0, 0.0, 1)?;
    let mut solver = AdmmSolver::new(&problem, params)?;
    let x = Vector::from_vec(vec![-4.0, 2.8]);
    let cold = AdmmIterate::zeros(problem.s());

    let star = solver.solve_to_fixed_point(&x, &cold, FIXED_POINT_TOL, FIXED_POINT_CAP)?;
    let exact = solve_exact_ocp(&problem, &x)?;
    println!(
        "fixed point after {} iterations, |r* − u_qp| = {:.2e}",
        star.iterations,
        (star.r_star() - &exact.u).amax()
    );

    let mut it = cold;
    let mut done = 0;
    for ell in [0, 10, 20, 40, 80] {
        it = solver.run(&x, &it, ell - done)?;
        done = ell;
        println!(
            "ℓ = {ell:3}  ‖φ − φ*‖_F = {:.3e}",
            f_distance(params.alpha, &it, &star.iterate)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
