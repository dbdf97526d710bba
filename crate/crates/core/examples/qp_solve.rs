// Solve the condensed OCP exactly with the active-set solver.

use subopt_mpc::model::MpcInstance;
use subopt_mpc::qp::solve_exact_ocp;
use subopt_mpc::Vector;

pub fn run_example() -> subopt_mpc::Result<()> {
    let problem = MpcInstance::double_integrator().condense()?;
    for x in [[-4.0, 2.8], [1.0, -1.0], [0.0, 0.0]] {
        let x = Vector::from_vec(x.to_vec());
        let sol = solve_exact_ocp(&problem, &x)?;
        println!(
            "x = [{:5.2}, {:5.2}]  V* = {:9.4}  first input = {:+.4}",
            x[0],
            x[1],
            sol.value,
            problem.first_input(&sol.u)[0]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
