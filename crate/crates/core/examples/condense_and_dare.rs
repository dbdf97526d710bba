// Solve the Riccati equation for the double integrator and condense the OCP.

use subopt_mpc::model::{dare_residual, MpcInstance};

pub fn run_example() -> subopt_mpc::Result<()> {
    let instance = MpcInstance::double_integrator();
    let cost = &instance.cost;
    println!("terminal weight P =\n{}", cost.p());
    println!("LQR gain K = {}", cost.k());
    let residual = dare_residual(&instance.plant, cost.q(), cost.p(), cost.k()).amax();
    println!("DARE residual = {residual:.3e}");

    let problem = instance.condense()?;
    println!(
        "condensed Hessian M is {}×{}",
        problem.hessian().nrows(),
        problem.hessian().ncols()
    );
    let u = subopt_mpc::Vector::from_vec(vec![-4.0, 2.8, -0.5, -0.5, -0.5]);
    println!("cost of the reference solution: {:.4}", problem.cost_of(&u));
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
