// Sweep the per-step iteration budget over several initial states in parallel.

use subopt_mpc::admm::AdmmParams;
use subopt_mpc::model::MpcInstance;
use subopt_mpc::simulator::{sweep_ell, Budget};
use subopt_mpc::Vector;

pub fn run_example() -> subopt_mpc::Result<()> {
    let problem = MpcInstance::appendix_d().condense()?;
    let params = AdmmParams::new(1.95, 50.0, 0.0, 1)?;
    let x0s: Vec<Vector> = [[-4.0, 2.8], [3.0, -1.5], [0.5, 0.5]]
        .iter()
        .map(|x| Vector::from_vec(x.to_vec()))
        .collect();
    let budgets = [
        Budget::Iterations(23),
        Budget::Iterations(27),
        Budget::Iterations(30),
        Budget::FixedPoint,
    ];

    let (table, _) = sweep_ell(&problem, params, &x0s, &budgets, 40, 4)?;
    for cell in &table.cells {
        println!(
            "x0 #{}  ℓ = {:11}  ‖x_T‖ = {:.2e}  sup ‖B̄e‖ = {:.2e}",
            cell.x0_index,
            cell.budget.label(),
            cell.terminal_norm,
            cell.sup_bbar_e
        );
    }
    for (label, mean) in &table.mean_sup_bbar_e {
        println!("mean sup ‖B̄e‖ at ℓ = {}: {mean:.3e}", label.label());
    }
    println!("monotone in ℓ per initial state: {:?}", table.monotone_in_ell);
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
