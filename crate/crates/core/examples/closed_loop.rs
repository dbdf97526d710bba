// Simulate the warm-started closed loop and check it against the certificate.

use subopt_mpc::admm::AdmmParams;
use subopt_mpc::analysis::{certificate, rate_certificate};
use subopt_mpc::model::MpcInstance;
use subopt_mpc::simulator::{certify_trajectory, simulate, ClosedLoopConfig};
use subopt_mpc::Vector;

pub fn run_example() -> subopt_mpc::Result<()> {
    let problem = MpcInstance::appendix_d().condense()?;
    let tau = rate_certificate(&problem, 1.95, 0.0)?.tau_lmi.expect("rate certified");
    let constants = certificate(&problem, 1.95, tau)?;
    let params = AdmmParams::new(1.95, 50.0, 0.0, 30)?;

    let log = simulate(
        &ClosedLoopConfig::new(Vector::from_vec(vec![-4.0, 2.8]), 30, 60),
        &problem,
        params,
    )?;
    for r in log.records.iter().step_by(10) {
        println!(
            "t = {:2}  x = [{:+.4}, {:+.4}]  u = {:+.4}  ‖e‖_F = {:.3e}",
            r.t, r.x[0], r.x[1], r.u[0], r.e_norm_f
        );
    }
    println!(
        "‖x_T‖ = {:.3e}, sup ‖B̄e‖ = {:.3e}",
        log.terminal_norm(),
        log.sup_bbar_e()
    );

    let report = certify_trajectory(&log, &constants);
    println!(
        "certified regime: {} (ℓ* = {}), bound violations: {}, guaranteed failures: {}",
        report.certified_regime,
        report.ell_star,
        report.violations.len(),
        report.guaranteed_failures()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
