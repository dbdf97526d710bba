// Certify the ADMM contraction rate with the 4×4 LMI and compare with the closed form.

use subopt_mpc::analysis::{bisect_alpha, kappa_f, min_certified_rate, rate_certificate, tau_formula};
use subopt_mpc::model::MpcInstance;

pub fn run_example() -> subopt_mpc::Result<()> {
    let problem = MpcInstance::double_integrator().condense()?;
    let cert = rate_certificate(&problem, 1.95, 0.0)?;
    println!(
        "κ = {:.4}, ρ_suggested = {:.4}, κ_F = {}",
        cert.kappa,
        cert.rho_suggested,
        kappa_f(1.95)
    );
    println!("τ_formula = {:.4}, τ_lmi = {:?}", cert.tau_formula, cert.tau_lmi);
    println!("largest certifiable α = {:?}", bisect_alpha(cert.kappa, 0.0));

    println!("   κ     α=1.0   α=1.95   formula(α=1.95)");
    for kappa in [1.0, 2.0, 10.0, 40.0] {
        let rate = |alpha| min_certified_rate(alpha, kappa, 0.0).map_or(f64::NAN, |(t, _)| t);
        println!(
            "{kappa:5.1}  {:7.4}  {:7.4}   {:7.4}",
            rate(1.0),
            rate(1.95),
            tau_formula(1.95, kappa, 0.0)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
