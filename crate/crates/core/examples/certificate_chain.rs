// Evaluate the full stability certificate and the iteration bound ℓ*.

use subopt_mpc::analysis::{certificate, rate_certificate};
use subopt_mpc::model::MpcInstance;

pub fn run_example() -> subopt_mpc::Result<()> {
    let problem = MpcInstance::double_integrator().condense()?;
    let tau_lmi = rate_certificate(&problem, 1.95, 0.0)?.tau_lmi;
    for tau in [Some(0.69), tau_lmi].into_iter().flatten() {
        let c = certificate(&problem, 1.95, tau)?;
        println!("τ = {tau:.4}");
        println!("  L₁ = {:.3}, δ = {:.3}, β = {:.9}", c.l1, c.delta, c.beta);
        println!(
            "  γ₁ = {:.4e}, γ₃ = {:.4}, ω₁ = {:.2}, ω₂ = {:.1}",
            c.gamma1, c.gamma3, c.omega1, c.omega2
        );
        println!(
            "  terminal level c = {:.4}, r_N = {:.4}, r_e = {:.3e}",
            c.c, c.r_n, c.r_e
        );
        println!(
            "  ℓ* = {} (with ‖F^½‖ in the first branch: {})",
            c.ell_star, c.ell_star_with_f
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> subopt_mpc::Result<()> {
    run_example()
}
