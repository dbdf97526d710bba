mod common;

use rand::Rng;
use subopt_mpc::admm::{f_distance, v_update, AdmmIterate, AdmmParams, AdmmSolver, FIXED_POINT_CAP};
use subopt_mpc::analysis;
use subopt_mpc::qp::solve_exact_ocp;
use subopt_mpc::Vector;

fn params() -> AdmmParams {
    AdmmParams::new(1.95, 50.0, 0.0, 1).unwrap()
}

fn random_iterate<R: Rng>(rng: &mut R, s: usize, rho: f64) -> AdmmIterate {
    let mut it = AdmmIterate::zeros(s);
    for i in 0..s {
        it.r[i] = rng.random_range(-5.0..5.0);
        it.v[i] = rng.random_range(-5.0..5.0);
    }
    it.y = &it.v * rho;
    it
}

#[test]
fn u_update_solves_stationarity_on_preset() {
    let prob = common::preset();
    let solver = AdmmSolver::new(&prob, params()).unwrap();
    let mut rng = common::rng(31);
    for _ in 0..20 {
        let it = random_iterate(&mut rng, prob.s(), 50.0);
        let u = solver.u_update(&it.r, &it.v);
        let res = prob.hessian() * &u * 2.0 + (&u - &it.r + &it.v) * 50.0;
        assert!(res.amax() < 1e-10);
    }
}

#[test]
fn v_update_formula_identity() {
    let mut rng = common::rng(32);
    let p = AdmmParams::new(1.3, 2.0, 0.0, 1).unwrap();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| Vector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
    let (u, r0, r1, v) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
    let out = v_update(&p, &u, &r0, &r1, &v);
    for i in 0..4 {
        assert!((out[i] - (v[i] + 1.3 * u[i] - 0.3 * r0[i] - r1[i])).abs() < 1e-15);
    }
}

#[test]
fn iterates_stay_feasible() {
    let prob = common::preset();
    let mut solver = AdmmSolver::new(&prob, params()).unwrap();
    let mut rng = common::rng(33);
    for x in common::feasible_states(&mut rng, &prob, 5) {
        let set = prob.stack_constraints(&x).unwrap();
        let mut it = random_iterate(&mut rng, prob.s(), 50.0);
        for _ in 0..10 {
            it = solver.step(&x, &it).unwrap();
            assert!(set.max_violation(&it.r) < 1e-9);
            assert_eq!(it.y, &it.v * 50.0);
        }
    }
}

#[test]
fn composition_is_exact() {
    let prob = common::preset();
    let mut solver = AdmmSolver::new(&prob, params()).unwrap();
    let x = Vector::from_vec(vec![-2.0, 1.0]);
    let warm = AdmmIterate::zeros(prob.s());
    let whole = solver.run(&x, &warm, 12).unwrap();
    let half = solver.run(&x, &warm, 5).unwrap();
    let split = solver.run(&x, &half, 7).unwrap();
    assert_eq!(whole, split);
    assert_eq!(solver.run(&x, &warm, 0).unwrap(), warm);
}

#[test]
fn fixed_point_matches_qp_and_gradient_dual() {
    let prob = common::preset();
    let mut solver = AdmmSolver::new(&prob, params()).unwrap();
    let mut rng = common::rng(34);
    for x in common::feasible_states(&mut rng, &prob, 10) {
        let fp = solver
            .solve_to_fixed_point(&x, &AdmmIterate::zeros(prob.s()), 1e-12, FIXED_POINT_CAP)
            .unwrap();
        let exact = solve_exact_ocp(&prob, &x).unwrap();
        assert!((fp.r_star() - &exact.u).amax() < 1e-6);
        // The consensus dual at the fixed point is the negative cost gradient.
        let grad = prob.hessian() * fp.r_star() * 2.0;
        assert!((fp.y_star() + grad).amax() < 1e-5 * (1.0 + fp.y_star().amax()));
        // A fixed point is preserved by further passes.
        let again = solver.run(&x, &fp.iterate, 3).unwrap();
        assert!(f_distance(1.95, &again, &fp.iterate) < 1e-9);
    }
}

#[test]
fn contraction_in_scaled_coordinates() {
    let prob = common::preset();
    let rate = analysis::rate_certificate(&prob, 1.95, 0.0).unwrap();
    let tau = rate.tau_lmi.unwrap();
    let mut solver = AdmmSolver::new(&prob, params()).unwrap();
    let mut rng = common::rng(35);
    for x in common::feasible_states(&mut rng, &prob, 4) {
        let star = solver
            .solve_to_fixed_point(&x, &AdmmIterate::zeros(prob.s()), 1e-13, FIXED_POINT_CAP)
            .unwrap();
        for _ in 0..5 {
            let mut it = random_iterate(&mut rng, prob.s(), 50.0);
            for _ in 0..40 {
                let next = solver.step(&x, &it).unwrap();
                let before = f_distance(1.95, &it, &star.iterate);
                let after = f_distance(1.95, &next, &star.iterate);
                if before > 1e-8 {
                    assert!(after <= tau * 1.05 * before, "ratio {}", after / before);
                }
                it = next;
            }
        }
    }
}

#[test]
fn unconstrained_fixed_point_matches_closed_form() {
    let prob = common::preset();
    let mut solver = AdmmSolver::new(&prob, params()).unwrap();
    let x = Vector::from_vec(vec![0.4, -0.3]);
    let fp = solver
        .solve_to_fixed_point(&x, &AdmmIterate::zeros(prob.s()), 1e-12, FIXED_POINT_CAP)
        .unwrap();
    let mu = -prob.h().clone().try_inverse().unwrap() * prob.g() * &x;
    assert!((fp.r_star().rows(2, 3) - mu).amax() < 1e-8);
}
