mod common;

use subopt_mpc::admm::AdmmParams;
use subopt_mpc::analysis;
use subopt_mpc::cli::{self, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK};
use subopt_mpc::model::MpcInstance;
use subopt_mpc::simulator::{certify_trajectory, simulate, sweep_ell, Budget, Check, ClosedLoopConfig};
use subopt_mpc::Vector;

fn params(ell: usize) -> AdmmParams {
    AdmmParams::new(1.95, 50.0, 0.0, ell).unwrap()
}

#[test]
fn two_closed_loop_forms_agree() {
    let prob = MpcInstance::appendix_d().condense().unwrap();
    let log = simulate(
        &ClosedLoopConfig::new(Vector::from_vec(vec![-4.0, 2.8]), 10, 40),
        &prob,
        params(10),
    )
    .unwrap();
    assert!(log.aborted.is_none());
    assert!(log.records.iter().all(|r| r.decomposition_gap < 1e-10));
}

#[test]
fn fixed_point_mode_reproduces_exact_mpc() {
    let prob = MpcInstance::appendix_d().condense().unwrap();
    let x0 = Vector::from_vec(vec![2.0, -1.0]);
    let exact = simulate(&ClosedLoopConfig::exact(x0.clone(), 20), &prob, params(1)).unwrap();
    let long = simulate(&ClosedLoopConfig::new(x0, 400, 20), &prob, params(400)).unwrap();
    for (a, b) in exact.records.iter().zip(&long.records) {
        for (p, q) in a.x.iter().zip(&b.x) {
            assert!((p - q).abs() < 1e-8);
        }
    }
}

#[test]
fn exact_mpc_decreases_lyapunov_function() {
    let prob = common::preset();
    let cert = analysis::certificate(&prob, 1.95, 0.8).unwrap();
    let mut rng = common::rng(41);
    let level = cert.r_n * cert.r_n;
    for x0 in common::states_below_level(&mut rng, &prob, level, 5) {
        let log = simulate(&ClosedLoopConfig::exact(x0, 30), &prob, params(1)).unwrap();
        let report = certify_trajectory(&log, &cert);
        assert!(report.certified_regime);
        assert_eq!(report.count(Check::LyapunovStep), 0);
        assert_eq!(report.count(Check::TerminalSet), 0);
    }
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let prob = MpcInstance::appendix_d().condense().unwrap();
    let x0s = vec![Vector::from_vec(vec![-4.0, 2.8]), Vector::from_vec(vec![1.0, 1.0])];
    let budgets = [Budget::Iterations(5), Budget::Iterations(20), Budget::FixedPoint];
    let (t1, logs1) = sweep_ell(&prob, params(5), &x0s, &budgets, 25, 1).unwrap();
    let (t3, logs3) = sweep_ell(&prob, params(5), &x0s, &budgets, 25, 3).unwrap();
    assert_eq!(t1, t3);
    for (a, b) in logs1.iter().zip(&logs3) {
        assert_eq!(a.final_x, b.final_x);
    }
    let exact = t1.cells.iter().filter(|c| c.budget == Budget::FixedPoint);
    assert!(exact.into_iter().all(|c| c.sup_bbar_e <= 1e-8));
    assert!(t1
        .cells
        .iter()
        .all(|c| c.input_violations == 0 && c.state_violations == 0));
}

#[test]
fn mean_suboptimality_decreases_with_budget() {
    let prob = MpcInstance::appendix_d().condense().unwrap();
    let mut rng = common::rng(42);
    let x0s = common::states_below_level(&mut rng, &prob, 20.0, 20);
    let budgets = [Budget::Iterations(5), Budget::Iterations(15), Budget::Iterations(30)];
    let (table, _) = sweep_ell(&prob, params(5), &x0s, &budgets, 20, 4).unwrap();
    let means: Vec<f64> = table.mean_sup_bbar_e.iter().map(|(_, m)| *m).collect();
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["subopt-mpc"];
    full.extend_from_slice(args);
    cli::main_with_args(full)
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run_cli(&["lmi", "--preset", "appendix-d", "--out", out]), EXIT_OK);
    assert_eq!(
        run_cli(&["simulate", "--preset", "appendix-d", "--out", out, "--jobs", "2"]),
        EXIT_OK
    );
    assert_eq!(
        run_cli(&["simulate", "--preset", "double-integrator", "--out", out]),
        EXIT_INFEASIBLE
    );
    assert_eq!(
        run_cli(&["analyze", "--preset", "double-integrator", "--tau", "1.5", "--out", out]),
        EXIT_CONFIG
    );
    assert_eq!(run_cli(&["analyze", "--config", "/nonexistent.json"]), EXIT_CONFIG);
    assert_eq!(run_cli(&["frobnicate"]), EXIT_CONFIG);
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"preset": "appendix-d"}, "admm": {"alpha": 2.5, "rho": 1, "ell": 3},
        "experiment": {"x0": [[0, 0]], "T": 3}}"#,
    )
    .unwrap();
    assert_eq!(run_cli(&["analyze", "--config", cfg.to_str().unwrap()]), EXIT_CONFIG);
}

#[test]
fn cli_ill_posed_instance() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.json");
    // (A, B) with an unstable mode that B cannot reach.
    std::fs::write(
        &problem,
        r#"{"A": [[2, 0], [0, 0.5]], "B": [[0], [1]], "Q": 1, "R": 1, "N": 2,
        "X": {"C": [[1, 0], [-1, 0], [0, 1], [0, -1]], "d": [1, 1, 1, 1]}, "U": {"C": [[1], [-1]], "d": [1, 1]}}"#,
    )
    .unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"path": "p.json"}, "admm": {"alpha": 1.5, "rho": 1, "ell": 3},
        "experiment": {"x0": [[0, 0]], "T": 3}}"#,
    )
    .unwrap();
    assert_eq!(
        run_cli(&["analyze", "--config", cfg.to_str().unwrap()]),
        cli::EXIT_ILL_POSED
    );
}

#[test]
fn cli_outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/presets/run.json");
    for dir in [&a, &b] {
        assert_eq!(
            run_cli(&[
                "certify",
                "--config",
                cfg,
                "--out",
                dir.path().to_str().unwrap(),
                "--jobs",
                "3"
            ]),
            EXIT_OK
        );
    }
    for name in ["certify.json", "traj_x0_ell23.csv", "traj_x2_ellfixed-point.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.path().join("certify.json")).unwrap()).unwrap();
    assert!(report["ell_star"].as_u64().unwrap() > 0);
    assert_eq!(report["guaranteed_failures"].as_u64(), Some(0));
}

#[test]
fn zero_initial_state_gives_zero_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"preset": "double-integrator"}, "admm": {"alpha": 1.95, "rho": 50, "ell": 3},
        "experiment": {"x0": [[0, 0]], "T": 4}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        run_cli(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_OK
    );
    let text = std::fs::read_to_string(out.join("traj_x0_ell3.csv")).unwrap();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        for f in &fields[1..4] {
            assert_eq!(f.parse::<f64>().unwrap(), 0.0);
        }
    }
}
