//! Batch driver behind the `subopt-mpc` binary.
//!
//! Subcommands `analyze`, `simulate`, `certify` and `lmi` read a JSON run
//! configuration (or a bundled preset), write their artifacts under the
//! output directory, and map failures onto exit codes:
//! 0 success, 2 configuration error, 3 ill-posed instance,
//! 4 runtime infeasibility, 5 failure of a guaranteed certificate check.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmParams;
use crate::analysis::{self, CertificateConstants, RateCertificate};
use crate::error::Error;
use crate::linalg::Vector;
use crate::model::{CondensedProblem, MpcInstance};
use crate::simulator::{self, Budget, CertificateReport, SweepTable, TrajectoryLog};

/// Write a line to stdout, ignoring a closed pipe (e.g. when piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ILL_POSED: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_CERTIFICATE: i32 = 5;

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "SUBOPT_MPC_LOG";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Classify library errors raised while setting up an instance.
fn setup_error(e: Error) -> CliError {
    let code = match e {
        Error::DimensionMismatch(_)
        | Error::InvalidParameter(_)
        | Error::DegenerateRow(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_ILL_POSED,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

/// Rate used by the certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauChoice {
    Formula,
    Lmi,
    Value(f64),
}

impl FromStr for TauChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "formula" => Ok(TauChoice::Formula),
            "lmi" => Ok(TauChoice::Lmi),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 && v < 1.0 => Ok(TauChoice::Value(v)),
                Ok(v) => Err(format!("tau = {v} is outside (0, 1)")),
                Err(_) => Err(format!("expected formula, lmi or a number in (0, 1), got {other:?}")),
            },
        }
    }
}

impl fmt::Display for TauChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauChoice::Formula => f.write_str("formula"),
            TauChoice::Lmi => f.write_str("lmi"),
            TauChoice::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for TauChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            TauChoice::Value(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for TauChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => TauChoice::from_str(&v.to_string()),
            Raw::Text(s) => TauChoice::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    DoubleIntegrator,
    AppendixD,
}

impl Preset {
    pub fn instance(self) -> MpcInstance {
        match self {
            Preset::DoubleIntegrator => MpcInstance::double_integrator(),
            Preset::AppendixD => MpcInstance::appendix_d(),
        }
    }
}

/// Iteration budget in a config: a count or `"fixed-point"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EllSpec {
    Count(usize),
    Named(EllName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EllName {
    FixedPoint,
}

impl EllSpec {
    pub fn budget(self) -> Budget {
        match self {
            EllSpec::Count(ell) => Budget::Iterations(ell),
            EllSpec::Named(EllName::FixedPoint) => Budget::FixedPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmConfig {
    pub alpha: f64,
    pub rho: f64,
    #[serde(default)]
    pub epsilon: f64,
    pub ell: EllSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub x0: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    pub steps: usize,
    /// Budgets to sweep; defaults to the single `admm.ell`.
    #[serde(default)]
    pub ell_sweep: Vec<EllSpec>,
}

/// Where the problem comes from: a file path or a bundled preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSource {
    Path(PathBuf),
    Preset(Preset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub admm: AdmmConfig,
    pub experiment: ExperimentConfig,
    #[serde(default = "default_tau")]
    pub tau: TauChoice,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Relaxation grid for the `lmi` subcommand.
    #[serde(default)]
    pub lmi_alphas: Option<Vec<f64>>,
}

fn default_tau() -> TauChoice {
    TauChoice::Lmi
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Reference experiment: `α = 1.95`, `ρ = 50`, `ε = 0`, `ℓ ∈ {23, 27, 30}`, `x₀ = [−4, 2.8]`.
    pub fn preset(preset: Preset) -> Self {
        Self {
            problem: ProblemSource::Preset(preset),
            admm: AdmmConfig {
                alpha: 1.95,
                rho: 50.0,
                epsilon: 0.0,
                ell: EllSpec::Count(30),
            },
            experiment: ExperimentConfig {
                x0: vec![vec![-4.0, 2.8]],
                steps: 60,
                ell_sweep: vec![EllSpec::Count(23), EllSpec::Count(27), EllSpec::Count(30)],
            },
            tau: TauChoice::Lmi,
            out: default_out(),
            seed: 0,
            lmi_alphas: None,
        }
    }

    /// Parse a config file; relative problem paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        if let ProblemSource::Path(p) = &cfg.problem {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.problem = ProblemSource::Path(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn instance(&self) -> Result<MpcInstance, CliError> {
        match &self.problem {
            ProblemSource::Preset(p) => Ok(p.instance()),
            ProblemSource::Path(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::config(format!("cannot read problem {}: {e}", p.display())))?;
                MpcInstance::from_json(&text).map_err(setup_error)
            }
        }
    }

    pub fn admm_params(&self) -> Result<AdmmParams, CliError> {
        let ell = match self.admm.ell {
            EllSpec::Count(ell) => ell,
            EllSpec::Named(EllName::FixedPoint) => 1,
        };
        AdmmParams::new(self.admm.alpha, self.admm.rho, self.admm.epsilon, ell).map_err(setup_error)
    }

    pub fn budgets(&self) -> Vec<Budget> {
        if self.experiment.ell_sweep.is_empty() {
            vec![self.admm.ell.budget()]
        } else {
            self.experiment.ell_sweep.iter().map(|e| e.budget()).collect()
        }
    }

    pub fn initial_states(&self, n: usize) -> Result<Vec<Vector>, CliError> {
        if self.experiment.x0.is_empty() {
            return Err(CliError::config("experiment.x0 is empty"));
        }
        if self.experiment.steps == 0 {
            return Err(CliError::config("experiment.T must be at least 1"));
        }
        self.experiment
            .x0
            .iter()
            .map(|x| {
                if x.len() == n {
                    Ok(Vector::from_vec(x.clone()))
                } else {
                    Err(CliError::config(format!(
                        "x0 {x:?} has length {}, expected {n}",
                        x.len()
                    )))
                }
            })
            .collect()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "subopt-mpc",
    version,
    about = "Suboptimal ADMM-based MPC: analysis, simulation and certification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled problem and experiment.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for trajectory sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for sampled diagnostics (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Certificate rate: `formula`, `lmi`, or a number in (0, 1).
    #[arg(long, global = true)]
    pub tau: Option<TauChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Compute the certificate constants.
    Analyze,
    /// Run closed-loop trajectories and write CSV logs.
    Simulate,
    /// Check the certificate bounds along simulated trajectories.
    Certify,
    /// Tabulate the LMI-certified rate over relaxation values.
    Lmi,
}

impl Cli {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(p)) => RunConfig::preset(p),
            (None, None) => return Err(CliError::config("one of --config or --preset is required")),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(tau) = self.tau {
            cfg.tau = tau;
        }
        if self.jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        Ok(cfg)
    }
}

/// Parse arguments, initialise logging, and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "error")).try_init();
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    match cli.command {
        Command::Analyze => cmd_analyze(&cfg).map(|_| ()),
        Command::Simulate => cmd_simulate(&cfg, cli.jobs).map(|_| ()),
        Command::Certify => cmd_certify(&cfg, cli.jobs).map(|_| ()),
        Command::Lmi => cmd_lmi(&cfg).map(|_| ()),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    fs::write(&path, text + "\n").map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn setup(cfg: &RunConfig) -> Result<(CondensedProblem, AdmmParams), CliError> {
    let instance = cfg.instance()?;
    let problem = instance.condense().map_err(setup_error)?;
    Ok((problem, cfg.admm_params()?))
}

/// Certificate document written by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// `ε` for which `√(pL) κ^ε` equals the configured `ρ`.
    pub epsilon_effective: f64,
    pub tau_choice: TauChoice,
    pub rate: RateCertificate,
    pub certificate: CertificateConstants,
    /// Sampled lower bound on the Lipschitz constant of `φ*` near the origin.
    pub l1_empirical: f64,
    pub seed: u64,
}

fn resolve_tau(choice: TauChoice, rate: &RateCertificate) -> Result<f64, CliError> {
    match choice {
        TauChoice::Formula => Ok(rate.tau_formula),
        TauChoice::Lmi => rate.tau_lmi.ok_or(CliError {
            code: EXIT_ILL_POSED,
            message: "the rate LMI is infeasible for every tau < 1".into(),
        }),
        TauChoice::Value(v) => Ok(v),
    }
}

/// Analysis and certificate for a configuration.
pub fn analyze(cfg: &RunConfig) -> Result<(CondensedProblem, AnalysisReport), CliError> {
    let (problem, params) = setup(cfg)?;
    let rate = analysis::rate_certificate(&problem, params.alpha, params.epsilon).map_err(setup_error)?;
    let tau = resolve_tau(cfg.tau, &rate)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(CliError {
            code: EXIT_ILL_POSED,
            message: format!("tau = {tau} is outside (0, 1)"),
        });
    }
    let certificate = analysis::certificate(&problem, params.alpha, tau).map_err(setup_error)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l1_empirical = analysis::empirical_l1(&problem, 64, &mut rng).map_err(setup_error)?;
    let spectral = analysis::spectral_constants(&problem, params.epsilon);
    let report = AnalysisReport {
        alpha: params.alpha,
        rho: params.rho,
        epsilon: params.epsilon,
        epsilon_effective: analysis::effective_epsilon(params.rho, &spectral),
        tau_choice: cfg.tau,
        rate,
        certificate,
        l1_empirical,
        seed: cfg.seed,
    };
    Ok((problem, report))
}

pub fn render_report(r: &AnalysisReport) -> String {
    let c = &r.certificate;
    let rate = &r.rate;
    let opt = |v: Option<f64>| v.map_or("infeasible".to_string(), |v| format!("{v:.6}"));
    let mut s = String::new();
    s += &format!("p = {:.6}, L = {:.6}, kappa = {:.6}\n", rate.p, rate.l, rate.kappa);
    s += &format!(
        "rho = {} (suggested {:.6}; effective epsilon {:.6})\n",
        r.rho, rate.rho_suggested, r.epsilon_effective
    );
    s += &format!(
        "tau_formula = {:.6}, tau_lmi = {}, tau used = {:.6} ({})\n",
        rate.tau_formula,
        opt(rate.tau_lmi),
        c.tau,
        r.tau_choice
    );
    s += &format!("alpha_max = {}, kappa_F = {:.9}\n", opt(rate.alpha_max), rate.kappa_f);
    s += &format!("L1 = {:.6} (sampled lower bound {:.6})\n", c.l1, r.l1_empirical);
    s += &format!("delta = {:.6}, beta = {:.12}\n", c.delta, c.beta);
    s += &format!("gamma1 = {:.6e}, gamma3 = {:.6}\n", c.gamma1, c.gamma3);
    s += &format!("omega1 = {:.6}, omega2 = {:.6}\n", c.omega1, c.omega2);
    s += &format!(
        "c = {:.6}, d = {:.6}, r_N = {:.6}, r_e = {:.6e}\n",
        c.c, c.d, c.r_n, c.r_e
    );
    s += &format!(
        "ell* = {} (branches {:.3}, {:.3}; with ||F^1/2||: {})\n",
        c.ell_star, c.ell_branch_small_gain, c.ell_branch_invariance, c.ell_star_with_f
    );
    s
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalysisReport, CliError> {
    let (_, report) = analyze(cfg)?;
    let path = write_json(&cfg.out, "certificate.json", &report)?;
    out!("{}", render_report(&report).trim_end());
    info!("wrote {}", path.display());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub table: SweepTable,
    pub csv_files: Vec<String>,
    pub aborted: usize,
    pub tau: f64,
}

fn csv_name(x0_index: usize, budget: Budget) -> String {
    format!("traj_x{x0_index}_ell{}.csv", budget.label())
}

/// Run the sweep and write one CSV per `(x₀, ℓ)`.
fn simulate_and_log(
    cfg: &RunConfig,
    jobs: usize,
) -> Result<
    (
        AnalysisReport,
        Vec<TrajectoryLog>,
        Vec<CertificateReport>,
        SimulationSummary,
    ),
    CliError,
> {
    let (problem, report) = analyze(cfg)?;
    let params = cfg.admm_params()?;
    let x0s = cfg.initial_states(problem.n())?;
    let budgets = cfg.budgets();
    let (table, logs) =
        simulator::sweep_ell(&problem, params, &x0s, &budgets, cfg.experiment.steps, jobs).map_err(|e| match e {
            Error::InfeasibleParameter(_) => CliError::config(e.to_string()),
            other => setup_error(other),
        })?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::config(format!("cannot create {}: {e}", cfg.out.display())))?;
    let mut csv_files = Vec::new();
    let mut reports = Vec::new();
    for (k, log) in logs.iter().enumerate() {
        let cert = simulator::certify_trajectory(log, &report.certificate);
        let name = csv_name(k / budgets.len(), budgets[k % budgets.len()]);
        let path = cfg.out.join(&name);
        let file =
            fs::File::create(&path).map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        simulator::write_csv(std::io::BufWriter::new(file), log, &cert).map_err(setup_error)?;
        csv_files.push(name);
        reports.push(cert);
    }
    let aborted = logs.iter().filter(|l| l.aborted.is_some()).count();
    let summary = SimulationSummary {
        table,
        csv_files,
        aborted,
        tau: report.certificate.tau,
    };
    Ok((report, logs, reports, summary))
}

/// Gnuplot script drawing state trajectories and inputs from the CSVs.
pub fn plot_script(files: &[String]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    s += "set terminal pngcairo size 1200,500\nset output 'trajectories.png'\nset multiplot layout 1,2\n";
    let states: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using 2:3 with linespoints title '{f}'"))
        .collect();
    s += &format!(
        "set title 'states'\nset xrange [-5:5]\nset yrange [-5:5]\nplot {}\n",
        states.join(", \\\n     ")
    );
    let inputs: Vec<String> = files
        .iter()
        .map(|f| format!("'{f}' using 1:4 with steps title '{f}'"))
        .collect();
    s += &format!(
        "set title 'inputs'\nset autoscale x\nset yrange [-0.6:0.6]\nplot {}, 0.5 lt 0 notitle, -0.5 lt 0 notitle\n",
        inputs.join(", \\\n     ")
    );
    s += "unset multiplot\n";
    s
}

pub fn cmd_simulate(cfg: &RunConfig, jobs: usize) -> Result<SimulationSummary, CliError> {
    let (_, _, _, summary) = simulate_and_log(cfg, jobs)?;
    write_json(&cfg.out, "summary.json", &summary)?;
    fs::write(cfg.out.join("plot.gp"), plot_script(&summary.csv_files))
        .map_err(|e| CliError::config(format!("cannot write plot script: {e}")))?;
    for cell in &summary.table.cells {
        out!(
            "x0 #{} ell {}: |x_T| = {:.3e}, sup|B e| = {:.3e}, input violations {}, state violations {}{}",
            cell.x0_index,
            cell.budget.label(),
            cell.terminal_norm,
            cell.sup_bbar_e,
            cell.input_violations,
            cell.state_violations,
            cell.aborted
                .as_deref()
                .map(|a| format!(", aborted ({a})"))
                .unwrap_or_default()
        );
    }
    if summary.aborted > 0 {
        return Err(CliError {
            code: EXIT_INFEASIBLE,
            message: format!(
                "{} trajectories hit an infeasible OCP; partial CSVs kept",
                summary.aborted
            ),
        });
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    pub tau: f64,
    pub ell_star: u64,
    pub reports: Vec<CertifyEntry>,
    pub guaranteed_failures: usize,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyEntry {
    pub csv: String,
    pub aborted: Option<String>,
    pub report: CertificateReport,
}

pub fn cmd_certify(cfg: &RunConfig, jobs: usize) -> Result<CertifySummary, CliError> {
    let (analysis_report, logs, reports, summary) = simulate_and_log(cfg, jobs)?;
    let entries: Vec<CertifyEntry> = reports
        .into_iter()
        .zip(&logs)
        .zip(&summary.csv_files)
        .map(|((report, log), csv)| CertifyEntry {
            csv: csv.clone(),
            aborted: log.aborted.clone(),
            report,
        })
        .collect();
    let guaranteed_failures = entries.iter().map(|e| e.report.guaranteed_failures()).sum();
    let out = CertifySummary {
        tau: analysis_report.certificate.tau,
        ell_star: analysis_report.certificate.ell_star,
        reports: entries,
        guaranteed_failures,
        aborted: summary.aborted,
    };
    write_json(&cfg.out, "certify.json", &out)?;
    for e in &out.reports {
        out!(
            "{}: certified regime {}, violations {} (guaranteed {})",
            e.csv,
            e.report.certified_regime,
            e.report.violations.len(),
            e.report.guaranteed_failures()
        );
    }
    if out.aborted > 0 {
        return Err(CliError {
            code: EXIT_INFEASIBLE,
            message: format!("{} trajectories hit an infeasible OCP", out.aborted),
        });
    }
    if guaranteed_failures > 0 {
        return Err(CliError {
            code: EXIT_CERTIFICATE,
            message: format!("{guaranteed_failures} guaranteed certificate checks failed"),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiRow {
    pub alpha: f64,
    pub tau_formula: f64,
    pub tau_lmi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiTable {
    pub kappa: f64,
    pub epsilon: f64,
    pub rows: Vec<LmiRow>,
    pub alpha_max: Option<f64>,
}

/// Default relaxation grid: 0.1, 0.2, …, 1.9 and 1.95.
fn default_alphas() -> Vec<f64> {
    let mut v: Vec<f64> = (1..20).map(|k| k as f64 / 10.0).collect();
    v.push(1.95);
    v
}

pub fn lmi_table(kappa: f64, epsilon: f64, alphas: &[f64]) -> Result<LmiTable, CliError> {
    if alphas.is_empty() {
        return Err(CliError::config("the alpha grid is empty"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 2.0)) {
        return Err(CliError::config(format!("alpha = {a} is outside (0, 2)")));
    }
    let rows = alphas
        .iter()
        .map(|&alpha| LmiRow {
            alpha,
            tau_formula: analysis::tau_formula(alpha, kappa, epsilon),
            tau_lmi: analysis::min_certified_rate(alpha, kappa, epsilon).map(|(t, _)| t),
        })
        .collect();
    Ok(LmiTable {
        kappa,
        epsilon,
        rows,
        alpha_max: analysis::bisect_alpha(kappa, epsilon),
    })
}

pub fn cmd_lmi(cfg: &RunConfig) -> Result<LmiTable, CliError> {
    let (problem, params) = setup(cfg)?;
    let spectral = analysis::spectral_constants(&problem, params.epsilon);
    let alphas = cfg.lmi_alphas.clone().unwrap_or_else(default_alphas);
    let table = lmi_table(spectral.kappa, params.epsilon, &alphas)?;
    write_json(&cfg.out, "lmi.json", &table)?;
    out!("kappa = {:.6}, epsilon = {}", table.kappa, table.epsilon);
    out!("{:>8} {:>12} {:>12}", "alpha", "tau_formula", "tau_lmi");
    for r in &table.rows {
        let lmi = r.tau_lmi.map_or("infeasible".into(), |t| format!("{t:.6}"));
        out!("{:>8.3} {:>12.6} {:>12}", r.alpha, r.tau_formula, lmi);
    }
    out!(
        "alpha_max = {}",
        table.alpha_max.map_or("none".into(), |a| format!("{a:.3}"))
    );
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_choice_parses() {
        assert_eq!("lmi".parse::<TauChoice>().unwrap(), TauChoice::Lmi);
        assert_eq!("formula".parse::<TauChoice>().unwrap(), TauChoice::Formula);
        assert_eq!("0.69".parse::<TauChoice>().unwrap(), TauChoice::Value(0.69));
        assert!("1.5".parse::<TauChoice>().is_err());
        assert!("fast".parse::<TauChoice>().is_err());
    }

    #[test]
    fn preset_config_round_trips() {
        let cfg = RunConfig::preset(Preset::DoubleIntegrator);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_accepts_fixed_point_budget() {
        let text = r#"{"problem": {"preset": "appendix-d"},
            "admm": {"alpha": 1.5, "rho": 10, "ell": "fixed-point"},
            "experiment": {"x0": [[0.1, 0.0]], "T": 3, "ell_sweep": [5, "fixed-point"]},
            "tau": 0.9}"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.budgets(), vec![Budget::Iterations(5), Budget::FixedPoint]);
        assert_eq!(cfg.tau, TauChoice::Value(0.9));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"problem": {"preset": "appendix-d"}, "admm": {"alpha": 1.5, "rho": 10, "ell": 3, "typo": 1},
            "experiment": {"x0": [[0.1, 0.0]], "T": 3}}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn empty_alpha_grid_is_a_config_error() {
        assert_eq!(lmi_table(10.0, 0.0, &[]).unwrap_err().code, EXIT_CONFIG);
        assert_eq!(lmi_table(10.0, 0.0, &[2.5]).unwrap_err().code, EXIT_CONFIG);
    }

    #[test]
    fn missing_source_is_a_config_error() {
        let cli = Cli::try_parse_from(["subopt-mpc", "analyze"]).unwrap();
        assert_eq!(run(&cli).unwrap_err().code, EXIT_CONFIG);
    }
}
