//! Command-line front end.
//!
//! Exit status: 0 success, 1 domain error, 2 configuration error,
//! 3 property-suite failure. Diagnostics go to standard error as
//! `key=value` lines.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_config, FunctionalChoice, RunConfig};
use crate::error::Error;
use crate::experiments::{
    add_noise, manufacture, run_convergence_study, run_property_suite, run_stability_study, study_options, Benchmark,
    ConvergenceConfig, NoiseSpec, PropertySuite, StabilityConfig,
};
use crate::fichera::{classify_rectangle, FicheraOperator};
use crate::forward::{energy_report, max_principle_bound, solve_forward, ProblemSpec};
use crate::objective::{AdmissibleSet, Functional, InverseProblem};
use crate::optimize::{fixed_point, minimize, FixedPointOptions, InversionResult, MinimizeOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "radcoef", version, about = "Recover the radiative coefficient of a degenerate parabolic equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Configuration file; defaults apply when omitted.
    pub config: Option<PathBuf>,
    /// Overrides `[output] directory`.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `[noise] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the direct problem with q = q*.
    Forward(Common),
    /// Classify the boundary of the space-time rectangle.
    Fichera(Common),
    /// Recover q from manufactured data by projected gradient descent.
    Invert(Common),
    /// Recover q by the fixed-point iteration.
    FixedPoint(Common),
    /// Error and residual rates as the noise level decreases.
    StudyConvergence(Common),
    /// Sensitivity of the minimizer to data perturbations.
    StudyStability(Common),
    /// Randomized checks of the scheme's guarantees.
    Properties(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward(_) => "forward",
            Command::Fichera(_) => "fichera",
            Command::Invert(_) => "invert",
            Command::FixedPoint(_) => "fixed-point",
            Command::StudyConvergence(_) => "study-convergence",
            Command::StudyStability(_) => "study-stability",
            Command::Properties(_) => "properties",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Forward(c)
            | Command::Fichera(c)
            | Command::Invert(c)
            | Command::FixedPoint(c)
            | Command::StudyConvergence(c)
            | Command::StudyStability(c)
            | Command::Properties(c) => c,
        }
    }
}

enum Failure {
    Config(Vec<String>),
    Domain(String),
    Property(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn quote(s: &str) -> String {
    format!("{s:?}")
}

fn log(fields: &[(&str, String)]) {
    let mut line = String::new();
    for (i, (k, v)) in fields.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{k}={v}");
    }
    eprintln!("{line}");
}

/// All writes go through here, so nothing lands outside `dir`.
struct Output {
    dir: PathBuf,
    csv: bool,
    json: bool,
}

impl Output {
    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))?;
        log(&[("level", "info".into()), ("event", "wrote".into()), ("path", quote(&path.display().to_string()))]);
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        if !self.json {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn csv(&self, name: &str, contents: impl FnOnce() -> Result<String, Failure>) -> Result<(), Failure> {
        if !self.csv {
            return Ok(());
        }
        self.write(name, &contents()?)
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
            parse_config(&text).map_err(|errs| Failure::Config(errs.0.iter().map(ToString::to_string).collect()))?
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.output_dir {
        config.output.directory = dir.display().to_string();
    }
    if let Some(seed) = common.seed {
        config.noise.seed = seed;
    }
    Ok(config)
}

fn problem_spec(config: &RunConfig) -> crate::Result<ProblemSpec> {
    let mesh = config.mesh()?;
    let p = &config.problem;
    let coeff = p.coefficient.sample_with_mode(&mesh, config.mode())?;
    ProblemSpec::new(mesh, coeff, p.profile.sample(&mesh), p.initial.sample(&mesh))
}

fn benchmark(config: &RunConfig) -> crate::Result<Benchmark> {
    let p = &config.problem;
    let i = &config.inversion;
    manufacture(p.profile, &config.mesh()?, p.coefficient, p.initial, (i.alpha, i.beta))
}

fn minimize_options(config: &RunConfig, rel_default: f64) -> MinimizeOptions {
    let i = &config.inversion;
    MinimizeOptions {
        grad_tol: i.grad_tol,
        rel_grad_tol: i.rel_grad_tol.unwrap_or(rel_default),
        max_iter: i.max_iter,
        metric: i.metric,
    }
}

/// Manufactured inverse problem with noisy data as configured.
fn inverse_problem(config: &RunConfig) -> crate::Result<(Benchmark, InverseProblem)> {
    let bench = benchmark(config)?;
    let mesh = *bench.mesh();
    let i = &config.inversion;
    let g = add_noise(&mesh, &bench.data, NoiseSpec { delta: config.noise.delta, seed: config.noise.seed })?;
    let mut set = AdmissibleSet::new(i.alpha, i.beta, i.n)?;
    if i.pin {
        let last = bench.q_star.len() - 1;
        set = set.with_pin(bench.q_star[0], bench.q_star[last]);
    }
    let functional = match i.functional {
        FunctionalChoice::Terminal => Functional::Terminal,
        FunctionalChoice::Windowed => Functional::Windowed { sigma: config.sigma() },
    };
    let problem = InverseProblem::new(bench.spec.clone(), g, set, functional)?;
    Ok((bench, problem))
}

#[derive(Serialize)]
struct InversionOutput<'a> {
    command: &'a str,
    delta: f64,
    seed: u64,
    coeff_err_l2: f64,
    coeff_err_max: f64,
    q_star: &'a [f64],
    result: &'a InversionResult,
}

fn coefficient_csv(nodes: &[f64], q: &[f64], q_star: &[f64]) -> String {
    let mut s = String::from("x,q,q_star\n");
    for ((x, q), qs) in nodes.iter().zip(q).zip(q_star) {
        let _ = writeln!(s, "{x},{q},{qs}");
    }
    s
}

fn report_inversion(
    out: &Output,
    name: &str,
    config: &RunConfig,
    bench: &Benchmark,
    r: &InversionResult,
) -> Result<(), Failure> {
    let mesh = bench.mesh();
    let d: Vec<f64> = r.q_final.iter().zip(&bench.q_star).map(|(a, b)| a - b).collect();
    let coeff_err_max = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let summary = InversionOutput {
        command: name,
        delta: config.noise.delta,
        seed: config.noise.seed,
        coeff_err_l2: mesh.norm(&d),
        coeff_err_max,
        q_star: &bench.q_star,
        result: r,
    };
    let stem = name.replace('-', "_");
    out.json(&format!("{stem}.json"), &summary)?;
    out.csv(&format!("{stem}.csv"), || Ok(coefficient_csv(&mesh.nodes(), &r.q_final, &bench.q_star)))?;
    log(&[
        ("level", "info".into()),
        ("event", "finished".into()),
        ("termination", r.termination.as_str().into()),
        ("iterations", r.iterations.to_string()),
        ("coeff_err_max", coeff_err_max.to_string()),
    ]);
    Ok(())
}

fn dispatch(command: &Command, config: &RunConfig) -> Result<(), Failure> {
    let dir = PathBuf::from(&config.output.directory);
    fs::create_dir_all(&dir).map_err(|e| Failure::Domain(format!("cannot create {}: {e}", dir.display())))?;
    let out = Output { dir, csv: config.output.csv, json: config.output.json };
    match command {
        Command::Forward(_) => {
            let spec = problem_spec(config)?;
            let u = solve_forward(&spec)?;
            let energy = energy_report(&u, &spec)?;
            #[derive(Serialize)]
            struct ForwardOutput {
                max_principle_bound: f64,
                max_abs: f64,
                energy: crate::forward::EnergyReport,
            }
            out.json(
                "energy.json",
                &ForwardOutput { max_principle_bound: max_principle_bound(&spec)?, max_abs: u.max_abs(), energy },
            )?;
            out.csv("forward.csv", || {
                let mesh = &spec.mesh;
                // One row per time level; the header names the node positions.
                let mut s = String::from("t");
                for x in mesh.nodes() {
                    let _ = write!(s, ",{x}");
                }
                s.push('\n');
                for (n, row) in u.rows().enumerate() {
                    let _ = write!(s, "{}", mesh.time(n));
                    for v in row {
                        let _ = write!(s, ",{v}");
                    }
                    s.push('\n');
                }
                Ok(s)
            })?;
        }
        Command::Fichera(_) => {
            let mesh = config.mesh()?;
            let op = FicheraOperator::for_coefficient(config.problem.coefficient, mesh.length());
            let report = classify_rectangle(&op, &mesh)?;
            for side in &report.sides {
                log(&[
                    ("level", "info".into()),
                    ("side", format!("{:?}", side.side).to_lowercase()),
                    ("class", serde_json::to_string(&side.class).unwrap_or_default().trim_matches('"').to_owned()),
                ]);
            }
            out.json("fichera.json", &report)?;
        }
        Command::Invert(_) => {
            let (bench, problem) = inverse_problem(config)?;
            let q0 = vec![config.inversion.q0; bench.q_star.len()];
            let r = minimize(&problem, &q0, &minimize_options(config, MinimizeOptions::default().rel_grad_tol))?;
            report_inversion(&out, "invert", config, &bench, &r)?;
        }
        Command::FixedPoint(_) => {
            let (bench, problem) = inverse_problem(config)?;
            let q0 = vec![config.inversion.q0; bench.q_star.len()];
            let i = &config.inversion;
            let opts = FixedPointOptions { lambda: i.lambda, tol: i.fp_tol, max_iter: i.max_iter };
            let r = fixed_point(&problem, &q0, &opts)?;
            report_inversion(&out, "fixed-point", config, &bench, &r)?;
        }
        Command::StudyConvergence(_) => {
            let bench = benchmark(config)?;
            let i = &config.inversion;
            let s = &config.study;
            let cfg = ConvergenceConfig {
                deltas: s.deltas.clone(),
                coupling: s.coupling,
                sigma: Some(config.sigma()),
                alpha: i.alpha,
                beta: i.beta,
                q0: i.q0,
                seed: config.noise.seed,
                baseline: s.baseline,
                options: minimize_options(config, study_options().rel_grad_tol),
            };
            let started = Instant::now();
            let report = run_convergence_study(&bench, &cfg)?;
            log_fits(&report, started);
            out.json("convergence.json", &report)?;
            out.csv("convergence.csv", || report.to_csv_string().map_err(Failure::from))?;
        }
        Command::StudyStability(_) => {
            let bench = benchmark(config)?;
            let i = &config.inversion;
            let s = &config.study;
            let cfg = StabilityConfig {
                regularization: s.stability_n,
                deltas: s.stability_deltas.clone(),
                sweep: s.sweep_n.clone(),
                sweep_delta: s.sweep_delta,
                alpha: i.alpha,
                beta: i.beta,
                q0: i.q0,
                seed: config.noise.seed,
                options: minimize_options(config, study_options().rel_grad_tol),
            };
            let started = Instant::now();
            let report = run_stability_study(&bench, &cfg)?;
            log_fits(&report, started);
            out.json("stability.json", &report)?;
            out.csv("stability.csv", || report.to_csv_string().map_err(Failure::from))?;
        }
        Command::Properties(_) => {
            let p = &config.properties;
            let suite = PropertySuite {
                max_principle: p.max_principle,
                adjoint_bound: p.adjoint,
                contraction: p.contraction,
                gradient: p.gradient,
                duality: p.duality,
                seed: config.noise.seed,
                inject_fault: p.inject_fault,
            };
            let report = run_property_suite(&suite)?;
            for c in &report.checks {
                let mut fields = vec![
                    ("level", if c.passed() { "info" } else { "error" }.to_owned()),
                    ("check", c.name.clone()),
                    ("trials", c.trials.to_string()),
                    ("failures", c.failures.to_string()),
                    ("worst", c.worst.to_string()),
                ];
                if let Some(ce) = &c.counterexample {
                    fields.push(("counterexample", quote(ce)));
                }
                log(&fields);
            }
            out.json("properties.json", &report)?;
            if !report.passed() {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
                return Err(Failure::Property(failed.join(",")));
            }
        }
    }
    Ok(())
}

fn log_fits(report: &crate::experiments::RateReport, started: Instant) {
    for f in &report.fits {
        log(&[
            ("level", "info".into()),
            ("fit", format!("{}~{}", f.y, f.x)),
            ("slope", f.slope.to_string()),
            ("residual", f.residual.to_string()),
        ]);
    }
    log(&[
        ("level", "info".into()),
        ("event", "study-done".into()),
        ("partial", report.partial.to_string()),
        ("seconds", format!("{:.3}", started.elapsed().as_secs_f64())),
    ]);
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = cli.command.name();
    let result = load(cli.command.common()).and_then(|config| dispatch(&cli.command, &config));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(errors)) => {
            for e in errors {
                log(&[
                    ("level", "error".into()),
                    ("command", name.into()),
                    ("kind", "config".into()),
                    ("message", quote(&e)),
                ]);
            }
            EXIT_CONFIG
        }
        Err(Failure::Domain(msg)) => {
            log(&[
                ("level", "error".into()),
                ("command", name.into()),
                ("kind", "domain".into()),
                ("message", quote(&msg)),
            ]);
            EXIT_DOMAIN
        }
        Err(Failure::Property(failed)) => {
            log(&[
                ("level", "error".into()),
                ("command", name.into()),
                ("kind", "property".into()),
                ("failed", failed),
            ]);
            EXIT_PROPERTY
        }
    }
}
