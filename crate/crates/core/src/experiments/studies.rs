use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manufacture::{add_noise, Benchmark, NoiseSpec};
use crate::adjoint::window_steps;
use crate::error::{Error, Result};
use crate::forward::solve_forward;
use crate::grid::Mesh;
use crate::objective::{AdmissibleSet, Functional, InverseProblem};
use crate::optimize::{minimize, GradientMetric, InversionResult, MinimizeOptions, Termination};

/// Inner solver settings used by both studies unless overridden.
pub fn study_options() -> MinimizeOptions {
    MinimizeOptions { rel_grad_tol: 1e-6, metric: GradientMetric::Adaptive, ..MinimizeOptions::default() }
}

/// What the optimizer reported for one inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub termination: Termination,
    pub final_cost: f64,
    pub final_grad_norm: f64,
    pub active_bounds: usize,
}

impl RunSummary {
    fn of(r: &InversionResult) -> Self {
        Self {
            iterations: r.iterations,
            termination: r.termination,
            final_cost: r.cost_history.last().map_or(f64::NAN, |c| c.total),
            final_grad_norm: r.grad_norm_history.last().copied().unwrap_or(f64::NAN),
            active_bounds: r.active_bounds.len(),
        }
    }
}

/// One cell of a study.
///
/// In the convergence study the errors are against `q*` and the residual
/// is the windowed state residual. In the stability study they are
/// between the exact-data and noisy-data minimizers and the residual is
/// `||u(T; q1) - u(T; q2)||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub delta: f64,
    #[serde(rename = "N")]
    pub regularization: f64,
    pub sigma: Option<f64>,
    #[serde(rename = "coeff_err_L2")]
    pub coeff_err_l2: f64,
    pub coeff_err_max: f64,
    pub residual_norm: f64,
    /// `||g - g_delta||`
    pub data_distance: f64,
    /// Interior point where the two recovered coefficients agree.
    pub crossing: Option<f64>,
    pub run: RunSummary,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub x: String,
    pub y: String,
    pub slope: f64,
    /// `exp(intercept)`, so `y ~ constant * x^slope`.
    pub constant: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

pub fn fit_loglog(x_name: &str, y_name: &str, xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "log-log fit of {y_name} against {x_name} needs positive finite values"
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(format!("all {x_name} values coincide")));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(SlopeFit {
        x: x_name.to_owned(),
        y: y_name.to_owned(),
        slope,
        constant: intercept.exp(),
        residual: (ss / n).sqrt(),
        points: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub study: String,
    pub rows: Vec<StudyRow>,
    /// Noise-free run, kept out of the fits.
    pub baseline: Option<StudyRow>,
    pub fits: Vec<SlopeFit>,
    /// Ratios of consecutive max-norm differences when `delta` doubles.
    pub doubling_factors: Vec<f64>,
    /// Set when an inner minimization stalled.
    pub partial: bool,
    pub notes: Vec<String>,
}

impl RateReport {
    pub fn fit(&self, y: &str, x: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.x == x && f.y == y)
    }

    /// Flat table, baseline first when present. Floats use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidParameter(format!("csv output failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "delta",
            "N",
            "sigma",
            "coeff_err_L2",
            "coeff_err_max",
            "residual_norm",
            "iterations",
            "termination",
        ])
        .map_err(io)?;
        for r in self.baseline.iter().chain(&self.rows) {
            w.write_record([
                r.delta.to_string(),
                r.regularization.to_string(),
                r.sigma.map(|s| s.to_string()).unwrap_or_default(),
                r.coeff_err_l2.to_string(),
                r.coeff_err_max.to_string(),
                r.residual_norm.to_string(),
                r.run.iterations.to_string(),
                r.run.termination.as_str().to_owned(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidParameter(format!("csv output failed: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub deltas: Vec<f64>,
    /// `N = coupling * delta`
    pub coupling: f64,
    /// Window length; `None` means four time steps.
    pub sigma: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Constant initial guess; the pinned endpoints take the values of `q*`.
    pub q0: f64,
    pub seed: u64,
    pub baseline: bool,
    pub options: MinimizeOptions,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            deltas: vec![1e-1, 1e-2, 1e-3],
            coupling: 1.0,
            sigma: None,
            alpha: 0.5,
            beta: 2.0,
            q0: 1.0,
            seed: 0,
            baseline: true,
            options: study_options(),
        }
    }
}

fn diff_norms(mesh: &Mesh, a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
    (mesh.norm(&d), d.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

fn is_stalled(r: &InversionResult) -> bool {
    r.termination == Termination::StalledLineSearch
}

/// Minimizes `J_sigma` for each noise level with `N = c delta` and endpoints
/// pinned to `q*`, then fits error and residual slopes against `delta`.
pub fn run_convergence_study(bench: &Benchmark, config: &ConvergenceConfig) -> Result<RateReport> {
    let mesh = *bench.mesh();
    if config.deltas.is_empty() || config.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter("noise levels must be positive".into()));
    }
    if config.deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("noise levels must be strictly decreasing".into()));
    }
    if !(config.coupling > 0.0) {
        return Err(Error::InvalidParameter(format!("coupling must be positive, got {}", config.coupling)));
    }
    let sigma = config.sigma.unwrap_or(4.0 * mesh.dt());
    let window = window_steps(&mesh, sigma)?;
    let last = mesh.nodes_len() - 1;
    let set = AdmissibleSet::new(config.alpha, config.beta, 0.0)?.with_pin(bench.q_star[0], bench.q_star[last]);
    let base = InverseProblem::new(bench.spec.clone(), bench.data.clone(), set, Functional::Windowed { sigma })?;
    let u_star = solve_forward(&bench.spec)?;
    let q0 = vec![config.q0; mesh.nodes_len()];

    let cell = |delta: f64| -> Result<StudyRow> {
        let g = add_noise(&mesh, &bench.data, NoiseSpec { delta, seed: config.seed })?;
        let n_reg = config.coupling * delta;
        let problem = base.with_data(g)?.with_set(set.with_regularization(n_reg));
        let r = minimize(&problem, &q0, &config.options)?;
        let (l2, max) = diff_norms(&mesh, &r.q_final, &bench.q_star);
        let u = problem.state(&r.q_final)?;
        let k = mesh.steps();
        let sum: f64 = (k - window..k)
            .map(|n| {
                let (d, _) = diff_norms(&mesh, u.row(n), u_star.row(n));
                d * d
            })
            .sum();
        Ok(StudyRow {
            delta,
            regularization: n_reg,
            sigma: Some(sigma),
            coeff_err_l2: l2,
            coeff_err_max: max,
            residual_norm: (sum * mesh.dt() / sigma).sqrt(),
            data_distance: delta,
            crossing: None,
            run: RunSummary::of(&r),
        })
    };

    let mut levels = config.deltas.clone();
    if config.baseline {
        levels.push(0.0);
    }
    let mut rows: Vec<StudyRow> = levels.par_iter().map(|&d| cell(d)).collect::<Result<_>>()?;
    let baseline = if config.baseline { rows.pop() } else { None };

    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.coeff_err_l2).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.residual_norm).collect();
    let mut fits = Vec::new();
    let mut notes = Vec::new();
    if rows.len() >= 2 {
        for (name, ys) in [("coeff_err_L2", &errs), ("residual_norm", &res)] {
            match fit_loglog("delta", name, &deltas, ys) {
                Ok(f) => fits.push(f),
                Err(e) => notes.push(e.to_string()),
            }
        }
    }
    let partial = rows.iter().chain(&baseline).any(|r| r.run.termination == Termination::StalledLineSearch);
    if partial {
        notes.push("an inner minimization stalled in the line search".into());
    }
    Ok(RateReport { study: "convergence".into(), rows, baseline, fits, doubling_factors: Vec::new(), partial, notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    /// `N` for the noise-level sweep.
    pub regularization: f64,
    /// Noise levels at fixed `N`, increasing.
    pub deltas: Vec<f64>,
    /// `N` values for the regularization sweep.
    pub sweep: Vec<f64>,
    /// Noise level used throughout the `N` sweep.
    pub sweep_delta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Shared constant starting point.
    pub q0: f64,
    pub seed: u64,
    pub options: MinimizeOptions,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            regularization: 1e-3,
            deltas: vec![1e-3, 2e-3, 4e-3],
            sweep: vec![1e-2, 1e-3, 1e-4],
            sweep_delta: 1e-3,
            alpha: 0.5,
            beta: 2.0,
            q0: 1.0,
            seed: 0,
            options: study_options(),
        }
    }
}

/// First interior point where `a - b` changes sign, by linear interpolation.
fn crossing_point(mesh: &Mesh, a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
    let last = d.len() - 1;
    for i in 1..last {
        if d[i] == 0.0 {
            return Some(mesh.node(i));
        }
        if i + 1 < last && d[i] * d[i + 1] < 0.0 {
            let t = d[i] / (d[i] - d[i + 1]);
            return Some(mesh.node(i) + t * mesh.h());
        }
    }
    None
}

/// Compares the minimizers of `J` for exact and noisy data, first at fixed
/// `N` across noise levels and then at fixed noise across `N`.
pub fn run_stability_study(bench: &Benchmark, config: &StabilityConfig) -> Result<RateReport> {
    let mesh = *bench.mesh();
    if config.deltas.iter().chain([&config.sweep_delta]).any(|d| !(*d >= 0.0)) {
        return Err(Error::InvalidParameter("noise levels must be nonnegative".into()));
    }
    if config.sweep.iter().chain([&config.regularization]).any(|n| !(*n > 0.0)) {
        return Err(Error::InvalidParameter("regularization weights must be positive".into()));
    }
    let set = AdmissibleSet::new(config.alpha, config.beta, config.regularization)?;
    let base = InverseProblem::new(bench.spec.clone(), bench.data.clone(), set, Functional::Terminal)?;
    let q0 = vec![config.q0; mesh.nodes_len()];

    let solve = |n_reg: f64, delta: f64| -> Result<InversionResult> {
        let g = add_noise(&mesh, &bench.data, NoiseSpec { delta, seed: config.seed })?;
        let problem = base.with_data(g)?.with_set(set.with_regularization(n_reg));
        minimize(&problem, &q0, &config.options)
    };
    let compare = |n_reg: f64, delta: f64, exact: &InversionResult, noisy: &InversionResult| -> Result<StudyRow> {
        let (l2, max) = diff_norms(&mesh, &exact.q_final, &noisy.q_final);
        let u1 = base.state(&exact.q_final)?;
        let u2 = base.state(&noisy.q_final)?;
        let (res, _) = diff_norms(&mesh, u1.last(), u2.last());
        Ok(StudyRow {
            delta,
            regularization: n_reg,
            sigma: None,
            coeff_err_l2: l2,
            coeff_err_max: max,
            residual_norm: res,
            data_distance: delta,
            crossing: crossing_point(&mesh, &exact.q_final, &noisy.q_final),
            run: RunSummary::of(noisy),
        })
    };

    let exact = solve(config.regularization, 0.0)?;
    let mut stalled = is_stalled(&exact);
    let delta_rows: Vec<(StudyRow, bool)> = config
        .deltas
        .par_iter()
        .map(|&d| {
            let noisy = solve(config.regularization, d)?;
            Ok((compare(config.regularization, d, &exact, &noisy)?, is_stalled(&noisy)))
        })
        .collect::<Result<_>>()?;
    let sweep_rows: Vec<(StudyRow, bool)> = config
        .sweep
        .par_iter()
        .map(|&n| {
            let exact = solve(n, 0.0)?;
            let noisy = solve(n, config.sweep_delta)?;
            Ok((compare(n, config.sweep_delta, &exact, &noisy)?, is_stalled(&exact) || is_stalled(&noisy)))
        })
        .collect::<Result<_>>()?;
    stalled |= delta_rows.iter().chain(&sweep_rows).any(|(_, s)| *s);

    let mut notes = Vec::new();
    let mut fits = Vec::new();
    let positive: Vec<&StudyRow> = delta_rows.iter().map(|(r, _)| r).filter(|r| r.delta > 0.0).collect();
    let doubling_factors: Vec<f64> = positive
        .windows(2)
        .filter(|w| (w[1].delta / w[0].delta - 2.0).abs() < 1e-9)
        .map(|w| w[1].coeff_err_max / w[0].coeff_err_max)
        .collect();
    if positive.len() >= 2 {
        let xs: Vec<f64> = positive.iter().map(|r| r.delta).collect();
        let ys: Vec<f64> = positive.iter().map(|r| r.coeff_err_max).collect();
        match fit_loglog("delta", "coeff_err_max", &xs, &ys) {
            Ok(f) => fits.push(f),
            Err(e) => notes.push(e.to_string()),
        }
    }
    if sweep_rows.len() >= 2 && config.sweep_delta > 0.0 {
        let xs: Vec<f64> = sweep_rows.iter().map(|(r, _)| r.regularization).collect();
        let ys: Vec<f64> = sweep_rows.iter().map(|(r, _)| r.coeff_err_max / r.data_distance).collect();
        match fit_loglog("N", "lipschitz_ratio", &xs, &ys) {
            Ok(f) => fits.push(f),
            Err(e) => notes.push(e.to_string()),
        }
    }
    let t = mesh.final_time();
    let mut seen = Vec::new();
    for &n in config.sweep.iter().chain([&config.regularization]) {
        if seen.contains(&n) {
            continue;
        }
        seen.push(n);
        notes.push(format!("N = {n}: T / N^(2/3) = {}", t / n.powf(2.0 / 3.0)));
    }
    let rows: Vec<StudyRow> = delta_rows.into_iter().chain(sweep_rows).map(|(r, _)| r).collect();
    for r in rows.iter().filter(|r| r.coeff_err_max > 0.0 && r.crossing.is_none()) {
        notes.push(format!(
            "delta = {}, N = {}: the recovered pair has no interior crossing",
            r.delta, r.regularization
        ));
    }
    if stalled {
        notes.push("an inner minimization stalled in the line search".into());
    }
    Ok(RateReport { study: "stability".into(), rows, baseline: None, fits, doubling_factors, partial: stalled, notes })
}
