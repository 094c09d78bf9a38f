//! Run configuration: a small `[section]` / `key = value` format.
//!
//! ```text
//! [problem]
//! l = 1
//! T = 1
//! M = 100
//! K = 1000
//! coefficient = power
//! coefficient_alpha = 2
//! coefficient_beta = 2
//! profile = bump
//!
//! [inversion]
//! N = 1e-4
//! pin = true
//! ```
//!
//! Comments start with `#`. Every key is optional; [`RunConfig::to_text`]
//! writes all of them out explicitly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::experiments::{InitialDatum, Profile};
use crate::grid::{Coefficient, DegeneracyMode, Mesh};
use crate::optimize::GradientMetric;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Every problem found in one pass over the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalChoice {
    Terminal,
    Windowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub l: f64,
    pub t: f64,
    pub m: usize,
    pub k: usize,
    pub coefficient: Coefficient,
    /// `None` means the coefficient's natural mode.
    pub mode: Option<DegeneracyMode>,
    pub initial: InitialDatum,
    pub profile: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub functional: FunctionalChoice,
    pub n: f64,
    /// `None` means four time steps.
    pub sigma: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub q0: f64,
    pub pin: bool,
    pub grad_tol: Option<f64>,
    /// `None` leaves the choice to the command.
    pub rel_grad_tol: Option<f64>,
    pub max_iter: usize,
    pub metric: GradientMetric,
    pub lambda: f64,
    pub fp_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: String,
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub deltas: Vec<f64>,
    pub coupling: f64,
    pub baseline: bool,
    pub stability_n: f64,
    pub stability_deltas: Vec<f64>,
    pub sweep_n: Vec<f64>,
    pub sweep_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertiesConfig {
    pub max_principle: usize,
    pub adjoint: usize,
    pub contraction: usize,
    pub gradient: usize,
    pub duality: usize,
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub inversion: InversionConfig,
    pub noise: NoiseConfig,
    pub output: OutputConfig,
    pub study: StudyConfig,
    pub properties: PropertiesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig {
                l: 1.0,
                t: 1.0,
                m: 100,
                k: 1000,
                coefficient: Coefficient::Quadratic,
                mode: None,
                initial: InitialDatum::Constant { value: 1.0 },
                profile: Profile::standard_bump(),
            },
            inversion: InversionConfig {
                functional: FunctionalChoice::Terminal,
                n: 1e-6,
                sigma: None,
                alpha: 0.5,
                beta: 2.0,
                q0: 1.0,
                pin: false,
                grad_tol: None,
                rel_grad_tol: None,
                max_iter: 500,
                metric: GradientMetric::Adaptive,
                lambda: 1.0,
                fp_tol: 1e-10,
            },
            noise: NoiseConfig { delta: 0.0, seed: 0 },
            output: OutputConfig { directory: "out".into(), csv: true, json: true },
            study: StudyConfig {
                deltas: vec![1e-1, 1e-2, 1e-3],
                coupling: 1.0,
                baseline: true,
                stability_n: 1e-3,
                stability_deltas: vec![1e-3, 2e-3, 4e-3],
                sweep_n: vec![1e-2, 1e-3, 1e-4],
                sweep_delta: 1e-3,
            },
            properties: PropertiesConfig {
                max_principle: 100,
                adjoint: 50,
                contraction: 20,
                gradient: 10,
                duality: 10,
                inject_fault: false,
            },
        }
    }
}

impl RunConfig {
    pub fn mesh(&self) -> crate::Result<Mesh> {
        let p = &self.problem;
        Mesh::new(p.l, p.m, p.t, p.k)
    }

    /// Window length with the four-step default applied.
    pub fn sigma(&self) -> f64 {
        let p = &self.problem;
        self.inversion.sigma.unwrap_or(4.0 * p.t / p.k as f64)
    }

    pub fn mode(&self) -> DegeneracyMode {
        self.problem.mode.unwrap_or(self.problem.coefficient.natural_mode())
    }

    /// Text that parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        let p = &self.problem;
        kv("[problem]", String::new());
        kv("l", p.l.to_string());
        kv("T", p.t.to_string());
        kv("M", p.m.to_string());
        kv("K", p.k.to_string());
        match p.coefficient {
            Coefficient::Quadratic => kv("coefficient", "quadratic".into()),
            Coefficient::Power { alpha, beta } => {
                kv("coefficient", "power".into());
                kv("coefficient_alpha", alpha.to_string());
                kv("coefficient_beta", beta.to_string());
            }
            Coefficient::Constant { value } => {
                kv("coefficient", "constant".into());
                kv("coefficient_value", value.to_string());
            }
        }
        if let Some(mode) = p.mode {
            kv("mode", mode_name(mode).into());
        }
        match p.initial {
            InitialDatum::Constant { value } => {
                kv("initial", "constant".into());
                kv("initial_value", value.to_string());
            }
            InitialDatum::Sine => kv("initial", "sine".into()),
        }
        match p.profile {
            Profile::Constant { value } => {
                kv("profile", "constant".into());
                kv("profile_value", value.to_string());
            }
            Profile::Bump { base, height, width } => {
                kv("profile", "bump".into());
                kv("profile_base", base.to_string());
                kv("profile_height", height.to_string());
                kv("profile_width", width.to_string());
            }
            Profile::Ramp { left, right } => {
                kv("profile", "ramp".into());
                kv("profile_left", left.to_string());
                kv("profile_right", right.to_string());
            }
            Profile::Parabola { base, height } => {
                kv("profile", "parabola".into());
                kv("profile_base", base.to_string());
                kv("profile_height", height.to_string());
            }
        }
        let i = &self.inversion;
        kv("\n[inversion]", String::new());
        let functional = match i.functional {
            FunctionalChoice::Terminal => "terminal",
            FunctionalChoice::Windowed => "windowed",
        };
        kv("functional", functional.into());
        kv("N", i.n.to_string());
        if let Some(s) = i.sigma {
            kv("sigma", s.to_string());
        }
        kv("alpha", i.alpha.to_string());
        kv("beta", i.beta.to_string());
        kv("q0", i.q0.to_string());
        kv("pin", i.pin.to_string());
        if let Some(g) = i.grad_tol {
            kv("grad_tol", g.to_string());
        }
        if let Some(g) = i.rel_grad_tol {
            kv("rel_grad_tol", g.to_string());
        }
        kv("max_iter", i.max_iter.to_string());
        match i.metric {
            GradientMetric::L2 => kv("metric", "l2".into()),
            GradientMetric::Sobolev { smoothing } => {
                kv("metric", "sobolev".into());
                kv("smoothing", smoothing.to_string());
            }
            GradientMetric::Regularized { mass } => {
                kv("metric", "regularized".into());
                kv("mass", mass.to_string());
            }
            GradientMetric::Adaptive => kv("metric", "adaptive".into()),
        }
        kv("lambda", i.lambda.to_string());
        kv("fp_tol", i.fp_tol.to_string());
        kv("\n[noise]", String::new());
        kv("delta", self.noise.delta.to_string());
        kv("seed", self.noise.seed.to_string());
        let o = &self.output;
        kv("\n[output]", String::new());
        kv("directory", o.directory.clone());
        let formats: Vec<&str> = [("csv", o.csv), ("json", o.json)].iter().filter(|f| f.1).map(|f| f.0).collect();
        kv("formats", formats.join(", "));
        let s = &self.study;
        kv("\n[study]", String::new());
        kv("deltas", join(&s.deltas));
        kv("coupling", s.coupling.to_string());
        kv("baseline", s.baseline.to_string());
        kv("stability_N", s.stability_n.to_string());
        kv("stability_deltas", join(&s.stability_deltas));
        kv("sweep_N", join(&s.sweep_n));
        kv("sweep_delta", s.sweep_delta.to_string());
        let pr = &self.properties;
        kv("\n[properties]", String::new());
        kv("max_principle", pr.max_principle.to_string());
        kv("adjoint", pr.adjoint.to_string());
        kv("contraction", pr.contraction.to_string());
        kv("gradient", pr.gradient.to_string());
        kv("duality", pr.duality.to_string());
        kv("inject_fault", pr.inject_fault.to_string());
        out.replace(" = \n", "\n")
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn mode_name(mode: DegeneracyMode) -> &'static str {
    match mode {
        DegeneracyMode::StrongDegenerate => "strong-degenerate",
        DegeneracyMode::WeakDegenerate => "weak-degenerate",
        DegeneracyMode::UniformlyElliptic => "uniformly-elliptic",
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "problem",
        &[
            "l",
            "T",
            "M",
            "K",
            "coefficient",
            "coefficient_alpha",
            "coefficient_beta",
            "coefficient_value",
            "mode",
            "initial",
            "initial_value",
            "profile",
            "profile_value",
            "profile_base",
            "profile_height",
            "profile_width",
            "profile_left",
            "profile_right",
        ],
    ),
    (
        "inversion",
        &[
            "functional",
            "N",
            "sigma",
            "alpha",
            "beta",
            "q0",
            "pin",
            "grad_tol",
            "rel_grad_tol",
            "max_iter",
            "metric",
            "smoothing",
            "mass",
            "lambda",
            "fp_tol",
        ],
    ),
    ("noise", &["delta", "seed"]),
    ("output", &["directory", "formats"]),
    ("study", &["deltas", "coupling", "baseline", "stability_N", "stability_deltas", "sweep_N", "sweep_delta"]),
    ("properties", &["max_principle", "adjoint", "contraction", "gradient", "duality", "inject_fault"]),
];

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn error(&mut self, line: usize, message: String) {
        self.errors.push(ConfigError { line, message });
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        let e = self.entries.get_mut(&(section.to_owned(), key.to_owned()))?;
        e.used = true;
        Some((e.line, e.value.clone()))
    }

    fn parsed<T>(
        &mut self,
        section: &str,
        key: &str,
        what: &str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Option<(usize, T)> {
        let (line, v) = self.raw(section, key)?;
        match parse(&v) {
            Some(x) => Some((line, x)),
            None => {
                self.error(line, format!("{key}: expected {what}, got `{v}`"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str) -> Option<(usize, f64)> {
        self.parsed(section, key, "a finite number", |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    /// Float with a constraint; falls back to `default` on any error.
    fn float_where(&mut self, section: &str, key: &str, default: f64, rule: &str, ok: impl Fn(f64) -> bool) -> f64 {
        match self.float(section, key) {
            Some((line, x)) if !ok(x) => {
                self.error(line, format!("{key} = {x} violates {rule}"));
                default
            }
            Some((_, x)) => x,
            None => default,
        }
    }

    fn positive(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.float_where(section, key, default, "must be > 0", |x| x > 0.0)
    }

    fn count(&mut self, section: &str, key: &str, default: usize, min: usize) -> usize {
        match self.parsed(section, key, "a non-negative integer", |v| v.parse::<usize>().ok()) {
            Some((line, x)) if x < min => {
                self.error(line, format!("{key} = {x} violates must be >= {min}"));
                default
            }
            Some((_, x)) => x,
            None => default,
        }
    }

    fn flag(&mut self, section: &str, key: &str, default: bool) -> bool {
        self.parsed(section, key, "true or false", |v| v.parse::<bool>().ok()).map_or(default, |p| p.1)
    }

    fn list(&mut self, section: &str, key: &str, default: &[f64], rule: &str, ok: impl Fn(f64) -> bool) -> Vec<f64> {
        let parsed = self.parsed(section, key, "a comma-separated list of numbers", |v| {
            let xs: Option<Vec<f64>> =
                v.split(',').map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite())).collect();
            xs.filter(|x| !x.is_empty())
        });
        match parsed {
            Some((line, xs)) if !xs.iter().all(|&x| ok(x)) => {
                self.error(line, format!("{key}: every entry {rule}"));
                default.to_vec()
            }
            Some((_, xs)) => xs,
            None => default.to_vec(),
        }
    }

    /// Catalog name lookup; `None` when absent or unresolvable.
    fn choice<'a>(&mut self, section: &str, key: &str, names: &[&'a str]) -> Option<(usize, &'a str)> {
        let (line, v) = self.raw(section, key)?;
        match names.iter().find(|n| **n == v) {
            Some(n) => Some((line, *n)),
            None => {
                self.error(line, format!("{key}: unknown name `{v}`, expected one of {}", names.join(", ")));
                None
            }
        }
    }

    /// Parameter keys given for a catalog entry that does not take them.
    fn reject_unused(&mut self, section: &str, keys: &[&str], entry: &str) {
        for key in keys {
            if let Some((line, _)) = self.raw(section, key) {
                self.error(line, format!("{key} does not apply to {entry}"));
            }
        }
    }
}

fn tokenize(text: &str) -> Reader {
    let mut r = Reader { entries: BTreeMap::new(), errors: Vec::new() };
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if KEYS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_owned());
            } else {
                r.error(line, format!("unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            r.error(line, format!("expected `key = value`, got `{content}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            r.error(line, format!("key {key} outside a known section"));
            continue;
        };
        let known = KEYS.iter().find(|(s, _)| *s == sec).is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            r.error(line, format!("unknown key {key} in [{sec}]"));
            continue;
        }
        let slot = (sec, key.to_owned());
        if let Some(prev) = r.entries.get(&slot) {
            let first = prev.line;
            r.error(line, format!("duplicate key {key} (first set on line {first})"));
            continue;
        }
        r.entries.insert(slot, Entry { line, value: value.to_owned(), used: false });
    }
    r
}

fn parse_problem(r: &mut Reader, d: &ProblemConfig) -> ProblemConfig {
    const S: &str = "problem";
    let l = r.positive(S, "l", d.l);
    let t = r.positive(S, "T", d.t);
    let m = r.count(S, "M", d.m, 2);
    let k = r.count(S, "K", d.k, 1);

    let coefficient = match r.choice(S, "coefficient", &["quadratic", "power", "constant"]).map(|c| c.1) {
        Some("power") => {
            let alpha = r.positive(S, "coefficient_alpha", 1.0);
            let beta = r.positive(S, "coefficient_beta", 1.0);
            r.reject_unused(S, &["coefficient_value"], "coefficient power");
            Coefficient::Power { alpha, beta }
        }
        Some("constant") => {
            let value = r.positive(S, "coefficient_value", 1.0);
            r.reject_unused(S, &["coefficient_alpha", "coefficient_beta"], "coefficient constant");
            Coefficient::Constant { value }
        }
        other => {
            let name = other.unwrap_or("quadratic");
            r.reject_unused(
                S,
                &["coefficient_alpha", "coefficient_beta", "coefficient_value"],
                &format!("coefficient {name}"),
            );
            if other.is_some() {
                Coefficient::Quadratic
            } else {
                d.coefficient
            }
        }
    };
    let mode = match r.choice(S, "mode", &["strong-degenerate", "weak-degenerate", "uniformly-elliptic"]).map(|c| c.1) {
        Some("strong-degenerate") => Some(DegeneracyMode::StrongDegenerate),
        Some("weak-degenerate") => Some(DegeneracyMode::WeakDegenerate),
        Some(_) => Some(DegeneracyMode::UniformlyElliptic),
        None => d.mode,
    };
    let initial = match r.choice(S, "initial", &["constant", "sine"]).map(|c| c.1) {
        Some("sine") => {
            r.reject_unused(S, &["initial_value"], "initial sine");
            InitialDatum::Sine
        }
        Some(_) => {
            InitialDatum::Constant { value: r.float_where(S, "initial_value", 1.0, "must be >= 0", |x| x >= 0.0) }
        }
        None => match r.float(S, "initial_value") {
            Some((line, v)) if v < 0.0 => {
                r.error(line, format!("initial_value = {v} violates must be >= 0"));
                d.initial
            }
            Some((_, value)) => InitialDatum::Constant { value },
            None => d.initial,
        },
    };
    let all = ["profile_value", "profile_base", "profile_height", "profile_width", "profile_left", "profile_right"];
    let unused = |keep: &[&str]| -> Vec<&str> { all.iter().copied().filter(|k| !keep.contains(k)).collect() };
    let profile = match r.choice(S, "profile", &["constant", "bump", "ramp", "parabola"]).map(|c| c.1) {
        Some("constant") => {
            r.reject_unused(S, &unused(&["profile_value"]), "profile constant");
            Profile::Constant { value: r.positive(S, "profile_value", 1.0) }
        }
        Some("ramp") => {
            r.reject_unused(S, &unused(&["profile_left", "profile_right"]), "profile ramp");
            Profile::Ramp { left: r.positive(S, "profile_left", 1.0), right: r.positive(S, "profile_right", 1.5) }
        }
        Some("parabola") => {
            r.reject_unused(S, &unused(&["profile_base", "profile_height"]), "profile parabola");
            Profile::Parabola {
                base: r.positive(S, "profile_base", 1.0),
                height: r.float(S, "profile_height").map_or(0.3, |p| p.1),
            }
        }
        Some(_) => {
            r.reject_unused(S, &unused(&["profile_base", "profile_height", "profile_width"]), "profile bump");
            let Profile::Bump { base, height, width } = Profile::standard_bump() else { unreachable!() };
            Profile::Bump {
                base: r.positive(S, "profile_base", base),
                height: r.float(S, "profile_height").map_or(height, |p| p.1),
                width: r.positive(S, "profile_width", width),
            }
        }
        None => {
            r.reject_unused(S, &all, "the default profile (set `profile` first)");
            d.profile
        }
    };
    ProblemConfig { l, t, m, k, coefficient, mode, initial, profile }
}

fn parse_inversion(r: &mut Reader, d: &InversionConfig) -> InversionConfig {
    const S: &str = "inversion";
    let functional = match r.choice(S, "functional", &["terminal", "windowed"]).map(|c| c.1) {
        Some("windowed") => FunctionalChoice::Windowed,
        Some(_) => FunctionalChoice::Terminal,
        None => d.functional,
    };
    let n = r.float_where(S, "N", d.n, "must be >= 0", |x| x >= 0.0);
    let sigma = r.float(S, "sigma").and_then(|(line, s)| {
        if s > 0.0 {
            Some(s)
        } else {
            r.error(line, format!("sigma = {s} violates must be > 0"));
            None
        }
    });
    let alpha = r.positive(S, "alpha", d.alpha);
    let beta = r.positive(S, "beta", d.beta);
    if alpha > beta {
        let line = r.entries.get(&(S.to_owned(), "beta".to_owned())).map_or(0, |e| e.line);
        r.error(line, format!("beta = {beta} violates must be >= alpha = {alpha}"));
    }
    let q0 = r.positive(S, "q0", d.q0);
    let pin = r.flag(S, "pin", d.pin);
    let grad_tol = r.float(S, "grad_tol").and_then(|(line, g)| {
        if g >= 0.0 {
            Some(g)
        } else {
            r.error(line, format!("grad_tol = {g} violates must be >= 0"));
            None
        }
    });
    let rel_grad_tol = r.float(S, "rel_grad_tol").and_then(|(line, g)| {
        if g >= 0.0 {
            Some(g)
        } else {
            r.error(line, format!("rel_grad_tol = {g} violates must be >= 0"));
            None
        }
    });
    let max_iter = r.count(S, "max_iter", d.max_iter, 0);
    let metric = match r.choice(S, "metric", &["l2", "sobolev", "regularized", "adaptive"]).map(|c| c.1) {
        Some("l2") => {
            r.reject_unused(S, &["smoothing", "mass"], "metric l2");
            GradientMetric::L2
        }
        Some("sobolev") => {
            r.reject_unused(S, &["mass"], "metric sobolev");
            GradientMetric::Sobolev { smoothing: r.float_where(S, "smoothing", 1e-2, "must be >= 0", |x| x >= 0.0) }
        }
        Some("regularized") => {
            r.reject_unused(S, &["smoothing"], "metric regularized");
            GradientMetric::Regularized { mass: r.positive(S, "mass", 1.0) }
        }
        other => {
            r.reject_unused(S, &["smoothing", "mass"], "metric adaptive");
            if other.is_some() {
                GradientMetric::Adaptive
            } else {
                d.metric
            }
        }
    };
    let lambda = r.positive(S, "lambda", d.lambda);
    let fp_tol = r.float_where(S, "fp_tol", d.fp_tol, "must be >= 0", |x| x >= 0.0);
    InversionConfig {
        functional,
        n,
        sigma,
        alpha,
        beta,
        q0,
        pin,
        grad_tol,
        rel_grad_tol,
        max_iter,
        metric,
        lambda,
        fp_tol,
    }
}

/// Parses and validates `text`, reporting every error with its line.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let d = RunConfig::default();
    let mut r = tokenize(text);
    let problem = parse_problem(&mut r, &d.problem);
    let inversion = parse_inversion(&mut r, &d.inversion);

    let noise = NoiseConfig {
        delta: r.float_where("noise", "delta", d.noise.delta, "must be >= 0", |x| x >= 0.0),
        seed: r
            .parsed("noise", "seed", "a non-negative integer", |v| v.parse::<u64>().ok())
            .map_or(d.noise.seed, |p| p.1),
    };

    let directory = match r.raw("output", "directory") {
        Some((line, v)) if v.is_empty() => {
            r.error(line, "directory must not be empty".into());
            d.output.directory.clone()
        }
        Some((_, v)) => v,
        None => d.output.directory.clone(),
    };
    let (mut csv, mut json) = (d.output.csv, d.output.json);
    if let Some((line, v)) = r.raw("output", "formats") {
        csv = false;
        json = false;
        for f in v.split(',').map(str::trim) {
            match f {
                "csv" => csv = true,
                "json" => json = true,
                "" => {}
                other => r.error(line, format!("formats: unknown name `{other}`, expected csv, json")),
            }
        }
    }
    let output = OutputConfig { directory, csv, json };

    let ds = &d.study;
    let deltas = r.list("study", "deltas", &ds.deltas, "must be > 0", |x| x > 0.0);
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        let line = r.entries.get(&("study".to_owned(), "deltas".to_owned())).map_or(0, |e| e.line);
        r.error(line, "deltas must be strictly decreasing".into());
    }
    let study = StudyConfig {
        deltas,
        coupling: r.positive("study", "coupling", ds.coupling),
        baseline: r.flag("study", "baseline", ds.baseline),
        stability_n: r.positive("study", "stability_N", ds.stability_n),
        stability_deltas: r.list("study", "stability_deltas", &ds.stability_deltas, "must be >= 0", |x| x >= 0.0),
        sweep_n: r.list("study", "sweep_N", &ds.sweep_n, "must be > 0", |x| x > 0.0),
        sweep_delta: r.float_where("study", "sweep_delta", ds.sweep_delta, "must be >= 0", |x| x >= 0.0),
    };

    let dp = &d.properties;
    let properties = PropertiesConfig {
        max_principle: r.count("properties", "max_principle", dp.max_principle, 0),
        adjoint: r.count("properties", "adjoint", dp.adjoint, 0),
        contraction: r.count("properties", "contraction", dp.contraction, 0),
        gradient: r.count("properties", "gradient", dp.gradient, 0),
        duality: r.count("properties", "duality", dp.duality, 0),
        inject_fault: r.flag("properties", "inject_fault", dp.inject_fault),
    };

    let config = RunConfig { problem, inversion, noise, output, study, properties };
    if let Some((line, s)) = config
        .inversion
        .sigma
        .map(|s| (r.entries.get(&("inversion".to_owned(), "sigma".to_owned())).map_or(0, |e| e.line), s))
    {
        if s > config.problem.t {
            r.error(line, format!("sigma = {s} violates must be <= T = {}", config.problem.t));
        }
    }
    let unused: Vec<(usize, String)> =
        r.entries.iter().filter(|(_, e)| !e.used).map(|((_, k), e)| (e.line, k.clone())).collect();
    for (line, key) in unused {
        r.error(line, format!("{key} is not read by this configuration"));
    }
    if r.errors.is_empty() {
        Ok(config)
    } else {
        r.errors.sort_by_key(|e| e.line);
        Err(ConfigErrors(r.errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("[problem]\nM = 20\nK = 50\n").unwrap();
        assert_eq!(c.problem.m, 20);
        assert_eq!(c.inversion.n, 1e-6);
        assert_eq!(c.noise.seed, 0);
        assert_eq!(c.inversion.sigma, None);
        assert_eq!(c.sigma(), 4.0 * 1.0 / 50.0);
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn negative_cells_names_key() {
        let e = parse_config("[problem]\nM = -3\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].line, 2);
        assert!(e.0[0].message.contains('M'), "{}", e.0[0].message);
    }

    #[test]
    fn all_errors_reported_with_lines() {
        let text = "[problem]\nM = 0\ncoefficient = cubic\nbogus = 1\n[inversion]\nN = -1\nalpha = x\n[nowhere]\n";
        let e = parse_config(text).unwrap_err();
        let lines: Vec<usize> = e.0.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 6, 7, 8]);
        assert!(e.0[1].message.contains("cubic"));
        assert!(e.to_string().contains("line 4: unknown key bogus"));
    }

    #[test]
    fn parameters_must_match_catalog_entry() {
        let e = parse_config("[problem]\nprofile = ramp\nprofile_width = 3\n").unwrap_err();
        assert_eq!(e.0[0].line, 3);
        let c =
            parse_config("[problem]\ncoefficient = power\ncoefficient_alpha = 0.5\ncoefficient_beta = 0.5\n").unwrap();
        assert_eq!(c.problem.coefficient, Coefficient::Power { alpha: 0.5, beta: 0.5 });
        assert_eq!(c.mode(), DegeneracyMode::WeakDegenerate);
    }

    #[test]
    fn duplicate_and_orphan_keys() {
        let e = parse_config("M = 3\n[problem]\nM = 4\nM = 5\n").unwrap_err();
        assert_eq!(e.0.iter().map(|e| e.line).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn default_round_trip() {
        let d = RunConfig::default();
        assert_eq!(parse_config(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn custom_round_trip() {
        let text = "[problem]\nl = 2\nT = 0.5\nM = 64\nK = 300\ncoefficient = power\ncoefficient_alpha = 1.5\ncoefficient_beta = 2\nmode = strong-degenerate\ninitial = sine\nprofile = parabola\nprofile_height = 0.2\n[inversion]\nfunctional = windowed\nsigma = 0.01\nN = 0.001\npin = true\nmetric = sobolev\nsmoothing = 0.05\ngrad_tol = 1e-9\n[noise]\ndelta = 0.01\nseed = 17\n[output]\ndirectory = results/a\nformats = csv\n[study]\ndeltas = 0.2, 0.02\nsweep_N = 0.1, 0.01\n[properties]\ninject_fault = true\nmax_principle = 7\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.problem.initial, InitialDatum::Sine);
        assert_eq!(c.inversion.metric, GradientMetric::Sobolev { smoothing: 0.05 });
        assert!(!c.output.json);
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }
}
