//! Experiment configuration: a TOML file with `[problem]`, `[solver]`,
//! `[verification]` and `[output]` sections. Loading collects every
//! violation (unknown keys, malformed values, out-of-range numbers and the
//! structural hypotheses on `f`, `p` and `k`) before reporting.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use blowup_core::geometry::Domain;
use blowup_core::karamata::{index_gate, AbsorptionWeight, WeightKernel};
use blowup_core::nonlinearity::{check_conditions, ConditionOptions, Nonlinearity};
use blowup_core::parabolic::DEFAULT_WINDOW;
use blowup_core::rates::PDE_TOLERANCE;
use toml_edit::{Document, Item, Table, Value};

use crate::error::CliError;

/// One problem with the configuration, with the line it comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

/// Verification checks that can be enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    EllipticRate,
    BoundaryRate,
    InitialRate,
    Sandwich,
    Uniqueness,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::EllipticRate, Check::BoundaryRate, Check::InitialRate, Check::Sandwich, Check::Uniqueness];

    pub fn key(self) -> &'static str {
        match self {
            Check::EllipticRate => "elliptic_rate",
            Check::BoundaryRate => "boundary_rate",
            Check::InitialRate => "initial_rate",
            Check::Sandwich => "sandwich",
            Check::Uniqueness => "uniqueness",
        }
    }

    fn parse(key: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.key() == key)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub domain_key: String,
    pub domain: Domain,
    pub p: f64,
    pub f_key: String,
    pub nl: Nonlinearity,
    pub k_key: String,
    pub kernel: WeightKernel,
    /// Constant `β` in `b = β k^p(d)`.
    pub beta: f64,
    pub horizon: f64,
    pub t_star: f64,
}

impl ProblemConfig {
    pub fn weight(&self) -> AbsorptionWeight {
        AbsorptionWeight::constant(self.kernel.clone(), self.beta).expect("beta validated at load")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cells: usize,
    pub grading: f64,
    pub elliptic_cells: usize,
    /// Cap ladder `cap_start · 2^j`, `j < cap_count`.
    pub cap_start: f64,
    pub cap_count: usize,
    /// Decreasing shrink ladder for the maximal solution.
    pub eps: Vec<f64>,
    /// Agreement between consecutive `ε` rungs; the last rung is used when
    /// absent.
    pub eps_tol: Option<f64>,
    pub steps: usize,
    pub time_grading: f64,
    /// Combine runs with `steps` and `2 steps` to cancel the first-order
    /// time error.
    pub time_richardson: bool,
    pub stabilization_tol: f64,
    pub d_min: f64,
    pub t_min: f64,
    pub newton_tol: f64,
}

impl SolverConfig {
    pub fn cap_ladder(&self) -> Vec<f64> {
        (0..self.cap_count).map(|j| self.cap_start * 2f64.powi(j as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationConfig {
    pub checks: BTreeSet<Check>,
    pub tolerance: f64,
    /// Times at which boundary rates are measured.
    pub t0: Vec<f64>,
    /// Boundary distance of the point used for the initial rate.
    pub x0_distance: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub d_end: f64,
    pub gap_tolerance: f64,
    /// Region `d ≥ gap_d_min`, `t ≥ gap_t_min` on which the gap is measured.
    pub gap_d_min: f64,
    pub gap_t_min: f64,
    pub sandwich_bounds: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub verification: VerificationConfig,
    pub out_dir: Option<PathBuf>,
}

const SECTIONS: [(&str, &[&str]); 4] = [
    ("problem", &["domain", "p", "f", "k", "beta", "T", "t_star"]),
    (
        "solver",
        &[
            "cells",
            "grading",
            "elliptic_cells",
            "cap_start",
            "cap_count",
            "eps",
            "eps_tol",
            "steps",
            "time_grading",
            "time_richardson",
            "stabilization_tol",
            "d_min",
            "t_min",
            "newton_tol",
        ],
    ),
    (
        "verification",
        &["checks", "tolerance", "t0", "x0", "t_start", "t_end", "d_end", "gap_tolerance", "gap_d_min", "gap_t_min", "sandwich_bounds"],
    ),
    ("output", &["dir"]),
];

/// Time steps needed before `t_min` for capped solutions to converge there.
pub const MIN_STEPS_BEFORE_T_MIN: f64 = 16.0;

struct Reader<'a> {
    src: &'a str,
    root: &'a Table,
    violations: Vec<Violation>,
}

impl<'a> Reader<'a> {
    fn line_of(&self, span: Option<Range<usize>>) -> Option<usize> {
        span.map(|s| self.src[..s.start.min(self.src.len())].matches('\n').count() + 1)
    }

    fn push(&mut self, line: Option<usize>, key: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { line, key: key.into(), message: message.into() });
    }

    fn section(&self, name: &str) -> Option<&'a Table> {
        self.root.get(name).and_then(Item::as_table)
    }

    fn value(&mut self, section: &str, key: &str) -> Option<(&'a Value, Option<usize>)> {
        let table = self.section(section)?;
        let item = table.get(key)?;
        let line = self.line_of(table.key(key).and_then(|k| k.span()).or_else(|| item.span()));
        match item.as_value() {
            Some(v) => Some((v, line)),
            None => {
                self.push(line, format!("{section}.{key}"), "expected a value, found a table");
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64) -> (f64, Option<usize>) {
        match self.value(section, key) {
            None => (default, None),
            Some((v, line)) => match number(v) {
                Some(x) => (x, line),
                None => {
                    self.push(line, format!("{section}.{key}"), format!("malformed number '{}'", v.to_string().trim()));
                    (default, line)
                }
            },
        }
    }

    fn count(&mut self, section: &str, key: &str, default: usize) -> (usize, Option<usize>) {
        match self.value(section, key) {
            None => (default, None),
            Some((v, line)) => match v.as_integer() {
                Some(n) if n >= 0 => (n as usize, line),
                _ => {
                    self.push(line, format!("{section}.{key}"), format!("expected a nonnegative integer, got '{}'", v.to_string().trim()));
                    (default, line)
                }
            },
        }
    }

    fn string(&mut self, section: &str, key: &str, default: &str) -> (String, Option<usize>) {
        match self.value(section, key) {
            None => (default.to_string(), None),
            Some((v, line)) => match v.as_str() {
                Some(s) => (s.to_string(), line),
                None => {
                    self.push(line, format!("{section}.{key}"), "expected a string");
                    (default.to_string(), line)
                }
            },
        }
    }

    fn boolean(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.value(section, key) {
            None => default,
            Some((v, line)) => v.as_bool().unwrap_or_else(|| {
                self.push(line, format!("{section}.{key}"), "expected true or false");
                default
            }),
        }
    }

    fn floats(&mut self, section: &str, key: &str, default: &[f64]) -> (Vec<f64>, Option<usize>) {
        match self.value(section, key) {
            None => (default.to_vec(), None),
            Some((v, line)) => {
                let parsed: Option<Vec<f64>> = v.as_array().and_then(|a| a.iter().map(number).collect());
                match parsed {
                    Some(xs) => (xs, line),
                    None => {
                        self.push(line, format!("{section}.{key}"), "expected an array of numbers");
                        (default.to_vec(), line)
                    }
                }
            }
        }
    }

    fn strings(&mut self, section: &str, key: &str, default: &[&str]) -> (Vec<String>, Option<usize>) {
        match self.value(section, key) {
            None => (default.iter().map(|s| s.to_string()).collect(), None),
            Some((v, line)) => {
                let parsed: Option<Vec<String>> =
                    v.as_array().and_then(|a| a.iter().map(|x| x.as_str().map(str::to_string)).collect());
                match parsed {
                    Some(xs) => (xs, line),
                    None => {
                        self.push(line, format!("{section}.{key}"), "expected an array of strings");
                        (vec![], line)
                    }
                }
            }
        }
    }

    fn unknown_keys(&mut self) {
        let mut found = Vec::new();
        for (name, item) in self.root.iter() {
            let line = self.line_of(self.root.key(name).and_then(|k| k.span()).or_else(|| item.span()));
            if name == "name" {
                if item.as_str().is_none() {
                    found.push((line, name.to_string(), "expected a string".to_string()));
                }
                continue;
            }
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                found.push((line, name.to_string(), "unknown section or key".to_string()));
                continue;
            };
            let Some(table) = item.as_table() else {
                found.push((line, name.to_string(), "expected a section".to_string()));
                continue;
            };
            for (key, inner) in table.iter() {
                if !keys.contains(&key) {
                    let line = self.line_of(table.key(key).and_then(|k| k.span()).or_else(|| inner.span()));
                    found.push((line, format!("{name}.{key}"), "unknown key".to_string()));
                }
            }
        }
        for (line, key, message) in found {
            self.push(line, key, message);
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    let default_name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    parse_config(&src, default_name)
}

/// Validate configuration text; `default_name` is used when the file has no
/// `name` key.
pub fn parse_config(src: &str, default_name: &str) -> Result<ExperimentConfig, CliError> {
    let doc = Document::parse(src.to_string()).map_err(|e| {
        let line = e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
        CliError::Config(vec![Violation { line, key: "syntax".into(), message: e.message().trim().to_string() }])
    })?;
    let mut r = Reader { src, root: doc.as_table(), violations: Vec::new() };
    r.unknown_keys();
    let name = r.root.get("name").and_then(Item::as_str).unwrap_or(default_name).to_string();

    // [problem]
    let (domain_key, dl) = r.string("problem", "domain", "interval(0,1)");
    let domain = Domain::parse(&domain_key).map_err(|e| r.push(dl, "problem.domain", e.to_string())).ok();
    let (p, pl) = r.float("problem", "p", 2.0);
    if !(p > 1.0 && p <= 10.0) {
        r.push(pl, "problem.p", format!("p must lie in (1, 10], got {p}"));
    }
    let (f_key, fl) = r.string("problem", "f", "power(2)");
    let nl = Nonlinearity::parse(&f_key).map_err(|e| r.push(fl, "problem.f", e.to_string())).ok();
    let (k_key, kl) = r.string("problem", "k", "const");
    let kernel = domain.as_ref().and_then(|d| WeightKernel::parse(&k_key, d).map_err(|e| r.push(kl, "problem.k", e.to_string())).ok());
    let (beta, bl) = r.float("problem", "beta", 1.0);
    if !(beta > 0.0) || !beta.is_finite() {
        r.push(bl, "problem.beta", format!("beta must be positive and finite, got {beta}"));
    }
    let (horizon, hl) = r.float("problem", "T", 1.0);
    if !(horizon > 0.0) || !horizon.is_finite() {
        r.push(hl, "problem.T", format!("T must be positive and finite, got {horizon}"));
    }
    let (t_star, tl) = r.float("problem", "t_star", DEFAULT_WINDOW * horizon);
    if !(t_star > 0.0) || t_star > DEFAULT_WINDOW * horizon * (1.0 + 1e-12) {
        r.push(tl, "problem.t_star", format!("t_star must lie in (0, {}], got {t_star}", DEFAULT_WINDOW * horizon));
    }
    if let (Some(nl), Some(kernel)) = (&nl, &kernel) {
        if p > 1.0 {
            hypotheses(&mut r, nl, kernel, p, fl.or(pl));
        }
    }

    // [solver]
    let inradius = domain.as_ref().map_or(f64::NAN, Domain::inradius);
    let (cells, cl) = r.count("solver", "cells", 400);
    if cells < 16 {
        r.push(cl, "solver.cells", format!("need at least 16 cells, got {cells}"));
    }
    let (grading, gl) = r.float("solver", "grading", 3.0);
    if !(1.0..=6.0).contains(&grading) {
        r.push(gl, "solver.grading", format!("grading must lie in [1, 6], got {grading}"));
    }
    let (elliptic_cells, el) = r.count("solver", "elliptic_cells", 2000);
    if elliptic_cells < 16 {
        r.push(el, "solver.elliptic_cells", format!("need at least 16 cells, got {elliptic_cells}"));
    }
    let (cap_start, csl) = r.float("solver", "cap_start", 10.0);
    if !(cap_start > 0.0) || !cap_start.is_finite() {
        r.push(csl, "solver.cap_start", format!("first cap must be positive, got {cap_start}"));
    }
    let (cap_count, ccl) = r.count("solver", "cap_count", 80);
    if !(2..=200).contains(&cap_count) {
        r.push(ccl, "solver.cap_count", format!("cap ladder length must lie in [2, 200], got {cap_count}"));
    }
    let (eps, epl) = r.floats("solver", "eps", &[2e-3]);
    if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|&e| !(e > 0.0 && e < 0.25 * inradius)) {
        r.push(epl, "solver.eps", format!("shrink ladder must be strictly decreasing in (0, inradius/4), got {eps:?}"));
    }
    let (eps_tol_raw, etl) = r.float("solver", "eps_tol", f64::NAN);
    let eps_tol = if eps_tol_raw.is_nan() { None } else { Some(eps_tol_raw) };
    if eps_tol.is_some_and(|t| !(t > 0.0)) {
        r.push(etl, "solver.eps_tol", format!("must be positive, got {eps_tol_raw}"));
    }
    let (steps, sl) = r.count("solver", "steps", 1000);
    if steps < 20 {
        r.push(sl, "solver.steps", format!("need at least 20 time steps, got {steps}"));
    }
    let (time_grading, tgl) = r.float("solver", "time_grading", 2.0);
    if !(1.0..=4.0).contains(&time_grading) {
        r.push(tgl, "solver.time_grading", format!("time grading must lie in [1, 4], got {time_grading}"));
    }
    let time_richardson = r.boolean("solver", "time_richardson", true);
    let (stabilization_tol, stl) = r.float("solver", "stabilization_tol", 1e-4);
    if !(stabilization_tol > 0.0 && stabilization_tol < 1.0) {
        r.push(stl, "solver.stabilization_tol", format!("must lie in (0, 1), got {stabilization_tol}"));
    }
    let (d_min, dml) = r.float("solver", "d_min", 0.1 * inradius);
    if !(d_min > 0.0 && d_min < inradius) {
        r.push(dml, "solver.d_min", format!("must lie in (0, inradius), got {d_min}"));
    }
    let (t_min, tml) = r.float("solver", "t_min", 0.01 * t_star);
    if !(t_min > 0.0 && t_min < t_star) {
        r.push(tml, "solver.t_min", format!("must lie in (0, t_star), got {t_min}"));
    }
    // level j of a backward-Euler run from cap n scales like n^(2^-j), so the
    // cap ladder settles only after a few dozen steps
    let before = steps as f64 * (t_min / t_star).max(0.0).powf(1.0 / time_grading);
    if t_min > 0.0 && t_star > 0.0 && before < MIN_STEPS_BEFORE_T_MIN {
        r.push(
            tml,
            "solver.t_min",
            format!("only {before:.1} time steps precede t_min; the cap ladder needs at least {MIN_STEPS_BEFORE_T_MIN}"),
        );
    }
    let (newton_tol, nl_line) = r.float("solver", "newton_tol", 1e-10);
    if !(newton_tol > 0.0 && newton_tol < 1e-4) {
        r.push(nl_line, "solver.newton_tol", format!("must lie in (0, 1e-4), got {newton_tol}"));
    }

    // [verification]
    let defaults: Vec<&str> = Check::ALL.iter().map(|c| c.key()).collect();
    let (names, chl) = r.strings("verification", "checks", &defaults);
    let mut checks = BTreeSet::new();
    for n in &names {
        match Check::parse(n) {
            Some(c) => {
                checks.insert(c);
            }
            None => r.push(chl, "verification.checks", format!("unknown check '{n}' (known: {})", defaults.join(", "))),
        }
    }
    let (tolerance, tol_l) = r.float("verification", "tolerance", PDE_TOLERANCE);
    if !(tolerance > 0.0 && tolerance < 1.0) {
        r.push(tol_l, "verification.tolerance", format!("must lie in (0, 1), got {tolerance}"));
    }
    let (t0, t0l) = r.floats("verification", "t0", &[0.2 * t_star, 0.4 * t_star]);
    if t0.is_empty() || t0.iter().any(|&t| !(t > 0.0 && t <= t_star * (1.0 + 1e-12))) {
        r.push(t0l, "verification.t0", format!("times must lie in (0, t_star], got {t0:?}"));
    }
    let (x0_distance, xl) = r.float("verification", "x0", inradius);
    if !(x0_distance >= 0.25 * inradius && x0_distance <= inradius) {
        r.push(xl, "verification.x0", format!("boundary distance of x0 must lie in [inradius/4, inradius], got {x0_distance}"));
    }
    let (t_start, tsl) = r.float("verification", "t_start", 0.2 * t_star);
    let (t_end, tel) = r.float("verification", "t_end", 1e-3);
    if !(t_start > 0.0 && t_start <= t_star) {
        r.push(tsl, "verification.t_start", format!("must lie in (0, t_star], got {t_start}"));
    }
    if !(t_end > 0.0 && t_end * 4.0 <= t_start) {
        r.push(tel, "verification.t_end", format!("must be positive and at most t_start/4, got {t_end}"));
    }
    let (d_end, del) = r.float("verification", "d_end", 4e-3 * inradius);
    if !(d_end > 0.0 && d_end < 0.01 * inradius) {
        r.push(del, "verification.d_end", format!("must lie in (0, inradius/100), got {d_end}"));
    }
    let (gap_tolerance, gtl) = r.float("verification", "gap_tolerance", 0.05);
    if !(gap_tolerance > 0.0) {
        r.push(gtl, "verification.gap_tolerance", format!("must be positive, got {gap_tolerance}"));
    }
    let (gap_d_min, gdl) = r.float("verification", "gap_d_min", 0.2 * inradius);
    if !(gap_d_min > 0.0 && gap_d_min < inradius) {
        r.push(gdl, "verification.gap_d_min", format!("must lie in (0, inradius), got {gap_d_min}"));
    }
    let (gap_t_min, gtml) = r.float("verification", "gap_t_min", 0.2 * t_star);
    if !(gap_t_min > 0.0 && gap_t_min <= t_star) {
        r.push(gtml, "verification.gap_t_min", format!("must lie in (0, t_star], got {gap_t_min}"));
    }
    let (bounds, bdl) = r.floats("verification", "sandwich_bounds", &[1e-3, 1e3]);
    let sandwich_bounds = match bounds.as_slice() {
        [lo, hi] if *lo > 0.0 && lo < hi => (*lo, *hi),
        _ => {
            r.push(bdl, "verification.sandwich_bounds", format!("expected [lo, hi] with 0 < lo < hi, got {bounds:?}"));
            (1e-3, 1e3)
        }
    };

    // [output]
    let (dir, _) = r.string("output", "dir", "");
    let out_dir = if dir.is_empty() { None } else { Some(PathBuf::from(dir)) };

    let mut violations = r.violations;
    violations.sort_by_key(|v| v.line.unwrap_or(usize::MAX));
    if !violations.is_empty() {
        return Err(CliError::Config(violations));
    }
    let (domain, nl, kernel) = (domain.unwrap(), nl.unwrap(), kernel.unwrap());
    Ok(ExperimentConfig {
        name,
        problem: ProblemConfig { domain_key, domain, p, f_key, nl, k_key, kernel, beta, horizon, t_star },
        solver: SolverConfig {
            cells,
            grading,
            elliptic_cells,
            cap_start,
            cap_count,
            eps,
            eps_tol,
            steps,
            time_grading,
            time_richardson,
            stabilization_tol,
            d_min,
            t_min,
            newton_tol,
        },
        verification: VerificationConfig {
            checks,
            tolerance,
            t0,
            x0_distance,
            t_start,
            t_end,
            d_end,
            gap_tolerance,
            gap_d_min,
            gap_t_min,
            sandwich_bounds,
        },
        out_dir,
    })
}

/// The index gate and the structural conditions on `f`, each reported
/// under its own name.
fn hypotheses(r: &mut Reader<'_>, nl: &Nonlinearity, kernel: &WeightKernel, p: f64, line: Option<usize>) {
    let gate = index_gate(p, kernel.ell);
    if !(nl.rho > gate) {
        r.push(
            line,
            "index gate",
            format!(
                "rho > max{{1, p-1, p-1-(p-2)/l}} violated: rho = {}, p = {p}, l = {} gives max = {gate}",
                nl.rho, kernel.ell
            ),
        );
    }
    let report = check_conditions(nl, p, &ConditionOptions::default());
    let named = [
        ("regular variation", &report.f1, "f must be regularly varying with index above p-1"),
        ("monotone ratio", &report.f2, "s^-(p-1) f(s) must be increasing"),
        ("lower scaling", &report.c, "f(u) >= eps^-l f(eps u) must hold with l > max{1, p-1}"),
        ("integrability", &report.f3, "the integral of F^(-1/p) at infinity must be finite"),
    ];
    for (name, flag, what) in named {
        if !flag.passed {
            r.push(line, name, format!("{what} ({})", flag.detail));
        }
    }
}
