//! The solve pipeline behind `run`: elliptic companion, minimal and
//! maximal parabolic solutions, and the enabled rate reports.

use blowup_core::elliptic::{solve_elliptic_blowup, EllipticOptions, EllipticProblem, Stabilization};
use blowup_core::fv::NewtonOptions;
use blowup_core::parabolic::{
    maximal_solution, minimal_solution, ParabolicOptions, ParabolicProblem, SpaceTimeField, SpaceTimeStabilization, TimeGrid,
};
use blowup_core::rates::{
    boundary_rate, elliptic_boundary_rate, envelope_curves, initial_rate, richardson_in_time, sandwich_check, tau_curve,
    uniqueness_gap, BoundaryProfile, RateOptions, RateReport,
};
use blowup_core::Result;

use crate::config::{Check, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Multiplies every pass tolerance.
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tolerance_scale: 1.0 }
    }
}

/// One node of a stored level, with the envelope curves at that point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub field: String,
    pub t: f64,
    pub x: f64,
    pub d: f64,
    pub value: f64,
    pub xi: f64,
    pub xi_star: f64,
    pub tau: f64,
    pub phi_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticRow {
    pub x: f64,
    pub d: f64,
    pub value: f64,
    pub phi_k: f64,
}

/// Everything a run leaves behind, including failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub name: String,
    /// `(key, value)` lines echoed at the top of the summary.
    pub header: Vec<(String, String)>,
    pub reports: Vec<RateReport>,
    pub trajectories: Vec<TrajectoryRow>,
    pub elliptic: Vec<EllipticRow>,
    /// Stage and message of every step that errored.
    pub failures: Vec<String>,
}

impl Artifacts {
    /// No stage failed and every asserted report passed.
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.reports.iter().all(|r| !r.asserted || r.passed)
    }
}

fn record<T>(failures: &mut Vec<String>, stage: &str, r: Result<T>) -> Option<T> {
    r.map_err(|e| failures.push(format!("{stage}: {e}"))).ok()
}

fn time_checkpoints(cfg: &ExperimentConfig) -> Vec<f64> {
    let v = &cfg.verification;
    let mut cps: Vec<f64> = v.t0.clone();
    cps.extend([cfg.problem.t_star, v.gap_t_min]);
    let mut t = v.t_start;
    while t >= v.t_end * (1.0 - 1e-12) {
        cps.push(t);
        t *= 0.5;
    }
    cps.sort_by(f64::total_cmp);
    cps.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    cps
}

fn time_grid(cfg: &ExperimentConfig, steps: usize) -> Result<TimeGrid> {
    let s = &cfg.solver;
    Ok(TimeGrid::graded(cfg.problem.t_star, steps, s.time_grading)?
        .with_checkpoints(&time_checkpoints(cfg))?
        .store_every((steps / 20).max(1), true))
}

fn header(cfg: &ExperimentConfig, opts: &RunOptions) -> Vec<(String, String)> {
    let (p, s, v) = (&cfg.problem, &cfg.solver, &cfg.verification);
    let checks: Vec<&str> = v.checks.iter().map(|c| c.key()).collect();
    vec![
        ("domain".into(), p.domain_key.clone()),
        ("p".into(), p.p.to_string()),
        ("f".into(), p.f_key.clone()),
        ("k".into(), p.k_key.clone()),
        ("beta".into(), p.beta.to_string()),
        ("T".into(), p.horizon.to_string()),
        ("t_star".into(), p.t_star.to_string()),
        ("cells".into(), s.cells.to_string()),
        ("steps".into(), s.steps.to_string()),
        ("eps".into(), format!("{:?}", s.eps)),
        ("checks".into(), if checks.is_empty() { "none".into() } else { checks.join(" ") }),
        ("tolerance_scale".into(), opts.tolerance_scale.to_string()),
    ]
}

/// Run the configured pipeline. Solver errors are recorded in
/// [`Artifacts::failures`] and later stages that need the failed output are
/// skipped.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Artifacts {
    let mut art = Artifacts { name: cfg.name.clone(), header: header(cfg, opts), ..Default::default() };
    let (pc, sc, vc) = (&cfg.problem, &cfg.solver, &cfg.verification);
    let checks = &vc.checks;
    let tolerance = vc.tolerance * opts.tolerance_scale;
    let ropts = RateOptions {
        tolerance,
        d_end: vc.d_end,
        t_start: vc.t_start,
        t_end: vc.t_end,
        ..Default::default()
    };
    let newton = NewtonOptions { tol: sc.newton_tol, ..Default::default() };
    let ladder = sc.cap_ladder();
    let fails = &mut art.failures;

    let profile = record(fails, "profile", BoundaryProfile::new(&pc.nl, pc.p, &pc.kernel));

    if checks.contains(&Check::EllipticRate) {
        let eopts = EllipticOptions { n_cells: sc.elliptic_cells, grading: sc.grading, newton, ..Default::default() };
        let stab = Stabilization { tol: sc.stabilization_tol, d_min: sc.d_min };
        let sol = record(
            fails,
            "elliptic",
            EllipticProblem::new(pc.domain, pc.p, pc.nl.clone(), pc.weight())
                .and_then(|prob| Ok((solve_elliptic_blowup(&prob, &ladder, &eopts, &stab)?, prob))),
        );
        if let Some((sol, prob)) = sol {
            if let Some(rep) = record(fails, "elliptic_rate", elliptic_boundary_rate(&sol.field, &prob, &ropts)) {
                art.reports.push(rep);
            }
            let line = &sol.field.line;
            for i in 0..line.boundary_index() {
                let d = line.d[i];
                let phi_k = profile.as_ref().and_then(|bp| bp.eval(d).ok()).unwrap_or(f64::NAN);
                art.elliptic.push(EllipticRow { x: pc.domain.coordinate_at_distance(d), d, value: sol.field.values[i], phi_k });
            }
        }
    }

    let Some(prob) = record(
        fails,
        "problem",
        ParabolicProblem::new(pc.domain, pc.p, pc.nl.clone(), pc.weight(), pc.horizon).and_then(|p| p.with_window(pc.t_star, false)),
    ) else {
        return art;
    };
    let popts = ParabolicOptions { n_cells: sc.cells, grading: sc.grading, newton, ..Default::default() };
    let stab = SpaceTimeStabilization { tol: sc.stabilization_tol, d_min: sc.d_min, t_min: sc.t_min };
    let Some(grid) = record(fails, "time grid", time_grid(cfg, sc.steps)) else { return art };
    let Some(low) = record(fails, "minimal solution", minimal_solution(&prob, &ladder, &grid, &popts, &stab)) else {
        return art;
    };
    let wants_rates = checks.contains(&Check::InitialRate) || checks.contains(&Check::BoundaryRate);
    let fine = if sc.time_richardson && wants_rates {
        record(
            fails,
            "minimal solution (2 steps)",
            time_grid(cfg, 2 * sc.steps).and_then(|g| minimal_solution(&prob, &ladder, &g, &popts, &stab)),
        )
    } else {
        None
    };
    let fine_field: &SpaceTimeField = fine.as_ref().map_or(&low.field, |f| &f.field);

    if checks.contains(&Check::BoundaryRate) {
        for &t0 in &vc.t0 {
            if let Some(rep) = record(fails, "boundary_rate", boundary_rate(fine_field, t0, &prob, &ropts)) {
                art.reports.push(rep);
            }
        }
    }
    if checks.contains(&Check::InitialRate) {
        let field = match &fine {
            Some(f) => record(fails, "time extrapolation", richardson_in_time(&low.field, &f.field)),
            None => Some(low.field.clone()),
        };
        if let Some(field) = field {
            if let Some(mut rep) = record(fails, "initial_rate", initial_rate(&field, vc.x0_distance, &prob, &ropts)) {
                if fine.is_some() {
                    rep.method = format!("{} after time extrapolation", rep.method);
                }
                art.reports.push(rep);
            }
        }
    }

    let mut upper = None;
    if checks.contains(&Check::Sandwich) || checks.contains(&Check::Uniqueness) {
        upper = record(fails, "maximal solution", maximal_solution(&prob, &sc.eps, &ladder, &grid, &popts, &stab, sc.eps_tol));
    }
    if let Some(up) = &upper {
        if checks.contains(&Check::Sandwich) {
            let sw = sandwich_check(&low.field, &up.field, &prob, pc.t_star, sc.d_min, sc.t_min, vc.sandwich_bounds);
            if let Some(sw) = record(fails, "sandwich", sw) {
                art.reports.extend(sw.to_rate_reports());
            }
        }
        if checks.contains(&Check::Uniqueness) {
            if let Some(gap) = record(fails, "uniqueness", uniqueness_gap(&low.field, &up.field, &prob, vc.gap_d_min, vc.gap_t_min)) {
                let gap_tol = vc.gap_tolerance * opts.tolerance_scale;
                art.reports.push(RateReport {
                    quantity: "uniqueness_gap".into(),
                    predicted: 0.0,
                    ladder: vec![],
                    iterates: vec![gap.gap],
                    extrapolated: gap.gap,
                    method: "max (u_max - u_min)/u_min over the stabilized region".into(),
                    converged: true,
                    rel_error: gap.gap,
                    tolerance: gap_tol,
                    asserted: gap.asserted,
                    passed: gap.gap <= gap_tol,
                    note: gap.note,
                });
            }
        }
    }

    let curves = record(fails, "envelopes", envelope_curves(&pc.nl, pc.p, &pc.kernel));
    let tau = record(fails, "tau", tau_curve(&prob, vc.x0_distance));
    let mut fields = vec![("minimal", &low.field)];
    if let Some(up) = &upper {
        fields.push(("maximal", &up.field));
    }
    for (name, field) in fields {
        art.trajectories.extend(trajectory_rows(name, field, &prob, curves.as_ref(), tau.as_ref(), profile.as_ref()));
    }
    art
}

fn trajectory_rows(
    name: &str,
    field: &SpaceTimeField,
    prob: &ParabolicProblem,
    curves: Option<&(blowup_core::blowdown::BlowdownCurve, blowup_core::blowdown::BlowdownCurve)>,
    tau: Option<&blowup_core::blowdown::BlowdownCurve>,
    profile: Option<&BoundaryProfile>,
) -> Vec<TrajectoryRow> {
    let line = &field.line;
    let m = line.boundary_index();
    let phis: Vec<f64> = (0..m).map(|i| profile.and_then(|bp| bp.eval(line.d[i]).ok()).unwrap_or(f64::NAN)).collect();
    let mut rows = Vec::new();
    for (j, &t) in field.times.iter().enumerate() {
        if !(t > 0.0) {
            continue;
        }
        let (xi, xi_star) = curves.map_or((f64::NAN, f64::NAN), |(a, b)| (a.eval(t).unwrap_or(f64::NAN), b.eval(t).unwrap_or(f64::NAN)));
        let tau = tau.map_or(f64::NAN, |c| c.eval(t).unwrap_or(f64::NAN));
        for i in 0..m {
            let value = field.values[j][i];
            if !value.is_finite() {
                continue;
            }
            let d = line.d[i];
            rows.push(TrajectoryRow {
                field: name.to_string(),
                t,
                x: prob.domain.coordinate_at_distance(d),
                d,
                value,
                xi,
                xi_star,
                tau,
                phi_k: phis[i],
            });
        }
    }
    rows
}
