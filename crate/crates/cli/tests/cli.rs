use std::fs;
use std::path::Path;
use std::process::Command;

use blowup_cli::report::{LADDER_HEADER, RATES_HEADER};
use blowup_cli::{emit_report, parse_config, run_experiment, Artifacts, Check, CliError, RunOptions};
use blowup_core::rates::RateReport;

const SMALL: &str = r#"
name = "small"

[problem]
domain = "interval(0,1)"
p = 2
f = "power(2)"
k = "const"
t_star = 0.5

[solver]
cells = 400
elliptic_cells = 400
steps = 1000
time_richardson = false

[verification]
checks = ["elliptic_rate", "boundary_rate"]
t0 = [0.2]
d_end = 4e-3
"#;

fn violations(src: &str) -> Vec<blowup_cli::Violation> {
    match parse_config(src, "test") {
        Err(CliError::Config(v)) => v,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blowup"))
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse_config("[problem]\np = 2\n", "minimal").unwrap();
    assert_eq!(cfg.name, "minimal");
    assert_eq!(cfg.problem.domain_key, "interval(0,1)");
    assert_eq!(cfg.problem.t_star, 0.9);
    assert_eq!(cfg.solver.cells, 400);
    assert_eq!(cfg.solver.eps, vec![2e-3]);
    assert_eq!(cfg.verification.checks.len(), Check::ALL.len());
    assert_eq!(cfg.verification.tolerance, 0.05);
    assert_eq!(cfg.verification.x0_distance, 0.5);
}

#[test]
fn index_gate_rejects_weak_absorption() {
    let v = violations("[problem]\np = 4\nf = \"power(2)\"\nk = \"const\"\n");
    let gate = v.iter().find(|v| v.key == "index gate").expect("gate violation");
    assert!(gate.message.contains("max = 3"), "{}", gate.message);
    assert_eq!(gate.line, Some(3));
    // the index condition is named on its own as well
    assert!(v.iter().any(|v| v.key == "regular variation"));
}

#[test]
fn unknown_kernel_is_named() {
    let v = violations("[problem]\nk = \"cubic\"\n");
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].key, "problem.k");
    assert!(v[0].message.contains("cubic"));
    assert_eq!(v[0].line, Some(2));
}

#[test]
fn all_violations_are_collected() {
    let src = "[problem]\np = \"two\"\nbeta = -1\ncolour = 3\n\n[solver]\neps = [1e-3, 2e-3]\n\n[verification]\nchecks = [\"sandwich\", \"magic\"]\n";
    let v = violations(src);
    let keys: Vec<&str> = v.iter().map(|v| v.key.as_str()).collect();
    for key in ["problem.p", "problem.beta", "problem.colour", "solver.eps", "verification.checks"] {
        assert!(keys.contains(&key), "missing {key} in {keys:?}");
    }
    let lines: Vec<usize> = v.iter().filter_map(|v| v.line).collect();
    assert!(lines.windows(2).all(|w| w[0] <= w[1]));
    assert!(lines.contains(&2) && lines.contains(&4) && lines.contains(&10));
}

#[test]
fn short_early_time_grids_are_rejected() {
    let v = violations("[solver]\nsteps = 100\n");
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].key, "solver.t_min");
}

#[test]
fn syntax_errors_carry_a_line() {
    let v = violations("[problem]\np = 2\nbeta = = 1\n");
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].line, Some(3));
}

#[test]
fn empty_report_list_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let art = Artifacts::default();
    emit_report(&art, dir.path()).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), 2, "{summary}");
    assert!(summary.lines().nth(1).unwrap().starts_with("quantity"));
    let rates = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(rates, format!("{}\n", RATES_HEADER.join(",")));
    for f in ["solutions.csv", "elliptic.csv", "rates_ladder.csv", "plot.gp"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn one_report_gives_one_row_in_column_order() {
    let dir = tempfile::tempdir().unwrap();
    let rep = RateReport {
        quantity: "boundary_rate(t0=0.1)".into(),
        predicted: 1.0,
        ladder: vec![(0.08, 1.25), (0.04, 1.125)],
        iterates: vec![1.0],
        extrapolated: 1.0,
        method: "aitken".into(),
        converged: true,
        rel_error: 0.0,
        tolerance: 0.05,
        asserted: true,
        passed: true,
        note: "beta(y, t0) = 1, l = 1".into(),
    };
    let art = Artifacts { name: "one".into(), reports: vec![rep], ..Default::default() };
    emit_report(&art, dir.path()).unwrap();
    let rates = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let lines: Vec<&str> = rates.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[1],
        "boundary_rate(t0=0.1),1.00000000000e0,1.00000000000e0,0.00000000000e0,5.00000000000e-2,aitken,true,true,true,2,\"beta(y, t0) = 1, l = 1\""
    );
    let ladder = fs::read_to_string(dir.path().join("rates_ladder.csv")).unwrap();
    assert_eq!(ladder.lines().next().unwrap(), LADDER_HEADER.join(","));
    assert_eq!(ladder.lines().nth(1).unwrap(), "boundary_rate(t0=0.1),8.00000000000e-2,1.25000000000e0");
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("overall: PASS"));
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = parse_config(SMALL, "small").unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_experiment(&cfg, &RunOptions::default());
    assert!(first.passed(), "{:?} {:?}", first.failures, first.reports);
    emit_report(&first, a.path()).unwrap();
    emit_report(&run_experiment(&cfg, &RunOptions::default()), b.path()).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(fa.len(), 6);
    assert!(fa.iter().find(|(n, _)| n == "solutions.csv").unwrap().1.len() > 1000);
    assert_eq!(fa, fb);
}

#[test]
fn binary_exit_status_follows_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();

    let out = bin().args(["validate"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());

    let pass = dir.path().join("pass");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&pass).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));

    // 0.1% is below the discretization error: reports fail but are kept
    let tight = dir.path().join("tight");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(&tight).args(["--tolerance-scale", "0.02"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let rates = fs::read_to_string(tight.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 3);
    assert!(rates.contains(",false\n") || rates.contains(",true,false,"), "{rates}");

    // no checks: solve only
    let solve_only = dir.path().join("solve.toml");
    fs::write(&solve_only, SMALL.replace("checks = [\"elliptic_rate\", \"boundary_rate\"]", "checks = []")).unwrap();
    let only = dir.path().join("only");
    let out = bin().arg("run").arg(&solve_only).arg("--out").arg(&only).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(only.join("rates.csv")).unwrap().lines().count(), 1);
    assert!(fs::read_to_string(only.join("solutions.csv")).unwrap().lines().count() > 100);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[problem]\np = 4\nf = \"power(2)\"\n").unwrap();
    let out = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("index gate"));

    let out = bin().args(["suite", "nonesuch"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn named_suites_parse() {
    for name in ["power", "weighted", "quartic", "disc"] {
        let cfgs = blowup_cli::suite(name).unwrap();
        assert_eq!(cfgs.len(), 1);
        assert_eq!(cfgs[0].name, name);
    }
    assert_eq!(blowup_cli::suite("all").unwrap().len(), 4);
}
