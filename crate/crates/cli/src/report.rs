//! Output files of a run. Numbers are written in scientific notation with
//! 12 significant digits, and rows follow the order of the artifacts, so
//! identical runs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use blowup_core::rates::RateReport;

use crate::error::CliError;
use crate::run::Artifacts;

pub const SOLUTIONS_HEADER: [&str; 9] = ["field", "t", "x", "d", "value", "xi", "xi_star", "tau", "phi_K"];
pub const ELLIPTIC_HEADER: [&str; 4] = ["x", "d", "value", "phi_K"];
pub const RATES_HEADER: [&str; 11] = [
    "quantity",
    "predicted",
    "extrapolated",
    "rel_error",
    "tolerance",
    "method",
    "converged",
    "asserted",
    "passed",
    "ladder_points",
    "note",
];
pub const LADDER_HEADER: [&str; 3] = ["quantity", "variable", "ratio"];

/// `x` with 12 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into() })?;
    let wrap = |e: csv::Error| CliError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

fn status(r: &RateReport) -> &'static str {
    match (r.asserted, r.passed) {
        (_, true) => "PASS",
        (true, false) => "FAIL",
        (false, false) => "not asserted",
    }
}

fn summary(art: &Artifacts) -> String {
    let mut s = String::new();
    s.push_str(&format!("# experiment: {}\n", art.name));
    for (k, v) in &art.header {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s.push_str(&format!(
        "{:<32} {:>19} {:>19} {:>19} {:>19}  {}\n",
        "quantity", "predicted", "measured", "rel_error", "tolerance", "status"
    ));
    for r in &art.reports {
        s.push_str(&format!(
            "{:<32} {:>19} {:>19} {:>19} {:>19}  {}\n",
            r.quantity,
            sci(r.predicted),
            sci(r.extrapolated),
            sci(r.rel_error),
            sci(r.tolerance),
            status(r)
        ));
    }
    for f in &art.failures {
        s.push_str(&format!("failure: {f}\n"));
    }
    if !art.reports.is_empty() || !art.failures.is_empty() {
        s.push_str(&format!("overall: {}\n", if art.passed() { "PASS" } else { "FAIL" }));
    }
    s
}

const PLOT: &str = r#"# gnuplot script; run from this directory with `gnuplot plot.gp`
set datafile separator ','
set terminal pngcairo size 900,600
set key autotitle columnhead

set output 'rates.png'
set logscale x
set xlabel 'd or t'
set ylabel 'measured ratio'
plot 'rates_ladder.csv' using 2:3 with linespoints pointtype 7 title 'rate ladders'

set output 'solutions.png'
set logscale xy
set xlabel 'd'
set ylabel 'u'
plot 'solutions.csv' using 4:(stringcolumn(1) eq 'minimal' ? $5 : 1/0) with dots title 'minimal', \
     '' using 4:(stringcolumn(1) eq 'maximal' ? $5 : 1/0) with dots title 'maximal', \
     '' using 4:9 with lines title 'phi(K(d))'

set output 'elliptic.png'
plot 'elliptic.csv' using 2:3 with lines title 'elliptic', '' using 2:4 with lines title 'phi(K(d))'
"#;

/// Write `solutions.csv`, `elliptic.csv`, `rates.csv`, `rates_ladder.csv`,
/// `summary.txt` and `plot.gp` into `out_dir`, creating it if needed.
pub fn emit_report(art: &Artifacts, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path = |name: &str| out_dir.join(name);
    let mut written = Vec::new();

    let p = path("solutions.csv");
    write_csv(
        &p,
        SOLUTIONS_HEADER,
        art.trajectories.iter().map(|r| {
            [r.field.clone(), sci(r.t), sci(r.x), sci(r.d), sci(r.value), sci(r.xi), sci(r.xi_star), sci(r.tau), sci(r.phi_k)]
        }),
    )?;
    written.push(p);

    let p = path("elliptic.csv");
    write_csv(&p, ELLIPTIC_HEADER, art.elliptic.iter().map(|r| [sci(r.x), sci(r.d), sci(r.value), sci(r.phi_k)]))?;
    written.push(p);

    let p = path("rates.csv");
    write_csv(
        &p,
        RATES_HEADER,
        art.reports.iter().map(|r| {
            [
                r.quantity.clone(),
                sci(r.predicted),
                sci(r.extrapolated),
                sci(r.rel_error),
                sci(r.tolerance),
                r.method.clone(),
                r.converged.to_string(),
                r.asserted.to_string(),
                r.passed.to_string(),
                r.ladder.len().to_string(),
                r.note.clone(),
            ]
        }),
    )?;
    written.push(p);

    let p = path("rates_ladder.csv");
    write_csv(
        &p,
        LADDER_HEADER,
        art.reports.iter().flat_map(|r| r.ladder.iter().map(move |(x, y)| [r.quantity.clone(), sci(*x), sci(*y)])),
    )?;
    written.push(p);

    let p = path("summary.txt");
    fs::write(&p, summary(art)).map_err(io_err(&p))?;
    written.push(p);

    let p = path("plot.gp");
    fs::write(&p, PLOT).map_err(io_err(&p))?;
    written.push(p);
    Ok(written)
}
