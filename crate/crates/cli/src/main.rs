use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use blowup_cli::{emit_report, load_config, run_experiment, suite, CliError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "blowup", version, about = "Blow-up solutions of p-Laplacian problems: solve and verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; one subdirectory per experiment.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiments run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Multiplies every pass tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Check a configuration file without solving.
    Validate { config: PathBuf },
    /// Run a named suite (power, weighted, quartic, disc, all).
    Suite { name: String },
}

fn run_all(configs: Vec<ExperimentConfig>, cli: &Cli) -> Result<bool, CliError> {
    if cli.tolerance_scale.is_nan() || cli.tolerance_scale <= 0.0 || !cli.tolerance_scale.is_finite() {
        return Err(CliError::Config(vec![blowup_cli::Violation {
            line: None,
            key: "--tolerance-scale".into(),
            message: format!("must be positive, got {}", cli.tolerance_scale),
        }]));
    }
    let opts = RunOptions { tolerance_scale: cli.tolerance_scale };
    let single = configs.len() == 1;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.max(1)).build().expect("thread pool");
    let results: Vec<Result<bool, CliError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let base = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
                let dir = if single { base } else { base.join(&cfg.name) };
                let art = run_experiment(cfg, &opts);
                emit_report(&art, &dir)?;
                report_line(&art, &dir);
                Ok(art.passed())
            })
            .collect()
    });
    let mut ok = true;
    for r in results {
        ok &= r?;
    }
    Ok(ok)
}

fn report_line(art: &blowup_cli::Artifacts, dir: &Path) {
    println!("{}: {} ({} reports, {} failures) -> {}", art.name, if art.passed() { "PASS" } else { "FAIL" }, art.reports.len(), art.failures.len(), dir.display());
    for r in &art.reports {
        println!("  {:<32} {:.6} (predicted {:.6}) {}", r.quantity, r.extrapolated, r.predicted, if r.passed { "pass" } else if r.asserted { "FAIL" } else { "not asserted" });
    }
    for f in &art.failures {
        println!("  failure: {f}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate { config } => load_config(config).map(|cfg| {
            println!("{}: configuration valid", cfg.name);
            true
        }),
        Command::Run { config } => load_config(config).and_then(|cfg| run_all(vec![cfg], &cli)),
        Command::Suite { name } => suite(name).and_then(|cfgs| run_all(cfgs, &cli)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
