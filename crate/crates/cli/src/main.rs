//! Campaign runner CLI: validate configs, run Monte Carlo campaigns to
//! CSV, and reshape per-sample files into plot-ready series.
//!
//! Exit codes: 0 — campaign ran and every acceptance predicate passed;
//! 2 — campaign ran but at least one predicate failed; 1 — anything that
//! prevented a complete run (bad config, gate violation, I/O failure,
//! numerical abort).

mod config;
mod report_io;

use clap::{Parser, Subcommand};
use spde_ftle::experiment::RegimeReport;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

/// Environment override for the directory that receives the CSV reports.
pub const OUTPUT_DIR_ENV: &str = "SPDE_FTLE_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "spde-ftle", version, about = "Stochastic bifurcation FTLE campaigns")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the campaign described by a TOML config, writing samples.csv
    /// and summary.csv to the output directory
    Run { config: PathBuf },
    /// Parse and gate-check a config without running anything
    Validate { config: PathBuf },
    /// Reshape a per-sample CSV into a plot-ready series on stdout
    Plotdata {
        csv: PathBuf,
        /// "lambda-hist" or "order"
        #[arg(long)]
        kind: String,
        /// Scale grid of the campaign (kind=order), e.g. 0.2,0.1,0.05
        #[arg(long, value_delimiter = ',')]
        eps_grid: Vec<f64>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { config } => cmd_run(&config),
        Cmd::Validate { config } => cmd_validate(&config),
        Cmd::Plotdata {
            csv,
            kind,
            eps_grid,
        } => cmd_plotdata(&csv, &kind, &eps_grid),
    };
    std::process::exit(code);
}

fn read_config(path: &Path) -> Result<config::Plan, i32> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(1);
        }
    };
    match config::validate(&text) {
        Ok(plan) => Ok(plan),
        Err(violations) => {
            for v in &violations {
                eprintln!("config error: {v}");
            }
            Err(1)
        }
    }
}

fn cmd_validate(path: &Path) -> i32 {
    match read_config(path) {
        Ok(_) => {
            println!("ok");
            0
        }
        Err(code) => code,
    }
}

fn cmd_run(path: &Path) -> i32 {
    let plan = match read_config(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let out_dir: PathBuf = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) => PathBuf::from(d),
        None => match &plan.output_path {
            Some(p) => PathBuf::from(p),
            None => {
                eprintln!(
                    "error: no output directory: set output_path in the config \
                     or the {OUTPUT_DIR_ENV} environment variable"
                );
                return 1;
            }
        },
    };

    // a numerical abort (blow-up guard, divergence assert) is a runtime
    // error, not a predicate failure: report it and exit 1
    let prev_hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| config::execute(&plan.plan)));
    panic::set_hook(prev_hook);
    let report = match outcome {
        Ok(r) => r,
        Err(payload) => {
            eprintln!("error: campaign aborted: {}", panic_text(&payload));
            return 1;
        }
    };

    if let Err(e) = write_report(&out_dir, &report) {
        eprintln!("error: cannot write reports to {}: {e}", out_dir.display());
        return 1;
    }
    for row in &report.summary {
        println!(
            "{} {} = {:.6e} (ci [{:.4}, {:.4}])",
            if row.pass { "pass" } else { "FAIL" },
            row.metric,
            row.value,
            row.ci_low,
            row.ci_high
        );
    }
    println!(
        "wrote {} and {}",
        out_dir.join("samples.csv").display(),
        out_dir.join("summary.csv").display()
    );
    if report.passed() {
        0
    } else {
        for row in report.summary.iter().filter(|r| !r.pass) {
            eprintln!("predicate failed: {} = {:.6e}", row.metric, row.value);
        }
        2
    }
}

fn write_report(dir: &Path, report: &RegimeReport) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut samples = Vec::new();
    report_io::write_samples_csv(&mut samples, report)?;
    fs::write(dir.join("samples.csv"), samples)?;
    let mut summary = Vec::new();
    report_io::write_summary_csv(&mut summary, report)?;
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}

fn cmd_plotdata(csv: &Path, kind: &str, eps_grid: &[f64]) -> i32 {
    let text = match fs::read_to_string(csv) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", csv.display());
            return 1;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match kind {
        "lambda-hist" => report_io::plotdata_lambda_hist(&text, &mut out),
        "order" => report_io::plotdata_order(&text, eps_grid, &mut out),
        other => Err(format!(
            "unknown plotdata kind {other:?} (expected lambda-hist or order)"
        )),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}
