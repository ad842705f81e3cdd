//! Command-line front end: build varieties from JSON files, run the
//! invariant pipeline or the threefold classifier, and run the curated
//! construction suite. Deterministic for a fixed (file, flags, seed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gaussrank::classify::{classify_threefold, invariant_report};
use gaussrank::config::{ReportFormat, RunConfig, Tolerances};
use gaussrank::error::Error;
use gaussrank::suite::run_suite;
use gaussrank::variety::load_spec;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportArg {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "gaussrank",
    about = "Differential invariants of parametrized projective varieties: Gauss rank, fiber dimension, focal loci, and the classification of threefolds in P^4 with one-dimensional Gauss fibers",
    version
)]
struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Accepted generic samples per rank measurement (minimum 3).
    #[arg(long, global = true, default_value_t = 20)]
    samples: usize,
    /// Relative singular-value cutoff for numerical rank.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol_rank: f64,
    /// Relative tolerance for clustering focal roots.
    #[arg(long, global = true, default_value_t = 1e-4)]
    cluster_tol: f64,
    /// Retries before a degenerate sample becomes a hard error.
    #[arg(long, global = true, default_value_t = 5)]
    retries: usize,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = ReportArg::Json)]
    report: ReportArg,
    /// Include wall-clock stage timings in reports (output is then no
    /// longer byte-reproducible).
    #[arg(long, global = true, default_value_t = false)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full invariant report for a variety file: rank, fiber dimension,
    /// focal pattern, and class label when applicable.
    Analyze { spec_path: PathBuf },
    /// Classify a threefold in P^4 by its focal geometry.
    Classify { spec_path: PathBuf },
    /// Run the curated construction suite and print one row per entry.
    Suite,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let cfg = RunConfig {
        seed: cli.seed,
        samples: cli.samples,
        tol: Tolerances {
            tol_rank: cli.tol_rank,
            cluster_tol: cli.cluster_tol,
            retries: cli.retries,
            ..Tolerances::default()
        },
        report_format: match cli.report {
            ReportArg::Json => ReportFormat::Json,
            ReportArg::Csv => ReportFormat::Csv,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() {
    if let Ok(value) = std::env::var("GAUSSRANK_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Analyze { spec_path } => {
            let variety = load_spec(spec_path, cfg.seed, &cfg.tol)?;
            let report = invariant_report(&variety, &cfg, cli.timings);
            match cfg.report_format {
                ReportFormat::Json => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&report)
                            .expect("report serialization")
                    );
                }
                ReportFormat::Csv => {
                    println!("name,n,N,r,f,focus_pattern,sweeps,class,seed,errors");
                    let pattern = report
                        .focus
                        .as_ref()
                        .map(|f| {
                            f.pattern
                                .iter()
                                .map(|(_, m)| m.to_string())
                                .collect::<Vec<_>>()
                                .join("+")
                        })
                        .unwrap_or_default();
                    let sweeps = report
                        .focus
                        .as_ref()
                        .map(|f| {
                            f.sweeps
                                .iter()
                                .map(|s| s.to_string())
                                .collect::<Vec<_>>()
                                .join("+")
                        })
                        .unwrap_or_default();
                    println!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        csv_escape(&report.name),
                        report.n,
                        report.ambient,
                        report.r.map(|v| v.to_string()).unwrap_or_default(),
                        report.f.map(|v| v.to_string()).unwrap_or_default(),
                        pattern,
                        sweeps,
                        report.class,
                        report.seed,
                        csv_escape(&report.errors.join("; ")),
                    );
                }
            }
            Ok(if report.errors.is_empty() { 0 } else { 2 })
        }
        Command::Classify { spec_path } => {
            let variety = load_spec(spec_path, cfg.seed, &cfg.tol)?;
            let class = classify_threefold(&variety, cfg.seed, &cfg)?;
            let evidence: Vec<serde_json::Value> = class
                .evidence
                .iter()
                .map(|fr| {
                    serde_json::json!({
                        "multiplicities": fr.roots.iter().map(|(_, m)| *m).collect::<Vec<_>>(),
                        "sweeps": fr.sweeps,
                    })
                })
                .collect();
            let out = serde_json::json!({
                "name": variety.name,
                "n": variety.n(),
                "N": variety.ambient(),
                "r": class.gauss.r,
                "f": class.gauss.f,
                "class": class.label.to_string(),
                "fibers_voted": class.evidence.len(),
                "evidence": evidence,
                "seed": cfg.seed,
            });
            match cfg.report_format {
                ReportFormat::Json => {
                    println!("{}", serde_json::to_string_pretty(&out).expect("serialization"))
                }
                ReportFormat::Csv => {
                    println!("name,n,N,r,f,class,fibers_voted,seed");
                    println!(
                        "{},{},{},{},{},{},{},{}",
                        csv_escape(&variety.name),
                        variety.n(),
                        variety.ambient(),
                        class.gauss.r,
                        class.gauss.f,
                        class.label,
                        class.evidence.len(),
                        cfg.seed
                    );
                }
            }
            Ok(0)
        }
        Command::Suite => {
            let (rows, all_pass) = run_suite(&cfg);
            match cfg.report_format {
                ReportFormat::Json => {
                    println!("{}", serde_json::to_string_pretty(&rows).expect("serialization"));
                }
                ReportFormat::Csv => {
                    println!("name,expected,measured,pass");
                    for r in &rows {
                        println!(
                            "{},{},{},{}",
                            csv_escape(&r.name),
                            csv_escape(&r.expected),
                            csv_escape(&r.measured),
                            r.pass
                        );
                    }
                }
            }
            if all_pass {
                Ok(0)
            } else {
                eprintln!("suite: one or more rows failed");
                Ok(2)
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("gaussrank: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
