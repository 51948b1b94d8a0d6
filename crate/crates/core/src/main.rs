//! Command-line front end: generate synthetic datasets, run the benchmark
//! pipeline from a config file, re-emit saved reports, and compare two
//! saved reports.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use anomaly_bench::config::{load_config, CliOverrides, EvalScope, ModelSelection};
use anomaly_bench::dataset::{generate_synthetic, SyntheticSpec};
use anomaly_bench::error::Error;
use anomaly_bench::report::{
    emit_plot_data, emit_report, load_report, BenchmarkReport, ReportFormat,
};
use anomaly_bench::run_pipeline;

#[derive(Parser)]
#[command(name = "anomaly-bench", version, about = "Benchmark unsupervised anomaly detectors on IoT telemetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic telemetry CSV (columns f0..f{d-1},label)
    Synth {
        /// Rows in the normal cluster
        #[arg(long, default_value_t = 2000)]
        normal: usize,
        /// Anomaly rows outside the cluster
        #[arg(long, default_value_t = 200)]
        anomaly: usize,
        /// Feature count
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// Standard deviation of the normal cluster
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        /// Half-width of the anomaly box (must exceed 3 x spread)
        #[arg(long, default_value_t = 10.0)]
        halfwidth: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for report.json, report.csv, and plot data
        #[arg(long)]
        out: Option<PathBuf>,
        /// Which detectors to run
        #[arg(long, value_enum)]
        model: Option<ModelSelection>,
        /// Evaluate on the held-out test subset or the full dataset
        #[arg(long, value_enum)]
        eval_scope: Option<EvalScope>,
    },
    /// Re-emit CSV and plot data from a saved report.json
    Report {
        /// Saved report.json
        saved: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two saved reports side by side
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { normal, anomaly, dim, spread, halfwidth, seed, out } => {
            let spec = SyntheticSpec {
                normal_count: normal,
                anomaly_count: anomaly,
                dim,
                spread,
                halfwidth,
            };
            let frame = generate_synthetic(&spec, seed)?;
            frame.write_csv(&out)?;
            println!("wrote {} rows ({} anomalies) to {}", frame.row_count(), anomaly, out.display());
            Ok(())
        }
        Command::Run { config, seed, out, model, eval_scope } => {
            let overrides = CliOverrides { seed, model, eval_scope, output_dir: out };
            let resolved = load_config(&config)?.resolve(&overrides)?;
            let report = run_pipeline(&resolved)?;
            let outdir = &resolved.output_dir;
            std::fs::create_dir_all(outdir).map_err(|source| Error::WriteFile {
                path: outdir.display().to_string(),
                source,
            })?;
            emit_report(&report, ReportFormat::Json, &outdir.join("report.json"))?;
            emit_report(&report, ReportFormat::Csv, &outdir.join("report.csv"))?;
            emit_plot_data(&report, outdir)?;
            print_summary(&report);
            println!("report written to {}", outdir.join("report.json").display());
            Ok(())
        }
        Command::Report { saved, out } => {
            let report = load_report(&saved)?;
            std::fs::create_dir_all(&out).map_err(|source| Error::WriteFile {
                path: out.display().to_string(),
                source,
            })?;
            emit_report(&report, ReportFormat::Csv, &out.join("report.csv"))?;
            emit_plot_data(&report, &out)?;
            print_summary(&report);
            println!("re-emitted to {}", out.display());
            Ok(())
        }
        Command::Compare { report_a, report_b } => {
            let a = load_report(&report_a)?;
            let b = load_report(&report_b)?;
            print_cross_comparison(&report_a, &a, &report_b, &b);
            Ok(())
        }
    }
}

fn print_summary(report: &BenchmarkReport) {
    println!(
        "rows: {} total, {} train ({} normal), {} evaluated ({} anomalies)",
        report.data.rows_total,
        report.data.train_rows,
        report.data.train_normal_rows,
        report.data.eval_rows,
        report.data.eval_anomalies,
    );
    println!("{:<10} {:>9} {:>10} {:>8} {:>8} {:>13} {:>12} {:>12}",
        "model", "accuracy", "precision", "recall", "f1", "inference_ms", "size_bytes", "peak_ram_mb");
    for model in &report.models {
        let (ms, ram) = match report.resources_for(&model.name) {
            Some(r) => (
                format!("{:.3}", r.timing.total_batch_ms),
                r.peak_ram_mb.map_or_else(|| "unsupported".into(), |v| format!("{v:.1}")),
            ),
            None => ("-".into(), "-".into()),
        };
        println!(
            "{:<10} {:>9.2} {:>10.2} {:>8.2} {:>8.2} {:>13} {:>12} {:>12}",
            model.name,
            model.metrics.accuracy,
            model.metrics.precision,
            model.metrics.recall,
            model.metrics.f1,
            ms,
            model.model_size_bytes,
            ram,
        );
    }
    if let Some(cmp) = &report.comparison {
        let wins: Vec<String> =
            cmp.iter().map(|m| format!("{}: {}", m.metric, m.winner)).collect();
        println!("winners: {}", wins.join(", "));
    }
    for model in &report.models {
        if !model.metrics.flags.is_empty() {
            println!("note: {} flagged: {}", model.name, model.metrics.flags.join("; "));
        }
    }
}

fn print_cross_comparison(
    path_a: &PathBuf,
    a: &BenchmarkReport,
    path_b: &PathBuf,
    b: &BenchmarkReport,
) {
    println!("{:<3} {:<10} {:>9} {:>10} {:>8} {:>8} {:>13} {:>12}",
        "rep", "model", "accuracy", "precision", "recall", "f1", "inference_ms", "size_bytes");
    let mut rows: Vec<(String, String, [f64; 4], String, usize)> = Vec::new();
    for (tag, report) in [("A", a), ("B", b)] {
        for model in &report.models {
            let ms = report
                .resources_for(&model.name)
                .map_or_else(|| "-".to_string(), |r| format!("{:.3}", r.timing.total_batch_ms));
            rows.push((
                tag.to_string(),
                model.name.clone(),
                [
                    model.metrics.accuracy,
                    model.metrics.precision,
                    model.metrics.recall,
                    model.metrics.f1,
                ],
                ms,
                model.model_size_bytes,
            ));
        }
    }
    for (tag, name, m, ms, size) in &rows {
        println!(
            "{tag:<3} {name:<10} {:>9.2} {:>10.2} {:>8.2} {:>8.2} {ms:>13} {size:>12}",
            m[0], m[1], m[2], m[3]
        );
    }
    for (i, metric) in ["accuracy", "precision", "recall", "f1"].iter().enumerate() {
        if let Some(best) = rows
            .iter()
            .max_by(|x, y| x.2[i].partial_cmp(&y.2[i]).unwrap_or(std::cmp::Ordering::Equal))
        {
            println!("best {metric}: {} ({} = {:.2})", best.1, best.0, best.2[i]);
        }
    }
    println!("A = {}, B = {}", path_a.display(), path_b.display());
}
