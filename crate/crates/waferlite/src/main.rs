//! Command-line surface: dataset generation, experiment runs, suites,
//! shape benchmarking, and report regeneration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use waferlite::config::{apply_config_file, parse_config_file, RunConfig};
use waferlite::experiments::{run_experiment, run_suite};
use waferlite::report::{emit_report, parse_report, ResultsRow};
use waferlite::{bench, data, store};
use waferlite_core::graph::{ArchId, ModelGraph};
use waferlite_core::synth::scaled_counts;

#[derive(Parser)]
#[command(name = "waferlite", about = "Lightweight wafer-defect CNN study toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic wafer dataset (PGM images + manifest.csv).
    GenData {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Image resolution.
        #[arg(long, default_value_t = 256)]
        size: usize,
        /// Scale factor on the reference class counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Run one experiment end to end and print its result row.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Experiment id (0..=12).
        #[arg(long)]
        id: usize,
    },
    /// Run a cross product of experiments and emit results.csv/.md.
    Suite {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated experiment ids.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<usize>,
        /// Comma-separated seeds (default: 42).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Comma-separated task sizes (defaults to --classes).
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<usize>,
    },
    /// Parameter count, serialized size and latency of one architecture.
    Bench {
        /// Architecture name (basenet, basenet8, basenet8plus, incnet,
        /// resinet, vgg16).
        #[arg(long)]
        arch: String,
        /// Input resolution (defaults to the architecture's native one).
        #[arg(long)]
        res: Option<usize>,
        /// Classifier head size (vgg16 benches with 1000 for parity).
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        warmup: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
    /// Rebuild results.md from an existing results.csv.
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Optional "key = value" config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (from gen-data).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for weights and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Task size: 3, 5 or 8 classes.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training/eval resolution.
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    weight_decay: Option<f32>,
    #[arg(long)]
    patience: Option<usize>,
    /// Permit training a randomly initialized VGG16 (ids 10..=12).
    #[arg(long, default_value_t = false)]
    allow_untrained_vgg: bool,
    #[arg(long)]
    latency_warmup: Option<usize>,
    #[arg(long)]
    latency_reps: Option<usize>,
}

fn resolve_config(common: &CommonArgs) -> waferlite::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let file = parse_config_file(path)?;
        apply_config_file(&mut cfg, &file, path)?;
    }
    if let Some(v) = &common.data {
        cfg.data_dir = v.clone();
    }
    if let Some(v) = &common.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = common.classes {
        cfg.classes = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.res {
        cfg.res = v;
    }
    if let Some(v) = common.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = common.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = common.lr {
        cfg.train.base_lr = v;
    }
    if let Some(v) = common.weight_decay {
        cfg.train.weight_decay = v;
    }
    if let Some(v) = common.patience {
        cfg.train.patience = v;
    }
    if common.allow_untrained_vgg {
        cfg.allow_untrained_vgg = true;
    }
    if let Some(v) = common.latency_warmup {
        cfg.latency_warmup = v;
    }
    if let Some(v) = common.latency_reps {
        cfg.latency_reps = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_row(row: &ResultsRow) {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    println!(
        "id {} | {} | {} classes | seed {} | P {} R {} F1 {} acc {} | {} params | {:.2} MB | {:.3} ms{}",
        row.experiment_id,
        row.arch,
        row.classes,
        row.seed,
        fmt(row.precision),
        fmt(row.recall),
        fmt(row.f1),
        fmt(row.accuracy),
        row.params,
        row.size_mb,
        row.latency_ms,
        if row.error.is_empty() { String::new() } else { format!(" | ERROR: {}", row.error) }
    );
}

fn real_main() -> waferlite::Result<ExitCode> {
    match Cli::parse().command {
        Command::GenData { out, seed, size, scale } => {
            let counts = scaled_counts(scale);
            let ds = data::generate_dataset(&counts, seed, size, &out)?;
            println!("wrote {} samples ({} classes) to {}", ds.len(), ds.num_classes(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { common, id } => {
            let mut cfg = resolve_config(&common)?;
            cfg.id = id;
            cfg.validate()?;
            let row = run_experiment(&cfg)?;
            print_row(&row);
            emit_report(&[row], &cfg.out_dir)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite { common, ids, seeds, tasks } => {
            let cfg = resolve_config(&common)?;
            let tasks = if tasks.is_empty() { vec![cfg.classes] } else { tasks };
            let (rows, all_ok) = run_suite(&ids, &tasks, &seeds, &cfg)?;
            for row in &rows {
                print_row(row);
            }
            println!("report written to {}", cfg.out_dir.join("results.csv").display());
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Bench { arch, res, classes, seed, warmup, reps } => {
            let arch = ArchId::parse(&arch)?;
            let res = res.unwrap_or_else(|| arch.default_res());
            let classes = classes.unwrap_or(if arch == ArchId::Vgg16 { 1000 } else { 8 });
            let model = ModelGraph::<f32>::build(arch, classes, res, seed)?;
            let dir = std::env::temp_dir();
            let path = dir.join(format!("waferlite_bench_{}_{seed}.wvml", arch.name()));
            store::save_weights(&model, &path)?;
            let size = bench::model_size_mb(&path)?;
            let _ = std::fs::remove_file(&path);
            let lat = bench::measure_latency(&model, warmup, reps)?;
            println!(
                "{} @ {res}: {} params | {size:.2} MB | median {:.3} ms | p90 {:.3} ms ({} samples)",
                arch.name(),
                model.count_params(),
                lat.median_ms,
                lat.p90_ms,
                lat.samples
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { csv, out } => {
            let rows = parse_report(&csv)?;
            let (csv_path, md_path) = emit_report(&rows, &out)?;
            println!("rewrote {} and {}", csv_path.display(), md_path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
