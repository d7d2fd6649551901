//! `rownav`: annotate recorded logs, run simulated trials, evaluate
//! trajectories and sweep seeds.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rownav", version, about = "Vineyard row navigation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a recorded GPS path into recorded frames and write
    /// ground-truth heatmaps.
    Annotate {
        /// Log directory with frames.jsonl, poses.jsonl and camera.json.
        #[arg(long)]
        log: PathBuf,
        /// Timestamped path file (JSON).
        #[arg(long)]
        path: PathBuf,
        /// Output directory for heatmaps and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Forward path window projected per frame, meters.
        #[arg(long)]
        lookahead: Option<f64>,
        /// Gaussian kernel width, full-resolution pixels.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Run simulated field trials from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Base seed; replication k runs with seed + k.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Number of replications.
        #[arg(long, default_value_t = 1)]
        replications: u32,
        /// Abort on the first fault instead of simulating an intervention.
        #[arg(long)]
        strict: bool,
        /// Also write an annotation input log per replication.
        #[arg(long)]
        record_annotation_log: bool,
    },
    /// Summarize a trial log against its mission plan.
    Evaluate {
        /// Trial directory (or an rtk.csv fix log).
        #[arg(long)]
        log: PathBuf,
        /// Mission plan JSON; defaults to plan.json next to the log.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Output directory for summary.csv and deviations.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Heading downsampling rate.
        #[arg(long, default_value_t = 1.0)]
        downsample_hz: f64,
    },
    /// Run one config across a seed range and aggregate the summaries.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Number of seeds, starting at --seed-start.
        #[arg(long)]
        seeds: u32,
        #[arg(long, default_value_t = 1)]
        seed_start: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Annotate { log, path, out, lookahead, sigma } => {
            commands::annotate::run(&log, &path, &out, lookahead, sigma)
        }
        Command::Simulate { config, seed, out, replications, strict, record_annotation_log } => {
            commands::simulate::run(&config, seed, &out, replications, strict, record_annotation_log)
        }
        Command::Evaluate { log, plan, out, downsample_hz } => {
            commands::evaluate::run(&log, plan.as_deref(), out.as_deref(), downsample_hz)
        }
        Command::Sweep { config, seeds, seed_start, out, strict } => {
            commands::sweep::run(&config, seeds, seed_start, &out, strict)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
