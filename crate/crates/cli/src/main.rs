use anyhow::{Context, Result};
use beamsim::config::{Mode, SimConfig};
use beamsim::metrics::sig6;
use beamsim::sim::{compare_dirs, run_experiment, RunOptions};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "beamsim", about = "Multi-panel mmWave beam management simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (baseline, DDQN training, or frozen-policy eval).
    Simulate {
        /// Config file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Policy mode; overrides the config file.
        #[arg(long)]
        mode: Option<String>,
        /// RNG seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSVs, summary, and checkpoints.
        #[arg(long)]
        out: PathBuf,
        /// Q-network checkpoint to load (eval, or warm-started training).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write schedule.csv, states.csv, and rho.csv.
        #[arg(long)]
        debug_dumps: bool,
    },
    /// Compare two completed run directories (baseline vs candidate).
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::init();
    match Cli::parse().command {
        Command::Simulate {
            config,
            mode,
            seed,
            out,
            checkpoint,
            debug_dumps,
        } => {
            let mut cfg = SimConfig::from_file(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            if let Some(mode) = mode {
                cfg.mode = Mode::parse(&mode)?;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            let opts = RunOptions {
                out_dir: Some(out.clone()),
                debug_dumps,
                checkpoint_in: checkpoint,
                initial_net: None,
            };
            let run = run_experiment(&cfg, &opts)?;
            let r = &run.report;
            println!(
                "{} run complete: seed={} duration={}s -> {}",
                r.mode,
                r.seed,
                sig6(r.duration_s),
                out.display()
            );
            let fmt_opt = |v: Option<f64>| v.map_or_else(|| "nodata".to_string(), sig6);
            println!(
                "  gm_overall_mbps={} gm_effective_mbps={}",
                fmt_opt(r.gm_overall_bps.value.map(|v| v / 1e6)),
                fmt_opt(r.gm_effective_bps.value.map(|v| v / 1e6)),
            );
            if let Some(lat) = r.latency {
                println!(
                    "  latency mean={}ms p95={}ms over {} packets",
                    sig6(lat.mean_s * 1e3),
                    sig6(lat.p95_s * 1e3),
                    lat.count
                );
            }
            if let Some(t) = r.train {
                println!(
                    "  train steps={} final_epsilon={} final_loss={}",
                    t.steps,
                    sig6(t.final_epsilon),
                    sig6(t.final_loss)
                );
            }
            Ok(())
        }
        Command::Compare {
            baseline,
            candidate,
            out,
        } => {
            let gains = compare_dirs(&baseline, &candidate, &out)?;
            let fmt_opt = |v: Option<f64>| v.map_or_else(|| "nodata".to_string(), sig6);
            println!(
                "gm_overall_gain_pct={}",
                fmt_opt(gains.gm_overall_gain_pct)
            );
            println!(
                "gm_effective_gain_pct={}",
                fmt_opt(gains.gm_effective_gain_pct)
            );
            println!(
                "latency_mean_factor={}",
                fmt_opt(gains.latency_mean_factor)
            );
            println!("latency_p95_factor={}", fmt_opt(gains.latency_p95_factor));
            Ok(())
        }
    }
}
