use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lcris_core::harness::jobs::{self, EvalJob};
use lcris_core::harness::{worker_pool, ControllerKind, ExperimentConfig, OutputFormat};
use lcris_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "lcris",
    version,
    about = "LC-RIS downlink simulator and phase-control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a DDPG agent and write its checkpoint.
    Train(CommonArgs),
    /// Evaluate one controller over a seed range.
    Eval(CommonArgs),
    /// Evaluate the reference controllers (both unless --controller is given).
    Baseline(CommonArgs),
    /// Run the configured parameter sweep.
    Sweep(CommonArgs),
    /// Summarise an existing output directory.
    Report(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Single seed (training seed for `train`).
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Half-open seed range, e.g. `0..350`.
    #[arg(long, value_name = "A..B", value_parser = parse_seed_range)]
    seeds: Option<Range<u64>>,
    /// Output directory (input directory for `report`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_controller)]
    controller: Option<ControllerKind>,
    /// Agent checkpoint to evaluate, or to resume training from.
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_format, default_value = "csv")]
    format: OutputFormat,
}

fn parse_seed_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("expected A..B, got '{s}'"));
    };
    let start: u64 = a.trim().parse().map_err(|_| format!("bad range start '{a}'"))?;
    let mut end: u64 = b.trim().parse().map_err(|_| format!("bad range end '{b}'"))?;
    if inclusive {
        end = end.checked_add(1).ok_or("range end overflows")?;
    }
    if end <= start {
        return Err(format!("empty seed range '{s}'"));
    }
    Ok(start..end)
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl CommonArgs {
    fn load_config(&self) -> anyhow::Result<ExperimentConfig> {
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        Ok(cfg)
    }

    fn seeds(&self, cfg: &ExperimentConfig) -> Vec<u64> {
        match (&self.seed, &self.seeds) {
            (Some(s), _) => vec![*s],
            (None, Some(r)) => r.clone().collect(),
            (None, None) => cfg.seeds(),
        }
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.run.output_dir.clone())
    }
}

fn print_means(label: &str, means: &lcris_core::harness::MetricMeans) {
    println!(
        "{label:<10} rx {:>9.3} dBW  snr {:>8.3} dB  t_c {:>6.3} ms  t_k {:>6.3} ms  rate {:>9.3} Mbps  ({} slots)",
        means.rx_power_dbw, means.snr_db, means.t_c_ms, means.t_k_ms, means.rate_mbps, means.count
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let mut cfg = args.load_config()?;
            if let Some(s) = args.seed {
                cfg.run.train_seed = s;
            }
            let out = args.out_dir(&cfg);
            jobs::train_job(&cfg, cfg.run.train_seed, &out, args.checkpoint.as_deref())?;
            println!("checkpoint written to {}", out.join(jobs::CHECKPOINT_FILE).display());
        }
        Command::Eval(args) => {
            let cfg = args.load_config()?;
            let controller = args
                .controller
                .ok_or_else(|| Error::Config("eval needs --controller".into()))?;
            evaluate(&cfg, &args, &[controller], "eval")?;
        }
        Command::Baseline(args) => {
            let cfg = args.load_config()?;
            let controllers = match args.controller {
                Some(ControllerKind::Ddpg) => {
                    return Err(Error::Config("baseline accepts only optimal or realistic".into()).into())
                }
                Some(c) => vec![c],
                None => vec![ControllerKind::Optimal, ControllerKind::Realistic],
            };
            evaluate(&cfg, &args, &controllers, "baseline")?;
        }
        Command::Sweep(args) => {
            let mut cfg = args.load_config()?;
            if args.seed.is_some() || args.seeds.is_some() {
                let seeds = args.seeds(&cfg);
                cfg.run.seed_start = seeds[0];
                cfg.run.seed_count = seeds.len() as u64;
            }
            let out = args.out_dir(&cfg);
            let pool = worker_pool()?;
            jobs::sweep_job(&cfg, &out, &pool)?;
            println!("sweep table written to {}", out.join("sweep.csv").display());
        }
        Command::Report(args) => {
            let dir = match &args.out {
                Some(d) => d.clone(),
                None => args.load_config()?.run.output_dir,
            };
            let report = jobs::report_job(&dir, args.format).with_context(|| format!("reading {}", dir.display()))?;
            println!(
                "{} run, {} seeds, config {}",
                report.manifest.command,
                report.manifest.seeds.len(),
                &report.manifest.config_hash[..12.min(report.manifest.config_hash.len())]
            );
            for (kind, m) in &report.means {
                print_means(kind.as_str(), m);
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn evaluate(
    cfg: &ExperimentConfig,
    args: &CommonArgs,
    controllers: &[ControllerKind],
    command: &str,
) -> anyhow::Result<()> {
    let seeds = args.seeds(cfg);
    let out = args.out_dir(cfg);
    let pool = worker_pool()?;
    let job = EvalJob {
        controllers,
        checkpoint: args.checkpoint.as_deref(),
        seeds: &seeds,
        out: &out,
        format: args.format,
        command,
    };
    let (_, agg) = jobs::eval_job(cfg, &job, &pool)?;
    for kind in controllers {
        if let Some(m) = agg.overall_means(*kind) {
            print_means(kind.as_str(), &m);
        }
    }
    println!("outputs written to {}", out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::Constraint(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
