//! Complete command-level jobs: each writes its outputs and a manifest into
//! an output directory.

use std::path::{Path, PathBuf};

use rayon::ThreadPool;

use super::config::{EvalMode, ExperimentConfig};
use super::metrics::{write_csv, Aggregates, MetricMeans};
use super::output::{self, Manifest, OutputFormat};
use super::run::{run_eval, run_sweep, run_training_eval, Controller};
use super::ControllerKind;
use crate::agent::{checkpoint, Trainer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FILE: &str = "agent.ckpt";
pub const TRAINING_FILE: &str = "training.csv";

/// Trains an agent, optionally resuming from `resume`, checkpointing after
/// every episode.
pub fn train_job(cfg: &ExperimentConfig, seed: u64, out: &Path, resume: Option<&Path>) -> Result<Manifest> {
    output::ensure_dir(out)?;
    let env = cfg.env_config()?;
    let mut trainer = match resume {
        Some(path) => {
            let state = checkpoint::load(path)?;
            if state.agent.config != cfg.agent {
                return Err(Error::config(format!(
                    "{}: agent settings differ from the configuration",
                    path.display()
                )));
            }
            Trainer::resume(env, state)?
        }
        None => Trainer::new(env, cfg.agent.clone(), seed)?,
    };
    let ckpt = out.join(CHECKPOINT_FILE);
    while !trainer.is_finished() {
        let stats = trainer.run_episode()?;
        log::info!(
            "episode {}/{}: reward {:.4}, snr {:.2} dB, t_k {:.3} ms",
            stats.episode + 1,
            cfg.agent.episodes,
            stats.mean_reward,
            stats.mean_snr_db,
            stats.mean_serving_ms
        );
        checkpoint::save(trainer.state(), &ckpt)?;
    }
    checkpoint::save(trainer.state(), &ckpt)?;
    write_csv(&out.join(TRAINING_FILE), &trainer.state().history)?;

    let mut m = Manifest::new("train", cfg.hash()?, vec![trainer.state().seed], OutputFormat::Csv);
    m.controllers.push(ControllerKind::Ddpg);
    m.files = vec![CHECKPOINT_FILE.into(), TRAINING_FILE.into()];
    m.write(out)?;
    Ok(m)
}

/// What an evaluation run covers and where it writes.
#[derive(Debug, Clone, Copy)]
pub struct EvalJob<'a> {
    pub controllers: &'a [ControllerKind],
    /// Trained agent; required for `ddpg` unless evaluating along training.
    pub checkpoint: Option<&'a Path>,
    pub seeds: &'a [u64],
    pub out: &'a Path,
    pub format: OutputFormat,
    /// Name recorded in the manifest.
    pub command: &'a str,
}

/// Evaluates the requested controllers and writes their tables.
pub fn eval_job(cfg: &ExperimentConfig, job: &EvalJob<'_>, pool: &ThreadPool) -> Result<(Manifest, Aggregates)> {
    let EvalJob {
        controllers,
        checkpoint: checkpoint_path,
        seeds,
        out,
        format,
        command,
    } = *job;
    if seeds.is_empty() {
        return Err(Error::config("no seeds to evaluate"));
    }
    let env = cfg.env_config()?;
    let mut kinds = controllers.to_vec();
    kinds.sort_unstable();
    kinds.dedup();

    let agent = if kinds.contains(&ControllerKind::Ddpg) && cfg.run.eval_mode == EvalMode::Frozen {
        let path = checkpoint_path.ok_or_else(|| Error::config("evaluating ddpg needs --checkpoint"))?;
        Some(checkpoint::load(path)?.agent)
    } else {
        None
    };

    output::ensure_dir(out)?;
    let mut writer = match format {
        OutputFormat::Csv => Some(output::slot_writer(out)?),
        OutputFormat::Plotdata => None,
    };
    let mut sink = |rows: &[super::MetricRow]| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            w.write(rows)?;
        }
        Ok(())
    };

    let mut agg = Aggregates::default();
    let mut train_seed = None;
    for kind in &kinds {
        let part = match kind {
            ControllerKind::Optimal => run_eval(&env, &Controller::Optimal, seeds, pool, &mut sink)?,
            ControllerKind::Realistic => run_eval(&env, &Controller::Realistic, seeds, pool, &mut sink)?,
            ControllerKind::Ddpg => match &agent {
                Some(a) => run_eval(&env, &Controller::Ddpg(a), seeds, pool, &mut sink)?,
                None => {
                    train_seed = Some(cfg.run.train_seed);
                    run_training_eval(&env, &cfg.agent, cfg.run.train_seed, &mut sink)?.1
                }
            },
        };
        agg.merge(&part);
    }

    let mut files = Vec::new();
    if let Some(w) = writer {
        w.finish()?;
        files.push(output::SLOTS_FILE.to_string());
    }
    files.push(output::write_waypoints(out, &agg)?);
    if format == OutputFormat::Plotdata {
        files.extend(output::write_plotdata(out, &agg.waypoint_rows())?);
    }

    let mut seeds_used: Vec<u64> = seeds.to_vec();
    seeds_used.sort_unstable();
    seeds_used.dedup();
    if let Some(s) = train_seed {
        log::info!("ddpg rows come from training episodes of seed {s}");
    }
    let mut m = Manifest::new(command, cfg.hash()?, seeds_used, format);
    m.controllers = kinds;
    m.files = files;
    m.write(out)?;
    Ok((m, agg))
}

pub fn sweep_job(cfg: &ExperimentConfig, out: &Path, pool: &ThreadPool) -> Result<Manifest> {
    let table = run_sweep(cfg, pool)?;
    output::ensure_dir(out)?;
    let file = output::write_sweep(out, &table)?;
    let mut controllers = cfg.sweep.controllers.clone();
    controllers.sort_unstable();
    controllers.dedup();
    let mut m = Manifest::new("sweep", cfg.hash()?, cfg.seeds(), OutputFormat::Csv);
    m.controllers = controllers;
    m.files = vec![file];
    m.write(out)?;
    Ok(m)
}

/// Summary of an output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub manifest: Manifest,
    /// Per-controller means over the waypoint arrivals.
    pub means: Vec<(ControllerKind, MetricMeans)>,
    pub files: Vec<PathBuf>,
}

/// Summarises a finished `eval` or `baseline` directory, optionally
/// regenerating plot series.
pub fn report_job(dir: &Path, format: OutputFormat) -> Result<Report> {
    let manifest = Manifest::read(dir)?;
    let rows = output::read_waypoints(&dir.join(output::WAYPOINTS_FILE))?;
    let mut means = Vec::new();
    for kind in &manifest.controllers {
        let mut count = 0u64;
        let mut acc = [0.0f64; 6];
        for r in rows.iter().filter(|r| r.controller == *kind) {
            let w = r.count as f64;
            count += r.count;
            for (a, v) in acc
                .iter_mut()
                .zip([r.rx_power_dbw, r.snr_db, r.snr_linear, r.t_c_ms, r.t_k_ms, r.rate_mbps])
            {
                *a += w * v;
            }
        }
        let n = count.max(1) as f64;
        means.push((
            *kind,
            MetricMeans {
                count,
                rx_power_dbw: acc[0] / n,
                snr_db: acc[1] / n,
                snr_linear: acc[2] / n,
                t_c_ms: acc[3] / n,
                t_k_ms: acc[4] / n,
                rate_mbps: acc[5] / n,
            },
        ));
    }
    let mut files = Vec::new();
    if format == OutputFormat::Plotdata {
        files = output::write_plotdata(dir, &rows)?
            .into_iter()
            .map(|f| dir.join(f))
            .collect();
    }
    Ok(Report { manifest, means, files })
}
