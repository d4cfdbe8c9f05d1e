use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;

use super::config::{EvalMode, ExperimentConfig, SweepAxis};
use super::metrics::{Aggregates, LongRow, MetricRow};
use super::ControllerKind;
use crate::agent::{rollout, train, Ddpg, DdpgConfig, TrainState, Trainer};
use crate::baselines::{optimal_controller, realistic_controller};
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::lc_dynamics::PanelState;
use crate::scene::{build_trajectory, SnapshotStream, Trajectory};

/// Environment variable capping the worker pool size.
pub const THREADS_VAR: &str = "LCRIS_THREADS";

/// A controller ready to run.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Optimal,
    Realistic,
    Ddpg(&'a Ddpg),
}

impl Controller<'_> {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Optimal => ControllerKind::Optimal,
            Controller::Realistic => ControllerKind::Realistic,
            Controller::Ddpg(_) => ControllerKind::Ddpg,
        }
    }
}

/// Rayon pool sized by the available cores, capped by `LCRIS_THREADS`.
pub fn worker_pool() -> Result<ThreadPool> {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
            if cap == 0 {
                return Err(Error::config(format!("{THREADS_VAR} must be positive")));
            }
            cap.min(available)
        }
        Err(_) => available,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))
}

/// `(slot, waypoint angle)` for every arrival of the trajectory.
pub fn arrival_angles(traj: &Trajectory) -> Vec<(usize, f64)> {
    let angles = traj.waypoint_angles_deg();
    traj.arrivals().into_iter().map(|(slot, w)| (slot, angles[w])).collect()
}

/// Panel start state of an episode; matches what [`Env::reset`] draws.
fn initial_panel(cfg: &EnvConfig, seed: u64) -> Result<PanelState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    PanelState::random(cfg.spec.columns(), cfg.lc, &mut rng)
}

/// Runs `controller` through one episode of channel seed `seed`.
pub fn run_episode(cfg: &EnvConfig, controller: &Controller<'_>, seed: u64) -> Result<Vec<MetricRow>> {
    let kind = controller.kind();
    let mut rows = Vec::with_capacity(cfg.episode_steps);
    match controller {
        Controller::Ddpg(agent) => {
            let mut env = Env::new(cfg.clone())?;
            Error::check_dim("policy observation", env.observation_dim(), agent.obs_dim())?;
            Error::check_dim("policy action", env.action_dim(), agent.act_dim())?;
            rollout(agent, &mut env, seed, |out| {
                rows.push(MetricRow::from_outcome(seed, kind, &out.outcome));
            })?;
        }
        Controller::Optimal | Controller::Realistic => {
            let traj = build_trajectory(&cfg.scene, cfg.lc.slot_duration, cfg.episode_steps)?;
            let mut stream = SnapshotStream::new(&cfg.scene, traj, cfg.spec, cfg.fading, cfg.channel_seed_for(seed))?;
            let mut panel = initial_panel(cfg, seed)?;
            for slot in 0..cfg.episode_steps {
                let snap = stream.snapshot_at(slot)?;
                let outcome = if matches!(controller, Controller::Optimal) {
                    optimal_controller(&snap, cfg)?.outcome
                } else {
                    realistic_controller(&snap, &mut panel, cfg)?.outcome
                };
                rows.push(MetricRow::from_outcome(seed, kind, &outcome));
            }
        }
    }
    Ok(rows)
}

/// Runs `controller` over `seeds` on `pool`.
///
/// Episodes run in parallel, but `sink` sees each run's rows in seed order
/// and aggregation happens in that order, so results do not depend on the
/// pool size.
pub fn run_eval<F>(
    cfg: &EnvConfig,
    controller: &Controller<'_>,
    seeds: &[u64],
    pool: &ThreadPool,
    mut sink: F,
) -> Result<Aggregates>
where
    F: FnMut(&[MetricRow]) -> Result<()>,
{
    let traj = build_trajectory(&cfg.scene, cfg.lc.slot_duration, cfg.episode_steps)?;
    let arrivals = arrival_angles(&traj);
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let chunk = pool.current_num_threads().max(1) * 2;
    let mut agg = Aggregates::default();
    for batch in sorted.chunks(chunk) {
        let runs: Vec<Result<Vec<MetricRow>>> =
            pool.install(|| batch.par_iter().map(|&s| run_episode(cfg, controller, s)).collect());
        for rows in runs {
            let rows = rows?;
            agg.add_run(&rows, &arrivals);
            sink(&rows)?;
        }
    }
    Ok(agg)
}

/// Trains an agent and reports the training episodes themselves as
/// evaluation runs, with the episode index as run id.
pub fn run_training_eval<F>(
    cfg: &EnvConfig,
    agent: &DdpgConfig,
    seed: u64,
    mut sink: F,
) -> Result<(TrainState, Aggregates)>
where
    F: FnMut(&[MetricRow]) -> Result<()>,
{
    let traj = build_trajectory(&cfg.scene, cfg.lc.slot_duration, cfg.episode_steps)?;
    let arrivals = arrival_angles(&traj);
    let mut trainer = Trainer::new(cfg.clone(), agent.clone(), seed)?;
    let mut agg = Aggregates::default();
    while !trainer.is_finished() {
        let run_id = trainer.state().episode as u64;
        let mut rows = Vec::with_capacity(cfg.episode_steps);
        trainer.run_episode_observed(|out| {
            rows.push(MetricRow::from_outcome(run_id, ControllerKind::Ddpg, &out.outcome));
        })?;
        agg.add_run(&rows, &arrivals);
        sink(&rows)?;
    }
    Ok((trainer.into_state(), agg))
}

/// One sweep point: its label and the configuration it runs.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<(String, ExperimentConfig)>> {
    let points: Vec<(String, ExperimentConfig)> = match cfg.sweep.axis {
        SweepAxis::Beta => cfg
            .sweep
            .betas
            .iter()
            .map(|&[b_snr, b_time]| {
                let mut c = cfg.clone();
                c.reward.beta_snr = b_snr;
                c.reward.beta_time = b_time;
                (format!("{b_snr}/{b_time}"), c)
            })
            .collect(),
        SweepAxis::Speed => cfg
            .sweep
            .speeds
            .iter()
            .map(|&v| {
                let mut c = cfg.clone();
                c.scene.speed_mps = v;
                (format!("{v}"), c)
            })
            .collect(),
    };
    if points.is_empty() {
        return Err(Error::config(format!(
            "sweep axis '{}' lists no values",
            cfg.sweep.axis
        )));
    }
    if cfg.sweep.controllers.is_empty() {
        return Err(Error::config("sweep lists no controllers"));
    }
    for (_, c) in &points {
        c.validate()?;
    }
    Ok(points)
}

/// Cross product of sweep values and controllers, as a long-format table
/// keyed by `(axis value, controller, metric)`.
pub fn run_sweep(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<Vec<LongRow>> {
    let points = sweep_points(cfg)?;
    let mut table = Vec::new();
    let mut controllers = cfg.sweep.controllers.clone();
    controllers.sort_unstable();
    controllers.dedup();
    for (label, point) in &points {
        let env = point.env_config()?;
        let seeds = point.seeds();
        for &kind in &controllers {
            let agg = match kind {
                ControllerKind::Ddpg => match point.run.eval_mode {
                    EvalMode::Frozen => {
                        let trained = train(&env, &point.agent, point.run.train_seed)?;
                        run_eval(&env, &Controller::Ddpg(&trained.agent), &seeds, pool, |_| Ok(()))?
                    }
                    EvalMode::Training => run_training_eval(&env, &point.agent, point.run.train_seed, |_| Ok(()))?.1,
                },
                ControllerKind::Optimal => run_eval(&env, &Controller::Optimal, &seeds, pool, |_| Ok(()))?,
                ControllerKind::Realistic => run_eval(&env, &Controller::Realistic, &seeds, pool, |_| Ok(()))?,
            };
            let means = agg
                .overall_means(kind)
                .ok_or_else(|| Error::domain("sweep produced no rows"))?;
            for (metric, value) in means.named() {
                table.push(LongRow {
                    axis: cfg.sweep.axis.to_string(),
                    axis_value: label.clone(),
                    controller: kind,
                    metric: metric.to_string(),
                    value,
                });
            }
        }
    }
    Ok(table)
}
