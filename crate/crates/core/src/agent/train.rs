//! Episodic training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ddpg::{Ddpg, DdpgConfig};
use super::replay::{ReplayBuffer, Transition};
use crate::env::{snr_db, Action, AgentState, Env, EnvConfig, StepOutcome};
use crate::error::{Error, Result};

/// Per-episode summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_snr_db: f64,
    pub mean_serving_ms: f64,
    /// Mean critic loss over the episode's updates; zero when none ran.
    pub mean_critic_loss: f64,
    pub updates: u64,
}

/// Channel seed of training episode `episode` of run `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    // splitmix64 finaliser over a (seed, episode) pair.
    let mut z = seed
        .rotate_left(17)
        .wrapping_add((episode as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Learner state that persists across episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub agent: Ddpg,
    pub buffer: ReplayBuffer,
    /// Drives exploration, warm-up actions and minibatch sampling.
    pub rng: ChaCha8Rng,
    pub seed: u64,
    /// Number of completed episodes.
    pub episode: usize,
    pub total_steps: u64,
    pub history: Vec<EpisodeStats>,
}

/// Runs DDPG episodes against a fresh environment per run.
pub struct Trainer {
    env: Env,
    state: TrainState,
}

impl Trainer {
    pub fn new(env_cfg: EnvConfig, config: DdpgConfig, seed: u64) -> Result<Self> {
        let env = Env::new(env_cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Ddpg::new(env.observation_dim(), env.action_dim(), config, &mut rng)?;
        let buffer = ReplayBuffer::new(agent.config.buffer_capacity)?;
        Ok(Self {
            env,
            state: TrainState {
                agent,
                buffer,
                rng,
                seed,
                episode: 0,
                total_steps: 0,
                history: Vec::new(),
            },
        })
    }

    /// Continues from a saved learner state.
    pub fn resume(env_cfg: EnvConfig, state: TrainState) -> Result<Self> {
        let env = Env::new(env_cfg)?;
        Error::check_dim("observation", env.observation_dim(), state.agent.obs_dim())?;
        Error::check_dim("action", env.action_dim(), state.agent.act_dim())?;
        Ok(Self { env, state })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn env_config(&self) -> &EnvConfig {
        self.env.config()
    }

    pub fn agent(&self) -> &Ddpg {
        &self.state.agent
    }

    pub fn is_finished(&self) -> bool {
        self.state.episode >= self.state.agent.config.episodes
    }

    fn planned_steps(&self) -> u64 {
        (self.state.agent.config.episodes * self.env.config().episode_steps) as u64
    }

    fn choose_action(&mut self, state: &AgentState) -> Result<Vec<f64>> {
        let total = self.planned_steps();
        let st = &mut self.state;
        if (st.total_steps as usize) < st.agent.config.warmup() {
            return Ok((0..st.agent.act_dim())
                .map(|_| st.rng.random_range(-1.0..=1.0))
                .collect());
        }
        let mut a = st.agent.act(&state.0)?;
        st.agent
            .config
            .noise
            .perturb(&mut a, st.total_steps, total, &mut st.rng);
        Ok(a)
    }

    /// Runs one full episode with learning.
    pub fn run_episode(&mut self) -> Result<EpisodeStats> {
        self.run_episode_observed(|_| {})
    }

    /// Like [`Trainer::run_episode`], reporting every environment step to
    /// `on_step` (including exploration).
    pub fn run_episode_observed<F>(&mut self, mut on_step: F) -> Result<EpisodeStats>
    where
        F: FnMut(&StepOutcome),
    {
        let ep = self.state.episode;
        let mut state = self.env.reset(episode_seed(self.state.seed, ep))?;
        let (mut reward_sum, mut snr_sum, mut serve_sum, mut loss_sum) = (0.0, 0.0, 0.0, 0.0);
        let mut steps = 0u64;
        let mut updates = 0u64;
        loop {
            let action = self.choose_action(&state)?;
            let out = self.env.step(&Action(action.clone()))?;
            on_step(&out);
            reward_sum += out.reward;
            snr_sum += snr_db(out.outcome.snr);
            serve_sum += out.outcome.timing.serving_time * 1e3;
            steps += 1;

            let st = &mut self.state;
            st.total_steps += 1;
            st.buffer.push(Transition {
                state: state.0,
                action,
                reward: out.reward,
                next_state: out.next_state.0.clone(),
                done: out.done,
            });
            if st.buffer.len() >= st.agent.config.warmup() {
                let idx = st.buffer.sample_indices(st.agent.config.batch_size, &mut st.rng)?;
                let batch: Vec<&Transition> = idx.iter().map(|&i| &st.buffer.items()[i]).collect();
                loss_sum += st.agent.critic_update(&batch)?;
                st.agent.actor_update(&batch)?;
                st.agent.soft_update_targets()?;
                updates += 1;
            }
            state = out.next_state;
            if out.done {
                break;
            }
        }
        if !(self.state.agent.actor.all_finite() && self.state.agent.critic.all_finite()) {
            return Err(Error::domain(format!("training diverged in episode {ep}")));
        }
        let n = steps as f64;
        let stats = EpisodeStats {
            episode: ep,
            mean_reward: reward_sum / n,
            mean_snr_db: snr_sum / n,
            mean_serving_ms: serve_sum / n,
            mean_critic_loss: if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            updates,
        };
        log::debug!(
            "episode {ep}: reward {:.4}, snr {:.2} dB, t_k {:.3} ms",
            stats.mean_reward,
            stats.mean_snr_db,
            stats.mean_serving_ms
        );
        self.state.history.push(stats);
        self.state.episode += 1;
        Ok(stats)
    }

    /// Runs episodes until `episodes` have completed in total (capped by the
    /// configured budget).
    pub fn train_until(&mut self, episodes: usize) -> Result<()> {
        let target = episodes.min(self.state.agent.config.episodes);
        while self.state.episode < target {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn train_to_end(&mut self) -> Result<()> {
        self.train_until(self.state.agent.config.episodes)
    }
}

/// Result of a complete training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub agent: Ddpg,
    pub history: Vec<EpisodeStats>,
}

/// Trains for the configured number of episodes; bitwise reproducible for a
/// fixed `(env_cfg, config, seed)`.
pub fn train(env_cfg: &EnvConfig, config: &DdpgConfig, seed: u64) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(env_cfg.clone(), config.clone(), seed)?;
    trainer.train_to_end()?;
    let st = trainer.into_state();
    Ok(TrainOutcome {
        agent: st.agent,
        history: st.history,
    })
}

/// Rolls out a frozen policy for one episode without exploration noise.
pub fn rollout<F>(agent: &Ddpg, env: &mut Env, seed: u64, mut on_step: F) -> Result<()>
where
    F: FnMut(&StepOutcome),
{
    let mut state = env.reset(seed)?;
    loop {
        let a = agent.act(&state.0)?;
        let out = env.step(&Action(a))?;
        on_step(&out);
        if out.done {
            return Ok(());
        }
        state = out.next_state.clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObservationMode;

    fn tiny_env() -> EnvConfig {
        let mut cfg = EnvConfig {
            observation: ObservationMode::Columns,
            episode_steps: 12,
            ..EnvConfig::default()
        };
        cfg.spec.n_y = 4;
        cfg.spec.n_z = 3;
        cfg
    }

    fn tiny_agent() -> DdpgConfig {
        DdpgConfig {
            actor_hidden: vec![8],
            critic_hidden: vec![8],
            batch_size: 4,
            warmup_batches: 2,
            buffer_capacity: 32,
            episodes: 3,
            ..DdpgConfig::default()
        }
    }

    #[test]
    fn zero_episodes_leave_initial_params() {
        let cfg = DdpgConfig {
            episodes: 0,
            ..tiny_agent()
        };
        let fresh = Trainer::new(tiny_env(), cfg.clone(), 4).unwrap();
        let out = train(&tiny_env(), &cfg, 4).unwrap();
        assert_eq!(out.agent, fresh.state().agent);
        assert!(out.history.is_empty());
    }

    #[test]
    fn same_seed_same_curve() {
        let a = train(&tiny_env(), &tiny_agent(), 9).unwrap();
        let b = train(&tiny_env(), &tiny_agent(), 9).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.agent, b.agent);
        let c = train(&tiny_env(), &tiny_agent(), 10).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn updates_start_after_warmup() {
        let out = train(&tiny_env(), &tiny_agent(), 1).unwrap();
        // warm-up of 8 transitions: first update at the 8th step
        assert_eq!(out.history[0].updates, 12 - 8 + 1);
        assert_eq!(out.history[1].updates, 12);
    }

    #[test]
    fn episode_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..4).flat_map(|s| (0..100).map(move |e| episode_seed(s, e))).collect();
        assert_eq!(seeds.len(), 400);
    }
}
