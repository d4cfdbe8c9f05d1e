//! Deterministic policy gradient with target networks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{Activation, Grads, Mlp};
use super::noise::GaussianNoise;
use super::replay::Transition;
use crate::error::{Error, Result};

/// Hyper-parameters of the learner. Defaults follow the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Soft-update rate of the target actor.
    pub actor_tau: f64,
    /// Soft-update rate of the target critic.
    pub critic_tau: f64,
    pub discount: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub episodes: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub noise: GaussianNoise,
    /// Updates start once the buffer holds `warmup_batches × batch_size` transitions.
    pub warmup_batches: usize,
    /// Initial scale of the actor's output layer relative to fan-in init.
    pub final_layer_scale: f64,
    /// Rewards enter the Bellman targets as `(r − reward_shift)·reward_scale`.
    /// A positive affine map leaves the greedy policy unchanged but keeps the
    /// critic from spending its early updates on a large constant offset.
    pub reward_shift: f64,
    pub reward_scale: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_lr: 8.8452e-5,
            critic_lr: 1.3876e-5,
            actor_tau: 0.0938,
            critic_tau: 0.0938,
            discount: 0.9947,
            buffer_capacity: 100_000,
            batch_size: 256,
            episodes: 350,
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            noise: GaussianNoise::default(),
            warmup_batches: 10,
            final_layer_scale: 1e-3,
            reward_shift: 0.0,
            reward_scale: 1.0,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::config("discount must lie in [0, 1]"));
        }
        for tau in [self.actor_tau, self.critic_tau] {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::config("soft-update rates must lie in [0, 1]"));
            }
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::config(
                "buffer capacity must be at least the (positive) batch size",
            ));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite() && self.reward_shift.is_finite()) {
            return Err(Error::config("reward_scale must be positive and reward_shift finite"));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::config("hidden layers must have at least one unit"));
        }
        Ok(())
    }

    pub fn warmup(&self) -> usize {
        (self.warmup_batches * self.batch_size).max(self.batch_size)
    }
}

/// A state-action value with its gradient with respect to the action.
pub trait ActionValue {
    fn value_and_action_grad(&self, state: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Critic networks take the concatenation `[state, action]` as input.
impl ActionValue for Mlp {
    fn value_and_action_grad(&self, state: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let input = concat(state, action);
        let trace = self.forward_trace(&input)?;
        let q = trace.output()[0];
        let grad = self.backward(&trace, &[1.0], None, state.len());
        Ok((q, grad[state.len()..].to_vec()))
    }
}

pub fn concat(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.len() + action.len());
    v.extend_from_slice(state);
    v.extend_from_slice(action);
    v
}

/// Critic value `Q(s, a)`.
pub fn critic_value(critic: &Mlp, state: &[f64], action: &[f64]) -> Result<f64> {
    Ok(critic.forward(&concat(state, action))?[0])
}

/// One regression sample for the critic.
#[derive(Debug, Clone, Copy)]
pub struct CriticSample<'a> {
    pub state: &'a [f64],
    pub action: &'a [f64],
    pub target: f64,
}

/// Mean squared Bellman error and its gradient with respect to the critic.
pub fn critic_loss_grad(critic: &Mlp, batch: &[CriticSample<'_>]) -> Result<(f64, Grads)> {
    if batch.is_empty() {
        return Err(Error::domain("critic update needs a non-empty batch"));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = Grads::zeros_like(critic);
    let mut loss = 0.0;
    let skip = critic.input_dim();
    for s in batch {
        let trace = critic.forward_trace(&concat(s.state, s.action))?;
        let err = trace.output()[0] - s.target;
        loss += err * err;
        critic.backward(&trace, &[2.0 * err * scale], Some(&mut grads), skip);
    }
    Ok((loss * scale, grads))
}

/// Mean of `Q(s, μ(s))` over `states` and its gradient with respect to the
/// actor parameters, with the critic held fixed.
pub fn actor_objective_grad<Q: ActionValue + ?Sized>(
    actor: &Mlp,
    critic: &Q,
    states: &[&[f64]],
) -> Result<(f64, Grads)> {
    if states.is_empty() {
        return Err(Error::domain("actor update needs a non-empty batch"));
    }
    let scale = 1.0 / states.len() as f64;
    let mut grads = Grads::zeros_like(actor);
    let mut objective = 0.0;
    let skip = actor.input_dim();
    for s in states {
        let trace = actor.forward_trace(s)?;
        let (q, dq_da) = critic.value_and_action_grad(s, trace.output())?;
        objective += q;
        let upstream: Vec<f64> = dq_da.iter().map(|g| g * scale).collect();
        actor.backward(&trace, &upstream, Some(&mut grads), skip);
    }
    Ok((objective * scale, grads))
}

/// One ascent step on the actor objective; returns the objective before the step.
pub fn actor_step<Q: ActionValue + ?Sized>(
    actor: &mut Mlp,
    opt: &mut Adam,
    critic: &Q,
    states: &[&[f64]],
) -> Result<f64> {
    let (objective, mut grads) = actor_objective_grad(actor, critic, states)?;
    grads.scale(-1.0);
    opt.step(actor, &grads);
    Ok(objective)
}

/// Online and target actor/critic pairs with their optimisers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddpg {
    pub config: DdpgConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

impl Ddpg {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, config: DdpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&config.actor_hidden);
        actor_sizes.push(act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend(&config.critic_hidden);
        critic_sizes.push(1);

        let actor = Mlp::init(
            &actor_sizes,
            Activation::Relu,
            Activation::Tanh,
            config.final_layer_scale,
            rng,
        )?;
        let critic = Mlp::init(&critic_sizes, Activation::Relu, Activation::Identity, 1.0, rng)?;
        Ok(Self::from_networks(config, actor, critic))
    }

    /// Wraps existing online networks; targets start as copies.
    pub fn from_networks(config: DdpgConfig, actor: Mlp, critic: Mlp) -> Self {
        Self {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opt: Adam::new(&critic, config.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Deterministic policy output in `[-1, 1]`.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    /// Bellman targets `r̃ + γ (1 − done) Q'(s', μ'(s'))` on the shifted and
    /// scaled reward `r̃`.
    pub fn td_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                let r = (t.reward - self.config.reward_shift) * self.config.reward_scale;
                if t.done {
                    return Ok(r);
                }
                let next_action = self.target_actor.forward(&t.next_state)?;
                let q_next = critic_value(&self.target_critic, &t.next_state, &next_action)?;
                Ok(r + self.config.discount * q_next)
            })
            .collect()
    }

    /// One critic step; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::domain("critic update needs a non-empty batch"));
        }
        let targets = self.td_targets(batch)?;
        let samples: Vec<CriticSample<'_>> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &y)| CriticSample {
                state: &t.state,
                action: &t.action,
                target: y,
            })
            .collect();
        let (loss, grads) = critic_loss_grad(&self.critic, &samples)?;
        self.critic_opt.step(&mut self.critic, &grads);
        Ok(loss)
    }

    /// One actor step through the (unchanged) online critic; returns the
    /// objective before the step.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        actor_step(&mut self.actor, &mut self.actor_opt, &self.critic, &states)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        self.target_actor.soft_update_from(&self.actor, self.config.actor_tau)?;
        self.target_critic
            .soft_update_from(&self.critic, self.config.critic_tau)
    }
}
