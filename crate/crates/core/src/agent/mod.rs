//! DDPG phase controller: networks, optimiser, replay, exploration and the
//! training loop.

pub mod adam;
pub mod checkpoint;
pub mod ddpg;
pub mod mlp;
pub mod noise;
pub mod replay;
pub mod train;

pub use adam::Adam;
pub use ddpg::{actor_objective_grad, critic_loss_grad, ActionValue, CriticSample, Ddpg, DdpgConfig};
pub use mlp::{Activation, Grads, Mlp};
pub use noise::GaussianNoise;
pub use replay::{ReplayBuffer, Transition};
pub use train::{episode_seed, rollout, train, EpisodeStats, TrainOutcome, TrainState, Trainer};
