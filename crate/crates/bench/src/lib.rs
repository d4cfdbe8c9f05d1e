//! Shared fixtures for the benchmarks.

use lcris_core::env::EnvConfig;
use lcris_core::scene::{build_trajectory, SnapshotStream};
use lcris_core::Result;

/// Default environment shortened to `steps` slots.
pub fn env_config(steps: usize) -> EnvConfig {
    EnvConfig {
        episode_steps: steps,
        ..EnvConfig::default()
    }
}

/// Channel snapshots for one episode of `cfg`.
pub fn snapshot_stream(cfg: &EnvConfig, seed: u64) -> Result<SnapshotStream> {
    let traj = build_trajectory(&cfg.scene, cfg.lc.slot_duration, cfg.episode_steps)?;
    SnapshotStream::new(&cfg.scene, traj, cfg.spec, cfg.fading, seed)
}
