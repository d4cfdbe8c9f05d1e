//! Experiment configuration read from a TOML file.
//!
//! Every key has a default, so an empty file describes the reference
//! scenario. Unknown keys are rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::DdpgConfig;
use crate::channel::{self, ArraySpec};
use crate::env::{Actuation, ColumnReduction, EnvConfig, ObservationMode, RewardConfig};
use crate::error::{Error, Result};
use crate::lc_dynamics::{LcParams, LcTimeConstants, PHASE_EPS};
use crate::scene::{FadingParams, SceneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub tx_power_dbw: f64,
    pub noise_power_dbw: f64,
    pub bandwidth_hz: f64,
    pub wavelength_m: f64,
    pub k_ap_user: f64,
    pub k_ap_ris: f64,
    pub k_ris_user: f64,
    pub nlos_power: f64,
    pub nlos_power_ap_user: f64,
    pub fading_correlation: f64,
    /// Tunable columns (horizontal elements).
    pub columns: usize,
    /// Elements per column.
    pub rows: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let fading = FadingParams::default();
        let spec = ArraySpec::default();
        Self {
            tx_power_dbw: 30.0,
            noise_power_dbw: -130.0,
            bandwidth_hz: 200e6,
            wavelength_m: spec.wavelength,
            k_ap_user: fading.k_ap_user,
            k_ap_ris: fading.k_ap_ris,
            k_ris_user: fading.k_ris_user,
            nlos_power: fading.nlos_power,
            nlos_power_ap_user: fading.nlos_power_ap_user,
            fading_correlation: fading.correlation,
            columns: spec.n_y,
            rows: spec.n_z,
            spacing_wavelengths: spec.d_y / spec.wavelength,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcSection {
    pub tau_decay_ms: f64,
    pub tau_rise_ms: f64,
    pub max_phase_rad: f64,
    pub slot_ms: f64,
    pub margin_rad: f64,
}

impl Default for LcSection {
    fn default() -> Self {
        Self {
            tau_decay_ms: 29.0,
            tau_rise_ms: 9.0,
            max_phase_rad: 2.0 * PI,
            slot_ms: 10.0,
            margin_rad: PHASE_EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub observation: ObservationMode,
    pub actuation: Actuation,
    pub reduction: ColumnReduction,
    /// Same channel realisation in every episode; see [`EnvConfig::channel_seed`].
    pub channel_seed: Option<u64>,
}

/// Where the DDPG evaluation rows come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Fresh rollouts of the frozen trained policy, one per seed.
    #[default]
    Frozen,
    /// The training episodes themselves, exploration included.
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// First evaluation seed.
    pub seed_start: u64,
    /// Number of evaluation seeds.
    pub seed_count: u64,
    /// Seed of the training run.
    pub train_seed: u64,
    /// Slots per episode; derived from `walk_length_m` and the speed when absent.
    pub episode_steps: Option<usize>,
    /// Distance covered by one episode.
    pub walk_length_m: f64,
    pub output_dir: PathBuf,
    pub eval_mode: EvalMode,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed_start: 0,
            seed_count: 350,
            train_seed: 0,
            episode_steps: None,
            walk_length_m: 289.92,
            output_dir: PathBuf::from("out"),
            eval_mode: EvalMode::Frozen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    Beta,
    Speed,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Beta => "beta",
            SweepAxis::Speed => "speed",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepAxis::Beta),
            "speed" => Ok(SweepAxis::Speed),
            other => Err(Error::config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    /// `(β_snr, β_time)` pairs.
    pub betas: Vec<[f64; 2]>,
    /// User speeds in m/s.
    pub speeds: Vec<f64>,
    pub controllers: Vec<super::ControllerKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Beta,
            betas: vec![[0.2, 0.8], [0.8, 0.2]],
            speeds: vec![1.5, 3.0],
            controllers: vec![
                super::ControllerKind::Optimal,
                super::ControllerKind::Realistic,
                super::ControllerKind::Ddpg,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub channel: ChannelSection,
    pub lc: LcSection,
    pub reward: RewardConfig,
    pub env: EnvSection,
    pub agent: DdpgConfig,
    pub run: RunSection,
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML rendering with every default filled in.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config()?;
        self.agent.validate()?;
        if self.run.seed_count == 0 {
            return Err(Error::config("run.seed_count must be positive"));
        }
        if self.run.episode_steps == Some(0) {
            return Err(Error::config("run.episode_steps must be positive"));
        }
        Ok(())
    }

    /// Slots per episode at the configured speed.
    pub fn episode_steps(&self) -> Result<usize> {
        if let Some(n) = self.run.episode_steps {
            return Ok(n);
        }
        let step = self.scene.speed_mps * self.lc.slot_ms * 1e-3;
        if !(step > 0.0 && self.run.walk_length_m > 0.0) {
            return Err(Error::config(
                "run.episode_steps must be given when the user is stationary",
            ));
        }
        Ok(((self.run.walk_length_m / step).round() as usize).max(1))
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let ch = &self.channel;
        if !(ch.wavelength_m > 0.0 && ch.bandwidth_hz > 0.0) {
            return Err(Error::config("wavelength and bandwidth must be positive"));
        }
        if !(ch.tx_power_dbw.is_finite() && ch.noise_power_dbw.is_finite()) {
            return Err(Error::config("powers must be finite"));
        }
        let wavelength = ch.wavelength_m;
        let spacing = ch.spacing_wavelengths * wavelength;
        let spec = ArraySpec {
            n_y: ch.columns,
            n_z: ch.rows,
            d_y: spacing,
            d_z: spacing,
            wavelength,
        };
        spec.validate().map_err(|e| Error::config(e.to_string()))?;
        for (name, v) in [
            ("k_ap_user", ch.k_ap_user),
            ("k_ap_ris", ch.k_ap_ris),
            ("k_ris_user", ch.k_ris_user),
            ("nlos_power", ch.nlos_power),
            ("nlos_power_ap_user", ch.nlos_power_ap_user),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("channel.{name} must be finite and non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&ch.fading_correlation) {
            return Err(Error::config("channel.fading_correlation must lie in [0, 1]"));
        }
        let lc = LcParams {
            tau: LcTimeConstants {
                decay: self.lc.tau_decay_ms / 1e3,
                rise: self.lc.tau_rise_ms / 1e3,
            },
            max_phase: self.lc.max_phase_rad,
            slot_duration: self.lc.slot_ms / 1e3,
            margin: self.lc.margin_rad,
        };
        lc.validate().map_err(|e| Error::config(e.to_string()))?;
        self.reward.validate().map_err(|e| Error::config(e.to_string()))?;
        self.scene.validate().map_err(|e| Error::config(e.to_string()))?;
        Ok(EnvConfig {
            scene: self.scene.clone(),
            spec,
            fading: FadingParams {
                k_ap_user: ch.k_ap_user,
                k_ap_ris: ch.k_ap_ris,
                k_ris_user: ch.k_ris_user,
                nlos_power: ch.nlos_power,
                nlos_power_ap_user: ch.nlos_power_ap_user,
                correlation: ch.fading_correlation,
            },
            lc,
            tx_power: channel::db_to_linear(ch.tx_power_dbw),
            noise_power: channel::db_to_linear(ch.noise_power_dbw),
            bandwidth: ch.bandwidth_hz,
            reward: self.reward,
            observation: self.env.observation,
            actuation: self.env.actuation,
            reduction: self.env.reduction,
            episode_steps: self.episode_steps()?,
            channel_seed: self.env.channel_seed,
        })
    }

    /// Evaluation seeds `seed_start .. seed_start + seed_count`.
    pub fn seeds(&self) -> Vec<u64> {
        (self.run.seed_start..self.run.seed_start + self.run.seed_count).collect()
    }
}
