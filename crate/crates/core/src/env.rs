//! The phase-control MDP.
//!
//! Each slot the controller observes the panel's current phases together with
//! the previous slot's channels, picks new phases, and is rewarded with a
//! weighted sum of the resulting SNR and serving time.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::warn;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ArraySpec, LinkChannel, PhaseVector};
use crate::error::{Error, Result};
use crate::lc_dynamics::{self, LcParams, PanelState, SlotTiming};
use crate::scene::{build_trajectory, FadingParams, LinkSet, SceneConfig, Snapshot, SnapshotStream, Trajectory};

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Per-element phases co-phasing every RIS path with the direct path:
/// `ω_n = arg(h_AU) − arg(h_AR[n] h_RU[n])`, wrapped into `[0, 2π)`.
///
/// A zero direct path anchors the global phase at 0.
pub fn optimal_phases(ap_user: Complex64, ap_ris: &[Complex64], ris_user: &[Complex64]) -> Vec<f64> {
    let anchor = ap_user.arg();
    ap_ris
        .iter()
        .zip(ris_user)
        .map(|(a, r)| wrap_phase(anchor - (a * r).arg()))
        .collect()
}

pub fn optimal_phases_for(links: &LinkSet) -> Vec<f64> {
    optimal_phases(links.ap_user.scalar(), &links.ap_ris.coeffs, &links.ris_user.coeffs)
}

/// How per-element phases are collapsed onto the tunable columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnReduction {
    #[default]
    CircularMean,
    /// Take the phase of the middle row.
    CenterRow,
}

fn circular_mean(resultant: Complex64, count: usize, column: usize) -> f64 {
    if resultant.norm() <= 1e-12 * count as f64 {
        warn!("column {column}: phases cancel on the unit circle, using 0 rad");
        0.0
    } else {
        wrap_phase(resultant.arg())
    }
}

/// Circular mean of each column's per-element phases.
pub fn reduce_to_columns(phases: &[f64], spec: &ArraySpec) -> Result<Vec<f64>> {
    reduce_to_columns_with(phases, spec, ColumnReduction::CircularMean)
}

pub fn reduce_to_columns_with(phases: &[f64], spec: &ArraySpec, method: ColumnReduction) -> Result<Vec<f64>> {
    Error::check_dim("per-element phases", spec.len(), phases.len())?;
    let n_y = spec.n_y;
    Ok(match method {
        ColumnReduction::CircularMean => {
            let mut sums = vec![Complex64::default(); n_y];
            for (n, &w) in phases.iter().enumerate() {
                sums[n % n_y] += Complex64::cis(w);
            }
            sums.into_iter()
                .enumerate()
                .map(|(m, s)| circular_mean(s, spec.n_z, m))
                .collect()
        }
        ColumnReduction::CenterRow => {
            let row = spec.n_z / 2;
            phases[row * n_y..(row + 1) * n_y]
                .iter()
                .map(|&w| wrap_phase(w))
                .collect()
        }
    })
}

/// Column targets of the co-phasing solution, equal to
/// `reduce_to_columns_with(optimal_phases_for(links), ..)` but computed from
/// unit phasors without per-element trigonometry.
pub fn optimal_column_phases(links: &LinkSet, spec: &ArraySpec, method: ColumnReduction) -> Result<Vec<f64>> {
    Error::check_dim("A-R channel", spec.len(), links.ap_ris.len())?;
    Error::check_dim("R-U channel", spec.len(), links.ris_user.len())?;
    if method == ColumnReduction::CenterRow {
        return reduce_to_columns_with(&optimal_phases_for(links), spec, method);
    }
    let h_au = links.ap_user.scalar();
    let anchor = if h_au.norm() > 0.0 {
        h_au / h_au.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut sums = vec![Complex64::default(); spec.n_y];
    for (n, (a, r)) in links.ap_ris.coeffs.iter().zip(&links.ris_user.coeffs).enumerate() {
        let p = a * r;
        let mag = p.norm();
        let unit = if mag > 0.0 {
            p.conj() / mag
        } else {
            Complex64::new(1.0, 0.0)
        };
        sums[n % spec.n_y] += anchor * unit;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(m, s)| circular_mean(s, spec.n_z, m))
        .collect())
}

/// Per-column sums `Σ_rows h_AR[n] h_RU[n]`.
pub fn column_products(ap_ris: &LinkChannel, ris_user: &LinkChannel, spec: &ArraySpec) -> Vec<Complex64> {
    let mut sums = vec![Complex64::default(); spec.n_y];
    for (n, (a, r)) in ap_ris.coeffs.iter().zip(&ris_user.coeffs).enumerate() {
        sums[n % spec.n_y] += a * r;
    }
    sums
}

/// Maps raw actor outputs in `[-1, 1]` affinely onto each column's feasible
/// interval for a one-slot budget. Out-of-range values saturate.
pub fn map_action(raw: &[f64], panel: &PanelState) -> Result<Vec<f64>> {
    Error::check_dim("action", panel.len(), raw.len())?;
    let bounds = panel.feasible_bounds(panel.params().slot_duration)?;
    Ok(raw
        .iter()
        .zip(bounds)
        .map(|(&a, b)| {
            let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
            (b.min + 0.5 * (a + 1.0) * (b.max - b.min)).clamp(b.min, b.max)
        })
        .collect())
}

/// Inverse of [`map_action`] for targets inside the feasible intervals.
pub fn unmap_action(targets: &[f64], panel: &PanelState) -> Result<Vec<f64>> {
    Error::check_dim("targets", panel.len(), targets.len())?;
    let bounds = panel.feasible_bounds(panel.params().slot_duration)?;
    Ok(targets
        .iter()
        .zip(bounds)
        .map(|(&w, b)| {
            let width = b.max - b.min;
            if width <= 0.0 {
                0.0
            } else {
                (2.0 * (w - b.min) / width - 1.0).clamp(-1.0, 1.0)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrScale {
    #[default]
    Db,
    Linear,
}

/// Weights of the shaped reward `β₁·SNR + β₂·t_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub beta_snr: f64,
    pub beta_time: f64,
    /// Whether SNR enters the reward in dB or linear.
    pub snr_scale: SnrScale,
    /// Multiplier applied to `t_k` in seconds; 1000 expresses it in ms.
    pub time_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta_snr: 0.2,
            beta_time: 0.8,
            snr_scale: SnrScale::Db,
            time_scale: 1e3,
        }
    }
}

/// Floor applied before taking logarithms of SNR.
const SNR_FLOOR: f64 = 1e-30;

pub fn snr_db(snr: f64) -> f64 {
    channel::linear_to_db(snr.max(SNR_FLOOR))
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_snr >= 0.0 && self.beta_time >= 0.0) {
            return Err(Error::config("reward weights must be non-negative"));
        }
        if !(self.time_scale > 0.0) {
            return Err(Error::config("reward.time_scale must be positive"));
        }
        Ok(())
    }

    pub fn reward(&self, snr: f64, timing: &SlotTiming) -> f64 {
        let snr_term = match self.snr_scale {
            SnrScale::Db => snr_db(snr),
            SnrScale::Linear => snr,
        };
        self.beta_snr * snr_term + self.beta_time * timing.serving_time * self.time_scale
    }
}

/// Which channels go into the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Every element's channel coefficient.
    #[default]
    Full,
    /// One summed coefficient per column.
    Columns,
}

/// Granularity at which the panel is actuated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    #[default]
    Column,
    Element,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub scene: SceneConfig,
    pub spec: ArraySpec,
    pub fading: FadingParams,
    pub lc: LcParams,
    /// Watts.
    pub tx_power: f64,
    /// Watts.
    pub noise_power: f64,
    /// Hz.
    pub bandwidth: f64,
    pub reward: RewardConfig,
    pub observation: ObservationMode,
    pub actuation: Actuation,
    pub reduction: ColumnReduction,
    pub episode_steps: usize,
    /// Pins the channel realisation: every episode draws its channels from
    /// this seed instead of its own, which makes a static scene stationary
    /// across episodes. Panel start phases still follow the episode seed.
    pub channel_seed: Option<u64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            spec: ArraySpec::default(),
            fading: FadingParams::default(),
            lc: LcParams::default(),
            tx_power: channel::db_to_linear(30.0),
            noise_power: channel::db_to_linear(-130.0),
            bandwidth: 200e6,
            reward: RewardConfig::default(),
            observation: ObservationMode::Full,
            actuation: Actuation::Column,
            reduction: ColumnReduction::CircularMean,
            episode_steps: 19_328,
            channel_seed: None,
        }
    }
}

impl EnvConfig {
    /// Seed of the channel stream for an episode seeded with `seed`.
    pub fn channel_seed_for(&self, seed: u64) -> u64 {
        self.channel_seed.unwrap_or(seed)
    }

    pub fn action_dim(&self) -> usize {
        match self.actuation {
            Actuation::Column => self.spec.columns(),
            Actuation::Element => self.spec.len(),
        }
    }

    pub fn observation_dim(&self) -> usize {
        let channels = match self.observation {
            ObservationMode::Full => self.spec.len(),
            ObservationMode::Columns => self.spec.columns(),
        };
        2 * self.action_dim() + 2 + 2 + 4 * channels
    }

    /// Per-element phases for SNR evaluation from the panel's actuated phases.
    pub fn element_phases(&self, actuated: &[f64]) -> Result<PhaseVector> {
        match self.actuation {
            Actuation::Column => PhaseVector::from_columns(actuated, &self.spec, self.lc.max_phase),
            Actuation::Element => PhaseVector::new(actuated.to_vec(), self.lc.max_phase),
        }
    }
}

/// Flattened, normalised observation.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState(pub Vec<f64>);

/// Raw actor output, one value per actuated phase, nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Action(pub Vec<f64>);

/// Physical outcome of one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotOutcome {
    pub slot: usize,
    pub waypoint_deg: f64,
    /// Watts.
    pub received_power: f64,
    /// Linear.
    pub snr: f64,
    pub timing: SlotTiming,
    /// bit/s.
    pub rate: f64,
}

impl SlotOutcome {
    /// Evaluates a slot given the true channels and the final per-element phases.
    pub fn evaluate(cfg: &EnvConfig, snapshot: &Snapshot, phases: &PhaseVector, timing: SlotTiming) -> Result<Self> {
        let h_eff =
            channel::effective_channel(&snapshot.current.ap_ris, &snapshot.current.ris_user, phases, &cfg.spec)?;
        Self::from_effective(cfg, snapshot, h_eff, timing)
    }

    /// Same as [`SlotOutcome::evaluate`] for column-wise phases, summing each
    /// column's cascaded channel once.
    pub fn evaluate_columns(cfg: &EnvConfig, snapshot: &Snapshot, columns: &[f64], timing: SlotTiming) -> Result<Self> {
        Error::check_dim("column phases", cfg.spec.columns(), columns.len())?;
        let sums = column_products(&snapshot.current.ap_ris, &snapshot.current.ris_user, &cfg.spec);
        let h_eff: Complex64 = sums
            .iter()
            .zip(columns)
            .map(|(s, &w)| s * Complex64::cis(w))
            .sum::<Complex64>()
            * cfg.spec.eta();
        Self::from_effective(cfg, snapshot, h_eff, timing)
    }

    fn from_effective(cfg: &EnvConfig, snapshot: &Snapshot, h_eff: Complex64, timing: SlotTiming) -> Result<Self> {
        let h_au = snapshot.current.ap_user.scalar();
        let received_power = channel::received_power(h_au, h_eff, cfg.tx_power)?;
        let snr = channel::snr(h_au, h_eff, cfg.tx_power, cfg.noise_power)?;
        let rate = lc_dynamics::effective_rate(snr, &timing, cfg.lc.slot_duration, cfg.bandwidth)?;
        Ok(Self {
            slot: snapshot.slot,
            waypoint_deg: snapshot.waypoint_deg,
            received_power,
            snr,
            timing,
            rate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: AgentState,
    pub reward: f64,
    pub outcome: SlotOutcome,
    pub done: bool,
}

/// Running root-mean-square of channel components, one per link.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RunningRms {
    sum_sq: f64,
    count: f64,
}

impl RunningRms {
    fn update(&mut self, values: &[Complex64]) {
        self.sum_sq += values.iter().map(|z| z.norm_sqr()).sum::<f64>();
        self.count += 2.0 * values.len() as f64;
    }

    fn scale(&self) -> f64 {
        let rms = if self.count > 0.0 {
            (self.sum_sq / self.count).sqrt()
        } else {
            0.0
        };
        if rms > 0.0 {
            1.0 / rms
        } else {
            1.0
        }
    }
}

/// Stateful environment for one episode at a time.
pub struct Env {
    cfg: EnvConfig,
    trajectory: Trajectory,
    stream: Option<SnapshotStream>,
    panel: PanelState,
    snapshot: Option<Snapshot>,
    rms: [RunningRms; 3],
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.spec.validate()?;
        cfg.lc.validate()?;
        cfg.reward.validate()?;
        let trajectory = build_trajectory(&cfg.scene, cfg.lc.slot_duration, cfg.episode_steps)?;
        let panel = PanelState::new(vec![cfg.lc.lower(); cfg.action_dim()], cfg.lc)?;
        Ok(Self {
            cfg,
            trajectory,
            stream: None,
            panel,
            snapshot: None,
            rms: [RunningRms::default(); 3],
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn panel(&self) -> &PanelState {
        &self.panel
    }

    /// Overrides the current panel phases (clamped into the interior).
    pub fn set_panel_phases(&mut self, phases: &[f64]) -> Result<()> {
        self.panel.set_phases(phases)
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.as_ref()
    }

    pub fn observation_dim(&self) -> usize {
        self.cfg.observation_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim()
    }

    /// Starts a new episode. Channels are drawn from `seed`'s channel stream
    /// and the panel starts at uniformly random phases from its own stream.
    /// Observation normalisers restart with each episode.
    pub fn reset(&mut self, seed: u64) -> Result<AgentState> {
        let mut stream = SnapshotStream::new(
            &self.cfg.scene,
            self.trajectory.clone(),
            self.cfg.spec,
            self.cfg.fading,
            self.cfg.channel_seed_for(seed),
        )?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(2);
        self.panel = PanelState::random(self.cfg.action_dim(), self.cfg.lc, &mut init_rng)?;
        self.rms = [RunningRms::default(); 3];
        let snap = stream.snapshot_at(0)?;
        self.observe_scale(&snap);
        let state = self.observation(&snap.previous, &snap)?;
        self.stream = Some(stream);
        self.snapshot = Some(snap);
        Ok(state)
    }

    fn observe_scale(&mut self, snap: &Snapshot) {
        let links = &snap.current;
        match self.cfg.observation {
            ObservationMode::Full => {
                self.rms[0].update(&links.ap_user.coeffs);
                self.rms[1].update(&links.ap_ris.coeffs);
                self.rms[2].update(&links.ris_user.coeffs);
            }
            ObservationMode::Columns => {
                self.rms[0].update(&links.ap_user.coeffs);
                self.rms[1].update(&self.column_sums(&links.ap_ris));
                self.rms[2].update(&self.column_sums(&links.ris_user));
            }
        }
    }

    fn column_sums(&self, ch: &LinkChannel) -> Vec<Complex64> {
        let mut sums = vec![Complex64::default(); self.cfg.spec.n_y];
        for (n, h) in ch.coeffs.iter().enumerate() {
            sums[n % self.cfg.spec.n_y] += h;
        }
        sums
    }

    /// Builds the observation from the given outdated channels; distances
    /// come from `snap.previous_geometry`.
    fn observation(&self, outdated: &LinkSet, snap: &Snapshot) -> Result<AgentState> {
        let cfg = &self.cfg;
        let mut obs = Vec::with_capacity(cfg.observation_dim());
        let phase_scale = 1.0 / cfg.lc.max_phase;
        obs.extend(self.panel.phases().iter().map(|w| w * phase_scale));

        let targets = match cfg.actuation {
            Actuation::Column => optimal_column_phases(outdated, &cfg.spec, cfg.reduction)?,
            Actuation::Element => optimal_phases_for(outdated),
        };
        obs.extend(targets.iter().map(|w| w * phase_scale));

        let diag = cfg.scene.room_diagonal();
        obs.push(snap.previous_geometry.ap_user.distance / diag);
        obs.push(snap.previous_geometry.ris_user.distance / diag);

        let push_complex = |obs: &mut Vec<f64>, values: &[Complex64], scale: f64| {
            for z in values {
                obs.push(z.re * scale);
            }
            for z in values {
                obs.push(z.im * scale);
            }
        };
        let h_au = outdated.ap_user.scalar();
        obs.push(h_au.re * self.rms[0].scale());
        obs.push(h_au.im * self.rms[0].scale());
        match cfg.observation {
            ObservationMode::Full => {
                push_complex(&mut obs, &outdated.ap_ris.coeffs, self.rms[1].scale());
                push_complex(&mut obs, &outdated.ris_user.coeffs, self.rms[2].scale());
            }
            ObservationMode::Columns => {
                push_complex(&mut obs, &self.column_sums(&outdated.ap_ris), self.rms[1].scale());
                push_complex(&mut obs, &self.column_sums(&outdated.ris_user), self.rms[2].scale());
            }
        }
        debug_assert_eq!(obs.len(), cfg.observation_dim());
        Ok(AgentState(obs))
    }

    /// Applies `action` to the current slot and advances to the next one.
    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        let snap = self
            .snapshot
            .take()
            .ok_or_else(|| Error::domain("step called before reset"))?;
        let targets = map_action(&action.0, &self.panel)?;
        let timing = self.panel.apply(&targets)?;
        let outcome = match self.cfg.actuation {
            Actuation::Column => SlotOutcome::evaluate_columns(&self.cfg, &snap, self.panel.phases(), timing)?,
            Actuation::Element => {
                let phases = self.cfg.element_phases(self.panel.phases())?;
                SlotOutcome::evaluate(&self.cfg, &snap, &phases, timing)?
            }
        };
        let reward = self.cfg.reward.reward(outcome.snr, &timing);

        let next_slot = snap.slot + 1;
        let done = next_slot >= self.cfg.episode_steps;
        let next_state = if done {
            // Terminal: what the next slot would have observed.
            self.observation(
                &snap.current,
                &Snapshot {
                    previous_geometry: snap.geometry,
                    ..snap.clone()
                },
            )?
        } else {
            let stream = self.stream.as_mut().expect("stream exists after reset");
            let next = stream.snapshot_at(next_slot)?;
            self.observe_scale(&next);
            let state = self.observation(&next.previous, &next)?;
            self.snapshot = Some(next);
            state
        };
        if done {
            self.snapshot = None;
        }
        Ok(StepOutcome {
            next_state,
            reward,
            outcome,
            done,
        })
    }
}

impl fmt::Display for Actuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actuation::Column => "column",
            Actuation::Element => "element",
        })
    }
}

impl FromStr for Actuation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(Actuation::Column),
            "element" => Ok(Actuation::Element),
            other => Err(Error::config(format!("unknown actuation '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> EnvConfig {
        EnvConfig {
            scene: SceneConfig {
                waypoint_angles_deg: vec![-20.0, 20.0],
                ..SceneConfig::default()
            },
            episode_steps: 6,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn real_positive_channels_give_zero_phases() {
        let ar = vec![Complex64::new(0.5, 0.0); 4];
        let ru = vec![Complex64::new(2.0, 0.0); 4];
        let w = optimal_phases(Complex64::new(1.0, 0.0), &ar, &ru);
        assert_eq!(w, vec![0.0; 4]);
        // A vanishing direct path anchors the global phase at zero too.
        let w = optimal_phases(Complex64::new(0.0, 0.0), &ar, &ru);
        assert_eq!(w, vec![0.0; 4]);
    }

    #[test]
    fn circular_mean_examples() {
        let spec = ArraySpec::new(1, 2, 1.0, 1.0, 1.0).unwrap();
        let m = reduce_to_columns(&[0.0, PI / 2.0], &spec).unwrap();
        assert!((m[0] - PI / 4.0).abs() < 1e-12);

        let spec = ArraySpec::new(2, 25, 1.0, 1.0, 1.0).unwrap();
        let phases: Vec<f64> = (0..50).map(|n| if n % 2 == 0 { 1.7 } else { 5.9 }).collect();
        let m = reduce_to_columns(&phases, &spec).unwrap();
        assert!((m[0] - 1.7).abs() < 1e-12);
        assert!((m[1] - 5.9).abs() < 1e-12);

        // Four phases evenly spread on the circle cancel.
        let spec = ArraySpec::new(1, 4, 1.0, 1.0, 1.0).unwrap();
        let m = reduce_to_columns(&[0.0, PI / 2.0, PI, 1.5 * PI], &spec).unwrap();
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn center_row_reduction() {
        let spec = ArraySpec::new(2, 3, 1.0, 1.0, 1.0).unwrap();
        let phases = [0.1, 0.2, 1.1, 1.2, 2.1, 2.2];
        let m = reduce_to_columns_with(&phases, &spec, ColumnReduction::CenterRow).unwrap();
        assert_eq!(m, vec![1.1, 1.2]);
    }

    #[test]
    fn map_action_endpoints() {
        let lc = LcParams::default();
        let panel = PanelState::new(vec![0.5, 3.0, 6.0], lc).unwrap();
        let bounds = panel.feasible_bounds(lc.slot_duration).unwrap();
        let lo = map_action(&[-1.0; 3], &panel).unwrap();
        let hi = map_action(&[1.0; 3], &panel).unwrap();
        let mid = map_action(&[0.0; 3], &panel).unwrap();
        let sat = map_action(&[-7.0, 9.0, f64::NAN], &panel).unwrap();
        for (c, b) in bounds.iter().enumerate() {
            assert_eq!(lo[c], b.min);
            assert_eq!(hi[c], b.max);
            assert!((mid[c] - b.midpoint()).abs() < 1e-12 && b.contains(mid[c], 0.0));
        }
        assert_eq!(sat[0], bounds[0].min);
        assert_eq!(sat[1], bounds[1].max);
        assert!((sat[2] - bounds[2].midpoint()).abs() < 1e-12);
        panel.config_time(&lo).unwrap();
        panel.config_time(&hi).unwrap();
    }

    #[test]
    fn unmap_inverts_map() {
        let lc = LcParams::default();
        let panel = PanelState::new(vec![0.5, 3.0, 6.0], lc).unwrap();
        let raw = vec![-0.3, 0.8, 0.1];
        let targets = map_action(&raw, &panel).unwrap();
        let back = unmap_action(&targets, &panel).unwrap();
        for (a, b) in raw.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_column_targets_match_composition() {
        let cfg = EnvConfig::default();
        let traj = build_trajectory(&cfg.scene, cfg.lc.slot_duration, 3).unwrap();
        let mut stream = SnapshotStream::new(&cfg.scene, traj, cfg.spec, cfg.fading, 4).unwrap();
        let snap = stream.snapshot_at(0).unwrap();
        let slow = reduce_to_columns(&optimal_phases_for(&snap.current), &cfg.spec).unwrap();
        let fast = optimal_column_phases(&snap.current, &cfg.spec, ColumnReduction::CircularMean).unwrap();
        for (a, b) in slow.iter().zip(fast) {
            let d = (a - b).rem_euclid(2.0 * PI);
            assert!(d.min(2.0 * PI - d) < 1e-12);
        }
    }

    #[test]
    fn observation_dimension_and_finiteness() {
        let mut env = Env::new(small_cfg()).unwrap();
        assert_eq!(env.observation_dim(), 30 + 30 + 2 + 2 + 4 * 750);
        let s = env.reset(1).unwrap();
        assert_eq!(s.0.len(), 3064);
        assert!(s.0.iter().all(|x| x.is_finite()));

        let cols = EnvConfig {
            observation: ObservationMode::Columns,
            ..small_cfg()
        };
        let mut env = Env::new(cols).unwrap();
        assert_eq!(env.reset(1).unwrap().0.len(), 30 + 30 + 2 + 2 + 120);
    }

    #[test]
    fn holding_phases_earns_full_serving_time() {
        let cfg = EnvConfig {
            reward: RewardConfig {
                beta_snr: 0.0,
                beta_time: 0.8,
                ..RewardConfig::default()
            },
            ..small_cfg()
        };
        let mut env = Env::new(cfg).unwrap();
        env.reset(3).unwrap();
        let raw = unmap_action(env.panel().phases(), env.panel()).unwrap();
        let out = env.step(&Action(raw)).unwrap();
        assert!(out.outcome.timing.config_time < 1e-12);
        assert!((out.reward - 0.8 * 10.0).abs() < 1e-9);
    }

    #[test]
    fn episode_terminates() {
        let mut env = Env::new(small_cfg()).unwrap();
        env.reset(0).unwrap();
        for i in 0..6 {
            let out = env.step(&Action(vec![0.0; 30])).unwrap();
            assert_eq!(out.done, i == 5);
            assert_eq!(out.outcome.slot, i);
        }
        assert!(env.step(&Action(vec![0.0; 30])).is_err());
    }

    #[test]
    fn wrong_action_length_rejected() {
        let mut env = Env::new(small_cfg()).unwrap();
        env.reset(0).unwrap();
        assert!(matches!(env.step(&Action(vec![0.0; 3])), Err(Error::Dimension { .. })));
    }
}
