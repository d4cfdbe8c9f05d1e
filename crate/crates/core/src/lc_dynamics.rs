//! Liquid-crystal reconfiguration timing.
//!
//! An LC cell relaxes exponentially: toward `0` with time constant `τ⁻` when
//! its phase decreases and toward `ω_m` with `τ⁺` when it increases. The
//! closed-form inverse of that relaxation gives the time a cell needs to
//! reach a target phase; the panel is ready once its slowest cell is.
//!
//! Phases never wrap: a cell moving from `π/8` to `15π/8` climbs the whole
//! way. All phases are kept inside `[ε, ω_m − ε]` so that the inverse stays
//! finite.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clamping margin `ε` in radians.
pub const PHASE_EPS: f64 = 1e-3;

/// Slack allowed when checking targets against reachable bounds.
const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcTimeConstants {
    /// `τ⁻` in seconds, relaxation toward zero phase.
    pub decay: f64,
    /// `τ⁺` in seconds, relaxation toward `ω_m`.
    pub rise: f64,
}

impl Default for LcTimeConstants {
    fn default() -> Self {
        Self {
            decay: 29e-3,
            rise: 9e-3,
        }
    }
}

impl LcTimeConstants {
    pub fn new(decay: f64, rise: f64) -> Result<Self> {
        if !(decay > 0.0 && rise > 0.0) {
            return Err(Error::domain(format!(
                "LC time constants must be positive, got τ⁻={decay}, τ⁺={rise}"
            )));
        }
        Ok(Self { decay, rise })
    }
}

/// Static parameters shared by every cell of a panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcParams {
    pub tau: LcTimeConstants,
    /// `ω_m`, the largest phase any cell can hold.
    pub max_phase: f64,
    /// Slot duration `t_s` in seconds.
    pub slot_duration: f64,
    /// Clamping margin `ε`.
    pub margin: f64,
}

impl Default for LcParams {
    fn default() -> Self {
        Self {
            tau: LcTimeConstants::default(),
            max_phase: 2.0 * PI,
            slot_duration: 10e-3,
            margin: PHASE_EPS,
        }
    }
}

impl LcParams {
    pub fn validate(&self) -> Result<()> {
        LcTimeConstants::new(self.tau.decay, self.tau.rise)?;
        if !(self.slot_duration > 0.0) {
            return Err(Error::domain("slot duration must be positive"));
        }
        if !(self.margin > 0.0 && 2.0 * self.margin < self.max_phase) {
            return Err(Error::domain("phase margin must lie in (0, ω_m / 2)"));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        self.margin
    }

    pub fn upper(&self) -> f64 {
        self.max_phase - self.margin
    }

    /// Clamps a phase into `[ε, ω_m − ε]`.
    pub fn clamp(&self, phase: f64) -> f64 {
        phase.clamp(self.lower(), self.upper())
    }

    fn check_interior(&self, phase: f64, what: &str) -> Result<()> {
        let tol = BOUND_TOL * self.max_phase;
        if phase >= self.lower() - tol && phase <= self.upper() + tol {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} phase {phase} outside [{}, {}]",
                self.lower(),
                self.upper()
            )))
        }
    }
}

/// Interval of phases a cell can reach within a time budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBounds {
    pub min: f64,
    pub max: f64,
}

impl PhaseBounds {
    pub fn contains(&self, phase: f64, tol: f64) -> bool {
        phase >= self.min - tol && phase <= self.max + tol
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// Configuration time `t_c` and serving time `t_k` of one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTiming {
    pub config_time: f64,
    pub serving_time: f64,
}

impl SlotTiming {
    /// Builds the split of a slot of length `slot_duration` after `config_time`
    /// seconds of tuning. Fails unless `0 ≤ config_time ≤ slot_duration`.
    pub fn new(config_time: f64, slot_duration: f64) -> Result<Self> {
        if !(config_time >= 0.0 && config_time <= slot_duration) {
            return Err(Error::Constraint(format!(
                "configuration time {config_time} s outside [0, {slot_duration}] s"
            )));
        }
        Ok(Self {
            config_time,
            serving_time: slot_duration - config_time,
        })
    }

    /// A slot spent entirely serving.
    pub fn instant(slot_duration: f64) -> Self {
        Self {
            config_time: 0.0,
            serving_time: slot_duration,
        }
    }
}

/// Bounds reachable from `start` within `budget` seconds.
pub fn phase_bounds(start: f64, budget: f64, max_phase: f64, tau: &LcTimeConstants) -> Result<PhaseBounds> {
    if !(budget >= 0.0) {
        return Err(Error::domain(format!("time budget must be non-negative, got {budget}")));
    }
    Ok(PhaseBounds {
        min: start * (-budget / tau.decay).exp(),
        max: start - (max_phase - start) * (-budget / tau.rise).exp_m1(),
    })
}

/// Time for a single cell to move from `start` to `target`.
pub fn element_config_time(start: f64, target: f64, params: &LcParams) -> Result<f64> {
    params.check_interior(start, "start")?;
    params.check_interior(target, "target")?;
    let (start, target) = (params.clamp(start), params.clamp(target));
    let t = if target > start {
        params.tau.rise * ((params.max_phase - start) / (params.max_phase - target)).ln()
    } else if target < start {
        params.tau.decay * (start / target).ln()
    } else {
        0.0
    };
    Ok(t.max(0.0))
}

/// Phase of a cell `t` seconds after it started moving from `start` toward
/// `target`; it stops once the target is reached.
pub fn phase_at(start: f64, target: f64, params: &LcParams, t: f64) -> f64 {
    if target > start {
        let free = start - (params.max_phase - start) * (-t / params.tau.rise).exp_m1();
        free.min(target)
    } else if target < start {
        let free = start * (-t / params.tau.decay).exp();
        free.max(target)
    } else {
        start
    }
}

/// Samples the transition from `start` toward `target` at each of `times`.
pub fn transition_trajectory(start: f64, target: f64, params: &LcParams, times: &[f64]) -> Vec<f64> {
    times.iter().map(|&t| phase_at(start, target, params, t)).collect()
}

/// Effective rate `(t_k / t_s) B log₂(1 + SNR)` in bit/s.
pub fn effective_rate(snr: f64, timing: &SlotTiming, slot_duration: f64, bandwidth: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::domain(format!("SNR must be non-negative, got {snr}")));
    }
    if !(bandwidth > 0.0) || !(slot_duration > 0.0) {
        return Err(Error::domain("bandwidth and slot duration must be positive"));
    }
    Ok(timing.serving_time / slot_duration * bandwidth * (1.0 + snr).log2())
}

/// Per-column phases of an LC panel together with its timing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelState {
    phases: Vec<f64>,
    params: LcParams,
}

impl PanelState {
    /// Creates a panel, clamping every phase into the admissible interior.
    pub fn new(phases: Vec<f64>, params: LcParams) -> Result<Self> {
        params.validate()?;
        if phases.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("panel phases must be finite"));
        }
        let phases = phases.into_iter().map(|w| params.clamp(w)).collect();
        Ok(Self { phases, params })
    }

    /// Uniformly random phases in `[ε, ω_m − ε]`.
    pub fn random<R: Rng + ?Sized>(len: usize, params: LcParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let phases = (0..len)
            .map(|_| rng.random_range(params.lower()..=params.upper()))
            .collect();
        Ok(Self { phases, params })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn params(&self) -> &LcParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn set_phases(&mut self, phases: &[f64]) -> Result<()> {
        Error::check_dim("panel phases", self.phases.len(), phases.len())?;
        for (dst, src) in self.phases.iter_mut().zip(phases) {
            *dst = self.params.clamp(*src);
        }
        Ok(())
    }

    /// Raw reachable bounds per column after `budget` seconds.
    pub fn reachable_bounds(&self, budget: f64) -> Result<Vec<PhaseBounds>> {
        self.phases
            .iter()
            .map(|&w| phase_bounds(w, budget, self.params.max_phase, &self.params.tau))
            .collect()
    }

    /// Reachable bounds intersected with the clamped interior.
    pub fn feasible_bounds(&self, budget: f64) -> Result<Vec<PhaseBounds>> {
        Ok(self
            .reachable_bounds(budget)?
            .into_iter()
            .map(|b| PhaseBounds {
                min: b.min.max(self.params.lower()),
                max: b.max.min(self.params.upper()),
            })
            .collect())
    }

    /// Panel configuration time for moving every column to `targets`.
    ///
    /// Every target must be reachable within one slot; the first offending
    /// column is reported otherwise.
    pub fn config_time(&self, targets: &[f64]) -> Result<SlotTiming> {
        Error::check_dim("target phases", self.phases.len(), targets.len())?;
        let t_s = self.params.slot_duration;
        let tol = BOUND_TOL * self.params.max_phase;
        let mut t_c: f64 = 0.0;
        for (col, (&start, &target)) in self.phases.iter().zip(targets).enumerate() {
            let bounds = phase_bounds(start, t_s, self.params.max_phase, &self.params.tau)?;
            if !bounds.contains(target, tol) {
                return Err(Error::Constraint(format!(
                    "column {col}: target {target:.6} rad unreachable from {start:.6} rad \
                     within one slot (bounds [{:.6}, {:.6}])",
                    bounds.min, bounds.max
                )));
            }
            let t = element_config_time(start, target, &self.params)
                .map_err(|e| Error::Constraint(format!("column {col}: {e}")))?;
            t_c = t_c.max(t);
        }
        // Targets on the reachable boundary may overshoot by rounding.
        SlotTiming::new(t_c.min(t_s), t_s)
    }

    /// Moves to `targets` (which must be reachable) and returns the slot timing.
    pub fn apply(&mut self, targets: &[f64]) -> Result<SlotTiming> {
        let timing = self.config_time(targets)?;
        self.set_phases(targets)?;
        Ok(timing)
    }

    /// Tunes every column toward `targets` for at most one slot.
    ///
    /// Columns that cannot finish stop wherever the relaxation left them; the
    /// configuration time is capped at `t_s`.
    pub fn relax_toward(&mut self, targets: &[f64]) -> Result<SlotTiming> {
        Error::check_dim("target phases", self.phases.len(), targets.len())?;
        let t_s = self.params.slot_duration;
        let mut t_c: f64 = 0.0;
        for (phase, &target) in self.phases.iter_mut().zip(targets) {
            let target = self.params.clamp(target);
            let needed = element_config_time(*phase, target, &self.params)?;
            let halt = needed.min(t_s);
            *phase = if needed <= t_s {
                target
            } else {
                self.params.clamp(phase_at(*phase, target, &self.params, halt))
            };
            t_c = t_c.max(halt);
        }
        SlotTiming::new(t_c, t_s)
    }
}
