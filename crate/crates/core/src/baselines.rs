//! Reference controllers with perfect knowledge of the current slot's channels.

use std::f64::consts::PI;

use crate::channel::PhaseVector;
use crate::env::{optimal_column_phases, optimal_phases_for, EnvConfig, SlotOutcome};
use crate::error::Result;
use crate::lc_dynamics::{PanelState, SlotTiming};
use crate::scene::Snapshot;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalOutcome {
    /// Per-element co-phasing phases in `[0, 2π)`.
    pub phases: PhaseVector,
    pub outcome: SlotOutcome,
}

/// Instantaneous per-element co-phasing: the performance ceiling, serving
/// for the whole slot.
pub fn optimal_controller(snapshot: &Snapshot, cfg: &EnvConfig) -> Result<OptimalOutcome> {
    let phases = PhaseVector::new(optimal_phases_for(&snapshot.current), 2.0 * PI)?;
    let timing = SlotTiming::instant(cfg.lc.slot_duration);
    let outcome = SlotOutcome::evaluate(cfg, snapshot, &phases, timing)?;
    Ok(OptimalOutcome { phases, outcome })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealisticOutcome {
    /// Column phases reached when tuning stopped.
    pub achieved: Vec<f64>,
    /// Column phases the panel was steering toward.
    pub targets: Vec<f64>,
    pub outcome: SlotOutcome,
}

/// Column-wise tuning toward the co-phasing solution, halted after one slot.
///
/// `panel` carries the phases left over from the previous slot and is
/// updated in place.
pub fn realistic_controller(snapshot: &Snapshot, panel: &mut PanelState, cfg: &EnvConfig) -> Result<RealisticOutcome> {
    let targets: Vec<f64> = optimal_column_phases(&snapshot.current, &cfg.spec, cfg.reduction)?
        .into_iter()
        .map(|w| panel.params().clamp(w))
        .collect();
    let timing = panel.relax_toward(&targets)?;
    let outcome = SlotOutcome::evaluate_columns(cfg, snapshot, panel.phases(), timing)?;
    Ok(RealisticOutcome {
        achieved: panel.phases().to_vec(),
        targets,
        outcome,
    })
}
