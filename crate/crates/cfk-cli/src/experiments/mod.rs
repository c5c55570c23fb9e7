//! Experiment implementations. Each submodule exposes typed row
//! producers (used by the acceptance suite directly) plus a `run` that
//! writes the result files.

pub mod herding_demo;
pub mod mixture;
pub mod ope_sweep;
pub mod table1;
pub mod theorems;

/// Substream id for a trial: a fixed 64-slot stride per trial, so adding
/// trials never perturbs the streams of earlier ones.
pub(crate) fn stream_id(trial: u64, slot: u64) -> u64 {
    debug_assert!(slot < 64);
    trial * 64 + slot
}
