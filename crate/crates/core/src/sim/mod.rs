//! Cycle-level model of one in-memory computing core.

mod core;
mod setup;
pub mod profile;
pub mod transfer;
pub mod units;

pub use self::core::{CInstOutcome, CoreState, Regs, TraceEvent, UnitCounters};
pub use profile::{ArchProfile, EnergyModel};
pub use transfer::{Direction, MemoryTransferModel};
pub use units::{cem_op, shifter_op, CemResult, LutFabric};

use thiserror::Error;

use crate::isa::{CInstKind, IsaError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("row {row} outside the {rows}-row CEM")]
    InvalidAddress { row: usize, rows: usize },
    #[error("READ destination must be a latch")]
    ReadTarget,
    #[error("shift amount needs CEM[3] disabled")]
    ShiftAmountUnavailable,
    #[error("LUT element {0} does not exist")]
    LutElement(usize),
    #[error("LUT element {0} not loaded")]
    LutNotLoaded(usize),
    #[error("no micro-program loaded for {0}")]
    ProgramNotLoaded(CInstKind),
    #[error("micro-instruction memory full: {need} words, {have} available")]
    UimFull { need: usize, have: usize },
    #[error("profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Isa(#[from] IsaError),
}

/// Writes trace events as JSON lines.
pub fn write_trace_jsonl<W: std::io::Write>(events: &[TraceEvent], mut w: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
