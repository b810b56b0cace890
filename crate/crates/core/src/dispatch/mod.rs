//! IMC instruction scheduling: OA-CAM dependency tracking, the C-Inst bank,
//! GC computing-unit dispatch, HE broadcast and the butterfly-network NTT plan.

mod broadcast;
mod cam;
mod export;
mod schedule;

pub use broadcast::{
    execute_ntt_plan, he_broadcast, he_broadcast_exec, ntt_schedule, ntt_schedule_dir, BroadcastReport, Butterfly,
    NttPlan, NttStage, WordMove,
};
pub use cam::{CInstBank, OaCam, BANK_ENTRY_BYTES, CAM_ENTRY_BYTES, DEFAULT_CAPACITY_BYTES};
pub use export::{trace_dot, trace_jsonl};
pub use schedule::{
    run_program, CostReport, DispatchConfig, DispatchEvent, DispatchInst, Dispatcher, Executor,
    InstRecord, LaneExecutor, LatencyTable, Occupancy, ScheduleTrace, SubmitOutcome, TimingOnly,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::{CInstKind, IsaError};
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("C-Inst bank or OA-CAM full")]
    Backpressure,
    #[error("{0} is not dispatched to GC units")]
    NotGc(CInstKind),
    #[error("no latency known for {0}")]
    NoLatency(CInstKind),
    #[error("broadcast needs idle units")]
    Busy,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Isa(#[from] IsaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcUnitConfig {
    pub units: usize,
    pub cores_per_unit: usize,
}

impl Default for GcUnitConfig {
    fn default() -> Self {
        Self {
            units: 16,
            cores_per_unit: 512,
        }
    }
}

impl GcUnitConfig {
    pub fn total_cores(&self) -> usize {
        self.units * self.cores_per_unit
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        if self.units == 0 || self.cores_per_unit == 0 {
            return Err(DispatchError::Config(format!(
                "{} units × {} cores",
                self.units, self.cores_per_unit
            )));
        }
        Ok(())
    }
}
