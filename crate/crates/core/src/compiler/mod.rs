//! Lowering of GC netlists, HE programs and layer graphs into C-Inst streams.

mod alloc;
mod he;
mod netlist;
mod network;

pub use alloc::{AddressMap, Placement};
pub use he::{
    compile_he, HeBackend, HeCost, HeInput, HeMachine, HeOp, HeProgram, HeStep, HeStream, HeValue, KeyRef, OutputBinding,
    RowInit,
};
pub use netlist::{compile_netlist, garble_on_imc, CompiledNetlist, GarbleExecutor, ImcGarbling};
pub use network::{
    compile_network, concat_circuits, diagonal_matvec, mod_max, mod_relu_shift, Checkpoint, FixedPoint, Layer, LayerGraph, LinearPhase, NonLinearKind, NonLinearPhase,
    Phase, PhasePlan,
};

use thiserror::Error;

use crate::sim::ArchProfile;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("live set needs {need} CEM rows per core but profile {profile} has {have}; {}", fit_hint(.fits))]
    Capacity {
        need: usize,
        have: usize,
        profile: String,
        fits: Option<String>,
    },
    #[error("level underflow: {0}")]
    Level(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("register {0} used before definition")]
    Undefined(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Ckks(#[from] crate::ckks::CkksError),
    #[error(transparent)]
    Dispatch(#[from] crate::dispatch::DispatchError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Isa(#[from] crate::isa::IsaError),
    #[error(transparent)]
    Gc(#[from] crate::gc::GcError),
}

fn fit_hint(fits: &Option<String>) -> String {
    match fits {
        Some(p) => format!("profile {p} would fit"),
        None => "no known profile fits".into(),
    }
}

/// Built-in profiles, smallest memory first.
pub fn known_profiles() -> Vec<ArchProfile> {
    let mut v = vec![ArchProfile::default(), ArchProfile::gc_benchmark()];
    v.sort_by_key(|p| p.cem_bytes_per_core);
    v
}
