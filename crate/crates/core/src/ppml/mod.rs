//! Two-party inference: linear layers under CKKS, non-linear layers in
//! garbled circuits, additive shares mod `p` in between.

mod channel;
mod ledger;
mod message;
mod party;
mod run;

pub use channel::{ideal_ot, Channel};
pub use ledger::{
    bandwidth_curve, default_bandwidths, gc_layer_bytes, parse_bandwidths, BandwidthPreset, CommLedger, CommPhase,
    GcLayerBytes,
};
pub use message::{read_transcript, write_transcript, write_transcript_pair, Message, MessageKind, Party, FRAME_HEADER};
pub use party::{Client, PublicPhase, PublicPlan, Server};
pub use run::{gc_phase_cycles, run_inference, InferenceCost, InferenceResult, ShareCheckpoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::{CompileError, HeBackend};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("{what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("out of order: {0}")]
    Order(String),
    #[error("decode failure: {0}")]
    Decode(String),
    #[error("level budget exceeded: {0}")]
    LevelBudget(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Ckks(#[from] crate::ckks::CkksError),
    #[error(transparent)]
    Gc(#[from] crate::gc::GcError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Bytes the OT functionality returns per evaluator wire.
    pub ot_bytes_per_wire: usize,
    /// log2 of the scale the client encrypts its share at.
    pub input_scale_bits: u32,
    pub backend: HeBackend,
    /// Largest distance from an integer the client accepts when decoding.
    pub decode_tolerance: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            ot_bytes_per_wire: 32,
            input_scale_bits: 24,
            backend: HeBackend::Reference,
            decode_tolerance: 0.25,
        }
    }
}

impl ProtocolConfig {
    pub fn input_scale(&self) -> f64 {
        2f64.powi(self.input_scale_bits as i32)
    }
}
