//! Half-gates garbling with free XOR over 128-bit labels.

pub mod aes;
mod block;
pub mod bristol;
pub mod builder;
mod circuit;
pub mod container;
mod garble;
mod hash;

pub use block::{Block, GlobalDelta};
pub use bristol::{parse_bristol, write_bristol};
pub use circuit::{split_words, Circuit, Gate, GateCounts, GateKind, WireId};
pub use garble::{
    decode, evaluate, evaluate_wires, garble, garble_and, garble_full, GarbledCircuit, Garbling,
    HalfGateRows, InputEncoding,
};
pub use hash::{aes_hash, AesHash};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GcError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("circuit contains a cycle")]
    Cyclic,
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("garbled table has {got} rows, circuit has {expected} AND gates")]
    TableSize { expected: usize, got: usize },
    #[error("modulus {p} does not fit in {bits} bits")]
    ModulusTooWide { bits: usize, p: u64 },
    #[error("container: {0}")]
    Container(String),
}
