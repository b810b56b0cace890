//! Instruction encodings, micro-instruction words and micro-programs.

pub mod cinst;
pub mod kernels;
pub mod layout;
pub mod micro;
pub mod program;

pub use cinst::{assemble, disassemble, CInst, CInstKind, Instr, CUSTOM0_OPCODE};
pub use kernels::{cost_table, microprogram_for, CostEntry, KernelParams, Reduction, FREEXOR_CYCLES, HALFGATE_CYCLES};
pub use micro::{Addr, AddrMode, CemField, CemFunc, LutField, MicroInstruction, ShiftFunc, ShifterField};
pub use program::{lut_write, uim_write, MicroProgram, UpdateDescriptor, LUT_ELEMENTS, LUT_ENTRIES, UIM_BYTES, UIM_WORDS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsaError {
    #[error("invalid {field} function code {code}")]
    InvalidCode { field: &'static str, code: u8 },
    #[error("{field} value {value} out of range")]
    FieldRange { field: &'static str, value: u64 },
    #[error("unknown instruction word {0:#010x}")]
    UnknownInstruction(u32),
    #[error("line {line}: {msg}")]
    Asm { line: usize, msg: String },
    #[error("container: {0}")]
    Container(String),
    #[error("{what} capacity exceeded: need {need}, have {have}")]
    Capacity { what: &'static str, need: usize, have: usize },
    #[error("{0} is not a function instruction")]
    NotAFunction(CInstKind),
    #[error("{0} needs kernel parameters")]
    MissingModulus(CInstKind),
    #[error("unsupported modulus: {0}")]
    UnsupportedModulus(String),
}
