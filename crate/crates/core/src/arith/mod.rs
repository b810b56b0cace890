//! Integer kernels in the form the IMC core evaluates them.
//!
//! Everything here is word-oriented: subtraction is a NOT followed by an
//! ADD with carry-in, conditional corrections are masks produced by sign
//! extension, and multiplication bottoms out in 4-bit table lookups. The
//! results are always the exact mathematical values; the shape of the
//! computation is what the micro-programs in [`crate::isa::kernels`] mirror.

mod karatsuba;
mod modulus;
mod reduce;

pub use karatsuba::{karatsuba_mul, karatsuba_mul_counted, LutMultiplier};
pub use modulus::{Modulus, ModulusKind, WordWidth};
pub use reduce::{barrett_reduce, mod_addsub, mul_mod, special_reduce, AddSub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("operand {value} out of range for modulus {modulus}")]
    OperandOutOfRange { value: u128, modulus: u64 },
    #[error("special reduction needs a 2^k, 2^k-1 or 2^k+1 modulus")]
    UnsupportedKind,
    #[error("unsupported operand width {0} (expected 4, 8, 16, 32 or 64)")]
    UnsupportedWidth(u32),
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
}

pub type Result<T> = std::result::Result<T, ArithError>;
