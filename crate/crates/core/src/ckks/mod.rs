//! Full-RNS CKKS over `Z_Q[X]/(X^N + 1)`.
//!
//! Polynomials live in the evaluation (NTT) domain between operations;
//! only key switching and rescaling drop to coefficients, one channel at a
//! time. Key switching decomposes by RNS limb and works over the base
//! extended by the special primes, whose product `P` is divided out after.

mod container;
mod encoding;
mod eval;
mod keys;
mod ntt;
mod params;
mod poly;
mod rns;

pub use container::{
    read_ciphertext, read_eval_keys, read_keys, read_params, write_ciphertext, write_eval_keys, write_keys, write_params,
};
pub use encoding::{decode, decode_complex, encode, encode_complex, Plaintext};
pub use eval::{slot_error, Ciphertext, Evaluator};
pub use keys::{galois_element, EvaluationKeys, KeySet, KeySwitchKey, SecretKey, ERROR_SIGMA, SECRET_WEIGHT};
pub use ntt::{ct_butterfly, gs_butterfly, ntt_invocations, reset_ntt_invocations, NttTables};
pub use params::{ntt_primes, RingDescriptor, RingParams};
pub use poly::{Domain, NttDirection, PolyOp, RnsPolynomial};
pub use rns::{rns_compose, rns_decompose};

pub(crate) use ntt::{invm, mulm};
pub(crate) use poly::galois_permutation;

use thiserror::Error;

use crate::arith::ArithError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CkksError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("level exhausted: {0}")]
    Level(String),
    #[error("scale mismatch: {a} vs {b}")]
    Scale { a: f64, b: f64 },
    #[error("missing rotation key for {0}")]
    MissingKey(i64),
    #[error("container: {0}")]
    Container(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

pub type Result<T> = std::result::Result<T, CkksError>;
