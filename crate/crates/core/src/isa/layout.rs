//! Reserved CEM rows shared by every micro-program.
//!
//! Rows are 128 bits. Operand data lives at or above [`DATA_BASE`].

use crate::arith::{Modulus, ModulusKind};
use crate::gc::{aes::FIXED_KEY, Block};

/// Round keys of the fixed-key hash cipher, rows `RK..RK+11`.
pub const RK: u16 = 0;
pub const DELTA: u16 = 11;
/// The 128-bit integer 1 (flips the tweak's low bit).
pub const ONE: u16 = 12;
pub const TW0: u16 = 13;
pub const TW1: u16 = 14;
pub const HASH_SAVE: [u16; 4] = [15, 16, 17, 18];
pub const MASK_PA: u16 = 19;
pub const MASK_PB: u16 = 20;

pub const ZERO: u16 = 21;
pub const Q: u16 = 22;
pub const MU: u16 = 23;
pub const MASK_K: u16 = 24;
/// Low-half masks for Karatsuba splits at h = 16, 8, 4.
pub const MASK_H16: u16 = 25;
pub const MASK_H8: u16 = 26;
pub const MASK_H4: u16 = 27;
pub const SCRATCH_BASE: u16 = 28;
pub const DATA_BASE: u16 = 96;

/// Rows of the HALFGATE destination region: output zero label, the two
/// table rows, and the staged tweak `2·gate_index`.
pub const HG_OUT: u16 = 0;
pub const HG_TG: u16 = 1;
pub const HG_TE: u16 = 2;
pub const HG_TWEAK: u16 = 3;
pub const HG_ROWS: u32 = 4;

/// Lane width used by the HE kernels.
pub const HE_LANE_BITS: u32 = 64;

fn splat64(v: u64) -> u128 {
    (v as u128) | ((v as u128) << 64)
}

pub fn mask_row(h: u32) -> u16 {
    match h {
        16 => MASK_H16,
        8 => MASK_H8,
        4 => MASK_H4,
        _ => panic!("no mask row for split {h}"),
    }
}

/// Row contents required by the garbling kernels.
pub fn gc_constants(delta: Block) -> Vec<(u16, u128)> {
    let rks = crate::gc::aes::expand_key(&FIXED_KEY);
    let mut v: Vec<(u16, u128)> = rks
        .iter()
        .enumerate()
        .map(|(i, k)| (RK + i as u16, u128::from_le_bytes(*k)))
        .collect();
    v.push((DELTA, delta.0));
    v.push((ONE, 1));
    v
}

/// Row contents required by the HE kernels for modulus `m`, replicated in
/// both 64-bit lanes.
pub fn he_constants(m: &Modulus) -> Vec<(u16, u128)> {
    let q = m.value();
    let k = match m.kind() {
        ModulusKind::General => 64 - q.leading_zeros(),
        _ => m.special_exponent().expect("special modulus"),
    };
    let w = m.width();
    let mu = ((1u128 << (2 * w)) / q as u128) as u64;
    vec![
        (ZERO, 0),
        (Q, splat64(q)),
        (MU, splat64(mu)),
        (MASK_K, splat64((1u64 << k) - 1)),
        (MASK_H16, splat64(0xFFFF)),
        (MASK_H8, splat64(0xFF)),
        (MASK_H4, splat64(0xF)),
    ]
}
