#![allow(dead_code)]

use ppimce::arith::Modulus;
use ppimce::gc::{Block, GlobalDelta};
use ppimce::isa::layout::{self, DATA_BASE};
use ppimce::isa::{CInstKind, Instr, KernelParams};
use ppimce::sim::{ArchProfile, CoreState};

pub const A: u32 = DATA_BASE as u32;
pub const B: u32 = DATA_BASE as u32 + 4;
pub const D: u32 = DATA_BASE as u32 + 8;

pub fn gc_core(delta: GlobalDelta) -> CoreState {
    CoreState::for_gc(&ArchProfile::default(), delta).unwrap()
}

pub fn he_core(params: &KernelParams) -> CoreState {
    CoreState::for_he(&ArchProfile::default(), params).unwrap()
}

pub fn pack2(lo: u64, hi: u64) -> u128 {
    lo as u128 | ((hi as u128) << 64)
}

pub fn lanes2(v: u128) -> [u64; 2] {
    [v as u64, (v >> 64) as u64]
}

/// Runs an HE kernel on two coefficient lanes; `b` holds `[b, b_next]` rows.
pub fn run_he(core: &mut CoreState, kind: CInstKind, a: [u64; 2], b: [u64; 2], b_next: [u64; 2]) -> ([u64; 2], [u64; 2], u64) {
    core.write_row(A as usize, pack2(a[0], a[1])).unwrap();
    core.write_row(B as usize, pack2(b[0], b[1])).unwrap();
    core.write_row(B as usize + 1, pack2(b_next[0], b_next[1])).unwrap();
    let out = core.run_cinst(&Instr::new(kind, D, A, B)).unwrap();
    (
        lanes2(core.read_row(D as usize).unwrap()),
        lanes2(core.read_row(D as usize + 1).unwrap()),
        out.cycles,
    )
}

/// Runs HALFGATE for one AND gate; returns (C0, TG, TE, cycles).
pub fn run_halfgate(core: &mut CoreState, a0: Block, b0: Block, gate_index: usize) -> (Block, Block, Block, u64) {
    core.write_row(A as usize, a0.0).unwrap();
    core.write_row(B as usize, b0.0).unwrap();
    core.write_row(D as usize + layout::HG_TWEAK as usize, 2 * gate_index as u128).unwrap();
    let out = core.run_cinst(&Instr::new(CInstKind::HalfGate, D, A, B)).unwrap();
    let r = |o: u16| Block(core.read_row(D as usize + o as usize).unwrap());
    (r(layout::HG_OUT), r(layout::HG_TG), r(layout::HG_TE), out.cycles)
}

pub fn moduli() -> Vec<Modulus> {
    vec![
        Modulus::general(1_073_479_681).unwrap(),
        Modulus::general(12289).unwrap(),
        Modulus::pow_two(16).unwrap(),
        Modulus::pow_two_minus_one(13).unwrap(),
        Modulus::pow_two_plus_one(16).unwrap(),
        Modulus::pow_two_plus_one(30).unwrap(),
    ]
}
