//! Micro-program generators for the function instructions.

use serde::{Deserialize, Serialize};

use super::cinst::CInstKind;
use super::layout::*;
use super::micro::{Addr, CemField, CemFunc, LutField, MicroInstruction, ShiftFunc, ShifterField};
use super::program::MicroProgram;
use super::IsaError;
use crate::arith::{Modulus, ModulusKind};

pub const FREEXOR_CYCLES: usize = 3;
pub const HALFGATE_CYCLES: usize = 45;

const L0: Addr = Addr::latch(0);
const L1: Addr = Addr::latch(1);
const L2: Addr = Addr::latch(2);
const L3: Addr = Addr::latch(3);

use CemFunc::*;

fn abs(row: u16) -> Addr {
    Addr::abs(row)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reduction {
    Barrett,
    /// Multiplication-free reduction for 2^k and 2^k±1.
    Special,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelParams {
    pub modulus: Modulus,
    pub reduction: Reduction,
}

impl KernelParams {
    /// Special reduction when the modulus allows it, Barrett otherwise.
    pub fn for_modulus(modulus: Modulus) -> Self {
        let reduction = if modulus.kind() == ModulusKind::General {
            Reduction::Barrett
        } else {
            Reduction::Special
        };
        KernelParams { modulus, reduction }
    }

    pub fn barrett(modulus: Modulus) -> Self {
        KernelParams { modulus, reduction: Reduction::Barrett }
    }

    fn check(&self) -> Result<(), IsaError> {
        if self.modulus.value() >= 1 << 31 {
            return Err(IsaError::UnsupportedModulus(format!(
                "{} exceeds the 31-bit kernel operand width",
                self.modulus.value()
            )));
        }
        if self.reduction == Reduction::Special && self.modulus.kind() == ModulusKind::General {
            return Err(IsaError::UnsupportedModulus(format!(
                "{} has no special form",
                self.modulus.value()
            )));
        }
        Ok(())
    }
}

// Fixed rows inside the scratch region.
const LEAF_T: u16 = SCRATCH_BASE;
const KA: u16 = SCRATCH_BASE + 1;
const KB: u16 = SCRATCH_BASE + 2;
const KZ: u16 = SCRATCH_BASE + 3;
const RX: u16 = SCRATCH_BASE + 4;
const T1: u16 = SCRATCH_BASE + 5;
const T2: u16 = SCRATCH_BASE + 6;
const T3: u16 = SCRATCH_BASE + 7;
const T4: u16 = SCRATCH_BASE + 8;
const T5: u16 = SCRATCH_BASE + 9;
const T6: u16 = SCRATCH_BASE + 10;
const STACK_BASE: u16 = SCRATCH_BASE + 11;

struct Asm {
    words: Vec<MicroInstruction>,
    sp: u16,
}

impl Asm {
    fn new() -> Self {
        Asm { words: Vec::new(), sp: STACK_BASE }
    }

    fn word(ops: &[(CemFunc, Addr, Addr)]) -> MicroInstruction {
        let mut m = MicroInstruction::NOP;
        for (i, &(f, a, b)) in ops.iter().enumerate() {
            m.cem[i] = CemField::op(f, a, b);
        }
        m
    }

    fn shifted(mut m: MicroInstruction, func: ShiftFunc, amount: Option<u32>) -> MicroInstruction {
        m.shifter = ShifterField { enable: true, func };
        if let Some(k) = amount {
            assert!(!m.cem[3].enable, "shift amount needs CEM[3] free");
            m.cem[3] = CemField::amount(k as u8);
        }
        m
    }

    fn emit(&mut self, m: MicroInstruction) {
        self.words.push(m);
    }

    fn ops(&mut self, ops: &[(CemFunc, Addr, Addr)]) {
        self.emit(Self::word(ops));
    }

    fn shift_ops(&mut self, func: ShiftFunc, amount: Option<u32>, ops: &[(CemFunc, Addr, Addr)]) {
        self.emit(Self::shifted(Self::word(ops), func, amount));
    }

    fn lane64(&mut self) {
        self.shift_ops(ShiftFunc::Lane64, None, &[]);
    }

    fn alloc(&mut self) -> Addr {
        let r = self.sp;
        self.sp += 1;
        assert!(self.sp <= DATA_BASE, "kernel scratch overflow");
        abs(r)
    }

    fn copy(&mut self, src: Addr, dst: Addr) {
        self.ops(&[(Read, src, L0), (Write, L0, dst)]);
    }

    /// dst = a f b
    fn op3(&mut self, f: CemFunc, a: Addr, b: Addr, dst: Addr) {
        self.ops(&[(Read, b, L0), (f, a, L0), (Write, L0, dst)]);
    }

    /// dst = a - b
    fn sub3(&mut self, a: Addr, b: Addr, dst: Addr) {
        self.ops(&[(Read, b, L0), (Not, L0, L0), (AddC, a, L0), (Write, L0, dst)]);
    }

    fn shift3(&mut self, func: ShiftFunc, k: u32, src: Addr, dst: Addr) {
        self.shift_ops(func, Some(k), &[(Read, src, L0), (Write, L0, dst)]);
    }

    /// dst += (src << k) [& mask]
    fn shl_add_into(&mut self, k: u32, src: Addr, mask: Option<Addr>, dst: Addr) {
        match mask {
            Some(m) => self.shift_ops(ShiftFunc::Shl, Some(k), &[(Read, src, L0), (And, m, L0), (Add, L0, dst)]),
            None => self.shift_ops(ShiftFunc::Shl, Some(k), &[(Read, src, L0), (Add, L0, dst)]),
        }
    }

    /// dst = sign(d) ? x : d
    fn select_sign(&mut self, d: Addr, x: Addr, dst: Addr) {
        self.shift_ops(ShiftFunc::MsbExtend, None, &[(Read, d, L0), (Read, x, L2), (Xor, d, L2), (And, L0, L2)]);
        self.ops(&[(Xor, d, L2), (Write, L2, dst)]);
    }

    /// dst = x >= q ? x - q : x
    fn cond_sub_q(&mut self, x: Addr, dst: Addr, tmp: Addr) {
        self.sub3(x, abs(Q), tmp);
        self.select_sign(tmp, x, dst);
    }

    fn modadd(&mut self, a: Addr, b: Addr, dst: Addr) {
        self.op3(Add, a, b, abs(T1));
        self.cond_sub_q(abs(T1), dst, abs(T2));
    }

    fn modsub(&mut self, a: Addr, b: Addr, dst: Addr) {
        self.sub3(a, b, abs(T1));
        self.shift_ops(
            ShiftFunc::MsbExtend,
            None,
            &[(Read, abs(T1), L0), (And, abs(Q), L0), (Add, abs(T1), L0), (Write, L0, dst)],
        );
    }

    /// z = a * b for a, b < 16 through the LUT multiply table.
    fn leaf(&mut self, a: Addr, b: Addr, z: Addr) {
        self.shift_ops(ShiftFunc::Shl, Some(4), &[(Read, a, L0), (Or, b, L0), (Write, L0, abs(LEAF_T))]);
        let mut m = Self::word(&[(Read, abs(LEAF_T), L0), (Write, L0, z)]);
        m.lut = LutField { enable: true, mix: false };
        self.emit(m);
    }

    fn kara(&mut self, a: Addr, b: Addr, z: Addr, n: u32) {
        if n == 4 {
            self.leaf(a, b, z);
            return;
        }
        let h = n / 2;
        let m = abs(mask_row(h));
        let mark = self.sp;
        let [al, ah, bl, bh, z0, z2, sa, sb, ca, cb, zm, ma, mb, cc] = std::array::from_fn(|_| self.alloc());
        self.op3(And, m, a, al);
        self.shift3(ShiftFunc::Shr, h, a, ah);
        self.op3(And, m, b, bl);
        self.shift3(ShiftFunc::Shr, h, b, bh);
        self.kara(al, bl, z0, h);
        self.kara(ah, bh, z2, h);
        self.op3(Add, al, ah, sa);
        self.shift3(ShiftFunc::Shr, h, sa, ca);
        self.ops(&[(And, m, sa)]);
        self.op3(Add, bl, bh, sb);
        self.shift3(ShiftFunc::Shr, h, sb, cb);
        self.ops(&[(And, m, sb)]);
        self.kara(sa, sb, zm, h);
        // Fold the carry bits of the half sums back in.
        self.sub3(abs(ZERO), ca, ma);
        self.shl_add_into(h, sb, Some(ma), zm);
        self.sub3(abs(ZERO), cb, mb);
        self.shl_add_into(h, sa, Some(mb), zm);
        self.op3(And, ca, cb, cc);
        self.shl_add_into(2 * h, cc, None, zm);
        self.sub3(zm, z0, zm);
        self.sub3(zm, z2, zm);
        self.shift_ops(ShiftFunc::Shl, Some(h), &[(Read, zm, L0), (Add, z0, L0), (Write, L0, z)]);
        self.shl_add_into(2 * h, z2, None, z);
        self.sp = mark;
    }

    /// KZ = KA * KB for 32-bit operands.
    fn mult(&mut self) {
        self.kara(abs(KA), abs(KB), abs(KZ), 32);
    }

    /// dst = KZ mod q, KZ < q^2.
    fn reduce(&mut self, p: &KernelParams, dst: Addr) {
        let x = abs(KZ);
        match (p.reduction, p.modulus.kind()) {
            (Reduction::Barrett, _) => {
                let w = p.modulus.width();
                self.copy(x, abs(RX));
                self.shift3(ShiftFunc::Shr, w - 1, abs(RX), abs(KA));
                self.copy(abs(MU), abs(KB));
                self.mult();
                self.shift3(ShiftFunc::Shr, w + 1, abs(KZ), abs(KA));
                self.copy(abs(Q), abs(KB));
                self.mult();
                self.sub3(abs(RX), abs(KZ), abs(T3));
                self.cond_sub_q(abs(T3), abs(T3), abs(T4));
                self.cond_sub_q(abs(T3), dst, abs(T4));
            }
            (Reduction::Special, ModulusKind::PowTwo(_)) => {
                self.op3(And, abs(MASK_K), x, dst);
            }
            (Reduction::Special, ModulusKind::PowTwoMinusOne(k)) => {
                self.op3(And, abs(MASK_K), x, abs(T3));
                self.shift3(ShiftFunc::Shr, k, x, abs(T4));
                self.ops(&[(Add, abs(T4), abs(T3))]);
                self.cond_sub_q(abs(T3), dst, abs(T4));
            }
            (Reduction::Special, ModulusKind::PowTwoPlusOne(k)) => {
                let (low, high, a, t) = (abs(T3), abs(T4), abs(T5), abs(RX));
                self.op3(And, abs(MASK_K), x, low);
                self.shift3(ShiftFunc::Shr, k, x, high);
                self.sub3(low, high, a);
                self.sub3(abs(Q), high, t);
                self.ops(&[(Add, low, t)]);
                // r = sign(a) ? t : a, then one more +q if still negative.
                self.select_sign(a, t, t);
                self.shift_ops(ShiftFunc::MsbExtend, None, &[(Read, t, L0), (And, abs(Q), L0), (Add, t, L0), (Write, L0, dst)]);
            }
            (Reduction::Special, ModulusKind::General) => unreachable!("checked by KernelParams"),
        }
    }

    fn finish(self, kind: CInstKind) -> MicroProgram {
        MicroProgram { kind, words: self.words }
    }
}

fn freexor() -> MicroProgram {
    let mut a = Asm::new();
    a.ops(&[(Read, Addr::rs1(0), L0)]);
    a.ops(&[(Xor, Addr::rs2(0), L0)]);
    a.ops(&[(Write, L0, Addr::rd(0))]);
    a.finish(CInstKind::FreeXor)
}

/// Two paired hash passes over `(x, x ^ Δ)` through lanes L0/L1; the
/// round-0 key is pre-folded into the staged tweak rows.
fn hash_pass(a: &mut Asm, label: Addr, tweak_row: u16, save: [u16; 2]) {
    let (s0, s1) = (abs(save[0]), abs(save[1]));
    let tw = abs(tweak_row);
    a.ops(&[(Read, label, L0), (Read, abs(DELTA), L1), (Xor, label, L1)]);
    a.shift_ops(ShiftFunc::Double, None, &[(Write, L0, s0), (Write, L1, s1), (Xor, tw, L0), (Xor, tw, L1)]);
    for r in 1..=10u16 {
        let rk = abs(RK + r);
        let mut m = Asm::shifted(Asm::word(&[(Xor, rk, L0), (Xor, rk, L1)]), ShiftFunc::ShiftRows, None);
        m.lut = LutField { enable: true, mix: r < 10 };
        a.emit(m);
    }
    a.ops(&[(Xor, s0, L0), (Xor, s1, L1), (Write, L0, s0), (Write, L1, s1)]);
}

fn halfgate() -> MicroProgram {
    let mut a = Asm::new();
    let [ha0, ha1, hb0, hb1] = HASH_SAVE.map(abs);
    let (ma, mb) = (abs(MASK_PA), abs(MASK_PB));
    a.ops(&[
        (Read, Addr::rd(HG_TWEAK), L2),
        (Xor, abs(RK), L2),
        (Write, L2, abs(TW0)),
        (Xor, abs(ONE), L2),
    ]);
    a.ops(&[(Write, L2, abs(TW1))]);
    // The TW1 write shares the first load cycle of pass one.
    let first = a.words.pop().expect("just pushed");
    hash_pass(&mut a, Addr::rs1(0), TW0, [HASH_SAVE[0], HASH_SAVE[1]]);
    let load = a.words.len() - 13;
    a.words[load].cem[3] = first.cem[0];
    hash_pass(&mut a, Addr::rs2(0), TW1, [HASH_SAVE[2], HASH_SAVE[3]]);
    a.shift_ops(
        ShiftFunc::LsbExtend,
        None,
        &[(Read, Addr::rs2(0), L0), (Read, Addr::rs1(0), L1), (Write, L0, mb), (Write, L1, ma)],
    );
    a.ops(&[(Read, hb0, L0), (Read, ha0, L1), (Xor, hb1, L0), (Xor, ha1, L1)]);
    a.ops(&[(Read, Addr::rs1(0), L2), (Read, abs(DELTA), L3), (Xor, L0, L2), (And, mb, L3)]);
    a.ops(&[(Write, L2, Addr::rd(HG_TE)), (And, mb, L0), (Xor, L3, L1), (Write, L1, Addr::rd(HG_TG))]);
    a.ops(&[(And, ma, L1), (Xor, hb0, L0), (Xor, ha0, L1), (Xor, L0, L1)]);
    a.ops(&[(Write, L1, Addr::rd(HG_OUT))]);
    debug_assert_eq!(a.words.len(), 33);
    while a.words.len() < HALFGATE_CYCLES {
        a.emit(MicroInstruction::NOP);
    }
    a.finish(CInstKind::HalfGate)
}

fn he_kernel(kind: CInstKind, p: &KernelParams) -> MicroProgram {
    let mut a = Asm::new();
    let (rs1, rs2) = (Addr::rs1(0), Addr::rs2(0));
    a.lane64();
    match kind {
        CInstKind::PolyAdd => a.modadd(rs1, rs2, Addr::rd(0)),
        CInstKind::PolySub => a.modsub(rs1, rs2, Addr::rd(0)),
        CInstKind::PolyPerm => {
            // rd = rs2 ? -rs1 : rs1, with rs2 holding an all-ones lane mask.
            a.modsub(abs(ZERO), rs1, abs(T3));
            a.ops(&[(Read, abs(T3), L0), (Xor, rs1, L0), (And, rs2, L0), (Xor, rs1, L0)]);
            a.ops(&[(Write, L0, Addr::rd(0))]);
        }
        CInstKind::PolyMul => {
            a.copy(rs1, abs(KA));
            a.copy(rs2, abs(KB));
            a.mult();
            a.reduce(p, Addr::rd(0));
        }
        CInstKind::Ntt => {
            // (a, b, w) -> (a + w·b, a - w·b); w sits in the row after b.
            a.copy(rs2, abs(KA));
            a.copy(Addr::rs2(1), abs(KB));
            a.mult();
            a.reduce(p, abs(T6));
            a.modadd(rs1, abs(T6), abs(T3));
            a.modsub(rs1, abs(T6), abs(T4));
            a.copy(abs(T3), Addr::rd(0));
            a.copy(abs(T4), Addr::rd(1));
        }
        CInstKind::Intt => {
            // (a, b, w) -> (a + b, (a - b)·w)
            a.modadd(rs1, rs2, abs(T6));
            a.modsub(rs1, rs2, abs(KA));
            a.copy(Addr::rs2(1), abs(KB));
            a.mult();
            a.reduce(p, Addr::rd(1));
            a.copy(abs(T6), Addr::rd(0));
        }
        _ => unreachable!("not an HE kernel"),
    }
    a.finish(kind)
}

/// Micro-program for a function instruction. HE kinds need `params`.
pub fn microprogram_for(kind: CInstKind, params: Option<&KernelParams>) -> Result<MicroProgram, IsaError> {
    match kind {
        CInstKind::FreeXor => Ok(freexor()),
        CInstKind::HalfGate => Ok(halfgate()),
        k if k.is_he() => {
            let p = params.ok_or(IsaError::MissingModulus(kind))?;
            p.check()?;
            Ok(he_kernel(k, p))
        }
        k => Err(IsaError::NotAFunction(k)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEntry {
    pub kind: CInstKind,
    pub cycles: usize,
    pub footprint_words: usize,
    pub unit_ops: usize,
}

/// Program lengths for every function instruction under `params`.
pub fn cost_table(params: &KernelParams) -> Result<Vec<CostEntry>, IsaError> {
    CInstKind::ALL
        .iter()
        .filter(|k| !k.is_update())
        .map(|&k| {
            let p = microprogram_for(k, Some(params))?;
            Ok(CostEntry { kind: k, cycles: p.len(), footprint_words: p.footprint_words(), unit_ops: p.unit_ops() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gc_lengths() {
        assert_eq!(microprogram_for(CInstKind::FreeXor, None).unwrap().len(), FREEXOR_CYCLES);
        assert_eq!(microprogram_for(CInstKind::HalfGate, None).unwrap().len(), HALFGATE_CYCLES);
        assert!(microprogram_for(CInstKind::PolyAdd, None).is_err());
        assert!(microprogram_for(CInstKind::UimWrite, None).is_err());
    }

    #[test]
    fn he_programs_fit_uim() {
        let q = Modulus::general(1_073_479_681).unwrap();
        for e in cost_table(&KernelParams::for_modulus(q)).unwrap() {
            assert!(e.footprint_words <= super::super::program::UIM_WORDS, "{e:?}");
        }
    }
}
