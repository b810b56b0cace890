//! Combinational behaviour of the CEM, shifter and LUT fabric.

use crate::gc::aes;
use crate::gc::Block;
use crate::isa::{CemFunc, ShiftFunc};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CemResult {
    pub value: u128,
    /// Carry-out per lane, lane 0 in bit 0.
    pub carry: u8,
}

fn lane_mask(bits: u32) -> u128 {
    if bits == 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

fn lanes(bits: u32) -> u32 {
    128 / bits
}

fn map_lanes(v: u128, bits: u32, f: impl Fn(u128) -> u128) -> u128 {
    let m = lane_mask(bits);
    (0..lanes(bits)).fold(0, |acc, i| {
        let sh = i * bits;
        acc | ((f((v >> sh) & m) & m) << sh)
    })
}

/// Two-operand CEM function on full rows. READ and WRITE pass `a` through.
pub fn cem_op(func: CemFunc, a: u128, b: u128, lane_bits: u32) -> CemResult {
    let plain = |value| CemResult { value, carry: 0 };
    match func {
        CemFunc::And => plain(a & b),
        CemFunc::Or => plain(a | b),
        CemFunc::Xor => plain(a ^ b),
        CemFunc::Not => plain(!a),
        CemFunc::Read | CemFunc::Write => plain(a),
        CemFunc::Add | CemFunc::AddC => {
            let cin = (func == CemFunc::AddC) as u128;
            let m = lane_mask(lane_bits);
            let mut value = 0;
            let mut carry = 0u8;
            for i in 0..lanes(lane_bits) {
                let sh = i * lane_bits;
                let (x, y) = ((a >> sh) & m, (b >> sh) & m);
                let (s, c) = if lane_bits == 128 {
                    let (s1, c1) = x.overflowing_add(y);
                    let (s2, c2) = s1.overflowing_add(cin);
                    (s2, c1 | c2)
                } else {
                    let s = x + y + cin;
                    (s & m, s >> lane_bits != 0)
                };
                value |= s << sh;
                carry |= (c as u8) << i;
            }
            CemResult { value, carry }
        }
    }
}

pub fn shifter_op(func: ShiftFunc, x: u128, amount: u32, lane_bits: u32) -> Result<u128, SimError> {
    let bytes = x.to_le_bytes();
    Ok(match func {
        ShiftFunc::Pass | ShiftFunc::Lane32 | ShiftFunc::Lane64 | ShiftFunc::Lane128 => x,
        ShiftFunc::ShiftRows => {
            let mut s = bytes;
            aes::shift_rows(&mut s);
            u128::from_le_bytes(s)
        }
        ShiftFunc::InvShiftRows => {
            let mut s = bytes;
            aes::inv_shift_rows(&mut s);
            u128::from_le_bytes(s)
        }
        ShiftFunc::Double => Block(x).double().0,
        ShiftFunc::LsbExtend => {
            if x & 1 == 1 {
                u128::MAX
            } else {
                0
            }
        }
        ShiftFunc::MsbExtend => map_lanes(x, lane_bits, |v| {
            if (v >> (lane_bits - 1)) & 1 == 1 {
                u128::MAX
            } else {
                0
            }
        }),
        ShiftFunc::LsbExtract => map_lanes(x, lane_bits, |v| v & 1),
        ShiftFunc::Shl => map_lanes(x, lane_bits, |v| if amount >= lane_bits { 0 } else { v << amount }),
        ShiftFunc::Shr => map_lanes(x, lane_bits, |v| if amount >= lane_bits { 0 } else { v >> amount }),
        ShiftFunc::Sar => map_lanes(x, lane_bits, |v| {
            let neg = (v >> (lane_bits - 1)) & 1 == 1;
            let k = amount.min(lane_bits - 1);
            let shifted = v >> k;
            if neg {
                shifted | (lane_mask(lane_bits) & !(lane_mask(lane_bits) >> k))
            } else {
                shifted
            }
        }),
        ShiftFunc::ByteRotL => x.rotate_left(8 * (amount % 16)),
        ShiftFunc::ByteRotR => x.rotate_right(8 * (amount % 16)),
    })
}

/// Lookup tables of the LUT fabric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LutFabric {
    elements: Vec<Option<Box<[u8; 256]>>>,
}

pub const LUT_SBOX: usize = 0;
pub const LUT_SBOX_X2: usize = 1;
pub const LUT_SBOX_X3: usize = 2;

impl LutFabric {
    pub fn empty(count: usize) -> Self {
        LutFabric { elements: vec![None; count] }
    }

    /// S-box and its GF(2^8) multiples by 2 and 3 in elements 0..3.
    pub fn aes(count: usize) -> Self {
        let t = aes::tables();
        let mut f = Self::empty(count);
        f.load(LUT_SBOX, &t.sbox).expect("element exists");
        f.load(LUT_SBOX_X2, &t.sbox_x2).expect("element exists");
        f.load(LUT_SBOX_X3, &t.sbox_x3).expect("element exists");
        f
    }

    pub fn load(&mut self, element: usize, table: &[u8; 256]) -> Result<(), SimError> {
        let slot = self.elements.get_mut(element).ok_or(SimError::LutElement(element))?;
        *slot = Some(Box::new(*table));
        Ok(())
    }

    pub fn lut_lookup(&self, element: usize, index: u8) -> Result<u8, SimError> {
        let t = self.table(element)?;
        Ok(t[index as usize])
    }

    fn table(&self, element: usize) -> Result<&[u8; 256], SimError> {
        self.elements
            .get(element)
            .ok_or(SimError::LutElement(element))?
            .as_deref()
            .ok_or(SimError::LutNotLoaded(element))
    }

    /// Mode 0: substitute every byte through element 0.
    pub fn substitute(&self, x: u128) -> Result<u128, SimError> {
        let t = self.table(0)?;
        Ok(u128::from_le_bytes(x.to_le_bytes().map(|b| t[b as usize])))
    }

    /// Mode 1: SubBytes followed by MixColumns, via elements 0, 1, 2 and XOR trees.
    pub fn sub_mix(&self, x: u128) -> Result<u128, SimError> {
        let (t1, t2, t3) = (self.table(0)?, self.table(1)?, self.table(2)?);
        let s = x.to_le_bytes();
        let mut o = [0u8; 16];
        for c in 0..4 {
            let [a, b, cc, d] = [s[4 * c], s[4 * c + 1], s[4 * c + 2], s[4 * c + 3]].map(usize::from);
            o[4 * c] = t2[a] ^ t3[b] ^ t1[cc] ^ t1[d];
            o[4 * c + 1] = t1[a] ^ t2[b] ^ t3[cc] ^ t1[d];
            o[4 * c + 2] = t1[a] ^ t1[b] ^ t2[cc] ^ t3[d];
            o[4 * c + 3] = t3[a] ^ t1[b] ^ t1[cc] ^ t2[d];
        }
        Ok(u128::from_le_bytes(o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cem_examples() {
        assert_eq!(cem_op(CemFunc::Not, 0x0000_FFFF, 0, 32).value as u32, 0xFFFF_0000);
        let r = cem_op(CemFunc::Add, 0xFFFF_FFFF, 1, 32);
        assert_eq!((r.value, r.carry & 1), (0, 1));
        assert_eq!(cem_op(CemFunc::Add, 5, 12, 32).value, 17);
        let r = cem_op(CemFunc::AddC, u128::MAX, 0, 128);
        assert_eq!((r.value, r.carry), (0, 1));
    }

    #[test]
    fn shifter_examples() {
        assert_eq!(shifter_op(ShiftFunc::MsbExtend, 0x8000_0000, 0, 32).unwrap() as u32, 0xFFFF_FFFF);
        assert_eq!(shifter_op(ShiftFunc::LsbExtract, 0b1011, 0, 32).unwrap(), 1);
        assert_eq!(shifter_op(ShiftFunc::Shl, 0x8000_0001, 1, 32).unwrap(), 2);
        assert_eq!(shifter_op(ShiftFunc::Sar, 0x8000_0000, 4, 32).unwrap(), 0xF800_0000);
        assert_eq!(shifter_op(ShiftFunc::ByteRotL, 0xAB, 1, 32).unwrap(), 0xAB00);
    }

    #[test]
    fn lut_examples() {
        let f = LutFabric::aes(12);
        assert_eq!(f.lut_lookup(0, 0x00).unwrap(), 0x63);
        assert!(matches!(f.lut_lookup(5, 0), Err(SimError::LutNotLoaded(5))));
        let mut g = LutFabric::empty(12);
        let id: [u8; 256] = std::array::from_fn(|i| i as u8);
        g.load(3, &id).unwrap();
        assert_eq!(g.lut_lookup(3, 0x5a).unwrap(), 0x5a);
        g.load(0, crate::arith::LutMultiplier::shared().table()).unwrap();
        assert_eq!(g.lut_lookup(0, (7 << 4) | 9).unwrap(), 63);
    }
}
