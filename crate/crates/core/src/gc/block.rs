use std::fmt;
use std::ops::{BitAnd, BitXor, BitXorAssign};

use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};

/// A 128-bit value; byte 0 of the little-endian encoding is the AES state byte 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block(pub u128);

impl Block {
    pub const ZERO: Block = Block(0);
    pub const ONES: Block = Block(u128::MAX);

    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Block(rng.gen())
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Block(u128::from_le_bytes(bytes))
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    /// Point-and-permute bit.
    #[inline]
    pub fn lsb(self) -> bool {
        self.0 & 1 == 1
    }

    /// All-ones if `bit`, zero otherwise.
    #[inline]
    pub fn mask(bit: bool) -> Self {
        if bit {
            Block::ONES
        } else {
            Block::ZERO
        }
    }

    /// Multiplication by x in GF(2^128) modulo x^128 + x^7 + x^2 + x + 1.
    #[inline]
    pub fn double(self) -> Self {
        let carry = (self.0 >> 127) as u128;
        Block((self.0 << 1) ^ (carry * 0x87))
    }
}

impl BitXor for Block {
    type Output = Block;
    #[inline]
    fn bitxor(self, rhs: Block) -> Block {
        Block(self.0 ^ rhs.0)
    }
}

impl BitXorAssign for Block {
    #[inline]
    fn bitxor_assign(&mut self, rhs: Block) {
        self.0 ^= rhs.0;
    }
}

impl BitAnd for Block {
    type Output = Block;
    #[inline]
    fn bitand(self, rhs: Block) -> Block {
        Block(self.0 & rhs.0)
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block({:032x})", self.0)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Global FreeXOR offset. Its permute bit is always set.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GlobalDelta(Block);

impl GlobalDelta {
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Self::new(Block::random(rng))
    }

    /// Forces the least significant bit to one.
    pub fn new(block: Block) -> Self {
        GlobalDelta(Block(block.0 | 1))
    }

    pub fn block(self) -> Block {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling() {
        assert_eq!(Block(1).double(), Block(2));
        assert_eq!(Block(1 << 127).double(), Block(0x87));
        let a = Block(0x1234_5678_9abc_def0_0fed_cba9_8765_4321);
        let b = Block(0xffff_0000_ffff_0000_1111_2222_3333_4444);
        assert_eq!((a ^ b).double(), a.double() ^ b.double());
    }

    #[test]
    fn delta_lsb() {
        assert!(GlobalDelta::new(Block(0)).block().lsb());
        assert_eq!(Block::from_bytes(Block(42).to_bytes()), Block(42));
        assert!(Block(3).lsb());
    }
}
