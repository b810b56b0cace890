use serde::{Deserialize, Serialize};

use super::{ArithError, Result};

/// Width of the CEM adder lanes an operation is mapped onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WordWidth {
    W32,
    W64,
}

impl WordWidth {
    pub fn bits(self) -> u32 {
        match self {
            WordWidth::W32 => 32,
            WordWidth::W64 => 64,
        }
    }

    pub fn mask(self) -> u64 {
        match self {
            WordWidth::W32 => u32::MAX as u64,
            WordWidth::W64 => u64::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulusKind {
    PowTwoMinusOne(u32),
    PowTwo(u32),
    PowTwoPlusOne(u32),
    General,
}

/// A reduction modulus together with the constants its reduction needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Modulus {
    value: u64,
    kind: ModulusKind,
    /// Bit length of `value`; Barrett operands are `2 * width` bits wide.
    width: u32,
    barrett_mu: u128,
    word: WordWidth,
}

impl Modulus {
    /// A general modulus reduced with Barrett's method. `q` must be in `[2, 2^62)`.
    pub fn general(q: u64) -> Result<Self> {
        if q < 2 || q >= 1 << 62 {
            return Err(ArithError::InvalidModulus(format!(
                "{q} outside the Barrett range [2, 2^62)"
            )));
        }
        Ok(Self::build(q, ModulusKind::General))
    }

    pub fn pow_two_minus_one(k: u32) -> Result<Self> {
        Self::special(k, ModulusKind::PowTwoMinusOne(k))
    }

    pub fn pow_two(k: u32) -> Result<Self> {
        Self::special(k, ModulusKind::PowTwo(k))
    }

    pub fn pow_two_plus_one(k: u32) -> Result<Self> {
        Self::special(k, ModulusKind::PowTwoPlusOne(k))
    }

    fn special(k: u32, kind: ModulusKind) -> Result<Self> {
        if !(2..=30).contains(&k) {
            return Err(ArithError::InvalidModulus(format!(
                "special modulus exponent {k} outside [2, 30]"
            )));
        }
        let value = match kind {
            ModulusKind::PowTwoMinusOne(k) => (1u64 << k) - 1,
            ModulusKind::PowTwo(k) => 1u64 << k,
            ModulusKind::PowTwoPlusOne(k) => (1u64 << k) + 1,
            ModulusKind::General => unreachable!(),
        };
        Ok(Self::build(value, kind))
    }

    /// Recognizes 2^k and 2^k±1 moduli; everything else is general.
    pub fn detect(q: u64) -> Result<Self> {
        for k in 2..=30u32 {
            let p = 1u64 << k;
            if q == p - 1 {
                return Self::pow_two_minus_one(k);
            }
            if q == p {
                return Self::pow_two(k);
            }
            if q == p + 1 {
                return Self::pow_two_plus_one(k);
            }
        }
        Self::general(q)
    }

    fn build(value: u64, kind: ModulusKind) -> Self {
        let width = 64 - value.leading_zeros();
        let barrett_mu = match kind {
            ModulusKind::General => (1u128 << (2 * width)) / value as u128,
            _ => 0,
        };
        // Additions need one spare bit, special reductions hold x < q^2 in a word.
        let needed = match kind {
            ModulusKind::General => width + 1,
            _ => 2 * width + 1,
        };
        let word = if needed <= 32 {
            WordWidth::W32
        } else {
            WordWidth::W64
        };
        Self {
            value,
            kind,
            width,
            barrett_mu,
            word,
        }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn kind(&self) -> ModulusKind {
        self.kind
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn barrett_mu(&self) -> u128 {
        self.barrett_mu
    }

    pub fn word(&self) -> WordWidth {
        self.word
    }

    /// Forces the adder word width, e.g. 64-bit lanes for large-modulus benchmarks.
    pub fn with_word(mut self, word: WordWidth) -> Result<Self> {
        let needed = match self.kind {
            ModulusKind::General => self.width + 1,
            _ => 2 * self.width + 1,
        };
        if needed > word.bits() {
            return Err(ArithError::InvalidModulus(format!(
                "{} needs {needed}-bit words",
                self.value
            )));
        }
        self.word = word;
        Ok(self)
    }

    /// Exponent `k` of a special modulus.
    pub fn special_exponent(&self) -> Option<u32> {
        match self.kind {
            ModulusKind::PowTwoMinusOne(k) | ModulusKind::PowTwo(k) | ModulusKind::PowTwoPlusOne(k) => {
                Some(k)
            }
            ModulusKind::General => None,
        }
    }

    pub(crate) fn check(&self, a: u64) -> Result<()> {
        if a >= self.value {
            Err(ArithError::OperandOutOfRange {
                value: a as u128,
                modulus: self.value,
            })
        } else {
            Ok(())
        }
    }
}
