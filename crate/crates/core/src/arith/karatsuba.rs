use std::sync::OnceLock;

use super::{ArithError, Result};

/// 256-entry table of 4-bit products, indexed by `(a << 4) | b`.
#[derive(Clone, PartialEq, Eq)]
pub struct LutMultiplier {
    table: [u8; 256],
}

impl std::fmt::Debug for LutMultiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LutMultiplier").finish_non_exhaustive()
    }
}

impl Default for LutMultiplier {
    fn default() -> Self {
        Self::new()
    }
}

impl LutMultiplier {
    pub fn new() -> Self {
        let mut table = [0u8; 256];
        for (i, t) in table.iter_mut().enumerate() {
            *t = ((i >> 4) * (i & 0xf)) as u8;
        }
        Self { table }
    }

    pub fn shared() -> &'static LutMultiplier {
        static LUT: OnceLock<LutMultiplier> = OnceLock::new();
        LUT.get_or_init(LutMultiplier::new)
    }

    pub fn table(&self) -> &[u8; 256] {
        &self.table
    }

    /// `a * b` for nibbles; only the low four bits of each operand are used.
    #[inline]
    pub fn mul4(&self, a: u8, b: u8) -> u8 {
        self.table[(((a & 0xf) << 4) | (b & 0xf)) as usize]
    }
}

/// Product of two `n`-bit operands by Karatsuba recursion down to 4-bit lookups.
pub fn karatsuba_mul(a: u64, b: u64, n: u32, lut: &LutMultiplier) -> Result<u128> {
    karatsuba_mul_counted(a, b, n, lut).map(|(p, _)| p)
}

/// Like [`karatsuba_mul`], also returning the number of 4-bit base multiplications.
pub fn karatsuba_mul_counted(a: u64, b: u64, n: u32, lut: &LutMultiplier) -> Result<(u128, u64)> {
    if !matches!(n, 4 | 8 | 16 | 32 | 64) {
        return Err(ArithError::UnsupportedWidth(n));
    }
    if n < 64 && (a >> n != 0 || b >> n != 0) {
        return Err(ArithError::OperandOutOfRange {
            value: a.max(b) as u128,
            modulus: 1 << n,
        });
    }
    let mut count = 0;
    let p = kara(a as u128, b as u128, n, lut, &mut count);
    Ok((p, count))
}

fn kara(a: u128, b: u128, n: u32, lut: &LutMultiplier, count: &mut u64) -> u128 {
    if n == 4 {
        *count += 1;
        return lut.mul4(a as u8, b as u8) as u128;
    }
    let h = n / 2;
    let mask = (1u128 << h) - 1;
    let (a0, a1) = (a & mask, a >> h);
    let (b0, b1) = (b & mask, b >> h);
    let z0 = kara(a0, b0, h, lut, count);
    let z2 = kara(a1, b1, h, lut, count);

    // The half sums carry one extra bit; fold it back without multiplying.
    let (sa, sb) = (a0 + a1, b0 + b1);
    let (ca, cb) = (sa >> h, sb >> h);
    let (sa, sb) = (sa & mask, sb & mask);
    let zm = kara(sa, sb, h, lut, count);
    let cross = (if ca == 1 { sb } else { 0 }) + (if cb == 1 { sa } else { 0 });
    let mid = zm + (cross << h) + ((ca & cb) << (2 * h));

    let z1 = mid - z0 - z2;
    z0 + (z1 << h) + (z2 << (2 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lut_examples() {
        let lut = LutMultiplier::new();
        assert_eq!(lut.mul4(0, 9), 0);
        assert_eq!(lut.mul4(1, 13), 13);
        assert_eq!(lut.mul4(15, 15), 225);
        for a in 0..16u8 {
            for b in 0..16u8 {
                assert_eq!(lut.mul4(a, b) as u32, a as u32 * b as u32);
            }
        }
    }

    #[test]
    fn karatsuba_examples() {
        let lut = LutMultiplier::new();
        assert_eq!(karatsuba_mul(0, 0xdead_beef, 32, &lut).unwrap(), 0);
        assert_eq!(karatsuba_mul(0xBEEF, 0xCAFE, 16, &lut).unwrap(), 0x9766_0722);
        assert_eq!(0xBEEFu64 * 0xCAFE, 0x9766_0722);
        assert_eq!(
            karatsuba_mul(u64::MAX, u64::MAX, 64, &lut).unwrap(),
            u64::MAX as u128 * u64::MAX as u128
        );
        assert_eq!(karatsuba_mul(1, 1, 12, &lut), Err(ArithError::UnsupportedWidth(12)));
        assert!(karatsuba_mul(256, 1, 8, &lut).is_err());
    }

    #[test]
    fn exhaustive_8bit() {
        let lut = LutMultiplier::new();
        for a in 0..256u64 {
            for b in 0..256u64 {
                assert_eq!(karatsuba_mul(a, b, 8, &lut).unwrap(), (a * b) as u128);
            }
        }
    }

    #[test]
    fn base_multiplication_count() {
        let lut = LutMultiplier::new();
        for (n, expect) in [(4, 1), (8, 3), (16, 9), (32, 27), (64, 81)] {
            let (_, c) = karatsuba_mul_counted(3, 5, n, &lut).unwrap();
            assert_eq!(c, expect);
        }
    }
}
