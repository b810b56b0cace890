use super::karatsuba::{karatsuba_mul, LutMultiplier};
use super::{ArithError, Modulus, ModulusKind, Result, WordWidth};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddSub {
    Add,
    Sub,
}

/// All-ones when the top bit of `v` (as a `word`-bit value) is set.
#[inline]
fn sign_mask(v: u64, word: WordWidth) -> u64 {
    let shift = 64 - word.bits();
    (((v << shift) as i64) >> 63) as u64 & word.mask()
}

/// `a + !b + carry_in` at the given word width, the CEM subtraction idiom.
#[inline]
fn not_add(a: u64, b: u64, word: WordWidth) -> u64 {
    a.wrapping_add(!b & word.mask()).wrapping_add(1) & word.mask()
}

/// `(a ± b) mod q` for residues `a, b < q`.
pub fn mod_addsub(a: u64, b: u64, q: &Modulus, op: AddSub) -> Result<u64> {
    q.check(a)?;
    q.check(b)?;
    let word = q.word();
    let qv = q.value();
    Ok(match op {
        AddSub::Add => {
            let s = (a + b) & word.mask();
            let d = not_add(s, qv, word);
            let m = sign_mask(d, word);
            ((s ^ d) & m) ^ d
        }
        AddSub::Sub => {
            let d = not_add(a, b, word);
            let m = sign_mask(d, word);
            d.wrapping_add(m & qv) & word.mask()
        }
    })
}

/// `x mod q` via the two-multiplication Barrett estimate, `x < q^2`.
pub fn barrett_reduce(x: u128, q: &Modulus) -> Result<u64> {
    let qv = q.value() as u128;
    if x >= qv * qv {
        return Err(ArithError::OperandOutOfRange {
            value: x,
            modulus: q.value(),
        });
    }
    let w = q.width();
    let mu = match q.kind() {
        ModulusKind::General => q.barrett_mu(),
        _ => (1u128 << (2 * w)) / qv,
    };
    let q1 = x >> (w - 1);
    let q3 = (q1 * mu) >> (w + 1);
    let mut r = x - q3 * qv;
    // The estimate is at most two short.
    for _ in 0..2 {
        if r >= qv {
            r -= qv;
        }
    }
    debug_assert!(r < qv);
    Ok(r as u64)
}

/// Multiplication-free reduction for `2^k`, `2^k - 1` and `2^k + 1`, `x < q^2`.
///
/// `high` is the part of `x` above bit `k`, so `x = low + high * 2^k`.
pub fn special_reduce(x: u128, q: &Modulus) -> Result<u64> {
    let k = q.special_exponent().ok_or(ArithError::UnsupportedKind)?;
    let qv = q.value();
    if x >= qv as u128 * qv as u128 {
        return Err(ArithError::OperandOutOfRange {
            value: x,
            modulus: qv,
        });
    }
    let x = x as u64;
    let word = q.word();
    let wmask = word.mask();
    let low = x & ((1u64 << k) - 1);
    let high = x >> k;
    Ok(match q.kind() {
        ModulusKind::PowTwo(_) => low,
        ModulusKind::PowTwoPlusOne(_) => {
            let a = not_add(low, high, word);
            let a_mask = sign_mask(a, word);
            let t = low.wrapping_add(not_add(qv, high, word)) & wmask;
            let r = ((t ^ a) & a_mask) ^ a;
            // high can exceed q by one for the topmost inputs, leaving r = -1.
            let r_mask = sign_mask(r, word);
            r.wrapping_add(r_mask & qv) & wmask
        }
        ModulusKind::PowTwoMinusOne(_) => {
            let s = low + high;
            let d = not_add(s, qv, word);
            let m = sign_mask(d, word);
            ((s ^ d) & m) ^ d
        }
        ModulusKind::General => unreachable!(),
    })
}

/// Smallest supported Karatsuba width holding residues of `q`.
pub(crate) fn operand_width(q: &Modulus) -> u32 {
    let bits = 64 - (q.value() - 1).leading_zeros();
    bits.max(4).next_power_of_two()
}

/// `a * b mod q`: Karatsuba product followed by the reduction matching `q`'s kind.
pub fn mul_mod(a: u64, b: u64, q: &Modulus) -> Result<u64> {
    q.check(a)?;
    q.check(b)?;
    let lut = LutMultiplier::shared();
    let product = karatsuba_mul(a, b, operand_width(q), lut)?;
    match q.kind() {
        ModulusKind::General => barrett_reduce(product, q),
        _ => special_reduce(product, q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addsub_examples() {
        let q = Modulus::general(17).unwrap();
        assert_eq!(mod_addsub(0, 0, &q, AddSub::Add).unwrap(), 0);
        assert_eq!(mod_addsub(5, 12, &q, AddSub::Add).unwrap(), 0);
        assert_eq!(mod_addsub(3, 12, &q, AddSub::Sub).unwrap(), 8);
        assert!(mod_addsub(17, 1, &q, AddSub::Add).is_err());
    }

    #[test]
    fn addsub_exhaustive_small() {
        for qv in [2u64, 3, 15, 16, 17, 97, 251] {
            let q = Modulus::detect(qv).unwrap();
            for a in 0..qv {
                for b in 0..qv {
                    assert_eq!(mod_addsub(a, b, &q, AddSub::Add).unwrap(), (a + b) % qv);
                    assert_eq!(mod_addsub(a, b, &q, AddSub::Sub).unwrap(), (a + qv - b) % qv);
                }
            }
        }
    }

    #[test]
    fn addsub_wide_word() {
        let qv = (1u64 << 60) - 93;
        let q = Modulus::general(qv).unwrap();
        assert_eq!(q.word(), WordWidth::W64);
        assert_eq!(mod_addsub(qv - 1, qv - 1, &q, AddSub::Add).unwrap(), qv - 2);
        assert_eq!(mod_addsub(0, 1, &q, AddSub::Sub).unwrap(), qv - 1);
    }

    #[test]
    fn barrett_examples() {
        let q = Modulus::general(17).unwrap();
        assert_eq!(barrett_reduce(0, &q).unwrap(), 0);
        assert_eq!(barrett_reduce(288, &q).unwrap(), 16);
        assert!(barrett_reduce(289, &q).is_err());
    }

    #[test]
    fn special_examples() {
        let q15 = Modulus::pow_two_minus_one(4).unwrap();
        assert_eq!(special_reduce(0, &q15).unwrap(), 0);
        assert_eq!(special_reduce(224, &q15).unwrap(), 14);
        let q17 = Modulus::pow_two_plus_one(4).unwrap();
        assert_eq!(special_reduce(288, &q17).unwrap(), 16);
        assert_eq!(
            special_reduce(5, &Modulus::general(97).unwrap()),
            Err(ArithError::UnsupportedKind)
        );
    }

    #[test]
    fn special_exhaustive_k4() {
        for q in [
            Modulus::pow_two_minus_one(4).unwrap(),
            Modulus::pow_two(4).unwrap(),
            Modulus::pow_two_plus_one(4).unwrap(),
        ] {
            let qv = q.value() as u128;
            for x in 0..qv * qv {
                assert_eq!(special_reduce(x, &q).unwrap() as u128, x % qv, "x={x} q={qv}");
                assert_eq!(barrett_reduce(x, &q).unwrap() as u128, x % qv);
            }
        }
    }

    #[test]
    fn mul_mod_examples() {
        let q = Modulus::pow_two_plus_one(4).unwrap();
        assert_eq!(mul_mod(16, 16, &q).unwrap(), 1);
        for b in 0..17 {
            assert_eq!(mul_mod(1, b, &q).unwrap(), b);
        }
        let g = Modulus::general(97).unwrap();
        assert_eq!(mul_mod(96, 96, &g).unwrap(), 1);
    }
}
