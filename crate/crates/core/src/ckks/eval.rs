use std::sync::Arc;

use rand::RngCore;

use super::keys::{
    galois_element, sample_gaussian, sample_ternary, sample_uniform, small_eval, KeySet, KeySwitchKey,
};
use super::ntt::{invm, mulm, subm};
use super::{CkksError, Domain, NttDirection, Plaintext, RingParams, RnsPolynomial, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub c0: RnsPolynomial,
    pub c1: RnsPolynomial,
    pub scale: f64,
    pub slots: usize,
}

impl Ciphertext {
    /// Remaining ciphertext moduli.
    pub fn level(&self) -> usize {
        self.c0.channels().len()
    }
}

fn same_scale(a: f64, b: f64) -> Result<()> {
    if ((a - b) / a).abs() > 1e-9 {
        return Err(CkksError::Scale { a, b });
    }
    Ok(())
}

fn check_level(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CkksError::Level(format!("operand levels {a} and {b} differ")));
    }
    Ok(())
}

/// Signed representative of `x mod q` lifted into every channel of `dst`.
fn lift_centered(
    params: &Arc<RingParams>,
    src: &[u64],
    src_q: u64,
    dst: &[usize],
) -> Result<RnsPolynomial> {
    let half = src_q / 2;
    let data = dst
        .iter()
        .map(|&c| {
            let q = params.modulus(c).value();
            src.iter()
                .map(|&x| {
                    if x > half {
                        let neg = (src_q - x) % q;
                        (q - neg) % q
                    } else {
                        x % q
                    }
                })
                .collect()
        })
        .collect();
    RnsPolynomial::from_channels(params, dst, data, Domain::Coefficient)
}

/// `round(x / q_last)` over the remaining channels, `q_last` being the last channel.
fn divide_round_last(poly: &RnsPolynomial) -> Result<RnsPolynomial> {
    let params = poly.params().clone();
    let channels = poly.channels();
    let (&last, rest) = channels
        .split_last()
        .ok_or_else(|| CkksError::Level("no channel to drop".into()))?;
    let q_last = params.modulus(last).value();
    let mut tail = poly.restrict(&[last])?;
    tail.ntt_in_place(NttDirection::Inverse)?;
    let lifted = lift_centered(&params, tail.residues(0), q_last, rest)?.to_evaluation()?;
    let head = poly.restrict(rest)?;
    let inv: Vec<u64> = rest
        .iter()
        .map(|&c| {
            let q = params.modulus(c);
            invm(q_last % q.value(), q)
        })
        .collect();
    Ok(head.sub(&lifted)?.mul_scalars(&inv))
}

/// `round(x / (p1·p2))` over the remaining channels, `p1, p2` being the last
/// two. The centered remainder mod `p1·p2` comes from Garner recombination.
fn divide_round_last_two(poly: &RnsPolynomial) -> Result<RnsPolynomial> {
    let params = poly.params().clone();
    let channels = poly.channels();
    if channels.len() < 3 {
        return Err(CkksError::Level("no channel left after dividing".into()));
    }
    let (rest, tail_ch) = channels.split_at(channels.len() - 2);
    let (m1, m2) = (*params.modulus(tail_ch[0]), *params.modulus(tail_ch[1]));
    let (p1, p2) = (m1.value(), m2.value());
    let mut tail = poly.restrict(tail_ch)?;
    tail.ntt_in_place(NttDirection::Inverse)?;
    let p = p1 as u128 * p2 as u128;
    let half = p / 2;
    let p1_inv = invm(p1 % p2, &m2);
    let centered: Vec<i128> = tail
        .residues(0)
        .iter()
        .zip(tail.residues(1))
        .map(|(&t1, &t2)| {
            let v = mulm(subm(t2, t1 % p2, &m2), p1_inv, &m2);
            let u = t1 as u128 + p1 as u128 * v as u128;
            if u > half {
                u as i128 - p as i128
            } else {
                u as i128
            }
        })
        .collect();
    let data = rest
        .iter()
        .map(|&c| {
            let q = params.modulus(c).value() as i128;
            centered.iter().map(|&y| y.rem_euclid(q) as u64).collect()
        })
        .collect();
    let lifted = RnsPolynomial::from_channels(&params, rest, data, Domain::Coefficient)?.to_evaluation()?;
    let inv: Vec<u64> = rest
        .iter()
        .map(|&c| {
            let q = params.modulus(c);
            invm(mulm(p1 % q.value(), p2 % q.value(), q), q)
        })
        .collect();
    Ok(poly.restrict(rest)?.sub(&lifted)?.mul_scalars(&inv))
}

pub struct Evaluator {
    params: Arc<RingParams>,
}

impl Evaluator {
    pub fn new(params: &Arc<RingParams>) -> Self {
        Self {
            params: params.clone(),
        }
    }

    pub fn params(&self) -> &Arc<RingParams> {
        &self.params
    }

    fn channels(&self, level: usize) -> Vec<usize> {
        (0..level).collect()
    }

    /// Secret-key encryption: `(−a·s + e + m, a)`.
    pub fn encrypt<R: RngCore>(&self, pt: &Plaintext, keys: &KeySet, rng: &mut R) -> Result<Ciphertext> {
        let ch = self.channels(pt.level());
        let a = sample_uniform(&self.params, &ch, rng);
        let e = small_eval(&self.params, &ch, &sample_gaussian(self.params.degree(), rng));
        let s = keys.secret.poly.restrict(&ch)?;
        let c0 = e.sub(&a.mul(&s)?)?.add(&pt.poly)?;
        Ok(Ciphertext {
            c0,
            c1: a,
            scale: pt.scale,
            slots: pt.slots,
        })
    }

    /// Public-key encryption: `(v·pk0 + e0 + m, v·pk1 + e1)`.
    pub fn encrypt_public<R: RngCore>(
        &self,
        pt: &Plaintext,
        keys: &KeySet,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let n = self.params.degree();
        let ch = self.channels(pt.level());
        let v = small_eval(&self.params, &ch, &sample_ternary(n, rng));
        let e0 = small_eval(&self.params, &ch, &sample_gaussian(n, rng));
        let e1 = small_eval(&self.params, &ch, &sample_gaussian(n, rng));
        let pk0 = keys.public.0.restrict(&ch)?;
        let pk1 = keys.public.1.restrict(&ch)?;
        Ok(Ciphertext {
            c0: v.mul(&pk0)?.add(&e0)?.add(&pt.poly)?,
            c1: v.mul(&pk1)?.add(&e1)?,
            scale: pt.scale,
            slots: pt.slots,
        })
    }

    pub fn decrypt(&self, ct: &Ciphertext, keys: &KeySet) -> Result<Plaintext> {
        let s = keys.secret.poly.restrict(ct.c0.channels())?;
        Ok(Plaintext {
            poly: ct.c0.add(&ct.c1.mul(&s)?)?,
            scale: ct.scale,
            slots: ct.slots,
        })
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        check_level(a.level(), b.level())?;
        same_scale(a.scale, b.scale)?;
        Ok(Ciphertext {
            c0: a.c0.add(&b.c0)?,
            c1: a.c1.add(&b.c1)?,
            scale: a.scale,
            slots: a.slots.max(b.slots),
        })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        check_level(a.level(), b.level())?;
        same_scale(a.scale, b.scale)?;
        Ok(Ciphertext {
            c0: a.c0.sub(&b.c0)?,
            c1: a.c1.sub(&b.c1)?,
            scale: a.scale,
            slots: a.slots.max(b.slots),
        })
    }

    pub fn add_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        check_level(a.level(), pt.level())?;
        same_scale(a.scale, pt.scale)?;
        Ok(Ciphertext {
            c0: a.c0.add(&pt.poly)?,
            c1: a.c1.clone(),
            scale: a.scale,
            slots: a.slots.max(pt.slots),
        })
    }

    /// Output scale is the product of the input scales.
    pub fn mul_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        check_level(a.level(), pt.level())?;
        Ok(Ciphertext {
            c0: a.c0.mul(&pt.poly)?,
            c1: a.c1.mul(&pt.poly)?,
            scale: a.scale * pt.scale,
            slots: a.slots.max(pt.slots),
        })
    }

    /// Tensor product and relinearization; the scale is the product of the inputs'.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, keys: &KeySet) -> Result<Ciphertext> {
        check_level(a.level(), b.level())?;
        if a.level() < 2 {
            return Err(CkksError::Level("multiplication needs two moduli".into()));
        }
        let d0 = a.c0.mul(&b.c0)?;
        let d1 = a.c0.mul(&b.c1)?.add(&a.c1.mul(&b.c0)?)?;
        let d2 = a.c1.mul(&b.c1)?;
        let (k0, k1) = self.key_switch(&d2, &keys.relin)?;
        Ok(Ciphertext {
            c0: d0.add(&k0)?,
            c1: d1.add(&k1)?,
            scale: a.scale * b.scale,
            slots: a.slots.max(b.slots),
        })
    }

    /// [`Evaluator::mul`] followed by [`Evaluator::rescale`].
    pub fn mul_rescale(&self, a: &Ciphertext, b: &Ciphertext, keys: &KeySet) -> Result<Ciphertext> {
        self.rescale(&self.mul(a, b, keys)?)
    }

    /// Drops the last modulus and divides the scale by it.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        if ct.level() < 2 {
            return Err(CkksError::Level("rescale at level 1".into()));
        }
        let q_last = self.params.modulus(ct.level() - 1).value() as f64;
        Ok(Ciphertext {
            c0: divide_round_last(&ct.c0)?,
            c1: divide_round_last(&ct.c1)?,
            scale: ct.scale / q_last,
            slots: ct.slots,
        })
    }

    /// Drops moduli down to `level` without changing the scale.
    pub fn drop_to_level(&self, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
        if level == 0 || level > ct.level() {
            return Err(CkksError::Level(format!("cannot move from {} to {level}", ct.level())));
        }
        let ch = self.channels(level);
        Ok(Ciphertext {
            c0: ct.c0.restrict(&ch)?,
            c1: ct.c1.restrict(&ch)?,
            scale: ct.scale,
            slots: ct.slots,
        })
    }

    /// Left-rotates the slots by `k` (automorphism `X → X^(5^k)` plus key switch).
    pub fn rotate(&self, ct: &Ciphertext, k: i64, keys: &KeySet) -> Result<Ciphertext> {
        let g = galois_element(&self.params, k);
        if g == 1 {
            return Ok(ct.clone());
        }
        let key = keys.rotations.get(&k).ok_or(CkksError::MissingKey(k))?;
        let c0 = ct.c0.automorphism_eval(g)?;
        let c1 = ct.c1.automorphism_eval(g)?;
        let (k0, k1) = self.key_switch(&c1, key)?;
        Ok(Ciphertext {
            c0: c0.add(&k0)?,
            c1: k1,
            scale: ct.scale,
            slots: ct.slots,
        })
    }

    /// `(k0, k1)` with `k0 + k1·s ≈ d·s'` for the key's source secret `s'`.
    ///
    /// One inverse transform for the digits, one forward transform per digit,
    /// and two per output component to divide out the special primes.
    pub fn key_switch(&self, d: &RnsPolynomial, key: &KeySwitchKey) -> Result<(RnsPolynomial, RnsPolynomial)> {
        let specials = self.params.special_channels();
        if specials.is_empty() {
            return Err(CkksError::Params("key switching needs a special modulus".into()));
        }
        let level = d.channels().len();
        let mut ext: Vec<usize> = self.channels(level);
        ext.extend(specials.clone());
        let coeff = d.to_coefficient()?;
        let mut acc0 = RnsPolynomial::zero(&self.params, &ext, Domain::Evaluation);
        let mut acc1 = acc0.clone();
        for i in 0..level {
            let q = self.params.modulus(i).value();
            let digit = lift_centered(&self.params, coeff.residues(i), q, &ext)?.to_evaluation()?;
            let (b, a) = &key.digits[i];
            acc0 = acc0.add(&digit.mul(&b.restrict(&ext)?)?)?;
            acc1 = acc1.add(&digit.mul(&a.restrict(&ext)?)?)?;
        }
        let down = |x: &RnsPolynomial| match specials.len() {
            1 => divide_round_last(x),
            _ => divide_round_last_two(x),
        };
        Ok((down(&acc0)?, down(&acc1)?))
    }
}

/// Decodes and compares against an expected slot vector: `(max abs error, max |expected|)`.
pub fn slot_error(decoded: &[f64], expected: &[f64]) -> (f64, f64) {
    let err = decoded
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mag = expected.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (err, mag)
}
