use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::ToPrimitive;

use super::rns::Crt;
use super::{CkksError, Domain, RingParams, RnsPolynomial, Result};

/// An encoded message: evaluation-domain polynomial over the first `level` moduli.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaintext {
    pub poly: RnsPolynomial,
    pub scale: f64,
    pub slots: usize,
}

impl Plaintext {
    pub fn level(&self) -> usize {
        self.poly.channels().len()
    }
}

/// Slot-index twiddles for the canonical embedding restricted to `5^j` orbits.
struct Embedding {
    m: usize,
    rot_group: Vec<usize>,
    ksi: Vec<Complex64>,
}

impl Embedding {
    fn new(n: usize) -> Self {
        let m = 2 * n;
        let mut rot_group = Vec::with_capacity(n / 2);
        let mut p = 1usize;
        for _ in 0..n / 2 {
            rot_group.push(p);
            p = p * 5 % m;
        }
        let ksi = (0..=m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Self { m, rot_group, ksi }
    }

    fn bit_reverse(v: &mut [Complex64]) {
        let n = v.len();
        let bits = n.trailing_zeros();
        if bits == 0 {
            return;
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                v.swap(i, j);
            }
        }
    }

    /// Evaluates the packed polynomial at the slot roots.
    fn forward(&self, v: &mut [Complex64]) {
        let size = v.len();
        Self::bit_reverse(v);
        let mut len = 2;
        while len <= size {
            let lenh = len / 2;
            let lenq = len * 4;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * self.m / lenq;
                    let u = v[i + j];
                    let w = v[i + j + lenh] * self.ksi[idx];
                    v[i + j] = u + w;
                    v[i + j + lenh] = u - w;
                }
            }
            len *= 2;
        }
    }

    fn inverse(&self, v: &mut [Complex64]) {
        let size = v.len();
        let mut len = size;
        while len >= 2 {
            let lenh = len / 2;
            let lenq = len * 4;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - self.rot_group[j] % lenq) * self.m / lenq;
                    let u = v[i + j] + v[i + j + lenh];
                    let w = (v[i + j] - v[i + j + lenh]) * self.ksi[idx];
                    v[i + j] = u;
                    v[i + j + lenh] = w;
                }
            }
            len /= 2;
        }
        Self::bit_reverse(v);
        let s = size as f64;
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

fn slot_count(len: usize, params: &RingParams) -> Result<usize> {
    if len > params.slots() {
        return Err(CkksError::Range(format!(
            "{len} values exceed the {} available slots",
            params.slots()
        )));
    }
    Ok(len.max(1).next_power_of_two())
}

/// Encodes real values; see [`encode_complex`].
pub fn encode(params: &Arc<RingParams>, values: &[f64], scale: f64, level: usize) -> Result<Plaintext> {
    let v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    encode_complex(params, &v, scale, level)
}

/// Packs up to N/2 values at `scale` over the first `level` moduli.
///
/// The slot count is the input length rounded up to a power of two; a
/// rotation acts cyclically on exactly that many slots.
pub fn encode_complex(
    params: &Arc<RingParams>,
    values: &[Complex64],
    scale: f64,
    level: usize,
) -> Result<Plaintext> {
    if level == 0 || level > params.max_level() {
        return Err(CkksError::Level(format!("level {level} outside 1..={}", params.max_level())));
    }
    if !(scale.is_finite() && scale >= 1.0) {
        return Err(CkksError::Range(format!("scale {scale}")));
    }
    let n = params.degree();
    let slots = slot_count(values.len(), params)?;
    let mut v = vec![Complex64::new(0.0, 0.0); slots];
    v[..values.len()].copy_from_slice(values);
    Embedding::new(n).inverse(&mut v);

    let channels: Vec<usize> = (0..level).collect();
    let q_half: f64 = channels
        .iter()
        .map(|&c| params.modulus(c).value() as f64)
        .product::<f64>()
        / 2.0;
    let bound = q_half.min(2f64.powi(120));
    let gap = n / 2 / slots;
    let mut coeffs = vec![0i128; n];
    for (i, z) in v.iter().enumerate() {
        for (idx, part) in [(i * gap, z.re), (i * gap + n / 2, z.im)] {
            let c = (part * scale).round();
            if !c.is_finite() || c.abs() >= bound {
                return Err(CkksError::Range(format!(
                    "scaled coefficient {c:e} exceeds the modulus budget"
                )));
            }
            coeffs[idx] = c as i128;
        }
    }
    let data = channels
        .iter()
        .map(|&c| {
            let q = params.modulus(c).value() as i128;
            coeffs.iter().map(|&x| x.rem_euclid(q) as u64).collect()
        })
        .collect();
    let poly = RnsPolynomial::from_channels(params, &channels, data, Domain::Coefficient)?
        .to_evaluation()?;
    Ok(Plaintext { poly, scale, slots })
}

pub fn decode(pt: &Plaintext) -> Result<Vec<f64>> {
    Ok(decode_complex(pt)?.into_iter().map(|z| z.re).collect())
}

pub fn decode_complex(pt: &Plaintext) -> Result<Vec<Complex64>> {
    let params = pt.poly.params().clone();
    let n = params.degree();
    let coeff = pt.poly.to_coefficient()?;
    let moduli: Vec<u64> = coeff
        .channels()
        .iter()
        .map(|&c| params.modulus(c).value())
        .collect();
    let crt = Crt::new(&moduli)?;
    let lift = |idx: usize| -> Result<f64> {
        let r: Vec<u64> = (0..moduli.len()).map(|i| coeff.residues(i)[idx]).collect();
        Ok(crt.compose_centered(&r)?.to_f64().unwrap_or(f64::NAN))
    };
    let gap = n / 2 / pt.slots;
    let mut v = Vec::with_capacity(pt.slots);
    for i in 0..pt.slots {
        let idx = i * gap;
        v.push(Complex64::new(lift(idx)? / pt.scale, lift(idx + n / 2)? / pt.scale));
    }
    Embedding::new(n).forward(&mut v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeros_encode_to_zero() {
        let p = Arc::new(RingParams::desk());
        let pt = encode(&p, &vec![0.0; 2048], p.scale(), 3).unwrap();
        assert!(pt.poly.is_zero());
    }

    #[test]
    fn embedding_matches_direct_evaluation() {
        // Slot j of a full packing is m(ζ^(5^j)) / scale with ζ = exp(iπ/N).
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let emb = Embedding::new(n);
        let mut v: Vec<Complex64> = (0..n / 2)
            .map(|i| Complex64::new(coeffs[i], coeffs[i + n / 2]))
            .collect();
        emb.forward(&mut v);
        for (j, z) in v.iter().enumerate() {
            let root = Complex64::from_polar(1.0, PI * emb.rot_group[j] as f64 / n as f64);
            let direct: Complex64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| root.powu(k as u32) * c)
                .sum();
            assert!((direct - z).norm() < 1e-9, "slot {j}");
        }
    }

    #[test]
    fn roundtrip_precision() {
        let p = Arc::new(RingParams::desk());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..2048).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = decode(&encode(&p, &v, p.scale(), 3).unwrap()).unwrap();
        let err = v.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 2f64.powi(-20), "err {err:e}");
    }

    #[test]
    fn overflow_is_range_error() {
        let p = Arc::new(RingParams::desk());
        assert!(matches!(
            encode(&p, &[1e12], p.scale(), 1),
            Err(CkksError::Range(_))
        ));
        assert!(encode(&p, &vec![0.0; 2049], p.scale(), 1).is_err());
    }
}
