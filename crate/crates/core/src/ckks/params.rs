use serde::{Deserialize, Serialize};

use super::ntt::NttTables;
use super::{CkksError, Result};
use crate::arith::Modulus;

/// Serializable description of a ring; [`RingParams`] adds the derived tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingDescriptor {
    pub version: u32,
    pub degree: usize,
    pub moduli: Vec<u64>,
    /// Key-switching primes (one or two); empty for rings without key switching.
    #[serde(default)]
    pub special_moduli: Vec<u64>,
    pub scale_bits: u32,
    /// Coefficient-domain mode for 2^k and 2^k±1 moduli (no NTT).
    pub special_moduli_mode: bool,
}

pub const DESCRIPTOR_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RingParams {
    desc: RingDescriptor,
    /// `moduli` followed by the special moduli.
    basis: Vec<Modulus>,
    tables: Vec<Option<NttTables>>,
}

impl PartialEq for RingParams {
    fn eq(&self, other: &Self) -> bool {
        self.desc == other.desc
    }
}

/// `count` distinct primes of exactly `bits` bits with `p ≡ 1 mod two_n`, largest first.
pub fn ntt_primes(bits: u32, count: usize, two_n: u64) -> Result<Vec<u64>> {
    if !(3..=62).contains(&bits) || !two_n.is_power_of_two() {
        return Err(CkksError::Params(format!(
            "no {bits}-bit primes ≡ 1 mod {two_n}"
        )));
    }
    let lo = 1u64 << (bits - 1);
    let hi = 1u64 << bits;
    let mut out = Vec::with_capacity(count);
    let mut c = (hi - 1) / two_n * two_n + 1;
    while out.len() < count {
        if c < lo || c >= hi {
            return Err(CkksError::Params(format!(
                "only {} {bits}-bit primes ≡ 1 mod {two_n}",
                out.len()
            )));
        }
        if primal_check::miller_rabin(c) {
            out.push(c);
        }
        c -= two_n;
    }
    Ok(out)
}

impl RingParams {
    pub fn new(desc: RingDescriptor) -> Result<Self> {
        let n = desc.degree;
        if !n.is_power_of_two() || !(8..=65536).contains(&n) {
            return Err(CkksError::Params(format!("degree {n} not a power of two in [8, 65536]")));
        }
        if desc.version != DESCRIPTOR_VERSION {
            return Err(CkksError::Params(format!("descriptor version {}", desc.version)));
        }
        if desc.moduli.is_empty() {
            return Err(CkksError::Params("empty modulus chain".into()));
        }
        let mut all = desc.moduli.clone();
        if desc.special_moduli.len() > 2 {
            return Err(CkksError::Params("at most two special moduli".into()));
        }
        all.extend(&desc.special_moduli);
        for (i, q) in all.iter().enumerate() {
            if all[..i].contains(q) {
                return Err(CkksError::Params(format!("modulus {q} repeated")));
            }
        }
        let mut basis = Vec::with_capacity(all.len());
        let mut tables = Vec::with_capacity(all.len());
        for &q in &all {
            if desc.special_moduli_mode {
                let m = Modulus::detect(q)?;
                basis.push(m);
                tables.push(NttTables::new(n, &m).ok());
            } else {
                let m = Modulus::general(q)?;
                let t = NttTables::new(n, &m)?;
                basis.push(m);
                tables.push(Some(t));
            }
        }
        if !desc.special_moduli_mode {
            // Products of residues must stay inside one Barrett operand.
            if let Some(q) = all.iter().find(|&&q| q >= 1 << 61) {
                return Err(CkksError::Params(format!("modulus {q} wider than 61 bits")));
            }
        }
        Ok(Self { desc, basis, tables })
    }

    /// N = 4096, three 30-bit primes, Δ = 2^30, two 31-bit key-switching primes.
    pub fn desk() -> Self {
        Self::preset(4096, 30, 3, 30).expect("desk preset")
    }

    /// N = 8192 with 60-bit primes, for wide-modulus benchmarks.
    pub fn large_logq() -> Self {
        Self::preset(8192, 60, 4, 40).expect("large preset")
    }

    /// `count` primes of `bits` bits plus the key-switching primes: two of
    /// 31 bits (inside the kernel operand width) for chains of at most 30
    /// bits, one of 60 bits otherwise.
    pub fn preset(degree: usize, bits: u32, count: usize, scale_bits: u32) -> Result<Self> {
        let two_n = 2 * degree as u64;
        let moduli = ntt_primes(bits, count, two_n)?;
        let (special_bits, specials) = if bits <= 30 { (31, 2) } else { (60, 1) };
        let special: Vec<u64> = ntt_primes(special_bits, count + specials, two_n)?
            .into_iter()
            .filter(|p| !moduli.contains(p))
            .take(specials)
            .collect();
        Self::new(RingDescriptor {
            version: DESCRIPTOR_VERSION,
            degree,
            moduli,
            special_moduli: special,
            scale_bits,
            special_moduli_mode: false,
        })
    }

    pub fn descriptor(&self) -> &RingDescriptor {
        &self.desc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.desc).expect("descriptor serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let desc: RingDescriptor =
            serde_json::from_str(s).map_err(|e| CkksError::Params(e.to_string()))?;
        Self::new(desc)
    }

    pub fn degree(&self) -> usize {
        self.desc.degree
    }

    pub fn slots(&self) -> usize {
        self.desc.degree / 2
    }

    /// Number of ciphertext moduli (the top level).
    pub fn max_level(&self) -> usize {
        self.desc.moduli.len()
    }

    pub fn scale(&self) -> f64 {
        (self.desc.scale_bits as f64).exp2()
    }

    pub fn special_moduli_mode(&self) -> bool {
        self.desc.special_moduli_mode
    }

    /// Ciphertext moduli followed by the special prime.
    pub fn basis(&self) -> &[Modulus] {
        &self.basis
    }

    pub fn modulus(&self, channel: usize) -> &Modulus {
        &self.basis[channel]
    }

    /// Basis indices of the special primes.
    pub fn special_channels(&self) -> std::ops::Range<usize> {
        self.desc.moduli.len()..self.basis.len()
    }

    pub fn tables(&self, channel: usize) -> Result<&NttTables> {
        self.tables[channel].as_ref().ok_or_else(|| {
            CkksError::Domain(format!(
                "modulus {} has no 2N-th root of unity",
                self.basis[channel].value()
            ))
        })
    }
}
