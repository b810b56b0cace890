//! Versioned binary container for ring parameters and key sets.
//!
//! Layout: magic `PCKS`, u32 version, u8 payload kind, u32 descriptor
//! length, descriptor JSON, then (for keys) the key material. Integers are
//! little-endian.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::keys::{full_basis, small_eval, KeySwitchKey, SecretKey};
use super::keys::EvaluationKeys;
use super::{Ciphertext, CkksError, Domain, KeySet, RingParams, RnsPolynomial, Result};

const MAGIC: &[u8; 4] = b"PCKS";
const VERSION: u32 = 1;
const KIND_PARAMS: u8 = 0;
const KIND_KEYS: u8 = 1;
const KIND_CIPHERTEXT: u8 = 2;
const KIND_EVAL_KEYS: u8 = 3;

fn header(params: &RingParams, kind: u8) -> Vec<u8> {
    let json = serde_json::to_vec(params.descriptor()).expect("descriptor serializes");
    let mut out = Vec::with_capacity(13 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CkksError::Container(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, kind: u8) -> Result<RingParams> {
        if self.take(4)? != MAGIC {
            return Err(CkksError::Container("bad magic".into()));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(CkksError::Container(format!("unsupported version {v}")));
        }
        let k = self.u8()?;
        if k != kind {
            return Err(CkksError::Container(format!("payload kind {k}, expected {kind}")));
        }
        let len = self.u32()? as usize;
        let json = std::str::from_utf8(self.take(len)?)
            .map_err(|e| CkksError::Container(e.to_string()))?;
        RingParams::from_json(json)
    }

    fn poly(&mut self, params: &Arc<RingParams>) -> Result<RnsPolynomial> {
        let domain = match self.u8()? {
            0 => Domain::Coefficient,
            1 => Domain::Evaluation,
            d => return Err(CkksError::Container(format!("domain tag {d}"))),
        };
        let count = self.u32()? as usize;
        if count > params.basis().len() {
            return Err(CkksError::Container(format!("{count} channels")));
        }
        let channels = (0..count)
            .map(|_| self.u32().map(|c| c as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = params.degree();
        let data = (0..count)
            .map(|_| (0..n).map(|_| self.u64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        RnsPolynomial::from_channels(params, &channels, data, domain)
    }

    fn ksk(&mut self, params: &Arc<RingParams>) -> Result<KeySwitchKey> {
        let count = self.u32()? as usize;
        if count != params.max_level() {
            return Err(CkksError::Container(format!("{count} key-switching digits")));
        }
        let digits = (0..count)
            .map(|_| Ok((self.poly(params)?, self.poly(params)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KeySwitchKey { digits })
    }
}

fn put_poly(out: &mut Vec<u8>, p: &RnsPolynomial) {
    out.push(match p.domain() {
        Domain::Coefficient => 0,
        Domain::Evaluation => 1,
    });
    out.extend_from_slice(&(p.channels().len() as u32).to_le_bytes());
    for &c in p.channels() {
        out.extend_from_slice(&(c as u32).to_le_bytes());
    }
    for i in 0..p.channels().len() {
        for &x in p.residues(i) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn put_ksk(out: &mut Vec<u8>, k: &KeySwitchKey) {
    out.extend_from_slice(&(k.digits.len() as u32).to_le_bytes());
    for (b, a) in &k.digits {
        put_poly(out, b);
        put_poly(out, a);
    }
}

pub fn write_params(params: &RingParams) -> Vec<u8> {
    header(params, KIND_PARAMS)
}

pub fn read_params(bytes: &[u8]) -> Result<RingParams> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let p = r.header(KIND_PARAMS)?;
    if r.pos != bytes.len() {
        return Err(CkksError::Container("trailing bytes".into()));
    }
    Ok(p)
}

pub fn write_keys(params: &RingParams, keys: &KeySet) -> Vec<u8> {
    let mut out = header(params, KIND_KEYS);
    for &c in &keys.secret.coeffs {
        out.push(c as i8 as u8);
    }
    put_poly(&mut out, &keys.public.0);
    put_poly(&mut out, &keys.public.1);
    put_ksk(&mut out, &keys.relin);
    out.extend_from_slice(&(keys.rotations.len() as u32).to_le_bytes());
    for (&k, key) in &keys.rotations {
        out.extend_from_slice(&k.to_le_bytes());
        put_ksk(&mut out, key);
    }
    out
}

/// Returns the parameters stored with the keys alongside the key set.
pub fn read_keys(bytes: &[u8]) -> Result<(Arc<RingParams>, KeySet)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let params = Arc::new(r.header(KIND_KEYS)?);
    let n = params.degree();
    let coeffs: Vec<i64> = r.take(n)?.iter().map(|&b| b as i8 as i64).collect();
    if coeffs.iter().any(|c| c.abs() > 1) {
        return Err(CkksError::Container("secret key is not ternary".into()));
    }
    let secret = SecretKey {
        poly: small_eval(&params, &full_basis(&params), &coeffs),
        coeffs,
    };
    let public = (r.poly(&params)?, r.poly(&params)?);
    let relin = r.ksk(&params)?;
    let count = r.u32()?;
    let mut rotations = BTreeMap::new();
    for _ in 0..count {
        let k = r.u64()? as i64;
        rotations.insert(k, r.ksk(&params)?);
    }
    if r.pos != bytes.len() {
        return Err(CkksError::Container("trailing bytes".into()));
    }
    Ok((
        params,
        KeySet {
            secret,
            public,
            relin,
            rotations,
        },
    ))
}

/// Ciphertext with its scale (f64 bits) and slot count.
pub fn write_ciphertext(ct: &Ciphertext) -> Vec<u8> {
    let mut out = header(ct.c0.params(), KIND_CIPHERTEXT);
    out.extend_from_slice(&ct.scale.to_bits().to_le_bytes());
    out.extend_from_slice(&(ct.slots as u32).to_le_bytes());
    put_poly(&mut out, &ct.c0);
    put_poly(&mut out, &ct.c1);
    out
}

/// Reads a ciphertext, checking that it was written under `params`.
pub fn read_ciphertext(bytes: &[u8], params: &Arc<RingParams>) -> Result<Ciphertext> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let stored = r.header(KIND_CIPHERTEXT)?;
    if stored.descriptor() != params.descriptor() {
        return Err(CkksError::Container("ciphertext ring differs".into()));
    }
    let scale = f64::from_bits(r.u64()?);
    let slots = r.u32()? as usize;
    let c0 = r.poly(params)?;
    let c1 = r.poly(params)?;
    if c0.channels() != c1.channels() || r.pos != bytes.len() {
        return Err(CkksError::Container("malformed ciphertext".into()));
    }
    Ok(Ciphertext { c0, c1, scale, slots })
}

pub fn write_eval_keys(params: &RingParams, keys: &EvaluationKeys) -> Vec<u8> {
    let mut out = header(params, KIND_EVAL_KEYS);
    put_ksk(&mut out, &keys.relin);
    out.extend_from_slice(&(keys.rotations.len() as u32).to_le_bytes());
    for (&k, key) in &keys.rotations {
        out.extend_from_slice(&k.to_le_bytes());
        put_ksk(&mut out, key);
    }
    out
}

pub fn read_eval_keys(bytes: &[u8]) -> Result<(Arc<RingParams>, EvaluationKeys)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let params = Arc::new(r.header(KIND_EVAL_KEYS)?);
    let relin = r.ksk(&params)?;
    let count = r.u32()?;
    let mut rotations = BTreeMap::new();
    for _ in 0..count {
        let k = r.u64()? as i64;
        rotations.insert(k, r.ksk(&params)?);
    }
    if r.pos != bytes.len() {
        return Err(CkksError::Container("trailing bytes".into()));
    }
    Ok((params, EvaluationKeys { relin, rotations }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn params_roundtrip() {
        let p = RingParams::desk();
        assert_eq!(read_params(&write_params(&p)).unwrap(), p);
        let mut bytes = write_params(&p);
        bytes[4] = 9;
        assert!(read_params(&bytes).is_err());
    }

    #[test]
    fn keys_roundtrip() {
        let p = Arc::new(RingParams::preset(16, 30, 2, 20).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let keys = KeySet::generate(&p, &[1, -1], &mut rng).unwrap();
        let bytes = write_keys(&p, &keys);
        let (q, back) = read_keys(&bytes).unwrap();
        assert_eq!(*q, *p);
        assert_eq!(back, keys);
        assert!(read_keys(&bytes[..bytes.len() - 1]).is_err());
    }
}
