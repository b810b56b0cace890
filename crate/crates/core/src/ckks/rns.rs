use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

use super::{CkksError, Result};

/// Residues of `x` modulo each of `moduli`. `x` must be below their product.
pub fn rns_decompose(x: &BigUint, moduli: &[u64]) -> Result<Vec<u64>> {
    let q: BigUint = moduli.iter().map(|&m| BigUint::from(m)).product();
    if *x >= q {
        return Err(CkksError::Range(format!("{x} not below the modulus product {q}")));
    }
    Ok(moduli
        .iter()
        .map(|&m| (x % m).to_u64().expect("residue fits"))
        .collect())
}

/// The unique `x` in `[0, ∏ qᵢ)` with the given residues.
pub fn rns_compose(residues: &[u64], moduli: &[u64]) -> Result<BigUint> {
    Crt::new(moduli)?.compose(residues)
}

/// Precomputed CRT basis for repeated composition.
#[derive(Debug, Clone)]
pub(crate) struct Crt {
    moduli: Vec<u64>,
    product: BigUint,
    /// `(Q/qᵢ) · [(Q/qᵢ)^-1 mod qᵢ]`
    idempotents: Vec<BigUint>,
}

impl Crt {
    pub fn new(moduli: &[u64]) -> Result<Self> {
        let product: BigUint = moduli.iter().map(|&m| BigUint::from(m)).product();
        let mut idempotents = Vec::with_capacity(moduli.len());
        for &m in moduli {
            let m_big = BigUint::from(m);
            let hat = &product / &m_big;
            let inv = (&hat % &m_big)
                .modinv(&m_big)
                .ok_or_else(|| CkksError::Params(format!("moduli not coprime at {m}")))?;
            idempotents.push(hat * inv);
        }
        Ok(Self {
            moduli: moduli.to_vec(),
            product,
            idempotents,
        })
    }

    pub fn compose(&self, residues: &[u64]) -> Result<BigUint> {
        if residues.len() != self.moduli.len() {
            return Err(CkksError::Range(format!(
                "{} residues for {} moduli",
                residues.len(),
                self.moduli.len()
            )));
        }
        let mut acc = BigUint::zero();
        for ((&r, &m), e) in residues.iter().zip(&self.moduli).zip(&self.idempotents) {
            if r >= m {
                return Err(CkksError::Range(format!("residue {r} >= {m}")));
            }
            acc += e * r;
        }
        Ok(acc % &self.product)
    }

    /// Composition lifted to `(-Q/2, Q/2]`.
    pub fn compose_centered(&self, residues: &[u64]) -> Result<BigInt> {
        let x = self.compose(residues)?;
        let half = &self.product >> 1;
        Ok(if x > half {
            BigInt::from(x) - BigInt::from(self.product.clone())
        } else {
            BigInt::from(x)
        })
    }
}
