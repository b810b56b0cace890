use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ntt::{addm, count_invocation, mulm, subm};
use super::{CkksError, RingParams, Result};
use crate::arith::mul_mod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NttDirection {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyOp {
    Add,
    Sub,
    PointwiseMul,
}

/// A ring element as residue vectors over a subset of the parameter basis.
#[derive(Debug, Clone)]
pub struct RnsPolynomial {
    params: Arc<RingParams>,
    /// Indices into `params.basis()`.
    channels: Vec<usize>,
    data: Vec<Vec<u64>>,
    domain: Domain,
}

impl PartialEq for RnsPolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.channels == other.channels
            && self.domain == other.domain
            && self.data == other.data
            && *self.params == *other.params
    }
}

impl RnsPolynomial {
    pub fn zero(params: &Arc<RingParams>, channels: &[usize], domain: Domain) -> Self {
        let n = params.degree();
        Self {
            params: params.clone(),
            channels: channels.to_vec(),
            data: vec![vec![0; n]; channels.len()],
            domain,
        }
    }

    pub fn from_channels(
        params: &Arc<RingParams>,
        channels: &[usize],
        data: Vec<Vec<u64>>,
        domain: Domain,
    ) -> Result<Self> {
        if data.len() != channels.len() {
            return Err(CkksError::Domain(format!(
                "{} residue vectors for {} channels",
                data.len(),
                channels.len()
            )));
        }
        for (&c, v) in channels.iter().zip(&data) {
            let q = params
                .basis()
                .get(c)
                .ok_or_else(|| CkksError::Domain(format!("channel {c} outside the basis")))?
                .value();
            if v.len() != params.degree() {
                return Err(CkksError::Domain(format!("length {} != N", v.len())));
            }
            if let Some(x) = v.iter().find(|&&x| x >= q) {
                return Err(CkksError::Range(format!("residue {x} >= {q}")));
            }
        }
        Ok(Self {
            params: params.clone(),
            channels: channels.to_vec(),
            data,
            domain,
        })
    }

    /// Coefficient-domain polynomial with small signed integer coefficients.
    pub fn from_signed(params: &Arc<RingParams>, channels: &[usize], coeffs: &[i64]) -> Self {
        assert_eq!(coeffs.len(), params.degree());
        let data = channels
            .iter()
            .map(|&c| {
                let q = params.modulus(c).value() as i128;
                coeffs.iter().map(|&x| (x as i128).rem_euclid(q) as u64).collect()
            })
            .collect();
        Self {
            params: params.clone(),
            channels: channels.to_vec(),
            data,
            domain: Domain::Coefficient,
        }
    }

    pub fn params(&self) -> &Arc<RingParams> {
        &self.params
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn degree(&self) -> usize {
        self.params.degree()
    }

    /// Residues of the `i`-th channel (position in `channels()`, not basis index).
    pub fn residues(&self, i: usize) -> &[u64] {
        &self.data[i]
    }

    pub(crate) fn residues_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.data[i]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.iter().all(|&x| x == 0))
    }

    /// Transform every channel. `Forward` needs coefficients, `Inverse` evaluations.
    pub fn ntt(&self, dir: NttDirection) -> Result<Self> {
        let mut out = self.clone();
        out.ntt_in_place(dir)?;
        Ok(out)
    }

    pub fn ntt_in_place(&mut self, dir: NttDirection) -> Result<()> {
        let (from, to) = match dir {
            NttDirection::Forward => (Domain::Coefficient, Domain::Evaluation),
            NttDirection::Inverse => (Domain::Evaluation, Domain::Coefficient),
        };
        if self.domain != from {
            return Err(CkksError::Domain(format!(
                "{dir:?} transform of a {:?}-domain polynomial",
                self.domain
            )));
        }
        let tables = self
            .channels
            .iter()
            .map(|&c| self.params.tables(c))
            .collect::<Result<Vec<_>>>()?;
        count_invocation();
        for (t, v) in tables.into_iter().zip(self.data.iter_mut()) {
            match dir {
                NttDirection::Forward => t.forward(v),
                NttDirection::Inverse => t.inverse(v),
            }
        }
        self.domain = to;
        Ok(())
    }

    pub fn to_evaluation(&self) -> Result<Self> {
        match self.domain {
            Domain::Evaluation => Ok(self.clone()),
            Domain::Coefficient => self.ntt(NttDirection::Forward),
        }
    }

    pub fn to_coefficient(&self) -> Result<Self> {
        match self.domain {
            Domain::Coefficient => Ok(self.clone()),
            Domain::Evaluation => self.ntt(NttDirection::Inverse),
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if *self.params != *other.params {
            return Err(CkksError::Domain("operands from different rings".into()));
        }
        if self.channels != other.channels {
            return Err(CkksError::Domain(format!(
                "channel sets differ: {:?} vs {:?}",
                self.channels, other.channels
            )));
        }
        if self.domain != other.domain {
            return Err(CkksError::Domain(format!(
                "domains differ: {:?} vs {:?}",
                self.domain, other.domain
            )));
        }
        Ok(())
    }

    pub fn arith(&self, other: &Self, op: PolyOp) -> Result<Self> {
        self.check_compatible(other)?;
        if op == PolyOp::PointwiseMul && self.domain != Domain::Evaluation {
            return Err(CkksError::Domain(
                "pointwise multiplication needs evaluation-domain operands".into(),
            ));
        }
        let mut out = self.clone();
        for (i, &c) in self.channels.iter().enumerate() {
            let q = *self.params.modulus(c);
            for (x, &y) in out.data[i].iter_mut().zip(&other.data[i]) {
                *x = match op {
                    PolyOp::Add => addm(*x, y, &q),
                    PolyOp::Sub => subm(*x, y, &q),
                    PolyOp::PointwiseMul => mulm(*x, y, &q),
                };
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.arith(other, PolyOp::Add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.arith(other, PolyOp::Sub)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.arith(other, PolyOp::PointwiseMul)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for (i, &c) in self.channels.iter().enumerate() {
            let q = *self.params.modulus(c);
            for x in out.data[i].iter_mut() {
                *x = subm(0, *x, &q);
            }
        }
        out
    }

    /// Multiplies channel `i` by `scalars[i]` (already reduced).
    pub(crate) fn mul_scalars(&self, scalars: &[u64]) -> Self {
        let mut out = self.clone();
        for (i, &c) in self.channels.iter().enumerate() {
            let q = *self.params.modulus(c);
            for x in out.data[i].iter_mut() {
                *x = mulm(*x, scalars[i], &q);
            }
        }
        out
    }

    /// Keeps only the listed basis channels, in the given order.
    pub fn restrict(&self, channels: &[usize]) -> Result<Self> {
        let data = channels
            .iter()
            .map(|c| {
                self.channels
                    .iter()
                    .position(|x| x == c)
                    .map(|i| self.data[i].clone())
                    .ok_or_else(|| CkksError::Domain(format!("channel {c} not present")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: self.params.clone(),
            channels: channels.to_vec(),
            data,
            domain: self.domain,
        })
    }

    /// `X → X^g`, negacyclic. Coefficient domain.
    pub fn automorphism(&self, g: usize) -> Result<Self> {
        let n = self.degree();
        check_galois(g, n)?;
        if self.domain != Domain::Coefficient {
            return Err(CkksError::Domain(
                "coefficient automorphism of an evaluation-domain polynomial".into(),
            ));
        }
        let mut out = Self::zero(&self.params, &self.channels, Domain::Coefficient);
        for (i, &c) in self.channels.iter().enumerate() {
            let q = *self.params.modulus(c);
            for (j, &x) in self.data[i].iter().enumerate() {
                let e = j * g % (2 * n);
                if e < n {
                    out.data[i][e] = x;
                } else {
                    out.data[i][e - n] = subm(0, x, &q);
                }
            }
        }
        Ok(out)
    }

    /// The same map on evaluation slots: a pure permutation.
    pub fn automorphism_eval(&self, g: usize) -> Result<Self> {
        let n = self.degree();
        check_galois(g, n)?;
        if self.domain != Domain::Evaluation {
            return Err(CkksError::Domain(
                "evaluation automorphism of a coefficient-domain polynomial".into(),
            ));
        }
        let perm = galois_permutation(g, n);
        let mut out = self.clone();
        for (i, v) in self.data.iter().enumerate() {
            for (k, &src) in perm.iter().enumerate() {
                out.data[i][k] = v[src];
            }
        }
        Ok(out)
    }

    /// Schoolbook negacyclic product in the coefficient domain using the
    /// modulus-specific kernels (special reduction for 2^k±1 moduli).
    pub fn negacyclic_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.domain != Domain::Coefficient {
            return Err(CkksError::Domain("schoolbook product needs coefficients".into()));
        }
        let n = self.degree();
        let mut out = Self::zero(&self.params, &self.channels, Domain::Coefficient);
        for (i, &c) in self.channels.iter().enumerate() {
            let q = *self.params.modulus(c);
            let (a, b) = (&self.data[i], &other.data[i]);
            let acc = &mut out.data[i];
            for (j, &x) in a.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                for (k, &y) in b.iter().enumerate() {
                    let p = mul_mod(x, y, &q)?;
                    let idx = j + k;
                    if idx < n {
                        acc[idx] = addm(acc[idx], p, &q);
                    } else {
                        acc[idx - n] = subm(acc[idx - n], p, &q);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn check_galois(g: usize, n: usize) -> Result<()> {
    if g % 2 == 0 || g >= 2 * n {
        return Err(CkksError::Domain(format!(
            "automorphism index {g} must be odd and below 2N = {}",
            2 * n
        )));
    }
    Ok(())
}

/// `perm[k]` is the source slot of output slot `k` under `X → X^g`.
pub(crate) fn galois_permutation(g: usize, n: usize) -> Vec<usize> {
    let bits = n.trailing_zeros();
    let brv = |x: usize| if bits == 0 { 0 } else { x.reverse_bits() >> (usize::BITS - bits) };
    (0..n)
        .map(|k| {
            let e = 2 * brv(k) + 1;
            let src = e * g % (2 * n);
            brv((src - 1) / 2)
        })
        .collect()
}
