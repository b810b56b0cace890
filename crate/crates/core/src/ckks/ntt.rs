use std::cell::Cell;

use super::{CkksError, Result};
use crate::arith::{barrett_reduce, mod_addsub, AddSub, Modulus};

thread_local! {
    static INVOCATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Polynomial-level transforms (forward or inverse, any channel count) run on this thread.
pub fn ntt_invocations() -> u64 {
    INVOCATIONS.with(|c| c.get())
}

pub fn reset_ntt_invocations() {
    INVOCATIONS.with(|c| c.set(0));
}

pub(crate) fn count_invocation() {
    INVOCATIONS.with(|c| c.set(c.get() + 1));
}

#[inline]
pub(crate) fn mulm(a: u64, b: u64, q: &Modulus) -> u64 {
    barrett_reduce(a as u128 * b as u128, q).expect("residues below q")
}

#[inline]
pub(crate) fn addm(a: u64, b: u64, q: &Modulus) -> u64 {
    mod_addsub(a, b, q, AddSub::Add).expect("residues below q")
}

#[inline]
pub(crate) fn subm(a: u64, b: u64, q: &Modulus) -> u64 {
    mod_addsub(a, b, q, AddSub::Sub).expect("residues below q")
}

pub(crate) fn powm(mut b: u64, mut e: u64, q: &Modulus) -> u64 {
    let mut r = 1 % q.value();
    b %= q.value();
    while e > 0 {
        if e & 1 == 1 {
            r = mulm(r, b, q);
        }
        b = mulm(b, b, q);
        e >>= 1;
    }
    r
}

/// Inverse modulo a prime.
pub(crate) fn invm(a: u64, q: &Modulus) -> u64 {
    powm(a, q.value() - 2, q)
}

/// Cooley–Tukey butterfly `(a + w·b, a − w·b)`, the NTT C-Inst.
pub fn ct_butterfly(a: u64, b: u64, w: u64, q: &Modulus) -> (u64, u64) {
    let v = mulm(b, w, q);
    (addm(a, v, q), subm(a, v, q))
}

/// Gentleman–Sande butterfly `(a + b, (a − b)·w)`, the INTT C-Inst.
pub fn gs_butterfly(a: u64, b: u64, w: u64, q: &Modulus) -> (u64, u64) {
    (addm(a, b, q), mulm(subm(a, b, q), w, q))
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Twiddles for the negacyclic transform of length `n` modulo one prime.
///
/// Outputs are in bit-reversed order: slot `k` holds the evaluation at
/// `ψ^(2·brv(k) + 1)`.
#[derive(Debug, Clone)]
pub struct NttTables {
    n: usize,
    q: Modulus,
    psi: u64,
    psi_rev: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    n_inv: u64,
}

impl NttTables {
    pub fn new(n: usize, q: &Modulus) -> Result<Self> {
        let qv = q.value();
        let two_n = 2 * n as u64;
        if !n.is_power_of_two() || n < 2 || (qv - 1) % two_n != 0 {
            return Err(CkksError::Params(format!(
                "{qv} admits no primitive {two_n}-th root of unity"
            )));
        }
        let psi = (2..qv)
            .map(|x| powm(x, (qv - 1) / two_n, q))
            .find(|&r| powm(r, n as u64, q) == qv - 1)
            .ok_or_else(|| CkksError::Params(format!("no {two_n}-th root mod {qv}")))?;
        let psi_inv = invm(psi, q);
        let bits = n.trailing_zeros();
        let mut psi_rev = vec![0; n];
        let mut psi_inv_rev = vec![0; n];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, bits);
            psi_rev[r] = p;
            psi_inv_rev[r] = pi;
            p = mulm(p, psi, q);
            pi = mulm(pi, psi_inv, q);
        }
        Ok(Self {
            n,
            q: *q,
            psi,
            psi_rev,
            psi_inv_rev,
            n_inv: invm(n as u64, q),
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.q
    }

    /// The primitive 2N-th root the tables are built from.
    pub fn psi(&self) -> u64 {
        self.psi
    }

    /// Twiddle used by forward butterfly group `m + i`.
    pub fn forward_twiddle(&self, idx: usize) -> u64 {
        self.psi_rev[idx]
    }

    pub fn inverse_twiddle(&self, idx: usize) -> u64 {
        self.psi_inv_rev[idx]
    }

    /// Exponent `e` such that output slot `k` is the evaluation at `ψ^e`.
    pub fn slot_exponent(&self, k: usize) -> usize {
        2 * bit_reverse(k, self.n.trailing_zeros()) + 1
    }

    /// In-place forward negacyclic NTT, natural order in, bit-reversed out.
    pub fn forward(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let q = &self.q;
        let mut t = self.n;
        let mut m = 1;
        while m < self.n {
            t /= 2;
            for i in 0..m {
                let w = self.psi_rev[m + i];
                let j1 = 2 * i * t;
                for j in j1..j1 + t {
                    let (x, y) = ct_butterfly(a[j], a[j + t], w, q);
                    a[j] = x;
                    a[j + t] = y;
                }
            }
            m *= 2;
        }
    }

    /// In-place inverse, bit-reversed in, natural order out.
    pub fn inverse(&self, a: &mut [u64]) {
        assert_eq!(a.len(), self.n);
        let q = &self.q;
        let mut t = 1;
        let mut m = self.n;
        while m > 1 {
            let h = m / 2;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                for j in j1..j1 + t {
                    let (x, y) = gs_butterfly(a[j], a[j + t], w, q);
                    a[j] = x;
                    a[j + t] = y;
                }
                j1 += 2 * t;
            }
            t *= 2;
            m = h;
        }
        for x in a.iter_mut() {
            *x = mulm(*x, self.n_inv, q);
        }
    }
}
