use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::ntt::mulm;
use super::{CkksError, Domain, RingParams, RnsPolynomial, Result};

pub const ERROR_SIGMA: f64 = 3.2;
/// Non-zero coefficients of the secret.
pub const SECRET_WEIGHT: usize = 64;

pub(crate) fn sample_gaussian<R: RngCore>(n: usize, rng: &mut R) -> Vec<i64> {
    let normal = Normal::new(0.0, ERROR_SIGMA).expect("valid sigma");
    let tail = (6.0 * ERROR_SIGMA).ceil();
    (0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng).round();
            if x.abs() <= tail {
                break x as i64;
            }
        })
        .collect()
}

/// Uniform ternary with exactly `weight` non-zero entries.
pub(crate) fn sample_sparse_ternary<R: RngCore>(n: usize, weight: usize, rng: &mut R) -> Vec<i64> {
    let mut s = vec![0i64; n];
    for i in sample(rng, n, weight.min(n)) {
        s[i] = if rng.gen::<bool>() { 1 } else { -1 };
    }
    s
}

pub(crate) fn sample_ternary<R: RngCore>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(-1..=1)).collect()
}

pub(crate) fn sample_uniform<R: RngCore>(
    params: &Arc<RingParams>,
    channels: &[usize],
    rng: &mut R,
) -> RnsPolynomial {
    let n = params.degree();
    let data = channels
        .iter()
        .map(|&c| {
            let q = params.modulus(c).value();
            (0..n).map(|_| rng.gen_range(0..q)).collect()
        })
        .collect();
    RnsPolynomial::from_channels(params, channels, data, Domain::Evaluation).expect("uniform residues")
}

pub(crate) fn small_eval(params: &Arc<RingParams>, channels: &[usize], coeffs: &[i64]) -> RnsPolynomial {
    RnsPolynomial::from_signed(params, channels, coeffs)
        .to_evaluation()
        .expect("ntt-friendly basis")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    pub coeffs: Vec<i64>,
    /// Evaluation form over the full basis.
    pub poly: RnsPolynomial,
}

/// Per-limb key-switching key: digit `i` encrypts `P · s' · [i == j]` in channel `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeySwitchKey {
    pub digits: Vec<(RnsPolynomial, RnsPolynomial)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeySet {
    pub secret: SecretKey,
    pub public: (RnsPolynomial, RnsPolynomial),
    pub relin: KeySwitchKey,
    /// Keyed by rotation amount; each switches from `s(X^(5^k))` back to `s`.
    pub rotations: BTreeMap<i64, KeySwitchKey>,
}

/// The public evaluation material a server needs: relinearization and
/// rotation keys, without the secret.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationKeys {
    pub relin: KeySwitchKey,
    pub rotations: BTreeMap<i64, KeySwitchKey>,
}

impl KeySet {
    pub fn evaluation_keys(&self) -> EvaluationKeys {
        EvaluationKeys {
            relin: self.relin.clone(),
            rotations: self.rotations.clone(),
        }
    }
}

pub(crate) fn full_basis(params: &RingParams) -> Vec<usize> {
    (0..params.basis().len()).collect()
}

/// Galois element `5^k mod 2N` of a left rotation by `k` slots.
pub fn galois_element(params: &RingParams, k: i64) -> usize {
    let n = params.degree();
    let order = (n / 2) as i64;
    let e = k.rem_euclid(order) as u64;
    let m = 2 * n as u64;
    let mut g = 1u64;
    for _ in 0..e {
        g = g * 5 % m;
    }
    g as usize
}

impl KeySwitchKey {
    /// Key switching from `from` (evaluation form, full basis) to `secret`.
    pub fn generate<R: RngCore>(
        params: &Arc<RingParams>,
        secret: &SecretKey,
        from: &RnsPolynomial,
        rng: &mut R,
    ) -> Result<Self> {
        let specials = params.special_channels();
        if specials.is_empty() {
            return Err(CkksError::Params("key switching needs a special modulus".into()));
        }
        let basis = full_basis(params);
        let n = params.degree();
        let mut digits = Vec::with_capacity(params.max_level());
        for i in 0..params.max_level() {
            let a = sample_uniform(params, &basis, rng);
            let e = small_eval(params, &basis, &sample_gaussian(n, rng));
            let mut b = e.sub(&a.mul(&secret.poly)?)?;
            let q = *params.modulus(i);
            let gadget = specials
                .clone()
                .fold(1, |g, c| mulm(g, params.modulus(c).value() % q.value(), &q));
            let src = from.residues(i).to_vec();
            let dst = b.residues_mut(i);
            for (x, s) in dst.iter_mut().zip(src) {
                *x = super::ntt::addm(*x, mulm(s, gadget, &q), &q);
            }
            digits.push((b, a));
        }
        Ok(Self { digits })
    }
}

impl KeySet {
    pub fn generate<R: RngCore>(params: &Arc<RingParams>, rotations: &[i64], rng: &mut R) -> Result<Self> {
        if params.special_moduli_mode() {
            return Err(CkksError::Params(
                "key generation needs an NTT-friendly basis".into(),
            ));
        }
        let n = params.degree();
        let basis = full_basis(params);
        let coeffs = sample_sparse_ternary(n, SECRET_WEIGHT.min(n / 2), rng);
        let secret = SecretKey {
            poly: small_eval(params, &basis, &coeffs),
            coeffs,
        };
        let top: Vec<usize> = (0..params.max_level()).collect();
        let a = sample_uniform(params, &top, rng);
        let e = small_eval(params, &top, &sample_gaussian(n, rng));
        let s_top = secret.poly.restrict(&top)?;
        let public = (e.sub(&a.mul(&s_top)?)?, a);
        let s2 = secret.poly.mul(&secret.poly)?;
        let relin = KeySwitchKey::generate(params, &secret, &s2, rng)?;
        let mut keys = Self {
            secret,
            public,
            relin,
            rotations: BTreeMap::new(),
        };
        for &k in rotations {
            keys.add_rotation(params, k, rng)?;
        }
        Ok(keys)
    }

    pub fn add_rotation<R: RngCore>(&mut self, params: &Arc<RingParams>, k: i64, rng: &mut R) -> Result<()> {
        if self.rotations.contains_key(&k) {
            return Ok(());
        }
        let g = galois_element(params, k);
        let rotated = self.secret.poly.automorphism_eval(g)?;
        let key = KeySwitchKey::generate(params, &self.secret, &rotated, rng)?;
        self.rotations.insert(k, key);
        Ok(())
    }
}
