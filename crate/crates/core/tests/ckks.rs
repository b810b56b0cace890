use std::sync::Arc;

use num_bigint::BigUint;
use ppimce::ckks::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Ctx {
    p: Arc<RingParams>,
    keys: KeySet,
    ev: Evaluator,
    rng: ChaCha8Rng,
}

fn ctx() -> Ctx {
    let p = Arc::new(RingParams::desk());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let keys = KeySet::generate(&p, &[1, 2, 3, 5], &mut rng).unwrap();
    let ev = Evaluator::new(&p);
    Ctx { p, keys, ev, rng }
}

impl Ctx {
    fn random(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }

    fn enc(&mut self, v: &[f64]) -> Ciphertext {
        let pt = encode(&self.p, v, self.p.scale(), self.p.max_level()).unwrap();
        self.ev.encrypt(&pt, &self.keys, &mut self.rng).unwrap()
    }

    fn dec(&self, ct: &Ciphertext) -> Vec<f64> {
        decode(&self.ev.decrypt(ct, &self.keys).unwrap()).unwrap()
    }
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    slot_error(a, b).0
}

#[test]
fn ntt_roundtrip_all_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [8usize, 256, 4096] {
        let p = Arc::new(RingParams::preset(n, 30, 3, 30).unwrap());
        let ch: Vec<usize> = (0..4).collect();
        let coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-(1 << 28)..(1 << 28))).collect();
        let a = RnsPolynomial::from_signed(&p, &ch, &coeffs);
        let f = a.ntt(NttDirection::Forward).unwrap();
        assert_eq!(f.ntt(NttDirection::Inverse).unwrap(), a, "N={n}");
        let z = RnsPolynomial::zero(&p, &ch, Domain::Coefficient);
        assert!(z.ntt(NttDirection::Forward).unwrap().is_zero());
    }
}

#[test]
fn rns_roundtrip_90_bit() {
    let m = ntt_primes(30, 3, 8192).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let q: BigUint = m.iter().map(|&x| BigUint::from(x)).product();
    for _ in 0..200 {
        let x = BigUint::from(rng.gen::<u128>()) % &q;
        let r = rns_decompose(&x, &m).unwrap();
        assert_eq!(rns_compose(&r, &m).unwrap(), x);
    }
}

#[test]
fn noise_budget() {
    let mut c = ctx();
    let zero = c.enc(&vec![0.0; 2048]);
    let e0 = max_err(&c.dec(&zero), &vec![0.0; 2048]);
    eprintln!("fresh zero: 2^{:.2}", e0.log2());
    assert!(e0 < 2f64.powi(-20));

    let v = c.random(2048);
    let w = c.random(2048);
    let a = c.enc(&v);
    let b = c.enc(&w);
    assert_ne!(a, c.enc(&v));

    let sum: Vec<f64> = v.iter().zip(&w).map(|(x, y)| x + y).collect();
    let e_add = max_err(&c.dec(&c.ev.add(&a, &b).unwrap()), &sum);
    eprintln!("add: 2^{:.2}", e_add.log2());
    assert!(e_add < 2f64.powi(-19));

    let mut rot = v.clone();
    rot.rotate_left(1);
    let r = c.ev.rotate(&a, 1, &c.keys).unwrap();
    let e_rot = max_err(&c.dec(&r), &rot);
    eprintln!("rotate: 2^{:.2}", e_rot.log2());
    assert!(e_rot < 2f64.powi(-19));

    let prod: Vec<f64> = v.iter().zip(&w).map(|(x, y)| x * y).collect();
    reset_ntt_invocations();
    let m = c.ev.mul(&a, &b, &c.keys).unwrap();
    let calls = ntt_invocations();
    eprintln!("mul transforms: {calls}");
    assert!(calls <= 2 * (c.p.max_level() as u64 + 1));
    let m = c.ev.rescale(&m).unwrap();
    let (e_mul, mag) = slot_error(&c.dec(&m), &prod);
    eprintln!("mul relative: 2^{:.2}", (e_mul / mag).log2());
    assert!(e_mul / mag < 2f64.powi(-12));

    let u = c.random(2048);
    let cu = c.enc(&u);
    let left = c.ev.mul_rescale(&m, &c.ev.drop_to_level(&cu, 2).unwrap(), &c.keys).unwrap();
    let wu = c.ev.mul_rescale(&b, &cu, &c.keys).unwrap();
    let right = c.ev.mul_rescale(&c.ev.drop_to_level(&a, 2).unwrap(), &wu, &c.keys).unwrap();
    assert_eq!(left.level(), 1);
    let want: Vec<f64> = prod.iter().zip(&u).map(|(x, y)| x * y).collect();
    let (e2, mag2) = slot_error(&c.dec(&left), &want);
    let (e3, _) = slot_error(&c.dec(&right), &want);
    eprintln!("depth 2: 2^{:.2} / 2^{:.2}", (e2 / mag2).log2(), (e3 / mag2).log2());
    assert!(e2 / mag2 < 2f64.powi(-10) && e3 / mag2 < 2f64.powi(-10));
    assert!(c.ev.rescale(&left).is_err());
}

#[test]
fn plaintext_ops_and_rotation_algebra() {
    let mut c = ctx();
    let v = c.random(2048);
    let a = c.enc(&v);
    let scale = c.p.scale();

    let twos = encode(&c.p, &vec![2.0; 2048], scale, 3).unwrap();
    let m = c.ev.mul_plain(&a, &twos).unwrap();
    assert_eq!(m.scale, a.scale * scale);
    let r = c.ev.rescale(&m).unwrap();
    assert_eq!(r.level(), 2);
    assert_eq!(r.scale, m.scale / c.p.modulus(2).value() as f64);
    let doubled: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
    assert!(max_err(&c.dec(&r), &doubled) < 2f64.powi(-15));

    let ones = encode(&c.p, &vec![1.0; 2048], scale, 3).unwrap();
    let r1 = c.ev.rescale(&c.ev.mul_plain(&a, &ones).unwrap()).unwrap();
    assert!(max_err(&c.dec(&r1), &v) < 2f64.powi(-15));

    let one_ct = c.enc(&vec![1.0; 2048]);
    let id = c.ev.mul_rescale(&a, &one_ct, &c.keys).unwrap();
    assert!(max_err(&c.dec(&id), &v) < 2f64.powi(-12));

    let z = c.enc(&vec![0.0; 2048]);
    assert!(max_err(&c.dec(&c.ev.add(&a, &z).unwrap()), &v) < 2f64.powi(-19));
    let half = encode(&c.p, &v, scale, 3).unwrap();
    let doubled_plain = c.ev.add_plain(&a, &half).unwrap();
    assert!(max_err(&c.dec(&doubled_plain), &doubled) < 2f64.powi(-19));

    assert_eq!(c.ev.rotate(&a, 0, &c.keys).unwrap(), a);
    let r12 = c.ev.rotate(&c.ev.rotate(&a, 1, &c.keys).unwrap(), 2, &c.keys).unwrap();
    let r3 = c.ev.rotate(&a, 3, &c.keys).unwrap();
    assert!(max_err(&c.dec(&r12), &c.dec(&r3)) < 2f64.powi(-18));
    assert!(matches!(c.ev.rotate(&a, 4, &c.keys), Err(CkksError::MissingKey(4))));

    let eight: Vec<f64> = (1..=8).map(|x| x as f64).collect();
    let e8 = c.enc(&eight);
    let d = c.dec(&c.ev.rotate(&e8, 1, &c.keys).unwrap());
    assert!(max_err(&d, &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 1.0]) < 2f64.powi(-19));

    let low = c.ev.drop_to_level(&a, 2).unwrap();
    assert!(c.ev.add(&a, &low).is_err());
    assert!(matches!(c.ev.add(&m, &a), Err(CkksError::Scale { .. })));
}

#[test]
fn fresh_noise_across_seeds() {
    let p = Arc::new(RingParams::desk());
    let ev = Evaluator::new(&p);
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = KeySet::generate(&p, &[], &mut rng).unwrap();
        let pt = encode(&p, &[], p.scale(), 3).unwrap();
        let ct = ev.encrypt(&pt, &keys, &mut rng).unwrap();
        let e = max_err(&decode(&ev.decrypt(&ct, &keys).unwrap()).unwrap(), &[0.0]);
        let zero = encode(&p, &vec![0.0; 2048], p.scale(), 3).unwrap();
        let full = ev.encrypt(&zero, &keys, &mut rng).unwrap();
        let ef = max_err(&decode(&ev.decrypt(&full, &keys).unwrap()).unwrap(), &vec![0.0; 2048]);
        let pk = ev.encrypt_public(&zero, &keys, &mut rng).unwrap();
        let ep = max_err(&decode(&ev.decrypt(&pk, &keys).unwrap()).unwrap(), &vec![0.0; 2048]);
        eprintln!("seed {seed}: one slot 2^{:.2}, full 2^{:.2}, public 2^{:.2}", e.log2(), ef.log2(), ep.log2());
        assert!(ef < 2f64.powi(-20));
        assert!(ep < 2f64.powi(-12));
    }
}

#[test]
fn special_moduli_coefficient_mode() {
    let p = Arc::new(
        RingParams::new(RingDescriptor {
            version: 1,
            degree: 16,
            moduli: vec![(1 << 13) + 1, (1 << 16) + 1, (1 << 13) - 1],
            special_moduli: vec![],
            scale_bits: 8,
            special_moduli_mode: true,
        })
        .unwrap(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ch = [0usize, 1, 2];
    let a: Vec<i64> = (0..16).map(|_| rng.gen_range(-50..50)).collect();
    let b: Vec<i64> = (0..16).map(|_| rng.gen_range(-50..50)).collect();
    let pa = RnsPolynomial::from_signed(&p, &ch, &a);
    let pb = RnsPolynomial::from_signed(&p, &ch, &b);
    let mut want = vec![0i64; 16];
    for i in 0..16 {
        for j in 0..16 {
            if i + j < 16 {
                want[i + j] += a[i] * b[j];
            } else {
                want[i + j - 16] -= a[i] * b[j];
            }
        }
    }
    assert_eq!(pa.negacyclic_mul(&pb).unwrap(), RnsPolynomial::from_signed(&p, &ch, &want));
    // 2^16 + 1 is ≡ 1 mod 32 and transforms; 2^13 ± 1 do not.
    assert!(pa.ntt(NttDirection::Forward).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn ring() -> Arc<RingParams> {
        Arc::new(RingParams::preset(8, 20, 2, 10).unwrap())
    }

    proptest! {
        #[test]
        fn ntt_is_exact_inverse(coeffs in proptest::collection::vec(-(1i64 << 18)..(1 << 18), 8)) {
            let p = ring();
            let a = RnsPolynomial::from_signed(&p, &[0, 1, 2], &coeffs);
            prop_assert_eq!(a.to_evaluation().unwrap().to_coefficient().unwrap(), a);
        }

        #[test]
        fn automorphisms_compose(coeffs in proptest::collection::vec(-100i64..100, 8), g in 0usize..8, h in 0usize..8) {
            let p = ring();
            let (g, h) = (2 * g + 1, 2 * h + 1);
            let a = RnsPolynomial::from_signed(&p, &[0, 1], &coeffs);
            let lhs = a.automorphism(g).unwrap().automorphism(h).unwrap();
            prop_assert_eq!(lhs, a.automorphism(g * h % 16).unwrap());
        }

        #[test]
        fn add_then_sub_restores(x in proptest::collection::vec(-1000i64..1000, 8), y in proptest::collection::vec(-1000i64..1000, 8)) {
            let p = ring();
            let a = RnsPolynomial::from_signed(&p, &[0, 1], &x);
            let b = RnsPolynomial::from_signed(&p, &[0, 1], &y);
            prop_assert_eq!(a.add(&b).unwrap().sub(&b).unwrap(), a);
        }
    }
}
