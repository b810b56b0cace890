mod common;

use common::*;
use ppimce::arith::{mod_addsub, mul_mod, AddSub, Modulus};
use ppimce::gc::{garble_and, AesHash, Block, GlobalDelta};
use ppimce::isa::{CInstKind, KernelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn add(a: u64, b: u64, q: &Modulus) -> u64 {
    mod_addsub(a, b, q, AddSub::Add).unwrap()
}

fn sub(a: u64, b: u64, q: &Modulus) -> u64 {
    mod_addsub(a, b, q, AddSub::Sub).unwrap()
}

#[test]
fn freexor_and_halfgate_match_library() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let delta = GlobalDelta::random(&mut rng);
    let mut core = gc_core(delta);
    for gid in 0..50 {
        let (a0, b0) = (Block::random(&mut rng), Block::random(&mut rng));
        let (c0, tg, te, cycles) = run_halfgate(&mut core, a0, b0, gid);
        let (want, rows) = garble_and(AesHash::fixed(), a0, b0, delta, gid);
        assert_eq!(cycles, 45);
        assert_eq!((c0, tg, te), (want, rows[0], rows[1]), "gate {gid}");

        core.write_row(A as usize, a0.0).unwrap();
        core.write_row(B as usize, b0.0).unwrap();
        let out = core.run_cinst(&ppimce::isa::Instr::new(CInstKind::FreeXor, D, A, B)).unwrap();
        assert_eq!(out.cycles, 3);
        assert_eq!(core.read_row(D as usize).unwrap(), (a0 ^ b0).0);
    }
}

#[test]
fn he_kernels_match_library() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for q in moduli() {
        let params = KernelParams::for_modulus(q);
        let mut core = he_core(&params);
        let qv = q.value();
        for _ in 0..20 {
            let a = [rng.gen_range(0..qv), rng.gen_range(0..qv)];
            let b = [rng.gen_range(0..qv), rng.gen_range(0..qv)];
            let w = [rng.gen_range(0..qv), rng.gen_range(0..qv)];
            let (r, _, _) = run_he(&mut core, CInstKind::PolyAdd, a, b, w);
            assert_eq!(r, [add(a[0], b[0], &q), add(a[1], b[1], &q)]);
            let (r, _, _) = run_he(&mut core, CInstKind::PolySub, a, b, w);
            assert_eq!(r, [sub(a[0], b[0], &q), sub(a[1], b[1], &q)]);
            let (r, _, _) = run_he(&mut core, CInstKind::PolyMul, a, b, w);
            assert_eq!(r, [mul_mod(a[0], b[0], &q).unwrap(), mul_mod(a[1], b[1], &q).unwrap()], "q={qv}");
            let (r, _, _) = run_he(&mut core, CInstKind::PolyPerm, a, [u64::MAX, 0], w);
            assert_eq!(r, [sub(0, a[0], &q), a[1]]);
            let (x, y, _) = run_he(&mut core, CInstKind::Ntt, a, b, w);
            for l in 0..2 {
                let wb = mul_mod(w[l], b[l], &q).unwrap();
                assert_eq!((x[l], y[l]), (add(a[l], wb, &q), sub(a[l], wb, &q)));
            }
            let (x, y, _) = run_he(&mut core, CInstKind::Intt, a, b, w);
            for l in 0..2 {
                let d = sub(a[l], b[l], &q);
                assert_eq!((x[l], y[l]), (add(a[l], b[l], &q), mul_mod(d, w[l], &q).unwrap()));
            }
        }
    }
}

#[test]
fn special_reduction_is_cheaper() {
    let q = Modulus::pow_two_plus_one(16).unwrap();
    let special = ppimce::isa::microprogram_for(CInstKind::PolyMul, Some(&KernelParams::for_modulus(q))).unwrap();
    let barrett = ppimce::isa::microprogram_for(CInstKind::PolyMul, Some(&KernelParams::barrett(q))).unwrap();
    assert!(special.len() < barrett.len());
}
