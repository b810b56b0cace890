use std::sync::Arc;

use ppimce::arith::Modulus;
use ppimce::ckks::{NttTables, RingDescriptor, RingParams, RnsPolynomial};
use ppimce::dispatch::*;
use ppimce::isa::{CInstKind, Instr, KernelParams};
use ppimce::sim::{ArchProfile, CoreState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fx(rd: u32, a: u32, b: u32) -> DispatchInst {
    DispatchInst::new(Instr::new(CInstKind::FreeXor, rd, a, b))
}

fn hg(rd: u32, a: u32, b: u32) -> DispatchInst {
    DispatchInst::new(Instr::new(CInstKind::HalfGate, rd, a, b))
}

/// Ia FreeXOR → w0; Ib, Ic Half-Gates → w1, w2; Id reads w0, w1; Ie reads w2.
fn example_dag() -> Vec<DispatchInst> {
    let (x, w) = (100u32, 200u32);
    vec![
        fx(w, x, x + 1),
        hg(w + 4, x + 2, x + 3),
        hg(w + 8, x + 4, x + 5),
        fx(w + 12, w, w + 4),
        hg(w + 16, w + 8, x + 6),
    ]
}

#[test]
fn two_unit_trace() {
    let (trace, report, _) = run_program(&example_dag(), &DispatchConfig::with_units(2), TimingOnly).unwrap();
    let r = &trace.records;
    let complete: Vec<u64> = r.iter().map(|x| x.complete.unwrap()).collect();
    let issue: Vec<u64> = r.iter().map(|x| x.issue.unwrap()).collect();
    for (got, want) in complete.iter().zip([4u64, 46, 48]) {
        assert!(got.abs_diff(want) <= 1, "{complete:?}");
    }
    assert!(issue.windows(2).all(|w| w[0] < w[1]), "{issue:?}");
    assert_eq!(issue[..3], [1, 2, 4]);
    assert_eq!(r[0].unit, Some(0));
    assert_eq!(r[1].unit, Some(1));
    assert_eq!(r[2].unit, Some(0));
    assert!(r[2].banked && r[3].banked && r[4].banked);
    assert_eq!(r[3].unit, Some(1));
    assert_eq!(r[4].unit, Some(0));
    assert_eq!(report.total_cycles, complete.iter().copied().max().unwrap());
}

#[test]
fn tick_examples() {
    let mut d = Dispatcher::new(DispatchConfig::with_units(1), TimingOnly).unwrap();
    assert!(d.tick().unwrap().is_empty());
    assert_eq!(d.submit(fx(10, 1, 2)).unwrap(), SubmitOutcome::Issued { id: 0, unit: 0 });
    d.tick().unwrap();
    // Two banked and ready, one unit: the older issues first.
    assert_eq!(d.submit(fx(11, 1, 2)).unwrap(), SubmitOutcome::Banked { id: 1 });
    d.tick().unwrap();
    assert_eq!(d.submit(fx(12, 1, 2)).unwrap(), SubmitOutcome::Banked { id: 2 });
    let ev = d.tick().unwrap();
    assert_eq!(
        ev,
        vec![
            DispatchEvent::Retired { id: 0, unit: 0, cycle: 3 },
            DispatchEvent::Issued { id: 1, unit: 0, cycle: 4 },
        ]
    );
    assert!(d.submit(DispatchInst::new(Instr::new(CInstKind::PolyAdd, 1, 2, 3))).is_err());
}

#[test]
fn single_and_chain() {
    let cfg = DispatchConfig::with_units(16);
    let (_, r, _) = run_program(&[fx(10, 1, 2)], &cfg, TimingOnly).unwrap();
    assert_eq!(r.total_cycles, 3);
    let k = 20;
    let chain: Vec<DispatchInst> = (0..k).map(|i| fx(100 + i + 1, 100 + i, 1)).collect();
    let (_, r, _) = run_program(&chain, &cfg, TimingOnly).unwrap();
    assert_eq!(r.total_cycles, 3 * k as u64);
}

#[test]
fn unit_scaling() {
    let gates: Vec<DispatchInst> = (0..512u32).map(|i| hg(1000 + 4 * i, 1, 2)).collect();
    let (_, one, _) = run_program(&gates, &DispatchConfig::with_units(1), TimingOnly).unwrap();
    let (_, many, _) = run_program(&gates, &DispatchConfig::with_units(16), TimingOnly).unwrap();
    assert_eq!(one.total_cycles, 512 * 45);
    assert_eq!(many.total_cycles, 45 * 32 + 15);
    let speedup = one.total_cycles as f64 / many.total_cycles as f64;
    assert!(speedup >= 14.0, "{speedup}");
}

/// Independent list scheduler: one fetch per cycle, ready when every older
/// instruction touching the same rows (RAW, WAW, WAR) has completed, oldest
/// ready instruction first, lowest free unit.
fn oracle(prog: &[DispatchInst], units: usize) -> Vec<(u64, u64)> {
    let lat = |k: CInstKind| if k == CInstKind::FreeXor { 3 } else { 45 };
    let conflicts = |j: &DispatchInst, i: &DispatchInst| {
        i.inputs.iter().any(|a| j.outputs.contains(a))
            || i.outputs.iter().any(|a| j.outputs.contains(a) || j.inputs.contains(a))
    };
    let mut sched: Vec<Option<(u64, u64)>> = vec![None; prog.len()];
    let mut free_at = vec![1u64; units];
    let mut c = 0;
    while sched.iter().any(Option::is_none) {
        c += 1;
        for i in 0..prog.len().min(c as usize) {
            if sched[i].is_some() {
                continue;
            }
            let ready = (0..i).all(|j| !conflicts(&prog[j], &prog[i]) || sched[j].is_some_and(|(_, e)| e < c));
            let unit = (0..units).find(|&u| free_at[u] <= c);
            if let (true, Some(u)) = (ready, unit) {
                let e = c + lat(prog[i].instr.kind) - 1;
                sched[i] = Some((c, e));
                free_at[u] = e + 1;
            }
        }
    }
    sched.into_iter().map(Option::unwrap).collect()
}

#[test]
fn matches_list_scheduling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..300 {
        let n = rng.gen_range(1..=20);
        let units = rng.gen_range(1..=4);
        // A small row pool forces RAW, WAW and WAR hazards.
        let prog: Vec<DispatchInst> = (0..n)
            .map(|_| {
                let a = rng.gen_range(0..12) * 4;
                let b = rng.gen_range(0..12) * 4;
                let d = rng.gen_range(0..12) * 4;
                if rng.gen_bool(0.5) { fx(d, a, b) } else { hg(d, a, b) }
            })
            .collect();
        let (trace, _, _) = run_program(&prog, &DispatchConfig::with_units(units), TimingOnly).unwrap();
        let got: Vec<(u64, u64)> = trace.records.iter().map(|r| (r.issue.unwrap(), r.complete.unwrap())).collect();
        assert_eq!(got, oracle(&prog, units), "trial {trial}");
    }
}

#[test]
fn waw_is_serialized() {
    let prog = vec![hg(40, 1, 2), fx(40, 3, 4)];
    let (trace, _, _) = run_program(&prog, &DispatchConfig::with_units(2), TimingOnly).unwrap();
    assert_eq!(trace.records[1].issue, Some(46));
}

#[test]
fn backpressure_stalls_front_end() {
    let mut cfg = DispatchConfig::with_units(1);
    cfg.bank_bytes = 2 * BANK_ENTRY_BYTES;
    let prog: Vec<DispatchInst> = (0..6u32).map(|i| fx(50 + i, 1, 2)).collect();
    let (trace, report, _) = run_program(&prog, &cfg, TimingOnly).unwrap();
    assert!(report.frontend_stalls > 0);
    assert!(report.bank_peak <= 2);
    assert_eq!(report.total_cycles, 18);
    assert!(trace.records.iter().all(|r| r.complete.is_some()));
}

#[test]
fn exports() {
    let prog = example_dag();
    let (trace, _, _) = run_program(&prog, &DispatchConfig::with_units(2), TimingOnly).unwrap();
    let jsonl = trace_jsonl(&trace);
    let lines: Vec<&str> = jsonl.lines().collect();
    assert_eq!(lines.len(), 5);
    let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(v["complete"], 46);
    let dot = trace_dot(&prog);
    assert!(dot.contains("i0 -> i3") && dot.contains("i1 -> i3") && dot.contains("i2 -> i4"));
}

fn ring(n: usize) -> (Arc<RingParams>, Modulus) {
    let q = ppimce::ckks::ntt_primes(30, 1, 2 * n as u64).unwrap()[0];
    let p = RingParams::new(RingDescriptor {
        version: 1,
        degree: n,
        moduli: vec![q],
        special_moduli: vec![],
        scale_bits: 20,
        special_moduli_mode: false,
    })
    .unwrap();
    (Arc::new(p), Modulus::general(q).unwrap())
}

#[test]
fn broadcast_add_matches_library() {
    let (p, q) = ring(8);
    let mut core = CoreState::for_he(&ArchProfile::default(), &KernelParams::for_modulus(q)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<u64> = (0..8).map(|_| rng.gen_range(0..q.value())).collect();
    let b: Vec<u64> = (0..8).map(|_| rng.gen_range(0..q.value())).collect();
    let (sum, _) = he_broadcast_exec(&mut core, CInstKind::PolyAdd, &a, &b, None).unwrap();
    let pa = RnsPolynomial::from_channels(&p, &[0], vec![a], ppimce::ckks::Domain::Coefficient).unwrap();
    let pb = RnsPolynomial::from_channels(&p, &[0], vec![b], ppimce::ckks::Domain::Coefficient).unwrap();
    assert_eq!(sum, pa.add(&pb).unwrap().residues(0));
}

#[test]
fn ntt_plan_matches_library() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (n, cores, transforms) in [(8usize, 8usize, 2usize), (8, 4, 1), (256, 256, 2)] {
        let (_, q) = ring(n);
        let tables = NttTables::new(n, &q).unwrap();
        let mut core = CoreState::for_he(&ArchProfile::default(), &KernelParams::for_modulus(q)).unwrap();
        let plan = ntt_schedule(n, cores, transforms, 1, 965).unwrap();
        assert_eq!(plan.stages.len(), n.trailing_zeros() as usize);
        assert!(plan.cores_used.iter().all(|&c| c <= n / 2));
        let polys: Vec<Vec<u64>> = (0..transforms)
            .map(|_| (0..n).map(|_| rng.gen_range(0..q.value())).collect())
            .collect();
        let out = execute_ntt_plan(&plan, &polys, &tables, &mut core).unwrap();
        for (x, y) in polys.iter().zip(&out) {
            let mut want = x.clone();
            tables.forward(&mut want);
            assert_eq!(*y, want, "N={n}");
        }
    }
}

#[test]
fn inverse_plan_matches_library() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (n, transforms) in [(8usize, 1usize), (256, 2)] {
        let (_, q) = ring(n);
        let tables = NttTables::new(n, &q).unwrap();
        let mut core = CoreState::for_he(&ArchProfile::default(), &KernelParams::for_modulus(q)).unwrap();
        let plan = ntt_schedule_dir(n, n, transforms, ppimce::ckks::NttDirection::Inverse, 1, 963).unwrap();
        let polys: Vec<Vec<u64>> = (0..transforms)
            .map(|_| (0..n).map(|_| rng.gen_range(0..q.value())).collect())
            .collect();
        let out = execute_ntt_plan(&plan, &polys, &tables, &mut core).unwrap();
        let qv = q.value() as u128;
        let n_inv = (1..n as u128).map(|k| 1 + k * qv).find(|x| x % n as u128 == 0).unwrap() / n as u128;
        for (x, y) in polys.iter().zip(&out) {
            let mut want = x.clone();
            tables.inverse(&mut want);
            let scaled: Vec<u64> = y.iter().map(|&v| ((v as u128 * n_inv) % qv) as u64).collect();
            assert_eq!(scaled, want, "N={n}");
        }
    }
}
