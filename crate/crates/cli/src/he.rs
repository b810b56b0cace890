use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use ppimce::ckks::{encode, Ciphertext, Evaluator, KeySet, RingParams};
use ppimce::compiler::{compile_he, HeBackend, HeMachine, HeProgram, HeValue};
use ppimce::sim::ArchProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::Ctx;

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    Add,
    Mul,
    Rot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Reference,
    Microcode,
}

#[derive(Args)]
/// Cycle count of one HE operation, checked against the software evaluator.
pub struct HeBenchArgs {
    #[arg(long, value_enum)]
    op: Op,
    /// Ring degree; three 30-bit primes with scale 2^30.
    #[arg(long, default_value_t = 4096)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Backend::Reference)]
    backend: Backend,
}

pub fn bench(ctx: &Ctx, a: HeBenchArgs) -> Result<String> {
    if !a.n.is_power_of_two() || a.n < 8 {
        bail!("--n must be a power of two >= 8");
    }
    let params = Arc::new(RingParams::preset(a.n, 30, 3, 30)?);
    let profile = ctx.profile(ArchProfile::default())?;
    let level = params.max_level();
    let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
    let rotations: &[i64] = if matches!(a.op, Op::Rot) { &[1] } else { &[] };
    let keys = KeySet::generate(&params, rotations, &mut rng)?;
    let ev = Evaluator::new(&params);
    let slots = params.slots();
    let enc = |rng: &mut ChaCha20Rng| -> Result<Ciphertext> {
        let v: Vec<f64> = (0..slots).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(ev.encrypt(&encode(&params, &v, params.scale(), level)?, &keys, rng)?)
    };
    let (x, y) = (enc(&mut rng)?, enc(&mut rng)?);
    let base = HeProgram::new().cipher("a", level).cipher("b", level);
    let (name, prog, want) = match a.op {
        Op::Add => ("add", base.add("c", "a", "b"), ev.add(&x, &y)?),
        Op::Mul => ("mul", base.mul("c", "a", "b").rescale("c", "c"), ev.rescale(&ev.mul(&x, &y, &keys)?)?),
        Op::Rot => ("rot", base.rotate("c", "a", 1), ev.rotate(&x, 1, &keys)?),
    };
    let stream = compile_he(&prog.output("c"), &params, &profile)?;
    let cost = stream.cost(&params, &profile)?;
    let backend = match a.backend {
        Backend::Reference => HeBackend::Reference,
        Backend::Microcode => HeBackend::Microcode,
    };
    let inputs = BTreeMap::from([("a".to_string(), HeValue::Cipher(x)), ("b".to_string(), HeValue::Cipher(y))]);
    let out = HeMachine::new(&params, &profile, backend).run(&stream, &inputs, Some(&keys.evaluation_keys()))?;
    let check = matches!(&out["c"], HeValue::Cipher(c) if *c == want);
    Ok(format!(
        "op,n,cycles,latency_us,broadcasts,transforms,check\n{name},{},{},{:.3},{},{},{}\n",
        a.n,
        cost.total,
        cost.total as f64 / profile.frequency_hz * 1e6,
        cost.broadcasts,
        cost.transforms,
        if check { "pass" } else { "fail" }
    ))
}
