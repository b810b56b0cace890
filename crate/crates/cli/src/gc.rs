use std::fmt::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use ppimce::compiler::compile_netlist;
use ppimce::dispatch::{run_program, DispatchConfig, TimingOnly};
use ppimce::gc::builder::{benchmark, BENCHMARKS};
use ppimce::gc::container::{read_container, write_container};
use ppimce::gc::{decode, evaluate, garble as garble_circuit, parse_bristol, split_words, write_bristol, Block, Circuit, GlobalDelta};
use ppimce::sim::ArchProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::{parse_words, Ctx};

/// A built-in benchmark name or a Bristol file path.
fn load_circuit(name: &str) -> Result<Circuit> {
    if let Some(c) = benchmark(name) {
        return Ok(c);
    }
    let text = std::fs::read_to_string(name)
        .with_context(|| format!("{name:?} is neither a benchmark ({}) nor a readable file", BENCHMARKS.join(", ")))?;
    Ok(parse_bristol(&text)?)
}

fn input_bits(c: &Circuit, words: &[u128]) -> Result<Vec<bool>> {
    if words.len() != c.inputs().len() {
        bail!("circuit has {} input groups, got {} values", c.inputs().len(), words.len());
    }
    Ok(c.inputs()
        .iter()
        .zip(words)
        .flat_map(|(g, &v)| (0..g.len()).map(move |i| v >> i & 1 == 1))
        .collect())
}

#[derive(Args)]
/// Garble a circuit and write the tables and active input labels.
pub struct GarbleArgs {
    #[arg(long)]
    circuit: String,
    /// One value per input group.
    #[arg(long)]
    input: String,
    #[arg(long)]
    out: PathBuf,
}

pub fn garble(ctx: &Ctx, a: GarbleArgs) -> Result<String> {
    let c = load_circuit(&a.circuit)?;
    let bits = input_bits(&c, &parse_words(&a.input)?)?;
    let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
    let delta = GlobalDelta::random(&mut rng);
    let (gc, enc) = garble_circuit(&c, delta, &mut rng);
    let labels: Vec<u8> = enc.encode(&bits)?.iter().flat_map(|l| l.to_bytes()).collect();
    let container = write_container(&gc, c.gates().len());
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("garbled.pgc"), &container)?;
    std::fs::write(a.out.join("labels.bin"), &labels)?;
    Ok(format!(
        "and_gates,table_bytes,container_bytes,label_bytes\n{},{},{},{}\n",
        gc.tables.len(),
        gc.table_bytes(),
        container.len(),
        labels.len()
    ))
}

#[derive(Args)]
/// Evaluate a garbled circuit written by `garble` and decode its outputs.
pub struct EvalArgs {
    #[arg(long)]
    circuit: String,
    /// Directory written by `garble`.
    #[arg(long)]
    dir: PathBuf,
    /// Plaintext inputs; when given, the decoded result is checked against them.
    #[arg(long)]
    expect_input: Option<String>,
}

pub fn eval(_ctx: &Ctx, a: EvalArgs) -> Result<String> {
    let c = load_circuit(&a.circuit)?;
    let (gc, gates) = read_container(&std::fs::read(a.dir.join("garbled.pgc"))?)?;
    if gates != c.gates().len() {
        bail!("container holds {gates} gates, circuit has {}", c.gates().len());
    }
    let raw = std::fs::read(a.dir.join("labels.bin"))?;
    if raw.len() != 16 * c.input_bits() {
        bail!("labels.bin has {} bytes, expected {}", raw.len(), 16 * c.input_bits());
    }
    let active: Vec<Block> = raw.chunks_exact(16).map(|b| Block::from_bytes(b.try_into().unwrap())).collect();
    let bits = decode(&gc, &evaluate(&gc, &c, &active)?)?;
    let words = split_words(&bits, c.outputs().iter().map(Vec::len));
    let want = match &a.expect_input {
        Some(s) => Some(c.eval_words(&parse_words(s)?)?),
        None => None,
    };
    let mut s = String::from("output,value,check\n");
    for (i, w) in words.iter().enumerate() {
        let check = want.as_ref().map_or("-", |v| if v[i] == *w { "pass" } else { "fail" });
        writeln!(s, "{i},{w:#x},{check}")?;
    }
    Ok(s)
}

#[derive(Args)]
/// Cycle count of a GC benchmark on the GC units.
pub struct GcBenchArgs {
    /// Benchmark name, Bristol path, or `all`.
    #[arg(long)]
    circuit: String,
    #[arg(long, default_value_t = 16)]
    units: usize,
    /// Also write each benchmark circuit as a Bristol file into this directory.
    #[arg(long)]
    emit_bristol: Option<PathBuf>,
}

pub fn bench(ctx: &Ctx, a: GcBenchArgs) -> Result<String> {
    let profile = ctx.profile(ArchProfile::gc_benchmark())?;
    let names: Vec<String> = if a.circuit == "all" {
        BENCHMARKS.iter().map(|s| s.to_string()).collect()
    } else {
        vec![a.circuit.clone()]
    };
    let config = DispatchConfig::with_units(a.units);
    let mut s = String::from("circuit,units,gates,and,xor,inv,table_bytes,cycles,latency_us\n");
    for name in names {
        let c = load_circuit(&name)?;
        if let Some(dir) = &a.emit_bristol {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.txt")), write_bristol(&c))?;
        }
        let compiled = compile_netlist(&c, &profile)?;
        let (_, report, _) = run_program(&compiled.program, &config, TimingOnly)?;
        let n = c.counts();
        writeln!(
            s,
            "{name},{},{},{},{},{},{},{},{:.3}",
            a.units,
            n.total(),
            n.and,
            n.xor,
            n.inv,
            32 * n.and,
            report.total_cycles,
            report.total_cycles as f64 / profile.frequency_hz * 1e6
        )?;
    }
    Ok(s)
}
