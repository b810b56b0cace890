mod gc;
mod he;
mod infer;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ppimce::sim::ArchProfile;

#[derive(Parser)]
#[command(name = "ppimce", version, about = "In-memory-computing accelerator simulator for CKKS and garbled circuits")]
struct Cli {
    /// Seed for every random choice; runs are deterministic given it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Architecture profile JSON. Falls back to $PPIMCE_PROFILE, then the built-in default.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    Garble(gc::GarbleArgs),
    Eval(gc::EvalArgs),
    HeBench(he::HeBenchArgs),
    GcBench(gc::GcBenchArgs),
    Simulate(sim::SimulateArgs),
    Ppml(infer::PpmlArgs),
    Report(infer::ReportArgs),
}

pub struct Ctx {
    pub seed: u64,
    profile: Option<PathBuf>,
}

impl Ctx {
    /// `fallback` is used when neither `--profile` nor `PPIMCE_PROFILE` is set.
    pub fn profile(&self, fallback: ArchProfile) -> Result<ArchProfile> {
        let path = self.profile.clone().or_else(|| std::env::var_os("PPIMCE_PROFILE").map(PathBuf::from));
        match path {
            None => Ok(fallback),
            Some(p) => {
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading profile {}", p.display()))?;
                Ok(ArchProfile::from_json(&text)?)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { seed: cli.seed, profile: cli.profile };
    let out = match cli.cmd {
        Cmd::Garble(a) => gc::garble(&ctx, a),
        Cmd::Eval(a) => gc::eval(&ctx, a),
        Cmd::HeBench(a) => he::bench(&ctx, a),
        Cmd::GcBench(a) => gc::bench(&ctx, a),
        Cmd::Simulate(a) => sim::simulate(&ctx, a),
        Cmd::Ppml(a) => infer::ppml(&ctx, a),
        Cmd::Report(a) => infer::report(&ctx, a),
    };
    match out {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Comma-separated integers, decimal or 0x-prefixed hex.
pub fn parse_words(s: &str) -> Result<Vec<u128>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let t = t.trim();
            match t.strip_prefix("0x") {
                Some(h) => u128::from_str_radix(h, 16),
                None => t.parse(),
            }
            .with_context(|| format!("bad value {t:?}"))
        })
        .collect()
}
