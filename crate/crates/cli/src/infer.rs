use std::fmt::Write;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use ppimce::ckks::RingParams;
use ppimce::compiler::{compile_network, FixedPoint, LayerGraph};
use ppimce::metrics::{ComponentBudget, Report, ReportInput, TechScaling};
use ppimce::ppml::{default_bandwidths, parse_bandwidths, run_inference, write_transcript_pair, BandwidthPreset, ProtocolConfig};
use ppimce::sim::ArchProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::Ctx;

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn bandwidths(path: &Option<PathBuf>) -> Result<Vec<BandwidthPreset>> {
    match path {
        Some(p) => Ok(parse_bandwidths(&read(p)?)?),
        None => Ok(default_bandwidths()),
    }
}

#[derive(Args)]
/// Run two-party inference of a model on one input.
pub struct PpmlArgs {
    /// Model descriptor JSON (with --tensors) or an inline layer graph.
    #[arg(long)]
    model: PathBuf,
    /// Little-endian f64 tensor file referenced by the descriptor.
    #[arg(long)]
    tensors: Option<PathBuf>,
    /// Comma-separated input values; seeded uniform [-1, 1) when omitted.
    #[arg(long)]
    input: Option<String>,
    /// Write the run's cycles and ledger for `report`.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// Write client.bin and server.bin transcripts into this directory.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

pub fn ppml(ctx: &Ctx, a: PpmlArgs) -> Result<String> {
    let text = read(&a.model)?;
    let graph = match &a.tensors {
        Some(t) => LayerGraph::from_descriptor(&text, &std::fs::read(t)?)?,
        None => serde_json::from_str(&text).context("parsing layer graph")?,
    };
    let input: Vec<f64> = match &a.input {
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad input {t:?}")))
            .collect::<Result<_>>()?,
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed ^ 0x1A9u64);
            (0..graph.input).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    let profile = ctx.profile(ArchProfile::default())?;
    let params = Arc::new(RingParams::desk());
    let plan = compile_network(&graph, &params, &profile, &FixedPoint::default())?;
    let res = run_inference(&plan, &params, &profile, &input, &ProtocolConfig::default(), ctx.seed)?;
    if let Some(dir) = &a.transcript {
        std::fs::create_dir_all(dir)?;
        let (mut c, mut s) = (Vec::new(), Vec::new());
        write_transcript_pair(&mut c, &mut s, &res.transcript)?;
        std::fs::write(dir.join("client.bin"), c)?;
        std::fs::write(dir.join("server.bin"), s)?;
    }
    if let Some(path) = &a.artifacts {
        let art = ReportInput { he_cycles: res.cost.he_cycles, gc_cycles: res.cost.gc_cycles, ledger: Some(res.ledger) };
        std::fs::write(path, serde_json::to_string_pretty(&art)? + "\n")?;
    }
    let mut s = String::from("prediction,output,he_cycles,gc_cycles,online_he_bytes,online_gc_bytes,preprocessing_bytes\n");
    let out: Vec<String> = res.output.iter().map(|v| format!("{v}")).collect();
    let l = res.ledger;
    writeln!(
        s,
        "{},{},{},{},{},{},{}",
        res.prediction,
        out.join(";"),
        res.cost.he_cycles,
        res.cost.gc_cycles,
        l.online_he,
        l.online_gc,
        l.preprocessing
    )?;
    Ok(s)
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
/// Latency, energy, area and bandwidth curve from run artifacts.
pub struct ReportArgs {
    /// Artifacts written by `ppml --artifacts`.
    #[arg(long)]
    input: PathBuf,
    /// Component budget JSON; the shipped calibration when omitted.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Technology node in nm.
    #[arg(long, default_value_t = 5)]
    node: u32,
    /// JSON list of link rates in bits/s.
    #[arg(long)]
    bandwidths: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

pub fn report(ctx: &Ctx, a: ReportArgs) -> Result<String> {
    let input: ReportInput = serde_json::from_str(&read(&a.input)?).context("parsing artifacts")?;
    let budget = match &a.calibration {
        Some(p) => ComponentBudget::from_json(&read(p)?)?,
        None => ComponentBudget::shipped(),
    };
    let budget = budget.scale(&TechScaling::default(), a.node)?;
    let profile = ctx.profile(ArchProfile::default())?;
    let r = Report::build(&input, &budget, profile.frequency_hz, &bandwidths(&a.bandwidths)?);
    Ok(match a.format {
        Format::Csv => r.to_csv(),
        Format::Json => r.to_json(),
    })
}
