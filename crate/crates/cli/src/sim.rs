use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use ppimce::dispatch::{run_program, trace_jsonl, DispatchConfig, DispatchInst, TimingOnly};
use ppimce::isa::assemble;

use crate::Ctx;

#[derive(Args)]
/// Schedule a C-Inst assembly stream on the GC units.
pub struct SimulateArgs {
    /// One `OP rd, rs1, rs2` per line.
    #[arg(long)]
    program: PathBuf,
    #[arg(long, default_value_t = 16)]
    units: usize,
    /// Write the schedule as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

pub fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<String> {
    let profile = ctx.profile(Default::default())?;
    let text = std::fs::read_to_string(&a.program).with_context(|| format!("reading {}", a.program.display()))?;
    let program: Vec<DispatchInst> = assemble(&text)?.into_iter().map(DispatchInst::new).collect();
    let config = DispatchConfig::with_units(a.units);
    let (trace, report, _) = run_program(&program, &config, TimingOnly)?;
    if let Some(path) = &a.trace {
        std::fs::write(path, trace_jsonl(&trace))?;
    }
    Ok(format!(
        "instructions,units,cycles,latency_us,bank_peak,cam_peak,frontend_stalls\n{},{},{},{:.3},{},{},{}\n",
        report.instructions,
        a.units,
        report.total_cycles,
        report.total_cycles as f64 / profile.frequency_hz * 1e6,
        report.bank_peak,
        report.cam_peak,
        report.frontend_stalls
    ))
}
