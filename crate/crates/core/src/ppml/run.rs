use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::channel::Channel;
use super::ledger::CommLedger;
use super::message::{Message, Party};
use super::party::{Client, Server};
use super::{ProtocolConfig, ProtocolError};
use crate::ckks::RingParams;
use crate::compiler::{compile_netlist, concat_circuits, CompileError, NonLinearPhase, Phase, PhasePlan};
use crate::dispatch::{run_program, DispatchConfig, TimingOnly};
use crate::sim::ArchProfile;

/// Both parties' shares after a phase; they sum to the activation mod `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareCheckpoint {
    pub after_phase: usize,
    pub client: Vec<u64>,
    pub server: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceCost {
    /// Cycles of each phase, in plan order.
    pub phase_cycles: Vec<u64>,
    pub he_cycles: u64,
    pub gc_cycles: u64,
}

impl InferenceCost {
    pub fn total_cycles(&self) -> u64 {
        self.he_cycles + self.gc_cycles
    }
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// Index of the largest output.
    pub prediction: usize,
    pub output: Vec<f64>,
    pub ledger: CommLedger,
    pub cost: InferenceCost,
    pub checkpoints: Vec<ShareCheckpoint>,
    pub transcript: Vec<Message>,
}

/// Cycles to evaluate a garbled phase on the GC units. Circuits are
/// packed into as few programs as the CEM capacity allows; programs run
/// back to back.
pub fn gc_phase_cycles(phase: &NonLinearPhase, profile: &ArchProfile) -> Result<u64, CompileError> {
    let config = DispatchConfig::with_units(profile.gc_units);
    let mut chunk = phase.circuits.len().max(1);
    'outer: loop {
        let mut total = 0;
        for group in phase.circuits.chunks(chunk) {
            let circuit = concat_circuits(group)?;
            match compile_netlist(&circuit, profile) {
                Ok(c) => total += run_program(&c.program, &config, TimingOnly)?.1.total_cycles,
                Err(CompileError::Capacity { .. }) if chunk > 1 => {
                    chunk /= 2;
                    continue 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        return Ok(total);
    }
}

fn plan_cost(plan: &PhasePlan, params: &RingParams, profile: &ArchProfile) -> Result<InferenceCost, CompileError> {
    let mut cost = InferenceCost::default();
    for phase in &plan.phases {
        let c = match phase {
            Phase::Linear(l) => {
                let c = l.stream.cost(params, profile)?.total;
                cost.he_cycles += c;
                c
            }
            Phase::NonLinear(n) => {
                let c = gc_phase_cycles(n, profile)?;
                cost.gc_cycles += c;
                c
            }
        };
        cost.phase_cycles.push(c);
    }
    Ok(cost)
}

/// Runs client and server over an in-process channel, delivering messages
/// in the order they were sent.
pub fn run_inference(
    plan: &PhasePlan,
    params: &Arc<RingParams>,
    profile: &ArchProfile,
    input: &[f64],
    cfg: &ProtocolConfig,
    seed: u64,
) -> Result<InferenceResult, ProtocolError> {
    let mut ch = Channel::new(cfg.ot_bytes_per_wire);
    let mut client = Client::new(params, plan.public()?, input, cfg, seed)?;
    let mut server = Server::new(params, plan.clone(), profile, cfg, seed ^ 0x5eed_5e4e_u64);
    let mut checkpoints = Vec::new();
    client.start(&mut ch)?;
    while let Some(m) = ch.pop() {
        match m.to {
            Party::Server => server.handle(m, &mut ch)?,
            Party::Client => client.handle(m, &mut ch)?,
            Party::Ot => return Err(ProtocolError::Order("OT message on the queue".into())),
        }
        if client.completed_phases().min(server.completed_phases()) > checkpoints.len() {
            checkpoints.push(ShareCheckpoint {
                after_phase: checkpoints.len(),
                client: client.share().to_vec(),
                server: server.share().to_vec(),
            });
        }
    }
    let ints = client
        .output()
        .ok_or_else(|| ProtocolError::Order(format!("run stopped after {} phases", client.completed_phases())))?;
    let scale = 2f64.powi(plan.frac_bits_before(plan.phases.len()) as i32);
    let output: Vec<f64> = ints.iter().map(|&v| v as f64 / scale).collect();
    let prediction = ints
        .iter()
        .enumerate()
        .max_by_key(|&(i, &v)| (v, std::cmp::Reverse(i)))
        .map_or(0, |(i, _)| i);
    let cost = plan_cost(plan, params, profile)?;
    let (ledger, transcript) = ch.into_parts();
    Ok(InferenceResult {
        prediction,
        output,
        ledger,
        cost,
        checkpoints,
        transcript,
    })
}
