use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::channel::Channel;
use super::message::{pack_bits, unpack_bits, Message, MessageKind, Party};
use super::{ProtocolConfig, ProtocolError};
use crate::ckks::{
    decode, encode, read_ciphertext, read_eval_keys, write_ciphertext, write_eval_keys, Evaluator, EvaluationKeys,
    KeySet, RingParams,
};
use crate::compiler::{concat_circuits, FixedPoint, HeMachine, HeOp, HeValue, Phase, PhasePlan};
use crate::gc::{evaluate, garble, Block, Circuit, GarbledCircuit, GateKind, GlobalDelta};
use crate::sim::ArchProfile;

/// What the client may know about a phase: shapes and public circuits,
/// never weights.
#[derive(Debug, Clone)]
pub enum PublicPhase {
    Linear {
        inputs: usize,
        outputs: usize,
        slots: usize,
        level: usize,
        rotations: Vec<i64>,
    },
    NonLinear {
        gather: Vec<Vec<usize>>,
        /// All circuits of the phase side by side.
        circuit: Circuit,
    },
}

#[derive(Debug, Clone)]
pub struct PublicPlan {
    pub phases: Vec<PublicPhase>,
    pub fixed: FixedPoint,
    pub input_width: usize,
    /// Fractional bits of the final output.
    pub output_frac_bits: u32,
}

impl PhasePlan {
    pub fn public(&self) -> Result<PublicPlan, ProtocolError> {
        let phases = self
            .phases
            .iter()
            .map(|p| {
                Ok(match p {
                    Phase::Linear(l) => PublicPhase::Linear {
                        inputs: l.inputs,
                        outputs: l.outputs,
                        slots: l.slots,
                        level: l.level,
                        rotations: l.program.rotations(),
                    },
                    Phase::NonLinear(n) => PublicPhase::NonLinear {
                        gather: n.gather.clone(),
                        circuit: concat_circuits(&n.circuits)?,
                    },
                })
            })
            .collect::<Result<Vec<_>, ProtocolError>>()?;
        Ok(PublicPlan {
            phases,
            fixed: self.fixed,
            input_width: self.input_width,
            output_frac_bits: self.checkpoints.last().map_or(self.fixed.frac_bits, |c| c.frac_bits),
        })
    }
}

/// Role of each input group of a phase circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    /// Garbler's share of activation `i`.
    Client(usize),
    /// Evaluator's share of activation `i`.
    Server(usize),
    /// Evaluator's fresh output share for circuit `j`.
    Mask(usize),
}

fn layout(gather: &[Vec<usize>]) -> Vec<Group> {
    let mut v = Vec::new();
    for (j, g) in gather.iter().enumerate() {
        v.extend(g.iter().map(|&i| Group::Client(i)));
        v.extend(g.iter().map(|&i| Group::Server(i)));
        v.push(Group::Mask(j));
    }
    v
}

fn to_bits(v: u64, width: usize) -> impl Iterator<Item = bool> {
    (0..width).map(move |i| v >> i & 1 == 1)
}

fn has_inv(c: &Circuit) -> bool {
    c.gates().iter().any(|g| g.kind == GateKind::Inv)
}

fn centered_f64(fixed: &FixedPoint, share: &[u64], slots: usize) -> Vec<f64> {
    let mut v: Vec<f64> = share.iter().map(|&r| fixed.centered(r) as f64).collect();
    v.resize(slots, 0.0);
    v
}

pub struct Client {
    params: Arc<RingParams>,
    plan: PublicPlan,
    cfg: ProtocolConfig,
    keys: KeySet,
    ev: Evaluator,
    rng: ChaCha20Rng,
    phase: usize,
    share: Vec<u64>,
    pending: Option<GarbledCircuit>,
    output: Option<Vec<i64>>,
}

impl Client {
    pub fn new(
        params: &Arc<RingParams>,
        plan: PublicPlan,
        input: &[f64],
        cfg: &ProtocolConfig,
        seed: u64,
    ) -> Result<Self, ProtocolError> {
        if input.len() != plan.input_width {
            return Err(ProtocolError::Length {
                what: "input",
                expected: plan.input_width,
                got: input.len(),
            });
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut rotations: Vec<i64> = plan
            .phases
            .iter()
            .flat_map(|p| match p {
                PublicPhase::Linear { rotations, .. } => rotations.clone(),
                PublicPhase::NonLinear { .. } => Vec::new(),
            })
            .collect();
        rotations.sort();
        rotations.dedup();
        let keys = KeySet::generate(params, &rotations, &mut rng)?;
        let fixed = plan.fixed;
        let share = input.iter().map(|&x| fixed.to_residue(FixedPoint::quantize(x, fixed.frac_bits))).collect();
        Ok(Self {
            params: params.clone(),
            ev: Evaluator::new(params),
            plan,
            cfg: cfg.clone(),
            keys,
            rng,
            phase: 0,
            share,
            pending: None,
            output: None,
        })
    }

    pub fn completed_phases(&self) -> usize {
        self.phase
    }

    pub fn share(&self) -> &[u64] {
        &self.share
    }

    /// Final output as fixed-point integers, once the run is over.
    pub fn output(&self) -> Option<&[i64]> {
        self.output.as_deref()
    }

    pub fn start(&mut self, ch: &mut Channel) -> Result<(), ProtocolError> {
        if self.plan.phases.iter().any(|p| matches!(p, PublicPhase::Linear { .. })) {
            let bytes = write_eval_keys(&self.params, &self.keys.evaluation_keys());
            ch.send(Party::Client, Party::Server, MessageKind::EvalKeys, bytes);
        }
        self.begin_phase(ch)
    }

    fn begin_phase(&mut self, ch: &mut Channel) -> Result<(), ProtocolError> {
        match self.plan.phases.get(self.phase) {
            None => {
                let fixed = self.plan.fixed;
                self.output = Some(self.share.iter().map(|&r| fixed.centered(r)).collect());
                Ok(())
            }
            Some(PublicPhase::Linear { slots, level, .. }) => {
                let v = centered_f64(&self.plan.fixed, &self.share, *slots);
                let pt = encode(&self.params, &v, self.cfg.input_scale(), *level)?;
                let ct = self.ev.encrypt(&pt, &self.keys, &mut self.rng)?;
                ch.send(Party::Client, Party::Server, MessageKind::CtUpload, write_ciphertext(&ct));
                Ok(())
            }
            Some(PublicPhase::NonLinear { gather, circuit }) => {
                let delta = GlobalDelta::random(&mut self.rng);
                let (gc, enc) = garble(circuit, delta, &mut self.rng);
                let bits = self.plan.fixed.bits();
                let mut tables = Vec::with_capacity(32 * gc.tables.len());
                for [tg, te] in &gc.tables {
                    tables.extend_from_slice(&tg.to_bytes());
                    tables.extend_from_slice(&te.to_bytes());
                }
                let mut own = Vec::new();
                let mut pairs = Vec::new();
                let mut pos = 0;
                for g in layout(gather) {
                    match g {
                        Group::Client(i) => {
                            for (k, b) in to_bits(self.share[i], bits).enumerate() {
                                own.extend_from_slice(&enc.label(pos + k, b).to_bytes());
                            }
                        }
                        Group::Server(_) | Group::Mask(_) => {
                            pairs.extend((0..bits).map(|k| (enc.label(pos + k, false), enc.label(pos + k, true))));
                        }
                    }
                    pos += bits;
                }
                if has_inv(circuit) {
                    own.extend_from_slice(&gc.const_true.to_bytes());
                }
                ch.send(Party::Client, Party::Server, MessageKind::GarbledTables, tables);
                ch.ot_offer(pairs);
                ch.send(Party::Client, Party::Server, MessageKind::InputLabels, own);
                self.pending = Some(gc);
                Ok(())
            }
        }
    }

    fn finish_phase(&mut self, share: Vec<u64>, ch: &mut Channel) -> Result<(), ProtocolError> {
        self.share = share;
        self.phase += 1;
        self.begin_phase(ch)
    }

    pub fn handle(&mut self, m: Message, ch: &mut Channel) -> Result<(), ProtocolError> {
        match (m.kind, self.plan.phases.get(self.phase)) {
            (MessageKind::CtResult, Some(PublicPhase::Linear { outputs, .. })) => {
                let outputs = *outputs;
                let ct = read_ciphertext(&m.payload, &self.params)?;
                let vals = decode(&self.ev.decrypt(&ct, &self.keys)?)?;
                let fixed = self.plan.fixed;
                let mut share = Vec::with_capacity(outputs);
                for &v in &vals[..outputs] {
                    let r = v.round();
                    if (v - r).abs() > self.cfg.decode_tolerance || !r.is_finite() {
                        return Err(ProtocolError::Decode(format!("slot value {v} is not near an integer")));
                    }
                    share.push(fixed.to_residue(r as i64));
                }
                self.finish_phase(share, ch)
            }
            (MessageKind::EvalShare, Some(PublicPhase::NonLinear { circuit, .. })) => {
                let gc = self.pending.take().ok_or(ProtocolError::Order("EvalShare without garbling".into()))?;
                let n = circuit.output_bits();
                let colours = unpack_bits(&m.payload, n)?;
                let bits: Vec<bool> = colours.iter().zip(&gc.decode).map(|(c, d)| c ^ d).collect();
                let share = circuit
                    .outputs()
                    .iter()
                    .scan(0, |pos, g| {
                        let v = bits[*pos..*pos + g.len()].iter().rev().fold(0u64, |a, &b| a << 1 | b as u64);
                        *pos += g.len();
                        Some(v)
                    })
                    .collect();
                self.finish_phase(share, ch)
            }
            (k, _) => Err(ProtocolError::Order(format!("client got {k:?} in phase {}", self.phase))),
        }
    }
}

/// Holds the model; never sees the secret key or the client's input.
pub struct Server {
    params: Arc<RingParams>,
    plan: PhasePlan,
    machine: HeMachine,
    keys: Option<EvaluationKeys>,
    rng: ChaCha20Rng,
    phase: usize,
    share: Vec<u64>,
    tables: Option<Vec<[Block; 2]>>,
}

impl Server {
    pub fn new(params: &Arc<RingParams>, plan: PhasePlan, profile: &ArchProfile, cfg: &ProtocolConfig, seed: u64) -> Self {
        let share = vec![0; plan.input_width];
        Self {
            params: params.clone(),
            machine: HeMachine::new(params, profile, cfg.backend),
            plan,
            keys: None,
            rng: ChaCha20Rng::seed_from_u64(seed),
            phase: 0,
            share,
            tables: None,
        }
    }

    pub fn completed_phases(&self) -> usize {
        self.phase
    }

    pub fn share(&self) -> &[u64] {
        &self.share
    }

    fn last_phase(&self) -> bool {
        self.phase + 1 == self.plan.phases.len()
    }

    pub fn handle(&mut self, m: Message, ch: &mut Channel) -> Result<(), ProtocolError> {
        let fixed = self.plan.fixed;
        let p = fixed.modulus;
        match (m.kind, self.plan.phases.get(self.phase)) {
            (MessageKind::EvalKeys, _) => {
                let (params, keys) = read_eval_keys(&m.payload)?;
                if params.descriptor() != self.params.descriptor() {
                    return Err(ProtocolError::Malformed("evaluation keys for another ring".into()));
                }
                self.keys = Some(keys);
                Ok(())
            }
            (MessageKind::CtUpload, Some(Phase::Linear(l))) => {
                let keys = self.keys.as_ref().ok_or(ProtocolError::Order("ciphertext before keys".into()))?;
                let rescales = l.program.ops.iter().filter(|o| matches!(o, HeOp::Rescale { .. })).count();
                if l.program.mul_count() + rescales > l.level - 1 {
                    return Err(ProtocolError::LevelBudget(format!(
                        "layer {} needs {} levels, ciphertext has {}",
                        l.layer,
                        l.program.mul_count() + rescales,
                        l.level - 1
                    )));
                }
                let ct = read_ciphertext(&m.payload, &self.params)?;
                if ct.level() != l.level || ct.slots != l.slots {
                    return Err(ProtocolError::Malformed("uploaded ciphertext has the wrong shape".into()));
                }
                let frac_in = self.plan.frac_bits_before(self.phase);
                let wq = |w: f64| FixedPoint::quantize(w, fixed.weight_bits) as f64;
                let mut inputs = BTreeMap::new();
                let dp = self.params.scale();
                let share = centered_f64(&fixed, &self.share, l.slots);
                inputs.insert("share".into(), HeValue::Plain(encode(&self.params, &share, ct.scale, l.level)?));
                for (name, d) in &l.diagonals {
                    let q: Vec<f64> = d.iter().map(|&w| wq(w)).collect();
                    inputs.insert(name.clone(), HeValue::Plain(encode(&self.params, &q, dp, l.level)?));
                }
                let r: Vec<u64> = if self.last_phase() {
                    vec![0; l.outputs]
                } else {
                    (0..l.outputs).map(|_| self.rng.gen_range(0..p)).collect()
                };
                let mut offset: Vec<f64> = l
                    .bias
                    .iter()
                    .zip(&r)
                    .map(|(&b, &ri)| (FixedPoint::quantize(b, frac_in + fixed.weight_bits) - ri as i64) as f64)
                    .collect();
                offset.resize(l.slots, 0.0);
                let out_scale = ct.scale * dp / self.params.modulus(l.level - 1).value() as f64;
                inputs.insert("offset".into(), HeValue::Plain(encode(&self.params, &offset, out_scale, l.level - 1)?));
                inputs.insert("x".into(), HeValue::Cipher(ct));
                let out = self.machine.run(&l.stream, &inputs, Some(keys))?;
                let HeValue::Cipher(y) = &out["y"] else {
                    return Err(ProtocolError::Malformed("linear phase produced a plaintext".into()));
                };
                ch.send(Party::Server, Party::Client, MessageKind::CtResult, write_ciphertext(y));
                self.share = r;
                self.phase += 1;
                Ok(())
            }
            (MessageKind::GarbledTables, Some(Phase::NonLinear(_))) => {
                if m.payload.len() % 32 != 0 {
                    return Err(ProtocolError::Malformed("table bytes not a multiple of 32".into()));
                }
                self.tables = Some(
                    m.payload
                        .chunks_exact(32)
                        .map(|c| {
                            [
                                Block::from_bytes(c[..16].try_into().unwrap()),
                                Block::from_bytes(c[16..].try_into().unwrap()),
                            ]
                        })
                        .collect(),
                );
                Ok(())
            }
            (MessageKind::InputLabels, Some(Phase::NonLinear(n))) => {
                let tables = self.tables.take().ok_or(ProtocolError::Order("labels before tables".into()))?;
                let circuit = concat_circuits(&n.circuits)?;
                let bits = fixed.bits();
                let groups = layout(&n.gather);
                let masks: Vec<u64> = if self.last_phase() {
                    vec![0; n.gather.len()]
                } else {
                    (0..n.gather.len()).map(|_| self.rng.gen_range(0..p)).collect()
                };
                let mut choices = Vec::new();
                for g in &groups {
                    match *g {
                        Group::Server(i) => choices.extend(to_bits(self.share[i], bits)),
                        Group::Mask(j) => choices.extend(to_bits(masks[j], bits)),
                        Group::Client(_) => {}
                    }
                }
                let client_wires = groups.iter().filter(|g| matches!(g, Group::Client(_))).count() * bits;
                let inv = has_inv(&circuit);
                let expect = 16 * (client_wires + inv as usize);
                if m.payload.len() != expect {
                    return Err(ProtocolError::Length {
                        what: "input label bytes",
                        expected: expect,
                        got: m.payload.len(),
                    });
                }
                let mut own = m.payload.chunks_exact(16).map(|c| Block::from_bytes(c.try_into().unwrap()));
                let mut chosen = ch.ot_receive(&choices)?.into_iter();
                let mut active = Vec::with_capacity(circuit.input_bits());
                for g in &groups {
                    for _ in 0..bits {
                        let l = match g {
                            Group::Client(_) => own.next(),
                            _ => chosen.next(),
                        };
                        active.push(l.expect("label counts checked"));
                    }
                }
                let const_true = if inv { own.next().expect("label counts checked") } else { Block::ZERO };
                let gc = GarbledCircuit {
                    tables,
                    const_true,
                    decode: Vec::new(),
                };
                let out = evaluate(&gc, &circuit, &active)?;
                let colours: Vec<bool> = out.iter().map(|l| l.lsb()).collect();
                ch.send(Party::Server, Party::Client, MessageKind::EvalShare, pack_bits(&colours));
                self.share = masks;
                self.phase += 1;
                Ok(())
            }
            (k, _) => Err(ProtocolError::Order(format!("server got {k:?} in phase {}", self.phase))),
        }
    }
}
