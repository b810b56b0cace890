use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::block::{Block, GlobalDelta};
use super::circuit::{Circuit, GateKind};
use super::hash::AesHash;
use super::GcError;

/// Two half-gate rows per AND gate: `[TG, TE]`.
pub type HalfGateRows = [Block; 2];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarbledCircuit {
    pub tables: Vec<HalfGateRows>,
    /// Active label of the garbler's constant-true wire, used by INV gates.
    pub const_true: Block,
    /// Permute bit of each output wire's zero label.
    pub decode: Vec<bool>,
}

impl GarbledCircuit {
    pub fn table_bytes(&self) -> usize {
        self.tables.len() * 32
    }
}

/// Garbler-side input encoding: the zero label of every input wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputEncoding {
    pub zero: Vec<Block>,
    pub delta: GlobalDelta,
}

impl InputEncoding {
    pub fn label(&self, wire: usize, bit: bool) -> Block {
        self.zero[wire] ^ Block::mask(bit) & self.delta.block()
    }

    pub fn encode(&self, bits: &[bool]) -> Result<Vec<Block>, GcError> {
        if bits.len() != self.zero.len() {
            return Err(GcError::LengthMismatch {
                expected: self.zero.len(),
                got: bits.len(),
            });
        }
        Ok(bits
            .iter()
            .enumerate()
            .map(|(i, &b)| self.label(i, b))
            .collect())
    }

    /// Label pairs for a contiguous range of input wires, as fed to OT.
    pub fn pairs(&self, range: std::ops::Range<usize>) -> Vec<(Block, Block)> {
        range
            .map(|i| (self.label(i, false), self.label(i, true)))
            .collect()
    }
}

/// Full garbler state, including the zero label of every wire.
#[derive(Debug, Clone)]
pub struct Garbling {
    pub gc: GarbledCircuit,
    pub input: InputEncoding,
    pub wire_zero: Vec<Block>,
}

fn tweaks(and_index: usize) -> (u64, u64) {
    let g = and_index as u64;
    (2 * g, 2 * g + 1)
}

/// Garbles one AND gate: returns the output zero label and the two rows.
pub fn garble_and(h: &AesHash, a0: Block, b0: Block, delta: GlobalDelta, and_index: usize) -> (Block, HalfGateRows) {
    let d = delta.block();
    let (j, j2) = tweaks(and_index);
    let (pa, pb) = (a0.lsb(), b0.lsb());
    let ha0 = h.hash(a0, j);
    let ha1 = h.hash(a0 ^ d, j);
    let hb0 = h.hash(b0, j2);
    let hb1 = h.hash(b0 ^ d, j2);
    let tg = ha0 ^ ha1 ^ (Block::mask(pb) & d);
    let wg0 = ha0 ^ (Block::mask(pa) & tg);
    let te = hb0 ^ hb1 ^ a0;
    let we0 = hb0 ^ (Block::mask(pb) & (te ^ a0));
    (wg0 ^ we0, [tg, te])
}

pub fn garble<R: RngCore + CryptoRng>(
    circuit: &Circuit,
    delta: GlobalDelta,
    rng: &mut R,
) -> (GarbledCircuit, InputEncoding) {
    let g = garble_full(circuit, delta, rng);
    (g.gc, g.input)
}

pub fn garble_full<R: RngCore + CryptoRng>(
    circuit: &Circuit,
    delta: GlobalDelta,
    rng: &mut R,
) -> Garbling {
    let h = AesHash::fixed();
    let d = delta.block();
    let mut w = vec![Block::ZERO; circuit.wire_count() as usize];
    let inputs: Vec<Block> = circuit
        .input_wires()
        .map(|i| {
            let l = Block::random(rng);
            w[i as usize] = l;
            l
        })
        .collect();
    let const_zero = Block::random(rng);
    let const_true = const_zero ^ d;
    let mut tables = Vec::with_capacity(circuit.counts().and);
    for gate in circuit.gates() {
        let a0 = w[gate.a as usize];
        w[gate.out as usize] = match gate.kind {
            GateKind::Xor => a0 ^ w[gate.b as usize],
            GateKind::Inv => a0 ^ const_zero,
            GateKind::And => {
                let (c0, rows) = garble_and(h, a0, w[gate.b as usize], delta, tables.len());
                tables.push(rows);
                c0
            }
        };
    }
    let decode = circuit.output_wires().map(|o| w[o as usize].lsb()).collect();
    Garbling {
        gc: GarbledCircuit {
            tables,
            const_true,
            decode,
        },
        input: InputEncoding {
            zero: inputs,
            delta,
        },
        wire_zero: w,
    }
}

/// Evaluates and returns the active label of every output wire.
pub fn evaluate(
    gc: &GarbledCircuit,
    circuit: &Circuit,
    active: &[Block],
) -> Result<Vec<Block>, GcError> {
    let wires = evaluate_wires(gc, circuit, active)?;
    Ok(circuit.output_wires().map(|o| wires[o as usize]).collect())
}

/// Like [`evaluate`] but returns the active label of every wire.
pub fn evaluate_wires(
    gc: &GarbledCircuit,
    circuit: &Circuit,
    active: &[Block],
) -> Result<Vec<Block>, GcError> {
    let ands = circuit.counts().and;
    if gc.tables.len() != ands {
        return Err(GcError::TableSize {
            expected: ands,
            got: gc.tables.len(),
        });
    }
    if active.len() != circuit.input_bits() {
        return Err(GcError::LengthMismatch {
            expected: circuit.input_bits(),
            got: active.len(),
        });
    }
    let h = AesHash::fixed();
    let mut w = vec![Block::ZERO; circuit.wire_count() as usize];
    for (i, &l) in circuit.input_wires().zip(active) {
        w[i as usize] = l;
    }
    let mut k = 0;
    for gate in circuit.gates() {
        let a = w[gate.a as usize];
        w[gate.out as usize] = match gate.kind {
            GateKind::Xor => a ^ w[gate.b as usize],
            GateKind::Inv => a ^ gc.const_true,
            GateKind::And => {
                let b = w[gate.b as usize];
                let [tg, te] = gc.tables[k];
                let (j, j2) = tweaks(k);
                k += 1;
                let wg = h.hash(a, j) ^ (Block::mask(a.lsb()) & tg);
                let we = h.hash(b, j2) ^ (Block::mask(b.lsb()) & (te ^ a));
                wg ^ we
            }
        };
    }
    Ok(w)
}

pub fn decode(gc: &GarbledCircuit, labels: &[Block]) -> Result<Vec<bool>, GcError> {
    if labels.len() != gc.decode.len() {
        return Err(GcError::LengthMismatch {
            expected: gc.decode.len(),
            got: labels.len(),
        });
    }
    Ok(labels
        .iter()
        .zip(&gc.decode)
        .map(|(l, &d)| l.lsb() ^ d)
        .collect())
}
