use serde::{Deserialize, Serialize};

use super::message::{Message, MessageKind, FRAME_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommPhase {
    OnlineHe,
    OnlineGc,
    Preprocessing,
}

impl MessageKind {
    pub fn phase(self) -> CommPhase {
        match self {
            MessageKind::EvalKeys | MessageKind::GarbledTables => CommPhase::Preprocessing,
            MessageKind::CtUpload | MessageKind::CtResult => CommPhase::OnlineHe,
            MessageKind::InputLabels
            | MessageKind::OtLabelRequest
            | MessageKind::OtLabelResponse
            | MessageKind::EvalShare => CommPhase::OnlineGc,
        }
    }
}

/// Framed bytes per communication phase. Every counter includes the
/// 5-byte frame header of each message it counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    pub online_he: u64,
    pub online_gc: u64,
    pub preprocessing: u64,
    /// Part of `online_gc` spent on oblivious transfer.
    pub ot: u64,
    pub messages: u64,
}

impl CommLedger {
    pub fn record(&mut self, m: &Message) {
        let b = m.wire_len() as u64;
        match m.kind.phase() {
            CommPhase::OnlineHe => self.online_he += b,
            CommPhase::OnlineGc => self.online_gc += b,
            CommPhase::Preprocessing => self.preprocessing += b,
        }
        if matches!(m.kind, MessageKind::OtLabelRequest | MessageKind::OtLabelResponse) {
            self.ot += b;
        }
        self.messages += 1;
    }

    pub fn online(&self) -> u64 {
        self.online_he + self.online_gc
    }

    pub fn total(&self) -> u64 {
        self.online() + self.preprocessing
    }
}

/// Byte costs of one garbled layer, in closed form from its circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcLayerBytes {
    pub preprocessing: u64,
    pub online: u64,
    pub ot: u64,
}

/// Bytes a GC layer puts on the channel: garbled tables (32 per AND),
/// the garbler's input labels (16 per wire, plus the constant-true label
/// when the circuit has INV gates), OT at `ot_bytes_per_wire` for every
/// evaluator wire with a 4-byte request, and packed output colour bits.
pub fn gc_layer_bytes(
    and_gates: usize,
    garbler_wires: usize,
    evaluator_wires: usize,
    output_wires: usize,
    has_inv: bool,
    ot_bytes_per_wire: usize,
) -> GcLayerBytes {
    let h = FRAME_HEADER as u64;
    let labels = 16 * (garbler_wires + has_inv as usize) as u64;
    let ot = (h + 4) + (h + (ot_bytes_per_wire * evaluator_wires) as u64);
    GcLayerBytes {
        preprocessing: h + 32 * and_gates as u64,
        online: (h + labels) + ot + (h + output_wires.div_ceil(8) as u64),
        ot,
    }
}

/// Total latency at each bandwidth (bits/s): computation plus online bytes
/// over the link. Preprocessing traffic is excluded.
pub fn bandwidth_curve(compute_seconds: f64, online_bytes: u64, bandwidths: &[f64]) -> Vec<(f64, f64)> {
    bandwidths
        .iter()
        .map(|&bw| (bw, compute_seconds + online_bytes as f64 * 8.0 / bw))
        .collect()
}

/// Named link presets in bits/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPreset {
    pub name: String,
    pub bits_per_second: f64,
}

/// Peak rates of the 2G through 6G generations: EDGE, IMT-2000,
/// IMT-Advanced, IMT-2020 and a 1 Tbit/s 6G target.
pub fn default_bandwidths() -> Vec<BandwidthPreset> {
    [("2G", 384e3), ("3G", 2e6), ("4G", 1e9), ("5G", 20e9), ("6G", 1e12)]
        .into_iter()
        .map(|(n, b)| BandwidthPreset {
            name: n.into(),
            bits_per_second: b,
        })
        .collect()
}

/// Parses a JSON list of bits/s values or of `{name, bits_per_second}` objects.
pub fn parse_bandwidths(json: &str) -> Result<Vec<BandwidthPreset>, serde_json::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Bare(f64),
        Named(BandwidthPreset),
    }
    let v: Vec<Entry> = serde_json::from_str(json)?;
    Ok(v.into_iter()
        .map(|e| match e {
            Entry::Bare(b) => BandwidthPreset {
                name: format!("{b}"),
                bits_per_second: b,
            },
            Entry::Named(p) => p,
        })
        .collect())
}
