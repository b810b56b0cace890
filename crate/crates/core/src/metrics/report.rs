use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ComponentBudget;
use crate::ppml::{BandwidthPreset, CommLedger};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn cycles_to_seconds(cycles: u64, frequency_hz: f64) -> f64 {
    cycles as f64 / frequency_hz
}

/// What a run produced: cycles split by phase kind and, for protocol
/// runs, the communication ledger.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub he_cycles: u64,
    pub gc_cycles: u64,
    #[serde(default)]
    pub ledger: Option<CommLedger>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub name: String,
    pub bits_per_second: f64,
    pub communication_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub frequency_hz: f64,
    pub total_cycles: u64,
    pub he_cycles: u64,
    pub gc_cycles: u64,
    pub latency_s: f64,
    pub he_latency_s: f64,
    pub gc_latency_s: f64,
    pub node_nm: u32,
    pub area_mm2: f64,
    pub power_w: f64,
    /// Average power times latency.
    pub energy_j: f64,
    pub calibrated: bool,
    pub provenance: String,
    pub ledger: Option<CommLedger>,
    pub bandwidth: Vec<BandwidthPoint>,
}

impl Report {
    /// `budget` must already be at the target node.
    pub fn build(input: &ReportInput, budget: &ComponentBudget, frequency_hz: f64, bandwidths: &[BandwidthPreset]) -> Self {
        let total = input.he_cycles + input.gc_cycles;
        let latency = cycles_to_seconds(total, frequency_hz);
        let power = budget.power_w();
        let online = input.ledger.map_or(0, |l| l.online());
        let bandwidth = bandwidths
            .iter()
            .map(|b| {
                let comm = online as f64 * 8.0 / b.bits_per_second;
                BandwidthPoint {
                    name: b.name.clone(),
                    bits_per_second: b.bits_per_second,
                    communication_s: comm,
                    total_s: latency + comm,
                }
            })
            .collect();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            frequency_hz,
            total_cycles: total,
            he_cycles: input.he_cycles,
            gc_cycles: input.gc_cycles,
            latency_s: latency,
            he_latency_s: cycles_to_seconds(input.he_cycles, frequency_hz),
            gc_latency_s: cycles_to_seconds(input.gc_cycles, frequency_hz),
            node_nm: budget.node_nm,
            area_mm2: budget.area_mm2(),
            power_w: power,
            energy_j: power * latency,
            calibrated: budget.is_calibrated(),
            provenance: budget.provenance.clone(),
            ledger: input.ledger,
            bandwidth,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// `metric,value` rows, then the bandwidth curve as its own table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let mut row = |k: &str, v: String| writeln!(s, "{k},{v}").unwrap();
        row("schema_version", self.schema_version.to_string());
        row("total_cycles", self.total_cycles.to_string());
        row("he_cycles", self.he_cycles.to_string());
        row("gc_cycles", self.gc_cycles.to_string());
        row("latency_us", format!("{:.6}", self.latency_s * 1e6));
        row("he_latency_us", format!("{:.6}", self.he_latency_s * 1e6));
        row("gc_latency_us", format!("{:.6}", self.gc_latency_s * 1e6));
        row("node_nm", self.node_nm.to_string());
        row("area_mm2", format!("{:.1}", self.area_mm2));
        row("power_w", format!("{:.1}", self.power_w));
        row("energy_uj", format!("{:.6}", self.energy_j * 1e6));
        row("calibrated", self.calibrated.to_string());
        if let Some(l) = self.ledger {
            row("online_he_bytes", l.online_he.to_string());
            row("online_gc_bytes", l.online_gc.to_string());
            row("preprocessing_bytes", l.preprocessing.to_string());
            row("ot_bytes", l.ot.to_string());
        }
        if !self.bandwidth.is_empty() {
            s.push_str("\nlink,bits_per_second,communication_s,total_s\n");
            for b in &self.bandwidth {
                writeln!(s, "{},{},{:e},{:e}", b.name, b.bits_per_second, b.communication_s, b.total_s).unwrap();
            }
        }
        s
    }
}
