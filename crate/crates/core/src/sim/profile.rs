use serde::{Deserialize, Serialize};

use super::SimError;

/// Per-operation energy constants in picojoules. Calibrated so the
/// full-machine power model reproduces the reference design total; they are
/// not derived from circuit simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub controller_pj: f64,
    pub cem_logic_pj: f64,
    pub cem_add_pj: f64,
    pub cem_rw_pj: f64,
    pub shifter_pj: f64,
    pub lut_pj: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            controller_pj: 0.12,
            cem_logic_pj: 0.21,
            cem_add_pj: 0.27,
            cem_rw_pj: 0.18,
            shifter_pj: 0.09,
            lut_pj: 0.16,
        }
    }
}

/// Architecture profile: machine size, per-core memory, clock and bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchProfile {
    pub name: String,
    pub gc_units: usize,
    pub cores_per_unit: usize,
    pub cem_bytes_per_core: usize,
    pub cem_tiles: usize,
    pub frequency_hz: f64,
    pub bandwidth_bytes_per_s: f64,
    /// Cycles per 32-bit word per hop for inter-core moves.
    pub hop_cycles_per_word: u64,
    #[serde(default)]
    pub energy: EnergyModel,
}

impl Default for ArchProfile {
    fn default() -> Self {
        ArchProfile {
            name: "default-4k".into(),
            gc_units: 16,
            cores_per_unit: 512,
            cem_bytes_per_core: 4 * 1024,
            cem_tiles: 4,
            frequency_hz: 1.0e9,
            bandwidth_bytes_per_s: 512.0e9,
            hop_cycles_per_word: 1,
            energy: EnergyModel::default(),
        }
    }
}

impl ArchProfile {
    /// Enlarged per-core memory used for the GC micro-benchmarks.
    pub fn gc_benchmark() -> Self {
        ArchProfile {
            name: "gc-bench-128k".into(),
            cem_bytes_per_core: 128 * 1024,
            ..Self::default()
        }
    }

    pub fn cores(&self) -> usize {
        self.gc_units * self.cores_per_unit
    }

    pub fn rows_per_core(&self) -> usize {
        self.cem_bytes_per_core / 16
    }

    pub fn bytes_per_cycle(&self) -> f64 {
        self.bandwidth_bytes_per_s / self.frequency_hz
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Profile(m.to_string()));
        if self.gc_units == 0 || self.cores_per_unit == 0 {
            return bad("machine needs at least one unit and core");
        }
        if self.cem_bytes_per_core < 16 * 128 || self.cem_bytes_per_core % 16 != 0 {
            return bad("CEM size must be a multiple of 16 bytes and hold at least 128 rows");
        }
        if self.cem_tiles == 0 || self.rows_per_core() % self.cem_tiles != 0 {
            return bad("CEM rows must split evenly across tiles");
        }
        if !(self.frequency_hz > 0.0) || !(self.bandwidth_bytes_per_s > 0.0) {
            return bad("frequency and bandwidth must be positive");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let p: ArchProfile = serde_json::from_str(text).map_err(|e| SimError::Profile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}
