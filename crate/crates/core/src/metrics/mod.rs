//! Technology scaling, calibrated area/power budget and run reports.

mod report;

pub use report::{cycles_to_seconds, BandwidthPoint, Report, ReportInput, REPORT_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("node {0} nm is not on the scaling chain")]
    UnknownNode(u32),
    #[error("calibration: {0}")]
    Calibration(String),
}

/// One step along the node chain, as multiplicative factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingHop {
    pub from_nm: u32,
    pub to_nm: u32,
    pub power: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechScaling {
    /// Consecutive hops, largest node first.
    pub hops: Vec<ScalingHop>,
}

impl Default for TechScaling {
    fn default() -> Self {
        Self {
            hops: vec![
                ScalingHop { from_nm: 45, to_nm: 7, power: 0.079, area: 0.059 },
                ScalingHop { from_nm: 7, to_nm: 5, power: 0.70, area: 0.54 },
            ],
        }
    }
}

impl TechScaling {
    pub fn nodes(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.hops.first().map(|h| h.from_nm).into_iter().collect();
        v.extend(self.hops.iter().map(|h| h.to_nm));
        v
    }

    fn position(&self, nm: u32) -> Result<usize, MetricsError> {
        self.nodes().iter().position(|&n| n == nm).ok_or(MetricsError::UnknownNode(nm))
    }

    /// `(power, area)` factors from `from_nm` to `to_nm`; scaling up the
    /// chain inverts the hops.
    pub fn factor(&self, from_nm: u32, to_nm: u32) -> Result<(f64, f64), MetricsError> {
        let (a, b) = (self.position(from_nm)?, self.position(to_nm)?);
        let (lo, hi) = (a.min(b), a.max(b));
        let (p, s) = self.hops[lo..hi].iter().fold((1.0, 1.0), |(p, s), h| (p * h.power, s * h.area));
        Ok(if a <= b { (p, s) } else { (1.0 / p, 1.0 / s) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub count: u64,
    /// Per instance.
    pub area_mm2: f64,
    /// Per instance.
    pub power_w: f64,
}

/// Per-component constants at one node, times instance counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentBudget {
    pub schema_version: u32,
    pub node_nm: u32,
    pub provenance: String,
    pub components: Vec<Component>,
}

const SHIPPED_CALIBRATION: &str = include_str!("../../calibration.json");

impl ComponentBudget {
    /// The calibration shipped with the crate (45 nm).
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_CALIBRATION).expect("shipped calibration parses")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let b: Self = serde_json::from_str(text).map_err(|e| MetricsError::Calibration(e.to_string()))?;
        if b.components.iter().any(|c| !(c.area_mm2 >= 0.0 && c.power_w >= 0.0)) {
            return Err(MetricsError::Calibration("negative or missing constant".into()));
        }
        Ok(b)
    }

    pub fn area_mm2(&self) -> f64 {
        self.components.iter().map(|c| c.count as f64 * c.area_mm2).sum()
    }

    pub fn power_w(&self) -> f64 {
        self.components.iter().map(|c| c.count as f64 * c.power_w).sum()
    }

    pub fn is_calibrated(&self) -> bool {
        self.provenance.starts_with("calibrated")
    }

    pub fn scale(&self, scaling: &TechScaling, to_nm: u32) -> Result<Self, MetricsError> {
        let (p, a) = scaling.factor(self.node_nm, to_nm)?;
        Ok(Self {
            node_nm: to_nm,
            components: self
                .components
                .iter()
                .map(|c| Component { area_mm2: c.area_mm2 * a, power_w: c.power_w * p, ..c.clone() })
                .collect(),
            ..self.clone()
        })
    }
}
