//! Cycle data: domain types, CSV ingestion, SOH targets, RANSAC capacity
//! filtering and dataset partitioning.

mod io;
mod manifest;
mod ransac;

pub use io::{cell_paths, load_cell, load_cell_dir, read_metadata, write_cell, CellMetadata};
pub use manifest::{partition, DatasetManifest, Partition, Role};
pub use ransac::{ransac_filter, RansacConfig, RansacOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample operating phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    CcCharge,
    CvCharge,
    FastCharge,
    Discharge,
    Rest,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::CcCharge => "cc_charge",
            Phase::CvCharge => "cv_charge",
            Phase::FastCharge => "fast_charge",
            Phase::Discharge => "discharge",
            Phase::Rest => "rest",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Some(match s.trim() {
            "cc_charge" => Phase::CcCharge,
            "cv_charge" => Phase::CvCharge,
            "fast_charge" => Phase::FastCharge,
            "discharge" => Phase::Discharge,
            "rest" => Phase::Rest,
            _ => return None,
        })
    }

    pub fn is_charge(self) -> bool {
        matches!(self, Phase::CcCharge | Phase::CvCharge | Phase::FastCharge)
    }
}

/// One charge/discharge cycle. Current is positive while charging and
/// negative while discharging.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle_index: u32,
    pub time_s: Vec<f64>,
    pub voltage_v: Vec<f64>,
    pub current_a: Vec<f64>,
    pub phase: Vec<Phase>,
    pub discharge_capacity_ah: f64,
}

impl CycleRecord {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        match (self.time_s.first(), self.time_s.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn phase_count(&self, phase: Phase) -> usize {
        self.phase.iter().filter(|&&p| p == phase).count()
    }

    pub fn has_phase(&self, phase: Phase) -> bool {
        self.phase.contains(&phase)
    }

    /// Mean absolute current over the discharge samples, if there are any.
    pub fn mean_discharge_current(&self) -> Option<f64> {
        let (sum, n) = self
            .phase
            .iter()
            .zip(&self.current_a)
            .filter(|(p, _)| **p == Phase::Discharge)
            .fold((0.0, 0usize), |(s, n), (_, i)| (s + i.abs(), n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Trapezoidal discharge energy in Wh over contiguous discharge samples.
    pub fn discharge_energy_wh(&self) -> f64 {
        let mut e = 0.0;
        for k in 1..self.len() {
            if self.phase[k] == Phase::Discharge && self.phase[k - 1] == Phase::Discharge {
                let p0 = self.voltage_v[k - 1] * self.current_a[k - 1].abs();
                let p1 = self.voltage_v[k] * self.current_a[k].abs();
                e += 0.5 * (p0 + p1) * (self.time_s[k] - self.time_s[k - 1]);
            }
        }
        e / 3600.0
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.time_s.len();
        if self.voltage_v.len() != n || self.current_a.len() != n || self.phase.len() != n {
            return Err(Error::InvalidData(format!(
                "cycle {}: series lengths differ",
                self.cycle_index
            )));
        }
        if !(self.discharge_capacity_ah > 0.0) {
            return Err(Error::InvalidData(format!(
                "cycle {}: discharge capacity must be positive",
                self.cycle_index
            )));
        }
        if self.time_s.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidData(format!(
                "cycle {}: time is not monotone",
                self.cycle_index
            )));
        }
        Ok(())
    }
}

/// Full recorded history of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistory {
    pub cell_id: String,
    pub nominal_capacity_ah: f64,
    pub charge_current_a: f64,
    /// Fixed discharge current from the metadata; per-cycle values are taken
    /// from the discharge samples when present.
    pub discharge_current_a: Option<f64>,
    pub cut_off_voltage_v: f64,
    pub cycles: Vec<CycleRecord>,
}

impl CellHistory {
    pub fn capacity_series(&self) -> Vec<(f64, f64)> {
        self.cycles
            .iter()
            .map(|c| (c.cycle_index as f64, c.discharge_capacity_ah))
            .collect()
    }

    pub fn first_capacity(&self) -> Option<f64> {
        self.cycles.first().map(|c| c.discharge_capacity_ah)
    }

    pub fn position_of(&self, cycle_index: u32) -> Option<usize> {
        self.cycles.binary_search_by_key(&cycle_index, |c| c.cycle_index).ok()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles.is_empty() {
            return Err(Error::InvalidData(format!("cell {}: no cycles", self.cell_id)));
        }
        if self.cycles.windows(2).any(|w| w[1].cycle_index <= w[0].cycle_index) {
            return Err(Error::InvalidData(format!(
                "cell {}: cycles not ordered by index",
                self.cell_id
            )));
        }
        for (name, v) in [
            ("nominal_capacity_ah", self.nominal_capacity_ah),
            ("charge_current_a", self.charge_current_a),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidData(format!("cell {}: {name} must be positive", self.cell_id)));
            }
        }
        self.cycles.iter().try_for_each(CycleRecord::validate)
    }
}

/// State of health relative to a reference capacity.
pub fn soh(c_i: f64, c_1: f64) -> Result<f64> {
    if !(c_1 > 0.0) || !c_1.is_finite() {
        return Err(Error::Domain(format!("reference capacity must be positive, got {c_1}")));
    }
    Ok(c_i / c_1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soh_examples() {
        assert_eq!(soh(1.1, 1.1).unwrap(), 1.0);
        assert!((soh(0.88, 1.10).unwrap() - 0.8).abs() < 1e-15);
        assert!((soh(1.15, 1.10).unwrap() - 1.045_454_545_454_545_5).abs() < 1e-15);
        assert!(matches!(soh(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(soh(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn soh_of_reference_is_exactly_one() {
        for c in [0.1, 1.1, 2.5, 3.333_333, 1e-3] {
            assert_eq!(soh(c, c).unwrap(), 1.0);
        }
    }

    #[test]
    fn phase_names_round_trip() {
        for p in [Phase::CcCharge, Phase::CvCharge, Phase::FastCharge, Phase::Discharge, Phase::Rest] {
            assert_eq!(Phase::parse(p.as_str()), Some(p));
        }
        assert_eq!(Phase::parse("charging"), None);
    }
}
