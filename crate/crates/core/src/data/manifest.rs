//! Cell role assignments.
//!
//! Each cell has exactly one of the exclusive roles `train`, `calibration` or
//! `test`. `feature_selection` is an additional tag that only train cells may
//! carry; in the manifest CSV it appears as a second row for the same cell.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CellHistory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Calibration,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Calibration => "calibration",
            Role::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub role: Role,
    pub feature_selection: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub assignments: BTreeMap<String, Assignment>,
}

impl DatasetManifest {
    /// Builds a manifest from `(cell_id, role)` rows, where role is one of
    /// `train`, `calibration`, `test`, `feature_selection`.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut roles: BTreeMap<String, Option<Role>> = BTreeMap::new();
        let mut selection: BTreeMap<String, bool> = BTreeMap::new();
        for (id, role) in rows {
            let id = id.trim();
            let role = role.trim();
            if role == "feature_selection" {
                if selection.insert(id.to_string(), true).is_some() {
                    return Err(Error::Manifest(format!("cell {id} tagged feature_selection twice")));
                }
                roles.entry(id.to_string()).or_insert(None);
                continue;
            }
            let r = match role {
                "train" => Role::Train,
                "calibration" => Role::Calibration,
                "test" => Role::Test,
                other => return Err(Error::Manifest(format!("cell {id}: unknown role `{other}`"))),
            };
            let slot = roles.entry(id.to_string()).or_insert(None);
            if let Some(prev) = slot {
                return Err(Error::Manifest(format!(
                    "cell {id} assigned to both {} and {}",
                    prev.as_str(),
                    r.as_str()
                )));
            }
            *slot = Some(r);
        }
        let mut assignments = BTreeMap::new();
        for (id, role) in roles {
            let fs = selection.get(&id).copied().unwrap_or(false);
            let role = role.ok_or_else(|| {
                Error::Manifest(format!("cell {id} is tagged feature_selection but has no train role"))
            })?;
            if fs && role != Role::Train {
                return Err(Error::Manifest(format!(
                    "feature-selection cell {id} must be a train cell, not {}",
                    role.as_str()
                )));
            }
            assignments.insert(id, Assignment { role, feature_selection: fs });
        }
        Ok(DatasetManifest { assignments })
    }

    /// Reads a `cell_id,role` CSV.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = reader.headers()?.clone();
        let display = path.display().to_string();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
                path: display.clone(),
                column: name.into(),
            })
        };
        let (ci, ri) = (col("cell_id")?, col("role")?);
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            rows.push((rec[ci].to_string(), rec[ri].to_string()));
        }
        Self::from_rows(rows.iter().map(|(a, b)| (a.as_str(), b.as_str())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["cell_id", "role"])?;
        for (id, a) in &self.assignments {
            w.write_record([id.as_str(), a.role.as_str()])?;
            if a.feature_selection {
                w.write_record([id.as_str(), "feature_selection"])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn cells_with(&self, role: Role) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, a)| a.role == role)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn feature_selection_cells(&self) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, a)| a.feature_selection)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Cells split by role. `feature_selection` is a subset of `train`.
#[derive(Debug)]
pub struct Partition<'a> {
    pub feature_selection: Vec<&'a CellHistory>,
    pub train: Vec<&'a CellHistory>,
    pub calibration: Vec<&'a CellHistory>,
    pub test: Vec<&'a CellHistory>,
}

impl Partition<'_> {
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (self.train.len(), self.feature_selection.len(), self.calibration.len(), self.test.len())
    }
}

pub fn partition<'a>(cells: &'a [CellHistory], manifest: &DatasetManifest) -> Result<Partition<'a>> {
    let mut seen = BTreeMap::new();
    for c in cells {
        if seen.insert(c.cell_id.as_str(), ()).is_some() {
            return Err(Error::Manifest(format!("cell {} supplied twice", c.cell_id)));
        }
        if !manifest.assignments.contains_key(&c.cell_id) {
            return Err(Error::Manifest(format!("cell {} is not assigned a role", c.cell_id)));
        }
    }
    if let Some(id) = manifest.assignments.keys().find(|id| !seen.contains_key(id.as_str())) {
        return Err(Error::Manifest(format!("manifest cell {id} has no data")));
    }
    let mut p = Partition { feature_selection: vec![], train: vec![], calibration: vec![], test: vec![] };
    for c in cells {
        let a = manifest.assignments[&c.cell_id];
        match a.role {
            Role::Train => p.train.push(c),
            Role::Calibration => p.calibration.push(c),
            Role::Test => p.test.push(c),
        }
        if a.feature_selection {
            p.feature_selection.push(c);
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(id: &str) -> CellHistory {
        CellHistory {
            cell_id: id.into(),
            nominal_capacity_ah: 1.0,
            charge_current_a: 1.0,
            discharge_current_a: None,
            cut_off_voltage_v: 4.2,
            cycles: vec![],
        }
    }

    fn group_three_rows() -> Vec<(&'static str, &'static str)> {
        vec![
            ("1", "train"),
            ("2", "train"),
            ("3", "train"),
            ("1", "feature_selection"),
            ("3", "feature_selection"),
            ("4", "calibration"),
            ("5", "test"),
            ("6", "test"),
            ("7", "test"),
            ("8", "test"),
        ]
    }

    #[test]
    fn group_three_sizes() {
        let m = DatasetManifest::from_rows(group_three_rows()).unwrap();
        let cells: Vec<_> = (1..=8).map(|i| cell(&i.to_string())).collect();
        let p = partition(&cells, &m).unwrap();
        assert_eq!(p.sizes(), (3, 2, 1, 4));
        for fs in &p.feature_selection {
            assert!(p.train.iter().any(|t| t.cell_id == fs.cell_id));
        }
    }

    #[test]
    fn missing_cell_is_named() {
        let m = DatasetManifest::from_rows(group_three_rows()).unwrap();
        let cells: Vec<_> = (1..=9).map(|i| cell(&i.to_string())).collect();
        let err = partition(&cells, &m).unwrap_err().to_string();
        assert!(err.contains("cell 9"), "{err}");
        let cells: Vec<_> = (1..=7).map(|i| cell(&i.to_string())).collect();
        let err = partition(&cells, &m).unwrap_err().to_string();
        assert!(err.contains("8"), "{err}");
    }

    #[test]
    fn calibration_cell_also_test_is_rejected() {
        let mut rows = group_three_rows();
        rows.push(("4", "test"));
        let err = DatasetManifest::from_rows(rows).unwrap_err().to_string();
        assert!(err.contains("both calibration and test"), "{err}");
    }

    #[test]
    fn feature_selection_must_be_train() {
        let err = DatasetManifest::from_rows([("1", "test"), ("1", "feature_selection")]).unwrap_err();
        assert!(matches!(err, Error::Manifest(_)));
    }

    #[test]
    fn csv_round_trip() {
        let m = DatasetManifest::from_rows(group_three_rows()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        m.save(&path).unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap(), m);
    }
}
