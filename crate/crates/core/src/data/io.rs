//! Normalized cycle CSV and cell metadata files.
//!
//! Cycle file header: `cell_id,cycle_index,time_s,voltage_v,current_a,phase,discharge_capacity_ah`.
//! Metadata file: `key=value` lines with `nominal_capacity_ah`, `charge_current_a`,
//! `cut_off_voltage_v` and optionally `discharge_current_a`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{CellHistory, CycleRecord, Phase};
use crate::error::{Error, Result};

const COLUMNS: [&str; 7] = [
    "cell_id",
    "cycle_index",
    "time_s",
    "voltage_v",
    "current_a",
    "phase",
    "discharge_capacity_ah",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetadata {
    pub nominal_capacity_ah: f64,
    pub charge_current_a: f64,
    pub cut_off_voltage_v: f64,
    pub discharge_current_a: Option<f64>,
}

pub(crate) fn unreadable(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidData(format!("cannot read {}: {e}", path.display()))
}

pub fn read_metadata(path: &Path) -> Result<CellMetadata> {
    let text = fs::read_to_string(path).map_err(|e| unreadable(path, e))?;
    let display = path.display().to_string();
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: display.clone(),
            line: i as u64 + 1,
            message: "expected key=value".into(),
        })?;
        let value: f64 = v.trim().parse().map_err(|_| Error::Parse {
            path: display.clone(),
            line: i as u64 + 1,
            message: format!("`{}` is not a number", v.trim()),
        })?;
        map.insert(k.trim().to_string(), value);
    }
    let get = |key: &str| {
        map.get(key).copied().ok_or_else(|| Error::MissingColumn {
            path: display.clone(),
            column: key.to_string(),
        })
    };
    Ok(CellMetadata {
        nominal_capacity_ah: get("nominal_capacity_ah")?,
        charge_current_a: get("charge_current_a")?,
        cut_off_voltage_v: get("cut_off_voltage_v")?,
        discharge_current_a: map.get("discharge_current_a").copied(),
    })
}

struct CycleBuilder {
    record: CycleRecord,
}

/// Parses one cell from its cycle CSV and metadata file.
pub fn load_cell(csv_path: &Path, meta_path: &Path) -> Result<CellHistory> {
    let meta = read_metadata(meta_path)?;
    let display = csv_path.display().to_string();
    let file = fs::File::open(csv_path).map_err(|e| unreadable(csv_path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: display.clone(),
            column: name.to_string(),
        })?;
    }

    let mut cell_id: Option<String> = None;
    let mut cycles: BTreeMap<u32, CycleBuilder> = BTreeMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::Parse {
            path: display.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { path: display.clone(), line, message };
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            let s = field(k);
            let v: f64 = s.parse().map_err(|_| parse_err(format!("{}: `{s}` is not a number", COLUMNS[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(format!("{}: non-finite value", COLUMNS[k])))
            }
        };

        let id = field(0);
        match &cell_id {
            None => cell_id = Some(id.to_string()),
            Some(existing) if existing != id => {
                return Err(parse_err(format!("file mixes cells `{existing}` and `{id}`")));
            }
            _ => {}
        }
        let cycle_index: u32 = field(1)
            .parse()
            .map_err(|_| parse_err(format!("cycle_index: `{}` is not a cycle number", field(1))))?;
        if cycle_index == 0 {
            return Err(parse_err("cycle_index must be >= 1".into()));
        }
        let time = num(2)?;
        let voltage = num(3)?;
        let current = num(4)?;
        let phase = Phase::parse(field(5)).ok_or_else(|| parse_err(format!("unknown phase `{}`", field(5))))?;
        let capacity = num(6)?;

        let builder = cycles.entry(cycle_index).or_insert_with(|| CycleBuilder {
            record: CycleRecord {
                cycle_index,
                time_s: Vec::new(),
                voltage_v: Vec::new(),
                current_a: Vec::new(),
                phase: Vec::new(),
                discharge_capacity_ah: capacity,
            },
        });
        let rec = &mut builder.record;
        if let Some(&last) = rec.time_s.last() {
            if time < last {
                return Err(Error::NonMonotoneTime {
                    cell: id.to_string(),
                    cycle: cycle_index,
                    line,
                });
            }
        }
        if capacity != rec.discharge_capacity_ah {
            return Err(parse_err(format!(
                "discharge_capacity_ah differs within cycle {cycle_index}"
            )));
        }
        rec.time_s.push(time);
        rec.voltage_v.push(voltage);
        rec.current_a.push(current);
        rec.phase.push(phase);
    }

    let cell_id = cell_id.ok_or_else(|| Error::InvalidData(format!("{display}: no data rows")))?;
    let cell = CellHistory {
        cell_id,
        nominal_capacity_ah: meta.nominal_capacity_ah,
        charge_current_a: meta.charge_current_a,
        discharge_current_a: meta.discharge_current_a,
        cut_off_voltage_v: meta.cut_off_voltage_v,
        cycles: cycles.into_values().map(|b| b.record).collect(),
    };
    cell.validate()?;
    Ok(cell)
}

pub fn cell_paths(dir: &Path, cell_id: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{cell_id}.csv")), dir.join(format!("{cell_id}.meta")))
}

/// Loads `<dir>/<cell_id>.csv` with its `<cell_id>.meta`.
pub fn load_cell_dir(dir: &Path, cell_id: &str) -> Result<CellHistory> {
    let (csv_path, meta_path) = cell_paths(dir, cell_id);
    load_cell(&csv_path, &meta_path)
}

/// Writes `<dir>/<cell_id>.csv` and `<dir>/<cell_id>.meta`. Floats use the
/// shortest round-trip representation, so reloading is lossless.
pub fn write_cell(cell: &CellHistory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (csv_path, meta_path) = cell_paths(dir, &cell.cell_id);
    let mut out = std::io::BufWriter::new(fs::File::create(csv_path)?);
    writeln!(out, "{}", COLUMNS.join(","))?;
    for c in &cell.cycles {
        for k in 0..c.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                cell.cell_id,
                c.cycle_index,
                c.time_s[k],
                c.voltage_v[k],
                c.current_a[k],
                c.phase[k].as_str(),
                c.discharge_capacity_ah
            )?;
        }
    }
    out.flush()?;
    let mut meta = format!(
        "nominal_capacity_ah={}\ncharge_current_a={}\ncut_off_voltage_v={}\n",
        cell.nominal_capacity_ah, cell.charge_current_a, cell.cut_off_voltage_v
    );
    if let Some(d) = cell.discharge_current_a {
        meta.push_str(&format!("discharge_current_a={d}\n"));
    }
    fs::write(meta_path, meta)?;
    Ok(())
}
