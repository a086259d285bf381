use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, FeatureVector};

/// Rows are cycles; columns are named features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Cell id per row.
    pub groups: Vec<String>,
    pub cycles: Vec<u32>,
    /// Marks rows produced by adversarial augmentation.
    pub adversarial: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, x: DMatrix<f64>, y: Vec<f64>, groups: Vec<String>, cycles: Vec<u32>) -> Result<Self> {
        let n = y.len();
        let fm = FeatureMatrix { columns, x, y, groups, cycles, adversarial: vec![false; n] };
        fm.validate()?;
        Ok(fm)
    }

    /// Builds a matrix from feature vectors. Without explicit `columns`, uses
    /// the features present in every vector.
    pub fn from_vectors(vectors: &[FeatureVector], columns: Option<&[String]>) -> Result<Self> {
        let columns: Vec<String> = match columns {
            Some(c) => c.to_vec(),
            None => {
                let mut common: Option<BTreeSet<Feature>> = None;
                for v in vectors {
                    let keys: BTreeSet<Feature> = v.values.keys().copied().collect();
                    common = Some(match common {
                        None => keys,
                        Some(c) => c.intersection(&keys).copied().collect(),
                    });
                }
                common.unwrap_or_default().into_iter().map(|f| f.name().to_string()).collect()
            }
        };
        let features: Vec<Feature> = columns
            .iter()
            .map(|c| Feature::from_name(c).ok_or_else(|| Error::Config(format!("unknown feature `{c}`"))))
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(vectors.len() * features.len());
        for v in vectors {
            for f in &features {
                data.push(v.get(*f).ok_or_else(|| Error::InvalidData(format!(
                    "cell {} cycle {} lacks feature `{f}`",
                    v.cell_id, v.cycle_index
                )))?);
            }
        }
        Self::new(
            columns,
            DMatrix::from_row_slice(vectors.len(), features.len(), &data),
            vectors.iter().map(|v| v.soh).collect(),
            vectors.iter().map(|v| v.cell_id.clone()).collect(),
            vectors.iter().map(|v| v.cycle_index).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.x.nrows() != n || self.groups.len() != n || self.cycles.len() != n || self.adversarial.len() != n {
            return Err(Error::InvalidData("feature matrix row counts disagree".into()));
        }
        if self.x.ncols() != self.columns.len() {
            return Err(Error::InvalidData("feature matrix column count disagrees with names".into()));
        }
        if let Some(k) = self.x.iter().chain(&self.y).position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite entry at flat position {k}")));
        }
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.y.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    /// Distinct cell ids in order of first appearance.
    pub fn group_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.groups.iter().filter(|g| seen.insert(g.as_str())).cloned().collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn select_columns(&self, names: &[String]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::InvalidData(format!("no column `{n}`"))))
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            columns: names.to_vec(),
            x: self.x.select_columns(&idx),
            ..self.clone()
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        FeatureMatrix {
            columns: self.columns.clone(),
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            groups: rows.iter().map(|&r| self.groups[r].clone()).collect(),
            cycles: rows.iter().map(|&r| self.cycles[r]).collect(),
            adversarial: rows.iter().map(|&r| self.adversarial[r]).collect(),
        }
    }

    pub fn rows_where(&self, keep: impl Fn(usize) -> bool) -> Self {
        let rows: Vec<usize> = (0..self.nrows()).filter(|&r| keep(r)).collect();
        self.select_rows(&rows)
    }

    pub fn rows_in_groups(&self, groups: &[String]) -> Self {
        self.rows_where(|r| groups.contains(&self.groups[r]))
    }

    /// Stacks `other` below `self`; columns must match.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<Self> {
        if self.columns != other.columns {
            return Err(Error::InvalidData("cannot stack matrices with different columns".into()));
        }
        let (n1, n2, d) = (self.nrows(), other.nrows(), self.ncols());
        let x = DMatrix::from_fn(n1 + n2, d, |r, c| if r < n1 { self.x[(r, c)] } else { other.x[(r - n1, c)] });
        let join = |a: &[String], b: &[String]| a.iter().chain(b).cloned().collect::<Vec<_>>();
        Ok(FeatureMatrix {
            columns: self.columns.clone(),
            x,
            y: self.y.iter().chain(&other.y).copied().collect(),
            groups: join(&self.groups, &other.groups),
            cycles: self.cycles.iter().chain(&other.cycles).copied().collect(),
            adversarial: self.adversarial.iter().chain(&other.adversarial).copied().collect(),
        })
    }

    /// Writes `cell_id,cycle_index,<columns>,soh`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["cell_id".to_string(), "cycle_index".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("soh".into());
        w.write_record(&header)?;
        for r in 0..self.nrows() {
            let mut rec = vec![self.groups[r].clone(), self.cycles[r].to_string()];
            rec.extend((0..self.ncols()).map(|c| self.x[(r, c)].to_string()));
            rec.push(self.y[r].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let shown = path.display().to_string();
        let mut rd = csv::Reader::from_path(path)?;
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "cell_id" || header[1] != "cycle_index" || header[header.len() - 1] != "soh" {
            return Err(Error::Parse { path: shown, line: 1, message: "expected cell_id,cycle_index,<features>,soh".into() });
        }
        let columns = header[2..header.len() - 1].to_vec();
        let (mut data, mut y, mut groups, mut cycles) = (vec![], vec![], vec![], vec![]);
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = k as u64 + 2;
            let num = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|_| Error::Parse { path: shown.clone(), line, message: format!("bad number `{s}`") })
            };
            groups.push(rec[0].to_string());
            cycles.push(rec[1].trim().parse().map_err(|_| Error::Parse {
                path: shown.clone(),
                line,
                message: format!("bad cycle index `{}`", &rec[1]),
            })?);
            for c in 0..columns.len() {
                data.push(num(&rec[c + 2])?);
            }
            y.push(num(&rec[rec.len() - 1])?);
        }
        Self::new(columns.clone(), DMatrix::from_row_slice(y.len(), columns.len(), &data), y, groups, cycles)
    }
}

/// Per-column z-scoring with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation; a zero deviation is clamped to 1.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let m = col.sum() / n;
            let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            mean.push(m);
            std.push(if s > 0.0 { s } else { 1.0 });
        }
        Standardizer { mean, std }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::InvalidData(format!("standardizer expects {} columns, got {}", self.mean.len(), x.ncols())));
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - self.mean[c]) / self.std[c]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_examples() {
        let x = DMatrix::from_row_slice(4, 2, &[3.0, 1.0, 7.0, 1.0, 3.0, 1.0, 7.0, 1.0]);
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![5.0, 1.0]);
        assert_eq!(s.std, vec![2.0, 1.0]);
        let z = s.apply(&x).unwrap();
        assert_eq!(z.column(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, -1.0, 1.0]);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        let test = DMatrix::from_row_slice(1, 2, &[9.0, 4.0]);
        assert_eq!(s.apply(&test).unwrap().row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let fm = FeatureMatrix::new(
            vec!["ccct_s".into(), "cvct_s".into()],
            DMatrix::from_row_slice(2, 2, &[1000.5, 0.1 + 0.2, 990.25, 1e-17]),
            vec![1.0, 0.987_654_321_012_345_6],
            vec!["a".into(), "a".into()],
            vec![2, 3],
        )
        .unwrap();
        let p = dir.path().join("f.csv");
        fm.write_csv(&p).unwrap();
        assert_eq!(FeatureMatrix::read_csv(&p).unwrap(), fm);
    }
}
