//! Deterministic synthetic cells with a known fade curve.
//!
//! Each cycle is a charge (CC, optional CV, optional fast-charge prefix), a
//! rest, a constant-current discharge and a final rest. Ageing shortens the
//! CC phase in proportion to SOH, stretches the CV current decay, raises the
//! start-of-charge voltage and increases the ohmic drop at load.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{write_cell, CellHistory, CycleRecord, DatasetManifest, Phase};
use crate::error::{Error, Result};
use crate::rng::{substream, Rng};

/// `SOH(k) = a·exp(b·(k−1)) + c·exp(d·(k−1))` with `a + c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadeModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FadeModel {
    /// Slow exponential fade `b < 0` with an accelerating knee of weight
    /// `knee` and rate `d > 0`.
    pub fn with_knee(b: f64, knee: f64, d: f64) -> Self {
        FadeModel { a: 1.0 + knee, b, c: -knee, d }
    }

    pub fn soh(&self, cycle: u32) -> f64 {
        let k = cycle as f64 - 1.0;
        self.a * (self.b * k).exp() + self.c * (self.d * k).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub voltage_v: f64,
    pub current_a: f64,
    pub capacity_ah: f64,
}

impl NoiseLevels {
    pub const NONE: NoiseLevels = NoiseLevels { voltage_v: 0.0, current_a: 0.0, capacity_ah: 0.0 };
    pub const MODERATE: NoiseLevels = NoiseLevels { voltage_v: 0.002, current_a: 0.005, capacity_ah: 0.002 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeProtocol {
    CcCv,
    Cc,
    FastChargeCcCv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCellSpec {
    pub cell_id: String,
    pub seed: u64,
    pub cycles: u32,
    pub fade: FadeModel,
    pub noise: NoiseLevels,
    pub protocol: ChargeProtocol,
    pub nominal_capacity_ah: f64,
    pub charge_c_rate: f64,
    pub discharge_c_rate: f64,
    pub v_high: f64,
    /// Sampling interval during charge.
    pub charge_dt_s: f64,
}

impl SyntheticCellSpec {
    pub fn new(cell_id: &str, seed: u64, cycles: u32, fade: FadeModel) -> Self {
        SyntheticCellSpec {
            cell_id: cell_id.to_string(),
            seed,
            cycles,
            fade,
            noise: NoiseLevels::NONE,
            protocol: ChargeProtocol::CcCv,
            nominal_capacity_ah: 1.1,
            charge_c_rate: 0.5,
            discharge_c_rate: 1.0,
            v_high: 4.2,
            charge_dt_s: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cycles < 2 {
            return Err(Error::Config("a synthetic cell needs at least 2 cycles".into()));
        }
        if ((self.fade.a + self.fade.c) - 1.0).abs() > 1e-12 {
            return Err(Error::Config("fade coefficients must satisfy a + c = 1".into()));
        }
        if let Some(k) = (1..=self.cycles).find(|&k| !(0.5 < self.fade.soh(k) && self.fade.soh(k) <= 1.05)) {
            return Err(Error::Config(format!("fade curve leaves (0.5, 1.05] at cycle {k}")));
        }
        let n = &self.noise;
        if [n.voltage_v, n.current_a, n.capacity_ah].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if !(self.nominal_capacity_ah > 0.0 && self.charge_c_rate > 0.0 && self.discharge_c_rate > 0.0 && self.charge_dt_s > 0.0)
        {
            return Err(Error::Config("capacity, C-rates and sampling interval must be positive".into()));
        }
        Ok(())
    }
}

const CC_FRACTION: f64 = 0.8;
const CC_SHAPE_WEIGHT: f64 = 0.3;
const START_VOLTAGE: f64 = 3.45;
const START_DRIFT: f64 = 0.4;
const FAST_CHARGE_END_V: f64 = 3.8;
const CV_TAU_S: f64 = 500.0;
const CV_END_FRACTION: f64 = 0.05;
const RESISTANCE_OHM: f64 = 0.06;
const RESISTANCE_GROWTH: f64 = 1.5;
const DISCHARGE_DT_S: f64 = 60.0;
const REST_DT_S: f64 = 60.0;
const REST_SAMPLES: usize = 10;
const DISCHARGE_END_V: f64 = 2.8;

/// CC voltage profile on `u ∈ [0, 1]`.
fn cc_shape(u: f64) -> f64 {
    (1.0 - CC_SHAPE_WEIGHT) * u + CC_SHAPE_WEIGHT * u.powi(4)
}

struct Builder {
    t: Vec<f64>,
    v: Vec<f64>,
    i: Vec<f64>,
    p: Vec<Phase>,
    rng: Rng,
    noise_v: Option<Normal<f64>>,
    noise_i: Option<Normal<f64>>,
}

impl Builder {
    fn push(&mut self, t: f64, v: f64, i: f64, p: Phase) {
        let nv = self.noise_v.map_or(0.0, |n| n.sample(&mut self.rng));
        let ni = self.noise_i.map_or(0.0, |n| n.sample(&mut self.rng));
        self.t.push(t);
        self.v.push(v + nv);
        self.i.push(i + ni);
        self.p.push(p);
    }

    fn now(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }
}

/// Sample times `dt, 2dt, …` up to and including `duration`.
fn grid(duration: f64, dt: f64) -> Vec<f64> {
    let n = (duration / dt).ceil().max(1.0) as usize;
    (1..=n).map(|k| if k == n { duration } else { k as f64 * dt }).collect()
}

fn normal(sd: f64) -> Option<Normal<f64>> {
    (sd > 0.0).then(|| Normal::new(0.0, sd).expect("positive sd"))
}

fn build_cycle(spec: &SyntheticCellSpec, k: u32) -> CycleRecord {
    let soh = spec.fade.soh(k);
    let cap = spec.nominal_capacity_ah * soh;
    let i_cc = spec.charge_c_rate * spec.nominal_capacity_ah;
    let i_dis = spec.discharge_c_rate * spec.nominal_capacity_ah;
    let r = RESISTANCE_OHM * (1.0 + RESISTANCE_GROWTH * (1.0 - soh));
    let v0 = START_VOLTAGE + START_DRIFT * (1.0 - soh);
    let dt = spec.charge_dt_s;
    let mut b = Builder {
        t: vec![],
        v: vec![],
        i: vec![],
        p: vec![],
        rng: substream(spec.seed, "synthetic-noise", k as u64),
        noise_v: normal(spec.noise.voltage_v),
        noise_i: normal(spec.noise.current_a),
    };

    let mut cc_start_v = v0;
    let first_phase = if spec.protocol == ChargeProtocol::FastChargeCcCv { Phase::FastCharge } else { Phase::CcCharge };
    b.push(0.0, v0, if first_phase == Phase::FastCharge { 2.0 * i_cc } else { i_cc }, first_phase);
    if spec.protocol == ChargeProtocol::FastChargeCcCv {
        let duration = 900.0 * soh;
        for s in grid(duration, dt) {
            b.push(s, v0 + (FAST_CHARGE_END_V - v0) * s / duration, 2.0 * i_cc, Phase::FastCharge);
        }
        cc_start_v = FAST_CHARGE_END_V;
    }

    let t_cc = CC_FRACTION * 3600.0 * soh / spec.charge_c_rate;
    let t0 = b.now();
    let times = grid(t_cc, dt);
    for (n, &s) in times.iter().enumerate() {
        let v = cc_start_v + (spec.v_high - cc_start_v) * cc_shape(s / t_cc);
        if n + 1 == times.len() {
            // The final CC sample always reaches the voltage limit.
            let nv = b.noise_v.map_or(0.0, |d| d.sample(&mut b.rng).abs());
            b.t.push(t0 + s);
            b.v.push(spec.v_high + nv);
            b.i.push(i_cc);
            b.p.push(Phase::CcCharge);
        } else {
            b.push(t0 + s, v, i_cc, Phase::CcCharge);
        }
    }

    if spec.protocol != ChargeProtocol::Cc {
        let tau = CV_TAU_S / soh;
        let t_cv = tau * (1.0 / CV_END_FRACTION).ln();
        let t0 = b.now();
        for s in grid(t_cv, dt) {
            b.push(t0 + s, spec.v_high, i_cc * (-s / tau).exp(), Phase::CvCharge);
        }
    }

    let t0 = b.now();
    let v_rest = spec.v_high - 0.05;
    for n in 1..=REST_SAMPLES {
        let s = n as f64 * REST_DT_S;
        b.push(t0 + s, v_rest + 0.05 * (-(s / 120.0)).exp(), 0.0, Phase::Rest);
    }

    let t_dis = 3600.0 * cap / i_dis;
    let t0 = b.now();
    let v_load = v_rest - i_dis * r;
    for s in grid(t_dis, DISCHARGE_DT_S) {
        let u = s / t_dis;
        let v = v_load - (v_load - DISCHARGE_END_V) * (0.7 * u + 0.3 * u.powi(6));
        b.push(t0 + s, v, -i_dis, Phase::Discharge);
    }
    // The first discharge sample sits right at load application.
    let first = b.p.iter().position(|&p| p == Phase::Discharge).expect("discharge samples");
    b.t[first] = t0 + 1.0;
    b.v[first] = v_load + b.noise_v.map_or(0.0, |d| d.sample(&mut b.rng));

    let t0 = b.now();
    for n in 1..=REST_SAMPLES {
        let s = n as f64 * REST_DT_S;
        b.push(t0 + s, 3.3 - 0.2 * (-(s / 120.0)).exp(), 0.0, Phase::Rest);
    }

    let cap_noise = normal(spec.noise.capacity_ah).map_or(0.0, |d| d.sample(&mut b.rng));
    CycleRecord {
        cycle_index: k,
        time_s: b.t,
        voltage_v: b.v,
        current_a: b.i,
        phase: b.p,
        discharge_capacity_ah: cap + cap_noise,
    }
}

pub fn generate_cell(spec: &SyntheticCellSpec) -> Result<CellHistory> {
    spec.validate()?;
    let cell = CellHistory {
        cell_id: spec.cell_id.clone(),
        nominal_capacity_ah: spec.nominal_capacity_ah,
        charge_current_a: spec.charge_c_rate * spec.nominal_capacity_ah,
        discharge_current_a: Some(spec.discharge_c_rate * spec.nominal_capacity_ah),
        cut_off_voltage_v: spec.v_high,
        cycles: (1..=spec.cycles).map(|k| build_cycle(spec, k)).collect(),
    };
    cell.validate()?;
    Ok(cell)
}

/// Per-cell parameter ranges for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub cells: usize,
    pub cycles: u32,
    pub seed: u64,
    pub noise: NoiseLevels,
    pub protocol: ChargeProtocol,
    pub fade_b: (f64, f64),
    pub knee: (f64, f64),
    pub knee_rate: (f64, f64),
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            cells: 12,
            cycles: 100,
            seed: 0,
            noise: NoiseLevels::MODERATE,
            protocol: ChargeProtocol::CcCv,
            fade_b: (-0.0015, -0.0008),
            knee: (0.002, 0.006),
            knee_rate: (0.03, 0.04),
        }
    }
}

impl DatasetSpec {
    /// Cell specs named `syn00`, `syn01`, …
    pub fn cell_specs(&self) -> Vec<SyntheticCellSpec> {
        (0..self.cells)
            .map(|i| {
                let mut rng = substream(self.seed, "synthetic-cell", i as u64);
                let b = rng.random_range(self.fade_b.0..=self.fade_b.1);
                let knee = rng.random_range(self.knee.0..=self.knee.1);
                let d = rng.random_range(self.knee_rate.0..=self.knee_rate.1);
                let mut spec = SyntheticCellSpec::new(&format!("syn{i:02}"), rng.random(), self.cycles, FadeModel::with_knee(b, knee, d));
                spec.noise = self.noise;
                spec.protocol = self.protocol;
                spec
            })
            .collect()
    }

    pub fn generate(&self) -> Result<Vec<CellHistory>> {
        self.cell_specs().iter().map(generate_cell).collect()
    }
}

/// Default role split: the first `train` cells train (the first half of them
/// also drive feature selection), the next `calibration` calibrate, the rest test.
pub fn default_manifest(cells: &[CellHistory], train: usize, calibration: usize) -> Result<DatasetManifest> {
    let mut rows: Vec<(&str, &str)> = Vec::new();
    let fs = train.div_ceil(2).max(2).min(train);
    for (i, c) in cells.iter().enumerate() {
        let role = if i < train {
            "train"
        } else if i < train + calibration {
            "calibration"
        } else {
            "test"
        };
        rows.push((&c.cell_id, role));
        if i < fs {
            rows.push((&c.cell_id, "feature_selection"));
        }
    }
    DatasetManifest::from_rows(rows)
}

/// Writes every cell plus `manifest.csv` into `dir`.
pub fn write_dataset(cells: &[CellHistory], manifest: &DatasetManifest, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for c in cells {
        write_cell(c, dir)?;
    }
    manifest.save(&dir.join("manifest.csv"))
}
