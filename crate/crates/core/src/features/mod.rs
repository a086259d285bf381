//! Engineered features for one cycle.
//!
//! Shape features (slope, entropies, moments, curve distances) are computed
//! on min-max normalized segments; in the Fréchet, Hausdorff and curve-entropy
//! features time is also scaled to `[0, 1]` so both axes are commensurate.
//! Energy, mean and duration features use the physical units.
//!
//! Columns are always ordered alphabetically by feature name.

pub mod geometry;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{CellHistory, CycleRecord, Phase};
use crate::defaults::REFERENCE_LINE_POINTS;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::segments::{
    extract_cc_segment, extract_cv_segment, normalize_segment, CurveSegment, ThresholdConfig, ThresholdSettings,
};

pub use geometry::{curve_entropy, directed_hausdorff, discrete_frechet, reference_line, Point};
pub use stats::{integral_capacity, integral_energy, kurtosis, shannon_entropy, skewness, slope};

macro_rules! features {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Feature identifiers, declared in alphabetical order of their names.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Feature { $($variant),+ }

        impl Feature {
            const EVERY: &'static [Feature] = &[$(Feature::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $(Feature::$variant => $name),+ }
            }
        }
    };
}

features! {
    CcCapacityAh => "cc_capacity_ah",
    CcCurveEntropy => "cc_curve_entropy",
    CcEnergyWh => "cc_energy_wh",
    CcFrechet => "cc_frechet",
    CcHausdorff => "cc_hausdorff",
    CcKurtosis => "cc_kurtosis",
    CcMeanCurrentA => "cc_mean_current_a",
    CcShannonEntropy => "cc_shannon_entropy",
    CcSkewness => "cc_skewness",
    CcSlope => "cc_slope",
    CcctS => "ccct_s",
    ChargeCurrentA => "charge_current_a",
    CumDischargeCapacityAh => "cum_discharge_capacity_ah",
    CumDischargeEnergyWh => "cum_discharge_energy_wh",
    CvCurveEntropy => "cv_curve_entropy",
    CvEnergyWh => "cv_energy_wh",
    CvFrechet => "cv_frechet",
    CvHausdorff => "cv_hausdorff",
    CvKurtosis => "cv_kurtosis",
    CvMeanVoltageV => "cv_mean_voltage_v",
    CvShannonEntropy => "cv_shannon_entropy",
    CvSkewness => "cv_skewness",
    CvSlope => "cv_slope",
    CvctS => "cvct_s",
    DischargeCurrentA => "discharge_current_a",
    EnergyDifference => "energy_difference",
    EnergyRatio => "energy_ratio",
    LaggedCycleTimeS => "lagged_cycle_time_s",
    LaggedPseudoResistanceOhm => "lagged_pseudo_resistance_ohm",
    NominalCapacityAh => "nominal_capacity_ah",
    StartOfChargeVoltageV => "start_of_charge_voltage_v",
}

impl Feature {
    /// The standard 30-feature set (excludes the optional CC capacity).
    pub fn standard() -> impl Iterator<Item = Feature> {
        Self::EVERY.iter().copied().filter(|f| *f != Feature::CcCapacityAh)
    }

    /// Every known feature including optional ones.
    pub fn all() -> &'static [Feature] {
        Self::EVERY
    }

    /// Features that need the constant-voltage charge segment.
    pub fn needs_cv(self) -> bool {
        matches!(
            self,
            Feature::CvctS
                | Feature::CvMeanVoltageV
                | Feature::CvSlope
                | Feature::CvEnergyWh
                | Feature::EnergyRatio
                | Feature::EnergyDifference
                | Feature::CvCurveEntropy
                | Feature::CvShannonEntropy
                | Feature::CvSkewness
                | Feature::CvKurtosis
                | Feature::CvFrechet
                | Feature::CvHausdorff
        )
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Self::EVERY.iter().copied().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature values for one cycle plus its SOH target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub cell_id: String,
    pub cycle_index: u32,
    pub values: BTreeMap<Feature, f64>,
    pub soh: f64,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> Option<f64> {
        self.values.get(&f).copied()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.values.keys().map(|f| f.name()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub thresholds: ThresholdSettings,
    /// Adds `cc_capacity_ah` (charge passed during the CC segment).
    pub include_cc_capacity: bool,
}

/// Reference capacity used for the SOH target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SohReference {
    FirstCycle,
    Capacity(f64),
}

/// Voltage drop at the rest-to-discharge transition divided by the load
/// current, or `None` when the cycle has no such transition.
pub fn pseudo_resistance(cycle: &CycleRecord) -> Option<f64> {
    (1..cycle.len()).find_map(|k| {
        if cycle.phase[k] == Phase::Discharge && cycle.phase[k - 1] == Phase::Rest {
            let load = cycle.current_a[k].abs();
            (load > 0.0).then(|| (cycle.voltage_v[k - 1] - cycle.voltage_v[k]) / load)
        } else {
            None
        }
    })
}

/// History-derived quantities shared by all cycles of a cell.
struct CellContext {
    cum_capacity: Vec<f64>,
    cum_energy: Vec<f64>,
    resistance: Vec<Option<f64>>,
}

impl CellContext {
    fn new(cell: &CellHistory) -> Self {
        let n = cell.cycles.len();
        let mut cum_capacity = Vec::with_capacity(n);
        let mut cum_energy = Vec::with_capacity(n);
        let (mut q, mut e) = (0.0, 0.0);
        for c in &cell.cycles {
            cum_capacity.push(q);
            cum_energy.push(e);
            q += c.discharge_capacity_ah;
            e += c.discharge_energy_wh();
        }
        CellContext { cum_capacity, cum_energy, resistance: cell.cycles.iter().map(pseudo_resistance).collect() }
    }
}

fn named(name: Feature, r: Result<f64>) -> Result<f64> {
    let v = r.map_err(|e| e.in_feature(name.name()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("non-finite value {v}")).in_feature(name.name()))
    }
}

/// Segment-level features keyed by the CC or CV variant of each feature.
struct SegmentFeatures {
    duration: Feature,
    mean_aux: Feature,
    slope: Feature,
    energy: Feature,
    curve_entropy: Feature,
    shannon: Feature,
    skewness: Feature,
    kurtosis: Feature,
    frechet: Feature,
    hausdorff: Feature,
}

const CC_FEATURES: SegmentFeatures = SegmentFeatures {
    duration: Feature::CcctS,
    mean_aux: Feature::CcMeanCurrentA,
    slope: Feature::CcSlope,
    energy: Feature::CcEnergyWh,
    curve_entropy: Feature::CcCurveEntropy,
    shannon: Feature::CcShannonEntropy,
    skewness: Feature::CcSkewness,
    kurtosis: Feature::CcKurtosis,
    frechet: Feature::CcFrechet,
    hausdorff: Feature::CcHausdorff,
};

const CV_FEATURES: SegmentFeatures = SegmentFeatures {
    duration: Feature::CvctS,
    mean_aux: Feature::CvMeanVoltageV,
    slope: Feature::CvSlope,
    energy: Feature::CvEnergyWh,
    curve_entropy: Feature::CvCurveEntropy,
    shannon: Feature::CvShannonEntropy,
    skewness: Feature::CvSkewness,
    kurtosis: Feature::CvKurtosis,
    frechet: Feature::CvFrechet,
    hausdorff: Feature::CvHausdorff,
};

fn segment_features(seg: &CurveSegment, keys: &SegmentFeatures, out: &mut BTreeMap<Feature, f64>) -> Result<()> {
    let norm = normalize_segment(seg)?;
    let pts = norm.unit_points();
    let line = reference_line(pts[0], pts[pts.len() - 1], REFERENCE_LINE_POINTS);
    let (volts, amps) = seg.voltage_current();
    out.insert(keys.duration, named(keys.duration, Ok(seg.duration()))?);
    out.insert(keys.mean_aux, named(keys.mean_aux, Ok(stats::time_mean(&seg.t, &seg.aux)))?);
    out.insert(keys.slope, named(keys.slope, slope(&norm.t, &norm.v))?);
    out.insert(keys.energy, named(keys.energy, Ok(integral_energy(&seg.t, volts, amps)))?);
    out.insert(keys.curve_entropy, named(keys.curve_entropy, curve_entropy(&pts))?);
    out.insert(keys.shannon, named(keys.shannon, shannon_entropy(&norm.v))?);
    out.insert(keys.skewness, named(keys.skewness, skewness(&norm.v))?);
    out.insert(keys.kurtosis, named(keys.kurtosis, kurtosis(&norm.v))?);
    out.insert(keys.frechet, named(keys.frechet, discrete_frechet(&pts, &line))?);
    out.insert(keys.hausdorff, named(keys.hausdorff, directed_hausdorff(&pts, &line))?);
    Ok(())
}

/// Features of the cycle at `pos`; also returns the cycle index the lagged
/// pseudo-resistance was imputed from, when it was.
fn assemble_at(
    cell: &CellHistory,
    pos: usize,
    cfg: &ThresholdConfig,
    opts: &FeatureOptions,
    ctx: &CellContext,
    reference: f64,
) -> Result<(FeatureVector, Option<u32>)> {
    let cycle = &cell.cycles[pos];
    if pos == 0 {
        return Err(Error::InvalidData(format!(
            "cycle {}: lagged features need a previous cycle",
            cycle.cycle_index
        ))
        .in_feature(Feature::LaggedCycleTimeS.name()));
    }
    let mut values = BTreeMap::new();
    values.insert(Feature::NominalCapacityAh, cell.nominal_capacity_ah);
    values.insert(Feature::ChargeCurrentA, cell.charge_current_a);
    let discharge = cycle.mean_discharge_current().or(cell.discharge_current_a).ok_or_else(|| {
        Error::InvalidData("no discharge samples and no discharge current in metadata".into())
            .in_feature(Feature::DischargeCurrentA.name())
    })?;
    values.insert(Feature::DischargeCurrentA, discharge);
    values.insert(Feature::CumDischargeCapacityAh, ctx.cum_capacity[pos]);
    values.insert(Feature::CumDischargeEnergyWh, ctx.cum_energy[pos]);
    values.insert(Feature::LaggedCycleTimeS, cell.cycles[pos - 1].duration_s());

    let (resistance, source) = (0..pos)
        .rev()
        .find_map(|p| ctx.resistance[p].map(|r| (r, p)))
        .ok_or_else(|| {
            Error::InvalidData("no earlier cycle has a rest-to-discharge transition".into())
                .in_feature(Feature::LaggedPseudoResistanceOhm.name())
        })?;
    values.insert(Feature::LaggedPseudoResistanceOhm, resistance);
    let imputed = (source != pos - 1).then(|| cell.cycles[source].cycle_index);

    let start_v = (0..cycle.len())
        .find(|&k| cycle.phase[k].is_charge())
        .map(|k| cycle.voltage_v[k])
        .ok_or_else(|| {
            Error::InvalidData("cycle has no charge samples".into()).in_feature(Feature::StartOfChargeVoltageV.name())
        })?;
    values.insert(Feature::StartOfChargeVoltageV, start_v);

    let cc = extract_cc_segment(cycle, cfg)?;
    segment_features(&cc, &CC_FEATURES, &mut values)?;
    if opts.include_cc_capacity {
        values.insert(Feature::CcCapacityAh, integral_capacity(&cc.t, &cc.aux));
    }
    if cycle.has_phase(Phase::CvCharge) {
        let cv = extract_cv_segment(cycle, cfg)?;
        segment_features(&cv, &CV_FEATURES, &mut values)?;
        let (ecc, ecv) = (values[&Feature::CcEnergyWh], values[&Feature::CvEnergyWh]);
        values.insert(Feature::EnergyRatio, named(Feature::EnergyRatio, Ok(ecc / ecv))?);
        values.insert(Feature::EnergyDifference, ecc - ecv);
    }

    let soh = crate::data::soh(cycle.discharge_capacity_ah, reference)?;
    Ok((
        FeatureVector { cell_id: cell.cell_id.clone(), cycle_index: cycle.cycle_index, values, soh },
        imputed,
    ))
}

fn resolve_reference(cell: &CellHistory, reference: SohReference) -> Result<f64> {
    match reference {
        SohReference::FirstCycle => cell
            .first_capacity()
            .ok_or_else(|| Error::InvalidData(format!("cell {} has no cycles", cell.cell_id))),
        SohReference::Capacity(c) => Ok(c),
    }
}

/// Builds the feature vector of one cycle with the raw first-cycle reference.
pub fn assemble_features(cell: &CellHistory, cycle_index: u32, opts: &FeatureOptions) -> Result<FeatureVector> {
    let pos = cell
        .position_of(cycle_index)
        .ok_or_else(|| Error::InvalidData(format!("cell {} has no cycle {cycle_index}", cell.cell_id)))?;
    let cfg = opts.thresholds.resolve(cell)?;
    let reference = resolve_reference(cell, SohReference::FirstCycle)?;
    assemble_at(cell, pos, &cfg, opts, &CellContext::new(cell), reference).map(|(fv, _)| fv)
}

#[derive(Debug, Clone, Default)]
pub struct FeaturizedCell {
    pub vectors: Vec<FeatureVector>,
    /// Extraction log: skipped cycles and imputed lags.
    pub log: Vec<String>,
}

/// Featurizes every cycle after the first. Cycles whose segments cannot be
/// extracted are skipped and logged; `keep`, when given, masks cycles out of
/// the output without removing them from the history.
pub fn featurize_cell(
    cell: &CellHistory,
    opts: &FeatureOptions,
    reference: SohReference,
    keep: Option<&[bool]>,
    exec: Execution,
) -> Result<FeaturizedCell> {
    let cfg = opts.thresholds.resolve(cell)?;
    let reference = resolve_reference(cell, reference)?;
    let ctx = CellContext::new(cell);
    let positions: Vec<usize> = (1..cell.cycles.len()).filter(|&p| keep.is_none_or(|k| k[p])).collect();
    let results = exec.map(&positions, |&p| assemble_at(cell, p, &cfg, opts, &ctx, reference));
    let mut out = FeaturizedCell::default();
    for (&p, r) in positions.iter().zip(results) {
        let idx = cell.cycles[p].cycle_index;
        match r {
            Ok((fv, imputed)) => {
                if let Some(src) = imputed {
                    out.log.push(format!(
                        "{} cycle {idx}: lagged pseudo-resistance imputed from cycle {src}",
                        cell.cell_id
                    ));
                }
                out.vectors.push(fv);
            }
            Err(e) if is_skippable(&e) => {
                out.log.push(format!("{} cycle {idx}: skipped: {e}", cell.cell_id));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn is_skippable(e: &Error) -> bool {
    matches!(
        e.root(),
        Error::SegmentUnavailable { .. }
            | Error::DegenerateSegment(_)
            | Error::DegenerateSeries(_)
            | Error::InvalidData(_)
            | Error::Numerical(_)
            | Error::Domain(_)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_alphabetical_and_unique() {
        let names: Vec<_> = Feature::all().iter().map(|f| f.name()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(names, sorted);
        assert_eq!(Feature::standard().count(), 30);
        assert_eq!(Feature::standard().filter(|f| f.needs_cv()).count(), 12);
        for f in Feature::all() {
            assert_eq!(Feature::from_name(f.name()), Some(*f));
        }
    }

    fn discharge_cycle(v_rest: f64, v_load: f64, amps: f64) -> CycleRecord {
        CycleRecord {
            cycle_index: 1,
            time_s: vec![0.0, 10.0, 20.0, 30.0],
            voltage_v: vec![4.2, v_rest, v_load, v_load - 0.1],
            current_a: vec![0.5, 0.0, -amps, -amps],
            phase: vec![Phase::CvCharge, Phase::Rest, Phase::Discharge, Phase::Discharge],
            discharge_capacity_ah: 1.0,
        }
    }

    #[test]
    fn pseudo_resistance_examples() {
        assert!((pseudo_resistance(&discharge_cycle(4.2, 4.1, 1.0)).unwrap() - 0.1).abs() < 1e-12);
        assert!((pseudo_resistance(&discharge_cycle(4.2, 4.0, 2.0)).unwrap() - 0.1).abs() < 1e-12);
        let mut c = discharge_cycle(4.2, 4.0, 2.0);
        c.phase = vec![Phase::CvCharge, Phase::Rest, Phase::Rest, Phase::Rest];
        assert_eq!(pseudo_resistance(&c), None);
    }
}
