//! Threshold-based extraction of charge-curve segments.
//!
//! The CC segment is the voltage-vs-time slice of the `cc_charge` samples
//! between `V_l = V_h - delta_v` and `V_h`; the CV segment is the
//! current-vs-time slice of the `cv_charge` samples between `I_h` and
//! `I_l = i_low_fraction * I_h`. Crossings are located by linear
//! interpolation between the bracketing samples and inserted as exact
//! endpoints. `fast_charge` samples are never used.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{CellHistory, CycleRecord, Phase};
use crate::defaults;
use crate::error::{Error, MissingThreshold, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Voltage against time during constant-current charge (CCCV-CCCT).
    CcVoltage,
    /// Current against time during constant-voltage charge (CVCC-CVCT).
    CvCurrent,
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::CcVoltage => "CC voltage",
            SegmentKind::CvCurrent => "CV current",
        })
    }
}

/// A slice of a charge curve with time rebased to zero.
///
/// `v` is the segment's own signal (volts for CC, amperes for CV); `aux` holds
/// the other channel at the same instants, always in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSegment {
    pub kind: SegmentKind,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub aux: Vec<f64>,
    pub normalized: bool,
}

impl CurveSegment {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    /// Voltage and current series in physical units, regardless of kind.
    pub fn voltage_current(&self) -> (&[f64], &[f64]) {
        match self.kind {
            SegmentKind::CcVoltage => (&self.v, &self.aux),
            SegmentKind::CvCurrent => (&self.aux, &self.v),
        }
    }

    /// Points on the unit square: time divided by the duration, value as
    /// stored (normalize first for a commensurate plane).
    pub fn unit_points(&self) -> Vec<[f64; 2]> {
        let d = self.duration();
        self.t.iter().zip(&self.v).map(|(&t, &v)| [t / d, v]).collect()
    }
}

/// Per-cell resolved thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub v_high: f64,
    pub delta_v: f64,
    pub i_high: f64,
    pub i_low_fraction: f64,
}

impl ThresholdConfig {
    pub fn new(v_high: f64, delta_v: f64, i_high: f64, i_low_fraction: f64) -> Result<Self> {
        if !(delta_v > 0.0 && v_high > delta_v) {
            return Err(Error::Config(format!(
                "thresholds need v_high > delta_v > 0 (v_high={v_high}, delta_v={delta_v})"
            )));
        }
        if !(i_low_fraction > 0.0 && i_low_fraction < 1.0) {
            return Err(Error::Config(format!("i_low_fraction must be in (0, 1), got {i_low_fraction}")));
        }
        if !(i_high > 0.0) {
            return Err(Error::Config(format!("i_high must be positive, got {i_high}")));
        }
        Ok(ThresholdConfig { v_high, delta_v, i_high, i_low_fraction })
    }

    pub fn v_low(&self) -> f64 {
        self.v_high - self.delta_v
    }

    pub fn i_low(&self) -> f64 {
        self.i_low_fraction * self.i_high
    }
}

/// Threshold settings before they are resolved against a cell. Unset `v_high`
/// defaults to the cell's cut-off voltage and unset `i_high` to its charge
/// current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSettings {
    pub delta_v: f64,
    pub i_low_fraction: f64,
    pub v_high: Option<f64>,
    pub i_high: Option<f64>,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        ThresholdSettings {
            delta_v: defaults::DELTA_V,
            i_low_fraction: defaults::I_LOW_FRACTION,
            v_high: None,
            i_high: None,
        }
    }
}

impl ThresholdSettings {
    pub fn resolve(&self, cell: &CellHistory) -> Result<ThresholdConfig> {
        ThresholdConfig::new(
            self.v_high.unwrap_or(cell.cut_off_voltage_v),
            self.delta_v,
            self.i_high.unwrap_or(cell.charge_current_a),
            self.i_low_fraction,
        )
    }
}

enum BandError {
    NeverEntered,
    NeverExited,
    StartsPastExit,
}

struct Band {
    t: Vec<f64>,
    v: Vec<f64>,
    aux: Vec<f64>,
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + f * (b - a)
}

/// Slices a rising signal between `enter` and `exit` (`enter <= exit`).
fn rising_band(
    t: &[f64],
    v: &[f64],
    aux: &[f64],
    enter: f64,
    exit: f64,
) -> std::result::Result<Band, BandError> {
    let start = v.iter().position(|&x| x >= enter).ok_or(BandError::NeverEntered)?;
    let end = start + v[start..].iter().position(|&x| x >= exit).ok_or(BandError::NeverExited)?;

    let mut band = Band { t: Vec::new(), v: Vec::new(), aux: Vec::new() };
    let push = |band: &mut Band, tt: f64, vv: f64, aa: f64| {
        if band.t.last().is_none_or(|&last| tt > last) {
            band.t.push(tt);
            band.v.push(vv);
            band.aux.push(aa);
        }
    };
    if start == 0 {
        push(&mut band, t[0], v[0], aux[0]);
    } else {
        let f = (enter - v[start - 1]) / (v[start] - v[start - 1]);
        push(
            &mut band,
            lerp(t[start - 1], t[start], f),
            enter,
            lerp(aux[start - 1], aux[start], f),
        );
    }
    for k in start..end {
        push(&mut band, t[k], v[k], aux[k]);
    }
    if end == 0 {
        return Err(BandError::StartsPastExit);
    }
    let f = (exit - v[end - 1]) / (v[end] - v[end - 1]);
    push(&mut band, lerp(t[end - 1], t[end], f), exit, lerp(aux[end - 1], aux[end], f));
    Ok(band)
}

fn phase_series(cycle: &CycleRecord, phase: Phase) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = Vec::new();
    let mut v = Vec::new();
    let mut i = Vec::new();
    for k in 0..cycle.len() {
        if cycle.phase[k] == phase {
            t.push(cycle.time_s[k]);
            v.push(cycle.voltage_v[k]);
            i.push(cycle.current_a[k]);
        }
    }
    (t, v, i)
}

fn finish(kind: SegmentKind, band: Band, flip: bool) -> Result<CurveSegment> {
    if band.t.len() < 2 {
        return Err(Error::DegenerateSegment(format!("{kind} segment has fewer than 2 points")));
    }
    let t0 = band.t[0];
    let sign = if flip { -1.0 } else { 1.0 };
    Ok(CurveSegment {
        kind,
        t: band.t.iter().map(|t| t - t0).collect(),
        v: band.v.iter().map(|v| sign * v).collect(),
        aux: band.aux,
        normalized: false,
    })
}

/// Voltage-vs-time slice of the constant-current charge between `V_l` and `V_h`.
pub fn extract_cc_segment(cycle: &CycleRecord, cfg: &ThresholdConfig) -> Result<CurveSegment> {
    let kind = SegmentKind::CcVoltage;
    let (t, v, i) = phase_series(cycle, Phase::CcCharge);
    if t.len() < 2 {
        return Err(Error::SegmentUnavailable { segment: kind, missing: MissingThreshold::NoPhaseSamples });
    }
    match rising_band(&t, &v, &i, cfg.v_low(), cfg.v_high) {
        Ok(band) => finish(kind, band, false),
        Err(BandError::NeverEntered) => {
            Err(Error::SegmentUnavailable { segment: kind, missing: MissingThreshold::VoltageLow })
        }
        Err(BandError::NeverExited) => {
            Err(Error::SegmentUnavailable { segment: kind, missing: MissingThreshold::VoltageHigh })
        }
        Err(BandError::StartsPastExit) => Err(Error::DegenerateSegment("CC charge starts above V_h".into())),
    }
}

/// Current-vs-time slice of the constant-voltage charge between `I_h` and `I_l`.
pub fn extract_cv_segment(cycle: &CycleRecord, cfg: &ThresholdConfig) -> Result<CurveSegment> {
    let kind = SegmentKind::CvCurrent;
    let (t, v, i) = phase_series(cycle, Phase::CvCharge);
    if t.len() < 2 {
        return Err(Error::SegmentUnavailable { segment: kind, missing: MissingThreshold::NoPhaseSamples });
    }
    // Decaying current is handled as a rising negated signal.
    let neg: Vec<f64> = i.iter().map(|x| -x).collect();
    match rising_band(&t, &neg, &v, -cfg.i_high, -cfg.i_low()) {
        Ok(band) => finish(kind, band, true),
        Err(BandError::NeverEntered) => {
            Err(Error::SegmentUnavailable { segment: kind, missing: MissingThreshold::CurrentHigh })
        }
        Err(BandError::NeverExited) => {
            Err(Error::SegmentUnavailable { segment: kind, missing: MissingThreshold::CurrentLow })
        }
        Err(BandError::StartsPastExit) => Err(Error::DegenerateSegment("CV charge starts below I_l".into())),
    }
}

/// Min-max normalization of the segment values onto `[0, 1]`.
pub fn normalize_segment(seg: &CurveSegment) -> Result<CurveSegment> {
    let min = seg.v.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = seg.v.iter().map(|v| v - min).collect();
    let max = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::DegenerateSegment(format!("{} segment is constant", seg.kind)));
    }
    Ok(CurveSegment {
        kind: seg.kind,
        t: seg.t.clone(),
        v: shifted.iter().map(|v| v / max).collect(),
        aux: seg.aux.clone(),
        normalized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cycle(samples: &[(f64, f64, f64, Phase)]) -> CycleRecord {
        CycleRecord {
            cycle_index: 1,
            time_s: samples.iter().map(|s| s.0).collect(),
            voltage_v: samples.iter().map(|s| s.1).collect(),
            current_a: samples.iter().map(|s| s.2).collect(),
            phase: samples.iter().map(|s| s.3).collect(),
            discharge_capacity_ah: 1.0,
        }
    }

    fn ramp(n: usize, v0: f64, v1: f64, duration: f64) -> CycleRecord {
        let s: Vec<_> = (0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                (f * duration, v0 + f * (v1 - v0), 1.1, Phase::CcCharge)
            })
            .collect();
        cycle(&s)
    }

    fn cfg() -> ThresholdConfig {
        ThresholdConfig::new(4.2, 0.3, 1.1, 0.6).unwrap()
    }

    #[test]
    fn cc_ramp_segment_matches_interpolated_crossings() {
        // 3.0 -> 4.2 V over 3600 s sampled every 7 s (non-aligned with 3.9 V).
        let c = ramp(515, 3.0, 4.2, 3600.0);
        let seg = extract_cc_segment(&c, &cfg()).unwrap();
        // Linear ramp: 3.9 V is reached at 2700 s and 4.2 V at 3600 s.
        let oracle = 3600.0 * (4.2 - 3.9) / (4.2 - 3.0);
        assert!((seg.duration() - oracle).abs() < 1e-9, "{}", seg.duration());
        assert!((seg.v[0] - 3.9).abs() < 1e-12);
        assert!((seg.v.last().unwrap() - 4.2).abs() < 1e-12);
        assert!(seg.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn charge_starting_inside_band_is_clipped_to_first_sample() {
        let c = ramp(100, 3.95, 4.2, 1000.0);
        let seg = extract_cc_segment(&c, &cfg()).unwrap();
        assert_eq!(seg.v[0], 3.95);
        assert!((seg.duration() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn charge_ending_below_v_high_is_unavailable() {
        let c = ramp(100, 3.5, 4.1, 1000.0);
        match extract_cc_segment(&c, &cfg()) {
            Err(Error::SegmentUnavailable { missing, .. }) => assert_eq!(missing, MissingThreshold::VoltageHigh),
            other => panic!("{other:?}"),
        }
        let c = ramp(100, 3.0, 3.8, 1000.0);
        match extract_cc_segment(&c, &cfg()) {
            Err(Error::SegmentUnavailable { missing, .. }) => assert_eq!(missing, MissingThreshold::VoltageLow),
            other => panic!("{other:?}"),
        }
    }

    fn cv_decay(i0: f64, tau: f64, dt: f64, n: usize) -> CycleRecord {
        let s: Vec<_> = (0..n).map(|k| {
            let t = k as f64 * dt;
            (t, 4.2, i0 * (-t / tau).exp(), Phase::CvCharge)
        }).collect();
        cycle(&s)
    }

    #[test]
    fn cv_exponential_decay_crossing() {
        let tau = 400.0;
        let c = cv_decay(1.1, tau, 10.0, 200);
        let seg = extract_cv_segment(&c, &cfg()).unwrap();
        // Analytic crossing of 0.66 A: t = tau * ln(1.1 / 0.66).
        let analytic = tau * (1.1f64 / 0.66).ln();
        // Linear interpolation of a convex decay overshoots by at most
        // dt^2 * |I''| / (8 |I'|) = dt^2 / (8 tau).
        assert!((seg.duration() - analytic).abs() <= 10.0 * 10.0 / (8.0 * tau) + 1e-9);
        let first_below = c.time_s[c.current_a.iter().position(|&i| i <= 0.66).unwrap()];
        assert!(seg.duration() <= first_below);
        assert!((seg.v.last().unwrap() - 0.66).abs() < 1e-12);
        assert!((seg.v[0] - 1.1).abs() < 1e-12);
        assert!(seg.aux.iter().all(|&v| v == 4.2));
    }

    #[test]
    fn near_unity_low_fraction_is_short_or_error() {
        let c = cv_decay(1.1, 400.0, 10.0, 200);
        let cfg = ThresholdConfig::new(4.2, 0.3, 1.1, 0.999).unwrap();
        match extract_cv_segment(&c, &cfg) {
            Ok(seg) => assert!(seg.len() >= 2),
            Err(e) => assert!(matches!(e, Error::DegenerateSegment(_))),
        }
    }

    #[test]
    fn fast_charge_samples_are_ignored() {
        let mut s = vec![];
        for k in 0..50 {
            s.push((k as f64 * 10.0, 3.5 + 0.01 * k as f64, 4.4, Phase::FastCharge));
        }
        for k in 0..60 {
            s.push((500.0 + k as f64 * 10.0, 3.7 + 0.5 * k as f64 / 59.0, 1.1, Phase::CcCharge));
        }
        let seg = extract_cc_segment(&cycle(&s), &cfg()).unwrap();
        assert!(seg.aux.iter().all(|&i| (i - 1.1).abs() < 1e-12));
        assert!((seg.duration() - 590.0 * 0.3 / 0.5).abs() < 1e-9);
    }

    #[test]
    fn no_cv_phase_is_unavailable() {
        let c = ramp(100, 3.0, 4.2, 1000.0);
        match extract_cv_segment(&c, &cfg()) {
            Err(Error::SegmentUnavailable { missing, segment }) => {
                assert_eq!(missing, MissingThreshold::NoPhaseSamples);
                assert_eq!(segment, SegmentKind::CvCurrent);
            }
            other => panic!("{other:?}"),
        }
    }

    fn raw(v: Vec<f64>) -> CurveSegment {
        let n = v.len();
        CurveSegment {
            kind: SegmentKind::CcVoltage,
            t: (0..n).map(|k| k as f64).collect(),
            aux: vec![1.0; n],
            v,
            normalized: false,
        }
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_segment(&raw(vec![3.9, 4.05, 4.2])).unwrap();
        assert_eq!(n.v[0], 0.0);
        assert_eq!(n.v[2], 1.0);
        assert!((n.v[1] - 0.5).abs() < 1e-12);
        assert!(n.normalized);
        assert_eq!(normalize_segment(&n).unwrap().v, n.v);
        assert!(matches!(normalize_segment(&raw(vec![4.0; 5])), Err(Error::DegenerateSegment(_))));
    }

    proptest! {
        #[test]
        fn normalize_is_affine_invariant(
            v in proptest::collection::vec(-10.0f64..10.0, 3..40),
            a in 0.01f64..100.0,
            b in -50.0f64..50.0,
        ) {
            let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-3);
            let n1 = normalize_segment(&raw(v.clone())).unwrap();
            let n2 = normalize_segment(&raw(v.iter().map(|x| a * x + b).collect())).unwrap();
            for (x, y) in n1.v.iter().zip(&n2.v) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert_eq!(normalize_segment(&n1).unwrap().v, n1.v.clone());
        }

        #[test]
        fn extraction_ignores_samples_outside_band(
            pre in 1usize..20, post in 1usize..20, n in 10usize..80, dt in 1.0f64..20.0,
        ) {
            // Base series starts below V_l and ends above V_h.
            let base: Vec<(f64, f64)> = (0..n)
                .map(|k| (k as f64 * dt, 3.8 + 0.5 * k as f64 / (n - 1) as f64))
                .collect();
            let mk = |pre: usize, post: usize| {
                let mut s = vec![];
                for k in 0..pre {
                    s.push((-((pre - k) as f64) * dt, 3.5 + 0.01 * k as f64, 1.1, Phase::CcCharge));
                }
                for &(t, v) in &base {
                    s.push((t, v, 1.1, Phase::CcCharge));
                }
                let t_end = base.last().unwrap().0;
                for k in 1..=post {
                    s.push((t_end + k as f64 * dt, 4.3 + 0.01 * k as f64, 1.1, Phase::CcCharge));
                }
                cycle(&s)
            };
            let a = extract_cc_segment(&mk(1, 1), &cfg()).unwrap();
            let b = extract_cc_segment(&mk(pre, post), &cfg()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
