use proptest::prelude::*;

use soh_core::data::{load_cell_dir, write_cell, DatasetManifest, Phase, Role};
use soh_core::synthetic::{
    default_manifest, generate_cell, write_dataset, ChargeProtocol, DatasetSpec, FadeModel, NoiseLevels,
    SyntheticCellSpec,
};

fn phase_duration(cycle: &soh_core::data::CycleRecord, phase: Phase) -> f64 {
    let t: Vec<f64> = cycle.phase.iter().zip(&cycle.time_s).filter(|(p, _)| **p == phase).map(|(_, t)| *t).collect();
    t.last().unwrap() - t.first().unwrap()
}

#[test]
fn written_cells_load_back_unchanged() {
    let spec = DatasetSpec { cells: 2, cycles: 12, seed: 3, ..DatasetSpec::default() };
    let cells = spec.generate().unwrap();
    let dir = tempfile::tempdir().unwrap();
    for c in &cells {
        write_cell(c, dir.path()).unwrap();
        assert_eq!(&load_cell_dir(dir.path(), &c.cell_id).unwrap(), c);
    }
}

#[test]
fn dataset_layout_and_manifest() {
    let spec = DatasetSpec { cells: 5, cycles: 6, seed: 1, ..DatasetSpec::default() };
    let cells = spec.generate().unwrap();
    let manifest = default_manifest(&cells, 3, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&cells, &manifest, dir.path()).unwrap();
    let back = DatasetManifest::load(&dir.path().join("manifest.csv")).unwrap();
    assert_eq!(back, manifest);
    assert_eq!(back.cells_with(Role::Train).len(), 3);
    assert_eq!(back.cells_with(Role::Calibration).len(), 1);
    assert_eq!(back.cells_with(Role::Test).len(), 1);
    assert_eq!(back.feature_selection_cells().len(), 2);
}

#[test]
fn same_seed_same_dataset_and_seeds_differ() {
    let spec = DatasetSpec { cells: 3, cycles: 8, seed: 5, ..DatasetSpec::default() };
    assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
    let other = DatasetSpec { seed: 6, ..spec.clone() }.generate().unwrap();
    assert_ne!(spec.generate().unwrap(), other);
}

#[test]
fn cc_only_cells_have_no_cv_samples() {
    let mut spec = SyntheticCellSpec::new("cc", 2, 5, FadeModel::with_knee(-0.001, 0.004, 0.03));
    spec.protocol = ChargeProtocol::Cc;
    let cell = generate_cell(&spec).unwrap();
    assert!(cell.cycles.iter().all(|c| !c.has_phase(Phase::CvCharge) && c.has_phase(Phase::CcCharge)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ageing_shortens_cc_and_lengthens_cv(
        seed in 0u64..1000,
        b in -0.0015f64..-0.0008,
        knee in 0.002f64..0.006,
        fast in any::<bool>(),
    ) {
        let mut spec = SyntheticCellSpec::new("p", seed, 100, FadeModel::with_knee(b, knee, 0.035));
        spec.noise = NoiseLevels::NONE;
        if fast {
            spec.protocol = ChargeProtocol::FastChargeCcCv;
        }
        let cell = generate_cell(&spec).unwrap();
        let (first, last) = (&cell.cycles[0], &cell.cycles[99]);
        prop_assert!(phase_duration(last, Phase::CcCharge) < phase_duration(first, Phase::CcCharge));
        prop_assert!(phase_duration(last, Phase::CvCharge) > phase_duration(first, Phase::CvCharge));
        let c1 = first.discharge_capacity_ah;
        for (k, c) in cell.cycles.iter().enumerate() {
            prop_assert!((c.discharge_capacity_ah / c1 - spec.fade.soh(k as u32 + 1) / spec.fade.soh(1)).abs() <= 1e-12);
        }
    }
}
