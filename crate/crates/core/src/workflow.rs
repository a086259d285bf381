//! Offline training, evaluation and online prediction flows used by the CLI.
//!
//! Cell files are loaded per role, so training never opens test cells and
//! evaluation never opens calibration cells.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{load_cell_dir, ransac_filter, CellHistory, DatasetManifest, RansacConfig, Role};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{assemble_features, featurize_cell, Feature, FeatureOptions, FeatureVector, SohReference};
use crate::pipeline::{fgsm_augment, random_search, rf_rfe_cv, FeatureMatrix, SelectionResult, Standardizer};
use crate::regressors::{
    Hyperparameters, Model, ModelBundle, ModelKind, ModelParams, PredictiveDistribution, RfHyper, TrainingSet,
    FORMAT_VERSION,
};
use crate::segments::SegmentKind;
use crate::synthetic::{default_manifest, write_dataset, DatasetSpec};
use crate::uncertainty::{reliability, MetricsReport, RecalibrationMap, ReliabilityCurve};

/// Wall-clock time per named stage; errors are tagged with the stage name.
#[derive(Debug, Default, Clone)]
pub struct StageTimer {
    pub stages: Vec<(&'static str, f64)>,
}

impl StageTimer {
    pub fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        let secs = start.elapsed().as_secs_f64();
        log::info!("stage {stage}: {secs:.3} s");
        self.stages.push((stage, secs));
        out
    }

    pub fn report(&self) -> String {
        self.stages.iter().map(|(s, t)| format!("{s}\t{t:.3}s\n")).collect()
    }
}

/// Loads only the cells whose role is in `roles`.
pub fn load_cells(dir: &Path, manifest: &DatasetManifest, roles: &[Role], exec: Execution) -> Result<Vec<CellHistory>> {
    let ids: Vec<String> = manifest
        .assignments
        .iter()
        .filter(|(_, a)| roles.contains(&a.role))
        .map(|(id, _)| id.clone())
        .collect();
    exec.try_map(&ids, |id| load_cell_dir(dir, id))
}

/// Every `<id>.csv` in `dir` that has a matching `<id>.meta`.
pub fn discover_cells(dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") && path.with_extension("meta").is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::InvalidData(format!("no cell files (<id>.csv + <id>.meta) in {}", dir.display())));
    }
    Ok(ids)
}

/// RANSAC inlier mask over the cell's capacity fade.
pub fn capacity_inliers(cell: &CellHistory, seed: u64) -> (Vec<bool>, Vec<String>) {
    let outcome = ransac_filter(&cell.capacity_series(), &RansacConfig { seed, ..RansacConfig::default() });
    let mut log = Vec::new();
    if outcome.insufficient_points {
        log.push(format!("{}: too few cycles for outlier filtering, keeping all", cell.cell_id));
    }
    for (c, keep) in cell.cycles.iter().zip(&outcome.inliers) {
        if !keep {
            log.push(format!("{} cycle {}: capacity outlier removed", cell.cell_id, c.cycle_index));
        }
    }
    (outcome.inliers, log)
}

/// Featurizes cells, returning the vectors in cell order and the extraction
/// log. With `ransac` the capacity outliers are masked out and the SOH
/// reference is the first inlier capacity; otherwise every cycle is kept and
/// the reference is the raw first cycle.
pub fn featurize_cells(
    cells: &[&CellHistory],
    opts: &FeatureOptions,
    ransac: bool,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<FeatureVector>, Vec<String>)> {
    let per_cell = exec.try_map(cells, |cell| -> Result<(Vec<FeatureVector>, Vec<String>)> {
        let (mask, mut log) = if ransac { capacity_inliers(cell, seed) } else { (vec![true; cell.cycles.len()], vec![]) };
        let reference = match cell.cycles.iter().zip(&mask).find(|(_, k)| **k) {
            Some((c, _)) if ransac => SohReference::Capacity(c.discharge_capacity_ah),
            _ => SohReference::FirstCycle,
        };
        let out = featurize_cell(cell, opts, reference, Some(&mask), Execution::Sequential)?;
        log.extend(out.log);
        if out.vectors.is_empty() {
            return Err(Error::InvalidData(format!("cell {}: no cycle could be featurized", cell.cell_id)));
        }
        Ok((out.vectors, log))
    })?;
    let mut vectors = Vec::new();
    let mut log = Vec::new();
    for (v, l) in per_cell {
        vectors.extend(v);
        log.extend(l);
    }
    Ok((vectors, log))
}

/// Role-separated inputs to [`train`].
pub struct TrainingCells<'a> {
    pub train: Vec<&'a CellHistory>,
    pub feature_selection: Vec<String>,
    pub calibration: Vec<&'a CellHistory>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub bundle: ModelBundle,
    pub model: Model,
    pub timer: StageTimer,
    pub log: Vec<String>,
}

fn hyperparameters_for(cfg: &RunConfig, aug: &FeatureMatrix, exec: Execution) -> Result<Hyperparameters> {
    Ok(match cfg.model {
        ModelKind::Brr | ModelKind::Gpr => {
            random_search(cfg.model, aug, cfg.search_trials, cfg.stream_seed("search"), exec)?.best
        }
        ModelKind::Rf => Hyperparameters::Rf(RfHyper { trees: cfg.model_trees }),
        ModelKind::Dnne => Hyperparameters::Dnne(cfg.dnne()),
    })
}

/// Selection → augmentation → standardization → search → fit → recalibration.
pub fn train(cfg: &RunConfig, cells: &TrainingCells<'_>) -> Result<TrainOutput> {
    let exec = cfg.execution;
    let opts = cfg.feature_options();
    let mut timer = StageTimer::default();
    if cells.train.is_empty() {
        return Err(Error::Manifest("no training cells".into()));
    }
    if cells.calibration.is_empty() {
        return Err(Error::Manifest("no calibration cells; recalibration is impossible".into()));
    }
    let ransac_seed = cfg.stream_seed("ransac");
    let (full, mut log) = timer.run("featurize", || {
        let (vectors, log) = featurize_cells(&cells.train, &opts, cfg.ransac, ransac_seed, exec)?;
        let fm = FeatureMatrix::from_vectors(&vectors, None)?;
        if fm.ncols() == 0 {
            return Err(Error::InvalidData("training cells share no features".into()));
        }
        Ok((fm, log))
    })?;
    let candidate_features = full.columns.clone();

    let selection: Option<SelectionResult> = if cfg.feature_selection {
        Some(timer.run("selection", || {
            let fs = full.rows_in_groups(&cells.feature_selection);
            rf_rfe_cv(&fs, cfg.selection_trees, cfg.stream_seed("selection"), exec)
        })?)
    } else {
        None
    };
    let selected = selection.as_ref().map_or_else(|| candidate_features.clone(), |s| s.selected.clone());
    log::info!("selected {} of {} features: {}", selected.len(), candidate_features.len(), selected.join(","));

    let aug = timer.run("augment", || fgsm_augment(&full.select_columns(&selected)?, cfg.gamma))?;
    let (standardization, inputs) = timer.run("standardize", || {
        if cfg.model.uses_standardized_inputs() {
            let s = Standardizer::fit(&aug.x);
            let mut m = aug.clone();
            m.x = s.apply(&aug.x)?;
            Ok((Some(s), m))
        } else {
            Ok((None, aug.clone()))
        }
    })?;
    inputs.validate()?;
    let hyper = timer.run("search", || hyperparameters_for(cfg, &inputs, exec))?;
    let model = timer.run("fit", || {
        let data = TrainingSet { x: &inputs.x, y: &inputs.y, groups: &inputs.groups };
        Model::fit(&hyper, data, cfg.stream_seed("model"), exec)
    })?;

    let mut bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        kind: cfg.model,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        hyperparameters: hyper,
        feature_options: opts,
        candidate_features,
        selected_features: selected,
        selection,
        standardization,
        recalibration: RecalibrationMap::identity(),
        params: ModelParams::from_model(&model),
    };
    bundle.recalibration = timer.run("calibrate", || {
        let (vectors, cal_log) = featurize_cells(&cells.calibration, &opts, false, ransac_seed, exec)?;
        log.extend(cal_log);
        let cal = FeatureMatrix::from_vectors(&vectors, Some(&bundle.selected_features))?;
        let preds = bundle.predict_raw(&model, &cal, exec)?;
        RecalibrationMap::fit_predictions(&preds, &cal.y)
    })?;
    log::info!("recalibration sigma scale {:.4}", bundle.recalibration.sigma_scale());
    Ok(TrainOutput { bundle, model, timer, log })
}

fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = cfg.manifest_path()?;
    if !path.is_file() {
        return Err(Error::Config(format!("manifest {} does not exist", path.display())));
    }
    DatasetManifest::load(&path)
}

fn write_log(path: &Path, log: &[String]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for line in log {
        writeln!(f, "{line}")?;
    }
    Ok(())
}

pub fn bundle_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("model.json")
}

/// Loads train and calibration cells, trains, and writes `model.json` and
/// `train.log` into the output directory.
pub fn train_from_config(cfg: &RunConfig) -> Result<TrainOutput> {
    let dir = cfg.data_dir()?;
    let manifest = load_manifest(cfg)?;
    let train_cells = load_cells(dir, &manifest, &[Role::Train], cfg.execution).map_err(|e| e.in_stage("load"))?;
    let cal_cells = load_cells(dir, &manifest, &[Role::Calibration], cfg.execution).map_err(|e| e.in_stage("load"))?;
    let cells = TrainingCells {
        train: train_cells.iter().collect(),
        feature_selection: manifest.feature_selection_cells(),
        calibration: cal_cells.iter().collect(),
    };
    let mut out = train(cfg, &cells)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let bundle = &out.bundle;
    out.timer.run("write", || bundle.save(&bundle_path(cfg)))?;
    write_log(&cfg.out_dir.join("train.log"), &out.log)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub cell_id: String,
    pub cycle_index: u32,
    pub y_true: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lo90: f64,
    pub hi90: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub per_cell: BTreeMap<String, MetricsReport>,
    pub average: MetricsReport,
    pub predictions: Vec<PredictionRow>,
    /// Reliability of the recalibrated test predictions.
    pub reliability: ReliabilityCurve,
}

/// Per-cell and averaged metrics of recalibrated predictions.
pub fn evaluate(
    bundle: &ModelBundle,
    model: &Model,
    test: &[&CellHistory],
    cfg: &RunConfig,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Manifest("no test cells".into()));
    }
    let exec = cfg.execution;
    let (vectors, _) = featurize_cells(test, &bundle.feature_options, false, cfg.stream_seed("ransac"), exec)?;
    let fm = FeatureMatrix::from_vectors(&vectors, Some(&bundle.selected_features))?;
    let preds = bundle.predict(model, &fm, exec)?;
    let mut per_cell = BTreeMap::new();
    for g in fm.group_names() {
        let rows: Vec<usize> = (0..fm.nrows()).filter(|&r| fm.groups[r] == g).collect();
        let p: Vec<PredictiveDistribution> = rows.iter().map(|&r| preds[r]).collect();
        let y: Vec<f64> = rows.iter().map(|&r| fm.y[r]).collect();
        per_cell.insert(g, MetricsReport::compute_with_alpha(&p, &y, cfg.alpha)?);
    }
    let reports: Vec<MetricsReport> = per_cell.values().cloned().collect();
    let average = MetricsReport::average(&reports).expect("at least one test cell");
    let predictions = (0..fm.nrows())
        .map(|r| {
            let (lo90, hi90) = preds[r].interval90();
            PredictionRow {
                cell_id: fm.groups[r].clone(),
                cycle_index: fm.cycles[r],
                y_true: fm.y[r],
                mu: preds[r].mean,
                sigma: preds[r].std(),
                lo90,
                hi90,
            }
        })
        .collect();
    let reliability = reliability(&preds, &fm.y, cfg.reliability_levels)?;
    Ok(Evaluation { per_cell, average, predictions, reliability })
}

pub fn write_evaluation(eval: &Evaluation, bundle: &ModelBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("predictions.csv"))?;
    for row in &eval.predictions {
        w.serialize(row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    let mut header = vec!["cell_id"];
    header.extend(MetricsReport::COLUMNS);
    w.write_record(&header)?;
    let rows = eval.per_cell.iter().map(|(k, v)| (k.as_str(), v)).chain([("__average__", &eval.average)]);
    for (id, r) in rows {
        let mut rec = vec![id.to_string()];
        rec.extend(r.values()[..7].iter().map(|v| v.to_string()));
        rec.push(r.n.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("reliability.csv"))?;
    w.write_record(["level", "frequency"])?;
    for (p, f) in eval.reliability.levels.iter().zip(&eval.reliability.frequencies) {
        w.write_record([p.to_string(), f.to_string()])?;
    }
    w.flush()?;

    #[derive(Serialize)]
    struct Doc<'a> {
        model: ModelKind,
        config_hash: &'a str,
        per_cell: &'a BTreeMap<String, MetricsReport>,
        average: &'a MetricsReport,
    }
    let doc = Doc { model: bundle.kind, config_hash: &bundle.config_hash, per_cell: &eval.per_cell, average: &eval.average };
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Evaluates a saved bundle on the test cells only.
pub fn evaluate_from_config(cfg: &RunConfig, bundle_file: &Path) -> Result<Evaluation> {
    let bundle = ModelBundle::load(bundle_file).map_err(|e| e.in_stage("load"))?;
    let model = bundle.model()?;
    let dir = cfg.data_dir()?;
    let manifest = load_manifest(cfg)?;
    let test = load_cells(dir, &manifest, &[Role::Test], cfg.execution).map_err(|e| e.in_stage("load"))?;
    let refs: Vec<&CellHistory> = test.iter().collect();
    let eval = evaluate(&bundle, &model, &refs, cfg).map_err(|e| e.in_stage("evaluate"))?;
    write_evaluation(&eval, &bundle, &cfg.out_dir)?;
    Ok(eval)
}

/// Estimate for one cycle of a cell history (the last one by default).
pub fn predict_cycle(
    bundle: &ModelBundle,
    model: &Model,
    cell: &CellHistory,
    cycle: Option<u32>,
) -> Result<(u32, PredictiveDistribution)> {
    let cycle = match cycle {
        Some(c) => c,
        None => cell.cycles.last().map(|c| c.cycle_index).ok_or_else(|| Error::InvalidData("empty cell".into()))?,
    };
    let fv = assemble_features(cell, cycle, &bundle.feature_options)?;
    for name in &bundle.selected_features {
        let f = Feature::from_name(name).ok_or_else(|| Error::InvalidData(format!("bundle names unknown feature `{name}`")))?;
        if fv.get(f).is_none() {
            return Err(if f.needs_cv() {
                Error::SegmentUnavailable { segment: SegmentKind::CvCurrent, missing: crate::error::MissingThreshold::NoPhaseSamples }
            } else {
                Error::InvalidData(format!("cycle {cycle} lacks feature `{name}`"))
            });
        }
    }
    let fm = FeatureMatrix::from_vectors(std::slice::from_ref(&fv), Some(&bundle.selected_features))?;
    let pred = bundle.predict(model, &fm, Execution::Sequential)?[0];
    Ok((cycle, pred))
}

/// Writes `features/<id>.csv` per cell and `extraction.log`. Outlier
/// filtering applies to the cells a manifest (when present) marks as
/// training cells.
pub fn featurize_from_config(cfg: &RunConfig) -> Result<BTreeMap<String, usize>> {
    let dir = cfg.data_dir()?;
    let ids = discover_cells(dir)?;
    let training = match cfg.manifest_path() {
        Ok(p) if p.is_file() => DatasetManifest::load(&p)?.cells_with(Role::Train),
        _ => Vec::new(),
    };
    let cells = cfg.execution.try_map(&ids, |id| load_cell_dir(dir, id))?;
    let out_dir = cfg.out_dir.join("features");
    fs::create_dir_all(&out_dir)?;
    let mut log = Vec::new();
    let mut widths = BTreeMap::new();
    for cell in &cells {
        let ransac = cfg.ransac && training.contains(&cell.cell_id);
        let (vectors, l) =
            featurize_cells(&[cell], &cfg.feature_options(), ransac, cfg.stream_seed("ransac"), cfg.execution)?;
        log.extend(l);
        let fm = FeatureMatrix::from_vectors(&vectors, None)?;
        fm.write_csv(&out_dir.join(format!("{}.csv", cell.cell_id)))?;
        widths.insert(cell.cell_id.clone(), fm.ncols());
    }
    write_log(&cfg.out_dir.join("extraction.log"), &log)?;
    Ok(widths)
}

/// Runs feature selection on the feature-selection cells and writes
/// `selection.json`.
pub fn select_from_config(cfg: &RunConfig) -> Result<SelectionResult> {
    let dir = cfg.data_dir()?;
    let manifest = load_manifest(cfg)?;
    let ids = manifest.feature_selection_cells();
    let cells = cfg.execution.try_map(&ids, |id| load_cell_dir(dir, id))?;
    let refs: Vec<&CellHistory> = cells.iter().collect();
    let (vectors, _) =
        featurize_cells(&refs, &cfg.feature_options(), cfg.ransac, cfg.stream_seed("ransac"), cfg.execution)?;
    let fm = FeatureMatrix::from_vectors(&vectors, None)?;
    let result = rf_rfe_cv(&fm, cfg.selection_trees, cfg.stream_seed("selection"), cfg.execution)
        .map_err(|e| e.in_stage("selection"))?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("selection.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    Ok(result)
}

/// Generates a synthetic dataset with a manifest into the output directory.
pub fn synth_from_config(cfg: &RunConfig) -> Result<Vec<CellHistory>> {
    if cfg.synth_train + cfg.synth_calibration >= cfg.synth_cells {
        return Err(Error::Config("synth_train + synth_calibration must leave at least one test cell".into()));
    }
    let spec = DatasetSpec {
        cells: cfg.synth_cells,
        cycles: cfg.synth_cycles,
        seed: cfg.seed,
        noise: cfg.synth_noise,
        protocol: cfg.synth_protocol,
        ..DatasetSpec::default()
    };
    let cells = spec.generate()?;
    let manifest = default_manifest(&cells, cfg.synth_train, cfg.synth_calibration)?;
    write_dataset(&cells, &manifest, &cfg.out_dir)?;
    Ok(cells)
}
