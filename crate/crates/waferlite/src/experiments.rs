//! Experiment dispatcher: maps ids 0..=12 onto concrete pipeline runs
//! and assembles the report rows.

use std::fs;
use std::path::PathBuf;

use waferlite_core::augment::{compute_norm_stats, invert_dataset, oversample_by_composition, AugmentPipeline};
use waferlite_core::dataset::{class_subset, stratified_split, Dataset, WaferClass};
use waferlite_core::graph::{ArchId, ModelGraph};
use waferlite_core::smote::{oversample_deepsmote, train_autoencoder};
use waferlite_core::train::{evaluate, train_model, DataConfig};

use crate::bench::{measure_latency, model_size_mb, BenchResult};
use crate::config::RunConfig;
use crate::data::load_dataset;
use crate::error::{Error, Result};
use crate::report::{emit_report, ResultsRow};
use crate::store::save_weights;

/// Oversampling flavour of a recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oversample {
    None,
    /// Image composition from minted defect masks.
    Composition,
    /// Latent-space interpolation through the autoencoder.
    DeepSmote,
}

/// What an experiment id runs.
#[derive(Debug, Clone)]
pub struct Recipe {
    pub id: usize,
    pub arch: ArchId,
    /// Standard augmentation (flips/rotations/blur + normalization).
    pub augment: bool,
    /// Color inversion applied to every split before training.
    pub invert: bool,
    pub oversample: Oversample,
    /// Multi-step learning-rate preset.
    pub multistep: bool,
    /// VGG16 rows degrade to shape-only benchmarking unless explicitly
    /// allowed to train from random initialization.
    pub vgg_transfer: bool,
    pub label: &'static str,
}

/// Total mapping over ids 0..=12.
pub fn experiment_recipe(id: usize) -> Result<Recipe> {
    let r = |arch, augment, invert, oversample, multistep, vgg_transfer, label| Recipe {
        id,
        arch,
        augment,
        invert,
        oversample,
        multistep,
        vgg_transfer,
        label,
    };
    Ok(match id {
        0 => r(ArchId::BaseNet, false, false, Oversample::None, false, false, "baseline"),
        1 => r(ArchId::BaseNet8, false, false, Oversample::None, false, false, "capacity"),
        2 => r(ArchId::BaseNet8Plus, false, false, Oversample::None, true, false, "optimized learning"),
        3 => r(ArchId::IncNet, false, false, Oversample::None, false, false, "inception-like"),
        4 => r(ArchId::ResiNet, false, false, Oversample::None, false, false, "residual-like"),
        5 => r(ArchId::BaseNet, true, false, Oversample::None, false, false, "standard augmentation"),
        6 => r(ArchId::BaseNet, false, false, Oversample::DeepSmote, false, false, "deep smote"),
        7 => r(ArchId::BaseNet, false, false, Oversample::Composition, false, false, "generated images"),
        8 => r(ArchId::BaseNet, false, true, Oversample::None, false, false, "color invert"),
        9 => r(ArchId::BaseNet8Plus, true, false, Oversample::None, true, false, "combined"),
        10 => r(ArchId::Vgg16, false, false, Oversample::None, false, true, "feature extraction"),
        11 => r(ArchId::Vgg16, false, false, Oversample::None, false, true, "fine tuning"),
        12 => r(ArchId::Vgg16, true, false, Oversample::None, false, true, "fine tuning + augmentation"),
        other => {
            return Err(Error::Config(format!("unknown experiment id {other} (valid: 0..=12)")));
        }
    })
}

/// The two minority classes targeted by the oversampling recipes.
pub const OVERSAMPLE_CLASSES: [WaferClass; 2] = [WaferClass::Circle, WaferClass::Splinter];

fn oversample_target(train: &Dataset, cfg: &RunConfig) -> usize {
    if cfg.oversample_target > 0 {
        return cfg.oversample_target;
    }
    train
        .label_of(WaferClass::Circle.name())
        .map(|l| train.class_counts()[l])
        .unwrap_or(0)
}

fn weights_path(cfg: &RunConfig, arch: ArchId) -> PathBuf {
    cfg.out_dir
        .join("weights")
        .join(format!("exp{}_{}_{}c_seed{}.wvml", cfg.id, arch.name(), cfg.classes, cfg.seed))
}

/// Serialized size and latency for a built model; weights for bench-only
/// rows go to a scratch file that is removed afterwards.
fn bench_model(model: &ModelGraph<f32>, cfg: &RunConfig, persist: bool, arch: ArchId) -> Result<BenchResult> {
    let path = if persist {
        let p = weights_path(cfg, arch);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
        }
        p
    } else {
        cfg.out_dir.join(format!(".bench_{}_{}.tmp", arch.name(), cfg.seed))
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
    }
    save_weights(model, &path)?;
    let size_mb = model_size_mb(&path)?;
    if !persist {
        let _ = fs::remove_file(&path);
    }
    let latency = measure_latency(model, cfg.latency_warmup, cfg.latency_reps)?;
    Ok(BenchResult { param_count: model.count_params(), size_mb, latency })
}

/// Full pipeline for one experiment id: subset, split, recipe transforms
/// on the training split only, train, evaluate on test, bench.
pub fn run_experiment(cfg: &RunConfig) -> Result<ResultsRow> {
    cfg.validate()?;
    let recipe = experiment_recipe(cfg.id)?;

    // VGG16 without pretrained weights: bench-only unless overridden
    if recipe.vgg_transfer && !cfg.allow_untrained_vgg {
        let model = ModelGraph::<f32>::build(ArchId::Vgg16, 1000, 224, cfg.seed)
            .map_err(|e| stage("build", e.into()))?;
        let bench = bench_model(&model, cfg, false, recipe.arch).map_err(|e| stage("bench", e))?;
        return Ok(ResultsRow {
            experiment_id: cfg.id,
            arch: recipe.arch.name().to_string(),
            classes: cfg.classes,
            seed: cfg.seed,
            precision: None,
            recall: None,
            f1: None,
            accuracy: None,
            params: bench.param_count,
            size_mb: bench.size_mb,
            latency_ms: bench.latency.median_ms,
            error: String::new(),
        });
    }

    let ds = load_dataset(&cfg.data_dir).map_err(|e| stage("load", e))?;
    let task = class_subset(&ds, cfg.classes).map_err(|e| stage("subset", e.into()))?;
    let (mut train, mut val, mut test) =
        stratified_split(task, (0.6, 0.2, 0.2), cfg.seed).map_err(|e| stage("split", e.into()))?;
    let val_ids = val.id_set();
    let test_ids = test.id_set();

    if recipe.invert {
        // a representation change, applied consistently to every split
        invert_dataset(&mut train);
        invert_dataset(&mut val);
        invert_dataset(&mut test);
    }

    match recipe.oversample {
        Oversample::None => {}
        Oversample::Composition => {
            let target = oversample_target(&train, cfg);
            train = oversample_by_composition(train, &OVERSAMPLE_CLASSES, target, cfg.seed)
                .map_err(|e| stage("oversample", e.into()))?;
        }
        Oversample::DeepSmote => {
            let target = oversample_target(&train, cfg);
            let images: Vec<_> = train.samples.iter().map(|s| s.image.clone()).collect();
            let (pair, _) = train_autoencoder(&images, 64, 64, cfg.ae_epochs, 1e-3, cfg.seed)
                .map_err(|e| stage("autoencoder", e.into()))?;
            for class in OVERSAMPLE_CLASSES {
                if train.label_of(class.name()).is_none() {
                    continue;
                }
                train = oversample_deepsmote(train, class, target, &pair, 5, cfg.seed)
                    .map_err(|e| stage("oversample", e.into()))?;
            }
        }
    }

    let norm = if recipe.augment {
        Some(compute_norm_stats(&train).map_err(|e| stage("norm-stats", e.into()))?)
    } else {
        None
    };
    let pipeline = AugmentPipeline::default();
    let augment = recipe.augment.then_some(&pipeline);

    let (res, num_classes) = if recipe.vgg_transfer {
        (224, cfg.classes)
    } else {
        (cfg.res, cfg.classes)
    };
    let mut model = ModelGraph::<f32>::build(recipe.arch, num_classes, res, cfg.seed)
        .map_err(|e| stage("build", e.into()))?;

    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    if recipe.multistep && train_cfg.milestones.is_empty() {
        train_cfg = train_cfg.with_multistep();
    }
    let data_cfg = DataConfig {
        target_res: cfg.res,
        norm,
        pretrained: recipe.vgg_transfer,
    };

    let history = train_model(&mut model, &train, &val, &train_cfg, augment, &data_cfg)
        .map_err(|e| stage("train", e.into()))?;
    let log_dir = cfg.out_dir.join("logs");
    fs::create_dir_all(&log_dir).map_err(|e| Error::file(&log_dir, e))?;
    crate::report::write_history_csv(
        &history,
        &log_dir.join(format!("exp{}_{}_{}c_seed{}.csv", cfg.id, recipe.arch.name(), cfg.classes, cfg.seed)),
    )
    .map_err(|e| stage("log", e))?;

    // recipes must never touch validation/test membership
    if val.id_set() != val_ids || test.id_set() != test_ids {
        return Err(Error::Config("internal: recipe altered val/test membership".into()));
    }

    let (_, f1, accuracy) =
        evaluate(&model, &test, &data_cfg, train_cfg.batch_size).map_err(|e| stage("evaluate", e.into()))?;
    // precision/recall of the test split via the full report
    let (precision, recall) = {
        let mut preds = Vec::with_capacity(test.len());
        let mut labels = Vec::with_capacity(test.len());
        for chunk in (0..test.len()).collect::<Vec<_>>().chunks(train_cfg.batch_size) {
            let mut tensors = Vec::with_capacity(chunk.len());
            for &i in chunk {
                tensors.push(waferlite_core::image::preprocess(
                    &test.samples[i].image,
                    data_cfg.target_res,
                    data_cfg.pretrained,
                    data_cfg.norm.as_ref(),
                )?);
                labels.push(test.samples[i].label);
            }
            let x = waferlite_core::image::stack_batch(&tensors)?;
            let (_, classes) = model.predict(&x)?;
            preds.extend(classes);
        }
        let cm = waferlite_core::metrics::ConfusionMatrix::from_predictions(&preds, &labels, cfg.classes)?;
        let report = waferlite_core::metrics::weighted_metrics(&cm)?;
        (report.precision, report.recall)
    };

    let bench = bench_model(&model, cfg, true, recipe.arch).map_err(|e| stage("bench", e))?;
    Ok(ResultsRow {
        experiment_id: cfg.id,
        arch: recipe.arch.name().to_string(),
        classes: cfg.classes,
        seed: cfg.seed,
        precision: Some(precision),
        recall: Some(recall),
        f1: Some(f1),
        accuracy: Some(accuracy),
        params: bench.param_count,
        size_mb: bench.size_mb,
        latency_ms: bench.latency.median_ms,
        error: String::new(),
    })
}

fn stage(name: &str, e: Error) -> Error {
    Error::Config(format!("[{name}] {e}"))
}

/// Cross product of ids x tasks x seeds; failed runs become rows with an
/// error note and the suite continues. Returns the rows and whether all
/// runs succeeded.
pub fn run_suite(
    ids: &[usize],
    tasks: &[usize],
    seeds: &[u64],
    base: &RunConfig,
) -> Result<(Vec<ResultsRow>, bool)> {
    if ids.is_empty() || tasks.is_empty() {
        return Err(Error::Config("suite needs at least one id and one task".into()));
    }
    let seeds: Vec<u64> = if seeds.is_empty() { vec![42] } else { seeds.to_vec() };
    // reject unknown ids before any work happens
    for &id in ids {
        experiment_recipe(id)?;
    }
    let mut rows = Vec::new();
    let mut all_ok = true;
    for &id in ids {
        for &classes in tasks {
            for &seed in &seeds {
                let mut cfg = base.clone();
                cfg.id = id;
                cfg.classes = classes;
                cfg.seed = seed;
                match run_experiment(&cfg) {
                    Ok(row) => rows.push(row),
                    Err(e) => {
                        all_ok = false;
                        rows.push(ResultsRow {
                            experiment_id: id,
                            arch: experiment_recipe(id)
                                .map(|r| r.arch.name().to_string())
                                .unwrap_or_default(),
                            classes,
                            seed,
                            precision: None,
                            recall: None,
                            f1: None,
                            accuracy: None,
                            params: 0,
                            size_mb: 0.0,
                            latency_ms: 0.0,
                            error: e.to_string().replace(',', ";"),
                        });
                    }
                }
            }
        }
    }
    emit_report(&rows, &base.out_dir)?;
    Ok((rows, all_ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_is_total_over_known_ids() {
        for id in 0..=12 {
            let r = experiment_recipe(id).unwrap();
            assert_eq!(r.id, id);
        }
        assert!(experiment_recipe(13).is_err());
    }

    #[test]
    fn recipe_structure_matches_table() {
        assert_eq!(experiment_recipe(0).unwrap().arch, ArchId::BaseNet);
        assert_eq!(experiment_recipe(1).unwrap().arch, ArchId::BaseNet8);
        let two = experiment_recipe(2).unwrap();
        assert_eq!(two.arch, ArchId::BaseNet8Plus);
        assert!(two.multistep);
        assert_eq!(experiment_recipe(3).unwrap().arch, ArchId::IncNet);
        assert_eq!(experiment_recipe(4).unwrap().arch, ArchId::ResiNet);
        assert!(experiment_recipe(5).unwrap().augment);
        assert_eq!(experiment_recipe(6).unwrap().oversample, Oversample::DeepSmote);
        assert_eq!(experiment_recipe(7).unwrap().oversample, Oversample::Composition);
        assert!(experiment_recipe(8).unwrap().invert);
        let nine = experiment_recipe(9).unwrap();
        assert!(nine.augment && nine.multistep);
        assert_eq!(nine.arch, ArchId::BaseNet8Plus);
        for id in 10..=12 {
            assert!(experiment_recipe(id).unwrap().vgg_transfer);
        }
    }
}
