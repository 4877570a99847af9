//! End-to-end training-pipeline checks at desk scale: determinism,
//! best-weight restoration, autoencoder optimization, and latent
//! oversampling.

use waferlite_core::dataset::{class_subset, stratified_split, WaferClass};
use waferlite_core::graph::{ArchId, ModelGraph};
use waferlite_core::smote::{oversample_deepsmote, train_autoencoder};
use waferlite_core::synth::{generate_samples, generate_wafer, sample_seed};
use waferlite_core::train::{evaluate, train_model, DataConfig, TrainConfig};

fn tiny_dataset(seed: u64) -> waferlite_core::dataset::Dataset {
    generate_samples(&[20, 12, 10, 0, 0, 0, 0, 0], seed, 32)
}

#[test]
fn training_is_bit_deterministic() {
    let run = || {
        let ds = class_subset(&tiny_dataset(5), 3).unwrap();
        let (train, val, _) = stratified_split(ds, (0.6, 0.2, 0.2), 5).unwrap();
        let mut model = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 5).unwrap();
        let cfg = TrainConfig { epochs: 3, batch_size: 8, seed: 5, ..TrainConfig::default() };
        let data_cfg = DataConfig::grayscale(32, None);
        let hist = train_model(&mut model, &train, &val, &cfg, None, &data_cfg).unwrap();
        (model, hist)
    };
    let (m1, h1) = run();
    let (m2, h2) = run();
    for (a, b) in m1.params().iter().zip(m2.params()) {
        assert_eq!(a.value.data(), b.value.data(), "parameter {} diverged", a.name);
    }
    assert_eq!(h1.epochs.len(), h2.epochs.len());
    for (e1, e2) in h1.epochs.iter().zip(&h2.epochs) {
        assert_eq!(e1.train_loss, e2.train_loss);
        assert_eq!(e1.val_loss, e2.val_loss);
    }
}

#[test]
fn restored_weights_reproduce_best_val_loss() {
    let ds = class_subset(&tiny_dataset(7), 3).unwrap();
    let (train, val, _) = stratified_split(ds, (0.6, 0.2, 0.2), 7).unwrap();
    let mut model = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 7).unwrap();
    let cfg = TrainConfig { epochs: 6, batch_size: 8, seed: 7, ..TrainConfig::default() };
    let data_cfg = DataConfig::grayscale(32, None);
    let hist = train_model(&mut model, &train, &val, &cfg, None, &data_cfg).unwrap();
    let best = &hist.epochs[hist.best_epoch];
    let (val_loss, _, _) = evaluate(&model, &val, &data_cfg, 8).unwrap();
    assert!(
        (val_loss - best.val_loss).abs() < 1e-7,
        "restored {val_loss} vs best {}",
        best.val_loss
    );
    // best epoch has minimal recorded val loss
    let min = hist.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_loss, min);
}

#[test]
fn early_stopping_bounds_epoch_count() {
    let ds = class_subset(&tiny_dataset(11), 3).unwrap();
    let (train, val, _) = stratified_split(ds, (0.6, 0.2, 0.2), 11).unwrap();
    let mut model = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 11).unwrap();
    let cfg = TrainConfig { epochs: 60, batch_size: 8, patience: 3, seed: 11, ..TrainConfig::default() };
    let data_cfg = DataConfig::grayscale(32, None);
    let hist = train_model(&mut model, &train, &val, &cfg, None, &data_cfg).unwrap();
    assert!(
        hist.epochs.len() <= hist.best_epoch + cfg.patience + 1,
        "{} epochs for best {} patience {}",
        hist.epochs.len(),
        hist.best_epoch,
        cfg.patience
    );
}

#[test]
fn autoencoder_halves_reconstruction_error() {
    // the spec's desk-scale example: 100 circle images, 64x64, 50 epochs
    let images: Vec<_> = (0..100)
        .map(|i| generate_wafer(WaferClass::Circle, sample_seed(3, WaferClass::Circle, i), 64).0)
        .collect();
    let (pair, losses) = train_autoencoder(&images, 64, 64, 50, 1e-3, 3).unwrap();
    assert!(pair.trained);
    let initial = losses[0];
    let last = *losses.last().unwrap();
    assert!(
        last < 0.5 * initial,
        "reconstruction loss {initial} -> {last} did not halve"
    );
}

#[test]
fn autoencoder_zero_epochs_keeps_initial_weights() {
    let images: Vec<_> = (0..10)
        .map(|i| generate_wafer(WaferClass::Circle, sample_seed(4, WaferClass::Circle, i), 64).0)
        .collect();
    let (pair, losses) = train_autoencoder(&images, 64, 16, 0, 1e-3, 4).unwrap();
    assert_eq!(losses.len(), 1);
    assert!(!pair.trained);
    let fresh = waferlite_core::smote::build_autoencoder(16, 64, 4).unwrap();
    for (a, b) in pair.encoder.params().iter().zip(fresh.encoder.params()) {
        assert_eq!(a.value.data(), b.value.data());
    }
}

#[test]
fn autoencoder_training_is_deterministic() {
    let images: Vec<_> = (0..12)
        .map(|i| generate_wafer(WaferClass::Splinter, sample_seed(9, WaferClass::Splinter, i), 64).0)
        .collect();
    let (_, l1) = train_autoencoder(&images, 64, 16, 3, 1e-3, 9).unwrap();
    let (_, l2) = train_autoencoder(&images, 64, 16, 3, 1e-3, 9).unwrap();
    assert_eq!(l1, l2);
}

#[test]
fn deepsmote_oversampling_reaches_target_exactly() {
    let mut counts = [0usize; 8];
    counts[WaferClass::Good.code()] = 8;
    counts[WaferClass::Splinter.code()] = 10;
    let ds = generate_samples(&counts, 21, 64);
    let images: Vec<_> = ds.samples.iter().map(|s| s.image.clone()).collect();
    let (pair, _) = train_autoencoder(&images, 64, 16, 2, 1e-3, 21).unwrap();
    let out = oversample_deepsmote(ds.clone(), WaferClass::Splinter, 25, &pair, 5, 21).unwrap();
    assert_eq!(out.class_counts()[WaferClass::Splinter.code()], 25);
    assert_eq!(out.class_counts()[WaferClass::Good.code()], 8);
    // target at current count: unchanged
    let same = oversample_deepsmote(ds, WaferClass::Splinter, 10, &pair, 5, 21).unwrap();
    assert_eq!(same.class_counts()[WaferClass::Splinter.code()], 10);
}
