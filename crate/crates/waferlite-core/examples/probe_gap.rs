use std::time::Instant;
use waferlite_core::augment::{compute_norm_stats, AugmentPipeline};
use waferlite_core::dataset::{class_subset, stratified_split};
use waferlite_core::graph::{ArchId, ModelGraph};
use waferlite_core::synth::{generate_samples, scaled_counts};
use waferlite_core::train::{evaluate, train_model, DataConfig, TrainConfig};

fn run(arch: ArchId, sa: bool, seed: u64, epochs: usize) -> (f64, usize) {
    let counts = scaled_counts(0.2);
    let ds = generate_samples(&counts, seed, 64);
    let ds8 = class_subset(&ds, 8).unwrap();
    let (train, val, test) = stratified_split(ds8, (0.6, 0.2, 0.2), seed).unwrap();
    let mut model = ModelGraph::<f32>::build(arch, 8, 64, seed).unwrap();
    let mut cfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
    if arch == ArchId::BaseNet8Plus { cfg = cfg.with_multistep(); }
    let norm = if sa { Some(compute_norm_stats(&train).unwrap()) } else { None };
    let data_cfg = DataConfig::grayscale(64, norm);
    let pipeline = AugmentPipeline::default();
    let aug = if sa { Some(&pipeline) } else { None };
    let hist = train_model(&mut model, &train, &val, &cfg, aug, &data_cfg).unwrap();
    let (_, test_f1, _) = evaluate(&model, &test, &data_cfg, 64).unwrap();
    (test_f1, hist.epochs.len())
}

fn main() {
    let t = Instant::now();
    let (f9, e9) = run(ArchId::BaseNet8Plus, true, 42, 25);
    eprintln!("seed 42: exp9 f1 {f9:.4} ({e9} epochs) in {:?}", t.elapsed());
}
