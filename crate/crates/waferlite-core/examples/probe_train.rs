use std::time::Instant;
use waferlite_core::dataset::{class_subset, stratified_split};
use waferlite_core::graph::{ArchId, ModelGraph};
use waferlite_core::synth::{generate_samples, scaled_counts};
use waferlite_core::train::{evaluate, train_model, DataConfig, TrainConfig};

fn main() {
    let t0 = Instant::now();
    let counts = scaled_counts(0.2);
    let ds = generate_samples(&counts, 42, 64);
    println!("generated {} samples in {:?}", ds.len(), t0.elapsed());
    let ds3 = class_subset(&ds, 3).unwrap();
    let (train, val, test) = stratified_split(ds3, (0.6, 0.2, 0.2), 42).unwrap();
    println!("split: {}/{}/{}", train.len(), val.len(), test.len());

    let mut model = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 64, 42).unwrap();
    let cfg = TrainConfig { epochs: 30, seed: 42, ..TrainConfig::default() };
    let data_cfg = DataConfig::grayscale(64, None);
    let t1 = Instant::now();
    let hist = train_model(&mut model, &train, &val, &cfg, None, &data_cfg).unwrap();
    println!("trained {} epochs in {:?}, best epoch {}", hist.epochs.len(), t1.elapsed(), hist.best_epoch);
    for e in &hist.epochs {
        println!("  epoch {:2}: train {:.4} val {:.4} f1 {:.4} lr {}", e.epoch, e.train_loss, e.val_loss, e.val_f1, e.lr);
    }
    let (test_loss, test_f1, test_acc) = evaluate(&model, &test, &data_cfg, 64).unwrap();
    println!("TEST: loss {test_loss:.4} f1 {test_f1:.4} acc {test_acc:.4}  total {:?}", t0.elapsed());
}
