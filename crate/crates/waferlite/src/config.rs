//! Run configuration: "key = value" files with '#' comments, overridden
//! by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use waferlite_core::train::TrainConfig;

use crate::error::{Error, Result};

/// Fully resolved configuration for one experiment run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Experiment id 0..=12.
    pub id: usize,
    /// Task size: 3, 5 or 8 classes.
    pub classes: usize,
    pub seed: u64,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Training/eval resolution (images are resized to this).
    pub res: usize,
    pub train: TrainConfig,
    /// Oversampling target; 0 means "use the circle-class count".
    pub oversample_target: usize,
    /// Autoencoder training epochs for the latent-oversampling recipe.
    pub ae_epochs: usize,
    pub latency_warmup: usize,
    pub latency_reps: usize,
    /// Permit actually training a randomly initialized VGG16.
    pub allow_untrained_vgg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            id: 0,
            classes: 3,
            seed: 42,
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            res: 256,
            train: TrainConfig::default(),
            oversample_target: 0,
            ae_epochs: 30,
            latency_warmup: 10,
            latency_reps: 100,
            allow_untrained_vgg: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.id > 12 {
            return Err(Error::Config(format!("experiment id must be 0..=12, got {}", self.id)));
        }
        if ![3, 5, 8].contains(&self.classes) {
            return Err(Error::Config(format!("classes must be 3, 5 or 8, got {}", self.classes)));
        }
        self.train.validate()?;
        if self.latency_reps < 10 {
            return Err(Error::Config("latency_reps must be at least 10".into()));
        }
        Ok(())
    }
}

/// Ordered key/value entries with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub entries: Vec<(String, String, usize)>,
}

pub fn parse_config_file(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ParseAt {
                path: path.into(),
                line: idx + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            });
        };
        entries.push((key.trim().to_string(), value.trim().to_string(), idx + 1));
    }
    Ok(ConfigFile { entries })
}

/// Applies file entries onto a config; unknown keys and malformed values
/// are errors carrying the line number.
pub fn apply_config_file(cfg: &mut RunConfig, file: &ConfigFile, path: &Path) -> Result<()> {
    for (key, value, line) in &file.entries {
        let bad = |msg: String| Error::ParseAt { path: path.into(), line: *line, msg };
        let parse_usize = |what: &str| -> Result<usize> {
            let v: i64 = value.parse().map_err(|e| bad(format!("{what}: {e}")))?;
            if v < 0 {
                return Err(bad(format!("{what} must be non-negative, got {v}")));
            }
            Ok(v as usize)
        };
        match key.as_str() {
            "id" => cfg.id = parse_usize("id")?,
            "classes" => cfg.classes = parse_usize("classes")?,
            "seed" => cfg.seed = value.parse().map_err(|e| bad(format!("seed: {e}")))?,
            "data_dir" => cfg.data_dir = PathBuf::from(value),
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "res" => cfg.res = parse_usize("res")?,
            "epochs" => {
                let v = parse_usize("epochs")?;
                if v == 0 {
                    return Err(bad("epochs must be >= 1".into()));
                }
                cfg.train.epochs = v;
            }
            "batch_size" => {
                let v = parse_usize("batch_size")?;
                if v == 0 {
                    return Err(bad("batch_size must be >= 1".into()));
                }
                cfg.train.batch_size = v;
            }
            "lr" => {
                cfg.train.base_lr = value.parse().map_err(|e| bad(format!("lr: {e}")))?;
                if !(cfg.train.base_lr > 0.0) {
                    return Err(bad("lr must be positive".into()));
                }
            }
            "weight_decay" => {
                cfg.train.weight_decay = value.parse().map_err(|e| bad(format!("weight_decay: {e}")))?
            }
            "patience" => {
                let v = parse_usize("patience")?;
                if v == 0 {
                    return Err(bad("patience must be >= 1".into()));
                }
                cfg.train.patience = v;
            }
            "gamma" => {
                cfg.train.gamma = value.parse().map_err(|e| bad(format!("gamma: {e}")))?;
                if !(cfg.train.gamma > 0.0 && cfg.train.gamma < 1.0) {
                    return Err(bad(format!("gamma must be in (0,1), got {}", cfg.train.gamma)));
                }
            }
            "milestones" => {
                let mut ms = Vec::new();
                for tok in value.split(',').filter(|t| !t.trim().is_empty()) {
                    ms.push(tok.trim().parse().map_err(|e| bad(format!("milestones: {e}")))?);
                }
                cfg.train.milestones = ms;
            }
            "oversample_target" => cfg.oversample_target = parse_usize("oversample_target")?,
            "ae_epochs" => cfg.ae_epochs = parse_usize("ae_epochs")?,
            "latency_warmup" => cfg.latency_warmup = parse_usize("latency_warmup")?,
            "latency_reps" => cfg.latency_reps = parse_usize("latency_reps")?,
            "allow_untrained_vgg" => {
                cfg.allow_untrained_vgg = value.parse().map_err(|e| bad(format!("allow_untrained_vgg: {e}")))?
            }
            other => return Err(bad(format!("unknown key '{other}'"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_cfg(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn empty_file_keeps_study_defaults() {
        let (_d, path) = write_cfg("");
        let file = parse_config_file(&path).unwrap();
        let mut cfg = RunConfig::default();
        apply_config_file(&mut cfg, &file, &path).unwrap();
        assert_eq!(cfg.train.epochs, 200);
        assert_eq!(cfg.train.batch_size, 64);
        assert!((cfg.train.weight_decay - 1e-4).abs() < 1e-12);
        assert_eq!(cfg.train.patience, 10);
        assert!((cfg.train.base_lr - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn negative_epochs_rejected_with_line() {
        let (_d, path) = write_cfg("# comment\nepochs = -1\n");
        let file = parse_config_file(&path).unwrap();
        let mut cfg = RunConfig::default();
        let err = apply_config_file(&mut cfg, &file, &path).unwrap_err();
        match err {
            Error::ParseAt { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let (_d, path) = write_cfg("banana = 7\n");
        let file = parse_config_file(&path).unwrap();
        let mut cfg = RunConfig::default();
        let err = apply_config_file(&mut cfg, &file, &path).unwrap_err();
        assert!(err.to_string().contains("banana"), "{err}");
    }

    #[test]
    fn comments_and_values_parse() {
        let (_d, path) = write_cfg("epochs = 5  # short run\nmilestones = 2, 4\nlr = 0.0001\n");
        let file = parse_config_file(&path).unwrap();
        let mut cfg = RunConfig::default();
        apply_config_file(&mut cfg, &file, &path).unwrap();
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.milestones, vec![2, 4]);
        assert!((cfg.train.base_lr - 1e-4).abs() < 1e-9);
    }
}
