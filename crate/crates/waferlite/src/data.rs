//! Dataset directory IO: `images/*.pgm` plus `manifest.csv`
//! ("filename,label", LF endings).

use std::fs;
use std::path::Path;

use waferlite_core::dataset::{Dataset, Sample, WaferClass};
use waferlite_core::synth::{generate_wafer, sample_seed};

use crate::error::{Error, Result};
use crate::pgm;

/// Writes one PGM per sample plus the manifest; returns the in-memory
/// dataset it described.
pub fn generate_dataset(counts: &[usize; 8], seed: u64, size: usize, out_dir: &Path) -> Result<Dataset> {
    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| Error::file(&images_dir, e))?;

    let mut manifest = String::from("filename,label\n");
    let mut ds = Dataset::empty_full();
    for (label, class) in WaferClass::ALL.iter().enumerate() {
        for i in 0..counts[label] {
            let (image, _) = generate_wafer(*class, sample_seed(seed, *class, i as u64), size);
            let file_name = format!("{}_{i:05}.pgm", class.name());
            pgm::write_pgm(&image, &images_dir.join(&file_name))?;
            manifest.push_str(&format!("{file_name},{}\n", class.name()));
            ds.samples.push(Sample { id: file_name, image, label });
        }
    }
    let manifest_path = out_dir.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| Error::file(&manifest_path, e))?;
    Ok(ds)
}

/// Loads a dataset directory; samples keep the manifest order.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.csv");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::file(&manifest_path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "filename,label" => {}
        other => {
            return Err(Error::ParseAt {
                path: manifest_path,
                line: 1,
                msg: format!(
                    "manifest must start with 'filename,label', got {:?}",
                    other.map(|(_, l)| l).unwrap_or("<empty>")
                ),
            });
        }
    }
    let mut ds = Dataset::empty_full();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (file_name, label_name) = line.split_once(',').ok_or_else(|| Error::ParseAt {
            path: manifest_path.clone(),
            line: idx + 1,
            msg: format!("expected 'filename,label', got '{line}'"),
        })?;
        let class = WaferClass::parse(label_name).map_err(|e| Error::ParseAt {
            path: manifest_path.clone(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let image = pgm::read_pgm(&dir.join("images").join(file_name.trim()))?;
        ds.samples.push(Sample {
            id: file_name.trim().to_string(),
            image,
            label: class.code(),
        });
    }
    Ok(ds)
}
