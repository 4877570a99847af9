//! Weight file format: magic "WVML1", a version byte, then per-tensor
//! records (u32-LE name length, UTF-8 name, u32-LE rank, u32-LE dims,
//! f32-LE payload). Round trips are bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use waferlite_core::graph::ModelGraph;
use waferlite_core::tensor::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"WVML1";
pub const VERSION: u8 = 1;

/// Serializes every parameter (including non-trainable running
/// statistics) in graph order.
pub fn save_weights(model: &ModelGraph<f32>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    for p in model.params() {
        let name = p.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        let shape = p.value.shape();
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    file.write_all(&buf).map_err(|e| Error::file(path, e))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Payload(format!(
                "needed {n} bytes for {what} at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Reads all tensor records of a weight file.
pub fn read_store(path: &Path) -> Result<BTreeMap<String, Tensor<f32>>> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    if bytes.len() < MAGIC.len() + 1 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = bytes[MAGIC.len()];
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let mut r = Reader { bytes: &bytes, pos: MAGIC.len() + 1 };
    let mut out = BTreeMap::new();
    while !r.done() {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Payload("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dim")? as usize);
        }
        let numel: usize = shape.iter().product();
        let payload = r.take(4 * numel, &format!("payload of '{name}'"))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| Error::Payload(e.to_string()))?;
        out.insert(name, tensor);
    }
    Ok(out)
}

/// Populates a model from a weight file. The model is only written once
/// every tensor has been located and shape-checked, so a failed load
/// leaves it untouched.
pub fn load_weights(model: &mut ModelGraph<f32>, path: &Path) -> Result<()> {
    let store = read_store(path)?;
    let mut staged: Vec<Tensor<f32>> = Vec::with_capacity(model.params().len());
    for p in model.params() {
        let tensor = store
            .get(&p.name)
            .ok_or_else(|| Error::MissingTensor(p.name.clone()))?;
        if tensor.shape() != p.value.shape() {
            return Err(Error::ShapeMismatch {
                name: p.name.clone(),
                expected: p.value.shape().to_vec(),
                found: tensor.shape().to_vec(),
            });
        }
        staged.push(tensor.clone());
    }
    for (p, t) in model.params_mut().iter_mut().zip(staged) {
        p.value = t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use waferlite_core::graph::ArchId;

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let model = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 7).unwrap();
        save_weights(&model, &path).unwrap();
        let mut other = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 8).unwrap();
        assert!(model.params()[0].value != other.params()[0].value);
        load_weights(&mut other, &path).unwrap();
        for (a, b) in model.params().iter().zip(other.params()) {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }

    #[test]
    fn truncated_file_leaves_model_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let model = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 7).unwrap();
        save_weights(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let mut victim = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 9).unwrap();
        let before: Vec<_> = victim.params().iter().map(|p| p.value.clone()).collect();
        let err = load_weights(&mut victim, &path).unwrap_err();
        assert!(matches!(err, Error::Payload(_)), "{err}");
        for (p, b) in victim.params().iter().zip(&before) {
            assert_eq!(&p.value, b);
        }
    }

    #[test]
    fn wrong_magic_and_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        std::fs::write(&path, b"NOPE!\x01").unwrap();
        assert!(matches!(read_store(&path), Err(Error::BadMagic)));
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.push(9);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_store(&path), Err(Error::BadVersion(9))));
    }

    #[test]
    fn missing_tensor_and_shape_mismatch_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let small = ModelGraph::<f32>::build(ArchId::BaseNet, 3, 32, 7).unwrap();
        save_weights(&small, &path).unwrap();
        // different head size: same names, one mismatched shape
        let mut other = ModelGraph::<f32>::build(ArchId::BaseNet, 5, 32, 7).unwrap();
        assert!(matches!(
            load_weights(&mut other, &path),
            Err(Error::ShapeMismatch { .. })
        ));
        // different architecture: names missing
        let mut other_arch = ModelGraph::<f32>::build(ArchId::IncNet, 3, 32, 7).unwrap();
        assert!(matches!(load_weights(&mut other_arch, &path), Err(Error::MissingTensor(_))));
    }

    #[test]
    fn file_size_matches_format_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let model = ModelGraph::<f32>::build(ArchId::BaseNet8, 8, 64, 7).unwrap();
        save_weights(&model, &path).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        let payload = 4 * model.count_params();
        // header + name records stay within 5% of the raw payload
        assert!(len > payload);
        assert!((len as f64) < 1.05 * payload as f64, "{len} vs {payload}");
    }
}
