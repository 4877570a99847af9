//! Parameter counts, serialized size, and single-image inference latency.

use std::path::Path;
use std::time::Instant;

use waferlite_core::graph::{InputSpec, ModelGraph};
use waferlite_core::rng::Rng;
use waferlite_core::tensor::Tensor;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub median_ms: f64,
    pub p90_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub param_count: u64,
    pub size_mb: f64,
    pub latency: LatencyStats,
}

/// Times `reps` batch-1 eval forward passes on the current thread and
/// discards the first `warmup` as cache/branch warmup. Reports median
/// and p90 milliseconds over the remaining samples.
pub fn measure_latency(
    model: &ModelGraph<f32>,
    warmup: usize,
    reps: usize,
) -> Result<LatencyStats> {
    if reps < 10 {
        return Err(Error::Config(format!("need at least 10 reps, got {reps}")));
    }
    if warmup >= reps {
        return Err(Error::Config(format!("warmup {warmup} must stay below reps {reps}")));
    }
    let input = match model.input {
        InputSpec::Image { channels, res } => {
            let mut t = Tensor::zeros(vec![1, channels, res, res]);
            let mut rng = Rng::new(0xBE7C);
            for v in t.data_mut() {
                *v = rng.range_f32(0.0, 1.0);
            }
            t
        }
        InputSpec::Vector { dim } => {
            let mut t = Tensor::zeros(vec![1, dim]);
            let mut rng = Rng::new(0xBE7C);
            for v in t.data_mut() {
                *v = rng.range_f32(0.0, 1.0);
            }
            t
        }
    };
    let mut times_ms = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        let out = model.forward_eval(&input)?;
        let dt = t0.elapsed();
        // consume the output so the pass cannot be optimized away
        std::hint::black_box(out.data()[0]);
        times_ms.push(dt.as_secs_f64() * 1e3);
    }
    let mut kept: Vec<f64> = times_ms[warmup..].to_vec();
    kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = percentile(&kept, 0.5);
    let p90 = percentile(&kept, 0.9);
    Ok(LatencyStats { median_ms: median, p90_ms: p90, samples: kept.len() })
}

/// Nearest-rank percentile over a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// File length in decimal megabytes (10^6 bytes).
pub fn model_size_mb(weights_path: &Path) -> Result<f64> {
    let meta = std::fs::metadata(weights_path).map_err(|e| Error::file(weights_path, e))?;
    Ok(meta.len() as f64 / 1e6)
}
