//! Result rows and the CSV/markdown report emitters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One experiment outcome. Metric fields are `None` for bench-only rows
/// (rendered as "n/a").
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub experiment_id: usize,
    pub arch: String,
    pub classes: usize,
    pub seed: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub params: u64,
    pub size_mb: f64,
    pub latency_ms: f64,
    /// Failure note for suite rows that errored; empty on success.
    pub error: String,
}

pub const CSV_HEADER: &str =
    "experiment_id,arch,classes,seed,precision,recall,f1,accuracy,params,size_mb,latency_ms,error";

fn opt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "n/a".to_string(),
    }
}

/// Round-half-even at `digits` decimal places.
pub fn round_half_even(x: f64, digits: u32) -> f64 {
    let scale = 10f64.powi(digits as i32);
    let y = x * scale;
    let floor = y.floor();
    let frac = y - floor;
    let rounded = if (frac - 0.5).abs() < 1e-9 {
        // tie: round to the even neighbour
        if (floor as i64) % 2 == 0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        y.round()
    };
    rounded / scale
}

fn metric_3dp(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{:.3}", round_half_even(x, 3)),
        None => "n/a".to_string(),
    }
}

/// Writes `results.csv` and `results.md`; returns both paths.
pub fn emit_report(rows: &[ResultsRow], out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if rows.is_empty() {
        return Err(Error::Config("cannot emit a report with no rows".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment_id,
            r.arch,
            r.classes,
            r.seed,
            opt_cell(r.precision),
            opt_cell(r.recall),
            opt_cell(r.f1),
            opt_cell(r.accuracy),
            r.params,
            r.size_mb,
            r.latency_ms,
            r.error
        )
        .expect("String write");
    }
    let csv_path = out_dir.join("results.csv");
    fs::write(&csv_path, &csv).map_err(|e| Error::file(&csv_path, e))?;

    let mut md = String::new();
    md.push_str("# Results\n\n");
    md.push_str("| ID | Arch | Classes | Seed | Precision | Recall | F1 | Accuracy | #Params | Size (MB) | Latency (ms) |\n");
    md.push_str("|---:|:-----|--------:|-----:|----------:|-------:|---:|---------:|--------:|----------:|-------------:|\n");
    for r in rows {
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {:.2} | {:.3} |{}",
            r.experiment_id,
            r.arch,
            r.classes,
            r.seed,
            metric_3dp(r.precision),
            metric_3dp(r.recall),
            metric_3dp(r.f1),
            metric_3dp(r.accuracy),
            r.params,
            r.size_mb,
            r.latency_ms,
            if r.error.is_empty() { String::new() } else { format!(" <!-- error: {} -->", r.error) }
        )
        .expect("String write");
    }
    md.push_str("\nMetrics are weighted averages over classes, rounded half-even to 3 decimals.\n");
    md.push_str("MB means 10^6 bytes; latency is the median single-image forward pass.\n");
    let md_path = out_dir.join("results.md");
    fs::write(&md_path, &md).map_err(|e| Error::file(&md_path, e))?;
    Ok((csv_path, md_path))
}

/// Per-epoch progress log: "epoch,train_loss,val_loss,val_f1,lr".
pub fn write_history_csv(history: &waferlite_core::train::TrainHistory, path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss,val_f1,lr\n");
    for e in &history.epochs {
        writeln!(out, "{},{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_f1, e.lr)
            .expect("String write");
    }
    fs::write(path, out).map_err(|e| Error::file(path, e))
}

/// Parses a results.csv produced by [`emit_report`].
pub fn parse_report(path: &Path) -> Result<Vec<ResultsRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        other => {
            return Err(Error::ParseAt {
                path: path.into(),
                line: 1,
                msg: format!("unexpected header {:?}", other.map(|(_, l)| l)),
            });
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(12, ',').collect();
        if parts.len() != 12 {
            return Err(Error::ParseAt {
                path: path.into(),
                line: idx + 1,
                msg: format!("expected 12 fields, got {}", parts.len()),
            });
        }
        let bad = |msg: String| Error::ParseAt { path: path.into(), line: idx + 1, msg };
        let opt = |s: &str| -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
            if s == "n/a" {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some)
            }
        };
        rows.push(ResultsRow {
            experiment_id: parts[0].parse().map_err(|e| bad(format!("id: {e}")))?,
            arch: parts[1].to_string(),
            classes: parts[2].parse().map_err(|e| bad(format!("classes: {e}")))?,
            seed: parts[3].parse().map_err(|e| bad(format!("seed: {e}")))?,
            precision: opt(parts[4]).map_err(|e| bad(format!("precision: {e}")))?,
            recall: opt(parts[5]).map_err(|e| bad(format!("recall: {e}")))?,
            f1: opt(parts[6]).map_err(|e| bad(format!("f1: {e}")))?,
            accuracy: opt(parts[7]).map_err(|e| bad(format!("accuracy: {e}")))?,
            params: parts[8].parse().map_err(|e| bad(format!("params: {e}")))?,
            size_mb: parts[9].parse().map_err(|e| bad(format!("size_mb: {e}")))?,
            latency_ms: parts[10].parse().map_err(|e| bad(format!("latency: {e}")))?,
            error: parts[11].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultsRow {
        ResultsRow {
            experiment_id: 0,
            arch: "basenet".into(),
            classes: 3,
            seed: 42,
            precision: Some(0.953123456789),
            recall: Some(0.951),
            f1: Some(0.9525),
            accuracy: Some(0.955),
            params: 525_475,
            size_mb: 2.1021,
            latency_ms: 0.44,
            error: String::new(),
        }
    }

    #[test]
    fn csv_has_one_line_per_row_plus_header() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, _) = emit_report(&[row()], dir.path()).unwrap();
        let text = fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = vec![row()];
        rows.push(ResultsRow {
            experiment_id: 10,
            precision: None,
            recall: None,
            f1: None,
            accuracy: None,
            error: "bench-only".into(),
            ..row()
        });
        let (csv, _) = emit_report(&rows, dir.path()).unwrap();
        let back = parse_report(&csv).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].precision.unwrap() - rows[0].precision.unwrap()).abs() < 1e-9);
        assert!((back[0].size_mb - rows[0].size_mb).abs() < 1e-9);
        assert_eq!(back[1].precision, None);
        assert_eq!(back[1].error, "bench-only");
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.0625, 3), 0.062);
        assert_eq!(round_half_even(0.0635, 3), 0.064);
        assert_eq!(round_half_even(0.9535, 3), 0.954);
        assert_eq!(round_half_even(0.0005, 3), 0.0);
        assert_eq!(round_half_even(0.9534999, 3), 0.953);
    }

    #[test]
    fn markdown_formats_three_decimals() {
        let dir = tempfile::tempdir().unwrap();
        let (_, md) = emit_report(&[row()], dir.path()).unwrap();
        let text = fs::read_to_string(md).unwrap();
        assert!(text.contains("| 0.953 |"), "{text}");
        assert!(text.contains("n/a") == false);
    }
}
