//! Metrics CSV output and summary statistics.
//!
//! One row per (seed, round). Floats are rendered with the shortest
//! representation that parses back to the same value, so a CSV written and
//! re-read reproduces every number exactly and identical runs produce
//! byte-identical files.

use hyperfed_core::federation::RoundMetrics;
use std::path::Path;
use thiserror::Error;

pub const CSV_HEADER: [&str; 5] = ["seed", "round", "train_loss", "val_acc", "test_acc"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

/// One emitted metrics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub seed: u64,
    pub round: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

impl MetricsRecord {
    pub fn from_round(seed: u64, m: &RoundMetrics) -> Self {
        MetricsRecord {
            seed,
            round: m.round,
            train_loss: m.train_loss,
            val_acc: m.val_accuracy,
            test_acc: m.test_accuracy,
        }
    }
}

/// Render records as CSV bytes; the header row is present even when empty.
pub fn to_csv_bytes(records: &[MetricsRecord]) -> Vec<u8> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(CSV_HEADER).expect("vec write cannot fail");
    for r in records {
        wtr.write_record([
            r.seed.to_string(),
            r.round.to_string(),
            r.train_loss.to_string(),
            r.val_acc.to_string(),
            r.test_acc.to_string(),
        ])
        .expect("vec write cannot fail");
    }
    wtr.into_inner().expect("vec flush cannot fail")
}

pub fn write_csv(path: &Path, records: &[MetricsRecord]) -> Result<(), MetricsError> {
    std::fs::write(path, to_csv_bytes(records))?;
    Ok(())
}

/// Parse CSV bytes produced by [`to_csv_bytes`].
pub fn parse_csv_bytes(bytes: &[u8]) -> Result<Vec<MetricsRecord>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    {
        let headers = rdr.headers()?;
        if headers != &csv::StringRecord::from(CSV_HEADER.to_vec()) {
            return Err(MetricsError::Malformed {
                row: 1,
                message: format!("unexpected header {headers:?}"),
            });
        }
    }
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 2;
        let record = record?;
        if record.len() != CSV_HEADER.len() {
            return Err(MetricsError::Malformed {
                row,
                message: format!("{} fields, expected {}", record.len(), CSV_HEADER.len()),
            });
        }
        let field = |i: usize| -> &str { record.get(i).unwrap() };
        let bad = |i: usize| MetricsError::Malformed {
            row,
            message: format!("cannot parse `{}` in column {}", field(i), CSV_HEADER[i]),
        };
        out.push(MetricsRecord {
            seed: field(0).parse().map_err(|_| bad(0))?,
            round: field(1).parse().map_err(|_| bad(1))?,
            train_loss: field(2).parse().map_err(|_| bad(2))?,
            val_acc: field(3).parse().map_err(|_| bad(3))?,
            test_acc: field(4).parse().map_err(|_| bad(4))?,
        });
    }
    Ok(out)
}

/// Mean and sample standard deviation (n-1 denominator; 0 for a single value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Final-round test accuracy of each seed, in first-appearance seed order.
pub fn final_test_accuracies(records: &[MetricsRecord]) -> Vec<f64> {
    let mut order: Vec<u64> = Vec::new();
    let mut last: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    for r in records {
        if !last.contains_key(&r.seed) {
            order.push(r.seed);
        }
        last.insert(r.seed, r.test_acc);
    }
    order.iter().map(|s| last[s]).collect()
}

/// Aggregate result of one experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub dataset: String,
    pub mode: String,
    pub num_seeds: usize,
    pub final_test_mean: f64,
    pub final_test_std: f64,
}

impl Summary {
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([
            "dataset",
            "mode",
            "seeds",
            "final_test_mean",
            "final_test_std",
        ])
        .expect("vec write cannot fail");
        wtr.write_record([
            self.dataset.clone(),
            self.mode.clone(),
            self.num_seeds.to_string(),
            self.final_test_mean.to_string(),
            self.final_test_std.to_string(),
        ])
        .expect("vec write cannot fail");
        wtr.into_inner().expect("vec flush cannot fail")
    }

    pub fn write(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_csv_bytes())?;
        Ok(())
    }
}
