//! Run-directory aggregation: a readable summary table and a long-format plotting CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{fmt_f64, CliError, Manifest, TableRole, EXPERIMENTS_CSV, MANIFEST, REPORT_LONG_CSV, SUMMARY_TXT};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub table: String,
    /// One row per experiment: column name to value, as read from `experiments.csv`.
    pub rows: Vec<Row>,
    pub long_rows: usize,
}

type Row = BTreeMap<String, String>;

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Row>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Report(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| Ok(header.iter().cloned().zip(rec?.iter().map(String::from)).collect()))
        .collect::<Result<_, CliError>>()?;
    Ok((header, rows))
}

fn num(row: &Row, key: &str) -> f64 {
    row.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

/// Rebuilds every experiment listed in the manifest, checking each file's hash, and writes
/// `summary.txt` and `report_long.csv` (`experiment_id, series, x, y, x_label, y_label`).
pub fn report(dir: &Path) -> Result<ReportSummary, CliError> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| CliError::Report(format!("no manifest in {}: {e}", dir.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Report(format!("bad manifest: {e}")))?;
    for (name, hash) in &manifest.files {
        let bytes = fs::read(dir.join(name)).map_err(|e| CliError::Report(format!("{name}: {e}")))?;
        if hex::encode(Sha256::digest(&bytes)) != *hash {
            return Err(CliError::Report(format!("{name}: hash mismatch")));
        }
    }
    let (_, rows) = read_csv(&dir.join(EXPERIMENTS_CSV))?;
    let by_id: BTreeMap<&str, &Row> = rows.iter().map(|r| (r["experiment_id"].as_str(), r)).collect();

    let mut long = csv::Writer::from_writer(Vec::new());
    long.write_record(["experiment_id", "series", "x", "y", "x_label", "y_label"])?;
    let mut long_rows = 0;
    let mut push = |id: &str, series: &str, x: f64, y: f64, xl: &str, yl: &str| -> Result<(), CliError> {
        long_rows += 1;
        Ok(long.write_record([id, series, &fmt_f64(x), &fmt_f64(y), xl, yl])?)
    };

    let mut table = String::new();
    writeln!(table, "{:<26} {:<19} {:<8} {:>12} {:>12} {:>12} {:>12}", "experiment", "kind", "status", "C", "delta", "max_ratio", "growth")
        .expect("string write");
    for entry in &manifest.experiments {
        let row = by_id
            .get(entry.id.as_str())
            .ok_or_else(|| CliError::Report(format!("experiment {} missing from {EXPERIMENTS_CSV}", entry.id)))?;
        let cell = |k: &str| {
            let v = num(row, k);
            if v.is_nan() {
                "-".to_string()
            } else {
                format!("{v:.6}")
            }
        };
        writeln!(
            table,
            "{:<26} {:<19} {:<8} {:>12} {:>12} {:>12} {:>12}",
            entry.id,
            entry.kind.name(),
            entry.status.as_str(),
            cell("C"),
            cell("delta"),
            cell("max_ratio"),
            cell("refinement_growth")
        )
        .expect("string write");

        for file in &entry.files {
            let (header, data) = read_csv(&dir.join(&file.name))?;
            match file.role {
                TableRole::Points => {
                    let [_, xl, yl] = header.as_slice() else {
                        return Err(CliError::Report(format!("{}: expected three columns", file.name)));
                    };
                    let mut xmin = 0.0f64;
                    for r in &data {
                        let (x, y) = (num(r, xl), num(r, yl));
                        xmin = xmin.min(x);
                        push(&entry.id, "sample", x, y, xl, yl)?;
                    }
                    let (c, delta) = (num(row, "C"), num(row, "delta"));
                    if c.is_finite() && delta.is_finite() {
                        for x in [xmin, 0.0] {
                            push(&entry.id, "envelope", x, c.ln() + delta * x, xl, yl)?;
                        }
                    }
                }
                TableRole::Ratios => {
                    for r in &data {
                        push(&entry.id, &r["function_id"], num(r, "resolution").log2(), num(r, "ratio").log2(), "log2_resolution", "log2_ratio")?;
                    }
                }
                TableRole::Chain => {
                    for r in &data {
                        let series = format!("{}/{}", r["weight"], r["class"]);
                        push(&entry.id, &series, num(r, "resolution").log2(), num(r, "value").log2(), "log2_resolution", "log2_constant")?;
                    }
                }
                TableRole::Decomposition => {
                    for r in &data {
                        for t in ["t1", "t2", "t3"] {
                            push(&entry.id, t, num(r, "herz_f").log2(), num(r, t).log2(), "log2_herz_f", "log2_t")?;
                        }
                    }
                }
                TableRole::Kernels => {}
            }
        }
    }
    let bytes = long.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(dir.join(REPORT_LONG_CSV), bytes)?;
    fs::write(dir.join(SUMMARY_TXT), &table)?;
    Ok(ReportSummary { table, rows, long_rows })
}
