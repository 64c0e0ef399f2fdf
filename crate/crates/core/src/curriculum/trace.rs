use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

/// Column order of the per-epoch trace CSV.
pub const TRACE_COLUMNS: [&str; 12] = [
    "epoch",
    "lambda_w",
    "lambda_phi",
    "frac_w_nonzero",
    "frac_phi_nonzero",
    "mean_w",
    "mean_phi",
    "train_loss",
    "val_acc",
    "val_auc",
    "val_ece",
    "val_nll",
];

/// One epoch of training.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub lambda_w: f64,
    pub lambda_phi: f64,
    pub frac_w_nonzero: f64,
    pub frac_phi_nonzero: f64,
    pub mean_w: f64,
    pub mean_phi: f64,
    /// Mean of `w_i·CE_i + γ·φ_i·KL_i` over the epoch's training samples.
    pub train_loss: f64,
    pub val: Option<MetricsReport>,
    /// Per-sample KL terms evaluated during the epoch's parameter updates.
    pub kl_evaluations: usize,
    /// Epoch whose end-of-epoch student served as teacher, if any.
    pub teacher_epoch: Option<usize>,
}

/// Per-epoch history of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<EpochRecord>,
}

/// Shortest round-trip representation; empty for undefined values.
fn cell(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

impl TrainingTrace {
    /// Writes the trace as CSV. When `config_hash` is given, it is emitted
    /// first as a `# config_hash: <hex>` comment line.
    pub fn write_csv<W: Write>(&self, out: W, config_hash: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(hash) = config_hash {
            writeln!(out, "# config_hash: {hash}").map_err(|e| Error::invalid(e.to_string()))?;
        }
        let mut writer = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::invalid(format!("writing trace: {e}"));
        writer.write_record(TRACE_COLUMNS).map_err(to_err)?;
        for r in &self.records {
            let val = r.val.as_ref();
            writer
                .write_record([
                    r.epoch.to_string(),
                    r.lambda_w.to_string(),
                    r.lambda_phi.to_string(),
                    r.frac_w_nonzero.to_string(),
                    r.frac_phi_nonzero.to_string(),
                    r.mean_w.to_string(),
                    r.mean_phi.to_string(),
                    r.train_loss.to_string(),
                    cell(val.map(|m| m.acc)),
                    cell(val.and_then(|m| m.auc)),
                    cell(val.map(|m| m.ece)),
                    cell(val.map(|m| m.nll)),
                ])
                .map_err(to_err)?;
        }
        writer.flush().map_err(|e| Error::invalid(format!("writing trace: {e}")))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), config_hash)
    }

    /// Parses trace rows as `(column, value)` pairs per epoch; empty cells
    /// are skipped. Comment lines starting with `#` are ignored.
    pub fn read_rows<R: Read>(input: R, source: &Path) -> Result<Vec<Vec<(String, f64)>>> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            column: 0,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        for required in ["epoch", "frac_w_nonzero"] {
            if !headers.iter().any(|h| h == required) {
                return Err(parse_err(1, format!("trace is missing the `{required}` column")));
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                parse_err(e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let mut row = Vec::with_capacity(headers.len());
            for (name, value) in headers.iter().zip(record.iter()) {
                if value.is_empty() {
                    continue;
                }
                let v: f64 = value.parse().map_err(|_| {
                    parse_err(line, format!("column `{name}`: `{value}` is not a number"))
                })?;
                row.push((name.to_string(), v));
            }
            rows.push(row);
        }
        Ok(rows)
    }
}
