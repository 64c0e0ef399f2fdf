//! Long-format learning curves from one or more training traces.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use pspd::TrainingTrace;

use crate::error::{CliError, CliResult};

pub const CURVE_HEADER: [&str; 4] = ["run", "epoch", "metric", "value"];

/// Label for each trace: its path as given, with `#2`, `#3`, ... appended
/// to repeats so runs stay distinct.
pub fn run_labels(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    paths
        .iter()
        .map(|p| {
            let base = p.display().to_string();
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}#{count}")
            }
        })
        .collect()
}

/// Writes `run,epoch,metric,value` rows, one per defined trace cell.
pub fn write_curves<W: Write>(traces: &[PathBuf], out: W) -> CliResult<()> {
    if traces.is_empty() {
        return Err(CliError::config("curves needs at least one trace file"));
    }
    let mut writer = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| CliError::config(format!("writing curves: {e}"));
    writer.write_record(CURVE_HEADER).map_err(io_err)?;
    for (path, label) in traces.iter().zip(run_labels(traces)) {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let rows = TrainingTrace::read_rows(file, path)?;
        for row in rows {
            let epoch = row
                .iter()
                .find(|(name, _)| name == "epoch")
                .map(|&(_, v)| v)
                .ok_or_else(|| pspd::Error::Parse {
                    path: path.clone(),
                    line: 0,
                    column: 0,
                    message: "row without an epoch".to_string(),
                })?;
            for (name, value) in row.iter().filter(|(name, _)| name != "epoch") {
                writer
                    .write_record([label.as_str(), &epoch.to_string(), name, &value.to_string()])
                    .map_err(io_err)?;
            }
        }
    }
    writer.flush().map_err(|e| CliError::config(format!("writing curves: {e}")))?;
    Ok(())
}

pub fn emit_curves(traces: &[PathBuf], output: &Path) -> CliResult<()> {
    let file = File::create(output).map_err(|e| CliError::io(output, e))?;
    write_curves(traces, std::io::BufWriter::new(file))
}
