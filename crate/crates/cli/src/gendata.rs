//! `gen-data`: write a synthetic dataset described by a TOML spec to CSV.

use std::fs;
use std::path::Path;

use pspd::{generate_synthetic, write_csv, Dataset, SyntheticSpec};

use crate::config::{find_key_line, mentions};
use crate::error::{CliError, CliResult};

pub fn load_spec(path: &Path) -> CliResult<SyntheticSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: Some(path.to_path_buf()),
        line: None,
        message: format!("cannot read spec: {e}"),
    })?;
    let spec: SyntheticSpec = toml::from_str(&text).map_err(|e: toml::de::Error| CliError::Config {
        path: Some(path.to_path_buf()),
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    spec.validate().map_err(|e| {
        let msg = e.to_string();
        let key = ["noise_rate", "class_separation", "class_count", "n", "d"]
            .into_iter()
            .find(|k| mentions(&msg, k));
        CliError::Config {
            path: Some(path.to_path_buf()),
            line: key.and_then(|k| find_key_line(&text, k)),
            message: msg,
        }
    })?;
    Ok(spec)
}

/// Generates the dataset and writes features, observed and clean labels.
pub fn generate_to_csv(spec_path: &Path, output: &Path) -> CliResult<Dataset> {
    let spec = load_spec(spec_path)?;
    let data: Dataset = generate_synthetic(&spec)?;
    write_csv(&data, output)?;
    Ok(data)
}
