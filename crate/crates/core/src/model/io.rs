//! Parameter files.
//!
//! Layout: a single-line JSON header terminated by `\n`, followed by
//! `count` little-endian IEEE-754 binary64 values in canonical order
//! (per layer: weight matrix row-major, then bias).
//!
//! ```text
//! {"format":"pspd-params","version":1,"layer_sizes":[20,32,32,2],"epoch":60,"count":1794}\n
//! <1794 × 8 bytes>
//! ```
//!
//! Values of any scalar type are widened to binary64 on write, so `f64`
//! and `f32` parameters both round-trip bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ModelParameters;

pub const PARAMS_FORMAT: &str = "pspd-params";
const PARAMS_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    epoch: usize,
    count: usize,
}

pub fn write_parameters<T: Scalar, W: Write>(
    mut out: W,
    params: &ModelParameters<T>,
    epoch: usize,
) -> std::io::Result<()> {
    let header = Header {
        format: PARAMS_FORMAT.to_string(),
        version: PARAMS_VERSION,
        layer_sizes: params.layer_sizes(),
        epoch,
        count: params.parameter_count(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in params.values() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    out.flush()
}

/// Reads parameters and the epoch recorded with them.
pub fn read_parameters<T: Scalar, R: BufRead>(mut input: R) -> Result<(ModelParameters<T>, usize)> {
    let mut line = String::new();
    input
        .read_line(&mut line)
        .map_err(|e| Error::invalid(format!("reading parameter header: {e}")))?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::invalid(format!("malformed parameter header: {e}")))?;
    if header.format != PARAMS_FORMAT || header.version != PARAMS_VERSION {
        return Err(Error::invalid(format!(
            "unsupported parameter file {} v{}",
            header.format, header.version
        )));
    }
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::invalid(format!("reading parameter values: {e}")))?;
    if bytes.len() != header.count * 8 {
        return Err(Error::invalid(format!(
            "header announces {} values but payload holds {} bytes",
            header.count,
            bytes.len()
        )));
    }
    let mut flat = Vec::with_capacity(header.count);
    for chunk in bytes.chunks_exact(8) {
        let value = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        flat.push(
            T::from_f64(value).ok_or_else(|| Error::invalid("value not representable"))?,
        );
    }
    let params = ModelParameters::from_flat(&header.layer_sizes, &flat)?;
    Ok((params, header.epoch))
}

pub fn save_parameters<T: Scalar>(
    path: impl AsRef<Path>,
    params: &ModelParameters<T>,
    epoch: usize,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_parameters(BufWriter::new(file), params, epoch).map_err(|e| Error::io(path, e))
}

pub fn load_parameters<T: Scalar>(path: impl AsRef<Path>) -> Result<(ModelParameters<T>, usize)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_parameters(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.params");
        let mut params = ModelParameters::<f64>::glorot_uniform(&[5, 7, 3], 99).unwrap();
        if let Some(v) = params.values_mut().next() {
            *v = -0.0;
        }
        save_parameters(&path, &params, 12).unwrap();
        let (loaded, epoch) = load_parameters::<f64>(&path).unwrap();
        assert_eq!(epoch, 12);
        assert!(loaded.bitwise_eq(&params));

        let raw = std::fs::read(&path).unwrap();
        let newline = raw.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&raw[..newline]).unwrap();
        assert_eq!(header["layer_sizes"], serde_json::json!([5, 7, 3]));
        assert_eq!(raw.len() - newline - 1, params.parameter_count() * 8);
    }

    #[test]
    fn rejects_truncated_payload() {
        let params = ModelParameters::<f64>::glorot_uniform(&[2, 2], 1).unwrap();
        let mut buf = Vec::new();
        write_parameters(&mut buf, &params, 0).unwrap();
        buf.pop();
        assert!(read_parameters::<f64, _>(buf.as_slice()).is_err());
        assert!(read_parameters::<f64, _>(&b"not json\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_any_values(values in prop::collection::vec(-1e300f64..1e300, 9)) {
            let params = ModelParameters::from_flat(&[2, 3], &values).unwrap();
            let mut buf = Vec::new();
            write_parameters(&mut buf, &params, 3).unwrap();
            let (back, _) = read_parameters::<f64, _>(buf.as_slice()).unwrap();
            prop_assert!(back.bitwise_eq(&params));
        }

        #[test]
        fn single_precision_round_trip(values in prop::collection::vec(-1e30f32..1e30, 6)) {
            let params = ModelParameters::from_flat(&[1, 3], &values).unwrap();
            let mut buf = Vec::new();
            write_parameters(&mut buf, &params, 0).unwrap();
            let (back, _) = read_parameters::<f32, _>(buf.as_slice()).unwrap();
            prop_assert_eq!(back.to_flat(), values);
        }
    }
}
