//! 16-bit greyscale images of surface fields.
//!
//! Binary PGM (`P5`, maxval 65535, big-endian samples). Values are mapped
//! linearly from `[min, max]` to `[0, 65535]`; the exact bounds are kept in
//! a `# min=<f64> max=<f64>` comment so the data can be recovered.

use std::path::Path;

use super::ExperimentError;
use crate::spectral::SurfaceField;

#[derive(Clone, Debug, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    pub pixels: Vec<u16>,
}

pub fn encode_pgm(field: &SurfaceField) -> Vec<u8> {
    let n = field.geometry().n();
    let (min, max) = (field.min(), field.max());
    let span = max - min;
    let mut out = format!("P5\n# min={min:?} max={max:?}\n{n} {n}\n65535\n").into_bytes();
    for &x in field.values() {
        let level = if span > 0.0 { ((x - min) / span * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn emit_pgm(field: &SurfaceField, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    std::fs::write(path, encode_pgm(field))?;
    Ok(())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<PgmImage, ExperimentError> {
    let bad = |m: &str| ExperimentError::Image(m.to_string());
    // Header: magic, comment, dimensions, maxval, each on its own line.
    let mut lines = Vec::new();
    let mut pos = 0;
    while lines.len() < 4 {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        lines.push(std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not text"))?);
        pos += end + 1;
    }
    if lines[0] != "P5" {
        return Err(bad("expected P5"));
    }
    let bound = |key: &str| -> Result<f64, ExperimentError> {
        lines[1]
            .split_whitespace()
            .find_map(|t| t.strip_prefix(key))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing min/max comment"))
    };
    let (min, max) = (bound("min=")?, bound("max=")?);
    let dims: Vec<usize> = lines[2].split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let [width, height] = dims[..] else { return Err(bad("bad dimensions")) };
    if lines[3] != "65535" {
        return Err(bad("expected maxval 65535"));
    }
    let body = &bytes[pos..];
    if body.len() != 2 * width * height {
        return Err(bad("pixel data has wrong length"));
    }
    let pixels = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok(PgmImage { width, height, min, max, pixels })
}
