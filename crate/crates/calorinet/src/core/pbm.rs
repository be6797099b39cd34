//! Minimal portable bitmap (P4) and graymap (P5) support.
//!
//! P4 is the canonical on-disk format for binary silhouettes, P5 is used
//! only for dumping averaged stacks for visual inspection.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes a binary mask (row-major, values 0/1) as a P4 bitmap.
pub fn write_pbm(path: &Path, width: usize, height: usize, mask: &[u8]) -> Result<()> {
    assert_eq!(mask.len(), width * height);
    let mut buf = Vec::with_capacity(32 + (width + 7) / 8 * height);
    buf.extend_from_slice(format!("P4\n{width} {height}\n").as_bytes());
    let row_bytes = (width + 7) / 8;
    for y in 0..height {
        let mut row = vec![0u8; row_bytes];
        for x in 0..width {
            if mask[y * width + x] != 0 {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        buf.extend_from_slice(&row);
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a P4 bitmap into a row-major 0/1 mask.
pub fn read_pbm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut raw = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let file = path.display().to_string();
    let parse_err = |msg: &str| Error::Parse {
        file: file.clone(),
        line: 1,
        msg: msg.to_string(),
    };

    // Header: magic, width, height as whitespace-separated tokens, then a
    // single whitespace byte before the packed raster.
    let mut pos = 0usize;
    let mut tokens = Vec::new();
    while tokens.len() < 3 && pos < raw.len() {
        while pos < raw.len() && raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < raw.len() && raw[pos] == b'#' {
            while pos < raw.len() && raw[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos > start {
            tokens.push(std::str::from_utf8(&raw[start..pos]).map_err(|_| parse_err("not ascii"))?);
        }
    }
    if tokens.len() < 3 || tokens[0] != "P4" {
        return Err(parse_err("expected P4 header"));
    }
    let width: usize = tokens[1].parse().map_err(|_| parse_err("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| parse_err("bad height"))?;
    if width == 0 || height == 0 {
        return Err(parse_err("zero dimension"));
    }
    pos += 1; // single whitespace after header
    let row_bytes = (width + 7) / 8;
    if raw.len() < pos + row_bytes * height {
        return Err(parse_err("truncated raster"));
    }
    let mut mask = vec![0u8; width * height];
    for y in 0..height {
        let row = &raw[pos + y * row_bytes..pos + (y + 1) * row_bytes];
        for x in 0..width {
            mask[y * width + x] = (row[x / 8] >> (7 - x % 8)) & 1;
        }
    }
    Ok((width, height, mask))
}

/// Writes real values in [0,1] as an 8-bit P5 graymap (value = round(255*v)).
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), width * height);
    let mut buf = Vec::with_capacity(32 + width * height);
    buf.extend_from_slice(format!("P5\n{width} {height}\n255\n").as_bytes());
    for &v in values {
        buf.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}
