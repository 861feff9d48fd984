//! F32R rasters: the ASCII header `F32R C H W\n` followed by `C·H·W`
//! little-endian binary32 values, channel-major then row-major.

use aop_core::{ConfMap, LogitMap};

use crate::error::FormatError;

/// A decoded F32R payload, still in file precision.
#[derive(Debug, Clone, PartialEq)]
pub struct F32r {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

/// What a raster file holds, decided by its channel count.
#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Conf(ConfMap),
    Logits(LogitMap),
}

fn header_field(bytes: &[u8], pos: &mut usize, end: u8, what: &str) -> Result<usize, FormatError> {
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    let digits = &bytes[start..*pos];
    if digits.is_empty() || (digits.len() > 1 && digits[0] == b'0') {
        return Err(FormatError::new(start, format!("{what} must be a plain decimal")));
    }
    if bytes.get(*pos) != Some(&end) {
        return Err(FormatError::new(*pos, format!("malformed header after {what}")));
    }
    *pos += 1;
    let text = std::str::from_utf8(digits).unwrap_or_default();
    match text.parse::<usize>() {
        Ok(0) | Err(_) => Err(FormatError::new(start, format!("{what} must be a positive integer"))),
        Ok(v) => Ok(v),
    }
}

pub fn read_f32r(bytes: &[u8]) -> Result<F32r, FormatError> {
    if !bytes.starts_with(b"F32R ") {
        return Err(FormatError::new(0, "missing F32R magic"));
    }
    let mut pos = 5;
    let channels = header_field(bytes, &mut pos, b' ', "channel count")?;
    let height = header_field(bytes, &mut pos, b' ', "height")?;
    let width = header_field(bytes, &mut pos, b'\n', "width")?;
    let count = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| FormatError::new(pos, "raster size overflows"))?;
    let payload = &bytes[pos..];
    if payload.len() != count * 4 {
        return Err(FormatError::new(
            pos,
            format!("payload holds {} bytes, header needs {}", payload.len(), count * 4),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        if v.is_nan() {
            return Err(FormatError::new(pos + 4 * i, "NaN in payload"));
        }
        values.push(v);
    }
    Ok(F32r { channels, height, width, values })
}

pub fn write_f32r(raster: &F32r) -> Vec<u8> {
    let mut out = format!("F32R {} {} {}\n", raster.channels, raster.height, raster.width).into_bytes();
    out.reserve(raster.values.len() * 4);
    for v in &raster.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// One channel loads as a confidence map (clamped into the open unit
/// interval), three as logits.
pub fn read_raster(bytes: &[u8]) -> Result<Raster, FormatError> {
    let r = read_f32r(bytes)?;
    let wide: Vec<f64> = r.values.iter().map(|&v| v as f64).collect();
    let header_len = bytes.len() - 4 * r.values.len();
    let invalid = |e: aop_core::Error| FormatError::new(header_len, e.to_string());
    match r.channels {
        1 => ConfMap::clamped(r.height, r.width, wide).map(Raster::Conf).map_err(invalid),
        3 => LogitMap::new(r.height, r.width, wide).map(Raster::Logits).map_err(invalid),
        c => Err(FormatError::new(5, format!("expected 1 or 3 channels, got {c}"))),
    }
}

pub fn read_conf(bytes: &[u8]) -> Result<ConfMap, FormatError> {
    match read_raster(bytes)? {
        Raster::Conf(c) => Ok(c),
        Raster::Logits(_) => Err(FormatError::new(5, "expected a 1-channel confidence raster")),
    }
}

pub fn read_logits(bytes: &[u8]) -> Result<LogitMap, FormatError> {
    match read_raster(bytes)? {
        Raster::Logits(l) => Ok(l),
        Raster::Conf(_) => Err(FormatError::new(5, "expected a 3-channel logit raster")),
    }
}

/// Values are narrowed to binary32.
pub fn write_conf(conf: &ConfMap) -> Vec<u8> {
    write_f32r(&F32r {
        channels: 1,
        height: conf.height(),
        width: conf.width(),
        values: conf.values().iter().map(|&v| v as f32).collect(),
    })
}

/// Values are narrowed to binary32.
pub fn write_logits(logits: &LogitMap) -> Vec<u8> {
    write_f32r(&F32r {
        channels: 3,
        height: logits.height(),
        width: logits.width(),
        values: logits.values().iter().map(|&v| v as f32).collect(),
    })
}
