//! Binary PGM (P5) label masks. Labels are stored as raw bytes 0, 1, 2
//! under maxval 255, so the encoding is lossless.

use aop_core::LabelMask;

use crate::error::FormatError;

const MAXVAL: usize = 255;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments that run to the end of the line.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, FormatError> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FormatError::new(start, format!("expected {what}")));
        }
        // Only ASCII digits were consumed.
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or_default();
        text.parse().map_err(|_| FormatError::new(start, format!("{what} out of range")))
    }
}

pub fn read_mask_pgm(bytes: &[u8]) -> Result<LabelMask, FormatError> {
    if !bytes.starts_with(b"P5") {
        return Err(FormatError::new(0, "not a binary PGM (magic must be P5)"));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(FormatError::new(2, "expected whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = {
        cur.skip_separators();
        cur.pos
    };
    let maxval = cur.number("maxval")?;
    if maxval != MAXVAL {
        return Err(FormatError::new(maxval_at, format!("maxval must be 255, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(FormatError::new(maxval_at, "image extent must be nonzero"));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(FormatError::new(cur.pos, "expected a single whitespace byte before the raster")),
    }
    let start = cur.pos;
    let len = width
        .checked_mul(height)
        .ok_or_else(|| FormatError::new(start, "image extent overflows"))?;
    let payload = &bytes[start..];
    if payload.len() < len {
        return Err(FormatError::new(bytes.len(), format!("truncated raster: {} of {len} bytes", payload.len())));
    }
    if payload.len() > len {
        return Err(FormatError::new(start + len, "trailing bytes after raster"));
    }
    if let Some(i) = payload.iter().position(|&v| v > 2) {
        return Err(FormatError::new(start + i, format!("label {} out of range 0..=2", payload[i])));
    }
    LabelMask::new(height, width, payload.to_vec()).map_err(|e| FormatError::new(start, e.to_string()))
}

pub fn write_mask_pgm(mask: &LabelMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{MAXVAL}\n", mask.width(), mask.height()).into_bytes();
    out.extend_from_slice(mask.labels());
    out
}
