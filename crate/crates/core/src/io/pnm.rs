use super::Image;
use crate::error::{Error, Result};

fn parse_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse { offset, message: message.into() }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next unsigned decimal token and its offset.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(start) {
                None => parse_error(start, format!("unexpected end of input, expected {what}")),
                Some(_) => parse_error(start, format!("expected {what}")),
            });
        }
        if self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            return Err(parse_error(self.pos, format!("unexpected byte after {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        let value = text.parse().map_err(|_| parse_error(start, format!("{what} out of range")))?;
        Ok((value, start))
    }
}

/// Parses a P2, P3, P5 or P6 image with maxval 255.
pub fn read_ppm(bytes: &[u8]) -> Result<Image> {
    let (channels, binary) = match bytes.get(..2) {
        Some(b"P2") => (1, false),
        Some(b"P3") => (3, false),
        Some(b"P5") => (1, true),
        Some(b"P6") => (3, true),
        _ => return Err(parse_error(0, "expected magic P2, P3, P5 or P6")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if cur.bytes.get(2).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        return Err(parse_error(2, "expected whitespace after magic"));
    }
    let (width, at) = cur.number("width")?;
    if width == 0 {
        return Err(parse_error(at, "width must be positive"));
    }
    let (height, at) = cur.number("height")?;
    if height == 0 {
        return Err(parse_error(at, "height must be positive"));
    }
    let (maxval, at) = cur.number("maxval")?;
    if maxval != 255 {
        return Err(parse_error(at, format!("maxval {maxval} unsupported, expected 255")));
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| parse_error(at, "image too large"))?;

    let samples = if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() {
            return Err(parse_error(cur.pos, "missing whitespace before raster"));
        }
        let start = cur.pos + 1;
        if start + n > bytes.len() {
            return Err(parse_error(bytes.len(), format!("raster truncated, expected {n} bytes")));
        }
        bytes[start..start + n].to_vec()
    } else {
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let (v, at) = cur.number("sample")?;
            if v > 255 {
                return Err(parse_error(at, format!("sample {v} exceeds maxval")));
            }
            samples.push(v as u8);
        }
        samples
    };
    Image::new(width, height, channels, samples).map_err(|e| parse_error(0, e.to_string()))
}

/// Binary PNM: P6 for RGB images, P5 for grayscale.
pub fn write_ppm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.samples());
    out
}
