//! Binary PGM (P5). Samples wider than a byte are two bytes, most
//! significant first.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayImage, Photometric};

/// Bits needed to hold every value up to `maxval`.
pub fn depth_for_maxval(maxval: u32) -> u8 {
    (32 - maxval.leading_zeros()) as u8
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&c) = self.data.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos]).ok()?.parse().ok()
    }
}

/// Decodes a P5 buffer into an image with the given photometric
/// interpretation. `path` is only used for error messages.
pub fn decode_pgm(data: &[u8], photometric: Photometric, path: &Path) -> Result<GrayImage> {
    let bad = |reason: &str| Error::malformed(path, reason);
    if !data.starts_with(b"P5") {
        return Err(bad("missing P5 magic"));
    }
    let mut cur = Cursor { data, pos: 2 };
    if !cur.data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after magic"));
    }
    let width = cur.number().ok_or_else(|| bad("bad width"))? as usize;
    let height = cur.number().ok_or_else(|| bad("bad height"))? as usize;
    let maxval = cur.number().ok_or_else(|| bad("bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if !(1..=65535).contains(&maxval) {
        return Err(bad("maxval outside [1, 65535]"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !cur.data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after maxval"));
    }
    let raster = &data[cur.pos + 1..];
    let n = width.checked_mul(height).ok_or_else(|| bad("dimensions overflow"))?;
    let wide = maxval > 255;
    let needed = if wide { n * 2 } else { n };
    if raster.len() < needed {
        return Err(bad(&format!("truncated raster: {} of {needed} bytes", raster.len())));
    }
    let pixels: Vec<u16> = if wide {
        raster[..needed]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect()
    } else {
        raster[..needed].iter().map(|&b| u16::from(b)).collect()
    };
    if let Some(pos) = pixels.iter().position(|&p| u32::from(p) > maxval) {
        return Err(bad(&format!(
            "sample {} at index {pos} exceeds maxval {maxval}",
            pixels[pos]
        )));
    }
    GrayImage::new(width, height, depth_for_maxval(maxval), photometric, pixels).map_err(|e| bad(&e.to_string()))
}

/// Encodes `img` as P5 with `maxval = 2^b - 1`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let maxval = img.max_value();
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval);
    let wide = maxval > 255;
    let mut out = Vec::with_capacity(header.len() + img.len() * if wide { 2 } else { 1 });
    out.extend_from_slice(header.as_bytes());
    if wide {
        for &p in img.pixels() {
            out.extend_from_slice(&p.to_be_bytes());
        }
    } else {
        out.extend(img.pixels().iter().map(|&p| p as u8));
    }
    out
}

/// Writes `bytes` to `path` via a temporary file in the same directory and a
/// rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other(format!("{} has no file name", path.display()))))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
