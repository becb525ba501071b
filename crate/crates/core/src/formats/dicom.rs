//! Minimal DICOM Part 10 reader for single-frame, uncompressed,
//! little-endian grayscale images.
//!
//! Only the attributes needed to reconstruct stored pixel values are read.
//! Modality rescale and VOI LUTs are never applied: the returned pixels are
//! the stored values.

use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::ImageRecord;
use crate::image::{GrayImage, Photometric};

pub const IMPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2";
pub const EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1";

const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;

type Tag = (u16, u16);

const TRANSFER_SYNTAX: Tag = (0x0002, 0x0010);
const MANUFACTURER: Tag = (0x0008, 0x0070);
const PHOTOMETRIC: Tag = (0x0028, 0x0004);
const NUMBER_OF_FRAMES: Tag = (0x0028, 0x0008);
const ROWS: Tag = (0x0028, 0x0010);
const COLUMNS: Tag = (0x0028, 0x0011);
const BITS_ALLOCATED: Tag = (0x0028, 0x0100);
const BITS_STORED: Tag = (0x0028, 0x0101);
const PIXEL_REPRESENTATION: Tag = (0x0028, 0x0103);
const RESCALE_INTERCEPT: Tag = (0x0028, 0x1052);
const RESCALE_SLOPE: Tag = (0x0028, 0x1053);
const VOI_LUT_SEQUENCE: Tag = (0x0028, 0x3010);
const WINDOW_CENTER: Tag = (0x0028, 0x1050);
const PIXEL_DATA: Tag = (0x7FE0, 0x0010);

const ITEM: Tag = (0xFFFE, 0xE000);
const ITEM_DELIMITER: Tag = (0xFFFE, 0xE00D);
const SEQUENCE_DELIMITER: Tag = (0xFFFE, 0xE0DD);

/// VRs whose explicit encoding uses a 2-byte reserved field and 4-byte length.
fn has_long_length(vr: &[u8; 2]) -> bool {
    matches!(
        vr,
        b"OB" | b"OD" | b"OF" | b"OL" | b"OV" | b"OW" | b"SQ" | b"SV" | b"UC" | b"UN" | b"UR" | b"UT" | b"UV"
    )
}

#[derive(Default)]
struct Attributes<'a> {
    manufacturer: Option<String>,
    photometric: Option<String>,
    frames: Option<String>,
    rows: Option<u16>,
    columns: Option<u16>,
    bits_allocated: Option<u16>,
    bits_stored: Option<u16>,
    pixel_representation: Option<u16>,
    pixel_data: Option<&'a [u8]>,
    has_display_transform: bool,
}

struct Element<'a> {
    tag: Tag,
    length: u32,
    value: &'a [u8],
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    explicit: bool,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::malformed(self.path, reason)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| self.err(format!("truncated at offset {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.data.len()
    }

    fn peek_group(&self) -> Option<u16> {
        self.data
            .get(self.pos..self.pos + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    /// Reads one element header and, for defined lengths, its value.
    /// Undefined-length values are left unread (`value` is empty).
    fn element(&mut self) -> Result<Element<'a>> {
        let tag = (self.u16()?, self.u16()?);
        // item and delimiter tags never carry a VR
        if tag.0 == 0xFFFE {
            let length = self.u32()?;
            return Ok(Element {
                tag,
                length,
                value: &[],
            });
        }
        let length = if self.explicit {
            let vr = self.take(2)?;
            if has_long_length(&[vr[0], vr[1]]) {
                self.take(2)?;
                self.u32()?
            } else {
                u32::from(self.u16()?)
            }
        } else {
            self.u32()?
        };
        let value = if length == UNDEFINED_LENGTH {
            &[][..]
        } else {
            self.take(length as usize)?
        };
        Ok(Element { tag, length, value })
    }

    /// Skips the contents of an undefined-length sequence (or item).
    fn skip_undefined(&mut self, until: Tag) -> Result<()> {
        loop {
            if self.at_end() {
                return Err(self.err("unterminated undefined-length value"));
            }
            let el = self.element()?;
            if el.tag == until {
                return Ok(());
            }
            if el.length == UNDEFINED_LENGTH {
                let end = if el.tag == ITEM {
                    ITEM_DELIMITER
                } else {
                    SEQUENCE_DELIMITER
                };
                self.skip_undefined(end)?;
            }
        }
    }
}

fn text(value: &[u8]) -> String {
    String::from_utf8_lossy(value)
        .trim_end_matches(['\0', ' '])
        .trim_start()
        .to_string()
}

fn us(value: &[u8]) -> Option<u16> {
    (value.len() >= 2).then(|| u16::from_le_bytes([value[0], value[1]]))
}

/// Reads the file meta group and returns the transfer syntax UID and the
/// offset of the dataset.
fn read_meta(data: &[u8], path: &Path) -> Result<(String, usize)> {
    if data.len() < 132 || &data[128..132] != b"DICM" {
        return Err(Error::malformed(path, "missing DICM preamble"));
    }
    let mut r = Reader {
        data,
        pos: 132,
        explicit: true,
        path,
    };
    let mut syntax = None;
    while r.peek_group() == Some(0x0002) {
        let el = r.element()?;
        if el.tag == TRANSFER_SYNTAX {
            syntax = Some(text(el.value));
        }
    }
    let syntax = syntax.ok_or(Error::MissingTag("TransferSyntaxUID"))?;
    Ok((syntax, r.pos))
}

fn read_attributes<'a>(data: &'a [u8], start: usize, explicit: bool, path: &'a Path) -> Result<Attributes<'a>> {
    let mut r = Reader {
        data,
        pos: start,
        explicit,
        path,
    };
    let mut attrs = Attributes::default();
    while !r.at_end() {
        let el = r.element()?;
        if el.length == UNDEFINED_LENGTH {
            if el.tag == PIXEL_DATA {
                return Err(Error::UnsupportedTransferSyntax("encapsulated pixel data".into()));
            }
            r.skip_undefined(SEQUENCE_DELIMITER)?;
            if el.tag == VOI_LUT_SEQUENCE {
                attrs.has_display_transform = true;
            }
            continue;
        }
        match el.tag {
            MANUFACTURER => attrs.manufacturer = Some(text(el.value)),
            PHOTOMETRIC => attrs.photometric = Some(text(el.value)),
            NUMBER_OF_FRAMES => attrs.frames = Some(text(el.value)),
            ROWS => attrs.rows = us(el.value),
            COLUMNS => attrs.columns = us(el.value),
            BITS_ALLOCATED => attrs.bits_allocated = us(el.value),
            BITS_STORED => attrs.bits_stored = us(el.value),
            PIXEL_REPRESENTATION => attrs.pixel_representation = us(el.value),
            RESCALE_SLOPE | RESCALE_INTERCEPT | WINDOW_CENTER | VOI_LUT_SEQUENCE => attrs.has_display_transform = true,
            PIXEL_DATA => {
                attrs.pixel_data = Some(el.value);
                break;
            }
            _ => {}
        }
    }
    Ok(attrs)
}

/// Reads a single-frame grayscale DICOM file into an [`ImageRecord`].
///
/// The image keeps its stored photometric interpretation; callers normalize
/// MONO1 themselves.
pub fn read_dicom(path: &Path) -> Result<ImageRecord> {
    let data = std::fs::read(path)?;
    let (syntax, start) = read_meta(&data, path)?;
    let explicit = match syntax.as_str() {
        EXPLICIT_VR_LITTLE_ENDIAN => true,
        IMPLICIT_VR_LITTLE_ENDIAN => false,
        _ => return Err(Error::UnsupportedTransferSyntax(syntax)),
    };
    let attrs = read_attributes(&data, start, explicit, path)?;

    let photometric = match attrs.photometric.as_deref() {
        Some("MONOCHROME1") => Photometric::Mono1,
        Some("MONOCHROME2") => Photometric::Mono2,
        Some(other) => return Err(Error::UnsupportedPhotometric(other.to_string())),
        None => return Err(Error::MissingTag("PhotometricInterpretation")),
    };
    if let Some(frames) = attrs.frames.as_deref() {
        if frames.parse::<u32>() != Ok(1) {
            return Err(Error::malformed(
                path,
                format!("multi-frame objects unsupported (NumberOfFrames {frames})"),
            ));
        }
    }
    let rows = attrs.rows.ok_or(Error::MissingTag("Rows"))? as usize;
    let columns = attrs.columns.ok_or(Error::MissingTag("Columns"))? as usize;
    let bits_allocated = attrs.bits_allocated.ok_or(Error::MissingTag("BitsAllocated"))?;
    let bits_stored = attrs.bits_stored.ok_or(Error::MissingTag("BitsStored"))?;
    let representation = attrs
        .pixel_representation
        .ok_or(Error::MissingTag("PixelRepresentation"))?;
    let pixel_data = attrs.pixel_data.ok_or(Error::MissingTag("PixelData"))?;

    if representation != 0 {
        return Err(Error::UnsupportedPixelRepresentation("signed samples".into()));
    }
    if bits_allocated != 8 && bits_allocated != 16 {
        return Err(Error::UnsupportedPixelRepresentation(format!(
            "BitsAllocated {bits_allocated}"
        )));
    }
    if bits_stored == 0 || bits_stored > bits_allocated {
        return Err(Error::malformed(
            path,
            format!("BitsStored {bits_stored} with BitsAllocated {bits_allocated}"),
        ));
    }
    if attrs.has_display_transform {
        log::info!(
            "{}: rescale/VOI attributes present; using stored pixel values unchanged",
            path.display()
        );
    }

    let n = rows * columns;
    let bytes_per = usize::from(bits_allocated / 8);
    if pixel_data.len() < n * bytes_per {
        return Err(Error::malformed(
            path,
            format!("PixelData holds {} bytes, expected {}", pixel_data.len(), n * bytes_per),
        ));
    }
    let pixels: Vec<u16> = if bytes_per == 2 {
        pixel_data[..n * 2]
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect()
    } else {
        pixel_data[..n].iter().map(|&b| u16::from(b)).collect()
    };
    let max = (1u32 << bits_stored) - 1;
    if let Some(pos) = pixels.iter().position(|&p| u32::from(p) > max) {
        return Err(Error::malformed(
            path,
            format!("pixel {} at index {pos} exceeds BitsStored {bits_stored}", pixels[pos]),
        ));
    }
    let image = GrayImage::new(columns, rows, bits_stored as u8, photometric, pixels)
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    let mut record = ImageRecord::new(image, path);
    record.vendor = attrs.manufacturer.filter(|m| !m.is_empty());
    Ok(record)
}
