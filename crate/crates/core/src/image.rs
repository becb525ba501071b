//! Grayscale images, foreground masks and the photometric/threshold
//! operations applied before any histogramming.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BIT_DEPTH: u8 = 1;
pub const MAX_BIT_DEPTH: u8 = 16;

/// DICOM photometric interpretation of a single-channel image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Photometric {
    /// Lower stored values display brighter.
    #[serde(rename = "MONO1")]
    Mono1,
    /// Higher stored values display brighter.
    #[serde(rename = "MONO2")]
    Mono2,
}

impl fmt::Display for Photometric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Photometric::Mono1 => f.write_str("MONO1"),
            Photometric::Mono2 => f.write_str("MONO2"),
        }
    }
}

/// Largest representable intensity at bit depth `bits`.
#[inline]
pub fn max_intensity(bits: u8) -> u32 {
    (1u32 << bits) - 1
}

/// Row-major buffer of unsigned intensities with an explicit bit depth.
///
/// The depth is carried, never inferred: an image whose pixels never reach
/// `2^b - 1` still bins over the full range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    bit_depth: u8,
    photometric: Photometric,
    pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, bit_depth: u8, photometric: Photometric, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty dimensions {width}x{height}")));
        }
        if !(MIN_BIT_DEPTH..=MAX_BIT_DEPTH).contains(&bit_depth) {
            return Err(Error::InvalidImage(format!("bit depth {bit_depth} outside [1, 16]")));
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        let max = max_intensity(bit_depth);
        if let Some(pos) = pixels.iter().position(|&p| u32::from(p) > max) {
            return Err(Error::InvalidImage(format!(
                "pixel {} at index {pos} exceeds {max} for bit depth {bit_depth}",
                pixels[pos]
            )));
        }
        Ok(GrayImage {
            width,
            height,
            bit_depth,
            photometric,
            pixels,
        })
    }

    /// Convenience constructor for MONO2 images.
    pub fn mono2(width: usize, height: usize, bit_depth: u8, pixels: Vec<u16>) -> Result<Self> {
        Self::new(width, height, bit_depth, Photometric::Mono2, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn photometric(&self) -> Photometric {
        self.photometric
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn max_value(&self) -> u32 {
        max_intensity(self.bit_depth)
    }

    /// Converts MONO1 to MONO2 by intensity complement; MONO2 passes through.
    pub fn to_mono2(self) -> GrayImage {
        match self.photometric {
            Photometric::Mono2 => self,
            Photometric::Mono1 => {
                let max = self.max_value() as u16;
                let mut pixels = self.pixels;
                for p in pixels.iter_mut() {
                    *p = max - *p;
                }
                GrayImage {
                    photometric: Photometric::Mono2,
                    pixels,
                    ..self
                }
            }
        }
    }

    pub(crate) fn with_pixels(&self, pixels: Vec<u16>) -> GrayImage {
        debug_assert_eq!(pixels.len(), self.pixels.len());
        GrayImage {
            width: self.width,
            height: self.height,
            bit_depth: self.bit_depth,
            photometric: self.photometric,
            pixels,
        }
    }

    pub(crate) fn require_mono2(&self) -> Result<()> {
        match self.photometric {
            Photometric::Mono2 => Ok(()),
            Photometric::Mono1 => Err(Error::PhotometricNotNormalized),
        }
    }
}

/// Borrowing form of [`GrayImage::to_mono2`].
pub fn to_mono2(img: &GrayImage) -> GrayImage {
    img.clone().to_mono2()
}

/// Per-pixel foreground indicator with the dimensions of its source image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl ForegroundMask {
    pub fn new(width: usize, height: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} flags for a {width}x{height} mask",
                flags.len()
            )));
        }
        Ok(ForegroundMask { width, height, flags })
    }

    /// Mask with every pixel set.
    pub fn full(width: usize, height: usize) -> Self {
        ForegroundMask {
            width,
            height,
            flags: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub(crate) fn check_matches(&self, img: &GrayImage) -> Result<()> {
        if self.width != img.width() || self.height != img.height() {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, image is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }
}

/// Flags every pixel whose value is at least `min_intensity`.
///
/// With `min_intensity = 1` this is exactly the "intensity > 0" foreground.
pub fn foreground_mask(img: &GrayImage, min_intensity: u16) -> Result<ForegroundMask> {
    img.require_mono2()?;
    let flags = img.pixels().iter().map(|&p| p >= min_intensity).collect();
    Ok(ForegroundMask {
        width: img.width(),
        height: img.height(),
        flags,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

/// Keeps only the largest connected component of `mask`.
///
/// Ties go to the component whose first pixel comes earliest in row-major
/// order.
pub fn largest_component(mask: &ForegroundMask, connectivity: Connectivity) -> Result<ForegroundMask> {
    let (w, h) = (mask.width, mask.height);
    let flags = &mask.flags;
    // 0 = unvisited; component ids start at 1
    let mut labels = vec![0u32; flags.len()];
    let mut queue = VecDeque::new();
    let mut next_label = 0u32;
    let mut best: Option<(u32, usize)> = None;

    for start in 0..flags.len() {
        if !flags[start] || labels[start] != 0 {
            continue;
        }
        next_label += 1;
        labels[start] = next_label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let (x, y) = (idx % w, idx / w);
            for (dx, dy) in neighbours(connectivity) {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if flags[n] && labels[n] == 0 {
                    labels[n] = next_label;
                    queue.push_back(n);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next_label, size));
        }
    }

    let (keep, _) = best.ok_or(Error::EmptyForeground { image: None })?;
    Ok(ForegroundMask {
        width: w,
        height: h,
        flags: labels.iter().map(|&l| l == keep).collect(),
    })
}

fn neighbours(connectivity: Connectivity) -> &'static [(isize, isize)] {
    const FOUR: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
    const EIGHT: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    match connectivity {
        Connectivity::Four => &FOUR,
        Connectivity::Eight => &EIGHT,
    }
}
