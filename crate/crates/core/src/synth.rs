//! Seeded synthetic phantoms and vendor/energy style transforms.
//!
//! Noise comes from ChaCha8 keyed by the phantom seed, one stream per image
//! row (stream 0 draws the shape parameters). A pixel's noise therefore
//! depends only on `(seed, row, column)`, and rows can be generated in any
//! order or in parallel.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{max_intensity, GrayImage};

pub const MIN_PHANTOM_SIDE: usize = 16;

/// Relative amplitude of the uniform pixel noise.
const NOISE_AMPLITUDE: f64 = 0.02;

fn row_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Half-disc "breast" phantom anchored to the left or right edge.
///
/// Intensity falls from about 0.9 of full scale at the anchor to about 0.1 at
/// the rim, plus seeded noise. Background pixels are exactly 0 and every
/// foreground pixel is at least 1.
pub fn synth_image(seed: u64, width: usize, height: usize, bit_depth: u8) -> Result<GrayImage> {
    if width < MIN_PHANTOM_SIDE || height < MIN_PHANTOM_SIDE {
        return Err(Error::InvalidImage(format!(
            "phantoms must be at least {MIN_PHANTOM_SIDE}x{MIN_PHANTOM_SIDE}, got {width}x{height}"
        )));
    }
    if !(1..=16).contains(&bit_depth) {
        return Err(Error::InvalidImage(format!("bit depth {bit_depth} outside [1, 16]")));
    }
    let mut shape = row_rng(seed, 0);
    let right_edge: bool = shape.random();
    let radius_frac: f64 = shape.random_range(0.7..0.95);
    let falloff: f64 = shape.random_range(0.6..1.6);
    let centre_shift: f64 = shape.random_range(-0.1..0.1);

    let max = f64::from(max_intensity(bit_depth));
    let cx = if right_edge { width as f64 } else { 0.0 };
    let cy = height as f64 * (0.5 + centre_shift);
    let radius = radius_frac * (height as f64 / 2.0).min(width as f64);

    let mut pixels = vec![0u16; width * height];
    pixels.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let mut rng = row_rng(seed, y as u64 + 1);
        let py = y as f64 + 0.5;
        for (x, px) in row.iter_mut().enumerate() {
            let noise = rng.random_range(-NOISE_AMPLITUDE..NOISE_AMPLITUDE);
            let d = ((x as f64 + 0.5 - cx).powi(2) + (py - cy).powi(2)).sqrt();
            if d >= radius {
                continue;
            }
            let t = d / radius;
            let level = 0.1 + 0.8 * (1.0 - t.powf(falloff)) + noise;
            *px = (level.clamp(0.0, 1.0) * max).round().clamp(1.0, max) as u16;
        }
    });
    GrayImage::mono2(width, height, bit_depth, pixels)
}

/// Parametric intensity response standing in for a vendor/energy style.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VendorStyle {
    pub gamma: f64,
    pub gain: f64,
    pub offset: i64,
    pub label: String,
}

impl VendorStyle {
    pub fn new(gamma: f64, gain: f64, offset: i64, label: impl Into<String>) -> Result<Self> {
        let style = VendorStyle {
            gamma,
            gain,
            offset,
            label: label.into(),
        };
        style.validate()?;
        Ok(style)
    }

    /// Gamma-only style with unit gain and no offset.
    pub fn gamma(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0, 0, format!("gamma-{gamma}"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidStyle(format!(
                "gamma {} must be finite and positive",
                self.gamma
            )));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::InvalidStyle(format!(
                "gain {} must be finite and positive",
                self.gain
            )));
        }
        Ok(())
    }
}

/// `p' = clamp(round(gain * M * (p / M)^gamma + offset), 1, M)` for `p > 0`;
/// zero pixels stay zero.
pub fn vendor_transform(img: &GrayImage, style: &VendorStyle) -> Result<GrayImage> {
    img.require_mono2()?;
    style.validate()?;
    let max = f64::from(img.max_value());
    let lut: Vec<u16> = (0..=img.max_value())
        .map(|p| {
            if p == 0 {
                return 0;
            }
            let v = style.gain * max * (f64::from(p) / max).powf(style.gamma) + style.offset as f64;
            v.round().clamp(1.0, max) as u16
        })
        .collect();
    Ok(img.with_pixels(img.pixels().iter().map(|&p| lut[usize::from(p)]).collect()))
}
