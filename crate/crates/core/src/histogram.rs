//! Foreground-only histograms and their normalized cumulative form.
//!
//! Bin 0 is the background bin and is always empty. Masked pixels that hold
//! the value 0 (or fall into bin 0 after rebinning) are dropped and reported
//! as a remainder instead of being counted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ForegroundMask, GrayImage, MAX_BIT_DEPTH, MIN_BIT_DEPTH};

/// Tolerance for the terminal CDF value of externally supplied CDFs.
pub const TERMINAL_TOLERANCE: f64 = 1e-12;

fn check_depth(bits: u8) -> Result<()> {
    if (MIN_BIT_DEPTH..=MAX_BIT_DEPTH).contains(&bits) {
        Ok(())
    } else {
        Err(Error::DepthMismatch(format!("bit depth {bits} outside [1, 16]")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bit_depth: u8,
    counts: Vec<u64>,
    total: u64,
}

/// A histogram together with the number of pixels that were dropped into the
/// (forced-empty) background bin while building it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binned {
    pub histogram: Histogram,
    pub dropped: u64,
}

impl Histogram {
    pub fn empty(bit_depth: u8) -> Result<Self> {
        check_depth(bit_depth)?;
        Ok(Histogram {
            bit_depth,
            counts: vec![0; 1 << bit_depth],
            total: 0,
        })
    }

    /// Builds a histogram from raw per-bin counts. `counts[0]` must be zero.
    pub fn from_counts(bit_depth: u8, counts: Vec<u64>) -> Result<Self> {
        check_depth(bit_depth)?;
        if counts.len() != 1 << bit_depth {
            return Err(Error::DimensionMismatch(format!(
                "{} bins for bit depth {bit_depth}",
                counts.len()
            )));
        }
        if counts[0] != 0 {
            return Err(Error::DimensionMismatch("background bin must be empty".into()));
        }
        let total = counts.iter().sum();
        Ok(Histogram {
            bit_depth,
            counts,
            total,
        })
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Adds masked pixels to the histogram and returns how many masked
    /// zero-valued pixels were dropped.
    pub fn accumulate(&mut self, pixels: &[u16], flags: &[bool]) -> u64 {
        debug_assert_eq!(pixels.len(), flags.len());
        for (&p, &f) in pixels.iter().zip(flags) {
            if f {
                self.counts[usize::from(p)] += 1;
            }
        }
        let dropped = std::mem::take(&mut self.counts[0]);
        self.total = self.counts.iter().sum();
        dropped
    }

    /// Bin-wise sum.
    pub fn merge(&self, other: &Histogram) -> Result<Histogram> {
        if self.bit_depth != other.bit_depth {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge {}-bit and {}-bit histograms",
                self.bit_depth, other.bit_depth
            )));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Ok(Histogram {
            bit_depth: self.bit_depth,
            counts,
            total: self.total + other.total,
        })
    }

    /// Merges bins down to `target_bits`: bin `j` gathers every input bin
    /// `k` with `k >> (b - t) == j`. Whatever lands in output bin 0 is
    /// reported as `dropped`.
    pub fn rebin(&self, target_bits: u8) -> Result<Binned> {
        if target_bits == 0 || target_bits > self.bit_depth {
            return Err(Error::DepthMismatch(format!(
                "cannot rebin a {}-bit histogram to {target_bits} bits",
                self.bit_depth
            )));
        }
        let shift = self.bit_depth - target_bits;
        let mut counts = vec![0u64; 1 << target_bits];
        for (k, &c) in self.counts.iter().enumerate() {
            counts[k >> shift] += c;
        }
        let dropped = std::mem::take(&mut counts[0]);
        let total = counts.iter().sum();
        Ok(Binned {
            histogram: Histogram {
                bit_depth: target_bits,
                counts,
                total,
            },
            dropped,
        })
    }

    /// Normalized cumulative counts, `values[p] = sum(counts[1..=p]) / N`.
    pub fn normalize_cdf(&self) -> Result<NormalizedCdf> {
        if self.total == 0 {
            return Err(Error::EmptyForeground { image: None });
        }
        let n = self.total as f64;
        let mut cum = 0u64;
        let values = self
            .counts
            .iter()
            .map(|&c| {
                cum += c;
                cum as f64 / n
            })
            .collect();
        Ok(NormalizedCdf {
            bit_depth: self.bit_depth,
            values,
        })
    }

    /// Relative frequencies of bins `1..2^b`, index-aligned with `counts`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::EmptyForeground { image: None });
        }
        let n = self.total as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// Histogram of the masked pixels of `img`.
pub fn fg_histogram(img: &GrayImage, mask: &ForegroundMask) -> Result<Binned> {
    img.require_mono2()?;
    mask.check_matches(img)?;
    let mut histogram = Histogram::empty(img.bit_depth())?;
    let dropped = histogram.accumulate(img.pixels(), mask.flags());
    if histogram.total == 0 {
        return Err(Error::EmptyForeground { image: None });
    }
    Ok(Binned { histogram, dropped })
}

/// Same result as [`fg_histogram`], accumulated over horizontal tiles of
/// `tile_rows` rows in parallel and merged in tile order.
pub fn fg_histogram_tiled(img: &GrayImage, mask: &ForegroundMask, tile_rows: usize) -> Result<Binned> {
    img.require_mono2()?;
    mask.check_matches(img)?;
    let chunk = tile_rows.max(1) * img.width();
    let bits = img.bit_depth();
    let tiles: Vec<(Histogram, u64)> = img
        .pixels()
        .par_chunks(chunk)
        .zip(mask.flags().par_chunks(chunk))
        .map(|(px, fl)| {
            let mut h = Histogram::empty(bits).expect("depth already validated");
            let d = h.accumulate(px, fl);
            (h, d)
        })
        .collect();
    let mut histogram = Histogram::empty(bits)?;
    let mut dropped = 0;
    for (h, d) in &tiles {
        histogram = histogram.merge(h)?;
        dropped += d;
    }
    if histogram.total == 0 {
        return Err(Error::EmptyForeground { image: None });
    }
    Ok(Binned { histogram, dropped })
}

/// Normalized foreground CDF. `values[0] = 0`, nondecreasing, ending at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCdf {
    bit_depth: u8,
    values: Vec<f64>,
}

impl NormalizedCdf {
    /// Validates externally supplied CDF values.
    pub fn from_values(bit_depth: u8, values: Vec<f64>) -> Result<Self> {
        check_depth(bit_depth).map_err(|e| Error::MalformedProfile(e.to_string()))?;
        let bad = |msg: String| Err(Error::MalformedProfile(msg));
        if values.len() != 1 << bit_depth {
            return bad(format!("{} cdf values for bit depth {bit_depth}", values.len()));
        }
        if values[0] != 0.0 {
            return bad(format!("cdf[0] = {} (must be 0)", values[0]));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return bad(format!("cdf[{i}] = {v} outside [0, 1]"));
            }
            if i > 0 && v < values[i - 1] {
                return bad(format!("cdf decreases at index {i}"));
            }
        }
        let last = *values.last().expect("non-empty");
        if (1.0 - last).abs() > TERMINAL_TOLERANCE {
            return bad(format!("terminal cdf value {last} (must be 1)"));
        }
        Ok(NormalizedCdf { bit_depth, values })
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    /// Per-bin probability mass, `values[k] - values[k-1]` (0 at k = 0).
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.values
            .iter()
            .map(|&v| {
                let m = (v - prev).max(0.0);
                prev = v;
                m
            })
            .collect()
    }

    /// Coarsens the CDF to `target_bits` consistently with
    /// [`Histogram::rebin`]: mass landing in the coarse background bin is
    /// removed and the rest renormalized.
    pub fn coarsen(&self, target_bits: u8) -> Result<NormalizedCdf> {
        if target_bits == 0 || target_bits > self.bit_depth {
            return Err(Error::DepthMismatch(format!(
                "cannot coarsen a {}-bit cdf to {target_bits} bits",
                self.bit_depth
            )));
        }
        if target_bits == self.bit_depth {
            return Ok(self.clone());
        }
        let step = 1usize << (self.bit_depth - target_bits);
        let last_of = |j: usize| self.values[(j + 1) * step - 1];
        let floor = last_of(0);
        let remaining = 1.0 - floor;
        if remaining <= 0.0 {
            return Err(Error::EmptyForeground { image: None });
        }
        let bins = 1usize << target_bits;
        let mut values: Vec<f64> = (0..bins)
            .map(|j| {
                if j == 0 {
                    0.0
                } else {
                    ((last_of(j) - floor) / remaining).clamp(0.0, 1.0)
                }
            })
            .collect();
        values[bins - 1] = 1.0;
        Ok(NormalizedCdf {
            bit_depth: target_bits,
            values,
        })
    }

    pub(crate) fn from_raw(bit_depth: u8, values: Vec<f64>) -> Self {
        NormalizedCdf { bit_depth, values }
    }
}
