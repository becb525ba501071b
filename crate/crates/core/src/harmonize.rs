//! Monotone intensity maps from CDF matching, their masked application, and
//! the end-to-end foreground-only harmonization pipeline.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{fg_histogram, Histogram, NormalizedCdf};
use crate::image::{foreground_mask, largest_component, Connectivity, ForegroundMask, GrayImage, Photometric};
use crate::metrics::{cdf_l1, HarmonizeReport};
use crate::reference::ReferenceProfile;

/// Bit depth of the common matching grid used when depths differ.
pub const COMMON_GRID_BITS: u8 = 12;

/// Lookup table from source to reference intensities.
///
/// `table[0] = 0`, every other entry lies in `[1, 2^b - 1]`, and the table is
/// nondecreasing on `1..2^b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntensityMap {
    bit_depth: u8,
    table: Vec<u16>,
}

impl IntensityMap {
    pub fn from_table(bit_depth: u8, table: Vec<u16>) -> Result<Self> {
        if table.len() != 1usize << bit_depth {
            return Err(Error::DimensionMismatch(format!(
                "{} map entries for bit depth {bit_depth}",
                table.len()
            )));
        }
        if table[0] != 0 {
            return Err(Error::NonMonotoneMap { index: 0 });
        }
        let max = (table.len() - 1) as u16;
        for p in 1..table.len() {
            let v = table[p];
            if v == 0 || v > max || (p > 1 && v < table[p - 1]) {
                return Err(Error::NonMonotoneMap { index: p });
            }
        }
        Ok(IntensityMap { bit_depth, table })
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn table(&self) -> &[u16] {
        &self.table
    }

    #[inline]
    pub fn get(&self, p: u16) -> u16 {
        self.table[usize::from(p)]
    }
}

/// Smallest `q >= first` minimizing `|s - reference[q]|`, given a
/// nondecreasing `reference` and the first index `lower` (`>= first`) with
/// `reference[lower] >= s` (`reference.len()` if none).
fn closest_index(s: f64, reference: &[f64], first: usize, lower: usize) -> usize {
    let right = reference.get(lower).map(|&r| (s - r).abs());
    if lower > first {
        let left = (s - reference[lower - 1]).abs();
        if right.is_none_or(|d| left <= d) {
            // below `lower` the distance is nonincreasing in q, so the
            // smallest tied index is found by bisection
            return first + reference[first..lower].partition_point(|&r| (s - r).abs() > left);
        }
    }
    lower
}

/// Matching table over `first..len` for a nondecreasing `source`.
fn sweep(source: &[f64], reference: &[f64], first: usize) -> Vec<u16> {
    let mut table = vec![0u16; source.len()];
    let mut lower = first;
    for (p, &s) in source.iter().enumerate().skip(first) {
        while lower < reference.len() && reference[lower] < s {
            lower += 1;
        }
        table[p] = closest_index(s, reference, first, lower) as u16;
    }
    table
}

/// Builds the CDF-matching map: for every `p >= 1`, the smallest
/// `q in 1..2^b` minimizing `|source(p) - reference(q)|`.
///
/// Runs as a single two-pointer sweep over both CDFs.
pub fn build_map(source: &NormalizedCdf, reference: &NormalizedCdf) -> Result<IntensityMap> {
    if source.bit_depth() != reference.bit_depth() {
        return Err(Error::DimensionMismatch(format!(
            "source cdf is {}-bit, reference cdf is {}-bit",
            source.bit_depth(),
            reference.bit_depth()
        )));
    }
    let table = sweep(source.values(), reference.values(), 1);
    IntensityMap::from_table(source.bit_depth(), table)
}

/// Output pixel is `map[pixel]` inside the mask and 0 outside it.
pub fn apply_map(img: &GrayImage, mask: &ForegroundMask, map: &IntensityMap) -> Result<GrayImage> {
    img.require_mono2()?;
    mask.check_matches(img)?;
    if map.bit_depth() != img.bit_depth() {
        return Err(Error::DimensionMismatch(format!(
            "{}-bit map applied to a {}-bit image",
            map.bit_depth(),
            img.bit_depth()
        )));
    }
    let table = map.table();
    let pixels = img
        .pixels()
        .iter()
        .zip(mask.flags())
        .map(|(&p, &f)| if f { table[usize::from(p)] } else { 0 })
        .collect();
    Ok(img.with_pixels(pixels))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RebinPolicy {
    /// Native when image and profile depths agree, common 12-bit grid otherwise.
    #[default]
    Auto,
    /// Match at the image's own depth; the profile must be at least as deep.
    Native,
    /// Match on a grid of `min(b_image, b_profile, 12)` bits.
    Common12,
}

impl RebinPolicy {
    fn name(self) -> &'static str {
        match self {
            RebinPolicy::Auto => "auto",
            RebinPolicy::Native => "native",
            RebinPolicy::Common12 => "common12",
        }
    }

    /// Bit depth of the grid on which CDFs are matched.
    pub fn grid_bits(self, image_bits: u8, profile_bits: u8) -> Result<u8> {
        match self {
            RebinPolicy::Auto if image_bits == profile_bits => Ok(image_bits),
            RebinPolicy::Auto | RebinPolicy::Common12 => Ok(image_bits.min(profile_bits).min(COMMON_GRID_BITS)),
            RebinPolicy::Native if profile_bits >= image_bits => Ok(image_bits),
            RebinPolicy::Native => Err(Error::ProfileDepthMismatch {
                profile: profile_bits,
                image: image_bits,
                policy: self.name(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarmonizeOptions {
    pub min_intensity: u16,
    pub keep_largest_component: bool,
    pub rebin_policy: RebinPolicy,
}

impl Default for HarmonizeOptions {
    fn default() -> Self {
        HarmonizeOptions {
            min_intensity: 1,
            keep_largest_component: false,
            rebin_policy: RebinPolicy::Auto,
        }
    }
}

/// Expands a map computed on a `coarse`-bit grid back to `native_bits`.
///
/// Each native value goes through its coarse bin; the coarse result lands on
/// the centre of its native bin range. Native values that fall into the
/// coarse background bin (but are foreground at native depth) use
/// `background_bin_target`, the match for a source CDF value of 0.
fn expand_map(coarse: &IntensityMap, native_bits: u8, background_bin_target: u16) -> Result<IntensityMap> {
    let shift = native_bits - coarse.bit_depth();
    let max = (1u32 << native_bits) - 1;
    let scale = f64::from(1u32 << shift);
    let centre = |q: u16| -> u16 {
        let v = ((f64::from(q) + 0.5) * scale).floor() as u32;
        v.clamp(1, max) as u16
    };
    let table = (0..=max)
        .map(|p| {
            if p == 0 {
                return 0;
            }
            let j = (p >> shift) as usize;
            let q = if j == 0 {
                background_bin_target
            } else {
                coarse.table()[j]
            };
            centre(q)
        })
        .collect();
    IntensityMap::from_table(native_bits, table)
}

/// Foreground-only CDF matching of `img` against `profile`.
///
/// MONO1 input is complemented first. Returns the harmonized image (same
/// depth as the input, MONO2) together with a report.
pub fn harmonize(
    img: &GrayImage,
    profile: &ReferenceProfile,
    opts: &HarmonizeOptions,
) -> Result<(GrayImage, HarmonizeReport)> {
    if opts.min_intensity == 0 {
        return Err(Error::InvalidImage("min_intensity must be at least 1".into()));
    }
    let img: Cow<GrayImage> = match img.photometric() {
        Photometric::Mono2 => Cow::Borrowed(img),
        Photometric::Mono1 => Cow::Owned(img.clone().to_mono2()),
    };
    let bits = img.bit_depth();
    let mut warnings = Vec::new();

    let mut mask = foreground_mask(&img, opts.min_intensity)?;
    if opts.keep_largest_component {
        mask = largest_component(&mask, Connectivity::Eight)?;
    }
    let native = fg_histogram(&img, &mask)?;
    let grid = opts.rebin_policy.grid_bits(bits, profile.bit_depth())?;
    let source = native.histogram.rebin(grid)?;
    if source.histogram.total() == 0 {
        return Err(Error::EmptyForeground { image: None });
    }
    let source_cdf = source.histogram.normalize_cdf()?;
    let reference_cdf = profile.cdf().coarsen(grid)?;
    if reference_cdf.masses().iter().filter(|&&m| m > 0.0).count() == 1 {
        warnings
            .push("reference occupies a single bin; foreground collapses onto that bin and intensity 1".to_string());
    }

    let grid_map = build_map(&source_cdf, &reference_cdf)?;
    let map = if grid == bits {
        grid_map
    } else {
        // a source CDF value of 0 always matches q = 1
        expand_map(&grid_map, bits, 1)?
    };
    let out = apply_map(&img, &mask, &map)?;

    let zeroed_outside_mask = img
        .pixels()
        .iter()
        .zip(mask.flags())
        .filter(|(&p, &f)| p != 0 && !f)
        .count() as u64;
    if zeroed_outside_mask > 0 {
        warnings.push(format!(
            "{zeroed_outside_mask} nonzero pixels outside the mask were set to 0"
        ));
    }
    if native.dropped + source.dropped > 0 {
        warnings.push(format!(
            "{} masked pixels dropped from the histogram (zero-valued: {}, below the first grid bin: {})",
            native.dropped + source.dropped,
            native.dropped,
            source.dropped
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut post = Histogram::empty(bits)?;
    post.accumulate(out.pixels(), mask.flags());
    let post_cdf = post.rebin(grid)?.histogram.normalize_cdf()?;

    let report = HarmonizeReport {
        foreground_count: mask.count() as u64,
        dropped_zero_valued: native.dropped,
        rebin_remainder: source.dropped,
        zeroed_outside_mask,
        pre_distance: cdf_l1(&source_cdf, &reference_cdf)?,
        post_distance: cdf_l1(&post_cdf, &reference_cdf)?,
        rebin_applied: grid != bits,
        grid_bits: grid,
        warnings,
    };
    Ok((out, report))
}

/// Conventional whole-image histogram matching of `img` to `reference`,
/// background included. Kept for comparison against the foreground-only
/// pipeline; not used by it.
pub fn match_whole_image(img: &GrayImage, reference: &GrayImage) -> Result<GrayImage> {
    img.require_mono2()?;
    reference.require_mono2()?;
    if img.bit_depth() != reference.bit_depth() {
        return Err(Error::DepthMismatch(format!(
            "{}-bit image vs {}-bit reference",
            img.bit_depth(),
            reference.bit_depth()
        )));
    }
    let whole_cdf = |im: &GrayImage| -> Vec<f64> {
        let mut counts = vec![0u64; 1 << im.bit_depth()];
        for &p in im.pixels() {
            counts[usize::from(p)] += 1;
        }
        let n = im.len() as f64;
        let mut cum = 0;
        counts
            .iter()
            .map(|&c| {
                cum += c;
                cum as f64 / n
            })
            .collect()
    };
    let table = sweep(&whole_cdf(img), &whole_cdf(reference), 0);
    Ok(img.with_pixels(img.pixels().iter().map(|&p| table[usize::from(p)]).collect()))
}
