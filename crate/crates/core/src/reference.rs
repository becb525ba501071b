//! Reference (target-style) foreground CDFs built from a set of images, and
//! their versioned JSON serialization.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{fg_histogram, Histogram, NormalizedCdf};
use crate::image::{ForegroundMask, GrayImage};

pub const PROFILE_VERSION: u32 = 1;

/// How per-image distributions are combined into one reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMethod {
    /// Equal-weight average of per-image CDFs.
    #[default]
    Averaged,
    /// One CDF of the merged histograms; large foregrounds weigh more.
    Pooled,
}

impl fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMethod::Averaged => "averaged",
            AggregationMethod::Pooled => "pooled",
        })
    }
}

impl FromStr for AggregationMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "averaged" => Ok(AggregationMethod::Averaged),
            "pooled" => Ok(AggregationMethod::Pooled),
            other => Err(format!("unknown aggregation method {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceProfile {
    cdf: NormalizedCdf,
    image_count: usize,
    method: AggregationMethod,
    label: String,
    created: Option<String>,
}

/// On-disk layout, field order as written.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    version: u32,
    bit_depth: u8,
    method: AggregationMethod,
    image_count: usize,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created: Option<String>,
    cdf: Vec<f64>,
}

impl ReferenceProfile {
    pub fn new(
        cdf: NormalizedCdf,
        image_count: usize,
        method: AggregationMethod,
        label: impl Into<String>,
    ) -> Result<Self> {
        if image_count == 0 {
            return Err(Error::MalformedProfile("image_count must be at least 1".into()));
        }
        Ok(ReferenceProfile {
            cdf,
            image_count,
            method,
            label: label.into(),
            created: None,
        })
    }

    /// Attaches a creation timestamp. Left unset, the serialized profile is a
    /// pure function of its inputs.
    pub fn with_created(mut self, created: impl Into<String>) -> Self {
        self.created = Some(created.into());
        self
    }

    pub fn bit_depth(&self) -> u8 {
        self.cdf.bit_depth()
    }

    pub fn cdf(&self) -> &NormalizedCdf {
        &self.cdf
    }

    pub fn image_count(&self) -> usize {
        self.image_count
    }

    pub fn method(&self) -> AggregationMethod {
        self.method
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn created(&self) -> Option<&str> {
        self.created.as_deref()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ProfileDoc {
            version: PROFILE_VERSION,
            bit_depth: self.bit_depth(),
            method: self.method,
            image_count: self.image_count,
            label: self.label.clone(),
            created: self.created.clone(),
            cdf: self.cdf.values().to_vec(),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and re-validates a profile document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_str(text).map_err(|e| Error::MalformedProfile(e.to_string()))?;
        if doc.version != PROFILE_VERSION {
            return Err(Error::MalformedProfile(format!("unsupported version {}", doc.version)));
        }
        let cdf = NormalizedCdf::from_values(doc.bit_depth, doc.cdf)?;
        let mut profile = ReferenceProfile::new(cdf, doc.image_count, doc.method, doc.label)?;
        profile.created = doc.created;
        Ok(profile)
    }
}

pub fn save_profile(profile: &ReferenceProfile, path: &Path) -> Result<()> {
    fs::write(path, profile.to_json()?)?;
    Ok(())
}

pub fn load_profile(path: &Path) -> Result<ReferenceProfile> {
    ReferenceProfile::from_json(&fs::read_to_string(path)?)
}

/// Builds a reference from foreground histograms, each rebinned to
/// `target_bits` first. Aggregation runs in input order.
pub fn build_reference_from_histograms(
    histograms: &[Histogram],
    method: AggregationMethod,
    target_bits: u8,
    label: &str,
) -> Result<ReferenceProfile> {
    if histograms.is_empty() {
        return Err(Error::EmptyForeground { image: None });
    }
    let rebinned = histograms
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let r = h.rebin(target_bits).map_err(|_| {
                Error::DepthMismatch(format!(
                    "image #{i} is {}-bit, cannot build a {target_bits}-bit reference",
                    h.bit_depth()
                ))
            })?;
            if r.histogram.total() == 0 {
                return Err(Error::EmptyForeground { image: Some(i) });
            }
            Ok(r.histogram)
        })
        .collect::<Result<Vec<_>>>()?;

    let cdf = match method {
        AggregationMethod::Pooled => {
            let mut pooled = Histogram::empty(target_bits)?;
            for h in &rebinned {
                pooled = pooled.merge(h)?;
            }
            pooled.normalize_cdf()?
        }
        AggregationMethod::Averaged => {
            let cdfs = rebinned
                .par_iter()
                .map(Histogram::normalize_cdf)
                .collect::<Result<Vec<_>>>()?;
            let mut sum = vec![0.0f64; 1 << target_bits];
            for c in &cdfs {
                for (s, v) in sum.iter_mut().zip(c.values()) {
                    *s += v;
                }
            }
            let n = cdfs.len() as f64;
            NormalizedCdf::from_raw(target_bits, sum.into_iter().map(|s| s / n).collect())
        }
    };
    ReferenceProfile::new(cdf, histograms.len(), method, label)
}

/// Builds a reference from masked MONO2 images.
pub fn build_reference(
    images: &[(GrayImage, ForegroundMask)],
    method: AggregationMethod,
    target_bits: u8,
    label: &str,
) -> Result<ReferenceProfile> {
    let histograms = images
        .par_iter()
        .enumerate()
        .map(|(i, (img, mask))| {
            fg_histogram(img, mask).map(|b| b.histogram).map_err(|e| match e {
                Error::EmptyForeground { .. } => Error::EmptyForeground { image: Some(i) },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_reference_from_histograms(&histograms, method, target_bits, label)
}
