//! Foreground-only CDF matching for high-bit-depth grayscale images.
//!
//! The pipeline normalizes photometry (MONO1 → MONO2), masks the foreground
//! (`intensity >= min_intensity`), histograms only the masked pixels,
//! matches their normalized CDF against a reference profile, and applies the
//! resulting monotone lookup table inside the mask while leaving the
//! background at zero.
//!
//! ```
//! use fgmatch::{harmonize, reference, GrayImage, HarmonizeOptions};
//! use fgmatch::image::foreground_mask;
//!
//! let src = GrayImage::mono2(4, 1, 8, vec![0, 1, 2, 3]).unwrap();
//! let refimg = GrayImage::mono2(4, 1, 8, vec![2, 4, 4, 6]).unwrap();
//! let mask = foreground_mask(&refimg, 1).unwrap();
//! let profile = reference::build_reference(
//!     &[(refimg, mask)],
//!     reference::AggregationMethod::Averaged,
//!     8,
//!     "low-energy",
//! )
//! .unwrap();
//! let (out, _report) = harmonize(&src, &profile, &HarmonizeOptions::default()).unwrap();
//! assert_eq!(out.pixels(), &[0, 2, 4, 6]);
//! ```

pub mod error;
pub mod formats;
pub mod harmonize;
pub mod histogram;
pub mod image;
pub mod metrics;
pub mod reference;
pub mod synth;

pub use error::{Error, Result};
pub use harmonize::{apply_map, build_map, harmonize, HarmonizeOptions, IntensityMap, RebinPolicy};
pub use histogram::{fg_histogram, Histogram, NormalizedCdf};
pub use image::{foreground_mask, largest_component, to_mono2, Connectivity, ForegroundMask, GrayImage, Photometric};
pub use metrics::{cdf_l1, gap_report, kl_divergence, HarmonizeReport};
pub use reference::{build_reference, load_profile, save_profile, AggregationMethod, ReferenceProfile};
pub use synth::{synth_image, vendor_transform, VendorStyle};
