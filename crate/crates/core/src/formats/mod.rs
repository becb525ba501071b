//! Image ingestion and emission: binary PGM with a JSON sidecar, and a
//! read-only subset of uncompressed DICOM.

pub mod dicom;
pub mod pgm;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonize::HarmonizeOptions;
use crate::image::{GrayImage, Photometric};
use crate::metrics::HarmonizeReport;

pub use dicom::read_dicom;
pub use pgm::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Energy {
    Low,
    High,
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Energy::Low => "low",
            Energy::High => "high",
        })
    }
}

impl FromStr for Energy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "low" => Ok(Energy::Low),
            "high" => Ok(Energy::High),
            other => Err(format!("unknown energy {other:?}")),
        }
    }
}

/// Where a harmonized image came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub profile_label: String,
    pub profile_bit_depth: u8,
    pub profile_method: String,
    pub options: HarmonizeOptions,
    pub report: HarmonizeReport,
}

/// JSON metadata stored next to a PGM as `<file>.pgm.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub photometric: Photometric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_photometric: Option<Photometric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vendor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<Energy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonization: Option<Provenance>,
}

pub fn sidecar_path(image_path: &Path) -> PathBuf {
    let mut s = image_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    pub image: GrayImage,
    pub source_path: PathBuf,
    pub vendor: Option<String>,
    pub energy: Option<Energy>,
    pub original_photometric: Photometric,
    pub provenance: Option<Provenance>,
}

impl ImageRecord {
    pub fn new(image: GrayImage, source_path: impl Into<PathBuf>) -> Self {
        ImageRecord {
            original_photometric: image.photometric(),
            image,
            source_path: source_path.into(),
            vendor: None,
            energy: None,
            provenance: None,
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            photometric: self.image.photometric(),
            original_photometric: Some(self.original_photometric),
            vendor: self.vendor.clone(),
            energy: self.energy,
            harmonization: self.provenance.clone(),
        }
    }
}

/// Reads a P5 PGM. Its photometric interpretation and metadata come from the
/// sidecar when one exists; otherwise the image is taken as MONO2.
pub fn read_pgm(path: &Path) -> Result<ImageRecord> {
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        Some(read_sidecar(&side)?)
    } else {
        None
    };
    let photometric = sidecar.as_ref().map_or(Photometric::Mono2, |s| s.photometric);
    let data = std::fs::read(path)?;
    let image = pgm::decode_pgm(&data, photometric, path)?;
    let mut record = ImageRecord::new(image, path);
    if let Some(s) = sidecar {
        record.original_photometric = s.original_photometric.unwrap_or(s.photometric);
        record.vendor = s.vendor;
        record.energy = s.energy;
        record.provenance = s.harmonization;
    }
    Ok(record)
}

/// Writes the image as P5 plus its JSON sidecar, each atomically.
pub fn write_pgm(record: &ImageRecord, path: &Path) -> Result<()> {
    write_atomic(path, &pgm::encode_pgm(&record.image))?;
    let mut json = serde_json::to_string_pretty(&record.sidecar())?;
    json.push('\n');
    write_atomic(&sidecar_path(path), json.as_bytes())
}

/// Reads PGM or DICOM, chosen by content (the DICOM preamble) and extension.
pub fn read_image(path: &Path) -> Result<ImageRecord> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => read_pgm(path),
        Some("dcm") | Some("dicom") => read_dicom(path),
        _ => {
            let head = std::fs::read(path)?;
            if head.len() >= 132 && &head[128..132] == b"DICM" {
                read_dicom(path)
            } else {
                read_pgm(path)
            }
        }
    }
}
