//! Harmonization job configuration: command-line flags merged over an
//! optional TOML file.

use std::path::{Path, PathBuf};

use fgmatch::{HarmonizeOptions, RebinPolicy};
use serde::Deserialize;

use crate::args::HarmonizeArgs;
use crate::CliError;

/// Contents of a `--config` file. Relative paths are resolved against the
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub profile: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub report: Option<PathBuf>,
    pub min_intensity: Option<u16>,
    pub keep_largest_component: Option<bool>,
    pub rebin: Option<RebinPolicy>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.inputs.iter_mut().for_each(resolve);
        cfg.manifest.iter_mut().for_each(resolve);
        cfg.profile.iter_mut().for_each(resolve);
        cfg.out.iter_mut().for_each(resolve);
        cfg.report.iter_mut().for_each(resolve);
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    /// Sorted, deduplicated input images.
    pub inputs: Vec<PathBuf>,
    pub profile: PathBuf,
    pub out_dir: PathBuf,
    pub options: HarmonizeOptions,
    pub workers: usize,
    pub report: PathBuf,
}

/// Reads a manifest: one path per line, blank lines and `#` comments
/// ignored, relative paths taken from the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        })
        .collect())
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn check_workers(workers: usize) -> Result<usize, CliError> {
    if workers == 0 {
        Err(CliError::Usage("--workers must be at least 1".into()))
    } else {
        Ok(workers)
    }
}

impl JobConfig {
    pub fn from_args(args: &HarmonizeArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };

        let mut inputs = args.inputs.clone();
        if let Some(m) = args.manifest.as_ref().or(file.manifest.as_ref()) {
            inputs.extend(read_manifest(m)?);
        }
        if args.inputs.is_empty() && args.manifest.is_none() {
            inputs.extend(file.inputs.iter().cloned());
        }
        inputs.sort();
        inputs.dedup();
        if inputs.is_empty() {
            return Err(CliError::Usage("no input images given".into()));
        }

        let profile = args
            .profile
            .clone()
            .or(file.profile)
            .ok_or_else(|| CliError::Usage("--profile is required".into()))?;
        let out_dir = args
            .out
            .clone()
            .or(file.out)
            .ok_or_else(|| CliError::Usage("--out is required".into()))?;
        let workers = check_workers(args.workers.or(file.workers).unwrap_or_else(default_workers))?;
        let report = args
            .report
            .clone()
            .or(file.report)
            .unwrap_or_else(|| out_dir.join("report.csv"));

        let defaults = HarmonizeOptions::default();
        let options = HarmonizeOptions {
            min_intensity: args
                .mask
                .min_intensity
                .or(file.min_intensity)
                .unwrap_or(defaults.min_intensity),
            keep_largest_component: args.mask.keep_largest_component
                || file.keep_largest_component.unwrap_or(defaults.keep_largest_component),
            rebin_policy: args
                .rebin
                .map(Into::into)
                .or(file.rebin)
                .unwrap_or(defaults.rebin_policy),
        };
        if options.min_intensity == 0 {
            return Err(CliError::Usage("--min-intensity must be at least 1".into()));
        }

        let job = JobConfig {
            inputs,
            profile,
            out_dir,
            options,
            workers,
            report,
        };
        job.validate()?;
        Ok(job)
    }

    /// The output directory may not hold any of the inputs, so outputs can
    /// never overwrite them.
    pub fn validate(&self) -> Result<(), CliError> {
        let out = std::fs::canonicalize(&self.out_dir).unwrap_or_else(|_| self.out_dir.clone());
        for input in &self.inputs {
            let parent = input
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            let parent = std::fs::canonicalize(parent).unwrap_or_else(|_| parent.to_path_buf());
            if parent == out {
                return Err(CliError::Usage(format!(
                    "output directory {} contains input {}",
                    self.out_dir.display(),
                    input.display()
                )));
            }
        }
        Ok(())
    }
}
