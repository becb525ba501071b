use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fgmatch::formats::{read_image, write_atomic, write_pgm, Energy, ImageRecord, Provenance};
use fgmatch::metrics::{kl_frequencies, DEFAULT_KL_EPSILON};
use fgmatch::reference::build_reference_from_histograms;
use fgmatch::{
    cdf_l1, fg_histogram, foreground_mask, harmonize, largest_component, load_profile, save_profile, synth_image,
    vendor_transform, Connectivity, Error, GrayImage, HarmonizeReport, Histogram, Photometric, RebinPolicy,
    ReferenceProfile, VendorStyle,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BuildRefArgs, HarmonizeArgs, InspectArgs, MaskArgs, MetricsArgs, SynthArgs, VerifyArgs};
use crate::config::{check_workers, default_workers, read_manifest, JobConfig};
use crate::CliError;

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))
}

fn file_error(path: &Path, e: impl std::fmt::Display) -> String {
    format!("{}: {e}", path.display())
}

/// Joins per-file failures into one data error.
fn data_failures(what: &str, failures: Vec<String>) -> CliError {
    let mut msg = format!("{} {what}:", failures.len());
    for f in failures {
        msg.push_str("\n  ");
        msg.push_str(&f);
    }
    CliError::Data(msg)
}

fn min_intensity(mask: &MaskArgs) -> Result<u16, CliError> {
    match mask.min_intensity.unwrap_or(1) {
        0 => Err(CliError::Usage("--min-intensity must be at least 1".into())),
        k => Ok(k),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(|e| CliError::Data(file_error(p, e))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Foreground histogram of one image at its native depth.
fn masked_histogram(img: GrayImage, min_intensity: u16, keep_largest: bool) -> fgmatch::Result<Histogram> {
    let img = img.to_mono2();
    let mut mask = foreground_mask(&img, min_intensity)?;
    if keep_largest {
        mask = largest_component(&mask, Connectivity::Eight)?;
    }
    Ok(fg_histogram(&img, &mask)?.histogram)
}

pub fn build_ref(a: &BuildRefArgs) -> Result<(), CliError> {
    let workers = check_workers(a.workers.unwrap_or_else(default_workers))?;
    let min = min_intensity(&a.mask)?;
    if let Some(t) = a.target_bits {
        if !(1..=16).contains(&t) {
            return Err(CliError::Usage(format!("--target-bits {t} outside [1, 16]")));
        }
    }
    let mut paths = read_manifest(&a.manifest)?;
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "manifest {} lists no images",
            a.manifest.display()
        )));
    }

    let results: Vec<Result<Histogram, String>> = pool(workers)?.install(|| {
        paths
            .par_iter()
            .map(|p| {
                read_image(p)
                    .and_then(|rec| masked_histogram(rec.image, min, a.mask.keep_largest_component))
                    .map_err(|e| file_error(p, e))
            })
            .collect()
    });
    let mut histograms = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(h) => histograms.push(h),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(data_failures("malformed inputs", failures));
    }

    let target = a
        .target_bits
        .unwrap_or_else(|| histograms.iter().map(Histogram::bit_depth).min().unwrap_or(12).min(12));
    let profile =
        build_reference_from_histograms(&histograms, a.method.into(), target, &a.label).map_err(|e| match e {
            Error::EmptyForeground { image: Some(i) } => CliError::Data(file_error(
                &paths[i],
                format!("no foreground pixels on the {target}-bit grid"),
            )),
            Error::DepthMismatch(_) => CliError::Data(format!(
                "inputs shallower than --target-bits {target}: {}",
                paths
                    .iter()
                    .zip(&histograms)
                    .filter(|(_, h)| h.bit_depth() < target)
                    .map(|(p, _)| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
            other => CliError::Data(other.to_string()),
        })?;
    let profile = match &a.created {
        Some(c) => profile.with_created(c.clone()),
        None => profile,
    };
    save_profile(&profile, &a.out).map_err(|e| CliError::Data(file_error(&a.out, e)))?;
    log::info!(
        "wrote {}-bit {} profile from {} images to {}",
        target,
        profile.method(),
        paths.len(),
        a.out.display()
    );
    Ok(())
}

fn output_path(out_dir: &Path, input: &Path) -> PathBuf {
    let stem = input.file_stem().unwrap_or(input.as_os_str());
    let mut name = stem.to_owned();
    name.push(".pgm");
    out_dir.join(name)
}

fn harmonize_one(
    input: &Path,
    output: &Path,
    profile: &ReferenceProfile,
    job: &JobConfig,
) -> fgmatch::Result<HarmonizeReport> {
    let rec = read_image(input)?;
    let (image, report) = harmonize(&rec.image, profile, &job.options)?;
    let mut out = ImageRecord::new(image, output);
    out.original_photometric = rec.original_photometric;
    out.vendor = rec.vendor;
    out.energy = rec.energy;
    out.provenance = Some(Provenance {
        source: input.display().to_string(),
        profile_label: profile.label().to_string(),
        profile_bit_depth: profile.bit_depth(),
        profile_method: profile.method().to_string(),
        options: job.options.clone(),
        report: report.clone(),
    });
    write_pgm(&out, output)?;
    Ok(report)
}

pub fn harmonize_cmd(a: &HarmonizeArgs) -> Result<(), CliError> {
    let job = JobConfig::from_args(a)?;
    run_job(&job)
}

/// Harmonizes every input of `job`, writes outputs and the CSV report.
pub fn run_job(job: &JobConfig) -> Result<(), CliError> {
    if !job.profile.is_file() {
        return Err(CliError::Usage(format!("profile {} not found", job.profile.display())));
    }
    let profile = load_profile(&job.profile).map_err(|e| CliError::Data(file_error(&job.profile, e)))?;

    let outputs: Vec<PathBuf> = job.inputs.iter().map(|p| output_path(&job.out_dir, p)).collect();
    let mut seen: HashMap<&Path, &Path> = HashMap::new();
    for (input, output) in job.inputs.iter().zip(&outputs) {
        if let Some(other) = seen.insert(output, input) {
            return Err(CliError::Usage(format!(
                "{} and {} would both be written to {}",
                other.display(),
                input.display(),
                output.display()
            )));
        }
    }
    std::fs::create_dir_all(&job.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", job.out_dir.display())))?;

    let results: Vec<Result<HarmonizeReport, String>> = pool(job.workers)?.install(|| {
        job.inputs
            .par_iter()
            .zip(&outputs)
            .map(|(input, output)| harmonize_one(input, output, &profile, job).map_err(|e| file_error(input, e)))
            .collect()
    });

    let mut csv = String::from(HarmonizeReport::CSV_HEADER);
    csv.push('\n');
    let mut failures = Vec::new();
    for (input, r) in job.inputs.iter().zip(results) {
        match r {
            Ok(report) => {
                csv.push_str(&report.csv_row(&input.display().to_string()));
                csv.push('\n');
            }
            Err(e) => {
                log::error!("{e}");
                failures.push(e);
            }
        }
    }
    write_atomic(&job.report, csv.as_bytes()).map_err(|e| CliError::Data(file_error(&job.report, e)))?;
    if !failures.is_empty() {
        return Err(data_failures("of the inputs failed", failures));
    }
    log::info!("harmonized {} images into {}", job.inputs.len(), job.out_dir.display());
    Ok(())
}

pub fn inspect(a: &InspectArgs) -> Result<(), CliError> {
    let min = min_intensity(&a.mask)?;
    let rec = read_image(&a.path).map_err(|e| CliError::Data(file_error(&a.path, e)))?;
    let hist = masked_histogram(rec.image, min, a.mask.keep_largest_component)
        .map_err(|e| CliError::Data(file_error(&a.path, e)))?;
    let cdf = hist
        .normalize_cdf()
        .map_err(|e| CliError::Data(file_error(&a.path, e)))?;
    let mut csv = String::from("bin,count,cdf\n");
    for (bin, (count, c)) in hist.counts().iter().zip(cdf.values()).enumerate() {
        writeln!(csv, "{bin},{count},{c}").expect("writing to a String");
    }
    write_output(a.out.as_deref(), &csv)
}

fn is_image(path: &Path) -> bool {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    matches!(ext.as_deref(), Some("pgm" | "dcm" | "dicom"))
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Usage(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    Ok(paths)
}

#[derive(Debug, Serialize)]
struct ImageMetrics {
    image: String,
    pre_l1: f64,
    post_l1: f64,
    kl_pre: f64,
    kl_post: f64,
}

#[derive(Debug, Serialize)]
struct MetricsSummary {
    images: usize,
    grid_bits: Vec<u8>,
    mean_pre_l1: f64,
    mean_post_l1: f64,
    max_pre_l1: f64,
    max_post_l1: f64,
    mean_kl_pre: f64,
    mean_kl_post: f64,
}

/// CDF distance and KL divergence of one foreground histogram to the profile
/// on the matching grid.
fn distances(hist: &Histogram, grid: u8, profile: &ReferenceProfile) -> fgmatch::Result<(f64, f64)> {
    let h = hist.rebin(grid)?.histogram;
    let reference = profile.cdf().coarsen(grid)?;
    let l1 = cdf_l1(&h.normalize_cdf()?, &reference)?;
    let kl = kl_frequencies(&h.frequencies()?, &reference.masses(), DEFAULT_KL_EPSILON)?;
    Ok((l1, kl))
}

fn image_metrics(
    before: &Path,
    after: &Path,
    profile: &ReferenceProfile,
    policy: RebinPolicy,
    mask: &MaskArgs,
    min: u16,
) -> fgmatch::Result<(ImageMetrics, u8)> {
    let src = read_image(before)?.image;
    let grid = policy.grid_bits(src.bit_depth(), profile.bit_depth())?;
    let pre = masked_histogram(src, min, mask.keep_largest_component)?;
    // harmonized outputs are MONO2 with the background exactly 0
    let post = masked_histogram(read_image(after)?.image, 1, false)?;
    let (pre_l1, kl_pre) = distances(&pre, grid, profile)?;
    let (post_l1, kl_post) = distances(&post, grid, profile)?;
    let image = before.file_name().unwrap_or_default().to_string_lossy().into_owned();
    Ok((
        ImageMetrics {
            image,
            pre_l1,
            post_l1,
            kl_pre,
            kl_post,
        },
        grid,
    ))
}

pub fn metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let workers = check_workers(a.workers.unwrap_or_else(default_workers))?;
    let min = min_intensity(&a.mask)?;
    if !a.profile.is_file() {
        return Err(CliError::Usage(format!("profile {} not found", a.profile.display())));
    }
    let profile = load_profile(&a.profile).map_err(|e| CliError::Data(file_error(&a.profile, e)))?;
    let policy: RebinPolicy = a.rebin.map(Into::into).unwrap_or_default();
    let befores = list_images(&a.before)?;
    if befores.is_empty() {
        return Err(CliError::Usage(format!("no images in {}", a.before.display())));
    }

    let results: Vec<Result<(ImageMetrics, u8), String>> = pool(workers)?.install(|| {
        befores
            .par_iter()
            .map(|b| {
                let after = output_path(&a.after, b);
                if !after.is_file() {
                    return Err(format!(
                        "{}: no harmonized counterpart {}",
                        b.display(),
                        after.display()
                    ));
                }
                image_metrics(b, &after, &profile, policy, &a.mask, min).map_err(|e| file_error(b, e))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut grids = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((m, g)) => {
                rows.push(m);
                grids.push(g);
            }
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(data_failures("images could not be measured", failures));
    }

    let mut csv = String::from("image,pre_l1,post_l1,kl_pre,kl_post\n");
    for m in &rows {
        writeln!(csv, "{},{},{},{},{}", m.image, m.pre_l1, m.post_l1, m.kl_pre, m.kl_post)
            .expect("writing to a String");
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&ImageMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let max = |f: fn(&ImageMetrics) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    grids.sort_unstable();
    grids.dedup();
    let summary = MetricsSummary {
        images: rows.len(),
        grid_bits: grids,
        mean_pre_l1: mean(|m| m.pre_l1),
        mean_post_l1: mean(|m| m.post_l1),
        max_pre_l1: max(|m| m.pre_l1),
        max_post_l1: max(|m| m.post_l1),
        mean_kl_pre: mean(|m| m.kl_pre),
        mean_kl_post: mean(|m| m.kl_post),
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');

    write_output(a.out.as_deref(), &csv)?;
    match &a.report {
        Some(p) => write_atomic(p, json.as_bytes()).map_err(|e| CliError::Data(file_error(p, e))),
        None => {
            eprint!("{json}");
            Ok(())
        }
    }
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let workers = check_workers(a.workers.unwrap_or_else(default_workers))?;
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let label = a.vendor.clone().unwrap_or_else(|| format!("gamma-{}", a.gamma));
    let style = VendorStyle::new(a.gamma, a.gain, a.offset, label).map_err(|e| CliError::Usage(e.to_string()))?;
    let identity = a.gamma == 1.0 && a.gain == 1.0 && a.offset == 0;
    let energy = a
        .energy
        .as_deref()
        .map(str::parse::<Energy>)
        .transpose()
        .map_err(CliError::Usage)?;
    // surface bad dimensions as a usage error before touching the disk
    synth_image(a.seed, a.width, a.height, a.bits).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out.display())))?;

    let results: Vec<Result<(), String>> = pool(workers)?.install(|| {
        (0..a.count)
            .into_par_iter()
            .map(|i| {
                let path = a.out.join(format!("{}{i:04}.pgm", a.prefix));
                let mut img = synth_image(a.seed.wrapping_add(i as u64), a.width, a.height, a.bits)
                    .map_err(|e| file_error(&path, e))?;
                if !identity {
                    img = vendor_transform(&img, &style).map_err(|e| file_error(&path, e))?;
                }
                let mut rec = ImageRecord::new(img, &path);
                rec.vendor = Some(style.label.clone());
                rec.energy = energy;
                write_pgm(&rec, &path).map_err(|e| file_error(&path, e))
            })
            .collect()
    });
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    if !failures.is_empty() {
        return Err(data_failures("phantoms could not be written", failures));
    }
    Ok(())
}

fn looks_like_profile(path: &Path) -> bool {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .is_some_and(|v| v.get("cdf").is_some())
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let path = &a.path;
    if !path.is_file() {
        return Err(CliError::Usage(format!("{} not found", path.display())));
    }
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json && looks_like_profile(path) {
        let p = load_profile(path).map_err(|e| CliError::Data(file_error(path, e)))?;
        println!(
            "ok: profile {:?}, {}-bit, {}, {} images",
            p.label(),
            p.bit_depth(),
            p.method(),
            p.image_count()
        );
        return Ok(());
    }
    let image_path = if is_json { path.with_extension("") } else { path.clone() };
    let rec = read_image(&image_path).map_err(|e| CliError::Data(file_error(&image_path, e)))?;
    let problems = output_problems(&rec);
    if !problems.is_empty() {
        return Err(data_failures(
            &format!("violations in {}", image_path.display()),
            problems,
        ));
    }
    match &rec.provenance {
        Some(p) => println!(
            "ok: {} harmonized against {:?}, {} foreground pixels",
            image_path.display(),
            p.profile_label,
            p.report.foreground_count
        ),
        None => println!("ok: {} (no harmonization record)", image_path.display()),
    }
    Ok(())
}

/// Every invariant a harmonized output and its sidecar must satisfy.
fn output_problems(rec: &ImageRecord) -> Vec<String> {
    let Some(prov) = &rec.provenance else {
        return Vec::new();
    };
    let img = &rec.image;
    let r = &prov.report;
    let mut problems = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            problems.push(msg);
        }
    };
    check(
        img.photometric() == Photometric::Mono2,
        format!("photometric is {}", img.photometric()),
    );
    let nonzero = img.pixels().iter().filter(|&&p| p != 0).count() as u64;
    check(
        nonzero == r.foreground_count,
        format!("{nonzero} nonzero pixels but foreground_count {}", r.foreground_count),
    );
    check(
        (1..=img.bit_depth()).contains(&r.grid_bits),
        format!("grid_bits {} outside [1, {}]", r.grid_bits, img.bit_depth()),
    );
    check(
        r.grid_bits <= prov.profile_bit_depth,
        format!(
            "grid_bits {} deeper than the profile ({})",
            r.grid_bits, prov.profile_bit_depth
        ),
    );
    check(
        r.rebin_applied == (r.grid_bits != img.bit_depth()),
        format!("rebin_applied {} with grid_bits {}", r.rebin_applied, r.grid_bits),
    );
    for (name, d) in [("pre_distance", r.pre_distance), ("post_distance", r.post_distance)] {
        check((0.0..=1.0).contains(&d), format!("{name} {d} outside [0, 1]"));
    }
    check(prov.options.min_intensity >= 1, "min_intensity is 0".to_string());
    check(
        r.foreground_count > r.dropped_zero_valued + r.rebin_remainder,
        "no foreground pixels reached the histogram".to_string(),
    );

    // when the source is still around, the output's nonzero set must match
    // the source's thresholded foreground (a subset of it with component
    // filtering)
    if let Ok(src) = read_image(Path::new(&prov.source)) {
        let src = src.image.to_mono2();
        if (src.width(), src.height(), src.bit_depth()) != (img.width(), img.height(), img.bit_depth()) {
            check(false, format!("geometry differs from source {}", prov.source));
        } else {
            let min = prov.options.min_intensity;
            let exact = !prov.options.keep_largest_component;
            let bad = src
                .pixels()
                .iter()
                .zip(img.pixels())
                .filter(|&(&s, &o)| {
                    let eligible = s >= min;
                    (o != 0 && !eligible) || (exact && eligible && o == 0)
                })
                .count();
            check(bad == 0, format!("{bad} pixels disagree with the source foreground"));
        }
    }
    problems
}
