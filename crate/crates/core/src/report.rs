//! Supervision reports over mix manifests.
//!
//! Counts the labeled pixels each class received through pasted patches,
//! optionally next to a baseline run (usually uniform-patch selection at the
//! same seed), and renders a bar histogram plus per-sample composites.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cut::cut_cells;
use crate::error::{BdmError, Result};
use crate::io::{palette_color, read_image, read_label, sample_paths, write_bytes, write_image};
use crate::manifest::{Manifest, ManifestEntry};
use crate::stats::ClassStats;
use crate::types::{Image, LabelMap, Rect, Sample};

pub const CSV_FILE: &str = "supervision.csv";
pub const HISTOGRAM_FILE: &str = "supervision.png";
pub const COMPOSITES_DIR: &str = "composites";

/// Pasted pixels per class, summed over a manifest's provenance records.
pub fn pasted_supervision(manifest: &Manifest) -> Vec<u64> {
    let k = manifest.header.config.num_classes;
    let mut counts = vec![0u64; k];
    for rec in manifest.entries.iter().flat_map(|e| &e.provenance) {
        for (c, n) in rec.pasted_pixels.iter().enumerate().take(k) {
            counts[c] += n;
        }
    }
    counts
}

pub fn shares(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&n| {
            if total == 0 {
                0.0
            } else {
                n as f64 / total as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub class: usize,
    pub pasted_pixels: u64,
    pub share: f64,
    pub baseline_pixels: Option<u64>,
    pub baseline_share: Option<f64>,
    pub dataset_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupervisionReport {
    pub rows: Vec<ClassRow>,
    pub warnings: Vec<String>,
}

impl SupervisionReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(max - min) / max` over pasted counts, 0 when empty.
    pub fn relative_spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.pasted_pixels).max().unwrap_or(0);
        let min = self.rows.iter().map(|r| r.pasted_pixels).min().unwrap_or(0);
        if max == 0 {
            0.0
        } else {
            (max - min) as f64 / max as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "class,pasted_pixels,share,baseline_pixels,baseline_share,dataset_share\n",
        );
        let opt_u = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        let opt_f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{},{},{}",
                r.class,
                r.pasted_pixels,
                r.share,
                opt_u(r.baseline_pixels),
                opt_f(r.baseline_share),
                opt_f(r.dataset_share)
            );
        }
        out
    }
}

/// Builds the per-class table. An absent or entry-less manifest yields an
/// empty report with a warning.
pub fn supervision_report(
    manifest: Option<&Manifest>,
    baseline: Option<&Manifest>,
    stats: Option<&ClassStats>,
) -> Result<SupervisionReport> {
    let Some(m) = manifest.filter(|m| !m.entries.is_empty()) else {
        return Ok(SupervisionReport {
            rows: Vec::new(),
            warnings: vec!["manifest has no mixed samples; report is empty".into()],
        });
    };
    let k = m.header.config.num_classes;
    let mut warnings = Vec::new();
    let counts = pasted_supervision(m);
    let share = shares(&counts);
    let base = match baseline {
        Some(b) if b.header.config.num_classes != k => {
            return Err(BdmError::data(format!(
                "baseline manifest has {} classes, manifest has {k}",
                b.header.config.num_classes
            )))
        }
        Some(b) if b.entries.is_empty() => {
            warnings.push("baseline manifest has no mixed samples".into());
            None
        }
        Some(b) => Some(pasted_supervision(b)),
        None => None,
    };
    let base_share = base.as_deref().map(shares);
    let dataset_share = match stats {
        Some(s) if s.num_classes != k => {
            return Err(BdmError::data(format!(
                "stats have {} classes, manifest has {k}",
                s.num_classes
            )))
        }
        Some(s) => Some(shares(&s.pixel_counts)),
        None => None,
    };
    let rows = (0..k)
        .map(|c| ClassRow {
            class: c,
            pasted_pixels: counts[c],
            share: share[c],
            baseline_pixels: base.as_ref().map(|b| b[c]),
            baseline_share: base_share.as_ref().map(|b| b[c]),
            dataset_share: dataset_share.as_ref().map(|d| d[c]),
        })
        .collect();
    Ok(SupervisionReport { rows, warnings })
}

const BAR_W: u32 = 10;
const GAP: u32 = 6;
const PLOT_H: u32 = 160;
const MARGIN: u32 = 8;

/// Grouped bar chart: per class, the mixed-run share in the class colour and
/// the baseline share in grey beside it. Bars scale to the largest share.
pub fn render_histogram(report: &SupervisionReport) -> Image {
    let k = report.rows.len() as u32;
    let group = 2 * BAR_W + GAP;
    let width = 2 * MARGIN + k.max(1) * group;
    let height = 2 * MARGIN + PLOT_H;
    let mut img = Image::filled(width, height, [255, 255, 255]);
    let top = report
        .rows
        .iter()
        .flat_map(|r| [r.share, r.baseline_share.unwrap_or(0.0)])
        .fold(0.0f64, f64::max);
    let base_y = MARGIN + PLOT_H;
    let mut bar = |x: u32, share: f64, color: [u8; 3]| {
        let h = if top > 0.0 {
            (share / top * PLOT_H as f64).round() as u32
        } else {
            0
        };
        for y in base_y - h..base_y {
            for dx in 0..BAR_W {
                img.put_pixel(x + dx, y, color);
            }
        }
    };
    for (i, r) in report.rows.iter().enumerate() {
        let x = MARGIN + i as u32 * group;
        bar(x, r.share, palette_color(r.class as u8));
        if let Some(b) = r.baseline_share {
            bar(x + BAR_W, b, [150, 150, 150]);
        }
    }
    for x in MARGIN..width - MARGIN {
        img.put_pixel(x, base_y, [0, 0, 0]);
    }
    img
}

pub fn colorize(label: &LabelMap) -> Image {
    let mut img = Image::filled(label.width(), label.height(), [0, 0, 0]);
    for y in 0..label.height() {
        for x in 0..label.width() {
            img.put_pixel(x, y, palette_color(label.get(x, y)));
        }
    }
    img
}

/// Tiles equally sized images into a grid with `cols` columns.
fn tile(images: &[Image], cols: usize) -> Result<Image> {
    let (w, h) = images
        .first()
        .map(|i| i.dims())
        .ok_or_else(|| BdmError::Invariant("nothing to tile".into()))?;
    let rows = images.len().div_ceil(cols);
    let mut out = Image::filled(w * cols as u32, h * rows as u32, [0, 0, 0]);
    for (i, img) in images.iter().enumerate() {
        let rect = Rect::new((i % cols) as u32 * w, (i / cols) as u32 * h, w, h);
        out.paste(&rect, img)?;
    }
    Ok(out)
}

/// Original, cut and mixed views side by side; images on top, labels below.
pub fn composite(
    original: &Sample,
    cut: &Sample,
    mixed_image: &Image,
    mixed_label: &LabelMap,
) -> Result<Image> {
    tile(
        &[
            original.image.clone(),
            cut.image.clone(),
            mixed_image.clone(),
            colorize(&original.label),
            colorize(&cut.label),
            colorize(mixed_label),
        ],
        3,
    )
}

/// Composite for one manifest entry, reading the original from the dataset
/// recorded in the header and the mixed output from `run_dir`.
pub fn entry_composite(
    manifest: &Manifest,
    entry: &ManifestEntry,
    run_dir: &Path,
) -> Result<Image> {
    let root = match entry.direction.as_str() {
        "S" => &manifest.header.source_dir,
        _ => &manifest.header.target_dir,
    };
    let paths = sample_paths(Path::new(root), &entry.sample_id);
    let original = Sample::new(
        entry.sample_id.clone(),
        read_image(&paths.image)?,
        read_label(&paths.label)?,
        None,
    )?;
    let grid = manifest
        .header
        .config
        .grid_for(original.width(), original.height())?;
    let mut cut = original.clone();
    cut_cells(&mut cut, &grid, &entry.cut_plan.cut_cells)?;
    let mixed_image = read_image(&run_dir.join(&entry.image))?;
    let mixed_label = read_label(&run_dir.join(&entry.label))?;
    composite(&original, &cut, &mixed_image, &mixed_label)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WrittenReport {
    pub report: SupervisionReport,
    pub files: Vec<PathBuf>,
}

/// Writes the CSV, the histogram (when non-empty) and up to `composites`
/// composite images. Composites whose inputs cannot be read are skipped with
/// a warning.
pub fn write_report(
    manifest: Option<&Manifest>,
    manifest_dir: &Path,
    baseline: Option<&Manifest>,
    stats: Option<&ClassStats>,
    composites: usize,
    out_dir: &Path,
) -> Result<WrittenReport> {
    let mut report = supervision_report(manifest, baseline, stats)?;
    let mut files = Vec::new();
    let csv = out_dir.join(CSV_FILE);
    write_bytes(&csv, report.to_csv().as_bytes())?;
    files.push(csv);
    if let (false, Some(m)) = (report.is_empty(), manifest) {
        let hist = out_dir.join(HISTOGRAM_FILE);
        write_image(&hist, &render_histogram(&report))?;
        files.push(hist);
        for entry in m.entries.iter().take(composites) {
            match entry_composite(m, entry, manifest_dir) {
                Ok(img) => {
                    let name = format!(
                        "{:06}_{}_{}.png",
                        entry.pair_index, entry.direction, entry.sample_id
                    );
                    let path = out_dir.join(COMPOSITES_DIR).join(name);
                    write_image(&path, &img)?;
                    files.push(path);
                }
                Err(e) => report
                    .warnings
                    .push(format!("composite for {} skipped: {e}", entry.sample_id)),
            }
        }
    }
    Ok(WrittenReport { report, files })
}
