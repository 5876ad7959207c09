//! Pixel planes, samples, grid geometry and mixing configuration.
//!
//! Everything here is plain data: no I/O and no randomness. Planes are stored
//! row-major, so pixel `(x, y)` lives at index `y * width + x`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BdmError, Result};

/// Reserved label value for pixels excluded from supervision.
pub const IGNORE: u8 = 255;

/// Largest supported class count. `IGNORE` must stay outside `0..K`.
pub const MAX_CLASSES: usize = 254;

/// An axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn right(&self) -> u32 {
        self.x + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.height
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }
}

fn check_len(width: u32, height: u32, len: usize, what: &str) -> Result<()> {
    let expected = width as usize * height as usize;
    if len != expected {
        return Err(BdmError::data(format!(
            "{what}: buffer holds {len} values but {width}x{height} needs {expected}"
        )));
    }
    Ok(())
}

fn check_rect(rect: &Rect, width: u32, height: u32) -> Result<()> {
    if !rect.fits_in(width, height) {
        return Err(BdmError::OutOfRange(format!(
            "rect {rect:?} exceeds {width}x{height} plane"
        )));
    }
    Ok(())
}

macro_rules! plane_impl {
    ($ty:ident, $elem:ty, $channels:expr) => {
        impl $ty {
            pub fn width(&self) -> u32 {
                self.width
            }

            pub fn height(&self) -> u32 {
                self.height
            }

            pub fn dims(&self) -> (u32, u32) {
                (self.width, self.height)
            }

            pub fn data(&self) -> &[$elem] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [$elem] {
                &mut self.data
            }

            pub fn into_data(self) -> Vec<$elem> {
                self.data
            }

            /// Copies out the pixels under `rect`.
            pub fn crop(&self, rect: &Rect) -> Result<Self> {
                check_rect(rect, self.width, self.height)?;
                let c = $channels;
                let mut data = Vec::with_capacity(rect.area() * c);
                for y in rect.y..rect.bottom() {
                    let start = (y as usize * self.width as usize + rect.x as usize) * c;
                    data.extend_from_slice(&self.data[start..start + rect.width as usize * c]);
                }
                Ok(Self {
                    width: rect.width,
                    height: rect.height,
                    data,
                })
            }

            /// Overwrites the pixels under `rect` with `patch`, which must have the
            /// rect's size.
            pub fn paste(&mut self, rect: &Rect, patch: &Self) -> Result<()> {
                check_rect(rect, self.width, self.height)?;
                if patch.dims() != (rect.width, rect.height) {
                    return Err(BdmError::data(format!(
                        "patch is {}x{} but target cell is {}x{}",
                        patch.width, patch.height, rect.width, rect.height
                    )));
                }
                let c = $channels;
                let row = rect.width as usize * c;
                for (i, y) in (rect.y..rect.bottom()).enumerate() {
                    let start = (y as usize * self.width as usize + rect.x as usize) * c;
                    self.data[start..start + row]
                        .copy_from_slice(&patch.data[i * row..(i + 1) * row]);
                }
                Ok(())
            }

            /// Sets every pixel under `rect` to `value`.
            pub fn fill_rect(&mut self, rect: &Rect, value: $elem) -> Result<()> {
                check_rect(rect, self.width, self.height)?;
                let c = $channels;
                for y in rect.y..rect.bottom() {
                    let start = (y as usize * self.width as usize + rect.x as usize) * c;
                    self.data[start..start + rect.width as usize * c].fill(value);
                }
                Ok(())
            }
        }
    };
}

/// Per-pixel class ids in `0..K`, or [`IGNORE`].
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

plane_impl!(LabelMap, u8, 1);

impl LabelMap {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_len(width, height, data.len(), "label map")?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Iterates over the label values under `rect` in row-major order.
    pub fn iter_rect<'a>(&'a self, rect: &Rect) -> impl Iterator<Item = u8> + 'a {
        let rect = *rect;
        let w = self.width as usize;
        (rect.y..rect.bottom()).flat_map(move |y| {
            let start = y as usize * w + rect.x as usize;
            self.data[start..start + rect.width as usize]
                .iter()
                .copied()
        })
    }

    /// Sorted set of non-IGNORE classes present anywhere in the map.
    pub fn classes_present(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        (0..=u8::MAX)
            .filter(|&c| c != IGNORE && seen[c as usize])
            .collect()
    }
}

impl fmt::Debug for LabelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabelMap({}x{})", self.width, self.height)
    }
}

/// Per-pixel confidence in `[0, 1]`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

plane_impl!(ConfidenceMap, f32, 1);

impl ConfidenceMap {
    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        check_len(width, height, data.len(), "confidence map")?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

impl fmt::Debug for ConfidenceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConfidenceMap({}x{})", self.width, self.height)
    }
}

/// 8-bit RGB image, interleaved.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

plane_impl!(Image, u8, 3);

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if !data.len().is_multiple_of(3) {
            return Err(BdmError::data("rgb buffer length is not a multiple of 3"));
        }
        check_len(width, height, data.len() / 3, "image")?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

/// One image with its (pseudo) label and optional confidence plane.
///
/// Ground-truth labels usually come without a confidence plane; such samples
/// read as confidence 1.0 everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub label: LabelMap,
    pub confidence: Option<ConfidenceMap>,
}

impl Sample {
    /// Builds a sample, rejecting planes whose dimensions disagree.
    pub fn new(
        id: impl Into<String>,
        image: Image,
        label: LabelMap,
        confidence: Option<ConfidenceMap>,
    ) -> Result<Self> {
        let sample = Self {
            id: id.into(),
            image,
            label,
            confidence,
        };
        sample.ensure_aligned()?;
        Ok(sample)
    }

    pub fn width(&self) -> u32 {
        self.label.width()
    }

    pub fn height(&self) -> u32 {
        self.label.height()
    }

    pub fn ensure_aligned(&self) -> Result<()> {
        let dims = self.label.dims();
        if self.image.dims() != dims {
            return Err(BdmError::data(format!(
                "sample {}: image {:?} vs label {:?}",
                self.id,
                self.image.dims(),
                dims
            )));
        }
        if let Some(conf) = &self.confidence {
            if conf.dims() != dims {
                return Err(BdmError::data(format!(
                    "sample {}: confidence {:?} vs label {:?}",
                    self.id,
                    conf.dims(),
                    dims
                )));
            }
        }
        Ok(())
    }

    /// Confidence of the pixel at flat index `i`.
    pub fn confidence_at(&self, i: usize) -> f32 {
        self.confidence.as_ref().map_or(1.0, |c| c.data()[i])
    }

    /// The confidence plane, materialising the implicit all-ones plane when absent.
    pub fn confidence_or_ones(&self) -> ConfidenceMap {
        self.confidence
            .clone()
            .unwrap_or_else(|| ConfidenceMap::filled(self.width(), self.height(), 1.0))
    }
}

/// Kinds of problems [`validate_sample`] can report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Label pixels holding a value that is neither a class id nor IGNORE.
    ClassIdOutOfRange {
        count: usize,
        first_x: u32,
        first_y: u32,
        value: u8,
    },
    DimensionMismatch {
        plane: String,
        expected: (u32, u32),
        found: (u32, u32),
    },
    ConfidenceOutOfRange {
        count: usize,
        first_x: u32,
        first_y: u32,
        value: f32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ClassIdOutOfRange {
                count,
                first_x,
                first_y,
                value,
            } => write!(
                f,
                "class id out of range: {count} pixel(s), first {value} at ({first_x}, {first_y})"
            ),
            Self::DimensionMismatch {
                plane,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch: {plane} plane is {}x{}, label is {}x{}",
                found.0, found.1, expected.0, expected.1
            ),
            Self::ConfidenceOutOfRange {
                count,
                first_x,
                first_y,
                value,
            } => write!(
                f,
                "confidence out of [0,1]: {count} pixel(s), first {value} at ({first_x}, {first_y})"
            ),
        }
    }
}

/// Checks a sample against a class count. Returns one violation per problem
/// kind; an empty report means the sample is valid.
pub fn validate_sample(sample: &Sample, num_classes: usize) -> Vec<Violation> {
    let mut report = Vec::new();
    let dims = sample.label.dims();
    let width = dims.0.max(1) as usize;

    if sample.image.dims() != dims {
        report.push(Violation::DimensionMismatch {
            plane: "image".into(),
            expected: dims,
            found: sample.image.dims(),
        });
    }
    if let Some(conf) = &sample.confidence {
        if conf.dims() != dims {
            report.push(Violation::DimensionMismatch {
                plane: "confidence".into(),
                expected: dims,
                found: conf.dims(),
            });
        }
    }

    let mut bad_ids = sample
        .label
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != IGNORE && v as usize >= num_classes);
    if let Some((i, &value)) = bad_ids.next() {
        report.push(Violation::ClassIdOutOfRange {
            count: 1 + bad_ids.count(),
            first_x: (i % width) as u32,
            first_y: (i / width) as u32,
            value,
        });
    }

    if let Some(conf) = &sample.confidence {
        let cw = conf.width().max(1) as usize;
        let mut bad = conf
            .data()
            .iter()
            .enumerate()
            .filter(|(_, v)| !(0.0..=1.0).contains(*v));
        if let Some((i, &value)) = bad.next() {
            report.push(Violation::ConfidenceOutOfRange {
                count: 1 + bad.count(),
                first_x: (i % cw) as u32,
                first_y: (i / cw) as u32,
                value,
            });
        }
    }
    report
}

/// Regular `cols x rows` division of an image.
///
/// Cells all share one size; pixels in the right and bottom remainder strips
/// belong to no cell. Cells are indexed row-major: `row * cols + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub cols: u32,
    pub rows: u32,
    pub cell_width: u32,
    pub cell_height: u32,
}

impl GridSpec {
    pub fn for_image(width: u32, height: u32, cols: u32, rows: u32) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(BdmError::config(format!(
                "grid needs at least one column and row, got {cols}x{rows}"
            )));
        }
        let cell_width = width / cols;
        let cell_height = height / rows;
        if cell_width == 0 || cell_height == 0 {
            return Err(BdmError::data(format!(
                "{width}x{height} image is smaller than one cell of a {cols}x{rows} grid"
            )));
        }
        Ok(Self {
            cols,
            rows,
            cell_width,
            cell_height,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cols as usize * self.rows as usize
    }

    pub fn cell_rect(&self, index: usize) -> Rect {
        let col = index as u32 % self.cols;
        let row = index as u32 / self.cols;
        Rect::new(
            col * self.cell_width,
            row * self.cell_height,
            self.cell_width,
            self.cell_height,
        )
    }

    pub fn cell_rects(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.cell_count()).map(|i| self.cell_rect(i))
    }

    /// Center of a cell in grid-normalized coordinates, `(x, y)` in `(0, 1)^2`.
    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let col = (index as u32 % self.cols) as f64;
        let row = (index as u32 / self.cols) as f64;
        (
            (col + 0.5) / self.cols as f64,
            (row + 0.5) / self.rows as f64,
        )
    }

    pub fn cell_centers(&self) -> Vec<(f64, f64)> {
        (0..self.cell_count())
            .map(|i| self.cell_center(i))
            .collect()
    }

    /// Smallest image size this grid divides.
    pub fn covered_size(&self) -> (u32, u32) {
        (self.cols * self.cell_width, self.rows * self.cell_height)
    }
}

/// How the spatial-continuity term picks the class whose prior map ranks cell
/// locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialQuery {
    /// Class whose prior peaks at the cut cell center.
    #[default]
    PriorArgmax,
    /// Dominant labeled class inside the cut cell, falling back to
    /// `PriorArgmax` when the cell holds no labeled pixels.
    RegionDominantClass,
}

/// How paste patches are drawn from the other domain's bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Joint class-balance x spatial-continuity x confidence weighting.
    #[default]
    Joint,
    /// Uniform over every usable patch in the bank (random cut-mix baseline).
    UniformPatch,
}

/// Parameters of one mixing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    /// Uncertain-ratio threshold above which a candidate cell is cut.
    pub gamma: f64,
    /// Sharpening exponent of the class-balance weights.
    pub alpha: f64,
    pub num_classes: usize,
    pub grid_cols: u32,
    pub grid_rows: u32,
    /// Number of confidence groups per (cell, class).
    pub conf_groups: usize,
    /// Selection probability per confidence group, lowest group first.
    pub group_probs: Vec<f64>,
    pub num_cut_boxes: usize,
    pub seed: u64,
    /// Spatial prior kernel bandwidth as a fraction of the image extent.
    pub bandwidth: f64,
    pub spatial_query: SpatialQuery,
    pub selection: SelectionMode,
    pub use_class_balance: bool,
    pub use_spatial: bool,
    pub use_confidence: bool,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self {
            gamma: 0.2,
            alpha: 2.0,
            num_classes: 19,
            grid_cols: 4,
            grid_rows: 3,
            conf_groups: 3,
            group_probs: vec![0.1, 0.3, 0.6],
            num_cut_boxes: 4,
            seed: 0,
            bandwidth: 0.1,
            spatial_query: SpatialQuery::PriorArgmax,
            selection: SelectionMode::Joint,
            use_class_balance: true,
            use_spatial: true,
            use_confidence: true,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BdmError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return fail(format!(
                "alpha must be a finite value >= 0, got {}",
                self.alpha
            ));
        }
        if self.num_classes == 0 || self.num_classes > MAX_CLASSES {
            return fail(format!(
                "num_classes must lie in 1..={MAX_CLASSES}, got {}",
                self.num_classes
            ));
        }
        if self.grid_cols == 0 || self.grid_rows == 0 {
            return fail("grid must have at least one column and one row".into());
        }
        if self.conf_groups == 0 {
            return fail("conf_groups must be at least 1".into());
        }
        if self.group_probs.len() != self.conf_groups {
            return fail(format!(
                "group_probs has {} entries but conf_groups is {}",
                self.group_probs.len(),
                self.conf_groups
            ));
        }
        if self.group_probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return fail("group_probs must be finite and non-negative".into());
        }
        let sum: f64 = self.group_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return fail(format!("group_probs must sum to 1, got {sum}"));
        }
        let cells = self.grid_cols as usize * self.grid_rows as usize;
        if self.num_cut_boxes > cells {
            return fail(format!(
                "num_cut_boxes {} exceeds the {cells} grid cells",
                self.num_cut_boxes
            ));
        }
        if !self.bandwidth.is_finite() || self.bandwidth < 0.0 {
            return fail(format!("bandwidth must be >= 0, got {}", self.bandwidth));
        }
        Ok(())
    }

    pub fn grid_for(&self, width: u32, height: u32) -> Result<GridSpec> {
        GridSpec::for_image(width, height, self.grid_cols, self.grid_rows)
    }
}
