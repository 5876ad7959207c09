//! File formats for planes and datasets.
//!
//! * Images: 8-bit RGB PNG (other PNG color types are converted on read).
//! * Labels: 8-bit indexed PNG whose palette index is the class id; IGNORE is
//!   index 255. 8-bit grayscale label PNGs are accepted on read.
//! * Confidence: 16-bit grayscale PNG, `value / 65535`.
//! * Probabilities: `.bin` blob (see [`encode_probability_bin`]) or a
//!   directory of per-class 16-bit PNGs `<k>.png`, `value / 65535`.
//!
//! A dataset directory holds `images/<id>.png`, `labels/<id>.png` and
//! optionally `conf/<id>.png` and `probs/<id>.bin`; ids are file stems.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use crate::error::{BdmError, Result};
use crate::pseudo_label::ProbabilityMap;
use crate::types::{ConfidenceMap, Image, LabelMap, Sample, IGNORE};

pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";
pub const CONF_DIR: &str = "conf";
pub const PROBS_DIR: &str = "probs";

/// Magic bytes opening a probability blob.
pub const PROB_MAGIC: &[u8; 4] = b"BDMP";
pub const PROB_VERSION: u32 = 1;
const PROB_HEADER_LEN: usize = 20;

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| BdmError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| BdmError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| BdmError::io(path, e))
}

/// Color used for class `c` in label palettes. The first 19 entries follow
/// the common street-scene palette; IGNORE is black.
pub fn palette_color(c: u8) -> [u8; 3] {
    const STREET: [[u8; 3]; 19] = [
        [128, 64, 128],
        [244, 35, 232],
        [70, 70, 70],
        [102, 102, 156],
        [190, 153, 153],
        [153, 153, 153],
        [250, 170, 30],
        [220, 220, 0],
        [107, 142, 35],
        [152, 251, 152],
        [70, 130, 180],
        [220, 20, 60],
        [255, 0, 0],
        [0, 0, 142],
        [0, 0, 70],
        [0, 60, 100],
        [0, 80, 100],
        [0, 0, 230],
        [119, 11, 32],
    ];
    match c {
        IGNORE => [0, 0, 0],
        c if (c as usize) < STREET.len() => STREET[c as usize],
        c => {
            let v = c as u32;
            [
                ((v * 67) % 256) as u8,
                ((v * 151) % 256) as u8,
                ((v * 211) % 256) as u8,
            ]
        }
    }
}

fn png_encode(
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(depth);
        if let Some(p) = palette {
            enc.set_palette(p);
        }
        let mut writer = enc
            .write_header()
            .map_err(|e| BdmError::codec("<memory>", e))?;
        writer
            .write_image_data(data)
            .map_err(|e| BdmError::codec("<memory>", e))?;
    }
    Ok(out)
}

struct RawPng {
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    data: Vec<u8>,
}

fn png_decode_raw(bytes: &[u8]) -> std::result::Result<RawPng, String> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(|e| e.to_string())?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| "image too large".to_string())?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    buf.truncate(info.buffer_size());
    Ok(RawPng {
        width: info.width,
        height: info.height,
        color: info.color_type,
        depth: info.bit_depth,
        data: buf,
    })
}

pub fn encode_label_png(label: &LabelMap) -> Result<Vec<u8>> {
    let palette: Vec<u8> = (0..=255u8).flat_map(palette_color).collect();
    png_encode(
        label.width(),
        label.height(),
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(palette),
        label.data(),
    )
}

pub fn decode_label_png(bytes: &[u8]) -> Result<LabelMap> {
    let raw = png_decode_raw(bytes).map_err(|e| BdmError::codec("<label>", e))?;
    match (raw.color, raw.depth) {
        (png::ColorType::Indexed | png::ColorType::Grayscale, png::BitDepth::Eight) => {
            LabelMap::from_vec(raw.width, raw.height, raw.data)
        }
        (c, d) => Err(BdmError::data(format!(
            "label PNG must be 8-bit indexed or grayscale, got {c:?} {d:?}"
        ))),
    }
}

fn quantize(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn encode_u16_plane(width: u32, height: u32, values: impl Iterator<Item = u16>) -> Result<Vec<u8>> {
    let data: Vec<u8> = values.flat_map(u16::to_be_bytes).collect();
    png_encode(
        width,
        height,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        None,
        &data,
    )
}

fn decode_u16_plane(bytes: &[u8], what: &str) -> Result<(u32, u32, Vec<u16>)> {
    let raw = png_decode_raw(bytes).map_err(|e| BdmError::codec(what, e))?;
    if raw.color != png::ColorType::Grayscale || raw.depth != png::BitDepth::Sixteen {
        return Err(BdmError::data(format!(
            "{what} PNG must be 16-bit grayscale, got {:?} {:?}",
            raw.color, raw.depth
        )));
    }
    let values = raw
        .data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((raw.width, raw.height, values))
}

/// Encodes confidence as 16-bit grayscale. Values that are multiples of
/// 1/65535 survive a round trip bit-exactly.
pub fn encode_confidence_png(conf: &ConfidenceMap) -> Result<Vec<u8>> {
    encode_u16_plane(
        conf.width(),
        conf.height(),
        conf.data().iter().map(|&v| quantize(v)),
    )
}

pub fn decode_confidence_png(bytes: &[u8]) -> Result<ConfidenceMap> {
    let (w, h, values) = decode_u16_plane(bytes, "confidence")?;
    ConfidenceMap::from_vec(
        w,
        h,
        values.into_iter().map(|v| v as f32 / 65535.0).collect(),
    )
}

pub fn encode_image_png(image: &Image) -> Result<Vec<u8>> {
    png_encode(
        image.width(),
        image.height(),
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        None,
        image.data(),
    )
}

pub fn decode_image_png(bytes: &[u8]) -> Result<Image> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| BdmError::codec("<image>", e))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Image::from_vec(w, h, img.into_raw())
}

pub fn read_image(path: &Path) -> Result<Image> {
    decode_image_png(&read_bytes(path)?).map_err(|e| relabel(e, path))
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    write_bytes(path, &encode_image_png(image)?)
}

pub fn read_label(path: &Path) -> Result<LabelMap> {
    decode_label_png(&read_bytes(path)?).map_err(|e| relabel(e, path))
}

pub fn write_label(path: &Path, label: &LabelMap) -> Result<()> {
    write_bytes(path, &encode_label_png(label)?)
}

pub fn read_confidence(path: &Path) -> Result<ConfidenceMap> {
    decode_confidence_png(&read_bytes(path)?).map_err(|e| relabel(e, path))
}

pub fn write_confidence(path: &Path, conf: &ConfidenceMap) -> Result<()> {
    write_bytes(path, &encode_confidence_png(conf)?)
}

fn relabel(err: BdmError, path: &Path) -> BdmError {
    match err {
        BdmError::Codec { message, .. } => BdmError::codec(path, message),
        BdmError::Data(m) => BdmError::data(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Probability blob: `"BDMP"`, then little-endian `u32` version, width,
/// height and class count, then `K * H * W` little-endian `f32` values, one
/// row-major plane per class.
pub fn encode_probability_bin(prob: &ProbabilityMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(PROB_HEADER_LEN + prob.data().len() * 4);
    out.extend_from_slice(PROB_MAGIC);
    out.extend_from_slice(&PROB_VERSION.to_le_bytes());
    out.extend_from_slice(&prob.width().to_le_bytes());
    out.extend_from_slice(&prob.height().to_le_bytes());
    out.extend_from_slice(&(prob.num_classes() as u32).to_le_bytes());
    for v in prob.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_probability_bin(bytes: &[u8]) -> Result<ProbabilityMap> {
    if bytes.len() < PROB_HEADER_LEN || &bytes[..4] != PROB_MAGIC {
        return Err(BdmError::data("not a probability blob (bad magic)"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != PROB_VERSION {
        return Err(BdmError::data(format!(
            "unsupported probability blob version {version}"
        )));
    }
    let (w, h, k) = (word(8), word(12), word(16) as usize);
    let body = &bytes[PROB_HEADER_LEN..];
    let expected = w as usize * h as usize * k * 4;
    if body.len() != expected {
        return Err(BdmError::data(format!(
            "probability blob body is {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    ProbabilityMap::new(w, h, k, data)
}

/// Reads `dir/0.png .. dir/{K-1}.png`, each a 16-bit plane scaled by 65535.
pub fn read_probability_pngs(dir: &Path) -> Result<ProbabilityMap> {
    let mut planes = Vec::new();
    let mut dims = None;
    loop {
        let path = dir.join(format!("{}.png", planes.len()));
        if !path.exists() {
            break;
        }
        let (w, h, values) =
            decode_u16_plane(&read_bytes(&path)?, "probability").map_err(|e| relabel(e, &path))?;
        if *dims.get_or_insert((w, h)) != (w, h) {
            return Err(BdmError::data(format!(
                "{}: plane size differs from class 0",
                path.display()
            )));
        }
        planes.push(values);
    }
    let (w, h) = dims
        .ok_or_else(|| BdmError::data(format!("{}: no per-class planes found", dir.display())))?;
    let k = planes.len();
    let data = planes
        .into_iter()
        .flatten()
        .map(|v| v as f32 / 65535.0)
        .collect();
    ProbabilityMap::new(w, h, k, data)
}

pub fn write_probability_pngs(dir: &Path, prob: &ProbabilityMap) -> Result<()> {
    for c in 0..prob.num_classes() {
        let bytes = encode_u16_plane(
            prob.width(),
            prob.height(),
            prob.plane(c).iter().map(|&v| quantize(v)),
        )?;
        write_bytes(&dir.join(format!("{c}.png")), &bytes)?;
    }
    Ok(())
}

/// Probability-sum tolerance appropriate for 16-bit quantized planes.
pub fn quantized_sum_tolerance(num_classes: usize) -> f64 {
    crate::pseudo_label::SUM_TOLERANCE + num_classes as f64 * 0.5 / 65535.0
}

/// Sorted ids (file stems) of the PNGs in `dir`.
pub fn list_ids(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| BdmError::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| BdmError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Paths of one sample inside a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePaths {
    pub image: PathBuf,
    pub label: PathBuf,
    pub confidence: PathBuf,
    pub probs_bin: PathBuf,
    pub probs_dir: PathBuf,
}

pub fn sample_paths(root: &Path, id: &str) -> SamplePaths {
    SamplePaths {
        image: root.join(IMAGES_DIR).join(format!("{id}.png")),
        label: root.join(LABELS_DIR).join(format!("{id}.png")),
        confidence: root.join(CONF_DIR).join(format!("{id}.png")),
        probs_bin: root.join(PROBS_DIR).join(format!("{id}.bin")),
        probs_dir: root.join(PROBS_DIR).join(id),
    }
}

/// Loads one sample; the confidence plane is optional.
pub fn read_sample(root: &Path, id: &str) -> Result<Sample> {
    let p = sample_paths(root, id);
    let image = read_image(&p.image)?;
    let label = read_label(&p.label)?;
    let confidence = if p.confidence.exists() {
        Some(read_confidence(&p.confidence)?)
    } else {
        None
    };
    Sample::new(id, image, label, confidence)
}

pub fn write_sample(root: &Path, sample: &Sample) -> Result<()> {
    let p = sample_paths(root, &sample.id);
    write_image(&p.image, &sample.image)?;
    write_label(&p.label, &sample.label)?;
    if let Some(conf) = &sample.confidence {
        write_confidence(&p.confidence, conf)?;
    }
    Ok(())
}

/// Loads every labeled sample of a dataset directory, sorted by id.
pub fn read_dataset(root: &Path) -> Result<Vec<Sample>> {
    let ids = list_ids(&root.join(LABELS_DIR))?;
    ids.iter().map(|id| read_sample(root, id)).collect()
}

/// Loads only the label planes of a dataset.
pub fn read_dataset_labels(root: &Path) -> Result<Vec<LabelMap>> {
    let dir = root.join(LABELS_DIR);
    list_ids(&dir)?
        .iter()
        .map(|id| read_label(&dir.join(format!("{id}.png"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn probability_blob_layout() {
        let p = ProbabilityMap::new(2, 1, 2, vec![0.25, 1.0, 0.75, 0.0]).unwrap();
        let bytes = encode_probability_bin(&p);
        assert_eq!(&bytes[..4], b"BDMP");
        assert_eq!(
            &bytes[4..20],
            &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]
        );
        assert_eq!(&bytes[20..24], &0.25f32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 16);
        assert_eq!(decode_probability_bin(&bytes).unwrap(), p);
    }

    #[test]
    fn probability_blob_rejects_corruption() {
        let p = ProbabilityMap::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        let mut bytes = encode_probability_bin(&p);
        assert!(decode_probability_bin(&bytes[..22]).is_err());
        bytes[4] = 9;
        assert!(decode_probability_bin(&bytes).is_err());
        assert!(decode_probability_bin(b"nope").is_err());
    }

    #[test]
    fn label_png_is_indexed_with_ignore() {
        let l = LabelMap::from_vec(3, 1, vec![0, 18, IGNORE]).unwrap();
        let bytes = encode_label_png(&l).unwrap();
        let raw = png_decode_raw(&bytes).unwrap();
        assert_eq!(raw.color, png::ColorType::Indexed);
        assert_eq!(decode_label_png(&bytes).unwrap(), l);
    }

    #[test]
    fn grayscale_labels_are_accepted() {
        let bytes = png_encode(
            2,
            1,
            png::ColorType::Grayscale,
            png::BitDepth::Eight,
            None,
            &[3, 255],
        )
        .unwrap();
        assert_eq!(decode_label_png(&bytes).unwrap().data(), &[3, 255]);
    }

    #[test]
    fn rgb_png_is_rejected_as_label() {
        let img = Image::filled(1, 1, [1, 2, 3]);
        assert!(decode_label_png(&encode_image_png(&img).unwrap()).is_err());
    }

    #[test]
    fn probability_pngs_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProbabilityMap::new(2, 1, 3, vec![0.2, 0.5, 0.3, 0.25, 0.5, 0.25]).unwrap();
        write_probability_pngs(dir.path(), &p).unwrap();
        let q = read_probability_pngs(dir.path()).unwrap();
        assert_eq!(q.num_classes(), 3);
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
        q.validate(quantized_sum_tolerance(3)).unwrap();
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        (1u32..7, 1u32..7, any::<bool>()).prop_flat_map(|(w, h, with_conf)| {
            let n = (w * h) as usize;
            (
                prop::collection::vec(any::<u8>(), n * 3),
                prop::collection::vec(prop_oneof![0u8..19, Just(IGNORE)], n),
                prop::collection::vec(any::<u16>(), n),
            )
                .prop_map(move |(rgb, label, conf)| {
                    Sample::new(
                        "p",
                        Image::from_vec(w, h, rgb).unwrap(),
                        LabelMap::from_vec(w, h, label).unwrap(),
                        with_conf.then(|| {
                            ConfidenceMap::from_vec(
                                w,
                                h,
                                conf.iter().map(|&v| v as f32 / 65535.0).collect(),
                            )
                            .unwrap()
                        }),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn sample_roundtrips_bit_exactly(s in arb_sample()) {
            let dir = tempfile::tempdir().unwrap();
            write_sample(dir.path(), &s).unwrap();
            let back = read_sample(dir.path(), "p").unwrap();
            prop_assert_eq!(back.image, s.image);
            prop_assert_eq!(back.label, s.label);
            match (back.confidence, s.confidence) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.data().iter().zip(b.data()) {
                        prop_assert_eq!(x.to_bits(), y.to_bits());
                    }
                }
                (None, None) => {}
                _ => prop_assert!(false, "confidence presence changed"),
            }
        }
    }
}
