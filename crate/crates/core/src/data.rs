//! IDX dataset loading (MNIST / FashionMNIST layout), class filtering and
//! balanced seeded subsets.
//!
//! IDX files start with a big-endian magic (`0x00000803` for a 3-D unsigned
//! byte tensor of images, `0x00000801` for a 1-D label vector) followed by
//! one big-endian `u32` per dimension and the raw bytes. Gzip-compressed
//! files are detected by their magic bytes and inflated transparently.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classical::Tensor;
use crate::error::{HqnnError, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images scaled to `[0, 1]` with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `(m, 1, rows, cols)`.
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub source_name: String,
    /// Original label of each current class index.
    pub class_map: Vec<usize>,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, source_name: impl Into<String>) -> Result<Self> {
        images.expect_rank("dataset images", 4)?;
        if images.shape()[0] != labels.len() {
            return Err(HqnnError::Consistency(format!("{} images but {} labels", images.shape()[0], labels.len())));
        }
        let n_classes = labels.iter().max().map_or(0, |&l| l + 1).max(10);
        Ok(Dataset { images, labels, source_name: source_name.into(), class_map: (0..n_classes).collect() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_map.len()
    }

    /// `(channels, rows, cols)` of one image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    pub fn pixels_per_image(&self) -> usize {
        self.image_shape().iter().product()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let p = self.pixels_per_image();
        &self.images.data()[i * p..(i + 1) * p]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(HqnnError::config("selection produced an empty dataset"));
        }
        let p = self.pixels_per_image();
        let mut data = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        let [c, h, w] = self.image_shape();
        Ok(Dataset {
            images: Tensor::new(vec![indices.len(), c, h, w], data)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source_name: self.source_name.clone(),
            class_map: self.class_map.clone(),
        })
    }

    /// Per-class sample counts.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_classes()];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let io_err = |source| HqnnError::Io { path: path.display().to_string(), source };
    let raw = std::fs::read(path).map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| HqnnError::format(path.display().to_string(), format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, field: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| HqnnError::format(field, "file truncated inside the header"))
}

/// Parses an image IDX buffer into `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0, "images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(HqnnError::format("images magic", format!("expected 0x{IMAGES_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let count = be_u32(bytes, 4, "images count")? as usize;
    let rows = be_u32(bytes, 8, "images rows")? as usize;
    let cols = be_u32(bytes, 12, "images cols")? as usize;
    let body = &bytes[16..];
    let expected = count * rows * cols;
    if body.len() < expected {
        return Err(HqnnError::format(
            "images data",
            format!("header declares {expected} pixels but only {} bytes follow", body.len()),
        ));
    }
    Ok((count, rows, cols, &body[..expected]))
}

/// Parses a label IDX buffer.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0, "labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(HqnnError::format("labels magic", format!("expected 0x{LABELS_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let count = be_u32(bytes, 4, "labels count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(HqnnError::format(
            "labels data",
            format!("header declares {count} labels but only {} bytes follow", body.len()),
        ));
    }
    Ok(&body[..count])
}

/// Loads an image file and its label file; pixels are divided by 255.
pub fn load_idx_pair(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = read_maybe_gzip(images_path)?;
    let label_bytes = read_maybe_gzip(labels_path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != count {
        return Err(HqnnError::Consistency(format!(
            "{} declares {count} images but {} declares {} labels",
            images_path.display(),
            labels_path.display(),
            labels.len()
        )));
    }
    if count == 0 || rows == 0 || cols == 0 {
        return Err(HqnnError::format("images count", "dataset is empty"));
    }
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let name = images_path
        .parent()
        .and_then(|p| p.file_name())
        .map_or_else(|| "idx".to_string(), |n| n.to_string_lossy().into_owned());
    Dataset::new(Tensor::new(vec![count, 1, rows, cols], data)?, labels.iter().map(|&l| usize::from(l)).collect(), name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [stem.to_string(), format!("{stem}.gz")] {
        let path = dir.join(&candidate);
        if path.is_file() {
            return Ok(path);
        }
    }
    Err(HqnnError::Io {
        path: dir.join(stem).display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "IDX file not found (plain or .gz)"),
    })
}

/// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]` from `dir`.
pub fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let images = find_file(dir, &format!("{}-images-idx3-ubyte", split.prefix()))?;
    let labels = find_file(dir, &format!("{}-labels-idx1-ubyte", split.prefix()))?;
    load_idx_pair(&images, &labels)
}

/// Keeps samples whose original label is in `class_list` and renumbers the
/// classes `0..k` in ascending order of original label. Sample order is kept.
pub fn filter_classes(dataset: &Dataset, class_list: &[usize]) -> Result<Dataset> {
    if class_list.is_empty() {
        return Err(HqnnError::config("class list is empty"));
    }
    let mut sorted = class_list.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(HqnnError::config(format!("class list {class_list:?} has duplicates")));
    }
    if let Some(bad) = sorted.iter().find(|&&c| c > 9) {
        return Err(HqnnError::config(format!("class {bad} outside 0..=9")));
    }
    let mut indices = Vec::new();
    let mut labels = Vec::new();
    for (i, &l) in dataset.labels.iter().enumerate() {
        let original = dataset.class_map[l];
        if let Ok(new) = sorted.binary_search(&original) {
            indices.push(i);
            labels.push(new);
        }
    }
    if indices.is_empty() {
        return Err(HqnnError::config(format!("no samples of classes {class_list:?} in {}", dataset.source_name)));
    }
    let mut out = dataset.select(&indices)?;
    out.labels = labels;
    out.class_map = sorted;
    Ok(out)
}

/// Exactly `per_class` samples of every class, chosen by a seeded shuffle,
/// returned in a seeded random order.
pub fn subset_balanced(dataset: &Dataset, per_class: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(HqnnError::config("per-class subset size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = vec![Vec::new(); dataset.n_classes()];
    for (i, &l) in dataset.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut chosen = Vec::with_capacity(per_class * by_class.len());
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.len() < per_class {
            return Err(HqnnError::config(format!(
                "class {} has {} samples, fewer than the {per_class} requested",
                dataset.class_map[class],
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..per_class]);
    }
    chosen.shuffle(&mut rng);
    dataset.select(&chosen)
}
