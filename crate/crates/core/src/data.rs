//! Dataset ingestion, subsampling, synthetic fixtures and the on-disk
//! feature-cache and PGM formats.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::ByteReader;
use crate::error::{Error, Result};
use crate::quanv::{FeatureMap, ImageTensor, PATCH_ORDER_ROW_MAJOR};
use crate::rng::{streams, SeededRng};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

pub const CACHE_MAGIC: &[u8; 4] = b"QNVF";
pub const CACHE_VERSION: u32 = 1;
const CACHE_HEADER_BYTES: usize = 4 + 4 * 7 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Labelled images; label 1 marks the positive (pneumonia) class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<ImageTensor>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn new(images: Vec<ImageTensor>, labels: Vec<u8>, split: Split) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!("label {l} is not binary")));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|im| im.shape() != first.shape()) {
                return Err(Error::Shape("images have mixed shapes".into()));
            }
        }
        Ok(Self {
            images,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }

    /// Flattened pixel vectors, the raw-pixel baseline's input.
    pub fn flat_inputs(&self) -> Vec<Vec<f64>> {
        self.images.iter().map(|im| im.values.clone()).collect()
    }
}

/// Quanvolution outputs stamped with the ansatz that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub height: usize,
    pub width: usize,
    pub features: Vec<FeatureMap>,
    pub labels: Vec<u8>,
    pub ansatz_seed: u64,
    pub ansatz_layers: u32,
}

impl FeatureDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..self.clone_header()
        }
    }

    fn clone_header(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            features: Vec::new(),
            labels: Vec::new(),
            ansatz_seed: self.ansatz_seed,
            ansatz_layers: self.ansatz_layers,
        }
    }

    pub fn flat_inputs(&self) -> Vec<Vec<f64>> {
        self.features.iter().map(|f| f.values.clone()).collect()
    }

    /// Cache layout, little-endian: `"QNVF"`, version u32, count u32,
    /// height u32, width u32, channels u32, patch order u32, ansatz seed
    /// u64, ansatz layers u32, then `count·height·width·channels` f64
    /// features in `(image, row, col, channel)` order, then `count` label
    /// bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let per = self.height * self.width * FeatureMap::CHANNELS;
        let mut out = Vec::with_capacity(CACHE_HEADER_BYTES + self.len() * (8 * per + 1));
        out.extend_from_slice(CACHE_MAGIC);
        for v in [
            CACHE_VERSION,
            self.len() as u32,
            self.height as u32,
            self.width as u32,
            FeatureMap::CHANNELS as u32,
            PATCH_ORDER_ROW_MAJOR,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.ansatz_seed.to_le_bytes());
        out.extend_from_slice(&self.ansatz_layers.to_le_bytes());
        for f in &self.features {
            for v in &f.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.labels);
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < CACHE_HEADER_BYTES {
            return Err(Error::cache(
                "header",
                format!(
                    "truncated: expected at least {CACHE_HEADER_BYTES} bytes, found {}",
                    bytes.len()
                ),
            ));
        }
        let mut r = ByteReader::new(bytes, path);
        if r.take(4)? != CACHE_MAGIC {
            return Err(Error::cache("magic", "not a QNVF feature cache"));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(Error::cache(
                "version",
                format!("unsupported version {version}, expected {CACHE_VERSION}"),
            ));
        }
        let count = r.u32()? as usize;
        let height = r.u32()? as usize;
        let width = r.u32()? as usize;
        let channels = r.u32()? as usize;
        if channels != FeatureMap::CHANNELS {
            return Err(Error::cache(
                "channels",
                format!(
                    "expected {} channels, found {channels}",
                    FeatureMap::CHANNELS
                ),
            ));
        }
        let order = r.u32()?;
        if order != PATCH_ORDER_ROW_MAJOR {
            return Err(Error::cache(
                "patch_order",
                format!("unknown patch order code {order}"),
            ));
        }
        let ansatz_seed = r.u64()?;
        let ansatz_layers = r.u32()?;
        let per = height * width * channels;
        let expected = CACHE_HEADER_BYTES + count * (8 * per + 1);
        if bytes.len() != expected {
            return Err(Error::cache(
                "body",
                format!(
                    "size mismatch: expected {expected} bytes, found {}",
                    bytes.len()
                ),
            ));
        }
        let mut features = Vec::with_capacity(count);
        for _ in 0..count {
            let values = (0..per).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            features.push(FeatureMap {
                height,
                width,
                values,
            });
        }
        let labels = r.take(count)?.to_vec();
        Ok(Self {
            height,
            width,
            features,
            labels,
            ansatz_seed,
            ansatz_layers,
        })
    }

    /// Rejects features produced by a circuit other than the one requested.
    pub fn check_stamp(&self, seed: u64, layers: u32) -> Result<()> {
        if self.ansatz_seed != seed {
            return Err(Error::cache(
                "ansatz_seed",
                format!("cache stamped {}, requested {seed}", self.ansatz_seed),
            ));
        }
        if self.ansatz_layers != layers {
            return Err(Error::cache(
                "ansatz_layers",
                format!("cache stamped {}, requested {layers}", self.ansatz_layers),
            ));
        }
        Ok(())
    }

    /// Loads a cache, rejecting it when `expected` (ansatz seed, layers) is
    /// given and differs from the stamp.
    pub fn load(path: &Path, expected: Option<(u64, u32)>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let fd = Self::from_bytes(&bytes, path)?;
        if let Some((seed, layers)) = expected {
            fd.check_stamp(seed, layers)?;
        }
        Ok(fd)
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| {
            Error::format_at_byte(
                path,
                offset,
                format!("truncated header: file has {} bytes", bytes.len()),
            )
        })
}

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801),
/// scaling pixel bytes to `[0, 1]` by dividing by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let ib = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let lb = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = read_be_u32(&ib, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format_at_byte(
            images_path,
            0,
            format!("image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = read_be_u32(&ib, 4, images_path)? as usize;
    let rows = read_be_u32(&ib, 8, images_path)? as usize;
    let cols = read_be_u32(&ib, 12, images_path)? as usize;
    let body = 16 + n * rows * cols;
    if ib.len() != body {
        return Err(Error::format_at_byte(
            images_path,
            ib.len().min(body),
            format!(
                "expected {body} bytes for {n}x{rows}x{cols}, found {}",
                ib.len()
            ),
        ));
    }

    let magic = read_be_u32(&lb, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format_at_byte(
            labels_path,
            0,
            format!("label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        ));
    }
    let n_labels = read_be_u32(&lb, 4, labels_path)? as usize;
    if n_labels != n {
        return Err(Error::format_at_byte(
            labels_path,
            4,
            format!("{n_labels} labels for {n} images"),
        ));
    }
    if lb.len() != 8 + n {
        return Err(Error::format_at_byte(
            labels_path,
            lb.len().min(8 + n),
            format!("expected {} bytes, found {}", 8 + n, lb.len()),
        ));
    }
    if let Some(i) = lb[8..].iter().position(|&l| l > 1) {
        return Err(Error::format_at_byte(
            labels_path,
            8 + i,
            format!("label {} is not binary", lb[8 + i]),
        ));
    }

    let images = ib[16..]
        .chunks_exact(rows * cols)
        .map(|px| {
            ImageTensor::grayscale(
                rows,
                cols,
                px.iter().map(|&b| f64::from(b) / 255.0).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, lb[8..].to_vec(), split)
}

/// Writes pixel bytes and labels as an IDX image/label file pair.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
    pixels: &[Vec<u8>],
    labels: &[u8],
) -> Result<()> {
    if pixels.len() != labels.len() || pixels.iter().any(|p| p.len() != rows * cols) {
        return Err(Error::Shape(
            "pixel rows do not match labels or image size".into(),
        ));
    }
    let mut ib = Vec::with_capacity(16 + pixels.len() * rows * cols);
    for v in [
        IDX_IMAGES_MAGIC,
        pixels.len() as u32,
        rows as u32,
        cols as u32,
    ] {
        ib.extend_from_slice(&v.to_be_bytes());
    }
    pixels.iter().for_each(|p| ib.extend_from_slice(p));
    let mut lb = Vec::with_capacity(8 + labels.len());
    lb.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lb.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lb.extend_from_slice(labels);
    fs::write(images_path, ib).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, lb).map_err(|e| Error::io(labels_path, e))
}

/// Encodes a `[0, 1]` dataset as IDX bytes (`round(x · 255)`).
pub fn dataset_to_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (rows, cols) = dataset
        .images
        .first()
        .map(|im| (im.height, im.width))
        .unwrap_or((0, 0));
    let pixels: Vec<Vec<u8>> = dataset
        .images
        .iter()
        .map(|im| {
            im.values
                .iter()
                .map(|&v| (v * 255.0).round() as u8)
                .collect()
        })
        .collect();
    write_idx(
        images_path,
        labels_path,
        rows,
        cols,
        &pixels,
        &dataset.labels,
    )
}

/// Reads rows of `label,p0,…,p{h·w-1}`. If any pixel exceeds 1 the whole
/// file is treated as byte-range and divided by 255.
pub fn load_csv(path: &Path, height: usize, width: usize, split: Split) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format_at_row(path, 0, format!("{other:?}")),
        })?;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::format_at_row(path, row, e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 1 + height * width {
            return Err(Error::format_at_row(
                path,
                row,
                format!("{} pixels, expected {}", record.len() - 1, height * width),
            ));
        }
        let label: u8 = record[0].parse().ok().filter(|&l| l <= 1).ok_or_else(|| {
            Error::format_at_row(path, row, format!("label {:?} is not 0 or 1", &record[0]))
        })?;
        let pixels = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| (0.0..=255.0).contains(v))
                    .ok_or_else(|| {
                        Error::format_at_row(path, row, format!("bad pixel value {cell:?}"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        labels.push(label);
        rows.push(pixels);
    }
    let byte_range = rows.iter().flatten().any(|&v| v > 1.0);
    let images = rows
        .into_iter()
        .map(|mut px| {
            if byte_range {
                px.iter_mut().for_each(|v| *v /= 255.0);
            }
            ImageTensor::grayscale(height, width, px)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(images, labels, split)
}

/// Seeded shuffle of `0..len`, truncated to `n`.
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 || n > len {
        return Err(Error::Config(format!(
            "cannot draw {n} samples from a set of {len}"
        )));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    SeededRng::new(seed).shuffle(&mut idx);
    idx.truncate(n);
    Ok(idx)
}

/// Returns the subsample and the source indices it was drawn from.
pub fn subsample(dataset: &Dataset, n: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    let idx = subsample_indices(dataset.len(), n, seed)?;
    Ok((dataset.select(&idx), idx))
}

/// Balanced two-class fixture. Class 1 (odd indices) carries a bright disc
/// of radius `0.4·side` with values in `[0.8, 1]`; everything else is dark
/// noise in `[0, 0.2]`.
pub fn synthetic_dataset(n: usize, side: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config(
            "synthetic dataset needs at least one sample".into(),
        ));
    }
    if side < 4 || !side.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "synthetic side {side} must be even and at least 4"
        )));
    }
    let mut rng = SeededRng::for_stream(seed, streams::SYNTHETIC);
    let center = (side as f64 - 1.0) / 2.0;
    let radius = 0.4 * side as f64;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let mut values = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                let d = ((r as f64 - center).powi(2) + (c as f64 - center).powi(2)).sqrt();
                let v = if label == 1 && d <= radius {
                    rng.uniform(0.8, 1.0)
                } else {
                    rng.uniform(0.0, 0.2)
                };
                values.push(v);
            }
        }
        images.push(ImageTensor::grayscale(side, side, values)?);
        labels.push(label);
    }
    Dataset::new(images, labels, Split::Train)
}

/// Maps `v ∈ [-1, 1]` to a PGM byte by `floor((v + 1) / 2 · 255 + 0.5)`.
pub fn feature_to_byte(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0 + 0.5).floor() as u8
}

/// Writes one channel of a feature map as a binary (P5) PGM.
pub fn export_feature_map_pgm(fm: &FeatureMap, channel: usize, path: &Path) -> Result<()> {
    if channel >= FeatureMap::CHANNELS {
        return Err(Error::Index(format!(
            "channel {channel} out of range 0..{}",
            FeatureMap::CHANNELS
        )));
    }
    let mut out = format!("P5\n{} {}\n255\n", fm.width, fm.height).into_bytes();
    out.extend(fm.channel(channel).into_iter().map(feature_to_byte));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quanv::precompute_features;
    use crate::sim::build_random_layers;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn idx_round_trip_and_normalization() {
        let dir = tmp();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        let pixels = vec![vec![0u8, 255, 128, 7], vec![255u8; 4], vec![0u8; 4]];
        write_idx(&ip, &lp, 2, 2, &pixels, &[1, 0, 1]).unwrap();
        let ds = load_idx(&ip, &lp, Split::Train).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.images[0].shape(), (2, 2, 1));
        assert_eq!(ds.images[0].values[0], 0.0);
        assert_eq!(ds.images[0].values[1], 1.0);
        assert_eq!(ds.labels, vec![1, 0, 1]);
    }

    #[test]
    fn idx_errors() {
        let dir = tmp();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        write_idx(&ip, &lp, 2, 2, &[vec![0u8; 4], vec![1u8; 4]], &[0, 1]).unwrap();

        // Count mismatch.
        let lp2 = dir.path().join("l2.idx");
        let mut lb = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
        lb.extend_from_slice(&3u32.to_be_bytes());
        lb.extend_from_slice(&[0, 1, 0]);
        fs::write(&lp2, lb).unwrap();
        let err = load_idx(&ip, &lp2, Split::Train).unwrap_err();
        assert!(
            matches!(err, Error::Format { ref location, .. } if location == "byte 4"),
            "{err}"
        );

        // Bad magic.
        let mut ib = fs::read(&ip).unwrap();
        ib[3] = 0x01;
        let bad = dir.path().join("bad.idx");
        fs::write(&bad, &ib).unwrap();
        assert!(matches!(
            load_idx(&bad, &lp, Split::Train),
            Err(Error::Format { .. })
        ));

        // Truncated body.
        let ib = fs::read(&ip).unwrap();
        fs::write(&bad, &ib[..ib.len() - 1]).unwrap();
        assert!(matches!(
            load_idx(&bad, &lp, Split::Train),
            Err(Error::Format { .. })
        ));

        let missing = dir.path().join("nope.idx");
        assert!(matches!(
            load_idx(&missing, &lp, Split::Train),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_examples() {
        let dir = tmp();
        let p = dir.path().join("d.csv");
        fs::write(&p, "1,0,128,255,0\n").unwrap();
        let ds = load_csv(&p, 2, 2, Split::Train).unwrap();
        assert_eq!(ds.labels, vec![1]);
        let v = &ds.images[0].values;
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.501_960_784_313_725_5).abs() < 1e-15);
        assert_eq!(v[2], 1.0);

        fs::write(&p, "").unwrap();
        assert!(load_csv(&p, 2, 2, Split::Train).unwrap().is_empty());

        fs::write(&p, "0,0.5,0.25,1,0\n").unwrap();
        assert_eq!(
            load_csv(&p, 2, 2, Split::Train).unwrap().images[0].values[1],
            0.25
        );

        let mut short = String::from("1");
        for _ in 0..783 {
            short.push_str(",0");
        }
        fs::write(&p, format!("0{}\n{short}\n", ",0".repeat(784))).unwrap();
        let err = load_csv(&p, 28, 28, Split::Train).unwrap_err();
        assert!(
            matches!(err, Error::Format { ref location, .. } if location == "row 2"),
            "{err}"
        );

        fs::write(&p, "1,0,x,0,0\n").unwrap();
        assert!(matches!(
            load_csv(&p, 2, 2, Split::Train),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn subsample_contract() {
        let ds = synthetic_dataset(100, 4, 1).unwrap();
        let (a, ia) = subsample(&ds, 50, 7).unwrap();
        let (_, ib) = subsample(&ds, 50, 7).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(ia, ib);
        for (k, &i) in ia.iter().enumerate() {
            assert_eq!(a.labels[k], ds.labels[i]);
        }
        assert_eq!(subsample(&ds, 30, 7).unwrap().0.len(), 30);
        assert!(matches!(subsample(&ds, 101, 7), Err(Error::Config(_))));
    }

    #[test]
    fn synthetic_contract() {
        let ds = synthetic_dataset(40, 28, 3).unwrap();
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 20);
        let mean = |im: &ImageTensor| im.values.iter().sum::<f64>() / im.values.len() as f64;
        let min_pos = ds
            .images
            .iter()
            .zip(&ds.labels)
            .filter(|(_, &l)| l == 1)
            .map(|(im, _)| mean(im))
            .fold(f64::INFINITY, f64::min);
        let max_neg = ds
            .images
            .iter()
            .zip(&ds.labels)
            .filter(|(_, &l)| l == 0)
            .map(|(im, _)| mean(im))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(min_pos > max_neg);
        assert_eq!(ds, synthetic_dataset(40, 28, 3).unwrap());
        assert!(synthetic_dataset(4, 5, 0).is_err());
    }

    #[test]
    fn synthetic_separable_at_every_even_side() {
        for side in (4..=28).step_by(2) {
            let ds = synthetic_dataset(20, side, side as u64).unwrap();
            let threshold = 0.2;
            for (im, &l) in ds.images.iter().zip(&ds.labels) {
                let m = im.values.iter().sum::<f64>() / im.values.len() as f64;
                assert_eq!(u8::from(m > threshold), l, "side {side}");
            }
        }
    }

    #[test]
    fn cache_round_trip_and_stamps() {
        let dir = tmp();
        let path = dir.path().join("f.qnvf");
        let ds = synthetic_dataset(6, 8, 2).unwrap();
        let ansatz = build_random_layers(42, 1, 4).unwrap();
        let fd = precompute_features(&ds.images, &ds.labels, &ansatz, 2, Some(&path)).unwrap();
        let back = FeatureDataset::load(&path, Some((42, 1))).unwrap();
        assert_eq!(back, fd);
        for (a, b) in back.features.iter().zip(&fd.features) {
            assert!(a
                .values
                .iter()
                .zip(&b.values)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }

        let err = FeatureDataset::load(&path, Some((43, 1))).unwrap_err();
        assert!(matches!(err, Error::Cache { ref field, .. } if field == "ansatz_seed"));
        let err = FeatureDataset::load(&path, Some((42, 2))).unwrap_err();
        assert!(matches!(err, Error::Cache { ref field, .. } if field == "ansatz_layers"));

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let err = FeatureDataset::load(&path, None).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains(&format!("expected {} bytes", bytes.len())),
            "{msg}"
        );
        assert!(
            msg.contains(&format!("found {}", bytes.len() - 10)),
            "{msg}"
        );

        let mut bad = bytes.clone();
        bad[0] = b'Z';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(
            FeatureDataset::load(&path, None),
            Err(Error::Cache { ref field, .. }) if field == "magic"
        ));
        let mut bad = bytes;
        bad[4] = 9;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(
            FeatureDataset::load(&path, None),
            Err(Error::Cache { ref field, .. }) if field == "version"
        ));
    }

    #[test]
    fn empty_cache_has_valid_header() {
        let dir = tmp();
        let path = dir.path().join("e.qnvf");
        let ansatz = build_random_layers(1, 1, 4).unwrap();
        precompute_features(&[], &[], &ansatz, 1, Some(&path)).unwrap();
        let fd = FeatureDataset::load(&path, Some((1, 1))).unwrap();
        assert!(fd.is_empty());
        assert_eq!(
            fs::metadata(&path).unwrap().len() as usize,
            CACHE_HEADER_BYTES
        );
    }

    #[test]
    fn pgm_mapping() {
        assert_eq!(feature_to_byte(1.0), 255);
        assert_eq!(feature_to_byte(-1.0), 0);
        assert_eq!(feature_to_byte(0.0), 128);

        let dir = tmp();
        let path = dir.path().join("c.pgm");
        let fm = FeatureMap {
            height: 2,
            width: 3,
            values: (0..24)
                .map(|i| if i % 4 == 1 { -1.0 } else { 1.0 })
                .collect(),
        };
        export_feature_map_pgm(&fm, 1, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&bytes[11..], &[0u8; 6]);
        export_feature_map_pgm(&fm, 0, &path).unwrap();
        assert_eq!(&fs::read(&path).unwrap()[11..], &[255u8; 6]);
        assert!(matches!(
            export_feature_map_pgm(&fm, 4, &path),
            Err(Error::Index(_))
        ));
    }
}
