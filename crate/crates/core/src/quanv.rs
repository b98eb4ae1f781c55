//! Quanvolution: a fixed 4-qubit circuit slid over an image in
//! non-overlapping 2x2 patches.
//!
//! Each patch is angle-encoded (`θ = π·x`, one RY per qubit), the ansatz is
//! applied, and the four Pauli-Z expectations become the four output
//! channels at that patch position. Pixels map to qubits row-major within
//! the patch: top-left → 0, top-right → 1, bottom-left → 2, bottom-right → 3.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::sim::{CircuitSpec, Rotation, StateVector};

pub const PATCH_QUBITS: usize = 4;

/// Patch-to-qubit ordering code recorded in feature caches.
pub const PATCH_ORDER_ROW_MAJOR: u32 = 0;

/// Grayscale or multi-channel image, values stored `(row, col, channel)`
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("image must have at least one channel".into()));
        }
        if values.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{} values do not fill a {height}x{width}x{channels} image",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn grayscale(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(height, width, 1, values)
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.values[(row * self.width + col) * self.channels]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub pixels: [f64; PATCH_QUBITS],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedPatch {
    pub thetas: [f64; PATCH_QUBITS],
}

/// `height/2 × width/2 × 4` tensor of Z expectations, stored
/// `(row, col, channel)` row-major. Flattening `values` in order gives the
/// classifier input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub const CHANNELS: usize = PATCH_QUBITS;

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.values[(row * self.width + col) * Self::CHANNELS + channel]
    }

    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(channel)
            .step_by(Self::CHANNELS)
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_quanv_shape(image: &ImageTensor) -> Result<()> {
    if image.channels != 1 {
        return Err(Error::Shape(format!(
            "quanvolution takes single-channel images, got {} channels",
            image.channels
        )));
    }
    if image.height == 0
        || image.width == 0
        || !image.height.is_multiple_of(2)
        || !image.width.is_multiple_of(2)
    {
        return Err(Error::Shape(format!(
            "image {}x{} must have even, non-zero height and width",
            image.height, image.width
        )));
    }
    Ok(())
}

/// Non-overlapping 2x2 blocks in row-major order.
pub fn extract_patches(image: &ImageTensor) -> Result<Vec<Patch>> {
    check_quanv_shape(image)?;
    let mut patches = Vec::with_capacity(image.height * image.width / 4);
    for row in 0..image.height / 2 {
        for col in 0..image.width / 2 {
            let (r, c) = (2 * row, 2 * col);
            patches.push(Patch {
                row,
                col,
                pixels: [
                    image.pixel(r, c),
                    image.pixel(r, c + 1),
                    image.pixel(r + 1, c),
                    image.pixel(r + 1, c + 1),
                ],
            });
        }
    }
    Ok(patches)
}

pub fn encode_patch(pixels: &[f64; PATCH_QUBITS]) -> Result<EncodedPatch> {
    let mut thetas = [0.0; PATCH_QUBITS];
    for (theta, &x) in thetas.iter_mut().zip(pixels) {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Validation(format!("pixel value {x} outside [0, 1]")));
        }
        *theta = PI * x;
    }
    Ok(EncodedPatch { thetas })
}

pub fn quanv_patch(patch: &EncodedPatch, ansatz: &CircuitSpec) -> Result<[f64; PATCH_QUBITS]> {
    if ansatz.n_qubits != PATCH_QUBITS {
        return Err(Error::Config(format!(
            "quanvolution ansatz must act on {PATCH_QUBITS} qubits, got {}",
            ansatz.n_qubits
        )));
    }
    let mut state = StateVector::new(PATCH_QUBITS)?;
    for (wire, &theta) in patch.thetas.iter().enumerate() {
        state.apply_rotation(Rotation::RY, wire, theta)?;
    }
    state.run_circuit(ansatz)?;
    let mut out = [0.0; PATCH_QUBITS];
    for (wire, z) in out.iter_mut().enumerate() {
        *z = state.expectation_z(wire)?;
    }
    Ok(out)
}

fn assemble(image: &ImageTensor, outputs: Vec<[f64; PATCH_QUBITS]>) -> FeatureMap {
    FeatureMap {
        height: image.height / 2,
        width: image.width / 2,
        values: outputs.into_iter().flatten().collect(),
    }
}

pub fn quanv_image(image: &ImageTensor, ansatz: &CircuitSpec) -> Result<FeatureMap> {
    let outputs = extract_patches(image)?
        .iter()
        .map(|p| quanv_patch(&encode_patch(&p.pixels)?, ansatz))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(image, outputs))
}

/// Same result as [`quanv_image`], with patches fanned out over the current
/// rayon pool.
pub fn quanv_image_parallel(image: &ImageTensor, ansatz: &CircuitSpec) -> Result<FeatureMap> {
    let outputs = extract_patches(image)?
        .par_iter()
        .map(|p| quanv_patch(&encode_patch(&p.pixels)?, ansatz))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(image, outputs))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs the quanvolution over every image on `threads` workers (0 means
/// one per core). Output order follows input order regardless of worker
/// count.
pub fn quanv_images(
    images: &[ImageTensor],
    ansatz: &CircuitSpec,
    threads: usize,
) -> Result<Vec<FeatureMap>> {
    if let Some(first) = images.first() {
        let shape = first.shape();
        if let Some(odd) = images.iter().find(|im| im.shape() != shape) {
            return Err(Error::Shape(format!(
                "mixed image shapes {:?} and {:?}",
                shape,
                odd.shape()
            )));
        }
    }
    ansatz.validate()?;
    thread_pool(threads)?.install(|| {
        images
            .par_iter()
            .map(|im| quanv_image(im, ansatz))
            .collect()
    })
}

/// Computes features for a labelled image set and, when `cache` is given,
/// persists them stamped with the ansatz seed and depth.
pub fn precompute_features(
    images: &[ImageTensor],
    labels: &[u8],
    ansatz: &CircuitSpec,
    threads: usize,
    cache: Option<&Path>,
) -> Result<FeatureDataset> {
    if images.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let features = quanv_images(images, ansatz, threads)?;
    let (height, width) = images
        .first()
        .map(|im| (im.height / 2, im.width / 2))
        .unwrap_or((0, 0));
    let fd = FeatureDataset {
        height,
        width,
        features,
        labels: labels.to_vec(),
        ansatz_seed: ansatz.seed,
        ansatz_layers: ansatz.n_layers as u32,
    };
    if let Some(path) = cache {
        fd.save(path)?;
    }
    Ok(fd)
}
