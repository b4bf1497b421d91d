//! IDX (MNIST-family) image/label files, validation splits, and conversion of
//! pixels into a numeric backend.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::delta::DeltaApproximator;
use crate::error::{Error, Result};
use crate::fixed::{FixedFormat, FixedScalar};
use crate::lns::{self, LnsScalar};
use crate::nn::backend::Backend;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_DIM: usize = IMAGE_SIDE * IMAGE_SIDE;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Gray-scale 28×28 images with class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    images: Vec<u8>,
    labels: Vec<u8>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>, n_classes: usize) -> Result<Self> {
        if images.len() != labels.len() * IMAGE_DIM {
            return Err(Error::CountMismatch { images: images.len() / IMAGE_DIM, labels: labels.len() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::Label { label: l as usize, classes: n_classes });
        }
        Ok(Self { images, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * IMAGE_DIM..(i + 1) * IMAGE_DIM]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut images = Vec::with_capacity(indices.len() * IMAGE_DIM);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        Dataset {
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// The first `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n * IMAGE_DIM].to_vec(),
            labels: self.labels[..n].to_vec(),
            n_classes: self.n_classes,
        }
    }

    /// Subtract `offset` from every label, e.g. 1-based letter classes to
    /// 0-based.
    pub fn shift_labels(self, offset: u8) -> Result<Dataset> {
        if let Some(&l) = self.labels.iter().find(|&&l| l < offset) {
            return Err(Error::Label { label: l as usize, classes: self.n_classes });
        }
        let labels = self.labels.iter().map(|&l| l - offset).collect();
        Dataset::new(self.images, labels, self.n_classes - offset as usize)
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parse one IDX file (plain or gzip) whose magic must be `magic`. Returns
/// the dimension sizes and the payload.
pub fn read_idx(path: impl AsRef<Path>, magic: u32) -> Result<(Vec<usize>, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let truncated = |expected: usize| Error::Truncated { path: path.to_path_buf(), expected, found: bytes.len() };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    let found = word(0);
    if found != magic {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected: magic, found });
    }
    let ndim = (magic & 0xff) as usize;
    let header = 4 * (1 + ndim);
    if bytes.len() < header {
        return Err(truncated(header));
    }
    let dims: Vec<usize> = (1..=ndim).map(|i| word(i) as usize).collect();
    let payload: usize = dims.iter().product();
    if bytes.len() - header < payload {
        return Err(Error::Truncated { path: path.to_path_buf(), expected: payload, found: bytes.len() - header });
    }
    Ok((dims, bytes[header..header + payload].to_vec()))
}

/// Load an image file and its label file. The class count is one more than
/// the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (idims, images) = read_idx(images_path, IMAGES_MAGIC)?;
    let (ldims, labels) = read_idx(labels_path, LABELS_MAGIC)?;
    if idims[1] != IMAGE_SIDE || idims[2] != IMAGE_SIDE {
        return Err(Error::Geometry { rows: idims[1], cols: idims[2] });
    }
    if idims[0] != ldims[0] {
        return Err(Error::CountMismatch { images: idims[0], labels: ldims[0] });
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    Dataset::new(images, labels, n_classes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let res = if path.extension().is_some_and(|e| e == "gz") {
        let mut gz = GzEncoder::new(BufWriter::new(file), Compression::default());
        gz.write_all(bytes).and_then(|_| gz.finish()).and_then(|mut w| w.flush())
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(bytes).and_then(|_| w.flush())
    };
    res.map_err(|e| Error::io(path, e))
}

/// Write a dataset as an IDX pair; a `.gz` extension compresses.
pub fn write_idx(ds: &Dataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let n = ds.len() as u32;
    let mut img = Vec::with_capacity(16 + ds.images.len());
    for w in [IMAGES_MAGIC, n, IMAGE_SIDE as u32, IMAGE_SIDE as u32] {
        img.extend_from_slice(&w.to_be_bytes());
    }
    img.extend_from_slice(&ds.images);
    write_bytes(images_path.as_ref(), &img)?;
    let mut lab = Vec::with_capacity(8 + ds.labels.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend_from_slice(&ds.labels);
    write_bytes(labels_path.as_ref(), &lab)
}

/// Hold back one sample in `ratio` for validation: the indices are shuffled
/// with the seed and the first `n / ratio` go to validation. Returns
/// `(train, validation)`.
pub fn split_validation(ds: &Dataset, ratio: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if ratio < 2 {
        return Err(Error::Spec(format!("validation ratio 1:{ratio} leaves nothing to train on")));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    // a stream distinct from weight init and batch shuffling
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    rng.long_jump();
    order.shuffle(&mut rng);
    let (val, train) = order.split_at(ds.len() / ratio);
    Ok((ds.subset(train), ds.subset(val)))
}

/// A dataset whose pixels are already encoded in a backend's scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet<S> {
    inputs: Vec<S>,
    labels: Vec<u8>,
    dim: usize,
    classes: usize,
}

impl<S: Copy> EncodedSet<S> {
    pub fn new(inputs: Vec<S>, labels: Vec<u8>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 || inputs.len() != labels.len() * dim {
            return Err(Error::CountMismatch { images: inputs.len() / dim.max(1), labels: labels.len() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Label { label: l as usize, classes });
        }
        Ok(Self { inputs, labels, dim, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input(&self, i: usize) -> &[S] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn inputs(&self) -> &[S] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

fn encode_with<S: Copy>(ds: &Dataset, table: &[S; 256]) -> EncodedSet<S> {
    EncodedSet {
        inputs: ds.images.iter().map(|&p| table[p as usize]).collect(),
        labels: ds.labels.clone(),
        dim: IMAGE_DIM,
        classes: ds.n_classes,
    }
}

/// Encode every pixel as `p / 256` in the backend; `p = 0` is the backend's
/// zero.
pub fn convert<B: Backend>(ds: &Dataset, backend: &B) -> EncodedSet<B::Scalar> {
    let table: [B::Scalar; 256] = std::array::from_fn(|p| backend.encode_pixel(p as u8));
    encode_with(ds, &table)
}

/// Pixel format `Q0.8`: the raw byte is exactly the code of `p / 256`.
pub fn pixel_format() -> FixedFormat {
    FixedFormat::new(0, 8).expect("valid")
}

/// LNS encoding of `p / 256` using only log-domain additions over the set
/// bits of `p` (at most eight `⊞`), instead of a floating-point `log2`.
pub fn pixel_to_lns_approx(p: u8, delta: &DeltaApproximator) -> LnsScalar {
    lns::fixed_to_lns_approx(FixedScalar(p as i64), pixel_format(), delta)
}

/// [`convert`] through the backend's approximate pixel path (for LNS,
/// [`pixel_to_lns_approx`] with the general evaluator).
pub fn convert_approx<B: Backend>(ds: &Dataset, backend: &B) -> EncodedSet<B::Scalar> {
    let table: [B::Scalar; 256] = std::array::from_fn(|p| backend.encode_pixel_approx(p as u8));
    encode_with(ds, &table)
}
