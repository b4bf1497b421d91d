//! Versioned binary checkpoints for trained models and pre-encoded datasets.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes   "LNSNETCK" (model) or "LNSNETDS" (encoded dataset)
//! version   u32       1
//! numeric   u8 kind (0 float, 1 fixed, 2 lns), u8 int bits, u8 frac bits,
//!           general approx, softmax approx (u8 mode, f64 d_max, f64 r each),
//!           u8 pow2 table bits
//! beta      f64
//! model:    u32 layer count L, (L + 1) × u32 sizes, then per layer the
//!           weights (row-major) and bias as backend words
//! dataset:  u32 n, u32 dim, u32 classes, n label bytes, n × dim words
//! ```
//!
//! A word is 8 bytes for the float backend (IEEE bits) and 4 bytes otherwise:
//! the two's-complement code for fixed point, and for LNS the packed word with
//! the sign above a `q_i + q_f + 1`-bit code field.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::EncodedSet;
use crate::error::{Error, Result};
use crate::nn::backend::{Backend, FixedBackend, FloatBackend, LnsBackend};
use crate::nn::config::{ApproxConfig, NumericConfig};
use crate::nn::model::{Activation, Layer, MlpModel};
use crate::tensor::Matrix;

pub const MODEL_MAGIC: &[u8; 8] = b"LNSNETCK";
pub const DATASET_MAGIC: &[u8; 8] = b"LNSNETDS";
pub const VERSION: u32 = 1;

/// A model of any backend together with the settings that rebuild it.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Float(MlpModel<FloatBackend>),
    Fixed(MlpModel<FixedBackend>),
    Lns(MlpModel<LnsBackend>),
}

/// Backends that can be stored in an [`AnyModel`].
pub trait Checkpointable: Backend + Sized {
    fn wrap(model: MlpModel<Self>) -> AnyModel;
}

impl Checkpointable for FloatBackend {
    fn wrap(model: MlpModel<Self>) -> AnyModel {
        AnyModel::Float(model)
    }
}

impl Checkpointable for FixedBackend {
    fn wrap(model: MlpModel<Self>) -> AnyModel {
        AnyModel::Fixed(model)
    }
}

impl Checkpointable for LnsBackend {
    fn wrap(model: MlpModel<Self>) -> AnyModel {
        AnyModel::Lns(model)
    }
}

impl AnyModel {
    pub fn sizes(&self) -> Vec<usize> {
        match self {
            AnyModel::Float(m) => m.sizes(),
            AnyModel::Fixed(m) => m.sizes(),
            AnyModel::Lns(m) => m.sizes(),
        }
    }

    pub fn decoded_parameters(&self) -> Vec<f64> {
        match self {
            AnyModel::Float(m) => m.decoded_parameters(),
            AnyModel::Fixed(m) => m.decoded_parameters(),
            AnyModel::Lns(m) => m.decoded_parameters(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub numeric: NumericConfig,
    pub beta: f64,
    pub model: AnyModel,
}

impl Checkpoint {
    pub fn new<B: Checkpointable>(numeric: NumericConfig, model: MlpModel<B>) -> Self {
        Self { numeric, beta: model.backend().beta(), model: B::wrap(model) }
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let mut buf = Vec::new();
        write_header(&mut buf, MODEL_MAGIC, &self.numeric, self.beta);
        match &self.model {
            AnyModel::Float(m) => write_model(&mut buf, m),
            AnyModel::Fixed(m) => write_model(&mut buf, m),
            AnyModel::Lns(m) => write_model(&mut buf, m),
        }
        w.write_all(&buf).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let (numeric, beta) = read_header(&mut cur, MODEL_MAGIC)?;
        let model = match &numeric {
            NumericConfig::Float => AnyModel::Float(read_model(&mut cur, numeric.float_backend(beta))?),
            NumericConfig::Fixed { .. } => AnyModel::Fixed(read_model(&mut cur, numeric.fixed_backend(beta)?)?),
            NumericConfig::Lns { .. } => AnyModel::Lns(read_model(&mut cur, numeric.lns_backend(beta)?)?),
        };
        cur.finish()?;
        Ok(Self { numeric, beta, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read(&mut r)
    }
}

/// Persist a pre-encoded dataset together with the numeric settings it was
/// encoded for.
pub fn save_encoded<B: Backend>(
    path: impl AsRef<Path>,
    numeric: &NumericConfig,
    backend: &B,
    set: &EncodedSet<B::Scalar>,
) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_header(&mut buf, DATASET_MAGIC, numeric, backend.beta());
    for v in [set.len(), set.dim(), set.classes()] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(set.labels());
    for &s in set.inputs() {
        put_word(&mut buf, backend, s);
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reload a dataset written by [`save_encoded`]; its numeric settings must
/// equal `numeric`.
pub fn load_encoded<B: Backend>(
    path: impl AsRef<Path>,
    numeric: &NumericConfig,
    backend: &B,
) -> Result<EncodedSet<B::Scalar>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let (stored, _) = read_header(&mut cur, DATASET_MAGIC)?;
    if &stored != numeric {
        return Err(Error::Incompatible(format!(
            "dataset encoded for {stored:?}, requested {numeric:?}"
        )));
    }
    let n = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let classes = cur.u32()? as usize;
    let labels = cur.take(n)?.to_vec();
    let total = n.checked_mul(dim).ok_or_else(|| Error::Checkpoint("dataset size overflows".into()))?;
    let inputs = (0..total).map(|_| get_word(&mut cur, backend)).collect::<Result<Vec<_>>>()?;
    cur.finish()?;
    EncodedSet::new(inputs, labels, dim, classes)
}

fn approx_fields(a: &ApproxConfig) -> (u8, f64, f64) {
    match *a {
        ApproxConfig::Exact => (0, 0.0, 0.0),
        ApproxConfig::Lut { d_max, resolution } => (1, d_max, resolution),
        ApproxConfig::BitShift => (2, 0.0, 0.0),
    }
}

fn write_header(buf: &mut Vec<u8>, magic: &[u8; 8], numeric: &NumericConfig, beta: f64) {
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let none = ApproxConfig::Exact;
    let (kind, ib, fb, approx, softmax, pow2) = match numeric {
        NumericConfig::Float => (0u8, 0, 0, &none, &none, 0),
        NumericConfig::Fixed { int_bits, frac_bits } => (1, *int_bits, *frac_bits, &none, &none, 0),
        NumericConfig::Lns { int_bits, frac_bits, approx, softmax, pow2_bits } => {
            (2, *int_bits, *frac_bits, approx, softmax, *pow2_bits)
        }
    };
    buf.extend_from_slice(&[kind, ib as u8, fb as u8]);
    for a in [approx, softmax] {
        let (mode, d_max, r) = approx_fields(a);
        buf.push(mode);
        buf.extend_from_slice(&d_max.to_le_bytes());
        buf.extend_from_slice(&r.to_le_bytes());
    }
    buf.push(pow2 as u8);
    buf.extend_from_slice(&beta.to_le_bytes());
}

fn read_approx(cur: &mut Cursor) -> Result<ApproxConfig> {
    let mode = cur.u8()?;
    let d_max = cur.f64()?;
    let resolution = cur.f64()?;
    match mode {
        0 => Ok(ApproxConfig::Exact),
        1 => Ok(ApproxConfig::Lut { d_max, resolution }),
        2 => Ok(ApproxConfig::BitShift),
        m => Err(Error::Checkpoint(format!("unknown approximation mode {m}"))),
    }
}

fn read_header(cur: &mut Cursor, magic: &[u8; 8]) -> Result<(NumericConfig, f64)> {
    if cur.take(8)? != magic {
        return Err(Error::Checkpoint(format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = cur.u8()?;
    let int_bits = cur.u8()? as u32;
    let frac_bits = cur.u8()? as u32;
    let approx = read_approx(cur)?;
    let softmax = read_approx(cur)?;
    let pow2_bits = cur.u8()? as u32;
    let beta = cur.f64()?;
    let numeric = match kind {
        0 => NumericConfig::Float,
        1 => NumericConfig::Fixed { int_bits, frac_bits },
        2 => NumericConfig::Lns { int_bits, frac_bits, approx, softmax, pow2_bits },
        k => return Err(Error::Checkpoint(format!("unknown backend kind {k}"))),
    };
    Ok((numeric, beta))
}

fn put_word<B: Backend>(buf: &mut Vec<u8>, b: &B, s: B::Scalar) {
    let w = b.to_word(s).to_le_bytes();
    buf.extend_from_slice(&w[..b.word_bytes()]);
}

fn get_word<B: Backend>(cur: &mut Cursor, b: &B) -> Result<B::Scalar> {
    let mut w = [0u8; 8];
    let n = b.word_bytes();
    w[..n].copy_from_slice(cur.take(n)?);
    Ok(b.from_word(u64::from_le_bytes(w)))
}

fn write_model<B: Backend>(buf: &mut Vec<u8>, m: &MlpModel<B>) {
    let sizes = m.sizes();
    buf.extend_from_slice(&(m.layers().len() as u32).to_le_bytes());
    for s in sizes {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for layer in m.layers() {
        for &s in layer.weights.as_slice().iter().chain(&layer.bias) {
            put_word(buf, m.backend(), s);
        }
    }
}

fn read_model<B: Backend>(cur: &mut Cursor, backend: B) -> Result<MlpModel<B>> {
    let count = cur.u32()? as usize;
    if count == 0 || count > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {count}")));
    }
    let sizes = (0..=count).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(count);
    for (l, pair) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let n = fan_in
            .checked_mul(fan_out)
            .filter(|&n| n <= cur.remaining())
            .ok_or_else(|| Error::Checkpoint(format!("layer {l} larger than the file")))?;
        let weights = (0..n).map(|_| get_word(cur, &backend)).collect::<Result<Vec<_>>>()?;
        let bias = (0..fan_out).map(|_| get_word(cur, &backend)).collect::<Result<Vec<_>>>()?;
        layers.push(Layer {
            weights: Matrix::from_vec(fan_out, fan_in, weights)?,
            bias,
            activation: if l + 1 == count { Activation::Softmax } else { Activation::LeakyRelu },
        });
    }
    MlpModel::from_layers(backend, layers)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Checkpoint(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}
