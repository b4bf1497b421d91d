//! Dense row-major vectors and matrices, and the multiply-accumulate kernels
//! built on an [`Arith`] context.
//!
//! With approximate `⊞` addition is not associative, so the accumulation order
//! is part of every kernel's contract: products are folded left to right over
//! ascending inner index starting from zero, and the bias (if any) is added
//! last. Zero operands are skipped, which is exact because zero absorbs under
//! multiplication and is the identity of addition.

use crate::delta::DeltaApproximator;
use crate::error::{Error, Result};
use crate::fixed::{FixedFormat, FixedScalar};
use crate::lns::{self, LnsScalar};

/// The ring-like operations a numeric backend provides.
pub trait Arith {
    type Scalar: Copy + PartialEq + std::fmt::Debug;

    fn zero(&self) -> Self::Scalar;
    fn is_zero(&self, a: Self::Scalar) -> bool;
    fn mul(&self, a: Self::Scalar, b: Self::Scalar) -> Self::Scalar;
    fn add(&self, a: Self::Scalar, b: Self::Scalar) -> Self::Scalar;
    fn sub(&self, a: Self::Scalar, b: Self::Scalar) -> Self::Scalar;
}

impl Arith for DeltaApproximator {
    type Scalar = LnsScalar;

    fn zero(&self) -> LnsScalar {
        LnsScalar::ZERO
    }

    #[inline]
    fn is_zero(&self, a: LnsScalar) -> bool {
        a.is_zero()
    }

    #[inline]
    fn mul(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        lns::mul(a, b, self.format())
    }

    #[inline]
    fn add(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        lns::add(a, b, self)
    }

    #[inline]
    fn sub(&self, a: LnsScalar, b: LnsScalar) -> LnsScalar {
        lns::sub(a, b, self)
    }
}

impl Arith for FixedFormat {
    type Scalar = FixedScalar;

    fn zero(&self) -> FixedScalar {
        FixedScalar::ZERO
    }

    #[inline]
    fn is_zero(&self, a: FixedScalar) -> bool {
        a.0 == 0
    }

    #[inline]
    fn mul(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        FixedFormat::mul(self, a, b)
    }

    #[inline]
    fn add(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        FixedFormat::add(self, a, b)
    }

    #[inline]
    fn sub(&self, a: FixedScalar, b: FixedScalar) -> FixedScalar {
        FixedFormat::sub(self, a, b)
    }
}

/// IEEE double arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct F64Arith;

impl Arith for F64Arith {
    type Scalar = f64;

    fn zero(&self) -> f64 {
        0.0
    }

    #[inline]
    fn is_zero(&self, a: f64) -> bool {
        a == 0.0
    }

    #[inline]
    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }

    #[inline]
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }

    #[inline]
    fn sub(&self, a: f64, b: f64) -> f64 {
        a - b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Copy> Vector<T> {
    pub fn from_vec(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn filled(len: usize, v: T) -> Self {
        Self { data: vec![v; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, i: usize) -> T {
        self.data[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} elements for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

pub type LnsVector = Vector<LnsScalar>;
pub type LnsMatrix = Matrix<LnsScalar>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Shape(what()))
    }
}

/// Fold of `a_k ⊡ b_k` over ascending `k`, starting from zero.
#[inline]
pub fn dot<A: Arith>(ar: &A, a: &[A::Scalar], b: &[A::Scalar]) -> A::Scalar {
    let mut acc = ar.zero();
    for (&x, &y) in a.iter().zip(b) {
        if ar.is_zero(y) || ar.is_zero(x) {
            continue;
        }
        acc = ar.add(acc, ar.mul(x, y));
    }
    acc
}

/// `out_i = (⊞_j W_ij ⊡ x_j) ⊞ b_i`, written into `out`.
pub fn gemv_into<A: Arith>(
    ar: &A,
    w: &Matrix<A::Scalar>,
    x: &[A::Scalar],
    bias: Option<&[A::Scalar]>,
    out: &mut [A::Scalar],
) -> Result<()> {
    check(x.len() == w.cols, || format!("gemv: {}x{} matrix, vector of {}", w.rows, w.cols, x.len()))?;
    check(out.len() == w.rows, || format!("gemv: {} rows, output of {}", w.rows, out.len()))?;
    if let Some(b) = bias {
        check(b.len() == w.rows, || format!("gemv: {} rows, bias of {}", w.rows, b.len()))?;
    }
    // collect nonzero input positions once; sparse inputs (images) skip most columns
    let nz: Vec<usize> = (0..x.len()).filter(|&j| !ar.is_zero(x[j])).collect();
    for (i, o) in out.iter_mut().enumerate() {
        let row = w.row(i);
        let mut acc = ar.zero();
        for &j in &nz {
            let wij = row[j];
            if !ar.is_zero(wij) {
                acc = ar.add(acc, ar.mul(wij, x[j]));
            }
        }
        if let Some(b) = bias {
            acc = ar.add(acc, b[i]);
        }
        *o = acc;
    }
    Ok(())
}

pub fn gemv<A: Arith>(
    ar: &A,
    w: &Matrix<A::Scalar>,
    x: &Vector<A::Scalar>,
    bias: &Vector<A::Scalar>,
) -> Result<Vector<A::Scalar>> {
    let mut out = vec![ar.zero(); w.rows];
    gemv_into(ar, w, x.as_slice(), Some(bias.as_slice()), &mut out)?;
    Ok(Vector::from_vec(out))
}

/// `out_j = ⊞_i W_ij ⊡ y_i`, folded over ascending `i`.
pub fn gemv_transpose_into<A: Arith>(
    ar: &A,
    w: &Matrix<A::Scalar>,
    y: &[A::Scalar],
    out: &mut [A::Scalar],
) -> Result<()> {
    check(y.len() == w.rows, || format!("gemv^T: {}x{} matrix, vector of {}", w.rows, w.cols, y.len()))?;
    check(out.len() == w.cols, || format!("gemv^T: {} cols, output of {}", w.cols, out.len()))?;
    out.iter_mut().for_each(|o| *o = ar.zero());
    for (i, &yi) in y.iter().enumerate() {
        if ar.is_zero(yi) {
            continue;
        }
        for (o, &wij) in out.iter_mut().zip(w.row(i)) {
            if !ar.is_zero(wij) {
                *o = ar.add(*o, ar.mul(wij, yi));
            }
        }
    }
    Ok(())
}

pub fn gemv_transpose<A: Arith>(
    ar: &A,
    w: &Matrix<A::Scalar>,
    y: &Vector<A::Scalar>,
) -> Result<Vector<A::Scalar>> {
    let mut out = vec![ar.zero(); w.cols];
    gemv_transpose_into(ar, w, y.as_slice(), &mut out)?;
    Ok(Vector::from_vec(out))
}

pub fn outer_product<A: Arith>(
    ar: &A,
    u: &Vector<A::Scalar>,
    v: &Vector<A::Scalar>,
) -> Matrix<A::Scalar> {
    let data = u
        .as_slice()
        .iter()
        .flat_map(|&a| v.as_slice().iter().map(move |&b| ar.mul(a, b)))
        .collect();
    Matrix { rows: u.len(), cols: v.len(), data }
}

/// `acc_ij ← acc_ij ⊞ (u_i ⊡ v_j)`: one sample's contribution to a summed
/// weight gradient.
pub fn accumulate_outer<A: Arith>(
    ar: &A,
    acc: &mut Matrix<A::Scalar>,
    u: &[A::Scalar],
    v: &[A::Scalar],
) -> Result<()> {
    check(acc.rows == u.len() && acc.cols == v.len(), || {
        format!("outer: {}x{} accumulator, vectors of {} and {}", acc.rows, acc.cols, u.len(), v.len())
    })?;
    let nz: Vec<usize> = (0..v.len()).filter(|&j| !ar.is_zero(v[j])).collect();
    for (i, &ui) in u.iter().enumerate() {
        if ar.is_zero(ui) {
            continue;
        }
        let row = &mut acc.data[i * acc.cols..(i + 1) * acc.cols];
        for &j in &nz {
            row[j] = ar.add(row[j], ar.mul(ui, v[j]));
        }
    }
    Ok(())
}

/// `acc_i ← acc_i ⊞ v_i`.
pub fn accumulate<A: Arith>(ar: &A, acc: &mut [A::Scalar], v: &[A::Scalar]) -> Result<()> {
    check(acc.len() == v.len(), || format!("accumulate: {} vs {}", acc.len(), v.len()))?;
    for (a, &b) in acc.iter_mut().zip(v) {
        if !ar.is_zero(b) {
            *a = ar.add(*a, b);
        }
    }
    Ok(())
}

pub fn elementwise_mul<A: Arith>(
    ar: &A,
    a: &Vector<A::Scalar>,
    b: &Vector<A::Scalar>,
) -> Result<Vector<A::Scalar>> {
    check(a.len() == b.len(), || format!("elementwise: {} vs {}", a.len(), b.len()))?;
    Ok(Vector::from_vec(
        a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| ar.mul(x, y)).collect(),
    ))
}

pub fn elementwise_add<A: Arith>(
    ar: &A,
    a: &Vector<A::Scalar>,
    b: &Vector<A::Scalar>,
) -> Result<Vector<A::Scalar>> {
    check(a.len() == b.len(), || format!("elementwise: {} vs {}", a.len(), b.len()))?;
    Ok(Vector::from_vec(
        a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| ar.add(x, y)).collect(),
    ))
}
