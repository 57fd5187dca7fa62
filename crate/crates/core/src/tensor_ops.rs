//! Multi-convolution, its adjoint and the matrix norms used throughout the crate.
//!
//! All convolutions are "full": an encoding column of length `N - n + 1`
//! convolved with an atom of length `n` yields a signal of length `N`.
//! Kernels are direct summation in `O(N n K)`; zero encoding entries are
//! skipped, which matters because projected encodings are sparse.

use std::borrow::Cow;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};

use crate::error::{CsdlError, Result};

/// A dense real signal of length `N ≥ 1` with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Array1<f64>);

impl Signal {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CsdlError::Dimension("signal must have length >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CsdlError::Input(format!("signal entry {i} is not finite")));
        }
        Ok(Signal(values))
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from(values))
    }

    pub fn zeros(len: usize) -> Self {
        Signal(Array1::zeros(len))
    }

    pub(crate) fn from_array_unchecked(values: Array1<f64>) -> Self {
        Signal(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("signals are contiguous")
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// `‖self - other‖₂²`.
    pub fn squared_distance(&self, other: &Signal) -> Result<f64> {
        if self.len() != other.len() {
            return Err(CsdlError::Dimension(format!(
                "signal lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

/// A nonnegative `(N - n + 1) × K` encoding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMatrix(Array2<f64>);

impl EncodingMatrix {
    /// Validates nonnegativity and finiteness.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CsdlError::Input(format!("encoding entry {v} is not finite")));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(CsdlError::Input(format!("encoding entry {v} is negative")));
        }
        Ok(EncodingMatrix(to_column_major(values)))
    }

    pub fn zeros(rows: usize, atoms: usize) -> Self {
        EncodingMatrix(Array2::zeros((rows, atoms).f()))
    }

    pub(crate) fn from_array_unchecked(values: Array2<f64>) -> Self {
        EncodingMatrix(values)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn atoms(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Sum of entries (entries are nonnegative, so this is `‖R‖_{1,1}`).
    pub fn l11_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// Nonzero entries as `(row, atom, value)` triplets in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (k, col) in self.0.columns().into_iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    out.push((i, k, v));
                }
            }
        }
        out
    }
}

/// An `n × K` dictionary whose atoms have L2 norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary(Array2<f64>);

/// Slack allowed on `‖D_k‖₂ ≤ 1` when validating user-supplied dictionaries.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

impl Dictionary {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CsdlError::Dimension("dictionary must be at least 1 x 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CsdlError::Input("dictionary has a non-finite entry".into()));
        }
        for (k, col) in values.columns().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 + UNIT_NORM_TOLERANCE {
                return Err(CsdlError::Input(format!(
                    "dictionary atom {k} has norm {norm} > 1"
                )));
            }
        }
        Ok(Dictionary(to_column_major(values)))
    }

    pub(crate) fn from_array_unchecked(values: Array2<f64>) -> Self {
        Dictionary(values)
    }

    /// Atom length `n`.
    pub fn atom_length(&self) -> usize {
        self.0.nrows()
    }

    pub fn atoms(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.0
            .columns()
            .into_iter()
            .map(|c| c.dot(&c).sqrt())
            .collect()
    }
}

pub(crate) fn to_column_major(values: Array2<f64>) -> Array2<f64> {
    if values.t().is_standard_layout() {
        return values;
    }
    let mut out = Array2::zeros(values.raw_dim().f());
    out.assign(&values);
    out
}

/// Contiguous copy-free access to column `k` whenever the layout allows it.
pub(crate) fn column<'a>(a: &'a ArrayView2<'_, f64>, k: usize) -> Cow<'a, [f64]> {
    let col = a.column(k);
    match col.to_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(col.to_vec()),
    }
}

#[inline]
fn axpy(out: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// Accumulates the full convolution `source * y` into `out` (`len(out) = len(source) + len(y) - 1`).
fn full_convolve_into(out: &mut [f64], y: &[f64], source: &[f64]) {
    let n = source.len();
    for (i, &w) in y.iter().enumerate() {
        if w != 0.0 {
            axpy(&mut out[i..i + n], w, source);
        }
    }
}

/// Accumulates `scale · valid_correlate(e, kernel)` into `out`.
fn valid_correlate_into(out: &mut [f64], e: &[f64], kernel: &[f64], scale: f64) {
    let len = out.len();
    for (m, &w) in kernel.iter().enumerate() {
        if w != 0.0 {
            axpy(out, scale * w, &e[m..m + len]);
        }
    }
}

fn check_pair(r: &ArrayView2<'_, f64>, d: &ArrayView2<'_, f64>) -> Result<usize> {
    if r.ncols() != d.ncols() {
        return Err(CsdlError::Dimension(format!(
            "encoding has {} columns but dictionary has {}",
            r.ncols(),
            d.ncols()
        )));
    }
    if r.nrows() == 0 || d.nrows() == 0 {
        return Err(CsdlError::Dimension(
            "encoding and dictionary need at least one row".into(),
        ));
    }
    Ok(r.nrows() + d.nrows() - 1)
}

/// `R ⊗ D = Σ_k R_k * D_k` (full convolution), a signal of length `rows(R) + rows(D) - 1`.
pub fn multi_convolve(r: ArrayView2<'_, f64>, d: ArrayView2<'_, f64>) -> Result<Signal> {
    let len = check_pair(&r, &d)?;
    let mut out = vec![0.0; len];
    for k in 0..r.ncols() {
        full_convolve_into(&mut out, &column(&r, k), &column(&d, k));
    }
    Ok(Signal::from_array_unchecked(Array1::from(out)))
}

/// Valid cross-correlation: `out[j] = Σ_m e[j + m] · kernel[m]`, of length
/// `len(e) - len(kernel) + 1`. This is the transpose of the convolution matrix
/// of `kernel` applied to `e`.
pub fn valid_correlate(e: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    if kernel.is_empty() || kernel.len() > e.len() {
        return Err(CsdlError::Dimension(format!(
            "kernel of length {} does not fit a signal of length {}",
            kernel.len(),
            e.len()
        )));
    }
    let mut out = vec![0.0; e.len() - kernel.len() + 1];
    valid_correlate_into(&mut out, e, kernel, 1.0);
    Ok(out)
}

fn vector_norm<'a>(values: impl Iterator<Item = &'a f64>, p: f64) -> f64 {
    if p == 0.0 {
        values.filter(|v| **v != 0.0).count() as f64
    } else if p == f64::INFINITY {
        values.fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        values.map(|v| v.abs()).sum()
    } else if p == 2.0 {
        values.map(|v| v * v).sum::<f64>().sqrt()
    } else {
        values.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `‖A‖_{p,q}`: the `q`-norm of the vector of column `p`-norms.
///
/// `p` and `q` range over `[0, ∞]`; order 0 counts nonzeros and `∞` takes the maximum.
pub fn lpq_norm(a: ArrayView2<'_, f64>, p: f64, q: f64) -> Result<f64> {
    for order in [p, q] {
        if order.is_nan() || order < 0.0 {
            return Err(CsdlError::Parameter(format!("norm order {order} outside [0, inf]")));
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CsdlError::Input("matrix has a non-finite entry".into()));
    }
    let column_norms: Vec<f64> = a
        .columns()
        .into_iter()
        .map(|c| vector_norm(c.iter(), p))
        .collect();
    Ok(vector_norm(column_norms.iter(), q))
}

/// Vector `q`-norm with the same conventions as [`lpq_norm`].
pub fn lq_norm(values: &[f64], q: f64) -> f64 {
    vector_norm(values.iter(), q)
}

/// The least-squares objective `‖Y - R ⊗ D‖₂²` and its gradients in `R` and `D`.
#[derive(Debug, Clone)]
pub struct ObjectiveGradients {
    pub objective: f64,
    pub grad_r: Array2<f64>,
    pub grad_d: Array2<f64>,
}

fn check_signal(y: &[f64], r: &ArrayView2<'_, f64>, d: &ArrayView2<'_, f64>) -> Result<()> {
    let len = check_pair(r, d)?;
    if y.len() != len {
        return Err(CsdlError::Dimension(format!(
            "signal has length {} but rows(R) + rows(D) - 1 = {len}",
            y.len()
        )));
    }
    Ok(())
}

/// Residual `E = R ⊗ D - Y`.
pub(crate) fn residual(y: &[f64], r: &ArrayView2<'_, f64>, d: &ArrayView2<'_, f64>) -> Vec<f64> {
    let mut e = vec![0.0; y.len()];
    for k in 0..r.ncols() {
        full_convolve_into(&mut e, &column(r, k), &column(d, k));
    }
    e.iter_mut().zip(y).for_each(|(v, t)| *v -= t);
    e
}

pub(crate) fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `∂/∂R ‖Y - R ⊗ D‖² = 2 · corr(E, D_k)` column by column.
pub(crate) fn gradient_r(e: &[f64], r_rows: usize, d: &ArrayView2<'_, f64>) -> Array2<f64> {
    let mut g = Array2::zeros((r_rows, d.ncols()).f());
    for k in 0..d.ncols() {
        let mut col = g.column_mut(k);
        let out = col.as_slice_mut().expect("column-major gradient");
        valid_correlate_into(out, e, &column(d, k), 2.0);
    }
    g
}

/// `∂/∂D ‖Y - R ⊗ D‖² = 2 · corr(E, R_k)` column by column.
pub(crate) fn gradient_d(e: &[f64], r: &ArrayView2<'_, f64>, d_rows: usize) -> Array2<f64> {
    let mut g = Array2::zeros((d_rows, r.ncols()).f());
    for k in 0..r.ncols() {
        let mut col = g.column_mut(k);
        let out = col.as_slice_mut().expect("column-major gradient");
        valid_correlate_into(out, e, &column(r, k), 2.0);
    }
    g
}

pub fn objective_and_gradients(
    y: &Signal,
    r: ArrayView2<'_, f64>,
    d: ArrayView2<'_, f64>,
) -> Result<ObjectiveGradients> {
    check_signal(y.as_slice(), &r, &d)?;
    let e = residual(y.as_slice(), &r, &d);
    Ok(ObjectiveGradients {
        objective: squared_norm(&e),
        grad_r: gradient_r(&e, r.nrows(), &d),
        grad_d: gradient_d(&e, &r, d.nrows()),
    })
}

/// The banded `N × (N - n + 1)` matrix `T` with `T y = source * y`.
///
/// Materialized only for testing the direct-summation kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionMatrix {
    source: Vec<f64>,
    target_length: usize,
    matrix: Array2<f64>,
}

impl ConvolutionMatrix {
    pub fn new(source: &[f64], target_length: usize) -> Result<Self> {
        let n = source.len();
        if n == 0 || n > target_length {
            return Err(CsdlError::Dimension(format!(
                "source of length {n} does not fit target length {target_length}"
            )));
        }
        let cols = target_length - n + 1;
        let matrix = Array2::from_shape_fn((target_length, cols), |(i, j)| {
            if i >= j && i - j < n {
                source[i - j]
            } else {
                0.0
            }
        });
        Ok(ConvolutionMatrix {
            source: source.to_vec(),
            target_length,
            matrix,
        })
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn target_length(&self) -> usize {
        self.target_length
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.matrix.ncols() {
            return Err(CsdlError::Dimension(format!(
                "expected a vector of length {}, got {}",
                self.matrix.ncols(),
                y.len()
            )));
        }
        // Row-by-row in column order, so the result matches `multi_convolve` bit for bit.
        Ok(self
            .matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(y).fold(0.0, |acc, (t, v)| acc + t * v))
            .collect())
    }
}
