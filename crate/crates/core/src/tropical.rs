//! Scalar morphological primitives and max-plus linear algebra.
//!
//! Dilation and erosion of an input `x` by a structuring element `s`:
//!
//! ```text
//! x (+) s = max_k (x_k + s_k)          dilation
//! x (-) s = min_k (x_k - s_k)          erosion
//! ```
//!
//! Their soft relaxations replace max with a log-sum-exp of hardness `beta`:
//!
//! ```text
//! soft_dilate(x, s, b) =  (1/b) log sum_k exp(b (x_k + s_k))
//! soft_erode(x, s, b)  = -(1/b) log sum_k exp(b (s_k - x_k))
//! ```
//!
//! The soft forms sandwich the hard ones: `0 <= soft - hard <= ln(d)/beta`
//! for dilation (mirrored for erosion), so they converge as `beta -> inf`.
//! Log-sum-exp is always evaluated max-shifted, so no intermediate overflows
//! even for `beta` around `1e4` on inputs of magnitude `1e2`.
//!
//! [`TropicalMatrix`] carries the (max, +) semiring product
//! `out(i,k) = max_j (A(i,j) + B(j,k))`, which is how chains of pure
//! dilation layers compose; `-inf` is the additive identity and is legal
//! only inside matrices, never in [`Vector`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense finite real vector; the container for inputs and structuring elements.
///
/// Entries are validated finite at construction and the length never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T>(Vec<T>);

impl<T: Real> Vector<T> {
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::dim("vector must have length >= 1"));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::nonfinite(format!(
                "vector entry {bad} is {}",
                data[bad]
            )));
        }
        Ok(Vector(data))
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![T::zero(); len.max(1)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    /// Entrywise negation (stays finite, so no revalidation).
    pub fn neg(&self) -> Self {
        Vector(self.0.iter().map(|&v| -v).collect())
    }

    /// Append a trailing zero; the bias slot used by augmented layers.
    pub fn augmented(&self) -> Self {
        let mut data = self.0.clone();
        data.push(T::zero());
        Vector(data)
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T: Real> std::ops::Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T: Real> TryFrom<Vec<T>> for Vector<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Vector::new(v)
    }
}

/// Hardness `beta > 0` of the soft operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hardness<T>(T);

impl<T: Real> Hardness<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta.is_finite() && beta > T::zero()) {
            return Err(Error::invalid(format!("hardness beta must be > 0, got {beta}")));
        }
        Ok(Hardness(beta))
    }

    pub fn beta(self) -> T {
        self.0
    }
}

/// Which extremum a hard neuron takes; selects the subgradient rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphKind {
    Dilation,
    Erosion,
}

fn check_pair<T: Real>(x: &Vector<T>, s: &Vector<T>) -> Result<()> {
    if x.len() != s.len() {
        return Err(Error::dim(format!(
            "input has length {}, structuring element {}",
            x.len(),
            s.len()
        )));
    }
    Ok(())
}

/// Hard dilation `max_k (x_k + s_k)`.
pub fn dilate<T: Real>(x: &Vector<T>, s: &Vector<T>) -> Result<T> {
    check_pair(x, s)?;
    Ok(argmax_value(x.iter().zip(s.iter()).map(|(&a, &b)| a + b)).1)
}

/// Hard erosion `min_k (x_k - s_k)`.
pub fn erode<T: Real>(x: &Vector<T>, s: &Vector<T>) -> Result<T> {
    check_pair(x, s)?;
    Ok(argmin_value(x.iter().zip(s.iter()).map(|(&a, &b)| a - b)).1)
}

/// First index attaining the maximum (ties: lowest index), with the value.
pub(crate) fn argmax_value<T: Real>(it: impl Iterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::neg_infinity());
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// First index attaining the minimum (ties: lowest index), with the value.
pub(crate) fn argmin_value<T: Real>(it: impl Iterator<Item = T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (i, v) in it.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

/// Max-shifted `(1/beta) log sum_k exp(beta v_k)` over an in-place buffer.
///
/// Returns the value; `weights_out`, when given, receives the softmax weights
/// `exp(beta (v_k - m)) / sum` (nonnegative, summing to 1).
pub(crate) fn log_sum_exp_scaled<T: Real>(
    values: &[T],
    beta: T,
    mut weights_out: Option<&mut Vec<T>>,
) -> T {
    let m = values
        .iter()
        .fold(T::neg_infinity(), |acc, &v| acc.max(v));
    let mut sum = T::zero();
    if let Some(w) = weights_out.as_deref_mut() {
        w.clear();
        w.reserve(values.len());
    }
    for &v in values {
        let e = ((v - m) * beta).exp();
        sum += e;
        if let Some(w) = weights_out.as_deref_mut() {
            w.push(e);
        }
    }
    if let Some(w) = weights_out {
        for e in w.iter_mut() {
            *e /= sum;
        }
    }
    m + sum.ln() / beta
}

/// Soft dilation `(1/beta) log sum_k exp(beta (x_k + s_k))`.
pub fn soft_dilate<T: Real>(x: &Vector<T>, s: &Vector<T>, h: Hardness<T>) -> Result<T> {
    check_pair(x, s)?;
    let v: Vec<T> = x.iter().zip(s.iter()).map(|(&a, &b)| a + b).collect();
    Ok(log_sum_exp_scaled(&v, h.beta(), None))
}

/// Soft erosion `-(1/beta) log sum_k exp(beta (s_k - x_k))`.
///
/// Evaluated as `-soft_dilate(-x, s, beta)`, which is the same expression and
/// makes the duality identity hold bit-for-bit.
pub fn soft_erode<T: Real>(x: &Vector<T>, s: &Vector<T>, h: Hardness<T>) -> Result<T> {
    Ok(-soft_dilate(&x.neg(), s, h)?)
}

/// Gradient of [`soft_dilate`] with respect to `x` and `s`.
///
/// Both are the softmax of `beta (x_k + s_k)`: nonnegative, summing to 1.
pub fn soft_dilate_grad<T: Real>(
    x: &Vector<T>,
    s: &Vector<T>,
    h: Hardness<T>,
) -> Result<(Vector<T>, Vector<T>)> {
    check_pair(x, s)?;
    let v: Vec<T> = x.iter().zip(s.iter()).map(|(&a, &b)| a + b).collect();
    let mut w = Vec::new();
    log_sum_exp_scaled(&v, h.beta(), Some(&mut w));
    let dx = Vector(w.clone());
    let ds = Vector(w);
    Ok((dx, ds))
}

/// Gradient of [`soft_erode`]: `dx_k = softmax_k(beta (s_k - x_k))`, `ds = -dx`.
pub fn soft_erode_grad<T: Real>(
    x: &Vector<T>,
    s: &Vector<T>,
    h: Hardness<T>,
) -> Result<(Vector<T>, Vector<T>)> {
    check_pair(x, s)?;
    let v: Vec<T> = x.iter().zip(s.iter()).map(|(&a, &b)| b - a).collect();
    let mut w = Vec::new();
    log_sum_exp_scaled(&v, h.beta(), Some(&mut w));
    let ds = Vector(w.iter().map(|&e| -e).collect());
    let dx = Vector(w);
    Ok((dx, ds))
}

/// Subgradient of the hard operations: one-hot at the selected extremum.
///
/// Ties break to the lowest index. For dilation both `dx` and `ds` carry +1
/// at the argmax of `x + s`; for erosion `dx` carries +1 and `ds` carries -1
/// at the argmin of `x - s`. This is why hard training touches exactly one
/// structuring-element entry per neuron per example.
pub fn hard_subgrad<T: Real>(
    x: &Vector<T>,
    s: &Vector<T>,
    kind: MorphKind,
) -> Result<(Vector<T>, Vector<T>)> {
    check_pair(x, s)?;
    let d = x.len();
    let mut dx = vec![T::zero(); d];
    let mut ds = vec![T::zero(); d];
    match kind {
        MorphKind::Dilation => {
            let (k, _) = argmax_value(x.iter().zip(s.iter()).map(|(&a, &b)| a + b));
            dx[k] = T::one();
            ds[k] = T::one();
        }
        MorphKind::Erosion => {
            let (k, _) = argmin_value(x.iter().zip(s.iter()).map(|(&a, &b)| a - b));
            dx[k] = T::one();
            ds[k] = -T::one();
        }
    }
    Ok((Vector(dx), Vector(ds)))
}

/// Matrix over the max-plus semiring: finite reals plus `-inf` as the
/// additive identity. `NaN` and `+inf` never enter.
#[derive(Debug, Clone, PartialEq)]
pub struct TropicalMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T: Real> TropicalMatrix<T> {
    pub fn new(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("tropical matrix dims must be >= 1"));
        }
        if entries.len() != rows * cols {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for (i, &v) in entries.iter().enumerate() {
            if v.is_nan() || v == T::infinity() {
                return Err(Error::nonfinite(format!(
                    "tropical entry {i} is {v}; only finite or -inf allowed"
                )));
            }
        }
        Ok(TropicalMatrix { rows, cols, entries })
    }

    /// Identity of the semiring: 0 on the diagonal, -inf elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![T::neg_infinity(); n * n];
        for i in 0..n {
            entries[i * n + i] = T::zero();
        }
        TropicalMatrix { rows: n, cols: n, entries }
    }

    /// All -inf: the additive-identity (annihilator) matrix.
    pub fn neg_inf(rows: usize, cols: usize) -> Self {
        TropicalMatrix {
            rows,
            cols,
            entries: vec![T::neg_infinity(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) -> Result<()> {
        if v.is_nan() || v == T::infinity() {
            return Err(Error::nonfinite(format!("tropical entry is {v}")));
        }
        self.entries[i * self.cols + j] = v;
        Ok(())
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    /// Row-major view of one row.
    pub fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }
}

/// Max-plus matrix product: `out(i,k) = max_j (A(i,j) + B(j,k))`.
///
/// `-inf` annihilates: a path through a blocked entry contributes nothing.
pub fn maxplus_matmul<T: Real>(
    a: &TropicalMatrix<T>,
    b: &TropicalMatrix<T>,
) -> Result<TropicalMatrix<T>> {
    if a.cols != b.rows {
        return Err(Error::dim(format!(
            "max-plus product: lhs is {}x{}, rhs is {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut entries = vec![T::neg_infinity(); a.rows * b.cols];
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            if aij == T::neg_infinity() {
                continue;
            }
            for k in 0..b.cols {
                let bjk = b.get(j, k);
                if bjk == T::neg_infinity() {
                    continue;
                }
                let cand = aij + bjk;
                let slot = &mut entries[i * b.cols + k];
                if cand > *slot {
                    *slot = cand;
                }
            }
        }
    }
    Ok(TropicalMatrix {
        rows: a.rows,
        cols: b.cols,
        entries,
    })
}
