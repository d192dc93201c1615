//! Vector-valued Laurent polynomials on the unit circle.
//!
//! A [`TrigPoly`] is a finite Fourier series `f(z) = Σ_{k=lo}^{hi} c_k z^k`
//! with coefficients `c_k ∈ ℂⁿ`. Products widen the window; nothing is ever
//! truncated silently. The only lossy operation is [`TrigPoly::restrict`],
//! which reports the L² mass it discards.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A vector-valued trigonometric polynomial.
///
/// Coefficients are stored degree-major: the entry for component `i` of the
/// coefficient at degree `k` lives at `(k - lo) * dim + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    lo: i64,
    coeffs: Vec<C64>,
}

impl TrigPoly {
    pub fn zero(dim: usize) -> Self {
        assert!(dim > 0, "TrigPoly dimension must be positive");
        Self {
            dim,
            lo: 0,
            coeffs: vec![ZERO; dim],
        }
    }

    /// Builds from a flat degree-major coefficient buffer starting at `lo`.
    pub fn from_flat(dim: usize, lo: i64, coeffs: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "TrigPoly dimension must be positive".into(),
            ));
        }
        if coeffs.is_empty() || !coeffs.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients do not split into vectors of length {dim}",
                coeffs.len()
            )));
        }
        let mut p = Self { dim, lo, coeffs };
        p.trim();
        Ok(p)
    }

    /// Builds from one coefficient vector per degree, starting at `lo`.
    pub fn from_coeffs(dim: usize, lo: i64, coeffs: &[Vec<C64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(coeffs.len() * dim);
        for (j, c) in coeffs.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient {j} has length {}, expected {dim}",
                    c.len()
                )));
            }
            flat.extend_from_slice(c);
        }
        if flat.is_empty() {
            return Ok(Self::zero(dim));
        }
        Self::from_flat(dim, lo, flat)
    }

    /// Scalar polynomial from coefficients starting at `lo`.
    pub fn scalar(lo: i64, coeffs: &[C64]) -> Self {
        if coeffs.is_empty() {
            return Self::zero(1);
        }
        let mut p = Self {
            dim: 1,
            lo,
            coeffs: coeffs.to_vec(),
        };
        p.trim();
        p
    }

    /// `v · z^k` for a constant vector `v`.
    pub fn monomial(k: i64, v: &[C64]) -> Self {
        let mut p = Self {
            dim: v.len(),
            lo: k,
            coeffs: v.to_vec(),
        };
        p.trim();
        p
    }

    /// `z^k e_i` in dimension `dim`.
    pub fn unit(dim: usize, i: usize, k: i64) -> Self {
        let mut v = vec![ZERO; dim];
        v[i] = C64::new(1.0, 0.0);
        Self::monomial(k, &v)
    }

    pub fn constant(v: &[C64]) -> Self {
        Self::monomial(0, v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.width() as i64 - 1
    }

    /// Number of degrees in the window `[lo, hi]`.
    pub fn width(&self) -> usize {
        self.coeffs.len() / self.dim
    }

    pub fn as_flat(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Coefficient vector at degree `k`, or `None` outside the window.
    pub fn coeff(&self, k: i64) -> Option<&[C64]> {
        if k < self.lo || k > self.hi() {
            return None;
        }
        let s = (k - self.lo) as usize * self.dim;
        Some(&self.coeffs[s..s + self.dim])
    }

    /// Component `i` of the coefficient at degree `k` (zero outside the window).
    pub fn get(&self, i: usize, k: i64) -> C64 {
        self.coeff(k).map_or(ZERO, |c| c[i])
    }

    /// Drops exactly-zero coefficient vectors from both ends of the window.
    fn trim(&mut self) {
        let d = self.dim;
        let w = self.width();
        let nonzero = |j: usize| self.coeffs[j * d..(j + 1) * d].iter().any(|c| *c != ZERO);
        let first = (0..w).find(|&j| nonzero(j));
        match first {
            None => {
                self.lo = 0;
                self.coeffs = vec![ZERO; d];
            }
            Some(first) => {
                let last = (0..w).rev().find(|&j| nonzero(j)).unwrap_or(first);
                if first > 0 || last + 1 < w {
                    self.coeffs = self.coeffs[first * d..(last + 1) * d].to_vec();
                    self.lo += first as i64;
                }
            }
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "vector lengths {} and {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &Self, alpha: C64) -> Result<Self> {
        self.check_dim(other)?;
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let d = self.dim;
        let mut out = vec![ZERO; (hi - lo + 1) as usize * d];
        let off = (self.lo - lo) as usize * d;
        for (j, c) in self.coeffs.iter().enumerate() {
            out[off + j] += c;
        }
        let off = (other.lo - lo) as usize * d;
        for (j, c) in other.coeffs.iter().enumerate() {
            out[off + j] += alpha * c;
        }
        Self::from_flat(d, lo, out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, C64::new(-1.0, 0.0))
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: C64, other: &Self) -> Result<Self> {
        self.combine(other, alpha)
    }

    pub fn scale(&self, lambda: C64) -> Self {
        let mut p = Self {
            dim: self.dim,
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| c * lambda).collect(),
        };
        p.trim();
        p
    }

    pub fn neg(&self) -> Self {
        self.scale(C64::new(-1.0, 0.0))
    }

    /// Multiplication by `z^k`.
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self {
            dim: self.dim,
            lo: self.lo + k,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Keeps the degrees in `[lo, hi]` (clipped to the current window).
    fn window(&self, lo: i64, hi: i64) -> Self {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi());
        if lo > hi {
            return Self::zero(self.dim);
        }
        let d = self.dim;
        let s = (lo - self.lo) as usize * d;
        let e = (hi - self.lo + 1) as usize * d;
        let mut p = Self {
            dim: d,
            lo,
            coeffs: self.coeffs[s..e].to_vec(),
        };
        p.trim();
        p
    }

    /// Orthogonal projection onto non-negative frequencies.
    pub fn riesz_plus(&self) -> Self {
        self.window(0, i64::MAX)
    }

    /// Orthogonal projection onto strictly negative frequencies.
    pub fn riesz_minus0(&self) -> Self {
        self.window(i64::MIN, -1)
    }

    /// Explicit lossy truncation to the degrees `[lo, hi]`; returns the kept
    /// polynomial and the L² norm of what was dropped.
    pub fn restrict(&self, lo: i64, hi: i64) -> (Self, f64) {
        let kept = self.window(lo, hi);
        let total = self.l2_norm_sqr();
        let dropped = (total - kept.l2_norm_sqr()).max(0.0).sqrt();
        (kept, dropped)
    }

    /// `⟨f, g⟩ = Σ_k ⟨c_k(f), c_k(g)⟩`, conjugate-linear in `g`.
    pub fn inner_product(&self, other: &Self) -> Result<C64> {
        self.check_dim(other)?;
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        let mut acc = ZERO;
        if lo > hi {
            return Ok(acc);
        }
        let d = self.dim;
        let a = &self.coeffs[(lo - self.lo) as usize * d..(hi - self.lo + 1) as usize * d];
        let b = &other.coeffs[(lo - other.lo) as usize * d..(hi - other.lo + 1) as usize * d];
        for (x, y) in a.iter().zip(b) {
            acc += x * y.conj();
        }
        Ok(acc)
    }

    pub fn l2_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sqr().sqrt()
    }

    /// L² norm of the strictly negative frequencies.
    pub fn negative_mass(&self) -> f64 {
        self.riesz_minus0().l2_norm()
    }

    /// L² norm of the non-negative frequencies.
    pub fn nonnegative_mass(&self) -> f64 {
        self.riesz_plus().l2_norm()
    }

    /// True when there are no (exactly) nonzero negative-frequency terms.
    pub fn is_analytic(&self) -> bool {
        self.lo >= 0 || self.is_zero()
    }

    /// Value at a point `z` (nonzero when negative frequencies are present).
    pub fn eval(&self, z: C64) -> DVector<C64> {
        let mut out = DVector::from_element(self.dim, ZERO);
        // Horner on z, then scale by z^lo.
        for j in (0..self.width()).rev() {
            for i in 0..self.dim {
                out[i] = out[i] * z + self.coeffs[j * self.dim + i];
            }
        }
        let scale = if self.lo >= 0 {
            z.powi(self.lo as i32)
        } else {
            z.inv().powi((-self.lo) as i32)
        };
        out * scale
    }

    /// The constant coefficient, i.e. `f(0)` for analytic `f`.
    pub fn value_at_zero(&self) -> DVector<C64> {
        match self.coeff(0) {
            Some(c) => DVector::from_column_slice(c),
            None => DVector::from_element(self.dim, ZERO),
        }
    }

    /// Conjugate on the circle: `conj(f(z))` for scalar or vector `f`
    /// (componentwise), i.e. `c_k ↦ conj(c_{-k})`.
    pub fn conj_reflect(&self) -> Self {
        let d = self.dim;
        let w = self.width();
        let mut out = vec![ZERO; w * d];
        for j in 0..w {
            for i in 0..d {
                out[(w - 1 - j) * d + i] = self.coeffs[j * d + i].conj();
            }
        }
        Self {
            dim: d,
            lo: -self.hi(),
            coeffs: out,
        }
    }

    /// Component `i` as a scalar polynomial.
    pub fn component(&self, i: usize) -> Self {
        let c: Vec<C64> = (0..self.width())
            .map(|j| self.coeffs[j * self.dim + i])
            .collect();
        Self::scalar(self.lo, &c)
    }

    /// Stacks scalar polynomials into a vector polynomial.
    pub fn stack(parts: &[TrigPoly]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("cannot stack zero components".into()));
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let lo = parts.iter().map(|p| p.lo).min().unwrap_or(0);
        let hi = parts.iter().map(|p| p.hi()).max().unwrap_or(0);
        let w = (hi - lo + 1) as usize;
        let mut out = vec![ZERO; w * dim];
        let mut off = 0;
        for p in parts {
            for j in 0..p.width() {
                let row = (p.lo - lo) as usize + j;
                for i in 0..p.dim {
                    out[row * dim + off + i] = p.coeffs[j * p.dim + i];
                }
            }
            off += p.dim;
        }
        Self::from_flat(dim, lo, out)
    }

    /// Splits into the first `n` components and the rest.
    pub fn split_at(&self, n: usize) -> Result<(Self, Self)> {
        if n == 0 || n >= self.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot split a {}-vector at {n}",
                self.dim
            )));
        }
        let d = self.dim;
        let w = self.width();
        let mut a = Vec::with_capacity(w * n);
        let mut b = Vec::with_capacity(w * (d - n));
        for j in 0..w {
            a.extend_from_slice(&self.coeffs[j * d..j * d + n]);
            b.extend_from_slice(&self.coeffs[j * d + n..(j + 1) * d]);
        }
        Ok((
            Self::from_flat(n, self.lo, a)?,
            Self::from_flat(d - n, self.lo, b)?,
        ))
    }

    /// Coefficients over the window `[lo, hi]` as a column vector
    /// (degree-major). Fails if the polynomial does not fit.
    pub fn to_column(&self, lo: i64, hi: i64) -> Result<DVector<C64>> {
        if !self.is_zero() && (self.lo < lo || self.hi() > hi) {
            let required = if self.hi() > hi { self.hi() } else { self.lo };
            return Err(Error::WindowBudget {
                required,
                available: if self.hi() > hi { hi } else { lo },
            });
        }
        let d = self.dim;
        let mut v = DVector::from_element((hi - lo + 1) as usize * d, ZERO);
        if self.is_zero() {
            return Ok(v);
        }
        let off = (self.lo - lo) as usize * d;
        for (j, c) in self.coeffs.iter().enumerate() {
            v[off + j] = *c;
        }
        Ok(v)
    }

    /// Inverse of [`TrigPoly::to_column`].
    pub fn from_column(dim: usize, lo: i64, v: &[C64]) -> Result<Self> {
        if v.is_empty() {
            return Ok(Self::zero(dim));
        }
        Self::from_flat(dim, lo, v.to_vec())
    }

    /// Default grid size: `4·(width + 1)` rounded up to a power of two.
    pub fn default_grid_size(&self) -> usize {
        (4 * (self.width() + 1)).next_power_of_two()
    }

    /// Values `f(e^{2πij/M})` for `j = 0..M`.
    pub fn evaluate_on_grid(&self, m: usize) -> Vec<DVector<C64>> {
        let d = self.dim;
        let mut cols: Vec<Vec<C64>> = vec![vec![ZERO; m]; d];
        for j in 0..self.width() {
            let k = (self.lo + j as i64).rem_euclid(m as i64) as usize;
            for i in 0..d {
                cols[i][k] += self.coeffs[j * d + i];
            }
        }
        let fft = plan(m, rustfft::FftDirection::Inverse);
        for c in cols.iter_mut() {
            fft.process(c);
        }
        (0..m)
            .map(|j| DVector::from_iterator(d, (0..d).map(|i| cols[i][j])))
            .collect()
    }

    /// Recovers the coefficients on `[lo, hi]` from grid values; exact when
    /// the grid is at least as large as the window.
    pub fn from_grid(values: &[DVector<C64>], lo: i64, hi: i64) -> Result<Self> {
        let m = values.len();
        let width = (hi - lo + 1).max(0) as usize;
        if m < width || m == 0 {
            return Err(Error::GridTooSmall {
                grid: m,
                width,
                required: width,
            });
        }
        let d = values[0].len();
        let fft = plan(m, rustfft::FftDirection::Forward);
        let mut cols: Vec<Vec<C64>> = (0..d)
            .map(|i| values.iter().map(|v| v[i]).collect())
            .collect();
        for c in cols.iter_mut() {
            fft.process(c);
        }
        let scale = 1.0 / m as f64;
        let mut flat = Vec::with_capacity(width * d);
        for k in lo..=hi {
            let idx = k.rem_euclid(m as i64) as usize;
            for col in &cols {
                flat.push(col[idx] * scale);
            }
        }
        Self::from_flat(d, lo, flat)
    }

    /// Discrete Lᵖ norm over `M` equispaced circle points, using the
    /// Euclidean norm of the vector values. `p = ∞` gives the grid maximum.
    pub fn lp_norm_grid(&self, p: f64, m: usize) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "Lp exponent {p} must be at least 1"
            )));
        }
        let required = 2 * self.width() + 1;
        if m < required {
            return Err(Error::GridTooSmall {
                grid: m,
                width: self.width(),
                required,
            });
        }
        let vals = self.evaluate_on_grid(m);
        if p.is_infinite() {
            return Ok(vals.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        let s: f64 = vals.iter().map(|v| v.norm().powf(p)).sum::<f64>() / m as f64;
        Ok(s.powf(1.0 / p))
    }
}

fn plan(m: usize, dir: rustfft::FftDirection) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(m, dir)
}

/// Equispaced nodes `e^{2πij/M}`.
pub fn circle_grid(m: usize) -> Vec<C64> {
    (0..m)
        .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64))
        .collect()
}

/// An `rows × cols` matrix of scalar Laurent polynomials, stored as matrix
/// coefficients `C_k` with `S(z) = Σ_k C_k z^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSymbol {
    rows: usize,
    cols: usize,
    lo: i64,
    coeffs: Vec<DMatrix<C64>>,
}

impl MatrixSymbol {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            lo: 0,
            coeffs: vec![DMatrix::zeros(rows, cols)],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn constant(m: DMatrix<C64>) -> Self {
        Self::monomial(0, m)
    }

    /// `M · z^k`.
    pub fn monomial(k: i64, m: DMatrix<C64>) -> Self {
        let mut s = Self {
            rows: m.nrows(),
            cols: m.ncols(),
            lo: k,
            coeffs: vec![m],
        };
        s.trim();
        s
    }

    /// Builds from matrix coefficients starting at degree `lo`.
    pub fn from_matrices(lo: i64, coeffs: Vec<DMatrix<C64>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidInput("symbol needs at least one coefficient".into()))?;
        let (rows, cols) = first.shape();
        if coeffs.iter().any(|c| c.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch(
                "coefficient matrices differ in shape".into(),
            ));
        }
        let mut s = Self {
            rows,
            cols,
            lo,
            coeffs,
        };
        s.trim();
        Ok(s)
    }

    /// Diagonal symbol from scalar polynomials.
    pub fn diagonal(entries: &[TrigPoly]) -> Result<Self> {
        let n = entries.len();
        let mut cells = vec![TrigPoly::zero(1); n * n];
        for (i, e) in entries.iter().enumerate() {
            cells[i * n + i] = e.clone();
        }
        Self::from_entries(n, n, &cells)
    }

    /// Builds from scalar entries in row-major order.
    pub fn from_entries(rows: usize, cols: usize, entries: &[TrigPoly]) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} symbol",
                entries.len()
            )));
        }
        if let Some(e) = entries.iter().find(|e| e.dim() != 1) {
            return Err(Error::DimensionMismatch(format!(
                "symbol entries must be scalar, found dimension {}",
                e.dim()
            )));
        }
        let lo = entries.iter().map(|e| e.lo()).min().unwrap_or(0);
        let hi = entries.iter().map(|e| e.hi()).max().unwrap_or(0);
        let mut coeffs = vec![DMatrix::zeros(rows, cols); (hi - lo + 1) as usize];
        for (idx, e) in entries.iter().enumerate() {
            let (r, c) = (idx / cols, idx % cols);
            for k in e.lo()..=e.hi() {
                coeffs[(k - lo) as usize][(r, c)] = e.get(0, k);
            }
        }
        Self::from_matrices(lo, coeffs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.coeffs.len() as i64 - 1
    }

    /// Matrix coefficient at degree `k` (zero outside the window).
    pub fn coeff(&self, k: i64) -> DMatrix<C64> {
        if k < self.lo || k > self.hi() {
            return DMatrix::zeros(self.rows, self.cols);
        }
        self.coeffs[(k - self.lo) as usize].clone()
    }

    pub fn coeffs(&self) -> &[DMatrix<C64>] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|x| *x == ZERO))
    }

    pub fn is_analytic(&self) -> bool {
        self.lo >= 0 || self.is_zero()
    }

    /// Largest non-negative degree present (0 for purely anti-analytic symbols).
    pub fn positive_degree(&self) -> i64 {
        if self.is_zero() {
            0
        } else {
            self.hi().max(0)
        }
    }

    /// Largest |negative degree| present.
    pub fn negative_degree(&self) -> i64 {
        if self.is_zero() {
            0
        } else {
            (-self.lo).max(0)
        }
    }

    fn trim(&mut self) {
        let nz = |m: &DMatrix<C64>| m.iter().any(|x| *x != ZERO);
        let first = self.coeffs.iter().position(nz);
        match first {
            None => {
                self.lo = 0;
                self.coeffs = vec![DMatrix::zeros(self.rows, self.cols)];
            }
            Some(f) => {
                let l = self.coeffs.iter().rposition(nz).unwrap_or(f);
                if f > 0 || l + 1 < self.coeffs.len() {
                    self.coeffs = self.coeffs[f..=l].to_vec();
                    self.lo += f as i64;
                }
            }
        }
    }

    /// Scalar entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> TrigPoly {
        let c: Vec<C64> = self.coeffs.iter().map(|m| m[(i, j)]).collect();
        TrigPoly::scalar(self.lo, &c)
    }

    /// Entries in row-major order.
    pub fn entries(&self) -> Vec<TrigPoly> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|(i, j)| self.entry(i, j))
            .collect()
    }

    /// Pointwise product `S(z) f(z)` as an exact Cauchy product. The output
    /// window is `[S.lo + f.lo, S.hi + f.hi]` before trimming.
    pub fn apply(&self, f: &TrigPoly) -> Result<TrigPoly> {
        if self.cols != f.dim() {
            return Err(Error::DimensionMismatch(format!(
                "symbol has {} columns, vector has length {}",
                self.cols,
                f.dim()
            )));
        }
        let lo = self.lo + f.lo();
        let w = self.coeffs.len() + f.width() - 1;
        let r = self.rows;
        let mut out = vec![ZERO; w * r];
        let fc = f.as_flat();
        for (a, m) in self.coeffs.iter().enumerate() {
            for b in 0..f.width() {
                let x = &fc[b * self.cols..(b + 1) * self.cols];
                let dst = &mut out[(a + b) * r..(a + b + 1) * r];
                for (col, xv) in x.iter().enumerate() {
                    if *xv == ZERO {
                        continue;
                    }
                    for (row, d) in dst.iter_mut().enumerate() {
                        *d += m[(row, col)] * xv;
                    }
                }
            }
        }
        TrigPoly::from_flat(r, lo, out)
    }

    /// Pointwise product of two symbols.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let w = self.coeffs.len() + other.coeffs.len() - 1;
        let mut out = vec![DMatrix::zeros(self.rows, other.cols); w];
        for (a, m) in self.coeffs.iter().enumerate() {
            for (b, n) in other.coeffs.iter().enumerate() {
                out[a + b] += m * n;
            }
        }
        Self::from_matrices(self.lo + other.lo, out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("symbol shapes differ".into()));
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let out = (lo..=hi).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Self::from_matrices(lo, out)
    }

    pub fn scale(&self, lambda: C64) -> Self {
        let mut s = Self {
            rows: self.rows,
            cols: self.cols,
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|m| m * lambda).collect(),
        };
        s.trim();
        s
    }

    /// Pointwise conjugate transpose on the circle: `C_k ↦ C_{-k}^*`.
    pub fn adjoint(&self) -> Self {
        let coeffs = self.coeffs.iter().rev().map(|m| m.adjoint()).collect();
        Self {
            rows: self.cols,
            cols: self.rows,
            lo: -self.hi(),
            coeffs,
        }
    }

    /// Multiplication by `z^k`.
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            lo: self.lo + k,
            coeffs: self.coeffs.clone(),
        }
    }

    /// Value at `z` (nonzero if negative degrees are present).
    pub fn eval(&self, z: C64) -> DMatrix<C64> {
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for m in self.coeffs.iter().rev() {
            acc = acc * z + m;
        }
        let scale = if self.lo >= 0 {
            z.powi(self.lo as i32)
        } else {
            z.inv().powi((-self.lo) as i32)
        };
        acc * scale
    }
}

/// A Hölder-conjugate pair with `1/q = 1/2 + 1/p`, `p ∈ (2, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentPairRepr", into = "ExponentPairRepr")]
pub struct ExponentPair {
    p: f64,
    q: f64,
}

impl ExponentPair {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 2.0) {
            return Err(Error::InvalidInput(format!(
                "exponent p = {p} must lie in (2, inf]"
            )));
        }
        let q = 1.0 / (0.5 + 1.0 / p);
        Ok(Self { p, q })
    }

    /// The bounded-symbol case `p = ∞, q = 2`.
    pub fn bounded() -> Self {
        Self {
            p: f64::INFINITY,
            q: 2.0,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

impl Default for ExponentPair {
    fn default() -> Self {
        Self::bounded()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentPairRepr {
    p: PValue,
    #[serde(default, skip_deserializing)]
    q: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PValue {
    Finite(f64),
    Named(String),
}

impl TryFrom<ExponentPairRepr> for ExponentPair {
    type Error = Error;
    fn try_from(r: ExponentPairRepr) -> Result<Self> {
        match r.p {
            PValue::Finite(p) => Self::new(p),
            PValue::Named(s) if s == "inf" => Ok(Self::bounded()),
            PValue::Named(s) => Err(Error::InvalidInput(format!("unknown exponent {s:?}"))),
        }
    }
}

impl From<ExponentPair> for ExponentPairRepr {
    fn from(e: ExponentPair) -> Self {
        let p = if e.p.is_infinite() {
            PValue::Named("inf".into())
        } else {
            PValue::Finite(e.p)
        };
        Self { p, q: e.q }
    }
}

/// JSON form of a [`TrigPoly`]: `{"dim", "lo", "hi", "coeffs": [[re, im], ...]}`
/// with coefficients in degree-major order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrigPolyRepr {
    dim: usize,
    lo: i64,
    hi: i64,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for TrigPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TrigPolyRepr {
            dim: self.dim,
            lo: self.lo,
            hi: self.hi(),
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = TrigPolyRepr::deserialize(d)?;
        if r.hi < r.lo {
            return Err(D::Error::custom(format!(
                "window [{}, {}] is empty",
                r.lo, r.hi
            )));
        }
        let expected = (r.hi - r.lo + 1) as usize * r.dim;
        if r.coeffs.len() != expected {
            return Err(D::Error::custom(format!(
                "expected {expected} coefficients for dim {} on [{}, {}], found {}",
                r.dim,
                r.lo,
                r.hi,
                r.coeffs.len()
            )));
        }
        let flat = r.coeffs.iter().map(|c| C64::new(c[0], c[1])).collect();
        TrigPoly::from_flat(r.dim, r.lo, flat).map_err(D::Error::custom)
    }
}

/// JSON form of a [`MatrixSymbol`]: scalar entries in row-major order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixSymbolRepr {
    rows: usize,
    cols: usize,
    entries: Vec<TrigPoly>,
}

impl Serialize for MatrixSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixSymbolRepr {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = MatrixSymbolRepr::deserialize(d)?;
        MatrixSymbol::from_entries(r.rows, r.cols, &r.entries).map_err(D::Error::custom)
    }
}
