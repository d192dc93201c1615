//! Structured matrix inner functions `Θ = L · diag(θ₁, …, θₙ) · R` with
//! constant unitaries `L`, `R` and scalar factors that are monomials or finite
//! Blaschke products, together with orthonormal bases of the model spaces
//! `K_Θ = (H²)ⁿ ⊖ Θ(H²)ⁿ`, the projections `P_Θ`, `Q_Θ`, and reproducing
//! kernels.
//!
//! Blaschke products are expanded as Taylor series. Every truncation carries a
//! rigorous sup-norm bound on the discarded tail, obtained from a Cauchy
//! estimate on a circle `|z| = R` with `1 < R < 1/ρ`, `ρ = max |a_j|`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{MatrixSymbol, TrigPoly, C64};

/// Largest tail accepted by [`MatrixInner::symbol`].
pub const MAX_SYMBOL_TAIL: f64 = 1e-10;
/// Target tail for automatically chosen truncation degrees.
pub const AUTO_TAIL: f64 = 1e-12;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// A scalar inner function: `z^k` or `λ · Π_j (z − a_j)/(1 − ā_j z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScalarInner {
    Monomial { k: usize },
    Blaschke { zeros: Vec<C64>, rotation: C64 },
}

impl ScalarInner {
    pub fn monomial(k: usize) -> Self {
        ScalarInner::Monomial { k }
    }

    pub fn blaschke(zeros: Vec<C64>) -> Self {
        ScalarInner::Blaschke {
            zeros,
            rotation: ONE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ScalarInner::Blaschke { zeros, rotation } = self {
            if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
                return Err(Error::InvalidInput(format!(
                    "Blaschke zero {a} does not lie in the open unit disc"
                )));
            }
            if (rotation.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "Blaschke rotation {rotation} is not unimodular"
                )));
            }
        }
        Ok(())
    }

    /// Dimension of the scalar model space `K_θ`.
    pub fn model_dim(&self) -> usize {
        match self {
            ScalarInner::Monomial { k } => *k,
            ScalarInner::Blaschke { zeros, .. } => zeros.len(),
        }
    }

    /// `max |a_j|` (0 for monomials).
    pub fn rho(&self) -> f64 {
        match self {
            ScalarInner::Monomial { .. } => 0.0,
            ScalarInner::Blaschke { zeros, .. } => {
                zeros.iter().map(|a| a.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// True when the Taylor expansion is a polynomial.
    pub fn is_polynomial(&self) -> bool {
        self.rho() == 0.0
    }

    pub fn eval(&self, z: C64) -> C64 {
        match self {
            ScalarInner::Monomial { k } => z.powi(*k as i32),
            ScalarInner::Blaschke { zeros, rotation } => zeros
                .iter()
                .fold(*rotation, |acc, a| acc * (z - a) / (ONE - a.conj() * z)),
        }
    }

    /// Degree of the exact polynomial expansion when [`Self::is_polynomial`].
    fn polynomial_degree(&self) -> usize {
        self.model_dim()
    }

    /// Taylor coefficients `0..=N` and the sup-norm bound on the tail.
    /// Polynomial factors are returned in full regardless of `N`.
    pub fn taylor(&self, n: usize) -> (Vec<C64>, f64) {
        match self {
            ScalarInner::Monomial { k } => {
                let mut c = vec![ZERO; k + 1];
                c[*k] = ONE;
                (c, 0.0)
            }
            ScalarInner::Blaschke { zeros, rotation } => {
                let len = if self.is_polynomial() {
                    n.max(self.polynomial_degree())
                } else {
                    n
                } + 1;
                let mut c = vec![ZERO; len];
                c[0] = *rotation;
                for a in zeros {
                    multiply_blaschke_factor(&mut c, *a);
                }
                (c, self.tail_bound(n))
            }
        }
    }

    /// Sup-norm bound on `Σ_{k>N} |c_k|` for the Taylor series.
    pub fn tail_bound(&self, n: usize) -> f64 {
        match self {
            ScalarInner::Monomial { .. } => 0.0,
            ScalarInner::Blaschke { zeros, .. } => {
                if self.is_polynomial() {
                    return if n >= zeros.len() { 0.0 } else { f64::INFINITY };
                }
                cauchy_tail(self.rho(), n, |r| {
                    zeros
                        .iter()
                        .map(|a| (r + a.norm()) / (1.0 - a.norm() * r))
                        .product()
                })
            }
        }
    }

    /// Smallest `N` with `tail_bound(N) < tol`.
    pub fn min_degree(&self, tol: f64) -> usize {
        smallest_degree(|n| self.tail_bound(n) < tol).max(match self {
            ScalarInner::Monomial { k } => *k,
            ScalarInner::Blaschke { .. } => 0,
        })
    }

    /// Orthonormal basis of `K_θ`, each element expanded to degree `N`, with a
    /// common sup-norm tail bound. Monomials give `{1, z, …, z^{k−1}}`; finite
    /// Blaschke products give the Takenaka–Malmquist system
    /// `φ_j = √(1−|a_j|²)/(1 − ā_j z) · Π_{l<j} b_{a_l}`.
    pub fn model_basis(&self, n: usize) -> (Vec<Vec<C64>>, f64) {
        match self {
            ScalarInner::Monomial { k } => {
                let v = (0..*k)
                    .map(|j| {
                        let mut c = vec![ZERO; j + 1];
                        c[j] = ONE;
                        c
                    })
                    .collect();
                (v, 0.0)
            }
            ScalarInner::Blaschke { zeros, .. } => {
                let exact = self.is_polynomial();
                let len = if exact { n.max(zeros.len()) } else { n } + 1;
                let mut prefix = vec![ZERO; len];
                prefix[0] = ONE;
                let mut out = Vec::with_capacity(zeros.len());
                let mut tail: f64 = 0.0;
                for (j, a) in zeros.iter().enumerate() {
                    let mut phi = prefix.clone();
                    divide_by_linear(&mut phi, a.conj());
                    let s = (1.0 - a.norm_sqr()).sqrt();
                    phi.iter_mut().for_each(|c| *c *= s);
                    if !exact {
                        tail = tail.max(self.tm_tail(j, n));
                    }
                    out.push(phi);
                    multiply_blaschke_factor(&mut prefix, *a);
                }
                (out, tail)
            }
        }
    }

    /// Tail bound for the `j`-th Takenaka–Malmquist function.
    fn tm_tail(&self, j: usize, n: usize) -> f64 {
        let ScalarInner::Blaschke { zeros, .. } = self else {
            return 0.0;
        };
        if self.is_polynomial() {
            return 0.0;
        }
        cauchy_tail(self.rho(), n, |r| {
            let aj = zeros[j].norm();
            let head = (1.0 - aj * aj).sqrt() / (1.0 - aj * r);
            zeros[..j]
                .iter()
                .map(|a| (r + a.norm()) / (1.0 - a.norm() * r))
                .product::<f64>()
                * head
        })
    }

    /// Values of the orthonormal basis functions at a point of the closed disc.
    pub fn basis_values(&self, zeta: C64) -> Vec<C64> {
        match self {
            ScalarInner::Monomial { k } => (0..*k).map(|j| zeta.powi(j as i32)).collect(),
            ScalarInner::Blaschke { zeros, .. } => {
                let mut prefix = ONE;
                zeros
                    .iter()
                    .map(|a| {
                        let v = (1.0 - a.norm_sqr()).sqrt() / (ONE - a.conj() * zeta) * prefix;
                        prefix *= (zeta - a) / (ONE - a.conj() * zeta);
                        v
                    })
                    .collect()
            }
        }
    }

    /// Reproducing kernel `k_ζ(z) = (1 − conj(θ(ζ)) θ(z)) / (1 − ζ̄ z)` expanded
    /// to degree `N`, with a sup-norm tail bound.
    ///
    /// Interior points are always admitted. Boundary points `|ζ| = 1` are
    /// admitted for monomials and finite Blaschke products, which extend
    /// analytically across the circle.
    pub fn reproducing_kernel(&self, zeta: C64, n: usize) -> Result<(TrigPoly, f64)> {
        self.validate()?;
        if zeta.norm() > 1.0 + 1e-14 {
            return Err(Error::InvalidInput(format!(
                "reproducing kernel point {zeta} lies outside the closed disc"
            )));
        }
        if let ScalarInner::Monomial { k } = self {
            let zb = zeta.conj();
            let mut c = Vec::with_capacity(*k);
            let mut p = ONE;
            for _ in 0..*k {
                c.push(p);
                p *= zb;
            }
            return Ok((TrigPoly::scalar(0, &c), 0.0));
        }
        let (theta, _) = self.taylor(n);
        let tz = self.eval(zeta).conj();
        let mut num: Vec<C64> = theta.iter().map(|c| -tz * c).collect();
        num[0] += ONE;
        divide_by_linear(&mut num, zeta.conj());
        let tail = if self.is_polynomial() {
            0.0
        } else {
            // k_ζ = Σ_j conj(φ_j(ζ)) φ_j, so the tail is controlled by the
            // Takenaka–Malmquist tails.
            self.basis_values(zeta)
                .iter()
                .enumerate()
                .map(|(j, v)| v.norm() * self.tm_tail(j, n))
                .sum()
        };
        Ok((TrigPoly::scalar(0, &num), tail))
    }
}

/// In-place multiplication of a truncated power series by
/// `(z − a)/(1 − ā z)`, using `h_k = ā h_{k−1} + g_{k−1} − a g_k`.
fn multiply_blaschke_factor(c: &mut [C64], a: C64) {
    let ab = a.conj();
    let mut prev_g = ZERO;
    let mut prev_h = ZERO;
    for slot in c.iter_mut() {
        let g = *slot;
        let h = ab * prev_h + prev_g - a * g;
        *slot = h;
        prev_g = g;
        prev_h = h;
    }
}

/// In-place division of a truncated power series by `(1 − w z)`.
fn divide_by_linear(c: &mut [C64], w: C64) {
    for k in 1..c.len() {
        let prev = c[k - 1];
        c[k] += w * prev;
    }
}

/// Cauchy estimate for the tail `Σ_{k>N} |c_k| ≤ M(R) R^{−(N+1)} / (1 − 1/R)`,
/// minimised over a grid of radii in `(1, 1/ρ)`.
fn cauchy_tail(rho: f64, n: usize, max_modulus: impl Fn(f64) -> f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let rmax = 1.0 / rho;
    (1..40)
        .map(|i| 1.0 + (rmax - 1.0) * i as f64 / 40.0)
        .map(|r| {
            let m = max_modulus(r);
            let log = m.ln() - (n as f64 + 1.0) * r.ln() - (1.0 - 1.0 / r).ln();
            log.exp()
        })
        .fold(f64::INFINITY, f64::min)
}

fn smallest_degree(ok: impl Fn(usize) -> bool) -> usize {
    if ok(0) {
        return 0;
    }
    let mut hi = 1usize;
    while !ok(hi) {
        hi *= 2;
        if hi > 1 << 26 {
            return hi;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `Θ(z) = L · diag(θ₁(z), …, θₙ(z)) · R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixInnerRepr", into = "MatrixInnerRepr")]
pub struct MatrixInner {
    n: usize,
    left: DMatrix<C64>,
    right: DMatrix<C64>,
    diag: Vec<ScalarInner>,
}

impl MatrixInner {
    pub fn new(left: DMatrix<C64>, diag: Vec<ScalarInner>, right: DMatrix<C64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "inner function needs at least one entry".into(),
            ));
        }
        if left.shape() != (n, n) || right.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "unitary factors must be {n}x{n}"
            )));
        }
        for (name, u) in [("left", &left), ("right", &right)] {
            let dev = (u * u.adjoint() - DMatrix::<C64>::identity(n, n)).norm();
            if dev > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "{name} factor is not unitary (deviation {dev:.3e})"
                )));
            }
        }
        for d in &diag {
            d.validate()?;
        }
        Ok(Self {
            n,
            left,
            right,
            diag,
        })
    }

    /// `diag(θ₁, …, θₙ)` with identity unitaries.
    pub fn diagonal(diag: Vec<ScalarInner>) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::identity(n, n), diag, DMatrix::identity(n, n))
    }

    /// `diag(z^{k₁}, …, z^{kₙ})`.
    pub fn monomial(degrees: &[usize]) -> Result<Self> {
        Self::diagonal(degrees.iter().map(|&k| ScalarInner::monomial(k)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn left(&self) -> &DMatrix<C64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<C64> {
        &self.right
    }

    pub fn diag(&self) -> &[ScalarInner] {
        &self.diag
    }

    /// `dim K_Θ = Σ dim K_{θ_i}`.
    pub fn model_dim(&self) -> usize {
        self.diag.iter().map(|d| d.model_dim()).sum()
    }

    pub fn is_polynomial(&self) -> bool {
        self.diag.iter().all(|d| d.is_polynomial())
    }

    pub fn eval(&self, z: C64) -> DMatrix<C64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.n,
            self.diag.iter().map(|t| t.eval(z)),
        ));
        &self.left * d * &self.right
    }

    /// `‖Θ(0)‖ < 1`; reported as a flag, never enforced.
    pub fn is_pure(&self) -> bool {
        crate::linalg::spectral_norm(&self.eval(ZERO)) < 1.0 - 1e-12
    }

    /// Sup-norm (operator norm) tail bound of the degree-`N` expansion.
    pub fn tail_bound(&self, n: usize) -> f64 {
        self.diag
            .iter()
            .map(|d| d.tail_bound(n))
            .fold(0.0, f64::max)
    }

    /// Smallest truncation degree with tail below `tol`.
    pub fn min_degree(&self, tol: f64) -> usize {
        self.diag
            .iter()
            .map(|d| d.min_degree(tol))
            .max()
            .unwrap_or(0)
    }

    /// Truncation degree giving a tail below [`AUTO_TAIL`].
    pub fn auto_degree(&self) -> usize {
        self.min_degree(AUTO_TAIL)
    }

    /// Exact degree for polynomial inner functions, [`Self::auto_degree`]
    /// otherwise.
    pub fn default_truncation(&self) -> usize {
        if self.is_polynomial() {
            self.symbol_degree(0)
        } else {
            self.auto_degree()
        }
    }

    /// Degree of the expanded symbol (exact for polynomial inner functions).
    pub fn symbol_degree(&self, n: usize) -> usize {
        self.diag
            .iter()
            .map(|d| match d {
                ScalarInner::Monomial { k } => *k,
                ScalarInner::Blaschke { zeros, .. } if d.is_polynomial() => zeros.len(),
                ScalarInner::Blaschke { .. } => n,
            })
            .max()
            .unwrap_or(0)
    }

    /// Taylor expansion of `Θ` to degree `N`. Rejects degrees whose tail is
    /// not below [`MAX_SYMBOL_TAIL`], reporting the smallest admissible one.
    pub fn symbol(&self, n: usize) -> Result<(MatrixSymbol, f64)> {
        let tail = self.tail_bound(n);
        if !(tail < MAX_SYMBOL_TAIL) {
            return Err(Error::TruncationTooSmall {
                requested: n,
                required: self.min_degree(MAX_SYMBOL_TAIL),
                tail,
            });
        }
        let expansions: Vec<Vec<C64>> = self.diag.iter().map(|d| d.taylor(n).0).collect();
        let len = expansions.iter().map(|e| e.len()).max().unwrap_or(1);
        let coeffs = (0..len)
            .map(|k| {
                let d = DMatrix::from_diagonal(&DVector::from_iterator(
                    self.n,
                    expansions.iter().map(|e| e.get(k).copied().unwrap_or(ZERO)),
                ));
                &self.left * d * &self.right
            })
            .collect();
        Ok((MatrixSymbol::from_matrices(0, coeffs)?, tail))
    }

    /// Orthonormal basis of `K_Θ = L·(⊕ K_{θ_i})` expanded to degree `N`.
    pub fn model_basis(&self, n: usize) -> Result<ModelSpaceBasis> {
        let tail = self.tail_bound(n);
        if !(tail < MAX_SYMBOL_TAIL) {
            return Err(Error::TruncationTooSmall {
                requested: n,
                required: self.min_degree(MAX_SYMBOL_TAIL),
                tail,
            });
        }
        let mut vectors = Vec::with_capacity(self.model_dim());
        let mut basis_tail: f64 = 0.0;
        for (i, d) in self.diag.iter().enumerate() {
            let (funcs, t) = d.model_basis(n);
            basis_tail = basis_tail.max(t);
            let col = self.left.column(i);
            for f in funcs {
                let flat: Vec<C64> = f
                    .iter()
                    .flat_map(|c| col.iter().map(move |l| l * c))
                    .collect();
                vectors.push(TrigPoly::from_flat(self.n, 0, flat)?);
            }
        }
        Ok(ModelSpaceBasis {
            theta: self.clone(),
            degree: n,
            vectors,
            tail_bound: basis_tail,
        })
    }

    /// Projector pair built from the degree-`N` expansion.
    pub fn projector(&self, n: usize) -> Result<ThetaProjector> {
        let (symbol, tail) = self.symbol(n)?;
        Ok(ThetaProjector {
            adjoint: symbol.adjoint(),
            symbol,
            tail,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixInnerRepr {
    n: usize,
    left: Vec<Vec<C64>>,
    right: Vec<Vec<C64>>,
    diag: Vec<ScalarInner>,
}

fn rows_to_matrix(n: usize, rows: &[Vec<C64>]) -> Result<DMatrix<C64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "expected a {n}x{n} matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl TryFrom<MatrixInnerRepr> for MatrixInner {
    type Error = Error;
    fn try_from(r: MatrixInnerRepr) -> Result<Self> {
        if r.diag.len() != r.n {
            return Err(Error::DimensionMismatch(format!(
                "n = {} but {} diagonal entries",
                r.n,
                r.diag.len()
            )));
        }
        let left = rows_to_matrix(r.n, &r.left)?;
        let right = rows_to_matrix(r.n, &r.right)?;
        MatrixInner::new(left, r.diag, right)
    }
}

impl From<MatrixInner> for MatrixInnerRepr {
    fn from(t: MatrixInner) -> Self {
        Self {
            n: t.n,
            left: matrix_to_rows(&t.left),
            right: matrix_to_rows(&t.right),
            diag: t.diag,
        }
    }
}

/// Orthonormal basis of a model space at a given truncation degree.
#[derive(Clone, Debug)]
pub struct ModelSpaceBasis {
    pub theta: MatrixInner,
    pub degree: usize,
    pub vectors: Vec<TrigPoly>,
    pub tail_bound: f64,
}

impl ModelSpaceBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n(&self) -> usize {
        self.theta.n()
    }

    /// `⟨f, v_i⟩` for every basis vector.
    pub fn coordinates(&self, f: &TrigPoly) -> Result<DVector<C64>> {
        let c: Result<Vec<C64>> = self.vectors.iter().map(|v| f.inner_product(v)).collect();
        Ok(DVector::from_vec(c?))
    }

    /// `Σ x_i v_i`.
    pub fn synthesize(&self, x: &[C64]) -> Result<TrigPoly> {
        if x.len() != self.vectors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for a basis of size {}",
                x.len(),
                self.vectors.len()
            )));
        }
        let mut acc = TrigPoly::zero(self.n());
        for (c, v) in x.iter().zip(&self.vectors) {
            if *c != ZERO {
                acc = acc.axpy(*c, v)?;
            }
        }
        Ok(acc)
    }

    pub fn gram(&self) -> Result<DMatrix<C64>> {
        let d = self.vectors.len();
        let mut g = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = self.vectors[j].inner_product(&self.vectors[i])?;
            }
        }
        Ok(g)
    }

    /// Largest degree appearing in the basis.
    pub fn max_degree(&self) -> i64 {
        self.vectors.iter().map(|v| v.hi()).max().unwrap_or(0)
    }
}

/// Expanded `Θ` and `Θ*` used to evaluate `P_Θ = P₊ Θ P₋ Θ*` and
/// `Q_Θ = Θ P₊ Θ*`.
#[derive(Clone, Debug)]
pub struct ThetaProjector {
    pub symbol: MatrixSymbol,
    pub adjoint: MatrixSymbol,
    pub tail: f64,
}

impl ThetaProjector {
    pub fn p_theta(&self, f: &TrigPoly) -> Result<TrigPoly> {
        let inner = self.adjoint.apply(f)?.riesz_minus0();
        Ok(self.symbol.apply(&inner)?.riesz_plus())
    }

    pub fn q_theta(&self, f: &TrigPoly) -> Result<TrigPoly> {
        let inner = self.adjoint.apply(f)?.riesz_plus();
        self.symbol.apply(&inner)
    }

    /// `Θ f`.
    pub fn mul_theta(&self, f: &TrigPoly) -> Result<TrigPoly> {
        self.symbol.apply(f)
    }

    /// `P₊(Θ* f)`.
    pub fn toeplitz_adjoint(&self, f: &TrigPoly) -> Result<TrigPoly> {
        Ok(self.adjoint.apply(f)?.riesz_plus())
    }
}

/// `P_Θ f` computed from the degree-`N` expansion of `Θ`.
pub fn project_model(theta: &MatrixInner, f: &TrigPoly, n: usize) -> Result<TrigPoly> {
    check_len(theta, f)?;
    theta.projector(n)?.p_theta(f)
}

/// `Q_Θ f` computed from the degree-`N` expansion of `Θ`.
pub fn project_theta_h2(theta: &MatrixInner, f: &TrigPoly, n: usize) -> Result<TrigPoly> {
    check_len(theta, f)?;
    theta.projector(n)?.q_theta(f)
}

fn check_len(theta: &MatrixInner, f: &TrigPoly) -> Result<()> {
    if f.dim() != theta.n() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a {}x{} inner function",
            f.dim(),
            theta.n(),
            theta.n()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blaschke_with_zero_at_origin_is_z() {
        let b = ScalarInner::blaschke(vec![ZERO]);
        let (c, tail) = b.taylor(5);
        assert_eq!(tail, 0.0);
        assert!((c[1] - ONE).norm() < 1e-15);
        assert!(c
            .iter()
            .enumerate()
            .all(|(k, x)| k == 1 || x.norm() < 1e-15));
    }

    #[test]
    fn tail_bound_is_decreasing_and_honest() {
        let b = ScalarInner::blaschke(vec![C64::new(0.5, 0.0), C64::new(0.0, 0.3)]);
        let (long, _) = b.taylor(400);
        for n in [10usize, 30, 60] {
            let actual: f64 = long[n + 1..].iter().map(|c| c.norm()).sum();
            assert!(b.tail_bound(n) >= actual);
        }
        assert!(b.tail_bound(60) < b.tail_bound(30));
    }

    #[test]
    fn symbol_rejects_short_truncation() {
        let t =
            MatrixInner::diagonal(vec![ScalarInner::blaschke(vec![C64::new(0.9, 0.0)])]).unwrap();
        match t.symbol(5) {
            Err(Error::TruncationTooSmall { required, .. }) => {
                assert!(t.tail_bound(required) < MAX_SYMBOL_TAIL);
                assert!(t.tail_bound(required - 1) >= MAX_SYMBOL_TAIL);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn outside_zero_rejected() {
        let b = ScalarInner::blaschke(vec![C64::new(1.0, 0.0)]);
        assert!(b.validate().is_err());
        assert!(b.reproducing_kernel(C64::new(0.1, 0.0), 4).is_err());
        let m = ScalarInner::monomial(2);
        assert!(m.reproducing_kernel(C64::new(1.5, 0.0), 4).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = MatrixInner::diagonal(vec![
            ScalarInner::monomial(2),
            ScalarInner::blaschke(vec![C64::new(0.3, -0.1)]),
        ])
        .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"kind\":\"monomial\""));
        let back: MatrixInner = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
