use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{TrigPoly, C64};
use crate::linalg;

/// A finite-dimensional subspace of `(L²)ⁿ` held as an orthonormal list of
/// trigonometric polynomials, together with the rank tolerance that produced
/// it. Kernels additionally keep their coordinates in the operator's domain
/// basis and the singular values behind the rank decision.
#[derive(Clone, Debug, Serialize)]
pub struct Subspace {
    pub dim: usize,
    pub vectors: Vec<TrigPoly>,
    pub tol: f64,
    #[serde(skip)]
    pub coordinates: Option<DMatrix<C64>>,
    #[serde(skip)]
    pub singular_values: Vec<f64>,
}

impl Subspace {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            vectors: vec![],
            tol: 0.0,
            coordinates: None,
            singular_values: vec![],
        }
    }

    /// Orthonormalises the span of `polys`, discarding directions with
    /// singular value at or below `tol`.
    pub fn from_polys(dim: usize, polys: &[TrigPoly], tol: f64) -> Result<Self> {
        if polys.iter().any(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "subspace of vectors of length {dim} given a different length"
            )));
        }
        if polys.is_empty() {
            return Ok(Self {
                tol,
                ..Self::zero(dim)
            });
        }
        let (lo, hi) = linalg::common_window(polys);
        let m = linalg::poly_matrix(polys, dim, lo, hi)?;
        let q = linalg::orthonormal_basis(&m, tol)?;
        Ok(Self {
            dim,
            vectors: linalg::matrix_to_polys(&q, dim, lo)?,
            tol,
            coordinates: None,
            singular_values: vec![],
        })
    }

    /// Wraps vectors already known to be orthonormal.
    pub fn from_orthonormal(dim: usize, vectors: Vec<TrigPoly>, tol: f64) -> Self {
        Self {
            dim,
            vectors,
            tol,
            coordinates: None,
            singular_values: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn window(&self) -> (i64, i64) {
        linalg::common_window(&self.vectors)
    }

    /// Coefficient matrix over the window `[lo, hi]`.
    pub fn matrix(&self, lo: i64, hi: i64) -> Result<DMatrix<C64>> {
        linalg::poly_matrix(&self.vectors, self.dim, lo, hi)
    }

    /// `‖Gram − I‖_max`.
    pub fn gram_deviation(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.inner_product(b)? - C64::new(target, 0.0)).norm());
            }
        }
        Ok(worst)
    }

    /// Orthogonal projection of `f` onto the subspace.
    pub fn project(&self, f: &TrigPoly) -> Result<TrigPoly> {
        let mut acc = TrigPoly::zero(self.dim);
        for v in &self.vectors {
            acc = acc.axpy(f.inner_product(v)?, v)?;
        }
        Ok(acc)
    }

    /// `‖f − P f‖`.
    pub fn distance(&self, f: &TrigPoly) -> Result<f64> {
        Ok(f.sub(&self.project(f)?)?.l2_norm())
    }

    /// Largest principal angle to another subspace (`π/2` if the dimensions
    /// differ).
    pub fn angle_to(&self, other: &Subspace) -> Result<f64> {
        if self.len() != other.len() {
            return Ok(std::f64::consts::FRAC_PI_2);
        }
        if self.is_empty() {
            return Ok(0.0);
        }
        let mut all = self.vectors.clone();
        all.extend_from_slice(&other.vectors);
        let (lo, hi) = linalg::common_window(&all);
        Ok(linalg::max_principal_angle(
            &self.matrix(lo, hi)?,
            &other.matrix(lo, hi)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_of_dependent_family() {
        let one = C64::new(1.0, 0.0);
        let a = TrigPoly::scalar(0, &[one, one]);
        let b = a.scale(C64::new(0.0, 2.0));
        let s = Subspace::from_polys(1, &[a.clone(), b], 1e-12).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.gram_deviation().unwrap() < 1e-14);
        assert!(s.distance(&a).unwrap() < 1e-14);
    }
}
