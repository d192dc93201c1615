//! Dense complex linear algebra used across the workbench: SVD-based rank
//! decisions, null spaces, orthonormal bases, principal angles and a
//! deterministic pivoted column selection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::{TrigPoly, C64};

/// Singular value decomposition with the full set of right singular vectors.
pub struct Svd {
    pub u: DMatrix<C64>,
    pub singular_values: Vec<f64>,
    /// Columns are right singular vectors, matching `singular_values` and
    /// then spanning the remaining (exact) null directions.
    pub v: DMatrix<C64>,
}

/// SVD of `m`. Wide matrices are padded with zero rows so that all right
/// singular vectors are returned.
pub fn svd(m: &DMatrix<C64>) -> Result<Svd> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Svd {
            u: DMatrix::identity(r, r),
            singular_values: vec![],
            v: DMatrix::identity(c, c),
        });
    }
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let s = padded
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?;
    let mut u =
        s.u.ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
    let v_t = s
        .v_t
        .ok_or_else(|| Error::Numerical("SVD returned no V".into()))?;
    let mut sv: Vec<f64> = s.singular_values.iter().copied().collect();
    let mut v = v_t.adjoint();
    // nalgebra sorts in descending order already; enforce it regardless.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| {
        sv[b]
            .partial_cmp(&sv[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if order.iter().enumerate().any(|(i, &j)| i != j) {
        v = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, order[j])]);
        u = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, order[j])]);
        sv = order.iter().map(|&j| sv[j]).collect();
    }
    if r < c {
        // The padding rows are zero, so the leading r left singular vectors
        // live in the first r coordinates.
        u = u.view((0, 0), (r, r)).into_owned();
        sv.truncate(r);
    }
    Ok(Svd {
        u,
        singular_values: sv,
        v,
    })
}

/// Default rank tolerance: `max(rows, cols) · ε · σ_max`.
pub fn default_tolerance(m: &DMatrix<C64>, sigma_max: f64) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max
}

pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match m.clone().try_svd(false, false, f64::EPSILON, 0) {
        Some(s) => s.singular_values.iter().copied().fold(0.0, f64::max),
        None => m.norm(),
    }
}

/// Smallest singular value of `m` viewed as a map on its column space
/// (0 for a matrix with more columns than rows).
pub fn min_singular_value(m: &DMatrix<C64>) -> Result<f64> {
    if m.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    if m.nrows() < m.ncols() {
        return Ok(0.0);
    }
    let s = svd(m)?;
    Ok(s.singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

/// Rotates a vector so that its first significant coordinate is real and
/// positive. "Significant" means above `1e-8` relative to the vector norm.
pub fn normalize_phase(v: &mut DVector<C64>) {
    let n = v.norm();
    if n == 0.0 {
        return;
    }
    if let Some(c) = v.iter().find(|c| c.norm() > 1e-8 * n).copied() {
        let phase = c.conj() / c.norm();
        *v *= phase;
    }
}

fn normalize_columns(m: &mut DMatrix<C64>) {
    for j in 0..m.ncols() {
        let mut col = m.column(j).into_owned();
        normalize_phase(&mut col);
        m.set_column(j, &col);
    }
}

/// Orthonormal null-space basis of `m` together with the singular values and
/// the tolerance that was applied.
pub struct NullSpace {
    pub basis: DMatrix<C64>,
    pub singular_values: Vec<f64>,
    pub tol: f64,
}

/// Right singular vectors with `σ ≤ tol` (default: [`default_tolerance`]),
/// in the deterministic phase convention of [`normalize_phase`].
pub fn null_space(m: &DMatrix<C64>, tol: Option<f64>) -> Result<NullSpace> {
    let c = m.ncols();
    let s = svd(m)?;
    let smax = s.singular_values.first().copied().unwrap_or(0.0);
    let tol = tol.unwrap_or_else(|| default_tolerance(m, smax));
    let rank = s.singular_values.iter().filter(|&&x| x > tol).count();
    let mut basis = s.v.columns(rank, c - rank).into_owned();
    normalize_columns(&mut basis);
    Ok(NullSpace {
        basis,
        singular_values: s.singular_values,
        tol,
    })
}

/// Orthonormal basis of the column space of `m`, keeping directions with
/// `σ > tol`.
pub fn orthonormal_basis(m: &DMatrix<C64>, tol: f64) -> Result<DMatrix<C64>> {
    if m.ncols() == 0 {
        return Ok(DMatrix::zeros(m.nrows(), 0));
    }
    let s = svd(m)?;
    let rank = s.singular_values.iter().filter(|&&x| x > tol).count();
    let mut b = s.u.columns(0, rank).into_owned();
    normalize_columns(&mut b);
    Ok(b)
}

/// Numerical rank with absolute tolerance `tol`.
pub fn rank(m: &DMatrix<C64>, tol: f64) -> Result<usize> {
    if m.is_empty() {
        return Ok(0);
    }
    Ok(svd(m)?.singular_values.iter().filter(|&&x| x > tol).count())
}

/// Largest principal angle between the column spans of two matrices with
/// orthonormal columns. Returns `π/2` when the dimensions differ.
pub fn max_principal_angle(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let ra = a - b * (b.adjoint() * a);
    let rb = b - a * (a.adjoint() * b);
    let s = spectral_norm(&ra).max(spectral_norm(&rb)).min(1.0);
    s.asin()
}

/// Greedy column selection with largest-residual pivoting (modified
/// Gram–Schmidt). Returns the chosen column indices in pivot order; ties are
/// broken by the lowest index so the result is deterministic.
pub fn pivoted_column_selection(m: &DMatrix<C64>, tol: f64) -> Vec<usize> {
    let mut work = m.clone();
    let mut chosen = Vec::new();
    let mut remaining: Vec<usize> = (0..m.ncols()).collect();
    while !remaining.is_empty() {
        let (pos, norm) = remaining
            .iter()
            .enumerate()
            .map(|(p, &j)| (p, work.column(j).norm()))
            .fold((0, -1.0f64), |acc, x| {
                if x.1 > acc.1 + 1e-14 * acc.1.abs() {
                    x
                } else {
                    acc
                }
            });
        if norm <= tol {
            break;
        }
        let j = remaining.remove(pos);
        let q = work.column(j) / C64::new(norm, 0.0);
        for &k in &remaining {
            let proj = q.dotc(&work.column(k));
            let upd = work.column(k) - &q * proj;
            work.set_column(k, &upd);
        }
        chosen.push(j);
    }
    chosen
}

/// Coefficient matrix of a list of polynomials over a common window.
pub fn poly_matrix(polys: &[TrigPoly], dim: usize, lo: i64, hi: i64) -> Result<DMatrix<C64>> {
    let rows = (hi - lo + 1).max(0) as usize * dim;
    let mut m = DMatrix::zeros(rows, polys.len());
    for (j, p) in polys.iter().enumerate() {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "polynomial of dimension {} in a dimension-{dim} family",
                p.dim()
            )));
        }
        m.set_column(j, &p.to_column(lo, hi)?);
    }
    Ok(m)
}

/// Smallest window containing every polynomial in the list.
pub fn common_window(polys: &[TrigPoly]) -> (i64, i64) {
    let nonzero: Vec<&TrigPoly> = polys.iter().filter(|p| !p.is_zero()).collect();
    if nonzero.is_empty() {
        return (0, 0);
    }
    let lo = nonzero.iter().map(|p| p.lo()).min().unwrap_or(0);
    let hi = nonzero.iter().map(|p| p.hi()).max().unwrap_or(0);
    (lo, hi)
}

/// Columns of a coefficient matrix back to polynomials.
pub fn matrix_to_polys(m: &DMatrix<C64>, dim: usize, lo: i64) -> Result<Vec<TrigPoly>> {
    (0..m.ncols())
        .map(|j| {
            let col: Vec<C64> = m.column(j).iter().copied().collect();
            TrigPoly::from_column(dim, lo, &col)
        })
        .collect()
}

/// Largest principal angle between the spans of two polynomial families
/// (each orthonormalised first with tolerance `tol`).
pub fn poly_span_angle(a: &[TrigPoly], b: &[TrigPoly], dim: usize, tol: f64) -> Result<f64> {
    let mut all = a.to_vec();
    all.extend_from_slice(b);
    let (lo, hi) = common_window(&all);
    let qa = orthonormal_basis(&poly_matrix(a, dim, lo, hi)?, tol)?;
    let qb = orthonormal_basis(&poly_matrix(b, dim, lo, hi)?, tol)?;
    Ok(max_principal_angle(&qa, &qb))
}

/// Solves the least-squares problem `min ‖A x − B‖` column by column via SVD,
/// treating singular values at or below `tol` as zero. Returns the solution and
/// the numerical rank.
pub fn least_squares(
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
    tol: f64,
) -> Result<(DMatrix<C64>, usize)> {
    let s = svd(a)?;
    let k = s.singular_values.iter().filter(|&&x| x > tol).count();
    let u = s.u.columns(0, k);
    let v = s.v.columns(0, k);
    let mut coeffs = u.adjoint() * b;
    for i in 0..k {
        let inv = 1.0 / s.singular_values[i];
        coeffs.row_mut(i).scale_mut(inv);
    }
    Ok((v * coeffs, k))
}

/// Serde adapter writing a matrix as a list of rows.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::fourier::C64;

    pub fn to_rows(m: &DMatrix<C64>) -> Vec<Vec<C64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<DMatrix<C64>, String> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("matrix rows have different lengths".into());
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<C64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<C64>, D::Error> {
        let rows = Vec::<Vec<C64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    /// The same for a list of matrices.
    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[DMatrix<C64>], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<C64>>, D::Error> {
            let all = Vec::<Vec<Vec<C64>>>::deserialize(d)?;
            all.iter()
                .map(|r| from_rows(r).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// Serde adapter writing a vector as a plain list.
pub mod column {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::fourier::C64;

    pub fn serialize<S: Serializer>(v: &DVector<C64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<C64>, D::Error> {
        Ok(DVector::from_vec(Vec::<C64>::deserialize(d)?))
    }

    /// The same for a list of vectors.
    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(vs: &[DVector<C64>], s: S) -> Result<S::Ok, S::Error> {
            vs.iter()
                .map(|v| v.as_slice())
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<C64>>, D::Error> {
            let all = Vec::<Vec<C64>>::deserialize(d)?;
            Ok(all.into_iter().map(DVector::from_vec).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[c(1.0), c(1.0), c(0.0)]);
        let ns = null_space(&m, None).unwrap();
        assert_eq!(ns.basis.ncols(), 2);
        assert!((&m * &ns.basis).norm() < 1e-14);
    }

    #[test]
    fn principal_angle_of_rotated_planes() {
        let a = DMatrix::from_row_slice(3, 1, &[c(1.0), c(0.0), c(0.0)]);
        let t: f64 = 0.3;
        let b = DMatrix::from_row_slice(3, 1, &[c(t.cos()), c(t.sin()), c(0.0)]);
        assert!((max_principal_angle(&a, &b) - t).abs() < 1e-12);
    }

    #[test]
    fn pivoting_skips_dependent_columns() {
        let m = DMatrix::from_row_slice(2, 3, &[c(1.0), c(2.0), c(0.0), c(0.0), c(0.0), c(1.0)]);
        let sel = pivoted_column_selection(&m, 1e-12);
        assert_eq!(sel, vec![1, 2]);
    }

    #[test]
    fn phase_convention() {
        let mut v = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(0.0, -2.0)]);
        normalize_phase(&mut v);
        assert!((v[1] - c(2.0)).norm() < 1e-15);
    }
}
