//! Near backward-shift invariance of MTTO kernels.
//!
//! A subspace `M ⊆ (H²)ⁿ` is nearly `S*`-invariant with defect space `D` if
//! `S* f ∈ M ⊕ D` whenever `f ∈ M` vanishes at the origin. For kernels of
//! compressions the defect space is read off `ker T_𝒢`, and every element of
//! `M` then factors as `F = F₀ k₀ + z Σ_j k_j e_j` with `(k₀, k₁, …, k_m)` in
//! an `S*`-invariant space `K` and `‖F‖² = Σ ‖k_j‖²`.
//!
//! For a finite-dimensional `M` with orthonormal basis `B` the coefficient
//! functions have a realization `k_x(z) = C (I − zT)⁻¹ x` (for `F = B x`):
//! one step of "remove the `F₀` component, divide by `z`, split into `M` and
//! `D`" is the linear map `x ↦ (α, β, y)`, with `C = [α; β]` and `T: x ↦ y`.
//! `K = {k_x}` is then `S*`-invariant by construction (`S* k_x = k_{Tx}`),
//! and the norm identity is `Σ_l (T^l)* C* C T^l = I`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eae;
use crate::error::{Error, Result};
use crate::fourier::{MatrixSymbol, TrigPoly, C64};
use crate::linalg;
use crate::model_space::MatrixInner;
use crate::mtto;
use crate::subspace::Subspace;

/// Rank tolerance for evaluations at the origin and subspace spans.
pub const RANK_TOL: f64 = 1e-10;
/// Certification bar for `dist(S* f, M ⊕ D)`.
pub const CERTIFY_TOL: f64 = 1e-8;
/// Bar for the reconstruction, norm-identity and `S*`-invariance residuals.
pub const DECOMPOSE_TOL: f64 = 1e-8;

const MAX_SERIES_DEGREE: usize = 4096;

/// `S* f = (f − f(0))/z`. Rejects inputs with negative frequencies.
pub fn backward_shift(f: &TrigPoly) -> Result<TrigPoly> {
    if !f.is_analytic() {
        return Err(Error::NotAnalytic {
            mass: f.negative_mass(),
        });
    }
    Ok(f.restrict(1, i64::MAX).0.shift(-1))
}

/// Raw defect space from `ker T_𝒢`: pick `W_i` in the kernel whose values at
/// the origin are independent (pivoted selection), find all `s` with
/// `P_n(Σ s_i W_i(0)) = 0`, and return `{Σ s_i P_n(W_i)} / z`
/// orthonormalised.
pub fn defect_space(theta: &MatrixInner, g: &MatrixSymbol, n_in: usize) -> Result<DefectSpace> {
    let n = theta.n();
    let n_in = n_in.max(eae::kernel_window(theta, g));
    let tg = eae::assemble_t_g(theta, g, n_in)?;
    let ker = eae::kernel_t_g(&tg, None)?;
    if ker.is_empty() {
        return Ok(DefectSpace {
            space: Subspace::zero(n),
            r: 0,
            ker_t_g_dim: 0,
        });
    }
    let w0 = DMatrix::from_fn(2 * n, ker.len(), |i, j| ker.vectors[j].value_at_zero()[i]);
    let chosen = linalg::pivoted_column_selection(&w0, RANK_TOL);
    let r = chosen.len();
    if r == 0 {
        return Ok(DefectSpace {
            space: Subspace::zero(n),
            r,
            ker_t_g_dim: ker.len(),
        });
    }
    let top = DMatrix::from_fn(n, r, |i, j| w0[(i, chosen[j])]);
    let s = linalg::null_space(&top, Some(RANK_TOL))?.basis;
    let firsts: Vec<TrigPoly> = chosen
        .iter()
        .map(|&j| ker.vectors[j].split_at(n).map(|(a, _)| a))
        .collect::<Result<_>>()?;
    let mut raw = Vec::with_capacity(s.ncols());
    for c in 0..s.ncols() {
        let mut acc = TrigPoly::zero(n);
        for (i, f) in firsts.iter().enumerate() {
            acc = acc.axpy(s[(i, c)], f)?;
        }
        // The combination vanishes at 0 up to rounding; drop that residue.
        raw.push(backward_shift(&acc)?);
    }
    Ok(DefectSpace {
        space: Subspace::from_polys(n, &raw, RANK_TOL)?,
        r,
        ker_t_g_dim: ker.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectSpace {
    pub space: Subspace,
    /// `dim W` with `W = ker T_𝒢 (0)`.
    pub r: usize,
    pub ker_t_g_dim: usize,
}

/// Values at the origin of the basis of `M`, as an `n × dim M` matrix.
fn evaluation_at_zero(m: &Subspace) -> DMatrix<C64> {
    DMatrix::from_fn(m.dim, m.len(), |i, j| m.vectors[j].get(i, 0))
}

fn combine(m: &Subspace, x: &DMatrix<C64>) -> Result<Vec<TrigPoly>> {
    (0..x.ncols())
        .map(|c| {
            let mut acc = TrigPoly::zero(m.dim);
            for (i, v) in m.vectors.iter().enumerate() {
                acc = acc.axpy(x[(i, c)], v)?;
            }
            Ok(acc)
        })
        .collect()
}

/// `max dist(S* f, M + D)` over an orthonormal basis of `{f ∈ M : f(0) = 0}`.
pub fn certify_near_invariance(m: &Subspace, d: &Subspace) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let e0 = evaluation_at_zero(m);
    let vanish = linalg::null_space(&e0, Some(RANK_TOL))?.basis;
    let mut all = m.vectors.clone();
    all.extend_from_slice(&d.vectors);
    let span = Subspace::from_polys(m.dim, &all, RANK_TOL)?;
    let mut worst: f64 = 0.0;
    for f in combine(m, &vanish)? {
        worst = worst.max(span.distance(&backward_shift(&f)?)?);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelCase {
    /// Some element of `M` does not vanish at the origin.
    HasNonvanishing,
    /// Every element of `M` vanishes at the origin.
    AllVanishAtZero,
}

#[derive(Clone, Debug, Serialize)]
pub struct NearInvarianceReport {
    pub m: Subspace,
    pub dim_m: usize,
    pub defect_dim: usize,
    /// Defect space as produced, before orthogonalisation against `M`.
    pub raw_defect_basis: Vec<TrigPoly>,
    /// Orthonormal, orthogonal to `M`.
    pub defect_basis: Vec<TrigPoly>,
    pub defect_orthogonality: f64,
    pub case: KernelCase,
    /// Columns of `F₀`.
    pub f0: Vec<TrigPoly>,
    pub r: usize,
    /// Basis of `K ⊆ (H²)^{r+m}`, one tuple `(k₀; k₁; …; k_m)` per basis
    /// vector of `M`, truncated at `series_degree`.
    pub k: Subspace,
    pub dim_k: usize,
    pub series_degree: usize,
    pub series_tail: f64,
    pub certification_residual: f64,
    pub reconstruction_residual: f64,
    pub norm_identity_residual: f64,
    pub s_star_residual: f64,
    #[serde(skip)]
    pub realization_c: DMatrix<C64>,
    #[serde(skip)]
    pub realization_t: DMatrix<C64>,
    pub pass: bool,
}

/// Decomposes a nearly `S*`-invariant subspace `M` with defect space `D`.
/// `D` is first orthogonalised against `M` (both versions are reported).
pub fn decompose_kernel(m: &Subspace, d: &Subspace) -> Result<NearInvarianceReport> {
    let n = m.dim;
    let dim_m = m.len();

    let mut orth = Vec::with_capacity(d.len());
    for v in &d.vectors {
        orth.push(v.sub(&m.project(v)?)?);
    }
    let e = Subspace::from_polys(n, &orth, RANK_TOL)?;
    let mut defect_orthogonality: f64 = 0.0;
    for v in &e.vectors {
        defect_orthogonality = defect_orthogonality.max(m.project(v)?.l2_norm());
    }

    let certification_residual = certify_near_invariance(m, d)?;
    if certification_residual > CERTIFY_TOL {
        return Err(Error::CertificationFailed {
            residual: certification_residual,
            threshold: CERTIFY_TOL,
        });
    }

    // F₀: the part of M on which evaluation at 0 is injective.
    let e0 = evaluation_at_zero(m);
    let f0_coords = if dim_m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let s = linalg::svd(&e0)?;
        let r = s.singular_values.iter().filter(|&&x| x > RANK_TOL).count();
        let mut v = s.v.columns(0, r).into_owned();
        for j in 0..r {
            let mut col = v.column(j).into_owned();
            linalg::normalize_phase(&mut col);
            v.set_column(j, &col);
        }
        v
    };
    let r = f0_coords.ncols();
    let f0 = combine(m, &f0_coords)?;
    let mm = e.len();
    let case = if r > 0 {
        KernelCase::HasNonvanishing
    } else {
        KernelCase::AllVanishAtZero
    };

    if dim_m == 0 {
        return Ok(NearInvarianceReport {
            m: m.clone(),
            dim_m,
            defect_dim: mm,
            raw_defect_basis: d.vectors.clone(),
            defect_basis: e.vectors.clone(),
            defect_orthogonality,
            case,
            f0,
            r,
            k: Subspace::zero(r + mm.max(1)),
            dim_k: 0,
            series_degree: 0,
            series_tail: 0.0,
            certification_residual,
            reconstruction_residual: 0.0,
            norm_identity_residual: 0.0,
            s_star_residual: 0.0,
            realization_c: DMatrix::zeros(r + mm, 0),
            realization_t: DMatrix::zeros(0, 0),
            pass: true,
        });
    }

    if r + mm == 0 {
        // A nonzero M whose elements all vanish at 0 cannot be S*-invariant.
        return Err(Error::Degenerate { degree: 0 });
    }

    // One step of the recursion for every basis vector at once:
    // b_i = F₀ α + z E β + z B y.
    let shifted_e: Vec<TrigPoly> = e.vectors.iter().map(|v| v.shift(1)).collect();
    let shifted_b: Vec<TrigPoly> = m.vectors.iter().map(|v| v.shift(1)).collect();
    let mut columns = f0.clone();
    columns.extend(shifted_e);
    columns.extend(shifted_b);
    let mut everything = columns.clone();
    everything.extend_from_slice(&m.vectors);
    let (_, hi) = linalg::common_window(&everything);
    let lhs = linalg::poly_matrix(&columns, n, 0, hi)?;
    let rhs = linalg::poly_matrix(&m.vectors, n, 0, hi)?;
    let (x, rank) = linalg::least_squares(&lhs, &rhs, RANK_TOL)?;
    if rank < lhs.ncols() {
        // The step is the same at every degree, so a deficiency shows up at
        // the first shift.
        return Err(Error::Degenerate { degree: 1 });
    }
    let reconstruction_residual = linalg::spectral_norm(&(&lhs * &x - &rhs));
    let c = x.rows(0, r + mm).into_owned();
    let t = x.rows(r + mm, dim_m).into_owned();

    // Norm identity: the Stein Gramian Σ (T^l)* C* C T^l must be the identity.
    let mut gram = c.adjoint() * &c;
    let mut power = t.clone();
    for _ in 0..64 {
        if linalg::spectral_norm(&power) < 1e-18 {
            break;
        }
        gram = &gram + power.adjoint() * &gram * &power;
        power = &power * &power;
        if !gram.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || gram.norm() > 1e12 {
            return Err(Error::Numerical(
                "coefficient series does not converge (spectral radius of the shift step ≥ 1)"
                    .into(),
            ));
        }
    }
    let norm_identity_residual =
        linalg::spectral_norm(&(gram - DMatrix::<C64>::identity(dim_m, dim_m)));

    // Coefficient series k_x = Σ_l C T^l x z^l for the basis vectors x = e_i.
    let mut blocks: Vec<DMatrix<C64>> = Vec::new();
    let mut tp = DMatrix::<C64>::identity(dim_m, dim_m);
    let mut series_tail = 0.0;
    loop {
        blocks.push(&c * &tp);
        tp = &tp * &t;
        if tp.norm() < 1e-16 {
            break;
        }
        if blocks.len() >= MAX_SERIES_DEGREE {
            series_tail = (&c * &tp).norm() / (1.0 - linalg::spectral_norm(&t)).max(1e-300);
            break;
        }
    }
    let width = r + mm;
    let k_vectors: Vec<TrigPoly> = (0..dim_m)
        .map(|i| {
            let flat: Vec<C64> = blocks
                .iter()
                .flat_map(|b| b.column(i).iter().copied().collect::<Vec<_>>())
                .collect();
            TrigPoly::from_flat(width, 0, flat)
        })
        .collect::<Result<_>>()?;
    let k_space = Subspace::from_polys(width, &k_vectors, RANK_TOL)?;
    let mut s_star_residual: f64 = 0.0;
    for kv in &k_vectors {
        s_star_residual = s_star_residual.max(k_space.distance(&backward_shift(kv)?)?);
    }

    let pass = reconstruction_residual < DECOMPOSE_TOL
        && norm_identity_residual < DECOMPOSE_TOL
        && s_star_residual < DECOMPOSE_TOL
        && k_space.len() == dim_m;
    Ok(NearInvarianceReport {
        m: m.clone(),
        dim_m,
        defect_dim: mm,
        raw_defect_basis: d.vectors.clone(),
        defect_basis: e.vectors.clone(),
        defect_orthogonality,
        case,
        f0,
        r,
        dim_k: k_space.len(),
        k: k_space,
        series_degree: blocks.len().saturating_sub(1),
        series_tail,
        certification_residual,
        reconstruction_residual,
        norm_identity_residual,
        s_star_residual,
        realization_c: c,
        realization_t: t,
        pass,
    })
}

/// Kernel, defect space, certification and decomposition for one symbol.
#[derive(Clone, Debug, Serialize)]
pub struct KernelStructure {
    pub n: usize,
    pub ker_t_g_dim: usize,
    pub w_dim: usize,
    pub defect_bound_holds: bool,
    pub report: NearInvarianceReport,
}

pub fn analyze_kernel(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    n_in: usize,
) -> Result<KernelStructure> {
    let a = mtto::assemble_mtto(theta, g, theta.default_truncation())?;
    let m = mtto::kernel(&a, None)?;
    let d = defect_space(theta, g, n_in)?;
    let report = decompose_kernel(&m, &d.space)?;
    Ok(KernelStructure {
        n: theta.n(),
        ker_t_g_dim: d.ker_t_g_dim,
        w_dim: d.r,
        defect_bound_holds: d.space.len() <= theta.n(),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_drops_constant() {
        let one = C64::new(1.0, 0.0);
        assert!(backward_shift(&TrigPoly::constant(&[one]))
            .unwrap()
            .is_zero());
        let f = TrigPoly::unit(2, 0, 2);
        assert_eq!(backward_shift(&f).unwrap(), TrigPoly::unit(2, 0, 1));
        assert!(backward_shift(&TrigPoly::unit(1, 0, -1)).is_err());
    }

    #[test]
    fn model_space_is_invariant() {
        let theta = MatrixInner::monomial(&[3, 1]).unwrap();
        let b = theta.model_basis(3).unwrap();
        let m = Subspace::from_orthonormal(2, b.vectors, RANK_TOL);
        assert!(certify_near_invariance(&m, &Subspace::zero(2)).unwrap() < 1e-12);
    }
}
