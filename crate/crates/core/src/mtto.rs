//! Compressions `f ↦ P_Θ(G f)` of matrix multiplication operators to model
//! spaces, assembled as explicit matrices on orthonormal model-space bases.
//!
//! At polynomial truncation the `L²`-codomain operator and its `L^q`-codomain
//! modification are the same map, so one matrix serves both; the exponent pair
//! is carried for reporting only, with grid `L^q` norms of the column images.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{ExponentPair, MatrixSymbol, TrigPoly, C64};
use crate::linalg;
use crate::model_space::{MatrixInner, ModelSpaceBasis, ScalarInner};
use crate::subspace::Subspace;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Default relative residual accepted by [`lift_kernel_witness`].
pub const KERNEL_MEMBERSHIP_TOL: f64 = 1e-8;

/// Basis attached to one side of an [`OperatorMatrix`].
#[derive(Clone, Debug)]
pub enum BasisDescriptor {
    /// Orthonormal basis of a model space.
    Model(ModelSpaceBasis),
    /// Monomials `z^k e_i`, `lo ≤ k ≤ hi`, ordered degree-major.
    Window { dim: usize, lo: i64, hi: i64 },
}

impl BasisDescriptor {
    pub fn len(&self) -> usize {
        match self {
            BasisDescriptor::Model(b) => b.len(),
            BasisDescriptor::Window { dim, lo, hi } => (hi - lo + 1).max(0) as usize * dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the vectors the basis lives in.
    pub fn vector_dim(&self) -> usize {
        match self {
            BasisDescriptor::Model(b) => b.n(),
            BasisDescriptor::Window { dim, .. } => *dim,
        }
    }

    pub fn synthesize(&self, x: &[C64]) -> Result<TrigPoly> {
        match self {
            BasisDescriptor::Model(b) => b.synthesize(x),
            BasisDescriptor::Window { dim, lo, .. } => {
                if x.len() != self.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} coordinates for a window basis of size {}",
                        x.len(),
                        self.len()
                    )));
                }
                TrigPoly::from_column(*dim, *lo, x)
            }
        }
    }

    pub fn coordinates(&self, f: &TrigPoly) -> Result<DVector<C64>> {
        match self {
            BasisDescriptor::Model(b) => b.coordinates(f),
            BasisDescriptor::Window { lo, hi, .. } => f.to_column(*lo, *hi),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BasisDescriptor::Model(b) => {
                format!("model space, {} vectors, degree {}", b.len(), b.degree)
            }
            BasisDescriptor::Window { dim, lo, hi } => {
                format!("monomial window [{lo}, {hi}] in dimension {dim}")
            }
        }
    }
}

/// Norms of the image of one domain basis vector.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ImageNorms {
    pub l2: f64,
    pub lq: f64,
}

/// A finite matrix with the bases it is expressed in.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<C64>,
    pub domain: BasisDescriptor,
    pub codomain: BasisDescriptor,
    pub truncation: usize,
    pub exponents: ExponentPair,
    /// Sup-norm tail of the expansions that went into the matrix.
    pub tail: f64,
    pub image_norms: Vec<ImageNorms>,
    /// Largest distance between an image `P_Θ(G e_j)` and its expansion in the
    /// codomain basis; zero up to rounding when the basis spans the image.
    pub compression_residual: f64,
}

impl OperatorMatrix {
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        Ok(linalg::svd(&self.matrix)?.singular_values)
    }

    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.matrix)
    }

    /// Applies the matrix to a vector given as a polynomial in the domain.
    pub fn apply(&self, f: &TrigPoly) -> Result<TrigPoly> {
        let x = self.domain.coordinates(f)?;
        let y = &self.matrix * x;
        self.codomain.synthesize(y.as_slice())
    }
}

fn check_square(theta: &MatrixInner, g: &MatrixSymbol) -> Result<()> {
    let n = theta.n();
    if g.rows() != n || g.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "symbol is {}x{}, inner function is {n}x{n}",
            g.rows(),
            g.cols()
        )));
    }
    Ok(())
}

/// Matrix of `f ↦ P_Θ(G f)` on the orthonormal model basis at truncation
/// degree `n` (see [`MatrixInner::default_truncation`]).
pub fn assemble_mtto(theta: &MatrixInner, g: &MatrixSymbol, n: usize) -> Result<OperatorMatrix> {
    assemble_mtto_with(theta, g, n, ExponentPair::default())
}

/// As [`assemble_mtto`], recording `exponents` and reporting `L^q` image norms.
pub fn assemble_mtto_with(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    n: usize,
    exponents: ExponentPair,
) -> Result<OperatorMatrix> {
    check_square(theta, g)?;
    let basis = theta.model_basis(n)?;
    let proj = theta.projector(n)?;
    let d = basis.len();
    let mut matrix = DMatrix::zeros(d, d);
    let mut image_norms = Vec::with_capacity(d);
    let mut compression_residual: f64 = 0.0;
    for (j, e) in basis.vectors.iter().enumerate() {
        let image = proj.p_theta(&g.apply(e)?)?;
        let coords = basis.coordinates(&image)?;
        matrix.set_column(j, &coords);
        let back = basis.synthesize(coords.as_slice())?;
        compression_residual = compression_residual.max(image.sub(&back)?.l2_norm());
        let m = image.default_grid_size();
        image_norms.push(ImageNorms {
            l2: image.l2_norm(),
            lq: image.lp_norm_grid(exponents.q(), m)?,
        });
    }
    let g_norm = g.coeffs().iter().map(|c| c.norm()).sum::<f64>();
    Ok(OperatorMatrix {
        matrix,
        domain: BasisDescriptor::Model(basis.clone()),
        codomain: BasisDescriptor::Model(basis.clone()),
        truncation: n,
        exponents,
        tail: (basis.tail_bound + proj.tail) * (1.0 + g_norm),
        image_norms,
        compression_residual,
    })
}

/// Kernel of an operator matrix: right singular vectors with `σ ≤ tol`
/// (default `max(rows, cols)·ε·σ_max`), mapped back to polynomials through
/// the domain basis.
pub fn kernel(op: &OperatorMatrix, tol: Option<f64>) -> Result<Subspace> {
    let ns = linalg::null_space(&op.matrix, tol)?;
    let vectors = (0..ns.basis.ncols())
        .map(|j| op.domain.synthesize(ns.basis.column(j).as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Subspace {
        dim: op.domain.vector_dim(),
        vectors,
        tol: ns.tol,
        coordinates: Some(ns.basis),
        singular_values: ns.singular_values,
    })
}

/// Second coordinate of a kernel element of the block Toeplitz operator lying
/// over `f₁`, with the checks that it really is one.
#[derive(Clone, Debug, Serialize)]
pub struct KernelWitness {
    pub f2: TrigPoly,
    /// `‖P_Θ(G f₁)‖ / ‖f₁‖`.
    pub membership_residual: f64,
    /// Negative Fourier mass of `f₂`.
    pub f2_negative_mass: f64,
    /// Non-negative Fourier mass of `G f₁ + Θ f₂`.
    pub analytic_residual: f64,
    pub tail: f64,
}

impl KernelWitness {
    /// Both witness conditions hold within `tail + 10⁻⁸·‖f₁‖`.
    pub fn holds(&self, f1_norm: f64) -> bool {
        let bound = self.tail + 1e-8 * f1_norm.max(1.0);
        self.f2_negative_mass <= bound && self.analytic_residual <= bound
    }
}

/// `f₂ = −Θ* P₊(G f₁)` for `f₁` in the kernel of the compression, so that
/// `G f₁ + Θ f₂` has no non-negative frequencies. Rejects `f₁` whose
/// compressed image exceeds `tol·‖f₁‖`.
pub fn lift_kernel_witness(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    f1: &TrigPoly,
    n: usize,
    tol: f64,
) -> Result<KernelWitness> {
    check_square(theta, g)?;
    if f1.dim() != theta.n() {
        return Err(Error::DimensionMismatch(format!(
            "kernel vector has length {}, expected {}",
            f1.dim(),
            theta.n()
        )));
    }
    let proj = theta.projector(n)?;
    let f1_norm = f1.l2_norm();
    if f1_norm == 0.0 {
        return Ok(KernelWitness {
            f2: TrigPoly::zero(theta.n()),
            membership_residual: 0.0,
            f2_negative_mass: 0.0,
            analytic_residual: 0.0,
            tail: proj.tail,
        });
    }
    let gf = g.apply(f1)?;
    let residual = proj.p_theta(&gf)?.l2_norm() / f1_norm;
    if residual > tol {
        return Err(Error::NotInKernel { residual, tol });
    }
    let f2 = proj.adjoint.apply(&gf.riesz_plus())?.neg();
    let total = gf.add(&proj.mul_theta(&f2)?)?;
    let g_norm = g.coeffs().iter().map(|c| c.norm()).sum::<f64>();
    Ok(KernelWitness {
        f2_negative_mass: f2.negative_mass(),
        analytic_residual: total.nonnegative_mass(),
        f2,
        membership_residual: residual,
        tail: proj.tail * g_norm * f1_norm * 2.0,
    })
}

/// Result of comparing `A_Ψ` with `Θ H_{Θ*Ψ}` on the model space.
#[derive(Clone, Debug, Serialize)]
pub struct HankelReport {
    /// Operator norm of the difference on the model space.
    pub residual: f64,
    pub operator_norm: f64,
    pub tail: f64,
}

/// For analytic `Ψ`, checks `P_Θ(Ψ f) = Θ P₋(Θ* Ψ f)` on every model-basis
/// vector and returns the operator-norm residual.
pub fn hankel_relation_check(
    theta: &MatrixInner,
    psi: &MatrixSymbol,
    n: usize,
) -> Result<HankelReport> {
    check_square(theta, psi)?;
    if !psi.is_analytic() {
        let mass = psi
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(k, _)| psi.lo() + (*k as i64) < 0)
            .map(|(_, c)| c.norm_squared())
            .sum::<f64>()
            .sqrt();
        return Err(Error::NotAnalytic { mass });
    }
    let basis = theta.model_basis(n)?;
    let proj = theta.projector(n)?;
    let mut lhs = Vec::with_capacity(basis.len());
    let mut diff = Vec::with_capacity(basis.len());
    for e in &basis.vectors {
        let pf = psi.apply(e)?;
        let a = proj.p_theta(&pf)?;
        let h = proj.mul_theta(&proj.adjoint.apply(&pf)?.riesz_minus0())?;
        diff.push(a.sub(&h)?);
        lhs.push(a);
    }
    let dim = theta.n();
    let norm_of = |polys: &[TrigPoly]| -> Result<f64> {
        if polys.is_empty() {
            return Ok(0.0);
        }
        let (lo, hi) = linalg::common_window(polys);
        Ok(linalg::spectral_norm(&linalg::poly_matrix(
            polys, dim, lo, hi,
        )?))
    };
    let psi_norm = psi.coeffs().iter().map(|c| c.norm()).sum::<f64>();
    Ok(HankelReport {
        residual: norm_of(&diff)?,
        operator_norm: norm_of(&lhs)?,
        tail: (basis.tail_bound + 2.0 * proj.tail) * (1.0 + psi_norm),
    })
}

/// Matrix of `f ↦ ⟨f, k_ζ⟩ k_ζ` on the model basis of a scalar inner function.
pub fn rank_one_tto(theta: &ScalarInner, zeta: C64, n: usize) -> Result<OperatorMatrix> {
    let inner = MatrixInner::diagonal(vec![theta.clone()])?;
    let basis = inner.model_basis(n)?;
    let (k, k_tail) = theta.reproducing_kernel(zeta, n)?;
    let c = basis.coordinates(&k)?;
    let matrix = &c * c.adjoint();
    let image_norms = (0..basis.len())
        .map(|j| {
            let l2 = c[j].norm() * k.l2_norm();
            ImageNorms { l2, lq: l2 }
        })
        .collect();
    let residual = k.sub(&basis.synthesize(c.as_slice())?)?.l2_norm();
    Ok(OperatorMatrix {
        matrix,
        domain: BasisDescriptor::Model(basis.clone()),
        codomain: BasisDescriptor::Model(basis.clone()),
        truncation: n,
        exponents: ExponentPair::default(),
        tail: k_tail + basis.tail_bound,
        image_norms,
        compression_residual: residual,
    })
}

/// Reading of a norm profile over growing truncations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthVerdict {
    /// The norms level off: bounded at this scale.
    BoundedAtThisScale,
    /// The norms keep growing: no bounded extension at this scale.
    NoBoundedExtensionAtThisScale,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthProfile {
    pub model_dims: Vec<usize>,
    pub norms: Vec<f64>,
    pub verdict: GrowthVerdict,
}

/// Relative growth over the last step above which a profile is read as
/// unsaturated.
pub const SATURATION_TOL: f64 = 1e-2;

fn growth_verdict(norms: &[f64]) -> GrowthVerdict {
    let monotone = norms.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    let last = match norms {
        [.., a, b] if *a > 0.0 => b / a - 1.0,
        _ => 0.0,
    };
    if monotone && last > SATURATION_TOL {
        GrowthVerdict::NoBoundedExtensionAtThisScale
    } else {
        GrowthVerdict::BoundedAtThisScale
    }
}

/// Largest singular value of the compression of `G` to each model space in a
/// family of growing inner functions. A diagnostic about finite sections, not
/// a proof of (un)boundedness.
pub fn boundedness_growth_diagnostic(
    family: &[MatrixInner],
    g: &MatrixSymbol,
) -> Result<GrowthProfile> {
    let mut dims = Vec::with_capacity(family.len());
    let mut norms = Vec::with_capacity(family.len());
    for theta in family {
        let op = assemble_mtto(theta, g, theta.default_truncation())?;
        dims.push(op.matrix.nrows());
        norms.push(op.norm());
    }
    Ok(GrowthProfile {
        verdict: growth_verdict(&norms),
        model_dims: dims,
        norms,
    })
}

/// One step of the rank-one profile: the operator norm of `k_ζ ⊗ k_ζ` for the
/// Blaschke product on the first `count` zeros, and the closed form
/// `‖k_ζ‖² = Σ (1 − |a|²)/|ζ − a|²` valid for finite Blaschke products.
#[derive(Clone, Debug, Serialize)]
pub struct RankOneStep {
    pub count: usize,
    pub degree: usize,
    pub norm: f64,
    pub closed_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankOneProfile {
    pub steps: Vec<RankOneStep>,
    pub verdict: GrowthVerdict,
}

/// Norm profile of `k_ζ ⊗ k_ζ` over Blaschke partial products
/// `Π_{k ≤ count} b_{a_k}` for each entry of `counts`.
pub fn rank_one_growth(zeros: &[C64], zeta: C64, counts: &[usize]) -> Result<RankOneProfile> {
    let mut steps = Vec::with_capacity(counts.len());
    for &count in counts {
        if count > zeros.len() {
            return Err(Error::InvalidInput(format!(
                "asked for {count} zeros, only {} supplied",
                zeros.len()
            )));
        }
        let theta = ScalarInner::blaschke(zeros[..count].to_vec());
        theta.validate()?;
        let degree = theta.min_degree(crate::model_space::AUTO_TAIL);
        let op = rank_one_tto(&theta, zeta, degree)?;
        let closed_form = zeros[..count]
            .iter()
            .map(|a| (1.0 - a.norm_sqr()) / (zeta - a).norm_sqr())
            .sum();
        steps.push(RankOneStep {
            count,
            degree,
            norm: op.norm(),
            closed_form,
        });
    }
    let norms: Vec<f64> = steps.iter().map(|s| s.norm).collect();
    Ok(RankOneProfile {
        verdict: growth_verdict(&norms),
        steps,
    })
}

/// Upper-left compression of the (semi-infinite) Toeplitz matrix of an
/// analytic symbol: `T[i, j] = C_{i − j}` on the monomial window `[0, len)`,
/// degree-major. Used as an independent reference for monomial model spaces.
pub fn toeplitz_section(g: &MatrixSymbol, len: usize) -> DMatrix<C64> {
    let n = g.rows();
    let mut t = DMatrix::from_element(len * n, len * n, ZERO);
    for bi in 0..len {
        for bj in 0..len {
            let c = g.coeff(bi as i64 - bj as i64);
            t.view_mut((bi * n, bj * n), (n, n)).copy_from(&c);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn identity_symbol_gives_identity() {
        let theta = MatrixInner::monomial(&[2, 3]).unwrap();
        let op = assemble_mtto(&theta, &MatrixSymbol::identity(2), 3).unwrap();
        assert!((&op.matrix - DMatrix::<C64>::identity(5, 5)).norm() < 1e-14);
        assert!(kernel(&op, None).unwrap().is_empty());
    }

    #[test]
    fn zero_symbol_gives_zero() {
        let theta = MatrixInner::monomial(&[2]).unwrap();
        let op = assemble_mtto(&theta, &MatrixSymbol::zero(1, 1), 2).unwrap();
        assert_eq!(op.norm(), 0.0);
    }

    #[test]
    fn non_analytic_hankel_symbol_rejected() {
        let theta = MatrixInner::monomial(&[2]).unwrap();
        let psi = MatrixSymbol::monomial(-1, DMatrix::from_element(1, 1, one()));
        assert!(matches!(
            hankel_relation_check(&theta, &psi, 2),
            Err(Error::NotAnalytic { .. })
        ));
    }

    #[test]
    fn witness_rejects_non_kernel_vector() {
        let theta = MatrixInner::monomial(&[2]).unwrap();
        let g = MatrixSymbol::identity(1);
        let f = TrigPoly::unit(1, 0, 0);
        assert!(matches!(
            lift_kernel_witness(&theta, &g, &f, 2, KERNEL_MEMBERSHIP_TOL),
            Err(Error::NotInKernel { .. })
        ));
    }

    #[test]
    fn growth_verdicts() {
        assert_eq!(
            growth_verdict(&[1.0, 1.0, 1.0]),
            GrowthVerdict::BoundedAtThisScale
        );
        assert_eq!(
            growth_verdict(&[1.0, 2.0, 4.0]),
            GrowthVerdict::NoBoundedExtensionAtThisScale
        );
    }
}
