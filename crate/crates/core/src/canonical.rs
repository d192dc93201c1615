//! The worked example `Θ = diag(z², z²)`, `G = diag(z, z)`, run through every
//! stage: compression, kernel, lifting to `ker T_𝒢`, defect space and the
//! kernel decomposition.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eae::{self, KernelProjectionReport};
use crate::error::Result;
use crate::fourier::{MatrixSymbol, TrigPoly, C64};
use crate::model_space::MatrixInner;
use crate::mtto;
use crate::near_invariance::{self, KernelCase};
use crate::subspace::Subspace;

pub fn example_theta() -> MatrixInner {
    MatrixInner::monomial(&[2, 2]).expect("diag(z^2, z^2) is a valid inner function")
}

pub fn example_symbol() -> MatrixSymbol {
    MatrixSymbol::identity(2).shift(1)
}

/// `span{(z, 0), (0, z)}`.
pub fn expected_kernel() -> Subspace {
    Subspace::from_orthonormal(
        2,
        vec![TrigPoly::unit(2, 0, 1), TrigPoly::unit(2, 1, 1)],
        0.0,
    )
}

/// The compression in the model basis order `(1,0), (z,0), (0,1), (0,z)`.
pub fn expected_matrix() -> DMatrix<C64> {
    let mut m = DMatrix::zeros(4, 4);
    m[(1, 0)] = C64::new(1.0, 0.0);
    m[(3, 2)] = C64::new(1.0, 0.0);
    m
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleReport {
    pub matrix_error: f64,
    pub kernel_dim: usize,
    pub kernel_angle: f64,
    pub witness_residual: f64,
    pub kernel_projection: KernelProjectionReport,
    pub defect_dim: usize,
    pub defect_angle: f64,
    pub case: KernelCase,
    pub dim_k: usize,
    /// Largest coefficient of degree ≥ 1 among the `K` basis tuples; zero
    /// when `K` consists of constants.
    pub k_nonconstant_mass: f64,
    pub norm_identity_residual: f64,
    pub certification_residual: f64,
    pub pass: bool,
}

pub fn run_example() -> Result<ExampleReport> {
    let theta = example_theta();
    let g = example_symbol();
    let n_trunc = theta.default_truncation();
    let a = mtto::assemble_mtto(&theta, &g, n_trunc)?;
    let matrix_error = (&a.matrix - expected_matrix()).norm();
    let ker = mtto::kernel(&a, None)?;
    let kernel_angle = ker.angle_to(&expected_kernel())?;

    let mut witness_residual: f64 = 0.0;
    for f1 in &ker.vectors {
        let w = mtto::lift_kernel_witness(&theta, &g, f1, n_trunc, mtto::KERNEL_MEMBERSHIP_TOL)?;
        witness_residual = witness_residual
            .max(w.analytic_residual)
            .max(w.f2_negative_mass);
    }
    let kernel_projection = eae::verify_kernel_projection(&theta, &g, 0, None)?;

    let defect = near_invariance::defect_space(&theta, &g, 0)?;
    let units = Subspace::from_orthonormal(
        2,
        vec![TrigPoly::unit(2, 0, 0), TrigPoly::unit(2, 1, 0)],
        0.0,
    );
    let defect_angle = defect.space.angle_to(&units)?;
    let report = near_invariance::decompose_kernel(&ker, &defect.space)?;
    let k_nonconstant_mass = report
        .k
        .vectors
        .iter()
        .map(|k| k.restrict(1, i64::MAX).0.l2_norm())
        .fold(0.0, f64::max);

    let pass = matrix_error < 1e-12
        && ker.len() == 2
        && kernel_angle < 1e-10
        && witness_residual < 1e-12
        && kernel_projection.pass
        && kernel_projection.dim_ker_t_g == 2
        && defect.space.len() == 2
        && report.case == KernelCase::AllVanishAtZero
        && report.dim_k == 2
        && k_nonconstant_mass < 1e-12
        && report.norm_identity_residual < 1e-10
        && report.pass;
    Ok(ExampleReport {
        matrix_error,
        kernel_dim: ker.len(),
        kernel_angle,
        witness_residual,
        kernel_projection,
        defect_dim: defect.space.len(),
        defect_angle,
        case: report.case,
        dim_k: report.dim_k,
        k_nonconstant_mass,
        norm_identity_residual: report.norm_identity_residual,
        certification_residual: report.certification_residual,
        pass,
    })
}
