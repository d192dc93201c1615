//! Seeded random instances for the structural checks, and synthetic nearly
//! invariant subspaces with a known coefficient space.
//!
//! Every instance is a function of its seed alone (ChaCha8), so a failing
//! case can be replayed in isolation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::eae::{self, FactorizationReport, KernelProjectionReport};
use crate::error::Result;
use crate::fourier::{MatrixSymbol, TrigPoly, C64};
use crate::linalg;
use crate::model_space::{MatrixInner, ScalarInner};
use crate::mtto;
use crate::near_invariance::{self, KernelCase};
use crate::subspace::Subspace;

/// Bar for the projector identities and the Hankel relation.
pub const PROJECTION_TOL: f64 = 1e-9;
/// Bar for the norm identity of a recovered decomposition.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
    let qr = random_matrix(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// A random matrix of the given rank.
fn low_rank(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<C64> {
    random_matrix(rng, n, rank) * random_matrix(rng, rank, n)
}

#[derive(Clone, Debug, Serialize)]
pub struct Instance {
    pub seed: u64,
    pub theta: MatrixInner,
    pub g: MatrixSymbol,
}

/// `n ∈ {1, 2, 3}`, `Θ` with monomial entries of degree 1–4 (so `Σ k_i ≤ 12`)
/// and, for `n > 1`, random unitary factors half the time, and a polynomial
/// symbol spanning at most five consecutive degrees in `[−2, 4]`.
///
/// Symbols come in three shapes so that kernels are often nontrivial: a
/// shifted constant `z^s C` of random rank, a sum of two shifted rank-one
/// terms, and a dense polynomial.
pub fn random_instance(seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let degrees: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4usize)).collect();
    let diag: Vec<ScalarInner> = degrees.iter().map(|&k| ScalarInner::monomial(k)).collect();
    let theta = if n > 1 && rng.random_bool(0.5) {
        let left = random_unitary(&mut rng, n);
        let right = random_unitary(&mut rng, n);
        MatrixInner::new(left, diag, right)?
    } else {
        MatrixInner::diagonal(diag)?
    };

    let g = match rng.random_range(0..3) {
        0 => {
            let s = rng.random_range(0..=4i64);
            let rank = rng.random_range(1..=n);
            MatrixSymbol::monomial(s, low_rank(&mut rng, n, rank))
        }
        1 => {
            let s1 = rng.random_range(-1..=2i64);
            let s2 = rng.random_range(s1..=s1 + 2);
            let a = MatrixSymbol::monomial(s1, low_rank(&mut rng, n, 1));
            let b = MatrixSymbol::monomial(s2, low_rank(&mut rng, n, 1));
            a.add(&b)?
        }
        _ => {
            let lo = rng.random_range(-2..=0i64);
            let span = rng.random_range(0..=4usize);
            let coeffs = (0..=span).map(|_| random_matrix(&mut rng, n, n)).collect();
            MatrixSymbol::from_matrices(lo, coeffs)?
        }
    };
    Ok(Instance { seed, theta, g })
}

/// Seeds `base, base + 1, …`.
pub fn instances(count: usize, base_seed: u64) -> Result<Vec<Instance>> {
    (0..count as u64)
        .map(|i| random_instance(base_seed + i))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionChecks {
    /// `‖P_Θ² f − P_Θ f‖ / ‖f‖`, worst over the probes.
    pub idempotence: f64,
    /// `‖P_Θ f + Q_Θ f − f‖ / ‖f‖`.
    pub complementarity: f64,
    /// `max(‖P_Θ Q_Θ f‖, ‖Q_Θ P_Θ f‖) / ‖f‖`.
    pub annihilation: f64,
    /// `|⟨P_Θ f, h⟩ − ⟨f, P_Θ h⟩| / (‖f‖ ‖h‖)`.
    pub self_adjointness: f64,
    /// Operator-norm residual of `A_Ψ = Θ H_{Θ*Ψ}` for the analytic part `Ψ`
    /// of the symbol.
    pub hankel_residual: f64,
    pub tail: f64,
    pub pass: bool,
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize, hi: i64) -> Result<TrigPoly> {
    let c = (0..(hi + 1) as usize * n).map(|_| gaussian(rng)).collect();
    TrigPoly::from_flat(n, 0, c)
}

/// Checks the projector identities on `probes` random analytic polynomials
/// reaching past the model space, and the Hankel relation for the analytic
/// part of `g`.
pub fn projection_algebra(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    probes: usize,
    seed: u64,
) -> Result<ProjectionChecks> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = theta.n();
    let trunc = theta.default_truncation();
    let proj = theta.projector(trunc)?;
    let hi = theta.symbol_degree(trunc) as i64 + 4;
    let (mut idem, mut comp, mut anni, mut adj): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..probes {
        let f = random_poly(&mut rng, n, hi)?;
        let h = random_poly(&mut rng, n, hi)?;
        let nf = f.l2_norm();
        let pf = proj.p_theta(&f)?;
        let qf = proj.q_theta(&f)?;
        idem = idem.max(proj.p_theta(&pf)?.sub(&pf)?.l2_norm() / nf);
        comp = comp.max(pf.add(&qf)?.sub(&f)?.l2_norm() / nf);
        anni = anni
            .max(proj.p_theta(&qf)?.l2_norm() / nf)
            .max(proj.q_theta(&pf)?.l2_norm() / nf);
        let lhs = pf.inner_product(&h)?;
        let rhs = f.inner_product(&proj.p_theta(&h)?)?;
        adj = adj.max((lhs - rhs).norm() / (nf * h.l2_norm()));
    }
    let psi = analytic_part(g)?;
    let hankel = mtto::hankel_relation_check(theta, &psi, trunc)?;
    let tail = proj.tail + hankel.tail;
    let bar = PROJECTION_TOL + tail;
    let pass = idem < bar && comp < bar && anni < bar && adj < bar && hankel.residual < bar;
    Ok(ProjectionChecks {
        idempotence: idem,
        complementarity: comp,
        annihilation: anni,
        self_adjointness: adj,
        hankel_residual: hankel.residual,
        tail,
        pass,
    })
}

/// Drops the negative-degree coefficients.
fn analytic_part(g: &MatrixSymbol) -> Result<MatrixSymbol> {
    let hi = g.hi().max(0);
    let coeffs = (0..=hi).map(|k| g.coeff(k)).collect();
    MatrixSymbol::from_matrices(0, coeffs)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub n: usize,
    pub model_dim: usize,
    pub symbol_window: (i64, i64),
    pub kernel_projection: KernelProjectionReport,
    pub defect_dim: usize,
    pub certification_residual: f64,
    pub defect_pass: bool,
    pub factorization: FactorizationReport,
}

/// Kernel projection, defect bound with certification, and factorisation
/// for one instance.
pub fn check_instance(inst: &Instance) -> Result<SweepRecord> {
    let (theta, g) = (&inst.theta, &inst.g);
    let n_in = eae::kernel_window(theta, g);
    let kernel_projection = eae::verify_kernel_projection(theta, g, n_in, None)?;
    let a = mtto::assemble_mtto(theta, g, theta.default_truncation())?;
    let m = mtto::kernel(&a, None)?;
    let d = near_invariance::defect_space(theta, g, n_in)?;
    let certification_residual = near_invariance::certify_near_invariance(&m, &d.space)?;
    let factorization = eae::factor_operators(theta, g, n_in, None)?.report;
    Ok(SweepRecord {
        seed: inst.seed,
        n: theta.n(),
        model_dim: theta.model_dim(),
        symbol_window: (g.lo(), g.hi()),
        kernel_projection,
        defect_dim: d.space.len(),
        certification_residual,
        defect_pass: d.space.len() <= theta.n()
            && certification_residual < near_invariance::CERTIFY_TOL,
        factorization,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub count: usize,
    pub base_seed: u64,
    pub nontrivial_kernels: usize,
    pub kernel_failures: Vec<u64>,
    pub defect_failures: Vec<u64>,
    pub factorization_failures: Vec<u64>,
    pub max_principal_angle: f64,
    pub max_certification_residual: f64,
    pub max_defect_dim_excess: i64,
    pub max_factor_residual: f64,
    pub min_t1_singular: f64,
    pub min_t2_singular: f64,
    pub records: Vec<SweepRecord>,
}

pub fn run_sweep(count: usize, base_seed: u64) -> Result<SweepSummary> {
    let mut records = Vec::with_capacity(count);
    for inst in instances(count, base_seed)? {
        records.push(check_instance(&inst)?);
    }
    let failures = |f: &dyn Fn(&SweepRecord) -> bool| {
        records.iter().filter(|r| !f(r)).map(|r| r.seed).collect()
    };
    let fold = |f: &dyn Fn(&SweepRecord) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
        records.iter().map(f).fold(init, pick)
    };
    Ok(SweepSummary {
        count,
        base_seed,
        nontrivial_kernels: records
            .iter()
            .filter(|r| r.kernel_projection.dim_ker_a > 0)
            .count(),
        kernel_failures: failures(&|r| r.kernel_projection.pass),
        defect_failures: failures(&|r| r.defect_pass),
        factorization_failures: failures(&|r| r.factorization.pass),
        max_principal_angle: fold(&|r| r.kernel_projection.principal_angle, 0.0, f64::max),
        max_certification_residual: fold(&|r| r.certification_residual, 0.0, f64::max),
        max_defect_dim_excess: records
            .iter()
            .map(|r| r.defect_dim as i64 - r.n as i64)
            .max()
            .unwrap_or(0),
        max_factor_residual: fold(
            &|r| {
                let f = &r.factorization;
                f.residual
                    .max(f.unipotent_inverse_residual)
                    .max(f.nilpotency_residual)
            },
            0.0,
            f64::max,
        ),
        min_t1_singular: fold(
            &|r| r.factorization.t1_min_singular,
            f64::INFINITY,
            f64::min,
        ),
        min_t2_singular: fold(
            &|r| r.factorization.t2_min_singular,
            f64::INFINITY,
            f64::min,
        ),
        records,
    })
}

/// A nearly invariant subspace built from a known coefficient space:
/// `M = Q·{V k₀ + z Σ_j k_j e_j : (k₀, k₁, …, k_m) ∈ K}` with `V` an `n × r`
/// isometry, `e_j` orthonormal and orthogonal to the range of `V`, `Q` a
/// random unitary, and `K` a direct sum of scalar model spaces, each
/// containing the constants. The defect space is `Q·span{e_j}`.
#[derive(Clone, Debug)]
pub struct SyntheticCase {
    pub seed: u64,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub k: Subspace,
    pub space: Subspace,
    pub defect: Subspace,
    /// `Q V`.
    pub values_frame: DMatrix<C64>,
    /// `Q [e_1 … e_m]`.
    pub defect_frame: DMatrix<C64>,
}

pub fn synthetic_case(seed: u64) -> Result<SyntheticCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let r = rng.random_range(0..=n);
    let m = if r == 0 {
        rng.random_range(1..=n)
    } else {
        rng.random_range(0..=n - r)
    };
    let width = r + m;
    let slots: Vec<ScalarInner> = (0..width)
        .map(|_| {
            if rng.random_bool(0.5) {
                ScalarInner::monomial(rng.random_range(1..=3usize))
            } else {
                let mut zeros = vec![C64::new(0.0, 0.0)];
                for _ in 0..rng.random_range(0..=2usize) {
                    let rad: f64 = rng.random_range(0.05..0.5);
                    let arg: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    zeros.push(C64::from_polar(rad, arg));
                }
                ScalarInner::blaschke(zeros)
            }
        })
        .collect();
    let coeff_inner = MatrixInner::diagonal(slots)?;
    let basis = coeff_inner.model_basis(coeff_inner.default_truncation())?;

    let frame = random_unitary(&mut rng, n);
    let q = random_unitary(&mut rng, n);
    let v = &q * frame.columns(0, r);
    let e = &q * frame.columns(r, m);
    let mut polys = Vec::with_capacity(basis.len());
    for kv in &basis.vectors {
        let mut f = TrigPoly::zero(n);
        for (j, col) in v.column_iter().enumerate() {
            f = f.add(&scale_by(&kv.component(j), col.as_slice())?)?;
        }
        for (j, col) in e.column_iter().enumerate() {
            f = f.add(&scale_by(&kv.component(r + j), col.as_slice())?.shift(1))?;
        }
        polys.push(f);
    }
    let tol = near_invariance::RANK_TOL;
    let defect_polys = e
        .column_iter()
        .map(|c| TrigPoly::constant(c.as_slice()))
        .collect::<Vec<_>>();
    Ok(SyntheticCase {
        seed,
        n,
        r,
        m,
        k: Subspace::from_polys(width, &basis.vectors, tol)?,
        space: Subspace::from_polys(n, &polys, tol)?,
        defect: Subspace::from_polys(n, &defect_polys, tol)?,
        values_frame: v,
        defect_frame: e,
    })
}

/// `s(z)·v` for a scalar polynomial `s`.
fn scale_by(s: &TrigPoly, v: &[C64]) -> Result<TrigPoly> {
    let mut flat = Vec::with_capacity(s.width() * v.len());
    for k in s.lo()..=s.hi() {
        let c = s.get(0, k);
        flat.extend(v.iter().map(|x| c * x));
    }
    TrigPoly::from_flat(v.len(), s.lo(), flat)
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundTripReport {
    pub seed: u64,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub expected_dim_k: usize,
    pub recovered_dim_k: usize,
    pub case: KernelCase,
    pub case_matches: bool,
    pub norm_identity_residual: f64,
    /// Principal angle between the recovered coefficient space and the known
    /// one, after aligning the frames chosen by the decomposition.
    pub k_angle: f64,
    pub pass: bool,
}

/// Decomposes a synthetic case and compares with the known `K`.
///
/// The decomposition picks its own orthonormal frames: `F₀ = Q V U` and
/// `E = Q [e] W` with `U`, `W` unitary. Known coefficient tuples are mapped
/// through `(U*, W*)` before the comparison.
pub fn round_trip(case: &SyntheticCase) -> Result<RoundTripReport> {
    let report = near_invariance::decompose_kernel(&case.space, &case.defect)?;
    let (r, m) = (report.r, report.defect_dim);
    let shapes_match = r == case.r && m == case.m;
    let k_angle = if shapes_match {
        let f0_values = DMatrix::from_fn(case.n, r, |i, j| report.f0[j].get(i, 0));
        let e_values = DMatrix::from_fn(case.n, m, |i, j| report.defect_basis[j].get(i, 0));
        let u = case.values_frame.adjoint() * f0_values;
        let w = case.defect_frame.adjoint() * e_values;
        let mut align = DMatrix::zeros(r + m, r + m);
        align.view_mut((0, 0), (r, r)).copy_from(&u.adjoint());
        align.view_mut((r, r), (m, m)).copy_from(&w.adjoint());
        let aligned = case
            .k
            .vectors
            .iter()
            .map(|kv| MatrixSymbol::constant(align.clone()).apply(kv))
            .collect::<Result<Vec<_>>>()?;
        linalg::poly_span_angle(
            &aligned,
            &report.k.vectors,
            r + m,
            near_invariance::RANK_TOL,
        )?
    } else {
        f64::INFINITY
    };
    let expected_case = if case.r > 0 {
        KernelCase::HasNonvanishing
    } else {
        KernelCase::AllVanishAtZero
    };
    let pass = report.dim_k == case.k.len()
        && report.norm_identity_residual < ROUND_TRIP_TOL
        && report.case == expected_case
        && k_angle < 1e-8;
    Ok(RoundTripReport {
        seed: case.seed,
        n: case.n,
        r: case.r,
        m: case.m,
        expected_dim_k: case.k.len(),
        recovered_dim_k: report.dim_k,
        case: report.case,
        case_matches: report.case == expected_case,
        norm_identity_residual: report.norm_identity_residual,
        k_angle,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(7).unwrap();
        let b = random_instance(7).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_unitary(&mut rng, 3);
        assert!((q.adjoint() * &q - DMatrix::<C64>::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn synthetic_case_round_trips() {
        let case = synthetic_case(11).unwrap();
        let rep = round_trip(&case).unwrap();
        assert!(rep.pass, "{rep:#?}");
    }
}
