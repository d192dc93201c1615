//! The block Toeplitz operator `T_𝒢(f₁, f₂) = (P₊(Θ* f₁), P₊(G f₁ + Θ f₂))`
//! on monomial windows, its factorisation through `diag(P_Θ G P_Θ + Q_Θ, P₊)`,
//! kernel comparison with the model-space compression, and the three-way
//! split of its codomain.
//!
//! All maps are evaluated exactly on polynomials; matrices are only formed
//! on finite monomial windows chosen large enough that no image is cut off.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{ExponentPair, MatrixSymbol, TrigPoly, C64};
use crate::linalg;
use crate::model_space::{MatrixInner, ThetaProjector};
use crate::mtto;
use crate::subspace::Subspace;

/// Principal-angle bar for `P_n(ker T_𝒢) = ker A`.
pub const KERNEL_ANGLE_TOL: f64 = 1e-8;
/// Absolute part of the factorisation thresholds (added to the tail).
pub const FACTOR_TOL: f64 = 1e-9;
/// Lower bar for the smallest singular values of `T₁` and `T₂`.
pub const MIN_SINGULAR_TOL: f64 = 1e-6;

type Pair = (TrigPoly, TrigPoly);

/// A 2×2 block operator on pairs of vector polynomials, assembled on the
/// monomial windows `[0, in_hi[c]]` (input block column `c`) and
/// `[0, out_hi[r]]` (output block row `r`). Coordinates are degree-major per
/// block, first block first.
#[derive(Clone, Debug)]
pub struct BlockOperator {
    pub n: usize,
    pub in_hi: [i64; 2],
    pub out_hi: [i64; 2],
    pub matrix: DMatrix<C64>,
    pub exponents: ExponentPair,
    pub tail: f64,
}

impl BlockOperator {
    /// Assembles the matrix of `map` by probing every unit monomial of the
    /// input windows. Fails with a window-budget error if an image leaves the
    /// output windows.
    pub fn from_map(
        n: usize,
        in_hi: [i64; 2],
        out_hi: [i64; 2],
        map: impl Fn(&TrigPoly, &TrigPoly) -> Result<Pair>,
    ) -> Result<Self> {
        let in_len = [block_len(n, in_hi[0]), block_len(n, in_hi[1])];
        let out_len = [block_len(n, out_hi[0]), block_len(n, out_hi[1])];
        let mut matrix = DMatrix::zeros(out_len[0] + out_len[1], in_len[0] + in_len[1]);
        let zero = TrigPoly::zero(n);
        for c in 0..2 {
            for k in 0..=in_hi[c] {
                for i in 0..n {
                    let u = TrigPoly::unit(n, i, k);
                    let (a, b) = if c == 0 {
                        map(&u, &zero)?
                    } else {
                        map(&zero, &u)?
                    };
                    let col = c * in_len[0] + k as usize * n + i;
                    matrix
                        .view_mut((0, col), (out_len[0], 1))
                        .copy_from(&a.to_column(0, out_hi[0])?);
                    matrix
                        .view_mut((out_len[0], col), (out_len[1], 1))
                        .copy_from(&b.to_column(0, out_hi[1])?);
                }
            }
        }
        Ok(Self {
            n,
            in_hi,
            out_hi,
            matrix,
            exponents: ExponentPair::default(),
            tail: 0.0,
        })
    }

    fn in_len(&self, c: usize) -> usize {
        block_len(self.n, self.in_hi[c])
    }

    fn out_len(&self, r: usize) -> usize {
        block_len(self.n, self.out_hi[r])
    }

    /// Block `(r, c)` as a dense matrix.
    pub fn block(&self, r: usize, c: usize) -> DMatrix<C64> {
        let row0 = if r == 0 { 0 } else { self.out_len(0) };
        let col0 = if c == 0 { 0 } else { self.in_len(0) };
        self.matrix
            .view((row0, col0), (self.out_len(r), self.in_len(c)))
            .into_owned()
    }

    /// Splits an input coordinate vector into the pair `(f₁, f₂)`.
    pub fn input_pair(&self, x: &[C64]) -> Result<Pair> {
        let (a, b) = x.split_at(self.in_len(0));
        Ok((
            TrigPoly::from_column(self.n, 0, a)?,
            TrigPoly::from_column(self.n, 0, b)?,
        ))
    }

    pub fn output_pair(&self, y: &[C64]) -> Result<Pair> {
        let (a, b) = y.split_at(self.out_len(0));
        Ok((
            TrigPoly::from_column(self.n, 0, a)?,
            TrigPoly::from_column(self.n, 0, b)?,
        ))
    }

    pub fn min_singular_value(&self) -> Result<f64> {
        linalg::min_singular_value(&self.matrix)
    }
}

fn block_len(n: usize, hi: i64) -> usize {
    (hi + 1).max(0) as usize * n
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

fn symbol_norm(s: &MatrixSymbol) -> f64 {
    s.coeffs().iter().map(|c| c.norm()).sum()
}

/// Input degree that captures every element of `ker T_𝒢` for polynomial
/// inner functions: `deg Θ + deg⁺ G`.
pub fn kernel_window(theta: &MatrixInner, g: &MatrixSymbol) -> usize {
    theta.symbol_degree(theta.default_truncation()) + g.positive_degree() as usize
}

/// Building blocks shared by the block operators.
struct Ops<'a> {
    g: &'a MatrixSymbol,
    proj: ThetaProjector,
}

impl Ops<'_> {
    fn t_g(&self, f: &TrigPoly) -> Result<TrigPoly> {
        Ok(self.g.apply(f)?.riesz_plus())
    }

    fn t_theta(&self, f: &TrigPoly) -> Result<TrigPoly> {
        self.proj.mul_theta(f)
    }

    fn t_theta_star(&self, f: &TrigPoly) -> Result<TrigPoly> {
        self.proj.toeplitz_adjoint(f)
    }

    fn p(&self, f: &TrigPoly) -> Result<TrigPoly> {
        self.proj.p_theta(f)
    }

    fn q(&self, f: &TrigPoly) -> Result<TrigPoly> {
        self.proj.q_theta(f)
    }

    /// `N = P_Θ T_G Q_Θ`.
    fn nil(&self, f: &TrigPoly) -> Result<TrigPoly> {
        self.p(&self.t_g(&self.q(f)?)?)
    }

    fn t_cal_g(&self, f1: &TrigPoly, f2: &TrigPoly) -> Result<Pair> {
        Ok((
            self.t_theta_star(f1)?,
            self.g.apply(f1)?.add(&self.t_theta(f2)?)?.riesz_plus(),
        ))
    }

    /// `T₂(f₁, f₂) = (f₁, f₂ + sign·P₊Θ*(f₁ − P₊ G f₁))`; `sign = −1` gives
    /// the inverse.
    fn t2(&self, f1: &TrigPoly, f2: &TrigPoly, sign: f64) -> Result<Pair> {
        let low = self.t_theta_star(&f1.sub(&self.t_g(f1)?)?)?;
        Ok((
            f1.riesz_plus(),
            f2.riesz_plus().axpy(C64::new(sign, 0.0), &low)?,
        ))
    }

    /// `T₁(a, b) = (Θ a + P_Θ b, −a + P₊Θ* b)`.
    fn t1(&self, a: &TrigPoly, b: &TrigPoly) -> Result<Pair> {
        Ok((
            self.t_theta(a)?.add(&self.p(b)?)?,
            self.t_theta_star(b)?.sub(&a.riesz_plus())?,
        ))
    }

    /// `T = diag(I − P_Θ T_G Q_Θ, P₊)`.
    fn t(&self, a: &TrigPoly, b: &TrigPoly) -> Result<Pair> {
        Ok((a.sub(&self.nil(a)?)?, b.riesz_plus()))
    }

    /// `diag(P_Θ G P_Θ + Q_Θ, P₊)`.
    fn target(&self, f1: &TrigPoly, f2: &TrigPoly) -> Result<Pair> {
        let first = self.p(&self.g.apply(&self.p(f1)?)?)?.add(&self.q(f1)?)?;
        Ok((first, f2.riesz_plus()))
    }
}

fn ops<'a>(theta: &MatrixInner, g: &'a MatrixSymbol) -> Result<Ops<'a>> {
    check_square(theta, g)?;
    Ok(Ops {
        g,
        proj: theta.projector(theta.default_truncation())?,
    })
}

fn max_hi(p: &Pair) -> i64 {
    let h = |f: &TrigPoly| if f.is_zero() { 0 } else { f.hi() };
    h(&p.0).max(h(&p.1))
}

/// Matrix of `T_𝒢` with input windows `[0, n_in]` and output windows
/// `[0, n_in + deg⁺G + deg Θ]`.
pub fn assemble_t_g(theta: &MatrixInner, g: &MatrixSymbol, n_in: usize) -> Result<BlockOperator> {
    let o = ops(theta, g)?;
    let deg_theta = theta.symbol_degree(theta.default_truncation()) as i64;
    let n_out = n_in as i64 + g.positive_degree() + deg_theta;
    let n_in = n_in as i64;
    let mut op = BlockOperator::from_map(theta.n(), [n_in, n_in], [n_out, n_out], |a, b| {
        o.t_cal_g(a, b)
    })?;
    op.tail = o.proj.tail * (1.0 + symbol_norm(g));
    Ok(op)
}

/// Kernel of `T_𝒢` as a subspace of `2n`-vector polynomials `(f₁; f₂)`.
pub fn kernel_t_g(op: &BlockOperator, tol: Option<f64>) -> Result<Subspace> {
    let ns = linalg::null_space(&op.matrix, tol)?;
    let mut vectors = Vec::with_capacity(ns.basis.ncols());
    for j in 0..ns.basis.ncols() {
        let (a, b) = op.input_pair(ns.basis.column(j).as_slice())?;
        vectors.push(TrigPoly::stack(&[a, b])?);
    }
    Ok(Subspace {
        dim: 2 * op.n,
        vectors,
        tol: ns.tol,
        coordinates: Some(ns.basis),
        singular_values: ns.singular_values,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelProjectionReport {
    pub dim_ker_t_g: usize,
    pub dim_ker_a: usize,
    pub principal_angle: f64,
    pub input_degree: usize,
    pub pass: bool,
}

/// Compares the first-coordinate projection of `ker T_𝒢` with the kernel of
/// the model-space compression.
pub fn verify_kernel_projection(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    n_in: usize,
    tol: Option<f64>,
) -> Result<KernelProjectionReport> {
    let n_in = n_in.max(kernel_window(theta, g));
    let tg = assemble_t_g(theta, g, n_in)?;
    let ker_tg = kernel_t_g(&tg, tol)?;
    let a = mtto::assemble_mtto(theta, g, theta.default_truncation())?;
    let ker_a = mtto::kernel(&a, tol)?;
    let n = theta.n();
    let firsts = ker_tg
        .vectors
        .iter()
        .map(|v| v.split_at(n).map(|(f1, _)| f1))
        .collect::<Result<Vec<_>>>()?;
    let rank_tol = 1e-10;
    let projected = Subspace::from_polys(n, &firsts, rank_tol)?;
    let angle = projected.angle_to(&ker_a)?;
    let pass =
        ker_tg.len() == ker_a.len() && projected.len() == ker_a.len() && angle < KERNEL_ANGLE_TOL;
    Ok(KernelProjectionReport {
        dim_ker_t_g: ker_tg.len(),
        dim_ker_a: ker_a.len(),
        principal_angle: angle,
        input_degree: n_in,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub input_degree: usize,
    /// Largest degree reached anywhere in the chain `T T₁ T_𝒢 T₂`.
    pub required_degree: i64,
    pub residual: f64,
    pub unipotent_inverse_residual: f64,
    pub nilpotency_residual: f64,
    pub t2_inverse_residual: f64,
    pub t1_min_singular: f64,
    pub t2_min_singular: f64,
    pub tail: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// The three factors as assembled matrices, plus the residual report.
pub struct Factorization {
    pub t: BlockOperator,
    pub t1: BlockOperator,
    pub t2: BlockOperator,
    pub report: FactorizationReport,
}

/// Operator norm of the map `probe ↦ diff(probe)` on the unit monomials of
/// `[0, hi]` (one or two blocks).
fn probe_norm(
    n: usize,
    hi: i64,
    blocks: usize,
    diff: impl Fn(&TrigPoly, &TrigPoly) -> Result<Pair>,
) -> Result<(f64, i64)> {
    let zero = TrigPoly::zero(n);
    let mut cols = Vec::new();
    let mut reach = 0i64;
    for c in 0..blocks {
        for k in 0..=hi {
            for i in 0..n {
                let u = TrigPoly::unit(n, i, k);
                let d = if c == 0 {
                    diff(&u, &zero)?
                } else {
                    diff(&zero, &u)?
                };
                reach = reach.max(max_hi(&d));
                cols.push(TrigPoly::stack(&[d.0, d.1])?);
            }
        }
    }
    let (lo, top) = linalg::common_window(&cols);
    let m = linalg::poly_matrix(&cols, 2 * n, lo, top)?;
    Ok((linalg::spectral_norm(&m), reach))
}

/// Assembles `T`, `T₁`, `T₂` and measures how well
/// `T·T₁·T_𝒢·T₂ = diag(P_Θ G P_Θ + Q_Θ, P₊)` holds on the input window
/// `[0, n_in]`. `budget` caps the degree any intermediate may reach.
pub fn factor_operators(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    n_in: usize,
    budget: Option<i64>,
) -> Result<Factorization> {
    let o = ops(theta, g)?;
    let n = theta.n();
    let hi = n_in as i64;
    let gp = g.positive_degree();
    let gm = g.negative_degree();
    let deg_theta = theta.symbol_degree(theta.default_truncation()) as i64;

    let chain = |f1: &TrigPoly, f2: &TrigPoly| -> Result<Pair> {
        let (a, b) = o.t2(f1, f2, 1.0)?;
        let (a, b) = o.t_cal_g(&a, &b)?;
        let (a, b) = o.t1(&a, &b)?;
        o.t(&a, &b)
    };
    let (residual, reach) = probe_norm(n, hi, 2, |f1, f2| {
        let lhs = o.target(f1, f2)?;
        let rhs = chain(f1, f2)?;
        Ok((lhs.0.sub(&rhs.0)?, lhs.1.sub(&rhs.1)?))
    })?;
    // The chain's largest intermediate degree bounds every window used below.
    let required = reach.max(hi + 2 * gp + 3 * deg_theta + gm);
    if let Some(b) = budget {
        if required > b {
            return Err(Error::WindowBudget {
                required,
                available: b,
            });
        }
    }

    let (unipotent_inverse_residual, _) = probe_norm(n, hi, 1, |u, _| {
        let v = u.add(&o.nil(u)?)?;
        let w = v.sub(&o.nil(&v)?)?;
        Ok((w.sub(u)?, TrigPoly::zero(n)))
    })?;
    let (nilpotency_residual, _) =
        probe_norm(n, hi, 1, |u, _| Ok((o.nil(&o.nil(u)?)?, TrigPoly::zero(n))))?;
    let (t2_inverse_residual, _) = probe_norm(n, hi, 2, |f1, f2| {
        let (a, b) = o.t2(f1, f2, -1.0)?;
        let (a, b) = o.t2(&a, &b, 1.0)?;
        Ok((a.sub(f1)?, b.sub(f2)?))
    })?;

    let t2 = BlockOperator::from_map(n, [hi, hi], [hi, hi + gp], |a, b| o.t2(a, b, 1.0))?;
    let t1 = BlockOperator::from_map(n, [hi, hi], [hi + deg_theta + gm.max(0), hi], |a, b| {
        o.t1(a, b)
    })?;
    let t_hi = hi + gp + 2 * deg_theta;
    let t = BlockOperator::from_map(n, [hi, hi], [t_hi, hi], |a, b| o.t(a, b))?;

    let t1_min_singular = t1.min_singular_value()?;
    let t2_min_singular = t2.min_singular_value()?;
    let g_norm = symbol_norm(g);
    let tail = o.proj.tail * (1.0 + g_norm) * (1.0 + g_norm) * 8.0;
    let threshold = tail + FACTOR_TOL;
    let pass = residual < threshold
        && unipotent_inverse_residual < threshold
        && nilpotency_residual < threshold
        && t2_inverse_residual < threshold
        && t1_min_singular > MIN_SINGULAR_TOL
        && t2_min_singular > MIN_SINGULAR_TOL;
    Ok(Factorization {
        t,
        t1,
        t2,
        report: FactorizationReport {
            input_degree: n_in,
            required_degree: required,
            residual,
            unipotent_inverse_residual,
            nilpotency_residual,
            t2_inverse_residual,
            t1_min_singular,
            t2_min_singular,
            tail,
            threshold,
            pass,
        },
    })
}

/// The split `v = (p₃, Θ p₁ + p₂ + P₊(G Θ p₃))` of an element of the image
/// of `T_𝒢`, with `p₂ ∈ K_Θ`.
#[derive(Clone, Debug, Serialize)]
pub struct CodomainSplit {
    pub p1: TrigPoly,
    pub p2: TrigPoly,
    pub p3: TrigPoly,
    /// `‖Θ p₁‖_q + ‖p₂‖₂ + ‖p₃‖₂` with the `L^q` norm on a grid.
    pub co_d_norm: f64,
    pub reassembly_residual: f64,
}

pub fn decompose_codomain(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    v: &(TrigPoly, TrigPoly),
    exponents: ExponentPair,
) -> Result<CodomainSplit> {
    let o = ops(theta, g)?;
    let n = theta.n();
    for part in [&v.0, &v.1] {
        if part.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "codomain component of length {}, expected {n}",
                part.dim()
            )));
        }
        if !part.is_analytic() {
            return Err(Error::NotAnalytic {
                mass: part.negative_mass(),
            });
        }
    }
    let p3 = v.0.clone();
    let coupled = o.t_g(&o.t_theta(&p3)?)?;
    let rest = v.1.sub(&coupled)?;
    let p2 = o.p(&rest)?;
    let p1 = o.t_theta_star(&rest)?;
    let theta_p1 = o.t_theta(&p1)?;
    let rebuilt = theta_p1.add(&p2)?.add(&coupled)?;
    let reassembly_residual = rebuilt.sub(&v.1)?.l2_norm();
    let grid = theta_p1.default_grid_size();
    let co_d_norm = theta_p1.lp_norm_grid(exponents.q(), grid)? + p2.l2_norm() + p3.l2_norm();
    Ok(CodomainSplit {
        p1,
        p2,
        p3,
        co_d_norm,
        reassembly_residual,
    })
}

/// Kernel and cokernel bookkeeping implied by equivalence after extension.
#[derive(Clone, Debug, Serialize)]
pub struct EaeReport {
    pub dim_ker_a: usize,
    pub dim_ker_t_g: usize,
    /// Exact consequence: kernels of operators that are equivalent after
    /// extension are isomorphic.
    pub kernel_dims_equal: bool,
    pub dim_ker_a_adjoint: usize,
    /// Left null space of the windowed `T_𝒢` matrix restricted to the image
    /// directions of the codomain split; depends on the window.
    pub dim_coker_t_g_windowed: usize,
    pub cokernel_note: &'static str,
    pub kernel_projection: KernelProjectionReport,
    pub factorization: FactorizationReport,
    pub codomain_probes: usize,
    pub max_reassembly_residual: f64,
    pub pass: bool,
}

pub const COKERNEL_NOTE: &str =
    "truncation heuristic: codomain dimensions depend on the window, so cokernel and index comparisons are reported only";

/// Runs the kernel comparison, the factorisation and `probes` random
/// codomain splits, and collects the dimension bookkeeping.
pub fn eae_consequences_report(
    theta: &MatrixInner,
    g: &MatrixSymbol,
    n_in: usize,
    probes: usize,
    seed: u64,
    exponents: ExponentPair,
) -> Result<EaeReport> {
    let n_in = n_in.max(kernel_window(theta, g));
    let kp = verify_kernel_projection(theta, g, n_in, None)?;
    let fac = factor_operators(theta, g, n_in, None)?.report;
    let a = mtto::assemble_mtto(theta, g, theta.default_truncation())?;
    let a_adj = mtto::OperatorMatrix {
        matrix: a.matrix.adjoint(),
        ..a.clone()
    };
    let dim_ker_a_adjoint = mtto::kernel(&a_adj, None)?.len();

    // Cokernel of the windowed T_𝒢: inputs on [0, n_in], outputs restricted
    // to the same window so both sides have equal size.
    let tg = assemble_t_g(theta, g, n_in)?;
    let keep: Vec<usize> = {
        let out0 = block_len(tg.n, tg.out_hi[0]);
        let w = block_len(tg.n, n_in as i64);
        (0..w).chain(out0..out0 + w).collect()
    };
    let square = tg.matrix.select_rows(keep.iter());
    let dim_coker = linalg::null_space(&square.adjoint(), None)?.basis.ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let n = theta.n();
    for _ in 0..probes {
        let mut rand_poly = |hi: i64| -> Result<TrigPoly> {
            let c: Vec<C64> = (0..(hi + 1) as usize * n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            TrigPoly::from_flat(n, 0, c)
        };
        let f1 = rand_poly(n_in as i64)?;
        let f2 = rand_poly(n_in as i64)?;
        let x: Vec<C64> = f1
            .to_column(0, n_in as i64)?
            .iter()
            .chain(f2.to_column(0, n_in as i64)?.iter())
            .copied()
            .collect();
        let y = &tg.matrix * nalgebra::DVector::from_vec(x);
        let v = tg.output_pair(y.as_slice())?;
        let split = decompose_codomain(theta, g, &v, exponents)?;
        worst = worst.max(split.reassembly_residual / (1.0 + v.1.l2_norm()));
    }
    let pass =
        kp.dim_ker_t_g == kp.dim_ker_a && kp.pass && fac.pass && worst < FACTOR_TOL + fac.tail;
    Ok(EaeReport {
        dim_ker_a: kp.dim_ker_a,
        dim_ker_t_g: kp.dim_ker_t_g,
        kernel_dims_equal: kp.dim_ker_a == kp.dim_ker_t_g,
        dim_ker_a_adjoint,
        dim_coker_t_g_windowed: dim_coker,
        cokernel_note: COKERNEL_NOTE,
        kernel_projection: kp,
        factorization: fac,
        codomain_probes: probes,
        max_reassembly_residual: worst,
        pass,
    })
}
