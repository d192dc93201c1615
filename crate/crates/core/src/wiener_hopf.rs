//! Matricial convolution operators on finite intervals,
//! `(W k)(x) = ∫₀^a G(x − t) k(t) dt`, the state-space solver built on them,
//! and a discrete-Fourier check that `W` agrees with the compression of
//! multiplication by `Ĝ` to the band of functions supported in `[0, a]`.
//!
//! Grid functions live on uniform grids `x_j = j·length/M`, `j = 0..=M`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::C64;
use crate::linalg;

/// Smallest accepted number of panels.
pub const MIN_PANELS: usize = 8;
/// Relative L² bar against the RK4 reference for a convention to count as
/// solving the state equation.
pub const MIMO_TOL: f64 = 1e-4;
/// Pass bar for the quadrature/transform discrepancy.
pub const EQUIVALENCE_TOL: f64 = 1e-3;
/// Largest accepted wrap-around mass `exp(−Re(pole)(2L − a))`.
pub const MAX_WRAP: f64 = 1e-3;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    /// `x > 0`.
    Positive,
    /// `x ≤ 0`.
    NonPositive,
}

/// Which one-sided limit to take at a possible jump at `x = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Support {
    fn contains(self, x: f64, side: Side) -> bool {
        match self {
            Support::Positive => x > 0.0 || (x == 0.0 && side == Side::Right),
            Support::NonPositive => x < 0.0 || (x == 0.0 && side == Side::Left),
        }
    }
}

/// `exp(A x) B 𝟙_S(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpPiece {
    #[serde(with = "linalg::rows")]
    pub exponent: DMatrix<C64>,
    #[serde(with = "linalg::rows")]
    pub gain: DMatrix<C64>,
    pub support: Support,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelForm {
    /// A sum of [`ExpPiece`]s; jumps at the origin are allowed.
    ExpIndicator { pieces: Vec<ExpPiece> },
    /// `Σ_j C_j x^j`.
    Polynomial {
        #[serde(with = "linalg::rows::list")]
        coeffs: Vec<DMatrix<C64>>,
    },
    /// Samples `G(x0 + j dx)`, linearly interpolated.
    Sampled {
        x0: f64,
        dx: f64,
        #[serde(with = "linalg::rows::list")]
        values: Vec<DMatrix<C64>>,
    },
}

/// An `n × n` kernel acting on `L²(0, a)^{split} ⊕ L²(0, b)^{n − split}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalKernel {
    pub n: usize,
    pub form: KernelForm,
    pub a: f64,
    pub b: f64,
    /// Rows `0..split` live on `[0, a]`, the others on `[0, b]`. Without a
    /// split all rows share `[0, a]`, which needs `a = b`.
    #[serde(default)]
    pub split: Option<usize>,
}

impl IntervalKernel {
    pub fn new(n: usize, form: KernelForm, a: f64, b: f64, split: Option<usize>) -> Result<Self> {
        let k = Self {
            n,
            form,
            a,
            b,
            split,
        };
        k.validate()?;
        Ok(k)
    }

    /// `exp(A x) B 𝟙_S(x)` on a single interval `[0, length]`.
    pub fn exponential(
        exponent: DMatrix<C64>,
        gain: DMatrix<C64>,
        support: Support,
        length: f64,
    ) -> Result<Self> {
        let n = exponent.nrows();
        Self::new(
            n,
            KernelForm::ExpIndicator {
                pieces: vec![ExpPiece {
                    exponent,
                    gain,
                    support,
                }],
            },
            length,
            length,
            None,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidInput("kernel size must be positive".into()));
        }
        for (name, len) in [("a", self.a), ("b", self.b)] {
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "interval length {name} = {len} must be positive"
                )));
            }
        }
        match self.split {
            None if self.a != self.b => {
                return Err(Error::InvalidInput(format!(
                    "a = {} and b = {} differ, so a row split is required",
                    self.a, self.b
                )));
            }
            Some(s) if s == 0 || s >= n => {
                return Err(Error::InvalidInput(format!(
                    "row split {s} must lie in 1..{n}"
                )));
            }
            _ => {}
        }
        let square = |m: &DMatrix<C64>, what: &str| -> Result<()> {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{what} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{what} has non-finite entries"
                )));
            }
            Ok(())
        };
        match &self.form {
            KernelForm::ExpIndicator { pieces } => {
                for p in pieces {
                    square(&p.exponent, "exponent")?;
                    square(&p.gain, "gain")?;
                }
            }
            KernelForm::Polynomial { coeffs } => {
                for c in coeffs {
                    square(c, "coefficient")?;
                }
            }
            KernelForm::Sampled { x0, dx, values } => {
                for v in values {
                    square(v, "sample")?;
                }
                if !(dx.is_finite() && *dx > 0.0 && x0.is_finite()) || values.len() < 2 {
                    return Err(Error::InvalidInput(
                        "sampled kernel needs dx > 0 and at least two samples".into(),
                    ));
                }
                let r = self.reach();
                let end = x0 + (values.len() - 1) as f64 * dx;
                if *x0 > -r + 1e-12 * r || end < r - 1e-12 * r {
                    return Err(Error::InvalidInput(format!(
                        "samples cover [{x0}, {end}] but the kernel is needed on [-{r}, {r}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The kernel must be evaluable on `[−reach, reach]`.
    pub fn reach(&self) -> f64 {
        self.a.max(self.b)
    }

    /// Row blocks and their interval lengths.
    pub fn blocks(&self) -> Vec<(Range<usize>, f64)> {
        match self.split {
            None => vec![(0..self.n, self.a)],
            Some(s) => vec![(0..s, self.a), (s..self.n, self.b)],
        }
    }

    /// `G(x)`, taking the indicators literally at `x = 0`.
    pub fn eval(&self, x: f64) -> Result<DMatrix<C64>> {
        self.eval_side(x, Side::Left)
    }

    fn eval_side(&self, x: f64, side: Side) -> Result<DMatrix<C64>> {
        let r = self.reach();
        if !(x.abs() <= r * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "kernel evaluated at {x}, outside [-{r}, {r}]"
            )));
        }
        let n = self.n;
        match &self.form {
            KernelForm::ExpIndicator { pieces } => {
                let mut g = DMatrix::zeros(n, n);
                for p in pieces.iter().filter(|p| p.support.contains(x, side)) {
                    g += (&p.exponent * C64::new(x, 0.0)).exp() * &p.gain;
                }
                Ok(g)
            }
            KernelForm::Polynomial { coeffs } => {
                let mut g = DMatrix::zeros(n, n);
                for c in coeffs.iter().rev() {
                    g = g * C64::new(x, 0.0) + c;
                }
                Ok(g)
            }
            KernelForm::Sampled { x0, dx, values } => {
                let pos = (x - x0) / dx;
                let last = (values.len() - 1) as f64;
                if pos < -1e-9 || pos > last + 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "kernel sample at {x} is off the sampled grid"
                    )));
                }
                let j = (pos.floor().max(0.0) as usize).min(values.len() - 2);
                let frac = (pos - j as f64).clamp(0.0, 1.0);
                Ok(&values[j] * C64::new(1.0 - frac, 0.0) + &values[j + 1] * C64::new(frac, 0.0))
            }
        }
    }
}

/// Values on the uniform grid `j·length/M`, `j = 0..=M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFunction {
    pub length: f64,
    #[serde(with = "linalg::column::list")]
    pub values: Vec<DVector<C64>>,
}

impl GridFunction {
    pub fn new(length: f64, values: Vec<DVector<C64>>) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid length {length} must be positive"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput(
                "a grid function needs at least two nodes".into(),
            ));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(
                "grid values have different lengths".into(),
            ));
        }
        Ok(Self { length, values })
    }

    /// Samples `signal` at `panels + 1` nodes on `[0, length]`.
    pub fn sample(signal: &Signal, length: f64, panels: usize) -> Result<Self> {
        let h = length / panels.max(1) as f64;
        let values = (0..=panels)
            .map(|j| signal.eval(j as f64 * h))
            .collect::<Result<_>>()?;
        Self::new(length, values)
    }

    pub fn panels(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn step(&self) -> f64 {
        self.length / self.panels() as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| self.node(j)).collect()
    }

    /// Linear interpolation; `t` must lie in `[0, length]`.
    pub fn interpolate(&self, t: f64) -> DVector<C64> {
        let pos = (t / self.step()).clamp(0.0, self.panels() as f64);
        let j = (pos.floor() as usize).min(self.panels() - 1);
        let frac = pos - j as f64;
        if frac == 0.0 {
            return self.values[j].clone();
        }
        &self.values[j] * C64::new(1.0 - frac, 0.0) + &self.values[j + 1] * C64::new(frac, 0.0)
    }
}

/// `sqrt(Σ|a_j − b_j|²) / sqrt(Σ|b_j|²)`, or the absolute distance when `b`
/// vanishes.
pub fn relative_l2(a: &[DVector<C64>], b: &[DVector<C64>]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    let base: f64 = b.iter().map(|y| y.norm_squared()).sum();
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}

fn check_input(kernel: &IntervalKernel, k: &[GridFunction]) -> Result<Vec<(Range<usize>, f64)>> {
    kernel.validate()?;
    let blocks = kernel.blocks();
    if k.len() != blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "kernel has {} row blocks but {} grid functions were given",
            blocks.len(),
            k.len()
        )));
    }
    for (f, (rows, len)) in k.iter().zip(&blocks) {
        if f.dim() != rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "block of {} rows given a {}-dimensional grid function",
                rows.len(),
                f.dim()
            )));
        }
        if (f.length - len).abs() > 1e-12 * len {
            return Err(Error::InvalidInput(format!(
                "grid function on [0, {}] for a block on [0, {len}]",
                f.length
            )));
        }
        if f.panels() < MIN_PANELS {
            return Err(Error::GridTooSmall {
                grid: f.panels(),
                width: 0,
                required: MIN_PANELS,
            });
        }
    }
    Ok(blocks)
}

/// Composite trapezoid quadrature of the operator, split at `t = x` so the
/// kernel's jump at the origin never sits inside a panel. Outputs live on
/// the input grids, one per row block.
///
/// When every block shares one grid the kernel is tabulated once on the
/// lattice of node differences; otherwise each output node is integrated
/// separately, the kernel being evaluated where needed.
pub fn wh_apply(kernel: &IntervalKernel, k: &[GridFunction]) -> Result<Vec<GridFunction>> {
    let blocks = check_input(kernel, k)?;
    let shared = k
        .iter()
        .all(|f| f.panels() == k[0].panels() && f.length == k[0].length);
    if !shared {
        return apply_pointwise(kernel, k, &blocks);
    }
    let values: Vec<DVector<C64>> = (0..k[0].values.len())
        .map(|j| {
            DVector::from_iterator(
                kernel.n,
                k.iter()
                    .flat_map(|f| f.values[j].iter().copied().collect::<Vec<_>>()),
            )
        })
        .collect();
    let out = apply_lattice(kernel, k[0].length, &values)?;
    blocks
        .iter()
        .map(|(rows, len)| {
            let vals = out
                .iter()
                .map(|v| v.rows(rows.start, rows.len()).into_owned())
                .collect();
            GridFunction::new(*len, vals)
        })
        .collect()
}

/// The same quadrature without lattice tabulation. Used for unequal
/// intervals and as a cross-check of the tabulated path.
pub fn wh_apply_pointwise(
    kernel: &IntervalKernel,
    k: &[GridFunction],
) -> Result<Vec<GridFunction>> {
    let blocks = check_input(kernel, k)?;
    apply_pointwise(kernel, k, &blocks)
}

fn apply_lattice(
    kernel: &IntervalKernel,
    length: f64,
    k: &[DVector<C64>],
) -> Result<Vec<DVector<C64>>> {
    let m = k.len() - 1;
    let h = length / m as f64;
    // lattice[d + m] = G(d h) for d ≠ 0.
    let mut lattice = Vec::with_capacity(2 * m + 1);
    for d in -(m as i64)..=(m as i64) {
        lattice.push(if d == 0 {
            DMatrix::zeros(kernel.n, kernel.n)
        } else {
            kernel.eval_side(d as f64 * h, Side::Right)?
        });
    }
    let g0_right = kernel.eval_side(0.0, Side::Right)?;
    let g0_left = kernel.eval_side(0.0, Side::Left)?;
    let g = |d: i64| &lattice[(d + m as i64) as usize];
    let half = C64::new(0.5, 0.0);

    let mut out = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let mut acc = DVector::zeros(kernel.n);
        let ji = j as i64;
        if j > 0 {
            // t ∈ [0, x_j], x − t ≥ 0.
            acc.gemv(half, g(ji), &k[0], ONE);
            for (i, ki) in k.iter().enumerate().take(j).skip(1) {
                acc.gemv(ONE, g(ji - i as i64), ki, ONE);
            }
            acc.gemv(half, &g0_right, &k[j], ONE);
        }
        if j < m {
            // t ∈ [x_j, a], x − t ≤ 0.
            acc.gemv(half, &g0_left, &k[j], ONE);
            for (i, ki) in k.iter().enumerate().take(m).skip(j + 1) {
                acc.gemv(ONE, g(ji - i as i64), ki, ONE);
            }
            acc.gemv(half, g(ji - m as i64), &k[m], ONE);
        }
        out.push(acc * C64::new(h, 0.0));
    }
    Ok(out)
}

fn apply_pointwise(
    kernel: &IntervalKernel,
    k: &[GridFunction],
    blocks: &[(Range<usize>, f64)],
) -> Result<Vec<GridFunction>> {
    let mut result = Vec::with_capacity(blocks.len());
    for (r, (rows, bound)) in blocks.iter().enumerate() {
        let mut vals = Vec::with_capacity(k[r].values.len());
        for j in 0..k[r].values.len() {
            let x = k[r].node(j);
            let mut acc = DVector::zeros(rows.len());
            for (c, (cols, _)) in blocks.iter().enumerate() {
                let input = &k[c];
                let upper = bound.min(input.length);
                let eps = 1e-12 * upper;
                let mut breaks: Vec<f64> = input
                    .nodes()
                    .into_iter()
                    .filter(|&t| t < upper - eps)
                    .collect();
                breaks.push(upper);
                if x > eps && x < upper - eps && breaks.iter().all(|&t| (t - x).abs() > eps) {
                    breaks.push(x);
                    breaks.sort_by(f64::total_cmp);
                }
                for w in breaks.windows(2) {
                    let (s0, s1) = (w[0], w[1]);
                    let side = if s1 <= x + eps {
                        Side::Right
                    } else {
                        Side::Left
                    };
                    let mut term = DVector::zeros(rows.len());
                    for s in [s0, s1] {
                        let g = kernel.eval_side(x - s, side)?;
                        let block = g.view((rows.start, cols.start), (rows.len(), cols.len()));
                        term.gemv(ONE, &block, &input.interpolate(s), ONE);
                    }
                    acc.axpy(C64::new(0.5 * (s1 - s0), 0.0), &term, ONE);
                }
            }
            vals.push(acc);
        }
        result.push(GridFunction::new(*bound, vals)?);
    }
    Ok(result)
}

/// `c sin(ω x + φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: Vec<C64>,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Vector-valued inputs given in closed form or by samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: Vec<C64>,
    },
    Harmonic {
        terms: Vec<Harmonic>,
    },
    /// `c·exp(1 − 1/(1 − s²))` with `s` the position rescaled from
    /// `(lo, hi)` to `(−1, 1)`; zero outside. Peak value `c`.
    Bump {
        lo: f64,
        hi: f64,
        amplitude: Vec<C64>,
    },
    /// Uniform samples on `[0, length]`, linearly interpolated.
    Samples {
        length: f64,
        values: Vec<Vec<C64>>,
    },
}

impl Signal {
    pub fn zero(dim: usize) -> Self {
        Signal::Constant {
            value: vec![ZERO; dim],
        }
    }

    pub fn dim(&self) -> Result<usize> {
        let dim = match self {
            Signal::Constant { value } => value.len(),
            Signal::Harmonic { terms } => {
                let d = terms.first().map_or(0, |t| t.amplitude.len());
                if terms.iter().any(|t| {
                    t.amplitude.len() != d || !t.frequency.is_finite() || !t.phase.is_finite()
                }) {
                    return Err(Error::InvalidInput(
                        "harmonic terms must share one finite shape".into(),
                    ));
                }
                d
            }
            Signal::Bump { lo, hi, amplitude } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidInput(format!(
                        "bump support ({lo}, {hi}) is empty"
                    )));
                }
                amplitude.len()
            }
            Signal::Samples { length, values } => {
                if !(length.is_finite() && *length > 0.0) || values.len() < 2 {
                    return Err(Error::InvalidInput(
                        "samples need a positive length and two nodes".into(),
                    ));
                }
                let d = values[0].len();
                if values.iter().any(|v| v.len() != d) {
                    return Err(Error::DimensionMismatch(
                        "samples have different lengths".into(),
                    ));
                }
                d
            }
        };
        if dim == 0 {
            return Err(Error::InvalidInput("signal has no components".into()));
        }
        Ok(dim)
    }

    pub fn eval(&self, x: f64) -> Result<DVector<C64>> {
        Ok(match self {
            Signal::Constant { value } => DVector::from_column_slice(value),
            Signal::Harmonic { terms } => {
                let mut v = DVector::zeros(self.dim()?);
                for t in terms {
                    let s = (t.frequency * x + t.phase).sin();
                    v += DVector::from_column_slice(&t.amplitude) * C64::new(s, 0.0);
                }
                v
            }
            Signal::Bump { lo, hi, amplitude } => {
                let s = (2.0 * x - lo - hi) / (hi - lo);
                let w = if s.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                };
                DVector::from_column_slice(amplitude) * C64::new(w, 0.0)
            }
            Signal::Samples { length, values } => {
                if !(-1e-12 * length..=length * (1.0 + 1e-12)).contains(&x) {
                    return Err(Error::InvalidInput(format!(
                        "signal sampled on [0, {length}] evaluated at {x}"
                    )));
                }
                let rows: Vec<DVector<C64>> = values
                    .iter()
                    .map(|v| DVector::from_column_slice(v))
                    .collect();
                GridFunction::new(*length, rows)?.interpolate(x)
            }
        })
    }
}

/// `v' = A v + B u`, `v(0) = v0`, `y = C v + D u` on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpaceSystem {
    #[serde(with = "linalg::rows")]
    pub a: DMatrix<C64>,
    #[serde(with = "linalg::rows")]
    pub b: DMatrix<C64>,
    #[serde(with = "linalg::rows")]
    pub c: DMatrix<C64>,
    #[serde(with = "linalg::rows")]
    pub d: DMatrix<C64>,
    #[serde(with = "linalg::column")]
    pub v0: DVector<C64>,
    pub horizon: f64,
}

/// Where the indicator in `G'(x) = exp(A x) 𝟙(x) B` is supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `x > 0`: variation of parameters, `∫₀^x exp(A(x − t)) B u(t) dt`.
    Causal,
    /// `x ≤ 0` as written: `∫_x^a exp(A(x − t)) B u(t) dt`.
    PaperLiteral,
}

impl Convention {
    pub fn support(self) -> Support {
        match self {
            Convention::Causal => Support::Positive,
            Convention::PaperLiteral => Support::NonPositive,
        }
    }
}

impl StateSpaceSystem {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidInput(
                "state dimension must be positive".into(),
            ));
        }
        for (name, m) in [
            ("A", &self.a),
            ("B", &self.b),
            ("C", &self.c),
            ("D", &self.d),
        ] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} has non-finite entries"
                )));
            }
        }
        if self.v0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "v0 has {} entries, expected {n}",
                self.v0.len()
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `exp(A x) 𝟙(x) B` under the given convention.
    pub fn kernel(&self, convention: Convention) -> Result<IntervalKernel> {
        IntervalKernel::exponential(
            self.a.clone(),
            self.b.clone(),
            convention.support(),
            self.horizon,
        )
    }

    fn check_input(&self, u: &Signal) -> Result<()> {
        self.validate()?;
        let du = u.dim()?;
        if du != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "input has {du} components, expected {}",
                self.n()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MimoSolution {
    pub convention: Convention,
    pub nodes: Vec<f64>,
    #[serde(with = "linalg::column::list")]
    pub v: Vec<DVector<C64>>,
    #[serde(with = "linalg::column::list")]
    pub y: Vec<DVector<C64>>,
}

/// `v = W_{G'} u + exp(A x) v0` and `y = C v + D u` on `panels + 1` nodes.
pub fn mimo_solve(
    sys: &StateSpaceSystem,
    u: &Signal,
    panels: usize,
    convention: Convention,
) -> Result<MimoSolution> {
    sys.check_input(u)?;
    let ug = GridFunction::sample(u, sys.horizon, panels)?;
    let w = wh_apply(&sys.kernel(convention)?, std::slice::from_ref(&ug))?.remove(0);
    let nodes = ug.nodes();
    let v: Vec<DVector<C64>> = nodes
        .iter()
        .zip(&w.values)
        .map(|(&x, wx)| wx + (&sys.a * C64::new(x, 0.0)).exp() * &sys.v0)
        .collect();
    let y = v
        .iter()
        .zip(&ug.values)
        .map(|(vx, ux)| &sys.c * vx + &sys.d * ux)
        .collect();
    Ok(MimoSolution {
        convention,
        nodes,
        v,
        y,
    })
}

/// Classical fourth-order Runge–Kutta on `v' = A v + B u`, `steps + 1` nodes.
pub fn ode_oracle(sys: &StateSpaceSystem, u: &Signal, steps: usize) -> Result<GridFunction> {
    sys.check_input(u)?;
    if steps == 0 {
        return Err(Error::InvalidInput("RK4 needs at least one step".into()));
    }
    let h = sys.horizon / steps as f64;
    let f =
        |x: f64, v: &DVector<C64>| -> Result<DVector<C64>> { Ok(&sys.a * v + &sys.b * u.eval(x)?) };
    let mut v = sys.v0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(v.clone());
    let hc = |s: f64| C64::new(s * h, 0.0);
    for i in 0..steps {
        let x = i as f64 * h;
        let k1 = f(x, &v)?;
        let k2 = f(x + 0.5 * h, &(&v + &k1 * hc(0.5)))?;
        let k3 = f(x + 0.5 * h, &(&v + &k2 * hc(0.5)))?;
        let k4 = f(x + h, &(&v + &k3 * hc(1.0)))?;
        v += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * hc(1.0 / 6.0);
        out.push(v.clone());
    }
    GridFunction::new(sys.horizon, out)
}

/// Relative L² size of `(v_{j+1} − v_{j−1})/2h − A v_j − B u(x_j)` over the
/// interior nodes, against `A v_j + B u(x_j)`.
pub fn state_residual(sys: &StateSpaceSystem, u: &Signal, sol: &MimoSolution) -> Result<f64> {
    let m = sol.v.len() - 1;
    let h = sys.horizon / m as f64;
    let mut fd = Vec::with_capacity(m.saturating_sub(1));
    let mut rhs = Vec::with_capacity(m.saturating_sub(1));
    for j in 1..m {
        fd.push((&sol.v[j + 1] - &sol.v[j - 1]) * C64::new(0.5 / h, 0.0));
        rhs.push(&sys.a * &sol.v[j] + &sys.b * u.eval(sol.nodes[j])?);
    }
    Ok(relative_l2(&fd, &rhs))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConventionCheck {
    pub convention: Convention,
    /// Relative L² error against RK4 at the solver nodes.
    pub relative_error: f64,
    pub state_residual: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConventionReport {
    pub panels: usize,
    pub rk4_steps: usize,
    pub checks: Vec<ConventionCheck>,
    /// Conventions whose solution matches RK4 within [`MIMO_TOL`].
    pub satisfying: Vec<Convention>,
    /// `u = 0`: relative L² gap between `exp(A x) v0` and RK4.
    pub homogeneous_error: f64,
}

/// Solves under both indicator conventions and lets RK4 decide which one
/// solves the state equation. `rk4_steps` must be a multiple of `panels`.
pub fn adjudicate_convention(
    sys: &StateSpaceSystem,
    u: &Signal,
    panels: usize,
    rk4_steps: usize,
) -> Result<ConventionReport> {
    sys.check_input(u)?;
    if panels == 0 || !rk4_steps.is_multiple_of(panels) {
        return Err(Error::InvalidInput(format!(
            "RK4 steps {rk4_steps} must be a multiple of the grid size {panels}"
        )));
    }
    let stride = rk4_steps / panels;
    let at_nodes =
        |g: GridFunction| -> Vec<DVector<C64>> { g.values.into_iter().step_by(stride).collect() };
    let reference = at_nodes(ode_oracle(sys, u, rk4_steps)?);
    let mut checks = Vec::with_capacity(2);
    for convention in [Convention::Causal, Convention::PaperLiteral] {
        let sol = mimo_solve(sys, u, panels, convention)?;
        let relative_error = relative_l2(&sol.v, &reference);
        checks.push(ConventionCheck {
            convention,
            relative_error,
            state_residual: state_residual(sys, u, &sol)?,
            consistent: relative_error < MIMO_TOL,
        });
    }
    let zero = Signal::zero(sys.n());
    let homogeneous = mimo_solve(sys, &zero, panels, Convention::Causal)?;
    let homogeneous_error = relative_l2(
        &homogeneous.v,
        &at_nodes(ode_oracle(sys, &zero, rk4_steps)?),
    );
    Ok(ConventionReport {
        panels,
        rk4_steps,
        satisfying: checks
            .iter()
            .filter(|c| c.consistent)
            .map(|c| c.convention)
            .collect(),
        checks,
        homogeneous_error,
    })
}

/// `H(w) = gain/(pole + i w)`, the transform `∫ G(x) e^{−iwx} dx` of
/// `G(x) = gain·exp(−pole x) 𝟙_{x>0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialPair {
    pub gain: C64,
    pub pole: C64,
}

impl ExponentialPair {
    pub fn symbol(&self, w: f64) -> C64 {
        self.gain / (self.pole + C64::new(0.0, w))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub a: f64,
    /// Half of the period `2L` of the transform grid.
    pub half_period: f64,
    pub fft_size: usize,
    pub quadrature_panels: usize,
    pub wrap_bound: f64,
    pub quadrature_norm: f64,
    pub transform_norm: f64,
    pub relative_discrepancy: f64,
}

/// Compares `W_G k` computed by quadrature with the transform pipeline:
/// sample `k` on a period `[0, 2L)` of `fft_size` points, transform,
/// multiply by samples of `H` (one diagonal entry per component), transform
/// back and restrict to `[0, a]`. Restriction to `[0, a]` is the band
/// projection for the inner function `e^{iaw}`. The quadrature uses the
/// transform grid's spacing, so `fft_size·a/(2L)` must be an integer.
pub fn unitary_equivalence_check(
    symbol: &[ExponentialPair],
    k: &Signal,
    a: f64,
    fft_size: usize,
    half_period: f64,
) -> Result<EquivalenceReport> {
    let n = symbol.len();
    if n == 0 {
        return Err(Error::InvalidInput("symbol has no entries".into()));
    }
    if k.dim()? != n {
        return Err(Error::DimensionMismatch(format!(
            "input has {} components, symbol {n}",
            k.dim()?
        )));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interval length {a} must be positive"
        )));
    }
    if !(half_period >= 8.0 * a * (1.0 - 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "half period {half_period} must be at least 8a = {}",
            8.0 * a
        )));
    }
    let mut wrap_bound: f64 = 0.0;
    for p in symbol {
        if !(p.pole.re > 0.0) || !p.gain.is_finite() || !p.pole.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pole {} gives no decay; only decaying closed-form pairs are supported",
                p.pole
            )));
        }
        wrap_bound = wrap_bound.max((-p.pole.re * (2.0 * half_period - a)).exp());
    }
    if wrap_bound > MAX_WRAP {
        return Err(Error::InvalidInput(format!(
            "kernel decays too slowly: wrap-around mass {wrap_bound:.3e} exceeds {MAX_WRAP}"
        )));
    }
    let dx = 2.0 * half_period / fft_size as f64;
    let ratio = a / dx;
    let panels = ratio.round() as usize;
    if (ratio - panels as f64).abs() > 1e-9 * ratio || panels < MIN_PANELS {
        return Err(Error::GridTooSmall {
            grid: fft_size,
            width: panels,
            required: MIN_PANELS,
        });
    }

    let kernel = IntervalKernel::exponential(
        DMatrix::from_diagonal(&DVector::from_iterator(n, symbol.iter().map(|p| -p.pole))),
        DMatrix::from_diagonal(&DVector::from_iterator(n, symbol.iter().map(|p| p.gain))),
        Support::Positive,
        a,
    )?;
    let kg = GridFunction::sample(k, a, panels)?;
    let quad = wh_apply(&kernel, std::slice::from_ref(&kg))?
        .remove(0)
        .values;

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(fft_size);
    let inverse = planner.plan_fft_inverse(fft_size);
    let mut transformed = vec![DVector::zeros(n); panels + 1];
    for (i, pair) in symbol.iter().enumerate() {
        let mut buf = vec![ZERO; fft_size];
        for (j, v) in kg.values.iter().enumerate() {
            buf[j] = v[i];
        }
        forward.process(&mut buf);
        for (m, c) in buf.iter_mut().enumerate() {
            let signed = if m <= fft_size / 2 {
                m as f64
            } else {
                m as f64 - fft_size as f64
            };
            *c *= pair.symbol(std::f64::consts::PI * signed / half_period);
        }
        inverse.process(&mut buf);
        for (j, t) in transformed.iter_mut().enumerate() {
            t[i] = buf[j] / fft_size as f64;
        }
    }

    let norm = |vs: &[DVector<C64>]| vs.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    Ok(EquivalenceReport {
        a,
        half_period,
        fft_size,
        quadrature_panels: panels,
        wrap_bound,
        quadrature_norm: norm(&quad),
        transform_norm: norm(&transformed),
        relative_discrepancy: relative_l2(&transformed, &quad),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementStudy {
    pub steps: Vec<EquivalenceReport>,
    pub decreasing: bool,
    pub pass: bool,
}

/// Runs the check at `(M, L = 8a)` and `refinements` further levels with
/// `M ← 4M`, `L ← 2L`, which halves the grid spacing while doubling the
/// period.
pub fn equivalence_refinement(
    symbol: &[ExponentialPair],
    k: &Signal,
    a: f64,
    fft_size: usize,
    refinements: usize,
) -> Result<RefinementStudy> {
    let steps = (0..=refinements)
        .map(|r| {
            unitary_equivalence_check(symbol, k, a, fft_size << (2 * r), 8.0 * a * (1 << r) as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = steps
        .windows(2)
        .all(|w| w[1].relative_discrepancy < w[0].relative_discrepancy);
    let pass = steps[0].relative_discrepancy < EQUIVALENCE_TOL && decreasing;
    Ok(RefinementStudy {
        steps,
        decreasing,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_kernel_integrates_constant() {
        let kernel = IntervalKernel::new(
            2,
            KernelForm::Polynomial {
                coeffs: vec![DMatrix::identity(2, 2)],
            },
            1.5,
            1.5,
            None,
        )
        .unwrap();
        let k = GridFunction::sample(
            &Signal::Constant {
                value: vec![c(2.0), C64::new(0.0, -1.0)],
            },
            1.5,
            10,
        )
        .unwrap();
        let out = wh_apply(&kernel, &[k]).unwrap().remove(0);
        for v in &out.values {
            assert!((v[0] - c(3.0)).norm() < 1e-13);
            assert!((v[1] - C64::new(0.0, -1.5)).norm() < 1e-13);
        }
    }

    #[test]
    fn linear_kernel_is_exact() {
        let a = 2.0;
        let kernel = IntervalKernel::new(
            1,
            KernelForm::Polynomial {
                coeffs: vec![DMatrix::zeros(1, 1), DMatrix::identity(1, 1)],
            },
            a,
            a,
            None,
        )
        .unwrap();
        let k = GridFunction::sample(
            &Signal::Constant {
                value: vec![c(1.0)],
            },
            a,
            16,
        )
        .unwrap();
        let out = wh_apply(&kernel, &[k]).unwrap().remove(0);
        for (j, v) in out.values.iter().enumerate() {
            let x = out.node(j);
            assert!((v[0] - c(a * x - a * a / 2.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_dynamics_integrate_input() {
        let sys = StateSpaceSystem {
            a: DMatrix::zeros(2, 2),
            b: DMatrix::identity(2, 2),
            c: DMatrix::identity(2, 2),
            d: DMatrix::zeros(2, 2),
            v0: DVector::zeros(2),
            horizon: 3.0,
        };
        let u = Signal::Constant {
            value: vec![c(1.0), c(-2.0)],
        };
        let sol = mimo_solve(&sys, &u, 12, Convention::Causal).unwrap();
        for (x, v) in sol.nodes.iter().zip(&sol.v) {
            assert!((v[0] - c(*x)).norm() < 1e-13);
            assert!((v[1] - c(-2.0 * x)).norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_kernels() {
        let poly = KernelForm::Polynomial {
            coeffs: vec![DMatrix::identity(2, 2)],
        };
        assert!(IntervalKernel::new(2, poly.clone(), 1.0, 2.0, None).is_err());
        assert!(IntervalKernel::new(2, poly.clone(), 1.0, 2.0, Some(2)).is_err());
        assert!(IntervalKernel::new(3, poly, 1.0, 1.0, None).is_err());
        let sampled = IntervalKernel::new(
            1,
            KernelForm::Sampled {
                x0: -0.5,
                dx: 0.5,
                values: vec![DMatrix::identity(1, 1); 3],
            },
            1.0,
            1.0,
            None,
        );
        assert!(sampled.is_err());
    }

    #[test]
    fn slow_decay_is_rejected() {
        let pair = ExponentialPair {
            gain: c(1.0),
            pole: c(0.1),
        };
        let k = Signal::Bump {
            lo: 0.1,
            hi: 0.9,
            amplitude: vec![c(1.0)],
        };
        assert!(unitary_equivalence_check(&[pair], &k, 1.0, 1 << 10, 8.0).is_err());
        let flat = ExponentialPair {
            gain: c(1.0),
            pole: c(0.0),
        };
        assert!(unitary_equivalence_check(&[flat], &k, 1.0, 1 << 10, 8.0).is_err());
    }
}
