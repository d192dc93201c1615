//! One function per task: parse the payload, run the workflow, emit checks.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mtto_core::canonical::run_example;
use mtto_core::eae::{self, eae_consequences_report};
use mtto_core::lp_diagnostic::{lp_membership_diagnostic, Verdict, ZeroSequence};
use mtto_core::mtto;
use mtto_core::near_invariance::{analyze_kernel, KernelCase};
use mtto_core::wiener_hopf::{
    adjudicate_convention, equivalence_refinement, mimo_solve, relative_l2, wh_apply, Convention,
    ExponentialPair, GridFunction, IntervalKernel, Signal, StateSpaceSystem, MIMO_TOL,
};
use mtto_core::{ExponentPair, MatrixInner, MatrixSymbol, C64};

use crate::problem::{Config, Task};
use crate::report::{lower, upper, Bar, Check, Checks, CliError};

const MTTO_KERNEL: &[Bar] = &[
    upper("compression-residual", 1e-10),
    upper("witness-residual", 1e-8),
];

const NEAR_INVARIANCE: &[Bar] = &[
    upper("certification-residual", 1e-8),
    upper("reconstruction-residual", 1e-8),
    upper("norm-identity-residual", 1e-8),
    upper("s-star-residual", 1e-8),
];

const EAE_VERIFY: &[Bar] = &[
    upper("kernel-angle", 1e-8),
    upper("factorization-residual", 1e-9),
    upper("unipotent-inverse-residual", 1e-9),
    upper("nilpotency-residual", 1e-9),
    upper("t2-inverse-residual", 1e-9),
    lower("t1-min-singular", 1e-6),
    lower("t2-min-singular", 1e-6),
    upper("reassembly-residual", 1e-9),
];

const WH_SOLVE: &[Bar] = &[
    upper("refinement-change", 1e-4),
    upper("equivalence-discrepancy", 1e-3),
];

const MIMO_SIM: &[Bar] = &[
    upper("rk4-agreement", MIMO_TOL),
    upper("homogeneous-error", 1e-8),
];

const PAPER_EXAMPLES: &[Bar] = &[
    upper("worked-example.kernel-angle", 1e-10),
    upper("worked-example.norm-identity-residual", 1e-10),
    upper("mimo.rk4-agreement", MIMO_TOL),
    upper("mimo.homogeneous-error", 1e-8),
    upper("wiener-hopf.equivalence-discrepancy", 1e-3),
];

pub fn bars(task: Task) -> &'static [Bar] {
    match task {
        Task::MttoKernel => MTTO_KERNEL,
        Task::NearInvariance => NEAR_INVARIANCE,
        Task::EaeVerify => EAE_VERIFY,
        Task::LpDiagnose => &[],
        Task::WhSolve => WH_SOLVE,
        Task::MimoSim => MIMO_SIM,
        Task::PaperExamples => PAPER_EXAMPLES,
    }
}

fn parse<T: for<'de> Deserialize<'de>>(task: Task, payload: &Value) -> Result<T, CliError> {
    serde_json::from_value(payload.clone())
        .map_err(|e| CliError::Input(format!("{} payload: {e}", task.name())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialise")
}

pub fn run(config: &Config, payload: &Value) -> Result<(Vec<Check>, Value), CliError> {
    let mut checks = Checks::new(config);
    let result = match config.task {
        Task::MttoKernel => mtto_kernel(config, payload, &mut checks)?,
        Task::NearInvariance => near_invariance(config, payload, &mut checks)?,
        Task::EaeVerify => eae_verify(config, payload, &mut checks)?,
        Task::LpDiagnose => lp_diagnose(config, payload, &mut checks)?,
        Task::WhSolve => wh_solve(config, payload, &mut checks)?,
        Task::MimoSim => mimo_sim(config, payload, &mut checks)?,
        Task::PaperExamples => paper_examples(config, payload, &mut checks)?,
    };
    Ok((checks.list, result))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolPayload {
    theta: MatrixInner,
    symbol: MatrixSymbol,
    /// Truncation degree of the model-space expansion, or input degree of
    /// the block operator, depending on the task.
    #[serde(default)]
    degree: Option<usize>,
    #[serde(default)]
    rank_tol: Option<f64>,
}

fn mtto_kernel(config: &Config, payload: &Value, checks: &mut Checks) -> Result<Value, CliError> {
    let p: SymbolPayload = parse(config.task, payload)?;
    let n = p.degree.unwrap_or_else(|| p.theta.default_truncation());
    let a = mtto::assemble_mtto(&p.theta, &p.symbol, n)?;
    let ker = mtto::kernel(&a, p.rank_tol)?;
    let witnesses = ker
        .vectors
        .iter()
        .map(|f| mtto::lift_kernel_witness(&p.theta, &p.symbol, f, n, mtto::KERNEL_MEMBERSHIP_TOL))
        .collect::<Result<Vec<_>, _>>()?;
    let witness_residual = witnesses
        .iter()
        .map(|w| w.f2_negative_mass.max(w.analytic_residual))
        .fold(0.0, f64::max);
    let witness_tail = witnesses.iter().map(|w| w.tail).fold(0.0, f64::max);
    checks.below("compression-residual", a.compression_residual, a.tail);
    checks.below("witness-residual", witness_residual, witness_tail);
    Ok(json!({
        "truncation": a.truncation,
        "model_dim": a.domain.len(),
        "domain": a.domain.describe(),
        "tail": a.tail,
        "operator_norm": a.norm(),
        "singular_values": a.singular_values()?,
        "kernel_dim": ker.len(),
        "kernel_rank_tol": ker.tol,
        "kernel": to_value(&ker),
        "witnesses": to_value(&witnesses),
    }))
}

fn near_invariance(
    config: &Config,
    payload: &Value,
    checks: &mut Checks,
) -> Result<Value, CliError> {
    let p: SymbolPayload = parse(config.task, payload)?;
    if p.rank_tol.is_some() {
        return Err(CliError::Input(
            "near-invariance payload: rank_tol is not used by this task".into(),
        ));
    }
    let n_in = p
        .degree
        .unwrap_or_else(|| eae::kernel_window(&p.theta, &p.symbol));
    let s = analyze_kernel(&p.theta, &p.symbol, n_in)?;
    let r = &s.report;
    checks.equal("defect-bound", s.defect_bound_holds, true);
    checks.below("certification-residual", r.certification_residual, 0.0);
    checks.below("reconstruction-residual", r.reconstruction_residual, 0.0);
    checks.below("norm-identity-residual", r.norm_identity_residual, 0.0);
    checks.below("s-star-residual", r.s_star_residual, 0.0);
    checks.equal("k-dimension", r.dim_k, r.dim_m);
    Ok(json!({ "input_degree": n_in, "structure": to_value(&s) }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EaePayload {
    theta: MatrixInner,
    symbol: MatrixSymbol,
    #[serde(default)]
    degree: Option<usize>,
    /// Number of random codomain probes.
    #[serde(default = "default_probes")]
    seeds: usize,
    #[serde(default)]
    exponents: ExponentPair,
}

fn default_probes() -> usize {
    50
}

fn eae_verify(config: &Config, payload: &Value, checks: &mut Checks) -> Result<Value, CliError> {
    let p: EaePayload = parse(config.task, payload)?;
    let n_in = p.degree.unwrap_or(0);
    let r = eae_consequences_report(&p.theta, &p.symbol, n_in, p.seeds, config.seed, p.exponents)?;
    let f = &r.factorization;
    checks.below("kernel-angle", r.kernel_projection.principal_angle, 0.0);
    checks.equal("kernel-dims-equal", r.dim_ker_t_g, r.dim_ker_a);
    checks.below("factorization-residual", f.residual, f.tail);
    checks.below(
        "unipotent-inverse-residual",
        f.unipotent_inverse_residual,
        f.tail,
    );
    checks.below("nilpotency-residual", f.nilpotency_residual, f.tail);
    checks.below("t2-inverse-residual", f.t2_inverse_residual, f.tail);
    checks.above("t1-min-singular", f.t1_min_singular);
    checks.above("t2-min-singular", f.t2_min_singular);
    checks.below("reassembly-residual", r.max_reassembly_residual, 0.0);
    Ok(to_value(&r))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LpPayload {
    zeros: ZeroSequence,
    #[serde(default = "unit")]
    zeta: C64,
    p: f64,
    terms: usize,
    #[serde(default)]
    expect: Option<Verdict>,
}

fn unit() -> C64 {
    C64::new(1.0, 0.0)
}

fn lp_diagnose(config: &Config, payload: &Value, checks: &mut Checks) -> Result<Value, CliError> {
    let p: LpPayload = parse(config.task, payload)?;
    let d = lp_membership_diagnostic(&p.zeros, p.zeta, p.p, p.terms)?;
    if let Some(v) = p.expect {
        checks.equal("verdict", d.verdict, v);
    }
    Ok(to_value(&d))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EquivalencePayload {
    pairs: Vec<ExponentialPair>,
    fft_size: usize,
    #[serde(default = "two")]
    refinements: usize,
}

fn two() -> usize {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhPayload {
    kernel: IntervalKernel,
    /// One signal per row block.
    input: Vec<Signal>,
    #[serde(default = "default_panels")]
    panels: usize,
    #[serde(default)]
    equivalence: Option<EquivalencePayload>,
}

fn default_panels() -> usize {
    256
}

fn block_lengths(kernel: &IntervalKernel) -> Vec<f64> {
    match kernel.split {
        Some(_) => vec![kernel.a, kernel.b],
        None => vec![kernel.a],
    }
}

fn sample_blocks(
    kernel: &IntervalKernel,
    input: &[Signal],
    panels: usize,
) -> Result<Vec<GridFunction>, CliError> {
    let lengths = block_lengths(kernel);
    if input.len() != lengths.len() {
        return Err(CliError::Input(format!(
            "wh-solve payload: {} input signals for {} row blocks",
            input.len(),
            lengths.len()
        )));
    }
    Ok(input
        .iter()
        .zip(lengths)
        .map(|(s, l)| GridFunction::sample(s, l, panels))
        .collect::<Result<_, _>>()?)
}

/// `(series, block, nodes, values)` of one gridded output.
type Series<'a> = (&'a str, usize, &'a [f64], &'a [nalgebra::DVector<C64>]);

/// Long-format CSV: one row per (block, node, component).
fn write_csv(path: &str, blocks: &[Series]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Input(format!("writing {path}: {e}"));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["series", "block", "node", "x", "component", "re", "im"])
        .map_err(io)?;
    for (series, block, nodes, values) in blocks {
        for (j, (x, v)) in nodes.iter().zip(values.iter()).enumerate() {
            for (i, c) in v.iter().enumerate() {
                w.write_record([
                    series.to_string(),
                    block.to_string(),
                    j.to_string(),
                    x.to_string(),
                    i.to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("writing {path}: {e}")))
}

fn wh_solve(config: &Config, payload: &Value, checks: &mut Checks) -> Result<Value, CliError> {
    let p: WhPayload = parse(config.task, payload)?;
    p.kernel.validate()?;
    let panels = config.grid.unwrap_or(p.panels);
    let out = wh_apply(&p.kernel, &sample_blocks(&p.kernel, &p.input, panels)?)?;
    let fine = wh_apply(&p.kernel, &sample_blocks(&p.kernel, &p.input, 2 * panels)?)?;
    // Self-convergence: the change when the grid is halved, on shared nodes.
    let (coarse_all, fine_all): (Vec<_>, Vec<_>) = out
        .iter()
        .zip(&fine)
        .flat_map(|(c, f)| {
            c.values
                .iter()
                .enumerate()
                .map(move |(j, v)| (v.clone(), f.values[2 * j].clone()))
        })
        .unzip();
    checks.below(
        "refinement-change",
        relative_l2(&coarse_all, &fine_all),
        0.0,
    );

    let mut result = json!({ "panels": panels, "refinement_panels": 2 * panels });
    let nodes: Vec<Vec<f64>> = out.iter().map(|g| g.nodes()).collect();
    match &config.csv {
        Some(path) => {
            let blocks: Vec<_> = out
                .iter()
                .enumerate()
                .map(|(b, g)| ("output", b, nodes[b].as_slice(), g.values.as_slice()))
                .collect();
            write_csv(path, &blocks)?;
            result["output_csv"] = json!(path);
        }
        None => result["output"] = to_value(&out),
    }

    if let Some(eq) = p.equivalence {
        if p.kernel.split.is_some() || p.input.len() != 1 {
            return Err(CliError::Input(
                "wh-solve equivalence check needs a single block (a = b, no split)".into(),
            ));
        }
        let study = equivalence_refinement(
            &eq.pairs,
            &p.input[0],
            p.kernel.a,
            eq.fft_size,
            eq.refinements,
        )?;
        checks.below(
            "equivalence-discrepancy",
            study.steps[0].relative_discrepancy,
            0.0,
        );
        checks.equal("equivalence-decreasing", study.decreasing, true);
        result["equivalence"] = to_value(&study);
    }
    Ok(result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MimoPayload {
    system: StateSpaceSystem,
    input: Signal,
    #[serde(default = "default_mimo_panels")]
    panels: usize,
    /// Defaults to ten RK4 steps per panel.
    #[serde(default)]
    rk4_steps: Option<usize>,
    #[serde(default)]
    convention: Option<Convention>,
}

fn default_mimo_panels() -> usize {
    1000
}

fn mimo_sim(config: &Config, payload: &Value, checks: &mut Checks) -> Result<Value, CliError> {
    let p: MimoPayload = parse(config.task, payload)?;
    let panels = config.grid.unwrap_or(p.panels);
    let steps = match (config.grid, p.rk4_steps) {
        (None, Some(s)) => s,
        _ => 10 * panels,
    };
    let report = adjudicate_convention(&p.system, &p.input, panels, steps)?;
    // Without an explicit choice, report the convention RK4 singled out.
    let convention = config
        .convention
        .or(p.convention)
        .or_else(|| report.satisfying.first().copied())
        .unwrap_or(Convention::Causal);
    let chosen = report
        .checks
        .iter()
        .find(|c| c.convention == convention)
        .expect("both conventions are checked");
    checks.below("rk4-agreement", chosen.relative_error, 0.0);
    checks.below("homogeneous-error", report.homogeneous_error, 0.0);
    checks.equal(
        "convention-satisfies-state-equation",
        report.satisfying.contains(&convention),
        true,
    );

    let sol = mimo_solve(&p.system, &p.input, panels, convention)?;
    let mut result = json!({
        "convention": convention,
        "rk4_steps": steps,
        "adjudication": to_value(&report),
    });
    match &config.csv {
        Some(path) => {
            write_csv(
                path,
                &[("v", 0, &sol.nodes, &sol.v), ("y", 0, &sol.nodes, &sol.y)],
            )?;
            result["solution_csv"] = json!(path);
        }
        None => result["solution"] = to_value(&sol),
    }
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Showcase {
    WorkedExample,
    Mimo,
    WienerHopf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExamplesPayload {
    examples: Vec<Showcase>,
}

/// Payload used when `paper-examples` runs without a problem file.
pub fn all_examples() -> Value {
    json!({ "examples": ["worked-example", "mimo", "wiener-hopf"] })
}

fn paper_examples(
    config: &Config,
    payload: &Value,
    checks: &mut Checks,
) -> Result<Value, CliError> {
    let p: ExamplesPayload = parse(config.task, payload)?;
    if p.examples.is_empty() {
        return Err(CliError::Input(
            "paper-examples payload: examples must not be empty".into(),
        ));
    }
    let mut result = serde_json::Map::new();
    for ex in p.examples {
        match ex {
            Showcase::WorkedExample => {
                let r = run_example()?;
                checks.equal("worked-example.kernel-dim", r.kernel_dim, 2);
                checks.below("worked-example.kernel-angle", r.kernel_angle, 0.0);
                checks.equal("worked-example.defect-dim", r.defect_dim, 2);
                checks.equal("worked-example.case", r.case, KernelCase::AllVanishAtZero);
                checks.below(
                    "worked-example.norm-identity-residual",
                    r.norm_identity_residual,
                    0.0,
                );
                checks.equal(
                    "worked-example.kernel-projection",
                    r.kernel_projection.pass,
                    true,
                );
                checks.equal("worked-example.all", r.pass, true);
                result.insert("worked-example".into(), to_value(&r));
            }
            Showcase::Mimo => {
                let sys = mimo_system();
                let report = adjudicate_convention(&sys, &mimo_input(), 1000, 10_000)?;
                let causal = &report.checks[0];
                checks.below("mimo.rk4-agreement", causal.relative_error, 0.0);
                checks.below("mimo.homogeneous-error", report.homogeneous_error, 0.0);
                checks.equal(
                    "mimo.satisfying",
                    report.satisfying.clone(),
                    vec![Convention::Causal],
                );
                result.insert("mimo".into(), to_value(&report));
            }
            Showcase::WienerHopf => {
                let pair = ExponentialPair {
                    gain: C64::new(1.0, 0.0),
                    pole: C64::new(1.0, 0.0),
                };
                let bump = Signal::Bump {
                    lo: 0.1,
                    hi: 0.9,
                    amplitude: vec![C64::new(1.0, 0.0)],
                };
                let study = equivalence_refinement(&[pair], &bump, 1.0, 1 << 14, 2)?;
                checks.below(
                    "wiener-hopf.equivalence-discrepancy",
                    study.steps[0].relative_discrepancy,
                    0.0,
                );
                checks.equal("wiener-hopf.decreasing", study.decreasing, true);
                result.insert("wiener-hopf".into(), to_value(&study));
            }
        }
    }
    Ok(Value::Object(result))
}

/// `A = [[−1, 1], [0, −2]]`, `B = C = I`, `D = 0`, `v₀ = (1, 0)`, `a = 5`.
fn mimo_system() -> StateSpaceSystem {
    let c = |x: f64| C64::new(x, 0.0);
    StateSpaceSystem {
        a: nalgebra::DMatrix::from_row_slice(2, 2, &[c(-1.0), c(1.0), c(0.0), c(-2.0)]),
        b: nalgebra::DMatrix::identity(2, 2),
        c: nalgebra::DMatrix::identity(2, 2),
        d: nalgebra::DMatrix::zeros(2, 2),
        v0: nalgebra::DVector::from_vec(vec![c(1.0), c(0.0)]),
        horizon: 5.0,
    }
}

/// `u(x) = (sin x, cos x)`.
fn mimo_input() -> Signal {
    use mtto_core::wiener_hopf::Harmonic;
    let c = |x: f64| C64::new(x, 0.0);
    Signal::Harmonic {
        terms: vec![
            Harmonic {
                amplitude: vec![c(1.0), c(0.0)],
                frequency: 1.0,
                phase: 0.0,
            },
            Harmonic {
                amplitude: vec![c(0.0), c(1.0)],
                frequency: 1.0,
                phase: std::f64::consts::FRAC_PI_2,
            },
        ],
    }
}
