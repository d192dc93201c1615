//! Partial-sum diagnostics for `Σ_k (1 − |a_k|²) / |ζ − a_k|^p`, whose
//! finiteness decides whether the reproducing kernel at the boundary point
//! `ζ` of the Blaschke product with zeros `(a_k)` lies in `L^p`.
//!
//! Convergence is only claimed when a tail estimate is small; divergence is
//! never claimed, only a sustained growth trend.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fourier::C64;

/// Relative tail bar for a "converging" verdict.
pub const CONVERGING_TAIL: f64 = 1e-6;
/// Per-doubling growth of the partial sums required for a divergence trend.
pub const DIVERGING_RATIO: f64 = 1.5;
/// Number of consecutive doublings that must show that growth.
pub const DOUBLINGS: usize = 3;

/// Zero sequences, indexed from `k = 1`. Zeros are generated in polar form
/// `a_k = (1 − ε_k) e^{iδ_k}` so that `1 − |a_k|` keeps full precision near
/// the circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ZeroSequence {
    Finite {
        zeros: Vec<C64>,
    },
    /// `ε_k = k⁻²`, `δ_k = log k / √k`.
    LogSpiral,
    /// `ε_k = r^k`, `δ_k = 0`, i.e. `a_k = 1 − r^k`.
    Geometric {
        ratio: f64,
    },
}

impl ZeroSequence {
    pub fn validate(&self) -> Result<()> {
        match self {
            ZeroSequence::Finite { zeros } => {
                if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
                    return Err(Error::InvalidInput(format!(
                        "zero {a} does not lie in the open unit disc"
                    )));
                }
            }
            ZeroSequence::LogSpiral => {}
            ZeroSequence::Geometric { ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "geometric ratio {ratio} must lie in (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of zeros, `None` for infinite sequences.
    pub fn len(&self) -> Option<usize> {
        match self {
            ZeroSequence::Finite { zeros } => Some(zeros.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// `(ε_k, δ_k)` for `k ≥ 1`, or `None` past the end of a finite list.
    pub fn polar(&self, k: usize) -> Option<(f64, f64)> {
        match self {
            ZeroSequence::Finite { zeros } => zeros.get(k - 1).map(|a| (1.0 - a.norm(), a.arg())),
            ZeroSequence::LogSpiral => {
                let kf = k as f64;
                Some((1.0 / (kf * kf), kf.ln() / kf.sqrt()))
            }
            ZeroSequence::Geometric { ratio } => Some((ratio.powi(k as i32), 0.0)),
        }
    }

    /// The first `count` zeros as complex numbers.
    pub fn zeros(&self, count: usize) -> Vec<C64> {
        (1..=count)
            .map_while(|k| self.polar(k))
            .map(|(eps, arg)| C64::from_polar(1.0 - eps, arg))
            .collect()
    }

    /// `(1 − |a_k|²) / |ζ − a_k|^p` with `ζ = e^{iφ}`.
    fn term(&self, k: usize, phi: f64, p: f64) -> f64 {
        match self.polar(k) {
            None => 0.0,
            Some((eps, arg)) => {
                let s = ((arg - phi) / 2.0).sin();
                let dist2 = eps * eps + 4.0 * (1.0 - eps) * s * s;
                eps * (2.0 - eps) / dist2.powf(p / 2.0)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TailEstimate {
    Bound(f64),
    UnboundedTrend,
}

impl Serialize for TailEstimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TailEstimate::Bound(x) => s.serialize_f64(*x),
            TailEstimate::UnboundedTrend => s.serialize_str("unbounded-trend"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converging,
    DivergingTrend,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PartialSum {
    pub terms: usize,
    pub sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LpDiagnostic {
    pub p: f64,
    pub zeta: C64,
    pub terms: usize,
    /// `S_K, S_{2K}, …, S_{2^D K}`.
    pub partial_sums: Vec<PartialSum>,
    pub growth_ratios: Vec<f64>,
    /// Power-law exponent of the terms fitted on the last two dyadic blocks.
    pub local_exponent: Option<f64>,
    pub tail_estimate: TailEstimate,
    pub verdict: Verdict,
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Runs the diagnostic with `K = terms`.
///
/// The tail past `K` is estimated by integral comparison against a power law:
/// with dyadic block sums `B₁ = Σ_{K/4<k≤K/2}` and `B₂ = Σ_{K/2<k≤K}`, terms
/// behaving like `k^{−α}` give `B₂/B₁ = 2^{1−α}` and a tail of
/// `B₂ ρ/(1 − ρ)`, `ρ = B₂/B₁`. A ratio `ρ ≥ 1` (`α ≤ 1`) is reported as an
/// unbounded trend. For finite sequences the remainder is summed exactly.
pub fn lp_membership_diagnostic(
    seq: &ZeroSequence,
    zeta: C64,
    p: f64,
    terms: usize,
) -> Result<LpDiagnostic> {
    if terms < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 terms, got {terms}"
        )));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidInput(format!(
            "exponent {p} must be positive and finite"
        )));
    }
    if (zeta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "point {zeta} is not on the unit circle"
        )));
    }
    seq.validate()?;
    let phi = zeta.arg();
    let top = terms << DOUBLINGS;

    let mut sum = Sum::default();
    let mut b1 = Sum::default();
    let mut b2 = Sum::default();
    let mut partial_sums = Vec::with_capacity(DOUBLINGS + 1);
    let mut checkpoint = terms;
    for k in 1..=top {
        let t = seq.term(k, phi, p);
        sum.add(t);
        if k > terms / 4 && k <= terms / 2 {
            b1.add(t);
        } else if k > terms / 2 && k <= terms {
            b2.add(t);
        }
        if k == checkpoint {
            partial_sums.push(PartialSum {
                terms: k,
                sum: sum.value(),
            });
            checkpoint *= 2;
        }
    }
    let s_k = partial_sums[0].sum;
    let growth_ratios: Vec<f64> = partial_sums
        .windows(2)
        .map(|w| w[1].sum / w[0].sum)
        .collect();

    let (local_exponent, tail_estimate) = match seq.len() {
        Some(len) => {
            let rest: f64 = (terms + 1..=len.max(terms))
                .map(|k| seq.term(k, phi, p))
                .sum();
            (None, TailEstimate::Bound(rest))
        }
        None => {
            let (b1, b2) = (b1.value(), b2.value());
            if b2 == 0.0 {
                (None, TailEstimate::Bound(0.0))
            } else {
                let rho = b2 / b1;
                let alpha = 1.0 - rho.log2();
                if rho >= 1.0 {
                    (Some(alpha), TailEstimate::UnboundedTrend)
                } else {
                    (Some(alpha), TailEstimate::Bound(b2 * rho / (1.0 - rho)))
                }
            }
        }
    };

    let converging = matches!(tail_estimate, TailEstimate::Bound(t) if t < CONVERGING_TAIL * s_k);
    let diverging =
        growth_ratios.len() == DOUBLINGS && growth_ratios.iter().all(|&r| r > DIVERGING_RATIO);
    let verdict = if converging {
        Verdict::Converging
    } else if diverging {
        Verdict::DivergingTrend
    } else {
        Verdict::Inconclusive
    };
    Ok(LpDiagnostic {
        p,
        zeta,
        terms,
        partial_sums,
        growth_ratios,
        local_exponent,
        tail_estimate,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_sequence_converges() {
        let seq = ZeroSequence::Finite {
            zeros: vec![C64::new(0.5, 0.0), C64::new(0.0, 0.9)],
        };
        let d = lp_membership_diagnostic(&seq, C64::new(1.0, 0.0), 3.0, 10).unwrap();
        assert_eq!(d.verdict, Verdict::Converging);
        assert_eq!(d.tail_estimate, TailEstimate::Bound(0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let one = C64::new(1.0, 0.0);
        let bad = ZeroSequence::Finite { zeros: vec![one] };
        assert!(lp_membership_diagnostic(&bad, one, 2.0, 10).is_err());
        assert!(lp_membership_diagnostic(&ZeroSequence::LogSpiral, one, 2.0, 5).is_err());
        assert!(
            lp_membership_diagnostic(&ZeroSequence::LogSpiral, C64::new(0.5, 0.0), 2.0, 10)
                .is_err()
        );
    }

    #[test]
    fn growing_terms_trend_unbounded() {
        // ε_k = r^k with ζ = 1 makes the terms grow, so the sums blow up.
        let seq = ZeroSequence::Geometric { ratio: 0.9 };
        let d = lp_membership_diagnostic(&seq, C64::new(1.0, 0.0), 3.0, 16).unwrap();
        assert_eq!(d.verdict, Verdict::DivergingTrend);
    }
}
