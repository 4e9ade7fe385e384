//! Exact and statistical verifiers for indistinguishability, distances and
//! privacy amplification.

mod amplification;
mod binomial;
mod empirical;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use amplification::{
    dependent_bound, embedding_privacy_survey, independent_bound, AmplificationReport, BoundCheck, SurveyPoint,
};
pub use binomial::{binomial_claim_verify, binomial_pmf, rr_message_count_distributions, BinomialClaimReport};
pub use empirical::{attack_indistinguishability_test, EmpiricalSetup, VerdictFailures};

use crate::channel::{compose, kov_decompose, max_row_tv, measure_privacy, rr_channel, Channel, RrOutput, SubsetH};
use crate::error::{Error, Result};

/// A distribution on finitely many labelled outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDist {
    pub labels: Vec<f64>,
    pub probs: Vec<f64>,
}

impl FiniteDist {
    pub fn new(labels: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                actual: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        Ok(FiniteDist { labels, probs })
    }

    /// Outcomes labelled `0, 1, …, len - 1`.
    pub fn indexed(probs: Vec<f64>) -> Result<Self> {
        Self::new((0..probs.len()).map(|i| i as f64).collect(), probs)
    }

    fn check_support(&self, other: &FiniteDist) -> Result<()> {
        if self.labels != other.labels {
            return Err(Error::SupportMismatch {
                left: self.labels.len(),
                right: other.labels.len(),
            });
        }
        Ok(())
    }
}

/// The event achieving the reported margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Witness {
    /// Explicit outcome labels.
    Outcomes {
        labels: Vec<f64>,
    },
    /// `{Z >= threshold}` or `{Z <= threshold}` for a scalar output `Z`.
    Threshold {
        threshold: f64,
        upper: bool,
    },
    Empty,
}

/// `sup_Y P(Y) - c·Q(Y) - slack` together with the set attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistinguishabilityReport {
    pub factor: f64,
    pub slack: f64,
    pub margin: f64,
    pub witness: Witness,
    pub witness_size: usize,
    /// `P(witness)` and `Q(witness)`.
    pub p_mass: f64,
    pub q_mass: f64,
    /// Half-width of the 95% band on an empirical margin.
    pub confidence: Option<f64>,
    pub trials: Option<usize>,
}

impl IndistinguishabilityReport {
    /// `margin <= 0`, or `margin <= multiplier · confidence` for empirical reports.
    pub fn holds(&self, multiplier: f64) -> bool {
        self.margin <= multiplier * self.confidence.unwrap_or(0.0)
    }
}

/// Exact `sup_Y P(Y) - c·Q(Y) - slack`, attained by `{y : p(y) > c·q(y)}`.
pub fn indistinguishability_margin(
    p: &FiniteDist,
    q: &FiniteDist,
    c: f64,
    slack: f64,
) -> Result<IndistinguishabilityReport> {
    p.check_support(q)?;
    let mut gain = Neumaier::default();
    let (mut pm, mut qm) = (Neumaier::default(), Neumaier::default());
    let mut labels = Vec::new();
    for ((l, a), b) in p.labels.iter().zip(&p.probs).zip(&q.probs) {
        if *a > c * b {
            gain.add(*a);
            gain.add(-c * b);
            pm.add(*a);
            qm.add(*b);
            labels.push(*l);
        }
    }
    let witness_size = labels.len();
    Ok(IndistinguishabilityReport {
        factor: c,
        slack,
        margin: gain.sum() - slack,
        witness: if labels.is_empty() {
            Witness::Empty
        } else {
            Witness::Outcomes { labels }
        },
        witness_size,
        p_mass: pm.sum(),
        q_mass: qm.sum(),
        confidence: None,
        trials: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    Linf,
    Tv,
}

pub fn distribution_distance(p: &FiniteDist, q: &FiniteDist, norm: Norm) -> Result<f64> {
    p.check_support(q)?;
    Ok(vector_norm(p.probs.iter().zip(&q.probs).map(|(a, b)| a - b), norm))
}

pub(crate) fn vector_norm(diff: impl Iterator<Item = f64>, norm: Norm) -> f64 {
    match norm {
        Norm::L1 => diff.map(f64::abs).sum(),
        Norm::Tv => 0.5 * diff.map(f64::abs).sum::<f64>(),
        Norm::L2 => diff.map(|x| x * x).sum::<f64>().sqrt(),
        Norm::Linf => diff.fold(0.0, |a, x| a.max(x.abs())),
    }
}

/// Output indices `y` with `|ln(Pr[R(U_H)=y] / Pr[R(U)=y])| > v`.
pub fn leaky_message_set(r: &Channel, h: &SubsetH, v: f64) -> Result<Vec<usize>> {
    if r.input_size() != h.universe_size() {
        return Err(Error::DimensionMismatch {
            expected: h.universe_size(),
            actual: r.input_size(),
        });
    }
    let members = h.members();
    let mut leaky = Vec::new();
    for y in 0..r.output_size() {
        let on_h = members.iter().map(|x| r.row(*x)[y]).sum::<f64>() / members.len() as f64;
        let on_u = (0..r.input_size()).map(|x| r.row(x)[y]).sum::<f64>() / r.input_size() as f64;
        let is_leaky = match (on_h > 0.0, on_u > 0.0) {
            (false, false) => false,
            (true, false) | (false, true) => true,
            // Log ratios within rounding noise of zero count as exactly zero.
            (true, true) => {
                let lr = (on_h / on_u).ln().abs();
                lr > 1e-13 && lr > v
            }
        };
        if is_leaky {
            leaky.push(y);
        }
    }
    Ok(leaky)
}

/// A random binary-input channel with `k` outputs that is exactly `ε`-DP
/// or tighter: a random pair of rows pulled towards each other by the
/// largest mixing weight meeting the budget.
pub fn random_private_binary_channel<R: Rng + ?Sized>(k: usize, epsilon: f64, rng: &mut R) -> Result<Channel> {
    if k < 1 {
        return Err(Error::InvalidParameter("need at least one output".into()));
    }
    let mut draw = || -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    let p0 = draw();
    let p1 = draw();
    let labels: Vec<f64> = (0..k).map(|i| i as f64).collect();
    let mix = |lambda: f64| -> Vec<f64> {
        p0.iter()
            .zip(&p1)
            .map(|(a, b)| lambda * b + (1.0 - lambda) * a)
            .collect()
    };
    let private = |lambda: f64| -> bool {
        let ch = Channel::normalized(labels.clone(), vec![p0.clone(), mix(lambda)]).expect("valid rows");
        measure_privacy(&ch, None).epsilon.at_most(epsilon)
    };
    let lambda = if private(1.0) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if private(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Channel::normalized(labels, vec![p0.clone(), mix(lambda)])
}

/// Decomposes `trials` random `ε`-DP binary channels and recomposes them
/// with randomized response. Returns the largest row total variation error.
pub fn kov_round_trip<R: Rng + ?Sized>(epsilon: f64, trials: usize, max_outputs: usize, rng: &mut R) -> Result<f64> {
    let rr = rr_channel(epsilon, RrOutput::Raw)?;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let k = rng.random_range(1..=max_outputs.max(1));
        let ch = random_private_binary_channel(k, epsilon, rng)?;
        let post = kov_decompose(&ch, epsilon, 0.0)?;
        worst = worst.max(max_row_tv(&compose(&post, &rr)?, &ch)?);
    }
    Ok(worst)
}

/// The JSON document every verifier emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub claim: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub margin_or_fraction: f64,
    pub confidence: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ClaimReport {
    pub fn new(claim: &str, margin_or_fraction: f64, pass: bool) -> Self {
        ClaimReport {
            claim: claim.to_string(),
            parameters: BTreeMap::new(),
            margin_or_fraction,
            confidence: None,
            pass,
            note: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn neumaier_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    xs.into_iter().for_each(|x| acc.add(x));
    acc.sum()
}
