//! Finite stochastic channels.
//!
//! A [`Channel`] is a dense row-stochastic matrix mapping input symbols
//! `0..input_size` to labelled output symbols. Every local randomizer in the
//! crate with a finite message space is expressed as a channel, as are the
//! post-processors produced by [`kov_decompose`].
//!
//! Binary data universes use the convention that input index 0 is the value
//! `-1` and input index 1 is the value `+1` (see [`binary_index`]).

mod kov;
mod subset;

pub use kov::{kov_decompose, PostProcessor, RECOMPOSITION_TOLERANCE};
pub use subset::SubsetH;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums must equal one within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Input index of a binary value (`-1 -> 0`, `+1 -> 1`).
pub fn binary_index(x: i8) -> usize {
    if x > 0 {
        1
    } else {
        0
    }
}

/// Binary value of an input index of a 2-input channel.
pub fn binary_value(index: usize) -> i8 {
    if index == 1 {
        1
    } else {
        -1
    }
}

/// Keep probability `e^eps / (e^eps + 1)` of randomized response.
pub fn keep_probability(epsilon: f64) -> f64 {
    1.0 / (1.0 + (-epsilon).exp())
}

/// Unbiasing scale `(e^eps + 1) / (e^eps - 1)`; infinite at `eps = 0`.
pub fn rr_scale(epsilon: f64) -> f64 {
    1.0 / (epsilon / 2.0).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RrOutput {
    /// Outputs `{-1, +1}`.
    Raw,
    /// Outputs `{-c, +c}` with `c = (e^eps + 1)/(e^eps - 1)`, unbiased for the input.
    Rescaled,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    input_size: usize,
    output_labels: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

impl fmt::Debug for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Channel")
            .field("input_size", &self.input_size)
            .field("output_labels", &self.output_labels)
            .field("matrix", &self.matrix)
            .finish()
    }
}

impl Channel {
    /// Builds a channel, checking non-negativity and row stochasticity.
    pub fn new(output_labels: Vec<f64>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let channel = Channel {
            input_size: matrix.len(),
            output_labels,
            matrix,
        };
        channel.validate()?;
        Ok(channel)
    }

    /// Like [`Channel::new`] but rescales each row to sum to one first.
    /// Used after floating point constructions that lose a few ulps.
    pub fn normalized(output_labels: Vec<f64>, mut matrix: Vec<Vec<f64>>) -> Result<Self> {
        for row in &mut matrix {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Self::new(output_labels, matrix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 {
            return Err(Error::InvalidChannel("input_size must be at least 1".into()));
        }
        if self.input_size != self.matrix.len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_size,
                actual: self.matrix.len(),
            });
        }
        let k = self.output_labels.len();
        if k == 0 {
            return Err(Error::InvalidChannel("no output labels".into()));
        }
        for (x, row) in self.matrix.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: row.len(),
                });
            }
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(Error::InvalidChannel(format!("row {x} has invalid probability {p}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidChannel(format!("row {x} sums to {sum}, not 1")));
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_labels.len()
    }

    pub fn output_labels(&self) -> &[f64] {
        &self.output_labels
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.matrix[input]
    }

    pub fn identity(labels: Vec<f64>) -> Result<Self> {
        let k = labels.len();
        let matrix = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(labels, matrix)
    }

    /// Channel that ignores its input.
    pub fn constant(input_size: usize, labels: Vec<f64>, row: Vec<f64>) -> Result<Self> {
        Self::new(labels, vec![row; input_size])
    }

    /// d-ary randomized response over `[d]`, labels `1..=d`.
    pub fn randomized_response(d: usize, epsilon: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("d-ary randomized response needs d >= 2".into()));
        }
        check_epsilon(epsilon)?;
        let e = epsilon.exp();
        let denom = e + d as f64 - 1.0;
        let matrix = (0..d)
            .map(|x| (0..d).map(|y| if x == y { e / denom } else { 1.0 / denom }).collect())
            .collect();
        Self::normalized((1..=d).map(|v| v as f64).collect(), matrix)
    }

    /// Exact output distribution for a distribution over inputs.
    pub fn output_distribution(&self, input_dist: &[f64]) -> Result<Vec<f64>> {
        if input_dist.len() != self.input_size {
            return Err(Error::DimensionMismatch {
                expected: self.input_size,
                actual: input_dist.len(),
            });
        }
        let mut out = vec![0.0; self.output_size()];
        for (w, row) in input_dist.iter().zip(&self.matrix) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += w * p;
            }
        }
        Ok(out)
    }

    /// Samples an output index for the given input index.
    pub fn sample_index<R: Rng + ?Sized>(&self, input: usize, rng: &mut R) -> usize {
        sample_from(&self.matrix[input], rng)
    }

    /// Samples an output label for the given input index.
    pub fn sample<R: Rng + ?Sized>(&self, input: usize, rng: &mut R) -> f64 {
        self.output_labels[self.sample_index(input, rng)]
    }

    pub fn label_index(&self, label: f64) -> Option<usize> {
        self.output_labels.iter().position(|l| *l == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let channel: Channel = serde_json::from_str(text)?;
        channel.validate()?;
        Ok(channel)
    }
}

/// Draws an index from a probability vector by inversion.
pub fn sample_from<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap at the top; return the last supported symbol
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 1], got {delta}"
        )));
    }
    Ok(())
}

/// Binary randomized response: keep the input with probability `e^eps/(e^eps+1)`.
pub fn rr_channel(epsilon: f64, output: RrOutput) -> Result<Channel> {
    check_epsilon(epsilon)?;
    let keep = keep_probability(epsilon);
    let flip = 1.0 - keep;
    let labels = match output {
        RrOutput::Raw => vec![-1.0, 1.0],
        RrOutput::Rescaled => {
            if epsilon == 0.0 {
                return Err(Error::InvalidParameter(
                    "rescaled randomized response is undefined at epsilon = 0".into(),
                ));
            }
            let c = rr_scale(epsilon);
            vec![-c, c]
        }
    };
    Channel::new(labels, vec![vec![keep, flip], vec![flip, keep]])
}

/// Randomized response that fails at privacy with probability `delta`,
/// reporting `2x`. Labels are `(-2, -1, +1, +2)`.
pub fn rr_delta_channel(epsilon: f64, delta: f64) -> Result<Channel> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    let keep = (1.0 - delta) * keep_probability(epsilon);
    let flip = (1.0 - delta) * (1.0 - keep_probability(epsilon));
    Channel::new(
        vec![-2.0, -1.0, 1.0, 2.0],
        vec![vec![delta, keep, flip, 0.0], vec![0.0, flip, keep, delta]],
    )
}

/// Privacy level of a channel. An infinite epsilon is an explicit variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    Finite(f64),
    Infinite,
}

impl Epsilon {
    pub fn is_finite(&self) -> bool {
        matches!(self, Epsilon::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Epsilon::Finite(e) => Some(*e),
            Epsilon::Infinite => None,
        }
    }

    /// `true` when this level is at most `bound`.
    pub fn at_most(&self, bound: f64) -> bool {
        matches!(self, Epsilon::Finite(e) if *e <= bound)
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Finite(e) => write!(f, "{e}"),
            Epsilon::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: Epsilon,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn pure(epsilon: f64) -> Self {
        PrivacyParams {
            epsilon: Epsilon::Finite(epsilon),
            delta: 0.0,
        }
    }
}

/// Measures the privacy of a channel.
///
/// Without a query, returns the smallest pure epsilon (the largest absolute
/// log-ratio between two rows on a common output). With `epsilon_query`,
/// returns the smallest delta for which the channel is `(eps, delta)`-DP.
pub fn measure_privacy(channel: &Channel, epsilon_query: Option<f64>) -> PrivacyParams {
    match epsilon_query {
        None => PrivacyParams {
            epsilon: pure_epsilon(channel),
            delta: 0.0,
        },
        Some(eps) => PrivacyParams {
            epsilon: Epsilon::Finite(eps),
            delta: delta_at(channel, eps),
        },
    }
}

fn pure_epsilon(channel: &Channel) -> Epsilon {
    let rows = channel.matrix();
    let mut worst: f64 = 0.0;
    for (i, ri) in rows.iter().enumerate() {
        for rj in rows.iter().skip(i + 1) {
            for (&p, &q) in ri.iter().zip(rj) {
                match (p > 0.0, q > 0.0) {
                    (false, false) => {}
                    (true, true) => worst = worst.max((p.ln() - q.ln()).abs()),
                    _ => return Epsilon::Infinite,
                }
            }
        }
    }
    Epsilon::Finite(worst)
}

fn delta_at(channel: &Channel, epsilon: f64) -> f64 {
    let scale = epsilon.exp();
    let rows = channel.matrix();
    let mut worst: f64 = 0.0;
    for (i, ri) in rows.iter().enumerate() {
        for (j, rj) in rows.iter().enumerate() {
            if i == j {
                continue;
            }
            let excess: f64 = ri.iter().zip(rj).map(|(p, q)| (p - scale * q).max(0.0)).sum();
            worst = worst.max(excess);
        }
    }
    worst.min(1.0)
}

/// Smallest epsilon at which the channel is `(epsilon, delta)`-DP, found by
/// bisection on [`measure_privacy`]. `None` when even a huge epsilon fails.
pub fn epsilon_for_delta(channel: &Channel, delta: f64) -> Option<f64> {
    const CEILING: f64 = 50.0;
    if delta_at(channel, 0.0) <= delta {
        return Some(0.0);
    }
    if delta_at(channel, CEILING) > delta {
        return None;
    }
    let (mut lo, mut hi) = (0.0, CEILING);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if delta_at(channel, mid) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Some(hi)
}

/// Applies `post` to the output of `base`: row `x` of the result is
/// `sum_y base(x -> y) * post(y -> .)`.
pub fn compose(post: &PostProcessor, base: &Channel) -> Result<Channel> {
    compose_channels(post.channel(), base)
}

pub fn compose_channels(post: &Channel, base: &Channel) -> Result<Channel> {
    if post.input_size() != base.output_size() {
        return Err(Error::DimensionMismatch {
            expected: base.output_size(),
            actual: post.input_size(),
        });
    }
    let matrix = base
        .matrix()
        .iter()
        .map(|row| {
            let mut out = vec![0.0; post.output_size()];
            for (w, prow) in row.iter().zip(post.matrix()) {
                if *w == 0.0 {
                    continue;
                }
                for (o, p) in out.iter_mut().zip(prow) {
                    *o += w * p;
                }
            }
            out
        })
        .collect();
    Channel::normalized(post.output_labels().to_vec(), matrix)
}

/// The binary channel `Q_{H,R}`: on `+1` run `R` on a uniform element of `H`,
/// on `-1` on a uniform element of the complement.
pub fn embed_channel(r: &Channel, h: &SubsetH) -> Result<Channel> {
    if r.input_size() != h.universe_size() {
        return Err(Error::DimensionMismatch {
            expected: h.universe_size(),
            actual: r.input_size(),
        });
    }
    let average = |members: &[usize]| -> Vec<f64> {
        let mut row = vec![0.0; r.output_size()];
        for &x in members {
            for (o, p) in row.iter_mut().zip(r.row(x)) {
                *o += p;
            }
        }
        let w = members.len() as f64;
        row.iter_mut().for_each(|o| *o /= w);
        row
    };
    let plus = average(&h.members());
    let minus = average(&h.complement());
    Channel::normalized(r.output_labels().to_vec(), vec![minus, plus])
}

/// Largest per-row total variation distance between two channels with the
/// same shape.
pub fn max_row_tv(a: &Channel, b: &Channel) -> Result<f64> {
    if a.input_size() != b.input_size() || a.output_size() != b.output_size() {
        return Err(Error::DimensionMismatch {
            expected: a.input_size() * a.output_size(),
            actual: b.input_size() * b.output_size(),
        });
    }
    Ok(a.matrix()
        .iter()
        .zip(b.matrix())
        .map(|(ra, rb)| 0.5 * ra.iter().zip(rb).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rr_at_zero_is_uniform() {
        let ch = rr_channel(0.0, RrOutput::Raw).unwrap();
        assert_eq!(ch.row(0), &[0.5, 0.5]);
        assert_eq!(ch.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn rr_at_ln3_keeps_three_quarters() {
        let ch = rr_channel(3f64.ln(), RrOutput::Raw).unwrap();
        assert!(close(ch.row(1)[1], 0.75, 1e-15));
        assert!(close(ch.row(1)[0], 0.25, 1e-15));
    }

    #[test]
    fn rescaled_rr_is_unbiased() {
        let ch = rr_channel(1.0, RrOutput::Rescaled).unwrap();
        let e = std::f64::consts::E;
        let c = (e + 1.0) / (e - 1.0);
        assert!(close(ch.output_labels()[1], c, 1e-14));
        let mean: f64 = ch.row(1).iter().zip(ch.output_labels()).map(|(p, l)| p * l).sum();
        assert!(close(mean, 1.0, 1e-14));
        let mean_minus: f64 = ch.row(0).iter().zip(ch.output_labels()).map(|(p, l)| p * l).sum();
        assert!(close(mean_minus, -1.0, 1e-14));
    }

    #[test]
    fn rescaled_rr_rejects_zero_epsilon() {
        assert!(rr_channel(0.0, RrOutput::Rescaled).is_err());
        assert!(rr_channel(-1.0, RrOutput::Raw).is_err());
        assert!(rr_channel(f64::NAN, RrOutput::Raw).is_err());
    }

    #[test]
    fn rr_delta_rows() {
        let ch = rr_delta_channel(3f64.ln(), 0.1).unwrap();
        let expected = [0.0, 0.225, 0.675, 0.1];
        for (p, e) in ch.row(1).iter().zip(expected) {
            assert!(close(*p, e, 1e-15), "{p} vs {e}");
        }
        let zero = rr_delta_channel(0.7, 0.0).unwrap();
        let plain = rr_channel(0.7, RrOutput::Raw).unwrap();
        assert_eq!(zero.row(1)[3], 0.0);
        assert!(close(zero.row(1)[2], plain.row(1)[1], 1e-15));
        let one = rr_delta_channel(0.7, 1.0).unwrap();
        assert_eq!(one.row(1), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(one.row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert!(rr_delta_channel(1.0, 1.5).is_err());
    }

    #[test]
    fn measure_rr_epsilon() {
        let p = measure_privacy(&rr_channel(1.0, RrOutput::Raw).unwrap(), None);
        assert!(close(p.epsilon.value().unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn identity_channel_is_not_private() {
        let id = Channel::identity(vec![-1.0, 1.0]).unwrap();
        assert_eq!(measure_privacy(&id, None).epsilon, Epsilon::Infinite);
        assert_eq!(measure_privacy(&id, Some(5.0)).delta, 1.0);
    }

    #[test]
    fn measure_rr_delta_delta() {
        let ch = rr_delta_channel(1.0, 0.1).unwrap();
        let p = measure_privacy(&ch, Some(1.0));
        assert!(close(p.delta, 0.1, 1e-12), "{}", p.delta);
    }

    #[test]
    fn validation_rejects_bad_rows() {
        assert!(Channel::new(vec![0.0, 1.0], vec![vec![0.5, 0.6]]).is_err());
        assert!(Channel::new(vec![0.0, 1.0], vec![vec![1.5, -0.5]]).is_err());
        assert!(Channel::new(vec![0.0, 1.0], vec![vec![1.0]]).is_err());
        assert!(Channel::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn compose_identity_and_constant() {
        let base = rr_channel(0.8, RrOutput::Raw).unwrap();
        let id = PostProcessor::new(Channel::identity(vec![-1.0, 1.0]).unwrap());
        let same = compose(&id, &base).unwrap();
        assert!(max_row_tv(&same, &base).unwrap() < 1e-15);

        let constant = PostProcessor::new(Channel::constant(2, vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap());
        let out = compose(&constant, &base).unwrap();
        for row in out.matrix() {
            for (p, e) in row.iter().zip([0.2, 0.3, 0.5]) {
                assert!(close(*p, e, 1e-15));
            }
        }
        let wrong = PostProcessor::new(Channel::identity(vec![1.0, 2.0, 3.0]).unwrap());
        assert!(compose(&wrong, &base).is_err());
    }

    #[test]
    fn embed_input_independent_gives_zero_epsilon() {
        let r = Channel::constant(6, vec![1.0, 2.0], vec![0.4, 0.6]).unwrap();
        let h = SubsetH::new(6, &[0, 2, 4]).unwrap();
        let q = embed_channel(&r, &h).unwrap();
        assert_eq!(measure_privacy(&q, None).epsilon, Epsilon::Finite(0.0));
    }

    #[test]
    fn embed_dary_rr_closed_form() {
        let (d, eps) = (8usize, 0.5f64);
        let r = Channel::randomized_response(d, eps).unwrap();
        let h = SubsetH::new(d, &[0, 1, 2, 3]).unwrap();
        let q = embed_channel(&r, &h).unwrap();
        let expected_ratio = 1.0 + 2.0 * (eps.exp() - 1.0) / d as f64;
        for y in h.members() {
            assert!(close(q.row(1)[y] / q.row(0)[y], expected_ratio, 1e-12));
        }
        let measured = measure_privacy(&q, None).epsilon.value().unwrap();
        assert!(close(measured, expected_ratio.ln(), 1e-12));
    }

    #[test]
    fn embed_singleton_is_identity_map() {
        let r = rr_channel(0.9, RrOutput::Raw).unwrap();
        let h = SubsetH::new(2, &[1]).unwrap();
        let q = embed_channel(&r, &h).unwrap();
        assert!(max_row_tv(&q, &r).unwrap() < 1e-15);
    }

    #[test]
    fn output_distribution_of_rr_on_rademacher() {
        let eps = 1.3;
        let q = 0.4;
        let ch = rr_channel(eps, RrOutput::Raw).unwrap();
        let out = ch.output_distribution(&[(1.0 - q) / 2.0, (1.0 + q) / 2.0]).unwrap();
        let shrink = (eps.exp() - 1.0) / (eps.exp() + 1.0);
        assert!(close(out[1] - out[0], shrink * q, 1e-15));
        assert_eq!(ch.output_distribution(&[0.0, 1.0]).unwrap(), ch.row(1));
        let dary = Channel::randomized_response(5, 1.0).unwrap();
        for p in dary.output_distribution(&[0.2; 5]).unwrap() {
            assert!(close(p, 0.2, 1e-15));
        }
        assert!(ch.output_distribution(&[1.0]).is_err());
    }

    #[test]
    fn sampling_matches_distribution() {
        let ch = Channel::randomized_response(4, 0.7).unwrap();
        let trials = 200_000;
        let mut rng = seeded(11);
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            counts[ch.sample_index(2, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(ch.row(2)) {
            let freq = *c as f64 / trials as f64;
            let tol = 4.0 * (p * (1.0 - p) / trials as f64).sqrt();
            assert!((freq - p).abs() <= tol, "{freq} vs {p}");
        }
    }

    #[test]
    fn json_round_trip() {
        let ch = rr_delta_channel(0.3, 0.05).unwrap();
        let text = ch.to_json().unwrap();
        assert_eq!(Channel::from_json(&text).unwrap(), ch);
        assert!(Channel::from_json(r#"{"input_size":1,"output_labels":[1],"matrix":[[0.5]]}"#).is_err());
    }

    #[test]
    fn epsilon_for_delta_inverts_measurement() {
        let ch = rr_delta_channel(0.8, 0.05).unwrap();
        let eps = epsilon_for_delta(&ch, 0.05).unwrap();
        assert!(close(eps, 0.8, 1e-9), "{eps}");
        let id = Channel::identity(vec![-1.0, 1.0]).unwrap();
        assert!(epsilon_for_delta(&id, 0.5).is_none());
    }
}
