//! Uniformity testing from random half-size subsets.

use serde::{Deserialize, Serialize};

use super::estimators::binomial;
use super::{
    category, check_epsilon_positive, check_messages, check_n, rr_sign, scalars, sign_channel, DataRef, DataUniverse,
    Dataset, LocalProtocol, Message, ProtocolOutput, PublicRandomness, SourceDistribution, Verdict,
};
use crate::channel::{keep_probability, rr_scale, Channel, PrivacyParams, SubsetH};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// `⌈ln(2/β) / ln(477/476)⌉`.
pub fn raptor_groups(beta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(((2.0 / beta).ln() / (477.0f64 / 476.0).ln()).ceil() as usize)
}

/// Users are split into `G` contiguous blocks of `n/G`; block `g` reports
/// through randomized response whether its datum lies in the public set
/// `S_g`. The verdict is "not uniform" iff some block estimate exceeds
/// `2 α_G` in magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaptorProtocol {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub m_budget: usize,
    pub groups: usize,
}

impl RaptorProtocol {
    pub fn new(n: usize, d: usize, epsilon: f64, beta: f64, m_budget: usize) -> Result<Self> {
        Self::with_groups(n, d, epsilon, beta, m_budget, raptor_groups(beta)?)
    }

    /// Explicit group count instead of the `β`-derived default.
    pub fn with_groups(n: usize, d: usize, epsilon: f64, beta: f64, m_budget: usize, groups: usize) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1), got {beta}")));
        }
        if d < 2 || !d.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "d must be even and at least 2, got {d}"
            )));
        }
        if groups == 0 || !n.is_multiple_of(groups) {
            return Err(Error::Divisibility { n, groups });
        }
        if m_budget >= n {
            return Err(Error::TooManyCorrupted {
                corrupted: m_budget,
                users: n,
            });
        }
        let p = RaptorProtocol {
            n,
            d,
            epsilon,
            beta,
            m_budget,
            groups,
        };
        let alpha = p.alpha();
        if alpha >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "threshold alpha_G = {alpha} is at least 1/2; the test is vacuous"
            )));
        }
        Ok(p)
    }

    /// `α_G = c_ε (√((6G/n) ln(4G/β)) + 2mG/n)`.
    pub fn alpha(&self) -> f64 {
        let g = self.groups as f64;
        let n = self.n as f64;
        rr_scale(self.epsilon)
            * ((6.0 * g / n * (4.0 * g / self.beta).ln()).sqrt() + 2.0 * self.m_budget as f64 * g / n)
    }

    pub fn group_size(&self) -> usize {
        self.n / self.groups
    }

    pub fn group_of(&self, i: usize) -> usize {
        i / self.group_size()
    }

    pub fn verdict(&self, estimates: &[f64]) -> Verdict {
        let threshold = 2.0 * self.alpha();
        if estimates.iter().any(|p| p.abs() > threshold) {
            Verdict::NotUniform
        } else {
            Verdict::Uniform
        }
    }
}

fn sets_of(public: &PublicRandomness) -> Result<&[SubsetH]> {
    match public {
        PublicRandomness::RaptorSets { sets } => Ok(sets),
        _ => Err(Error::Incompatible("raptor needs public subsets".into())),
    }
}

fn is_uniform(probs: &[f64]) -> bool {
    let u = 1.0 / probs.len() as f64;
    probs.iter().all(|p| (p - u).abs() <= 1e-12)
}

impl LocalProtocol for RaptorProtocol {
    fn name(&self) -> &'static str {
        "raptor"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn universe(&self) -> DataUniverse {
        DataUniverse::Categorical { d: self.d }
    }

    fn privacy(&self) -> PrivacyParams {
        PrivacyParams::pure(self.epsilon)
    }

    fn sample_public(&self, rng: &mut SimRng) -> Result<PublicRandomness> {
        let sets = (0..self.groups)
            .map(|_| SubsetH::random_half(self.d, rng))
            .collect::<Result<_>>()?;
        Ok(PublicRandomness::RaptorSets { sets })
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let x = category(x, self.d)?;
        let set = &sets_of(public)?[self.group_of(i)];
        let bit = if set.contains(x) { 1.0 } else { -1.0 };
        Ok(Message::Scalar(rr_sign(bit, self.epsilon, rr_scale(self.epsilon), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        sets_of(public)?;
        let estimates = self
            .statistic(messages, public)
            .ok_or_else(|| Error::Incompatible("raptor expects scalar messages".into()))?;
        Ok(ProtocolOutput::Verdict(self.verdict(&estimates)))
    }

    /// Per-group estimates `p̃(S_g) = (G/n) Σ_{i in block g} y_i`.
    fn statistic(&self, messages: &[Message], _public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        let scale = self.groups as f64 / self.n as f64;
        Some(
            ys.chunks(self.group_size())
                .map(|block| block.iter().sum::<f64>() * scale)
                .collect(),
        )
    }

    /// "uniform" iff the source is exactly uniform over `[d]` (for a fixed
    /// dataset: iff its empirical distribution is).
    fn ground_truth(&self, data: &Dataset, source: &SourceDistribution) -> Result<ProtocolOutput> {
        let probs = match source {
            SourceDistribution::Fixed { .. } => data.frequencies(),
            _ => source.categorical_probs(self.d),
        }
        .ok_or_else(|| Error::Incompatible("raptor expects a distribution over [d]".into()))?;
        Ok(ProtocolOutput::Verdict(if is_uniform(&probs) {
            Verdict::Uniform
        } else {
            Verdict::NotUniform
        }))
    }

    fn user_channel(&self, i: usize, public: &PublicRandomness) -> Option<(u64, Channel)> {
        let g = self.group_of(i);
        let set = &sets_of(public).ok()?[g];
        let signs = (0..self.d).map(|x| if set.contains(x) { 1.0 } else { -1.0 });
        Some((g as u64, sign_channel(signs, self.epsilon, rr_scale(self.epsilon))))
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }

    /// Per block: the number of users in `S_g` is binomial, and so are the
    /// kept and flipped reports.
    fn count_level(
        &self,
        source: &SourceDistribution,
        rng: &mut SimRng,
    ) -> Option<Result<(ProtocolOutput, ProtocolOutput)>> {
        let probs = source.categorical_probs(self.d)?;
        Some((|| {
            source.validate()?;
            let public = self.sample_public(rng)?;
            let sets = sets_of(&public)?;
            let size = self.group_size() as u64;
            let a = keep_probability(self.epsilon);
            let c = rr_scale(self.epsilon);
            let estimates = sets
                .iter()
                .map(|set| {
                    let q: f64 = set.members().iter().map(|x| probs[*x]).sum();
                    let inside = binomial(size, q, rng)?;
                    let plus = binomial(inside, a, rng)? + binomial(size - inside, 1.0 - a, rng)?;
                    Ok(c * (2.0 * plus as f64 - size as f64) / size as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let truth = if is_uniform(&probs) {
                Verdict::Uniform
            } else {
                Verdict::NotUniform
            };
            Ok((
                ProtocolOutput::Verdict(self.verdict(&estimates)),
                ProtocolOutput::Verdict(truth),
            ))
        })())
    }
}
