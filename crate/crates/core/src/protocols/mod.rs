//! Non-interactive LDP protocols: per-user randomizers, a public random
//! string, and an aggregator.

mod channels;
mod data;
mod estimators;
mod hh;
mod public;
mod raptor;

pub use channels::{ChannelAggregator, ChannelProtocol, ReducedProtocol};
pub use data::{
    basis_vector, check_dataset, random_unit_vector, DataRef, DataUniverse, DataValue, Dataset, SourceDistribution,
};
pub use estimators::{
    sphere_gamma, Est1Protocol, Est2Protocol, EstInfProtocol, HstProtocol, RrMeanProtocol, SuboptimalHstProtocol,
};
pub use hh::{HashSize, HhProtocol};
pub use public::{balanced_partition, group_members, PublicRandomness, SignOracle};
pub use raptor::{raptor_groups, RaptorProtocol};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{keep_probability, Channel, PrivacyParams};
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng, Stream};

/// One user's message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Message {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Message {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Message::Scalar(v) => Some(*v),
            Message::Vector(_) => None,
        }
    }

    /// The all-zero message of the same shape.
    pub fn zero_like(&self) -> Message {
        match self {
            Message::Scalar(_) => Message::Scalar(0.0),
            Message::Vector(v) => Message::Vector(vec![0.0; v.len()]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "not uniform")]
    NotUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolOutput {
    Scalar(f64),
    Vector(Vec<f64>),
    Verdict(Verdict),
    /// 0-based values from `[d]`.
    HeavyHitterList(Vec<u32>),
}

impl ProtocolOutput {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            ProtocolOutput::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            ProtocolOutput::Vector(v) => Some(v),
            _ => None,
        }
    }
}

/// Behaviour shared by every protocol.
pub trait LocalProtocol {
    fn name(&self) -> &'static str;
    fn n(&self) -> usize;
    fn universe(&self) -> DataUniverse;
    fn privacy(&self) -> PrivacyParams;

    fn sample_public(&self, rng: &mut SimRng) -> Result<PublicRandomness>;

    /// Runs user `i`'s randomizer.
    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message>;

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, rng: &mut SimRng) -> Result<ProtocolOutput>;

    /// The linear statistic the aggregator thresholds or reports, e.g.
    /// `(1/n) Σ y_i s_i` for HST. `None` when the aggregator is not linear in
    /// the messages.
    fn statistic(&self, messages: &[Message], public: &PublicRandomness) -> Option<Vec<f64>>;

    fn ground_truth(&self, data: &Dataset, source: &SourceDistribution) -> Result<ProtocolOutput>;

    /// User `i`'s randomizer as a channel over the data universe, with a key
    /// shared by users whose channels are identical.
    fn user_channel(&self, _i: usize, _public: &PublicRandomness) -> Option<(u64, Channel)> {
        None
    }

    /// The message encoding a raw `+1` for protocols whose messages are
    /// randomized response bits.
    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        None
    }

    /// Exact-in-distribution simulation of an honest run from per-group
    /// counts, for i.i.d. sources. Returns `(output, ground truth)`.
    fn count_level(
        &self,
        _source: &SourceDistribution,
        _rng: &mut SimRng,
    ) -> Option<Result<(ProtocolOutput, ProtocolOutput)>> {
        None
    }
}

/// Every protocol the crate implements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "protocol")]
pub enum Protocol {
    RrMean(RrMeanProtocol),
    EstInf(EstInfProtocol),
    Hst(HstProtocol),
    Est1(Est1Protocol),
    Est2(Est2Protocol),
    Raptor(RaptorProtocol),
    HeavyHitters(HhProtocol),
    SuboptimalHst(SuboptimalHstProtocol),
    Channels(ChannelProtocol),
    Reduced(ReducedProtocol),
}

impl Protocol {
    pub fn as_local(&self) -> &dyn LocalProtocol {
        match self {
            Protocol::RrMean(p) => p,
            Protocol::EstInf(p) => p,
            Protocol::Hst(p) => p,
            Protocol::Est1(p) => p,
            Protocol::Est2(p) => p,
            Protocol::Raptor(p) => p,
            Protocol::HeavyHitters(p) => p,
            Protocol::SuboptimalHst(p) => p,
            Protocol::Channels(p) => p,
            Protocol::Reduced(p) => p,
        }
    }

    pub fn n(&self) -> usize {
        self.as_local().n()
    }

    pub fn universe(&self) -> DataUniverse {
        self.as_local().universe()
    }

    pub fn name(&self) -> &'static str {
        self.as_local().name()
    }
}

pub fn rr_mean_protocol(n: usize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::RrMean(RrMeanProtocol::new(n, epsilon)?))
}

pub fn est_inf_protocol(n: usize, d: usize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::EstInf(EstInfProtocol::new(n, d, epsilon)?))
}

pub fn hst_protocol(n: usize, d: usize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::Hst(HstProtocol::new(n, d, epsilon)?))
}

pub fn est1_protocol(n: usize, d: usize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::Est1(Est1Protocol::new(n, d, epsilon)?))
}

pub fn est2_protocol(n: usize, d: usize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::Est2(Est2Protocol::new(n, d, epsilon)?))
}

pub fn raptor_protocol(n: usize, d: usize, epsilon: f64, beta: f64, m_budget: usize) -> Result<Protocol> {
    Ok(Protocol::Raptor(RaptorProtocol::new(n, d, epsilon, beta, m_budget)?))
}

pub fn hh_protocol(n: usize, d: usize, k: HashSize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::HeavyHitters(HhProtocol::new(n, d, k, epsilon)?))
}

pub fn suboptimal_hst_protocol(n: usize, d: usize, epsilon: f64) -> Result<Protocol> {
    Ok(Protocol::SuboptimalHst(SuboptimalHstProtocol::new(n, d, epsilon)?))
}

/// Result of an honest execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HonestRun {
    pub output: ProtocolOutput,
    pub ground_truth: ProtocolOutput,
    pub statistic: Option<Vec<f64>>,
    pub public_digest: String,
}

/// Honest run driven by an RNG handle: a seed is drawn from `rng` and the run
/// proceeds under the seeding contract of [`run_honest_seeded`].
pub fn run_honest<R: Rng + ?Sized>(
    protocol: &Protocol,
    source: &SourceDistribution,
    rng: &mut R,
) -> Result<(ProtocolOutput, ProtocolOutput)> {
    let run = run_honest_seeded(protocol, source, rng.random())?;
    Ok((run.output, run.ground_truth))
}

/// Samples data, the public string, every user's message and the aggregate,
/// each from its own stream of `seed`.
pub fn run_honest_seeded(protocol: &Protocol, source: &SourceDistribution, seed: u64) -> Result<HonestRun> {
    let p = protocol.as_local();
    let data = source.sample(p.n(), p.universe(), &mut stream(seed, Stream::Data))?;
    let public = p.sample_public(&mut stream(seed, Stream::Public))?;
    let messages = honest_messages(p, &data, &public, &mut stream(seed, Stream::Messages))?;
    let output = p.aggregate(&messages, &public, &mut stream(seed, Stream::Aggregation))?;
    Ok(HonestRun {
        output,
        ground_truth: p.ground_truth(&data, source)?,
        statistic: p.statistic(&messages, &public),
        public_digest: public.digest(),
    })
}

/// Honest run simulated from sufficient statistics where the protocol
/// supports it; falls back to the per-user simulation otherwise.
pub fn run_honest_fast(
    protocol: &Protocol,
    source: &SourceDistribution,
    seed: u64,
) -> Result<(ProtocolOutput, ProtocolOutput)> {
    if source.is_iid() {
        if let Some(result) = protocol
            .as_local()
            .count_level(source, &mut stream(seed, Stream::Aggregation))
        {
            return result;
        }
    }
    let run = run_honest_seeded(protocol, source, seed)?;
    Ok((run.output, run.ground_truth))
}

/// Every user's honest message, in user order, from a single stream.
pub fn honest_messages(
    p: &dyn LocalProtocol,
    data: &Dataset,
    public: &PublicRandomness,
    rng: &mut SimRng,
) -> Result<Vec<Message>> {
    if data.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            actual: data.len(),
        });
    }
    (0..p.n()).map(|i| p.randomize(i, data.get(i), public, rng)).collect()
}

// Helpers shared by the protocol implementations.

pub(crate) fn check_epsilon_positive(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and positive, got {epsilon}"
        )));
    }
    Ok(())
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// Randomized response on a sign, rescaled by `scale`.
#[inline]
pub(crate) fn rr_sign(sign: f64, epsilon: f64, scale: f64, rng: &mut SimRng) -> f64 {
    if rng.random::<f64>() < keep_probability(epsilon) {
        sign * scale
    } else {
        -sign * scale
    }
}

pub(crate) fn check_messages(messages: &[Message], n: usize) -> Result<()> {
    if messages.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: messages.len(),
        });
    }
    Ok(())
}

pub(crate) fn scalars(messages: &[Message]) -> Result<Vec<f64>> {
    messages
        .iter()
        .map(|m| {
            m.scalar()
                .ok_or_else(|| Error::Incompatible("expected scalar messages".into()))
        })
        .collect()
}

pub(crate) fn category(x: DataRef<'_>, d: usize) -> Result<usize> {
    match x {
        DataRef::Category(c) if (c as usize) < d => Ok(c as usize),
        _ => Err(Error::Incompatible(format!("expected a category in [0, {d})"))),
    }
}

pub(crate) fn frequencies_truth(data: &Dataset) -> Result<ProtocolOutput> {
    data.frequencies()
        .map(ProtocolOutput::Vector)
        .ok_or_else(|| Error::Incompatible("expected categorical data".into()))
}

pub(crate) fn mean_vector_truth(data: &Dataset) -> Result<ProtocolOutput> {
    data.mean_vector()
        .map(ProtocolOutput::Vector)
        .ok_or_else(|| Error::Incompatible("expected vector data".into()))
}

/// Binary channel over `[d]` with labels `(-scale, +scale)` reporting a sign
/// per input through randomized response.
pub(crate) fn sign_channel(signs: impl Iterator<Item = f64>, epsilon: f64, scale: f64) -> Channel {
    let a = keep_probability(epsilon);
    let b = 1.0 - a;
    let matrix = signs.map(|s| if s > 0.0 { vec![b, a] } else { vec![a, b] }).collect();
    Channel::new(vec![-scale, scale], matrix).expect("randomized response rows are stochastic")
}
