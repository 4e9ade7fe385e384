//! Protocols whose randomizers are explicit channels, and their reduction to
//! randomized response.

use serde::{Deserialize, Serialize};

use super::{
    category, check_messages, check_n, scalars, DataRef, DataUniverse, Dataset, LocalProtocol, Message, ProtocolOutput,
    PublicRandomness, SourceDistribution,
};
use crate::channel::{
    binary_index, kov_decompose, measure_privacy, rr_channel, rr_delta_channel, Channel, Epsilon, PostProcessor,
    PrivacyParams, RrOutput,
};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelAggregator {
    /// Average of the message labels.
    Mean,
    /// Empirical distribution over the output labels.
    Histogram,
}

/// Each user runs a channel over the data universe (one shared channel or
/// one per user); messages are output labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProtocol {
    pub n: usize,
    pub universe: DataUniverse,
    pub channels: Vec<Channel>,
    pub aggregator: ChannelAggregator,
    pub privacy: PrivacyParams,
}

impl ChannelProtocol {
    /// The declared privacy is the worst measured pure epsilon over users.
    pub fn new(
        n: usize,
        universe: DataUniverse,
        channels: Vec<Channel>,
        aggregator: ChannelAggregator,
    ) -> Result<Self> {
        let mut worst = 0.0f64;
        for ch in &channels {
            match measure_privacy(ch, None).epsilon {
                Epsilon::Finite(e) => worst = worst.max(e),
                Epsilon::Infinite => {
                    return Err(Error::InvalidChannel(
                        "channel is not pure-DP; use with_privacy to declare (epsilon, delta)".into(),
                    ))
                }
            }
        }
        Self::with_privacy(n, universe, channels, aggregator, PrivacyParams::pure(worst))
    }

    pub fn with_privacy(
        n: usize,
        universe: DataUniverse,
        channels: Vec<Channel>,
        aggregator: ChannelAggregator,
        privacy: PrivacyParams,
    ) -> Result<Self> {
        check_n(n)?;
        if channels.len() != 1 && channels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: channels.len(),
            });
        }
        let inputs = match universe {
            DataUniverse::Binary => 2,
            DataUniverse::Categorical { d } => d,
            _ => return Err(Error::Incompatible("channel protocols need a finite universe".into())),
        };
        let labels = channels[0].output_labels();
        for ch in &channels {
            ch.validate()?;
            if ch.input_size() != inputs {
                return Err(Error::DimensionMismatch {
                    expected: inputs,
                    actual: ch.input_size(),
                });
            }
            if aggregator == ChannelAggregator::Histogram && ch.output_labels() != labels {
                return Err(Error::Incompatible("histogram aggregation needs shared labels".into()));
            }
        }
        Ok(ChannelProtocol {
            n,
            universe,
            channels,
            aggregator,
            privacy,
        })
    }

    pub fn channel(&self, i: usize) -> &Channel {
        if self.channels.len() == 1 {
            &self.channels[0]
        } else {
            &self.channels[i]
        }
    }

    fn input_index(&self, x: DataRef<'_>) -> Result<usize> {
        match (self.universe, x) {
            (DataUniverse::Binary, DataRef::Bit(b)) => Ok(binary_index(b)),
            (DataUniverse::Categorical { d }, x) => category(x, d),
            _ => Err(Error::Incompatible("datum outside the channel input universe".into())),
        }
    }
}

impl LocalProtocol for ChannelProtocol {
    fn name(&self) -> &'static str {
        "channels"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn universe(&self) -> DataUniverse {
        self.universe
    }

    fn privacy(&self) -> PrivacyParams {
        self.privacy
    }

    fn sample_public(&self, _rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::None)
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, _public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let input = self.input_index(x)?;
        Ok(Message::Scalar(self.channel(i).sample(input, rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        let ys = scalars(messages)?;
        match self.aggregator {
            ChannelAggregator::Mean => Ok(ProtocolOutput::Scalar(
                self.statistic(messages, public).expect("scalar")[0],
            )),
            ChannelAggregator::Histogram => {
                let labels = self.channels[0].output_labels();
                let mut hist = vec![0.0; labels.len()];
                for y in ys {
                    let j = labels
                        .iter()
                        .position(|l| *l == y)
                        .ok_or_else(|| Error::Incompatible(format!("message {y} is not an output label")))?;
                    hist[j] += 1.0 / self.n as f64;
                }
                Ok(ProtocolOutput::Vector(hist))
            }
        }
    }

    fn statistic(&self, messages: &[Message], _public: &PublicRandomness) -> Option<Vec<f64>> {
        if self.aggregator != ChannelAggregator::Mean {
            return None;
        }
        let ys = scalars(messages).ok()?;
        Some(vec![ys.iter().sum::<f64>() / self.n as f64])
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        match self.universe {
            DataUniverse::Binary => data.mean_bit().map(ProtocolOutput::Scalar),
            _ => data.frequencies().map(ProtocolOutput::Vector),
        }
        .ok_or_else(|| Error::Incompatible("dataset does not match the channel universe".into()))
    }

    fn user_channel(&self, i: usize, _public: &PublicRandomness) -> Option<(u64, Channel)> {
        let key = if self.channels.len() == 1 { 0 } else { i as u64 };
        Some((key, self.channel(i).clone()))
    }

    /// The largest output label of a binary protocol.
    fn plus_one_message(&self, i: usize) -> Option<Message> {
        if self.universe != DataUniverse::Binary {
            return None;
        }
        self.channel(i)
            .output_labels()
            .iter()
            .copied()
            .fold(None, |m: Option<f64>, l| Some(m.map_or(l, |m| m.max(l))))
            .map(Message::Scalar)
    }
}

/// The randomized-response form of a binary channel protocol: users run
/// raw randomized response at the declared `(ε, δ)` and the aggregator first
/// maps each report through that user's post-processor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedProtocol {
    pub base: ChannelProtocol,
    pub posts: Vec<PostProcessor>,
}

impl ReducedProtocol {
    pub fn new(base: ChannelProtocol) -> Result<Self> {
        if base.universe != DataUniverse::Binary {
            return Err(Error::Incompatible("reduction applies to binary protocols".into()));
        }
        let PrivacyParams { epsilon, delta } = base.privacy;
        let epsilon = epsilon
            .value()
            .ok_or_else(|| Error::InvalidParameter("declared epsilon is infinite".into()))?;
        let posts = base
            .channels
            .iter()
            .map(|ch| kov_decompose(ch, epsilon, delta))
            .collect::<Result<_>>()?;
        Ok(ReducedProtocol { base, posts })
    }

    pub fn epsilon(&self) -> f64 {
        self.base.privacy.epsilon.value().expect("finite by construction")
    }

    pub fn delta(&self) -> f64 {
        self.base.privacy.delta
    }

    pub fn post(&self, i: usize) -> &PostProcessor {
        if self.posts.len() == 1 {
            &self.posts[0]
        } else {
            &self.posts[i]
        }
    }

    /// The randomizer every user runs.
    pub fn rr(&self) -> Channel {
        if self.delta() == 0.0 {
            rr_channel(self.epsilon(), RrOutput::Raw).expect("valid epsilon")
        } else {
            rr_delta_channel(self.epsilon(), self.delta()).expect("valid parameters")
        }
    }

    /// Maps a report of user `i` through its post-processor.
    pub fn post_process(&self, i: usize, report: f64, rng: &mut SimRng) -> Result<f64> {
        let post = self.post(i);
        let input = post
            .input_index(report)
            .ok_or_else(|| Error::Incompatible(format!("{report} is not a randomized response output")))?;
        Ok(post.channel().sample(input, rng))
    }
}

impl LocalProtocol for ReducedProtocol {
    fn name(&self) -> &'static str {
        "reduced"
    }

    fn n(&self) -> usize {
        self.base.n
    }

    fn universe(&self) -> DataUniverse {
        DataUniverse::Binary
    }

    fn privacy(&self) -> PrivacyParams {
        self.base.privacy
    }

    fn sample_public(&self, _rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::None)
    }

    fn randomize(&self, _i: usize, x: DataRef<'_>, _public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let DataRef::Bit(b) = x else {
            return Err(Error::Incompatible("reduced protocol expects binary data".into()));
        };
        Ok(Message::Scalar(self.rr().sample(binary_index(b), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n())?;
        let mapped = scalars(messages)?
            .iter()
            .enumerate()
            .map(|(i, y)| self.post_process(i, *y, rng).map(Message::Scalar))
            .collect::<Result<Vec<_>>>()?;
        self.base.aggregate(&mapped, public, rng)
    }

    fn statistic(&self, _messages: &[Message], _public: &PublicRandomness) -> Option<Vec<f64>> {
        None
    }

    fn ground_truth(&self, data: &Dataset, source: &SourceDistribution) -> Result<ProtocolOutput> {
        self.base.ground_truth(data, source)
    }

    fn user_channel(&self, _i: usize, _public: &PublicRandomness) -> Option<(u64, Channel)> {
        Some((0, self.rr()))
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(1.0))
    }
}
