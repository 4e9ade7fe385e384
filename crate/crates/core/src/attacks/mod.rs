//! The manipulation game and the adversaries that play it.
//!
//! A game run: sample the data, sample the public string, choose the
//! corrupted set `C`, generate every user's honest message (the corrupted
//! users' ones become counterfactuals), let the adversary pick the messages
//! of `C`, and aggregate. An oblivious adversary picks `C` before the public
//! string exists; an adaptive one sees it. Every adversary may look at the
//! public string when choosing messages.

mod finite;

pub use finite::{certify_embedding, EmbeddingCertificate};

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::channel::{rr_scale, PrivacyParams, SubsetH};
use crate::error::{Error, Result};
use crate::protocols::{
    honest_messages, ChannelAggregator, ChannelProtocol, DataRef, DataUniverse, DataValue, Dataset, Message, Protocol,
    ProtocolOutput, PublicRandomness, ReducedProtocol, SourceDistribution,
};
use crate::rng::{stream, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adaptivity {
    /// `C` is chosen before, and independently of, the public string.
    Oblivious,
    /// `C` may depend on the public string.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub m: usize,
    pub adaptivity: Adaptivity,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        GameConfig {
            n,
            m,
            adaptivity: Adaptivity::Oblivious,
            seed,
        }
    }
}

/// What a custom adversary sees when choosing messages.
pub struct AttackContext<'a> {
    pub protocol: &'a Protocol,
    pub public: &'a PublicRandomness,
    pub corrupted: &'a [usize],
    pub data: &'a Dataset,
}

impl AttackContext<'_> {
    /// The sampled datum of a corrupted user.
    pub fn datum(&self, i: usize) -> DataRef<'_> {
        self.data.get(i)
    }
}

/// A user-supplied adversary.
pub trait ManipulationStrategy: Send + Sync {
    /// Picks `m` distinct users. `public` is `None` for oblivious games.
    fn choose_corrupted(&self, n: usize, m: usize, _public: Option<&PublicRandomness>, rng: &mut SimRng) -> Vec<usize> {
        uniform_subset(n, m, rng)
    }

    /// One message per corrupted user, in the order of `ctx.corrupted`.
    fn messages(&self, ctx: &AttackContext<'_>, rng: &mut SimRng) -> Result<Vec<Message>>;
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "adversary")]
pub enum AdversarySpec {
    /// Corrupted users behave honestly.
    Honest,
    /// Corrupted users run the honest randomizer on a replacement datum.
    InputManipulation { replacement: DataValue },
    /// Corrupted users send the encoding of a raw `+1`.
    RrPlusOne,
    /// Corrupted users send `Q̃_{H,R_i}(+1)` for a random (or fixed) half `H`.
    FiniteUniverse { fixed_h: Option<SubsetH> },
    /// Corrupted users send `c_ε · v`.
    VectorFlood { direction: Vec<i8> },
    /// An attack on the randomized-response form, mapped through each
    /// corrupted user's post-processor.
    Transferred { inner: Box<AdversarySpec> },
    #[serde(skip)]
    Custom(Arc<dyn ManipulationStrategy>),
}

impl fmt::Debug for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::Honest => write!(f, "Honest"),
            AdversarySpec::InputManipulation { replacement } => f
                .debug_struct("InputManipulation")
                .field("replacement", replacement)
                .finish(),
            AdversarySpec::RrPlusOne => write!(f, "RrPlusOne"),
            AdversarySpec::FiniteUniverse { fixed_h } => {
                f.debug_struct("FiniteUniverse").field("fixed_h", fixed_h).finish()
            }
            AdversarySpec::VectorFlood { direction } => {
                f.debug_struct("VectorFlood").field("direction", direction).finish()
            }
            AdversarySpec::Transferred { inner } => f.debug_struct("Transferred").field("inner", inner).finish(),
            AdversarySpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Against public-sign protocols: every corrupted user sends `c_ε · s_{i,j}`,
/// pushing coordinate `j` up by `c_ε` per user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignAlignedFlood {
    pub coordinate: usize,
    pub epsilon: f64,
}

impl ManipulationStrategy for SignAlignedFlood {
    fn messages(&self, ctx: &AttackContext<'_>, _rng: &mut SimRng) -> Result<Vec<Message>> {
        let signs = ctx
            .public
            .signs()
            .ok_or_else(|| Error::Incompatible("aligned flood needs public sign vectors".into()))?;
        let c = rr_scale(self.epsilon);
        Ok(ctx
            .corrupted
            .iter()
            .map(|i| Message::Scalar(c * signs.sign(*i, self.coordinate)))
            .collect())
    }
}

pub fn rr_plus_one_adversary() -> AdversarySpec {
    AdversarySpec::RrPlusOne
}

/// The finite-universe attack against a protocol over `[d]` whose
/// randomizers are channels.
pub fn finite_universe_adversary(protocol: &Protocol, fixed_h: Option<SubsetH>) -> Result<AdversarySpec> {
    let d = match protocol.universe() {
        DataUniverse::Categorical { d } if d % 2 == 0 => d,
        u => {
            return Err(Error::Incompatible(format!(
                "finite-universe attack needs [d] with d even, got {u:?}"
            )))
        }
    };
    if let Some(h) = &fixed_h {
        if h.universe_size() != d || 2 * h.size() != d {
            return Err(Error::InvalidParameter("fixed H must be a half of [d]".into()));
        }
    }
    let probe = protocol.as_local().sample_public(&mut stream(0, Stream::Public))?;
    if protocol.as_local().user_channel(0, &probe).is_none() {
        return Err(Error::Incompatible(format!(
            "{} does not expose its randomizers as channels",
            protocol.name()
        )));
    }
    Ok(AdversarySpec::FiniteUniverse { fixed_h })
}

/// Wraps an attack on the randomized-response form of a binary protocol.
pub fn transferred_attack(protocol: &Protocol, inner: AdversarySpec) -> Result<AdversarySpec> {
    reduce(protocol)?;
    Ok(AdversarySpec::Transferred { inner: Box::new(inner) })
}

/// The randomized-response form of a binary protocol with channel
/// randomizers.
pub fn reduce(protocol: &Protocol) -> Result<ReducedProtocol> {
    let p = protocol.as_local();
    if p.universe() != DataUniverse::Binary {
        return Err(Error::Incompatible("reduction needs a binary protocol".into()));
    }
    let base = match protocol {
        Protocol::Channels(c) => c.clone(),
        _ => {
            let public = p.sample_public(&mut stream(0, Stream::Public))?;
            let (_, first) = p
                .user_channel(0, &public)
                .ok_or_else(|| Error::Incompatible(format!("{} has no channel randomizers", p.name())))?;
            if !matches!(public, PublicRandomness::None) {
                return Err(Error::Incompatible(
                    "reduction needs randomizers free of public randomness".into(),
                ));
            }
            ChannelProtocol::with_privacy(
                p.n(),
                DataUniverse::Binary,
                vec![first],
                ChannelAggregator::Mean,
                p.privacy(),
            )?
        }
    };
    ReducedProtocol::new(base)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub output: ProtocolOutput,
    /// Output had every user been honest (same public string and coins).
    pub honest_output: ProtocolOutput,
    pub ground_truth: ProtocolOutput,
    /// Sorted corrupted users.
    pub corrupted: Vec<usize>,
    /// Messages the corrupted users sent, in the order of `corrupted`.
    pub sent: Vec<Message>,
    /// Messages they would have sent honestly.
    pub counterfactual: Vec<Message>,
    /// Aggregator statistic on the sent messages.
    pub statistic: Option<Vec<f64>>,
    /// Statistic on the sent messages minus the statistic on the honest
    /// ones: the manipulation term of the error.
    pub manipulation_term: Option<Vec<f64>>,
    /// Statistic of the corrupted users' sent messages alone (all other
    /// messages zeroed).
    pub injected: Option<Vec<f64>>,
    /// Privacy level certified by the finite-universe attack.
    pub certified: Option<PrivacyParams>,
    pub public_digest: String,
}

impl GameResult {
    /// Largest absolute coordinate of the manipulation term.
    pub fn manipulation_linf(&self) -> Option<f64> {
        self.manipulation_term
            .as_ref()
            .map(|t| t.iter().fold(0.0, |a: f64, v| a.max(v.abs())))
    }
}

pub fn uniform_subset(n: usize, m: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut c = index::sample(rng, n, m).into_vec();
    c.sort_unstable();
    c
}

/// Plays the manipulation game once.
pub fn run_manip_game(
    protocol: &Protocol,
    source: &SourceDistribution,
    adversary: &AdversarySpec,
    config: &GameConfig,
) -> Result<GameResult> {
    let p = protocol.as_local();
    if config.n != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            actual: config.n,
        });
    }
    if config.m > config.n {
        return Err(Error::TooManyCorrupted {
            corrupted: config.m,
            users: config.n,
        });
    }
    let seed = config.seed;
    let data = source.sample(p.n(), p.universe(), &mut stream(seed, Stream::Data))?;
    let mut corruption_rng = stream(seed, Stream::Corruption);
    let choose = |public: Option<&PublicRandomness>, rng: &mut SimRng| -> Result<Vec<usize>> {
        let mut c = match adversary {
            AdversarySpec::Custom(s) => s.choose_corrupted(config.n, config.m, public, rng),
            _ => uniform_subset(config.n, config.m, rng),
        };
        c.sort_unstable();
        c.dedup();
        if c.len() != config.m || c.iter().any(|i| *i >= config.n) {
            return Err(Error::InvalidParameter(format!(
                "adversary must corrupt exactly {} distinct users",
                config.m
            )));
        }
        Ok(c)
    };
    let (public, corrupted) = match config.adaptivity {
        Adaptivity::Oblivious => {
            let c = choose(None, &mut corruption_rng)?;
            (p.sample_public(&mut stream(seed, Stream::Public))?, c)
        }
        Adaptivity::Adaptive => {
            let public = p.sample_public(&mut stream(seed, Stream::Public))?;
            let c = choose(Some(&public), &mut corruption_rng)?;
            (public, c)
        }
    };
    let honest = honest_messages(p, &data, &public, &mut stream(seed, Stream::Messages))?;
    let counterfactual: Vec<Message> = corrupted.iter().map(|i| honest[*i].clone()).collect();

    let mut adversary_rng = stream(seed, Stream::Adversary);
    let ctx = AttackContext {
        protocol,
        public: &public,
        corrupted: &corrupted,
        data: &data,
    };
    let (sent, certified) = adversary_messages(adversary, &ctx, &counterfactual, &mut adversary_rng)?;
    if sent.len() != corrupted.len() {
        return Err(Error::DimensionMismatch {
            expected: corrupted.len(),
            actual: sent.len(),
        });
    }

    let mut all = honest.clone();
    for (i, msg) in corrupted.iter().zip(&sent) {
        all[*i] = msg.clone();
    }
    let output = p.aggregate(&all, &public, &mut stream(seed, Stream::Aggregation))?;
    let honest_output = p.aggregate(&honest, &public, &mut stream(seed, Stream::Aggregation))?;
    let statistic = p.statistic(&all, &public);
    let honest_statistic = p.statistic(&honest, &public);
    let manipulation_term = match (&statistic, &honest_statistic) {
        (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x - y).collect()),
        _ => None,
    };
    let injected = if statistic.is_some() {
        let mut masked: Vec<Message> = honest.iter().map(Message::zero_like).collect();
        for (i, msg) in corrupted.iter().zip(&sent) {
            masked[*i] = msg.clone();
        }
        p.statistic(&masked, &public)
    } else {
        None
    };
    Ok(GameResult {
        output,
        honest_output,
        ground_truth: p.ground_truth(&data, source)?,
        corrupted,
        sent,
        counterfactual,
        statistic,
        manipulation_term,
        injected,
        certified,
        public_digest: public.digest(),
    })
}

fn adversary_messages(
    adversary: &AdversarySpec,
    ctx: &AttackContext<'_>,
    counterfactual: &[Message],
    rng: &mut SimRng,
) -> Result<(Vec<Message>, Option<PrivacyParams>)> {
    let p = ctx.protocol.as_local();
    let messages = match adversary {
        AdversarySpec::Honest => counterfactual.to_vec(),
        AdversarySpec::InputManipulation { replacement } => ctx
            .corrupted
            .iter()
            .map(|i| p.randomize(*i, replacement.as_ref(), ctx.public, rng))
            .collect::<Result<_>>()?,
        AdversarySpec::RrPlusOne => ctx
            .corrupted
            .iter()
            .map(|i| {
                p.plus_one_message(*i)
                    .ok_or_else(|| Error::Incompatible(format!("{} has no randomized-response +1 message", p.name())))
            })
            .collect::<Result<_>>()?,
        AdversarySpec::VectorFlood { direction } => {
            let Protocol::SuboptimalHst(sub) = ctx.protocol else {
                return Err(Error::Incompatible(format!(
                    "vector flood needs vector messages; {} sends scalars",
                    p.name()
                )));
            };
            if direction.len() != sub.d || direction.iter().any(|v| *v != 1 && *v != -1) {
                return Err(Error::InvalidParameter(format!(
                    "flood direction must be a sign vector of length {}",
                    sub.d
                )));
            }
            let c = rr_scale(sub.epsilon);
            let msg = Message::Vector(direction.iter().map(|v| c * *v as f64).collect());
            vec![msg; ctx.corrupted.len()]
        }
        AdversarySpec::FiniteUniverse { fixed_h } => {
            let d = match p.universe() {
                DataUniverse::Categorical { d } => d,
                u => return Err(Error::Incompatible(format!("finite-universe attack on {u:?}"))),
            };
            let h = match fixed_h {
                Some(h) => h.clone(),
                None => SubsetH::random_half(d, rng)?,
            };
            let mut cert = certify_embedding(p, ctx.public, &h)?;
            let msgs = ctx
                .corrupted
                .iter()
                .map(|i| cert.sample_plus_one(*i, rng).map(Message::Scalar))
                .collect::<Result<_>>()?;
            return Ok((msgs, Some(cert.privacy)));
        }
        AdversarySpec::Transferred { inner } => {
            let reduced = Protocol::Reduced(reduce(ctx.protocol)?);
            let Protocol::Reduced(r) = &reduced else { unreachable!() };
            let inner_ctx = AttackContext {
                protocol: &reduced,
                public: &PublicRandomness::None,
                corrupted: ctx.corrupted,
                data: ctx.data,
            };
            // Counterfactuals of the reduced game are not needed by any
            // built-in inner attack except Honest, which re-randomizes.
            let reduced_counterfactual = ctx
                .corrupted
                .iter()
                .map(|i| {
                    reduced
                        .as_local()
                        .randomize(*i, ctx.data.get(*i), &PublicRandomness::None, rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let (inner_msgs, _) = adversary_messages(inner, &inner_ctx, &reduced_counterfactual, rng)?;
            ctx.corrupted
                .iter()
                .zip(inner_msgs)
                .map(|(i, m)| {
                    let y = m
                        .scalar()
                        .ok_or_else(|| Error::Incompatible("reduced messages are scalars".into()))?;
                    r.post_process(*i, y, rng).map(Message::Scalar)
                })
                .collect::<Result<_>>()?
        }
        AdversarySpec::Custom(strategy) => strategy.messages(ctx, rng)?,
    };
    Ok((messages, None))
}

/// `μ(m, n) = m/n + √(2 ln 6 / n)` and `μ(m, n, ε) = c_ε μ(m, n)`.
/// Fails when `μ(m, n, ε) > 1`, as no Rademacher mean matches it.
pub fn mu_threshold(m: usize, n: usize, epsilon: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mu = m as f64 / n as f64 + (2.0 * 6f64.ln() / n as f64).sqrt();
    let mu_eps = rr_scale(epsilon) * mu;
    if mu_eps > 1.0 {
        return Err(Error::MeanOutOfRange(mu_eps));
    }
    Ok((mu, mu_eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{hst_protocol, rr_mean_protocol, run_honest_seeded, suboptimal_hst_protocol};

    #[test]
    fn mu_threshold_values() {
        let (_, mu) = mu_threshold(0, 931, 1.0).unwrap();
        // High-precision evaluation of ((e+1)/(e-1)) * sqrt(2 ln 6 / 931).
        assert!((mu - 0.1342542115598776).abs() < 1e-13, "{mu}");
        assert!(matches!(mu_threshold(100, 100, 1.0), Err(Error::MeanOutOfRange(_))));
    }

    #[test]
    fn zero_corruption_matches_honest_run() {
        let p = hst_protocol(300, 8, 1.0).unwrap();
        let source = SourceDistribution::uniform(8);
        let game = run_manip_game(&p, &source, &AdversarySpec::RrPlusOne, &GameConfig::new(300, 0, 17)).unwrap();
        let honest = run_honest_seeded(&p, &source, 17).unwrap();
        assert_eq!(game.output, honest.output);
        assert_eq!(game.public_digest, honest.public_digest);
        assert_eq!(game.manipulation_term.unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn honest_messages_untouched_by_attack() {
        let p = rr_mean_protocol(200, 1.0).unwrap();
        let source = SourceDistribution::Rademacher { mu: 0.0 };
        let cfg = GameConfig::new(200, 20, 3);
        let attacked = run_manip_game(&p, &source, &AdversarySpec::RrPlusOne, &cfg).unwrap();
        let honest = run_manip_game(&p, &source, &AdversarySpec::Honest, &cfg).unwrap();
        assert_eq!(attacked.corrupted, honest.corrupted);
        assert_eq!(attacked.counterfactual, honest.counterfactual);
        assert_eq!(attacked.honest_output, honest.output);
    }

    #[test]
    fn all_corrupt_gives_scale() {
        let p = rr_mean_protocol(50, 1.0).unwrap();
        let r = run_manip_game(
            &p,
            &SourceDistribution::Rademacher { mu: 0.0 },
            &AdversarySpec::RrPlusOne,
            &GameConfig::new(50, 50, 1),
        )
        .unwrap();
        assert!((r.output.as_scalar().unwrap() - rr_scale(1.0)).abs() < 1e-12);
    }

    #[test]
    fn game_rejects_bad_configs() {
        let p = rr_mean_protocol(10, 1.0).unwrap();
        let s = SourceDistribution::Rademacher { mu: 0.0 };
        assert!(matches!(
            run_manip_game(&p, &s, &AdversarySpec::RrPlusOne, &GameConfig::new(10, 11, 0)),
            Err(Error::TooManyCorrupted { .. })
        ));
        assert!(run_manip_game(&p, &s, &AdversarySpec::RrPlusOne, &GameConfig::new(9, 1, 0)).is_err());
        let flood = AdversarySpec::VectorFlood { direction: vec![1] };
        assert!(run_manip_game(&p, &s, &flood, &GameConfig::new(10, 1, 0)).is_err());
    }

    #[test]
    fn oblivious_choice_ignores_public_string() {
        let p = hst_protocol(100, 4, 1.0).unwrap();
        let s = SourceDistribution::uniform(4);
        let a = run_manip_game(&p, &s, &AdversarySpec::RrPlusOne, &GameConfig::new(100, 10, 5)).unwrap();
        let b = run_manip_game(&p, &s, &AdversarySpec::RrPlusOne, &GameConfig::new(100, 10, 6)).unwrap();
        assert_ne!(a.public_digest, b.public_digest);
        let again = run_manip_game(&p, &s, &AdversarySpec::RrPlusOne, &GameConfig::new(100, 10, 5)).unwrap();
        assert_eq!(a.corrupted, again.corrupted);
    }

    struct FirstUsersWhenAdaptive;

    impl ManipulationStrategy for FirstUsersWhenAdaptive {
        fn choose_corrupted(
            &self,
            _n: usize,
            m: usize,
            public: Option<&PublicRandomness>,
            _rng: &mut SimRng,
        ) -> Vec<usize> {
            match public {
                Some(_) => (0..m).collect(),
                None => (1..=m).collect(),
            }
        }

        fn messages(&self, ctx: &AttackContext<'_>, _rng: &mut SimRng) -> Result<Vec<Message>> {
            Ok(vec![Message::Scalar(0.0); ctx.corrupted.len()])
        }
    }

    #[test]
    fn custom_adversary_sees_public_only_when_adaptive() {
        let p = rr_mean_protocol(10, 1.0).unwrap();
        let s = SourceDistribution::Rademacher { mu: 0.0 };
        let adv = AdversarySpec::Custom(Arc::new(FirstUsersWhenAdaptive));
        let mut cfg = GameConfig::new(10, 2, 0);
        assert_eq!(run_manip_game(&p, &s, &adv, &cfg).unwrap().corrupted, vec![1, 2]);
        cfg.adaptivity = Adaptivity::Adaptive;
        assert_eq!(run_manip_game(&p, &s, &adv, &cfg).unwrap().corrupted, vec![0, 1]);
    }

    #[test]
    fn vector_flood_injects_exactly() {
        let (n, d, m) = (1000, 16, 10);
        let p = suboptimal_hst_protocol(n, d, 1.0).unwrap();
        let adv = AdversarySpec::VectorFlood { direction: vec![1; d] };
        let r = run_manip_game(&p, &SourceDistribution::uniform(d), &adv, &GameConfig::new(n, m, 2)).unwrap();
        let l1: f64 = r.injected.unwrap().iter().map(|v| v.abs()).sum();
        let expected = rr_scale(1.0) * (m * d) as f64 / n as f64;
        assert!((l1 - expected).abs() < 1e-12, "{l1} vs {expected}");
    }

    #[test]
    fn input_manipulation_replaces_data() {
        let p = rr_mean_protocol(100, 20.0).unwrap();
        let adv = AdversarySpec::InputManipulation {
            replacement: DataValue::Bit(1),
        };
        let s = SourceDistribution::Constant {
            value: DataValue::Bit(-1),
        };
        let r = run_manip_game(&p, &s, &adv, &GameConfig::new(100, 30, 0)).unwrap();
        assert!((r.output.as_scalar().unwrap() - (-1.0 + 2.0 * 0.3)).abs() < 1e-6);
    }

    #[test]
    fn transferred_attack_on_rr_sends_inner_messages() {
        let p = rr_mean_protocol(100, 1.0).unwrap();
        let adv = transferred_attack(&p, AdversarySpec::RrPlusOne).unwrap();
        let r = run_manip_game(
            &p,
            &SourceDistribution::Rademacher { mu: 0.0 },
            &adv,
            &GameConfig::new(100, 10, 4),
        )
        .unwrap();
        // Post-processor of RR at its own epsilon is the identity.
        assert!(r.sent.iter().all(|m| m.scalar() == Some(rr_scale(1.0))));
        assert!(transferred_attack(&hst_protocol(10, 4, 1.0).unwrap(), AdversarySpec::RrPlusOne).is_err());
    }
}
