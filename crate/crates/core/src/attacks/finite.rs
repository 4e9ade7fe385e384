//! Certifying the privacy of the binary embeddings `Q_{H,R_i}` and sampling
//! the finite-universe attack's messages.

use std::collections::HashMap;

use crate::channel::{
    embed_channel, epsilon_for_delta, kov_decompose, measure_privacy, Channel, Epsilon, PostProcessor, PrivacyParams,
    SubsetH,
};
use crate::error::{Error, Result};
use crate::protocols::{LocalProtocol, PublicRandomness};
use crate::rng::SimRng;

/// The embeddings of every user's randomizer for one `H`, and the privacy
/// level they all satisfy.
#[derive(Debug, Clone)]
pub struct EmbeddingCertificate {
    /// Pure `ε′` when every embedding is pure-DP; otherwise `(ε′, 1/(180n))`.
    pub privacy: PrivacyParams,
    user_keys: Vec<u64>,
    embeddings: HashMap<u64, Channel>,
    posts: HashMap<u64, PostProcessor>,
}

/// Measures `max_i ε′(Q_{H,R_i})`. If some embedding has infinite pure
/// epsilon, falls back to `δ′ = 1/(180n)` and the smallest `ε′` achieving it.
pub fn certify_embedding(
    protocol: &dyn LocalProtocol,
    public: &PublicRandomness,
    h: &SubsetH,
) -> Result<EmbeddingCertificate> {
    let n = protocol.n();
    let mut user_keys = Vec::with_capacity(n);
    let mut embeddings: HashMap<u64, Channel> = HashMap::new();
    for i in 0..n {
        let (key, channel) = protocol
            .user_channel(i, public)
            .ok_or_else(|| Error::Incompatible(format!("{} does not expose channel randomizers", protocol.name())))?;
        if let std::collections::hash_map::Entry::Vacant(e) = embeddings.entry(key) {
            e.insert(embed_channel(&channel, h)?);
        }
        user_keys.push(key);
    }

    let mut pure = Some(0.0f64);
    for q in embeddings.values() {
        match measure_privacy(q, None).epsilon {
            Epsilon::Finite(e) => pure = pure.map(|w| w.max(e)),
            Epsilon::Infinite => {
                pure = None;
                break;
            }
        }
    }
    let privacy = match pure {
        Some(e) => PrivacyParams::pure(e),
        None => {
            let delta = 1.0 / (180.0 * n as f64);
            let mut worst = 0.0f64;
            for q in embeddings.values() {
                let e = epsilon_for_delta(q, delta).ok_or({
                    Error::DecompositionInfeasible {
                        epsilon: f64::INFINITY,
                        delta,
                        error: 1.0,
                    }
                })?;
                worst = worst.max(e);
            }
            PrivacyParams {
                epsilon: Epsilon::Finite(worst),
                delta,
            }
        }
    };
    Ok(EmbeddingCertificate {
        privacy,
        user_keys,
        embeddings,
        posts: HashMap::new(),
    })
}

impl EmbeddingCertificate {
    pub fn epsilon(&self) -> f64 {
        self.privacy.epsilon.value().expect("certified epsilon is finite")
    }

    pub fn embedding(&self, i: usize) -> &Channel {
        &self.embeddings[&self.user_keys[i]]
    }

    /// Number of distinct embedded channels.
    pub fn distinct(&self) -> usize {
        self.embeddings.len()
    }

    /// `Q̃_{H,R_i}`, decomposed at the certified level.
    pub fn post(&mut self, i: usize) -> Result<&PostProcessor> {
        let key = self.user_keys[i];
        if !self.posts.contains_key(&key) {
            let post = kov_decompose(&self.embeddings[&key], self.epsilon(), self.privacy.delta)?;
            self.posts.insert(key, post);
        }
        Ok(&self.posts[&key])
    }

    /// One draw of `Q̃_{H,R_i}(+1)`.
    pub fn sample_plus_one(&mut self, i: usize, rng: &mut SimRng) -> Result<f64> {
        let post = self.post(i)?;
        let input = post.input_index(1.0).expect("+1 is a randomized response output");
        Ok(post.channel().sample(input, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{finite_universe_adversary, run_manip_game, GameConfig};
    use crate::channel::{rr_channel, RrOutput};
    use crate::protocols::{
        hst_protocol, ChannelAggregator, ChannelProtocol, DataUniverse, Protocol, SourceDistribution,
    };
    use crate::rng::seeded;

    #[test]
    fn dary_rr_certificate_matches_closed_form() {
        let (d, eps) = (16usize, 1.0f64);
        let ch = Channel::randomized_response(d, eps).unwrap();
        let p = ChannelProtocol::new(
            20,
            DataUniverse::Categorical { d },
            vec![ch],
            ChannelAggregator::Histogram,
        )
        .unwrap();
        let h = SubsetH::random_half(d, &mut seeded(2)).unwrap();
        let cert = certify_embedding(&p, &PublicRandomness::None, &h).unwrap();
        let expected = (1.0 + 2.0 * (eps.exp() - 1.0) / d as f64).ln();
        assert!((cert.epsilon() - expected).abs() < 1e-12);
        assert_eq!(cert.privacy.delta, 0.0);
        assert_eq!(cert.distinct(), 1);
    }

    #[test]
    fn singleton_h_on_binary_rr_reduces_to_plus_one() {
        let ch = rr_channel(1.0, RrOutput::Raw).unwrap();
        let p = ChannelProtocol::new(
            5,
            DataUniverse::Categorical { d: 2 },
            vec![ch],
            ChannelAggregator::Histogram,
        )
        .unwrap();
        let h = SubsetH::new(2, &[1]).unwrap();
        let mut cert = certify_embedding(&p, &PublicRandomness::None, &h).unwrap();
        assert!((cert.epsilon() - 1.0).abs() < 1e-12);
        let post = cert.post(0).unwrap();
        assert!((post.channel().row(1)[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hst_embeddings_are_certified_per_user() {
        let p = hst_protocol(40, 8, 1.0).unwrap();
        let public = p.as_local().sample_public(&mut seeded(1)).unwrap();
        let h = SubsetH::random_half(8, &mut seeded(3)).unwrap();
        let cert = certify_embedding(p.as_local(), &public, &h).unwrap();
        assert!(cert.epsilon() <= 1.0 + 1e-12);
        assert_eq!(cert.distinct(), 40);
    }

    #[test]
    fn attack_runs_and_reports_certificate() {
        let p = hst_protocol(60, 8, 1.0).unwrap();
        let adv = finite_universe_adversary(&p, None).unwrap();
        let r = run_manip_game(&p, &SourceDistribution::uniform(8), &adv, &GameConfig::new(60, 6, 9)).unwrap();
        let cert = r.certified.unwrap();
        assert!(cert.epsilon.at_most(1.0 + 1e-12));
        assert_eq!(r.sent.len(), 6);
        let odd = Protocol::Channels(
            ChannelProtocol::new(
                4,
                DataUniverse::Binary,
                vec![rr_channel(1.0, RrOutput::Raw).unwrap()],
                ChannelAggregator::Mean,
            )
            .unwrap(),
        );
        assert!(finite_universe_adversary(&odd, None).is_err());
    }
}
