//! Heavy hitters via hashing and per-bit frequency estimation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    balanced_partition, category, check_epsilon_positive, check_messages, check_n, group_members, rr_sign, scalars,
    sign_channel, DataRef, DataUniverse, Dataset, LocalProtocol, Message, ProtocolOutput, PublicRandomness, SignOracle,
    SourceDistribution,
};
use crate::channel::{rr_scale, Channel, PrivacyParams};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Size `k` of the hash range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum HashSize {
    /// `⌈3n²/β⌉`, the collision-avoiding choice for failure probability `β`.
    Collision {
        beta: f64,
    },
    /// `300 n²`.
    Fixed300,
    Explicit {
        k: usize,
    },
}

impl HashSize {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let n = n as f64;
        let k = match self {
            HashSize::Collision { beta } => {
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
                }
                (3.0 * n * n / beta).ceil()
            }
            HashSize::Fixed300 => 300.0 * n * n,
            HashSize::Explicit { k } => *k as f64,
        };
        if k < 1.0 || k > u32::MAX as f64 {
            return Err(Error::InvalidParameter(format!("hash range {k} out of bounds")));
        }
        Ok(k as usize)
    }
}

/// `(μ̂_{2v}, μ̂_{2v+1})` for each image bucket of one group.
type PairEstimates = Vec<(f64, f64)>;

/// Users are split into `log₂ d` public groups. A user in group `g` reports,
/// through the ℓ₁ estimator over `2k` coordinates, the one-hot vector at
/// `2h(x) - bit_g(x)`; the aggregator reads bit `g` of every hashed value by
/// comparing the paired coordinates.
///
/// Values are 0-based and `bit_g(x)` is bit `g` of `x` (least significant
/// first). Only buckets in the image of `h` are decoded, and a decoded value
/// is kept only if it hashes back to its bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HhProtocol {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Failure probability used in the frequency threshold defining the
    /// ground-truth heavy hitters.
    pub beta: f64,
}

impl HhProtocol {
    pub fn new(n: usize, d: usize, k: HashSize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("d must be a power of two, got {d}")));
        }
        let groups = d.trailing_zeros() as usize;
        if !n.is_multiple_of(groups) {
            return Err(Error::Divisibility { n, groups });
        }
        let beta = match k {
            HashSize::Collision { beta } => beta,
            _ => 0.01,
        };
        Ok(HhProtocol {
            n,
            d,
            k: k.resolve(n)?,
            epsilon,
            beta,
        })
    }

    pub fn groups(&self) -> usize {
        self.d.trailing_zeros() as usize
    }

    /// Frequency above which a value must be listed:
    /// `c_ε √((log₂d / n) ln(n log₂d / β))`.
    pub fn frequency_threshold(&self) -> f64 {
        let l = self.groups() as f64;
        let n = self.n as f64;
        rr_scale(self.epsilon) * ((l / n) * (n * l / self.beta).ln()).sqrt()
    }

    /// Coordinate of the one-hot vector for value `x` in group `g`.
    pub fn coordinate(&self, hash: u32, x: usize, g: usize) -> usize {
        let bit = (x >> g) & 1;
        2 * hash as usize + 1 - bit
    }

    fn bundle<'a>(&self, public: &'a PublicRandomness) -> Result<(&'a [u32], &'a [u32], &'a SignOracle)> {
        match public {
            PublicRandomness::HhBundle {
                assignment,
                hash,
                signs,
                ..
            } => Ok((assignment, hash, signs)),
            _ => Err(Error::Incompatible("heavy hitters need the hash bundle".into())),
        }
    }

    /// Sorted distinct buckets hit by some value of `[d]`.
    fn image(hash: &[u32]) -> Vec<u32> {
        let mut v = hash.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// For every group and image bucket `v`, the ℓ₁ estimates of the two
    /// paired coordinates `(μ̂_{2v}, μ̂_{2v+1})`.
    fn pair_estimates(&self, ys: &[f64], public: &PublicRandomness) -> Result<(Vec<u32>, Vec<PairEstimates>)> {
        let (assignment, hash, signs) = self.bundle(public)?;
        let image = Self::image(hash);
        let members = group_members(assignment, self.groups());
        let per_group = (self.n / self.groups()) as f64;
        let estimates = members
            .iter()
            .map(|users| {
                image
                    .iter()
                    .map(|v| {
                        // Bins 4v..4v+3 hold the positive/negative parts of
                        // coordinates 2v and 2v+1; they share one sign word.
                        let base = 4 * *v as usize;
                        let mut z = [0.0; 4];
                        for &i in users {
                            let y = ys[i];
                            if y == 0.0 {
                                continue;
                            }
                            let word = signs.word(i, base / 64);
                            for (t, zt) in z.iter_mut().enumerate() {
                                let bit = (word >> ((base + t) % 64)) & 1;
                                *zt += if bit == 1 { y } else { -y };
                            }
                        }
                        ((z[0] - z[1]) / per_group, (z[2] - z[3]) / per_group)
                    })
                    .collect()
            })
            .collect();
        Ok((image, estimates))
    }
}

impl LocalProtocol for HhProtocol {
    fn name(&self) -> &'static str {
        "hh"
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
        let groups = self.groups();
        Ok(PublicRandomness::HhBundle {
            groups,
            assignment: balanced_partition(self.n, groups, rng)?,
            hash: (0..self.d).map(|_| rng.random_range(0..self.k as u32)).collect(),
            k: self.k,
            signs: SignOracle::new(4 * self.k + 1, rng),
        })
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let x = category(x, self.d)?;
        let (assignment, hash, signs) = self.bundle(public)?;
        let coord = self.coordinate(hash[x], x, assignment[i] as usize);
        // The one-hot vector at `coord` lands in the positive bin 2·coord.
        let s = signs.sign(i, 2 * coord);
        Ok(Message::Scalar(rr_sign(s, self.epsilon, rr_scale(self.epsilon), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        let ys = scalars(messages)?;
        let (_, hash, _) = self.bundle(public)?;
        let (image, estimates) = self.pair_estimates(&ys, public)?;
        let mut list = Vec::new();
        for (b, v) in image.iter().enumerate() {
            let mut x = 0usize;
            for (g, group) in estimates.iter().enumerate() {
                let (one, zero) = group[b];
                // Ties decode as 0.
                if one > zero {
                    x |= 1 << g;
                }
            }
            if hash[x] == *v {
                list.push(x as u32);
            }
        }
        list.sort_unstable();
        list.dedup();
        Ok(ProtocolOutput::HeavyHitterList(list))
    }

    /// `μ̂_{2v} - μ̂_{2v+1}` for every group and image bucket, group-major.
    fn statistic(&self, messages: &[Message], public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        let (_, estimates) = self.pair_estimates(&ys, public).ok()?;
        Some(estimates.iter().flatten().map(|(a, b)| a - b).collect())
    }

    /// Values whose frequency exceeds [`HhProtocol::frequency_threshold`].
    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        let freq = data
            .frequencies()
            .ok_or_else(|| Error::Incompatible("heavy hitters expect categorical data".into()))?;
        let tau = self.frequency_threshold();
        Ok(ProtocolOutput::HeavyHitterList(
            freq.iter()
                .enumerate()
                .filter(|(_, f)| **f > tau)
                .map(|(x, _)| x as u32)
                .collect(),
        ))
    }

    fn user_channel(&self, i: usize, public: &PublicRandomness) -> Option<(u64, Channel)> {
        let (assignment, hash, signs) = self.bundle(public).ok()?;
        let g = assignment[i] as usize;
        let bits = (0..self.d).map(|x| signs.sign(i, 2 * self.coordinate(hash[x], x, g)));
        Some((i as u64, sign_channel(bits, self.epsilon, rr_scale(self.epsilon))))
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{run_honest_seeded, DataValue, Protocol};

    #[test]
    fn hash_size_rules() {
        assert_eq!(HashSize::Collision { beta: 0.1 }.resolve(512).unwrap(), 7_864_320);
        assert_eq!(HashSize::Fixed300.resolve(10).unwrap(), 30_000);
        assert!(HashSize::Collision { beta: 0.0 }.resolve(10).is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(HhProtocol::new(512, 100, HashSize::Fixed300, 1.0).is_err());
        assert!(HhProtocol::new(100, 256, HashSize::Fixed300, 1.0).is_err());
        assert!(HhProtocol::new(96, 256, HashSize::Explicit { k: 1000 }, 1.0).is_ok());
    }

    #[test]
    fn tie_decodes_to_zero() {
        // With all-zero messages every paired estimate ties, so only the
        // value 0 can be decoded, and only if it hashes back to its bucket.
        let p = HhProtocol::new(8, 4, HashSize::Explicit { k: 1 }, 1.0).unwrap();
        let mut rng = crate::rng::seeded(1);
        let public = p.sample_public(&mut rng).unwrap();
        let out = p.aggregate(&vec![Message::Scalar(0.0); 8], &public, &mut rng).unwrap();
        assert_eq!(out, ProtocolOutput::HeavyHitterList(vec![0]));
    }

    #[test]
    fn recovers_a_planted_value() {
        let p = Protocol::HeavyHitters(HhProtocol::new(512, 256, HashSize::Collision { beta: 0.1 }, 2.0).unwrap());
        let source = SourceDistribution::Constant {
            value: DataValue::Category(173),
        };
        let mut hits = 0;
        for t in 0..10 {
            let run = run_honest_seeded(&p, &source, t).unwrap();
            assert_eq!(run.ground_truth, ProtocolOutput::HeavyHitterList(vec![173]));
            if let ProtocolOutput::HeavyHitterList(l) = run.output {
                assert!(l.len() <= 256);
                hits += l.contains(&173) as usize;
            }
        }
        assert!(hits >= 8, "{hits}");
    }
}
