//! Public random strings shared by all users and the aggregator.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::SubsetH;
use crate::error::{Error, Result};
use crate::rng::splitmix64;

/// Per-user uniform sign vectors `s_i ∈ {±1}^dim`, generated on demand from a
/// keyed hash. Coordinates for distinct `(i, j)` are independent uniform bits
/// for all practical purposes, and `dim` may be far larger than memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignOracle {
    pub key: u64,
    pub dim: usize,
}

impl SignOracle {
    pub fn new<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        SignOracle { key: rng.random(), dim }
    }

    /// 64 sign bits of user `i`, coordinates `64w .. 64w + 63`.
    #[inline]
    pub fn word(&self, i: usize, w: usize) -> u64 {
        let user = splitmix64(self.key ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        splitmix64(user ^ (w as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
    }

    /// `s_{i,j}` as `±1.0`; bit 1 is `+1`.
    #[inline]
    pub fn sign(&self, i: usize, j: usize) -> f64 {
        if (self.word(i, j / 64) >> (j % 64)) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Adds `weight * s_i` to `acc` over coordinates `0..acc.len()`.
    pub fn accumulate(&self, i: usize, weight: f64, acc: &mut [f64]) {
        for (w, chunk) in acc.chunks_mut(64).enumerate() {
            let bits = self.word(i, w);
            for (b, a) in chunk.iter_mut().enumerate() {
                if (bits >> b) & 1 == 1 {
                    *a += weight;
                } else {
                    *a -= weight;
                }
            }
        }
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.dim).map(|j| self.sign(i, j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PublicRandomness {
    None,
    /// Group index of every user.
    Partition {
        groups: usize,
        assignment: Vec<u32>,
    },
    SignVectors {
        signs: SignOracle,
    },
    SphereVectors {
        d: usize,
        vectors: Vec<Vec<f64>>,
    },
    RaptorSets {
        sets: Vec<SubsetH>,
    },
    HhBundle {
        groups: usize,
        assignment: Vec<u32>,
        /// `h(x)` for every `x ∈ [d]`, values in `[k]`.
        hash: Vec<u32>,
        k: usize,
        signs: SignOracle,
    },
}

impl PublicRandomness {
    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("public randomness serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn assignment(&self) -> Option<&[u32]> {
        match self {
            PublicRandomness::Partition { assignment, .. } | PublicRandomness::HhBundle { assignment, .. } => {
                Some(assignment)
            }
            _ => None,
        }
    }

    pub fn signs(&self) -> Option<&SignOracle> {
        match self {
            PublicRandomness::SignVectors { signs } | PublicRandomness::HhBundle { signs, .. } => Some(signs),
            _ => None,
        }
    }
}

/// Uniformly random partition of `[n]` into `groups` groups of equal size.
pub fn balanced_partition<R: Rng + ?Sized>(n: usize, groups: usize, rng: &mut R) -> Result<Vec<u32>> {
    if groups == 0 || !n.is_multiple_of(groups) {
        return Err(Error::Divisibility { n, groups });
    }
    let per = n / groups;
    let mut assignment: Vec<u32> = (0..n).map(|i| (i / per) as u32).collect();
    assignment.shuffle(rng);
    Ok(assignment)
}

/// Users of each group, in increasing user order.
pub fn group_members(assignment: &[u32], groups: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); groups];
    for (i, g) in assignment.iter().enumerate() {
        members[*g as usize].push(i);
    }
    members
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn sign_oracle_is_balanced_and_deterministic() {
        let oracle = SignOracle { key: 99, dim: 1000 };
        let v = oracle.vector(5);
        assert_eq!(v, oracle.vector(5));
        assert_ne!(v, oracle.vector(6));
        let plus = v.iter().filter(|s| **s > 0.0).count();
        assert!((400..600).contains(&plus), "{plus}");
        let mut acc = vec![0.0; 1000];
        oracle.accumulate(5, 2.0, &mut acc);
        for (a, s) in acc.iter().zip(&v) {
            assert_eq!(*a, 2.0 * s);
        }
    }

    #[test]
    fn sign_coordinates_are_pairwise_uncorrelated() {
        let oracle = SignOracle { key: 7, dim: 4 };
        let trials = 40_000;
        let corr: f64 = (0..trials).map(|i| oracle.sign(i, 0) * oracle.sign(i, 1)).sum::<f64>() / trials as f64;
        assert!(corr.abs() < 4.0 / (trials as f64).sqrt());
    }

    #[test]
    fn partition_is_balanced() {
        let mut rng = seeded(1);
        let a = balanced_partition(12, 4, &mut rng).unwrap();
        let members = group_members(&a, 4);
        assert!(members.iter().all(|m| m.len() == 3));
        assert!(balanced_partition(10, 4, &mut rng).is_err());
    }

    #[test]
    fn digest_distinguishes_strings() {
        let a = PublicRandomness::SignVectors {
            signs: SignOracle { key: 1, dim: 3 },
        };
        let b = PublicRandomness::SignVectors {
            signs: SignOracle { key: 2, dim: 3 },
        };
        assert_eq!(a.digest().len(), 64);
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }
}
