use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A subset `H` of a finite universe `[d]` (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetH {
    universe_size: usize,
    indicator: Vec<bool>,
}

impl SubsetH {
    /// Any non-empty proper subset.
    pub fn new(universe_size: usize, members: &[usize]) -> Result<Self> {
        let mut indicator = vec![false; universe_size];
        for &x in members {
            if x >= universe_size {
                return Err(Error::InvalidParameter(format!(
                    "subset element {x} outside universe of size {universe_size}"
                )));
            }
            indicator[x] = true;
        }
        let size = indicator.iter().filter(|b| **b).count();
        if size == 0 || size == universe_size {
            return Err(Error::InvalidParameter("subset must be non-empty and proper".into()));
        }
        Ok(SubsetH {
            universe_size,
            indicator,
        })
    }

    /// A subset of exactly half the universe.
    pub fn half(universe_size: usize, members: &[usize]) -> Result<Self> {
        let h = Self::new(universe_size, members)?;
        if !universe_size.is_multiple_of(2) || 2 * h.size() != universe_size {
            return Err(Error::InvalidParameter(format!(
                "expected |H| = {}, got {}",
                universe_size / 2,
                h.size()
            )));
        }
        Ok(h)
    }

    /// A uniformly random subset of size `d/2`.
    pub fn random_half<R: Rng + ?Sized>(universe_size: usize, rng: &mut R) -> Result<Self> {
        if universe_size < 2 || !universe_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "universe size must be even and at least 2, got {universe_size}"
            )));
        }
        let members = index::sample(rng, universe_size, universe_size / 2).into_vec();
        Self::new(universe_size, &members)
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn size(&self) -> usize {
        self.indicator.iter().filter(|b| **b).count()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.indicator.get(x).copied().unwrap_or(false)
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.universe_size).filter(|x| self.indicator[*x]).collect()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.universe_size).filter(|x| !self.indicator[*x]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn rejects_trivial_subsets() {
        assert!(SubsetH::new(4, &[]).is_err());
        assert!(SubsetH::new(2, &[0, 1]).is_err());
        assert!(SubsetH::new(4, &[7]).is_err());
        assert!(SubsetH::half(4, &[0]).is_err());
    }

    #[test]
    fn random_half_has_half_size() {
        let mut rng = seeded(3);
        for _ in 0..20 {
            let h = SubsetH::random_half(10, &mut rng).unwrap();
            assert_eq!(h.size(), 5);
            assert_eq!(h.members().len() + h.complement().len(), 10);
        }
        assert!(SubsetH::random_half(5, &mut rng).is_err());
    }
}
