//! Empirical check of the privacy amplification enjoyed by the embeddings
//! `Q_{H,R}` for random balanced `H`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ClaimReport;
use crate::channel::{embed_channel, measure_privacy, Channel, Epsilon, SubsetH};
use crate::error::{Error, Result};

/// `(e^{2ε} - 1) √((16/d) ln(12 |Y| |R|≠))` and its side condition
/// `d > 4 (e^{2ε} - 1)² ln(12 |Y| |R|≠)`.
pub fn dependent_bound(epsilon: f64, d: usize, outputs: usize, distinct: usize) -> BoundCheck {
    let g = (2.0 * epsilon).exp_m1();
    let log = (12.0 * outputs as f64 * distinct as f64).ln();
    BoundCheck {
        bound: g * (16.0 / d as f64 * log).sqrt(),
        delta: 0.0,
        condition_holds: d as f64 > 4.0 * g * g * log,
    }
}

/// `(e^{2ε} - 1) √((16/d) ln(24 e^ε n / δ))` at `δ = 1/(180n)`, with side
/// condition `d > 4 (e^{2ε} - 1)² ln(12 e^ε n / δ)`.
pub fn independent_bound(epsilon: f64, d: usize, n: usize) -> BoundCheck {
    let g = (2.0 * epsilon).exp_m1();
    let nf = n as f64;
    let delta = 1.0 / (180.0 * nf);
    BoundCheck {
        bound: g * (16.0 / d as f64 * (24.0 * epsilon.exp() * nf / delta).ln()).sqrt(),
        delta,
        condition_holds: d as f64 > 4.0 * g * g * (12.0 * epsilon.exp() * nf / delta).ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub delta: f64,
    pub condition_holds: bool,
}

/// Measurements for one sampled `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPoint {
    /// `max_i` pure `ε′` of the embeddings.
    pub epsilon: Epsilon,
    /// `max_i δ` of the embeddings at the independent bound's `ε′`.
    pub delta_at_independent: f64,
    pub meets_dependent: bool,
    pub meets_independent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationReport {
    pub d: usize,
    pub n: usize,
    pub num_h: usize,
    /// Largest pure `ε` of the base channels.
    pub base_epsilon: f64,
    pub outputs: usize,
    pub distinct: usize,
    pub dependent: BoundCheck,
    pub independent: BoundCheck,
    pub points: Vec<SurveyPoint>,
    pub fraction_dependent: f64,
    pub fraction_independent: f64,
}

impl AmplificationReport {
    /// Where a side condition holds, at least 2/3 of the sampled `H` meet
    /// the corresponding bound.
    pub fn predicted_fractions_hold(&self) -> bool {
        (!self.dependent.condition_holds || self.fraction_dependent >= 2.0 / 3.0)
            && (!self.independent.condition_holds || self.fraction_independent >= 2.0 / 3.0)
    }

    pub fn max_measured(&self) -> Epsilon {
        self.points
            .iter()
            .fold(Epsilon::Finite(0.0), |acc, p| match (acc, p.epsilon) {
                (Epsilon::Finite(a), Epsilon::Finite(b)) => Epsilon::Finite(a.max(b)),
                _ => Epsilon::Infinite,
            })
    }

    pub fn to_claim(&self) -> ClaimReport {
        let mut c = ClaimReport::new(
            "amplification",
            self.fraction_dependent,
            self.predicted_fractions_hold(),
        )
        .param("d", self.d)
        .param("n", self.n)
        .param("num_h", self.num_h)
        .param("epsilon", self.base_epsilon)
        .param("dependent_bound", self.dependent.bound)
        .param("dependent_condition", self.dependent.condition_holds)
        .param("independent_bound", self.independent.bound)
        .param("independent_delta", self.independent.delta)
        .param("independent_condition", self.independent.condition_holds)
        .param("fraction_independent", self.fraction_independent);
        if let Epsilon::Finite(e) = self.max_measured() {
            c = c.param("max_measured_epsilon", e);
        }
        c
    }
}

/// Samples `num_h` balanced subsets and measures every embedding exactly.
/// `channels` are the distinct randomizers; `n` is the number of users.
pub fn embedding_privacy_survey<R: Rng + ?Sized>(
    channels: &[Channel],
    d: usize,
    num_h: usize,
    n: usize,
    rng: &mut R,
) -> Result<AmplificationReport> {
    if channels.is_empty() || num_h == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "need channels, users and at least one H".into(),
        ));
    }
    if d < 2 || !d.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("d must be even, got {d}")));
    }
    let mut base_epsilon = 0.0f64;
    for ch in channels {
        if ch.input_size() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: ch.input_size(),
            });
        }
        match measure_privacy(ch, None).epsilon {
            Epsilon::Finite(e) => base_epsilon = base_epsilon.max(e),
            Epsilon::Infinite => return Err(Error::InvalidChannel("base channels must be pure-DP".into())),
        }
    }
    let outputs = channels.iter().map(Channel::output_size).max().unwrap_or(1);
    let dependent = dependent_bound(base_epsilon, d, outputs, channels.len());
    let independent = independent_bound(base_epsilon, d, n);

    let mut points = Vec::with_capacity(num_h);
    for _ in 0..num_h {
        let h = SubsetH::random_half(d, rng)?;
        let mut eps = Epsilon::Finite(0.0);
        let mut delta = 0.0f64;
        for ch in channels {
            let q = embed_channel(ch, &h)?;
            eps = match (eps, measure_privacy(&q, None).epsilon) {
                (Epsilon::Finite(a), Epsilon::Finite(b)) => Epsilon::Finite(a.max(b)),
                _ => Epsilon::Infinite,
            };
            delta = delta.max(measure_privacy(&q, Some(independent.bound)).delta);
        }
        points.push(SurveyPoint {
            epsilon: eps,
            delta_at_independent: delta,
            meets_dependent: eps.at_most(dependent.bound),
            meets_independent: delta <= independent.delta,
        });
    }
    let frac = |f: fn(&SurveyPoint) -> bool| points.iter().filter(|p| f(p)).count() as f64 / num_h as f64;
    Ok(AmplificationReport {
        d,
        n,
        num_h,
        base_epsilon,
        outputs,
        distinct: channels.len(),
        dependent,
        independent,
        fraction_dependent: frac(|p| p.meets_dependent),
        fraction_independent: frac(|p| p.meets_independent),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn input_independent_channels_do_not_leak() {
        let flat = Channel::constant(8, vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let r = embedding_privacy_survey(&[flat], 8, 10, 5, &mut seeded(1)).unwrap();
        assert_eq!(r.max_measured(), Epsilon::Finite(0.0));
        assert_eq!(r.fraction_dependent, 1.0);
        assert_eq!(r.fraction_independent, 1.0);
    }

    #[test]
    fn dary_rr_matches_closed_form_for_every_h() {
        let (d, eps) = (32usize, 0.5f64);
        let ch = Channel::randomized_response(d, eps).unwrap();
        let r = embedding_privacy_survey(&[ch], d, 25, 1, &mut seeded(2)).unwrap();
        let expected = (1.0 + 2.0 * eps.exp_m1() / d as f64).ln();
        for p in &r.points {
            assert!((p.epsilon.value().unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_constants() {
        let b = dependent_bound(0.5, 256, 256, 1);
        let g = 1f64.exp() - 1.0;
        assert!((b.bound - g * (16.0 / 256.0 * (12.0f64 * 256.0).ln()).sqrt()).abs() < 1e-15);
        assert!(b.condition_holds);
        let i = independent_bound(0.5, 256, 100);
        assert!((i.delta - 1.0 / 18000.0).abs() < 1e-18);
        assert!(i.bound > b.bound);
    }

    #[test]
    fn odd_d_is_rejected() {
        let ch = Channel::randomized_response(5, 1.0).unwrap();
        assert!(embedding_privacy_survey(&[ch], 5, 1, 1, &mut seeded(0)).is_err());
    }
}
