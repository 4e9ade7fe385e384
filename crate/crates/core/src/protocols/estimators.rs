//! Mean and frequency estimators built on randomized response.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{
    balanced_partition, category, check_epsilon_positive, check_messages, check_n, frequencies_truth,
    mean_vector_truth, random_unit_vector, rr_sign, scalars, sign_channel, DataRef, DataUniverse, Dataset,
    LocalProtocol, Message, ProtocolOutput, PublicRandomness, SignOracle, SourceDistribution,
};
use crate::channel::{keep_probability, rr_scale, Channel, PrivacyParams};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Mean estimation over `{-1, +1}`: rescaled randomized response and the
/// average of the messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrMeanProtocol {
    pub n: usize,
    pub epsilon: f64,
}

impl RrMeanProtocol {
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        Ok(RrMeanProtocol { n, epsilon })
    }
}

impl LocalProtocol for RrMeanProtocol {
    fn name(&self) -> &'static str {
        "rr_mean"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn universe(&self) -> DataUniverse {
        DataUniverse::Binary
    }

    fn privacy(&self) -> PrivacyParams {
        PrivacyParams::pure(self.epsilon)
    }

    fn sample_public(&self, _rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::None)
    }

    fn randomize(&self, _i: usize, x: DataRef<'_>, _public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        match x {
            DataRef::Bit(b) => Ok(Message::Scalar(rr_sign(
                b as f64,
                self.epsilon,
                rr_scale(self.epsilon),
                rng,
            ))),
            _ => Err(Error::Incompatible("rr_mean expects binary data".into())),
        }
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        scalars(messages)?;
        Ok(ProtocolOutput::Scalar(
            self.statistic(messages, public).expect("scalar")[0],
        ))
    }

    fn statistic(&self, messages: &[Message], _public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        Some(vec![ys.iter().sum::<f64>() / self.n as f64])
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        data.mean_bit()
            .map(ProtocolOutput::Scalar)
            .ok_or_else(|| Error::Incompatible("rr_mean expects binary data".into()))
    }

    fn user_channel(&self, _i: usize, _public: &PublicRandomness) -> Option<(u64, Channel)> {
        let c = rr_scale(self.epsilon);
        Some((0, sign_channel([-1.0, 1.0].into_iter(), self.epsilon, c)))
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }

    fn count_level(
        &self,
        source: &SourceDistribution,
        rng: &mut SimRng,
    ) -> Option<Result<(ProtocolOutput, ProtocolOutput)>> {
        let SourceDistribution::Rademacher { mu } = source else {
            return None;
        };
        Some((|| {
            source.validate()?;
            let n = self.n as u64;
            let ones = Binomial::new(n, (1.0 + mu) / 2.0)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng);
            let a = keep_probability(self.epsilon);
            let kept_plus = binomial(ones, a, rng)?;
            let flipped_to_plus = binomial(n - ones, 1.0 - a, rng)?;
            let plus = kept_plus + flipped_to_plus;
            let c = rr_scale(self.epsilon);
            let out = c * (2.0 * plus as f64 - n as f64) / n as f64;
            let truth = (2.0 * ones as f64 - n as f64) / n as f64;
            Ok((ProtocolOutput::Scalar(out), ProtocolOutput::Scalar(truth)))
        })())
    }
}

pub(crate) fn binomial(trials: u64, p: f64, rng: &mut SimRng) -> Result<u64> {
    if trials == 0 {
        return Ok(0);
    }
    Ok(Binomial::new(trials, p.clamp(0.0, 1.0))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng))
}

/// ℓ∞-ball mean estimation: users split into `d` public groups; group `j`
/// reports a randomized bit for coordinate `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstInfProtocol {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
}

impl EstInfProtocol {
    pub fn new(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if d == 0 || !n.is_multiple_of(d) {
            return Err(Error::Divisibility { n, groups: d });
        }
        Ok(EstInfProtocol { n, d, epsilon })
    }
}

impl LocalProtocol for EstInfProtocol {
    fn name(&self) -> &'static str {
        "est_inf"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn universe(&self) -> DataUniverse {
        DataUniverse::LInfBall { d: self.d }
    }

    fn privacy(&self) -> PrivacyParams {
        PrivacyParams::pure(self.epsilon)
    }

    fn sample_public(&self, rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::Partition {
            groups: self.d,
            assignment: balanced_partition(self.n, self.d, rng)?,
        })
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let DataRef::Vector(x) = x else {
            return Err(Error::Incompatible("est_inf expects vector data".into()));
        };
        self.universe().check_vector(x)?;
        let assignment = public
            .assignment()
            .ok_or_else(|| Error::Incompatible("est_inf needs a partition".into()))?;
        let j = assignment[i] as usize;
        // Encode: a ±1 bit with mean x_j.
        let bit = if rng.random::<f64>() < (1.0 + x[j]) / 2.0 {
            1.0
        } else {
            -1.0
        };
        Ok(Message::Scalar(rr_sign(bit, self.epsilon, rr_scale(self.epsilon), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        self.statistic(messages, public)
            .map(ProtocolOutput::Vector)
            .ok_or_else(|| Error::Incompatible("est_inf needs scalar messages and a partition".into()))
    }

    fn statistic(&self, messages: &[Message], public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        let assignment = public.assignment()?;
        let mut z = vec![0.0; self.d];
        for (y, g) in ys.iter().zip(assignment) {
            z[*g as usize] += y;
        }
        let scale = self.d as f64 / self.n as f64;
        z.iter_mut().for_each(|v| *v *= scale);
        Some(z)
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        mean_vector_truth(data)
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }
}

/// Frequency estimation over `[d]` with public sign vectors: user `i`
/// randomizes `s_{i,x_i}` and the aggregator returns `(1/n) Σ y_i s_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HstProtocol {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
}

impl HstProtocol {
    pub fn new(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        Ok(HstProtocol { n, d, epsilon })
    }
}

fn signs_of(public: &PublicRandomness) -> Result<&SignOracle> {
    public
        .signs()
        .ok_or_else(|| Error::Incompatible("protocol needs public sign vectors".into()))
}

impl LocalProtocol for HstProtocol {
    fn name(&self) -> &'static str {
        "hst"
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
        Ok(PublicRandomness::SignVectors {
            signs: SignOracle::new(self.d, rng),
        })
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let x = category(x, self.d)?;
        let s = signs_of(public)?.sign(i, x);
        Ok(Message::Scalar(rr_sign(s, self.epsilon, rr_scale(self.epsilon), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        signs_of(public)?;
        self.statistic(messages, public)
            .map(ProtocolOutput::Vector)
            .ok_or_else(|| Error::Incompatible("hst expects scalar messages".into()))
    }

    fn statistic(&self, messages: &[Message], public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        Some(sign_weighted_mean(public.signs()?, &ys, self.d, self.n))
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        frequencies_truth(data)
    }

    fn user_channel(&self, i: usize, public: &PublicRandomness) -> Option<(u64, Channel)> {
        let signs = public.signs()?;
        let c = rr_scale(self.epsilon);
        Some((
            i as u64,
            sign_channel((0..self.d).map(|x| signs.sign(i, x)), self.epsilon, c),
        ))
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }
}

/// `(1/n) Σ_i y_i s_i` truncated to `dim` coordinates.
fn sign_weighted_mean(signs: &SignOracle, ys: &[f64], dim: usize, n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for (i, y) in ys.iter().enumerate() {
        if *y != 0.0 {
            signs.accumulate(i, *y, &mut acc);
        }
    }
    acc.iter_mut().for_each(|v| *v /= n as f64);
    acc
}

/// ℓ₁-ball mean estimation: encode `x` as one of `2d+1` bins, then report
/// the bin through HST; `μ̂_j` is the difference of the paired bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Est1Protocol {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
}

impl Est1Protocol {
    pub fn new(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        Ok(Est1Protocol { n, d, epsilon })
    }

    pub fn bins(&self) -> usize {
        2 * self.d + 1
    }

    /// Samples the bin of `x`: `2j` with probability `max(x_j, 0)`, `2j + 1`
    /// with probability `max(-x_j, 0)`, and `2d` with the remaining mass.
    pub fn encode(&self, x: &[f64], rng: &mut SimRng) -> Result<usize> {
        DataUniverse::L1Ball { d: self.d }.check_vector(x)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, v) in x.iter().enumerate() {
            acc += v.abs();
            if u < acc {
                return Ok(if *v > 0.0 { 2 * j } else { 2 * j + 1 });
            }
        }
        Ok(2 * self.d)
    }

    /// `μ̂_j = z_{2j} - z_{2j+1}` from the bin estimates.
    pub fn estimates(&self, z: &[f64]) -> Vec<f64> {
        (0..self.d).map(|j| z[2 * j] - z[2 * j + 1]).collect()
    }
}

impl LocalProtocol for Est1Protocol {
    fn name(&self) -> &'static str {
        "est1"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn universe(&self) -> DataUniverse {
        DataUniverse::L1Ball { d: self.d }
    }

    fn privacy(&self) -> PrivacyParams {
        PrivacyParams::pure(self.epsilon)
    }

    fn sample_public(&self, rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::SignVectors {
            signs: SignOracle::new(self.bins(), rng),
        })
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let DataRef::Vector(x) = x else {
            return Err(Error::Incompatible("est1 expects vector data".into()));
        };
        let bin = self.encode(x, rng)?;
        let s = signs_of(public)?.sign(i, bin);
        Ok(Message::Scalar(rr_sign(s, self.epsilon, rr_scale(self.epsilon), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        signs_of(public)?;
        let z = self
            .statistic(messages, public)
            .ok_or_else(|| Error::Incompatible("est1 expects scalar messages".into()))?;
        Ok(ProtocolOutput::Vector(self.estimates(&z)))
    }

    /// The `2d+1` bin estimates `z`.
    fn statistic(&self, messages: &[Message], public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        Some(sign_weighted_mean(public.signs()?, &ys, self.bins(), self.n))
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        mean_vector_truth(data)
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }
}

/// `E|s_1|` for `s` uniform on the unit sphere of `R^d`:
/// `Γ(d/2) / (√π Γ((d+1)/2))`.
pub fn sphere_gamma(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(d / 2.0) - ln_gamma((d + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

/// ℓ₂ mean estimation on the unit sphere: user `i` randomizes
/// `sgn(s_i · x_i)` for a public uniform unit vector `s_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Est2Protocol {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
}

impl Est2Protocol {
    pub fn new(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        Ok(Est2Protocol { n, d, epsilon })
    }
}

fn sphere_of(public: &PublicRandomness) -> Result<&[Vec<f64>]> {
    match public {
        PublicRandomness::SphereVectors { vectors, .. } => Ok(vectors),
        _ => Err(Error::Incompatible("est2 needs public sphere vectors".into())),
    }
}

impl LocalProtocol for Est2Protocol {
    fn name(&self) -> &'static str {
        "est2"
    }

    fn n(&self) -> usize {
        self.n
    }

    fn universe(&self) -> DataUniverse {
        DataUniverse::Sphere { d: self.d }
    }

    fn privacy(&self) -> PrivacyParams {
        PrivacyParams::pure(self.epsilon)
    }

    fn sample_public(&self, rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::SphereVectors {
            d: self.d,
            vectors: (0..self.n).map(|_| random_unit_vector(self.d, rng)).collect(),
        })
    }

    fn randomize(&self, i: usize, x: DataRef<'_>, public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let DataRef::Vector(x) = x else {
            return Err(Error::Incompatible("est2 expects vector data".into()));
        };
        self.universe().check_vector(x)?;
        let s = &sphere_of(public)?[i];
        let dot: f64 = s.iter().zip(x).map(|(a, b)| a * b).sum();
        let w = if dot >= 0.0 { 1.0 } else { -1.0 };
        Ok(Message::Scalar(rr_sign(w, self.epsilon, rr_scale(self.epsilon), rng)))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        sphere_of(public)?;
        self.statistic(messages, public)
            .map(ProtocolOutput::Vector)
            .ok_or_else(|| Error::Incompatible("est2 expects scalar messages".into()))
    }

    fn statistic(&self, messages: &[Message], public: &PublicRandomness) -> Option<Vec<f64>> {
        let ys = scalars(messages).ok()?;
        let vectors = sphere_of(public).ok()?;
        let mut z = vec![0.0; self.d];
        for (y, s) in ys.iter().zip(vectors) {
            for (a, b) in z.iter_mut().zip(s) {
                *a += y * b;
            }
        }
        let scale = 1.0 / (sphere_gamma(self.d) * self.n as f64);
        z.iter_mut().for_each(|v| *v *= scale);
        Some(z)
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        mean_vector_truth(data)
    }

    fn plus_one_message(&self, _i: usize) -> Option<Message> {
        Some(Message::Scalar(rr_scale(self.epsilon)))
    }
}

/// HST with privately chosen sign vectors: user `i` sends the whole vector
/// `γ_i s_i` with `γ_i` the randomized `s_{i,x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalHstProtocol {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
}

impl SuboptimalHstProtocol {
    pub fn new(n: usize, d: usize, epsilon: f64) -> Result<Self> {
        check_n(n)?;
        check_epsilon_positive(epsilon)?;
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        Ok(SuboptimalHstProtocol { n, d, epsilon })
    }
}

impl LocalProtocol for SuboptimalHstProtocol {
    fn name(&self) -> &'static str {
        "suboptimal_hst"
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

    fn sample_public(&self, _rng: &mut SimRng) -> Result<PublicRandomness> {
        Ok(PublicRandomness::None)
    }

    fn randomize(&self, _i: usize, x: DataRef<'_>, _public: &PublicRandomness, rng: &mut SimRng) -> Result<Message> {
        let x = category(x, self.d)?;
        let s: Vec<f64> = (0..self.d)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let gamma = rr_sign(s[x], self.epsilon, rr_scale(self.epsilon), rng);
        Ok(Message::Vector(s.iter().map(|v| gamma * v).collect()))
    }

    fn aggregate(&self, messages: &[Message], public: &PublicRandomness, _rng: &mut SimRng) -> Result<ProtocolOutput> {
        check_messages(messages, self.n)?;
        self.statistic(messages, public)
            .map(ProtocolOutput::Vector)
            .ok_or_else(|| Error::Incompatible(format!("suboptimal_hst expects {}-vectors", self.d)))
    }

    fn statistic(&self, messages: &[Message], _public: &PublicRandomness) -> Option<Vec<f64>> {
        let mut z = vec![0.0; self.d];
        for m in messages {
            let Message::Vector(v) = m else { return None };
            if v.len() != self.d {
                return None;
            }
            for (a, b) in z.iter_mut().zip(v) {
                *a += b;
            }
        }
        z.iter_mut().for_each(|v| *v /= self.n as f64);
        Some(z)
    }

    fn ground_truth(&self, data: &Dataset, _source: &SourceDistribution) -> Result<ProtocolOutput> {
        frequencies_truth(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{run_honest_seeded, DataValue, Protocol};
    use crate::rng::seeded;

    fn mean_of(runs: &[Vec<f64>]) -> Vec<f64> {
        let t = runs.len() as f64;
        let mut m = vec![0.0; runs[0].len()];
        for r in runs {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b / t;
            }
        }
        m
    }

    fn vector_runs(p: &Protocol, source: &SourceDistribution, trials: u64) -> Vec<Vec<f64>> {
        (0..trials)
            .map(|t| {
                run_honest_seeded(p, source, 1000 + t)
                    .unwrap()
                    .output
                    .as_vector()
                    .unwrap()
                    .to_vec()
            })
            .collect()
    }

    #[test]
    fn sphere_gamma_closed_forms() {
        assert!((sphere_gamma(1) - 1.0).abs() < 1e-12);
        assert!((sphere_gamma(2) - 2.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_gamma(3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rr_mean_at_huge_epsilon_is_exact() {
        let p = Protocol::RrMean(RrMeanProtocol::new(50, 20.0).unwrap());
        let source = SourceDistribution::Constant {
            value: DataValue::Bit(1),
        };
        let mut total = 0.0;
        for t in 0..1000 {
            let run = run_honest_seeded(&p, &source, t).unwrap();
            assert_eq!(run.ground_truth, ProtocolOutput::Scalar(1.0));
            total += run.output.as_scalar().unwrap();
        }
        assert!((total / 1000.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rr_mean_rejects_zero_epsilon() {
        assert!(RrMeanProtocol::new(10, 0.0).is_err());
        assert!(RrMeanProtocol::new(0, 1.0).is_err());
    }

    #[test]
    fn est_inf_divisibility_and_unbiasedness() {
        assert!(EstInfProtocol::new(10, 3, 1.0).is_err());
        let p = Protocol::EstInf(EstInfProtocol::new(400, 4, 1.0).unwrap());
        let ones = SourceDistribution::Constant {
            value: DataValue::Vector(vec![1.0; 4]),
        };
        let runs = vector_runs(&p, &ones, 400);
        let sd = rr_scale(1.0) * (4.0f64 / 400.0).sqrt() / (400f64).sqrt();
        for v in mean_of(&runs) {
            assert!((v - 1.0).abs() < 4.0 * sd, "{v}");
        }
    }

    #[test]
    fn hst_single_user_expectation() {
        let p = Protocol::Hst(HstProtocol::new(1, 5, 1.0).unwrap());
        let source = SourceDistribution::Constant {
            value: DataValue::Category(2),
        };
        let trials = 20_000;
        let runs = vector_runs(&p, &source, trials);
        let sd = rr_scale(1.0) / (trials as f64).sqrt();
        for (j, v) in mean_of(&runs).iter().enumerate() {
            let expected = if j == 2 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 4.0 * sd, "coordinate {j}: {v}");
        }
    }

    #[test]
    fn est1_sign_handling() {
        let p = Protocol::Est1(Est1Protocol::new(200, 3, 1.0).unwrap());
        let source = SourceDistribution::Constant {
            value: DataValue::Vector(vec![0.0, -1.0, 0.0]),
        };
        let trials = 300;
        let runs = vector_runs(&p, &source, trials);
        let sd = 2.0 * rr_scale(1.0) / ((200 * trials) as f64).sqrt();
        let m = mean_of(&runs);
        assert!((m[1] + 1.0).abs() < 4.0 * sd, "{m:?}");
        assert!(m[0].abs() < 4.0 * sd && m[2].abs() < 4.0 * sd, "{m:?}");
    }

    #[test]
    fn est1_rejects_outside_l1_ball() {
        let p = Est1Protocol::new(1, 2, 1.0).unwrap();
        let mut rng = seeded(0);
        assert!(p.encode(&[0.7, 0.7], &mut rng).is_err());
        assert_eq!(p.encode(&[0.0, 0.0], &mut rng).unwrap(), 4);
    }

    #[test]
    fn est2_d1_is_signed_rr() {
        let p = Protocol::Est2(Est2Protocol::new(100, 1, 1.0).unwrap());
        let source = SourceDistribution::Constant {
            value: DataValue::Vector(vec![-1.0]),
        };
        let runs = vector_runs(&p, &source, 300);
        let sd = rr_scale(1.0) / (30_000f64).sqrt();
        assert!((mean_of(&runs)[0] + 1.0).abs() < 4.0 * sd);
    }

    #[test]
    fn est2_rejects_non_unit_inputs() {
        let p = Est2Protocol::new(1, 2, 1.0).unwrap();
        let mut rng = seeded(0);
        let public = p.sample_public(&mut rng).unwrap();
        assert!(p.randomize(0, DataRef::Vector(&[0.5, 0.5]), &public, &mut rng).is_err());
    }

    #[test]
    fn suboptimal_messages_have_magnitude_c() {
        let p = SuboptimalHstProtocol::new(3, 4, 1.0).unwrap();
        let mut rng = seeded(5);
        let m = p
            .randomize(0, DataRef::Category(1), &PublicRandomness::None, &mut rng)
            .unwrap();
        let Message::Vector(v) = m else { panic!() };
        assert!(v.iter().all(|x| (x.abs() - rr_scale(1.0)).abs() < 1e-12));
    }

    #[test]
    fn count_level_matches_per_user_mean() {
        let p = RrMeanProtocol::new(2000, 1.0).unwrap();
        let source = SourceDistribution::Rademacher { mu: 0.3 };
        let trials = 400;
        let mut fast = 0.0;
        let mut rng = seeded(9);
        for _ in 0..trials {
            let (out, _) = p.count_level(&source, &mut rng).unwrap().unwrap();
            fast += out.as_scalar().unwrap() / trials as f64;
        }
        let sd = rr_scale(1.0) / ((2000 * trials) as f64).sqrt();
        assert!((fast - 0.3).abs() < 4.0 * sd, "{fast}");
    }
}
