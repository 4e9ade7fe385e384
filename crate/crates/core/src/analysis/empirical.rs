//! Monte Carlo indistinguishability of honest and attacked protocol runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IndistinguishabilityReport, Witness};
use crate::attacks::{run_manip_game, AdversarySpec, GameConfig};
use crate::error::{Error, Result};
use crate::protocols::{run_honest_fast, Protocol, ProtocolOutput, SourceDistribution, Verdict};
use crate::rng::trial_seed;
use crate::stats::wilson_interval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSetup {
    /// Corrupted users in the attacked world.
    pub m: usize,
    pub trials: usize,
    pub factor: f64,
    pub slack: f64,
    pub seed: u64,
}

/// The two failure rates of a uniformity tester under attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictFailures {
    /// Honest run on the non-uniform source answering "uniform".
    pub honest_uniform: f64,
    pub honest_uniform_ci: (f64, f64),
    /// Attacked run on the uniform source answering "not uniform".
    pub attacked_not_uniform: f64,
    pub attacked_not_uniform_ci: (f64, f64),
}

impl VerdictFailures {
    /// At least one failure occurs at its predicted rate (1/80 honest,
    /// 1/120 attacked).
    pub fn attack_succeeds(&self) -> bool {
        self.honest_uniform >= 1.0 / 80.0 || self.attacked_not_uniform >= 1.0 / 120.0
    }
}

fn as_scalar(out: &ProtocolOutput) -> Result<f64> {
    match out {
        ProtocolOutput::Scalar(x) => Ok(*x),
        ProtocolOutput::Verdict(Verdict::Uniform) => Ok(1.0),
        ProtocolOutput::Verdict(Verdict::NotUniform) => Ok(0.0),
        _ => Err(Error::Incompatible(
            "threshold tests need scalar or verdict outputs; reduce vector outputs to a statistic first".into(),
        )),
    }
}

/// Estimates `sup_t P_honest(T_t) - c·P_attacked(T_t) - slack` over the
/// threshold events `{Z >= t}` and `{Z <= t}`, where the honest world runs
/// the protocol on `source_honest` and the attacked world lets `adversary`
/// corrupt `m` users on `source_attacked`.
///
/// `confidence` is the 95% Wilson allowance on the witness event: the
/// honest upper edge minus its estimate plus `c` times the attacked
/// estimate minus its lower edge.
pub fn attack_indistinguishability_test(
    protocol: &Protocol,
    adversary: &AdversarySpec,
    source_honest: &SourceDistribution,
    source_attacked: &SourceDistribution,
    setup: &EmpiricalSetup,
) -> Result<(IndistinguishabilityReport, Option<VerdictFailures>)> {
    let t = setup.trials;
    if t == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let n = protocol.n();
    let honest: Vec<ProtocolOutput> = (0..t as u64)
        .into_par_iter()
        .map(|i| run_honest_fast(protocol, source_honest, trial_seed(setup.seed, 0, i)).map(|r| r.0))
        .collect::<Result<_>>()?;
    let attacked: Vec<ProtocolOutput> = (0..t as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = GameConfig::new(n, setup.m, trial_seed(setup.seed, 1, i));
            run_manip_game(protocol, source_attacked, adversary, &cfg).map(|r| r.output)
        })
        .collect::<Result<_>>()?;

    let mut zh: Vec<f64> = honest.iter().map(as_scalar).collect::<Result<_>>()?;
    let mut za: Vec<f64> = attacked.iter().map(as_scalar).collect::<Result<_>>()?;
    zh.sort_by(f64::total_cmp);
    za.sort_by(f64::total_cmp);
    let tf = t as f64;
    let at_least = |z: &[f64], x: f64| z.len() - z.partition_point(|v| *v < x);
    let at_most = |z: &[f64], x: f64| z.partition_point(|v| *v <= x);

    let mut candidates: Vec<f64> = zh.iter().chain(&za).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut best, mut witness, mut counts) = (0.0f64, Witness::Empty, (0usize, 0usize));
    for &x in &candidates {
        for upper in [true, false] {
            let (h, a) = if upper {
                (at_least(&zh, x), at_least(&za, x))
            } else {
                (at_most(&zh, x), at_most(&za, x))
            };
            let gain = h as f64 / tf - setup.factor * a as f64 / tf;
            if gain > best {
                best = gain;
                witness = Witness::Threshold { threshold: x, upper };
                counts = (h, a);
            }
        }
    }
    let (ph, pa) = (counts.0 as f64 / tf, counts.1 as f64 / tf);
    let confidence = (wilson_interval(counts.0, t).1 - ph) + setup.factor * (pa - wilson_interval(counts.1, t).0);
    let report = IndistinguishabilityReport {
        factor: setup.factor,
        slack: setup.slack,
        margin: best - setup.slack,
        witness_size: counts.0.max(counts.1),
        witness,
        p_mass: ph,
        q_mass: pa,
        confidence: Some(confidence),
        trials: Some(t),
    };

    let verdicts = matches!(honest[0], ProtocolOutput::Verdict(_)).then(|| {
        let hu = zh.iter().filter(|z| **z == 1.0).count();
        let an = za.iter().filter(|z| **z == 0.0).count();
        VerdictFailures {
            honest_uniform: hu as f64 / tf,
            honest_uniform_ci: wilson_interval(hu, t),
            attacked_not_uniform: an as f64 / tf,
            attacked_not_uniform_ci: wilson_interval(an, t),
        }
    });
    Ok((report, verdicts))
}
