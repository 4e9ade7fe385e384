//! The binomial indistinguishability claim behind the randomized-response
//! attack, checked by exact PMF summation.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{indistinguishability_margin, neumaier_sum, ClaimReport, FiniteDist, IndistinguishabilityReport};
use crate::attacks::mu_threshold;
use crate::channel::keep_probability;
use crate::error::{Error, Result};

/// Multiplicative factor and additive slack of the claim.
pub const CLAIM_FACTOR: f64 = 51.0;
pub const CLAIM_SLACK: f64 = 1.0 / 3.0;

/// PMF of `Bin(n, p)` over `0..=n`, computed in log space. `p` outside
/// `(0, 1)` gives a point mass.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_n = ln_gamma(n as f64 + 1.0);
    for (k, slot) in pmf.iter_mut().enumerate() {
        let kf = k as f64;
        let nk = (n - k) as f64;
        *slot = (ln_n - ln_gamma(kf + 1.0) - ln_gamma(nk + 1.0) + kf * lp + nk * lq).exp();
    }
    pmf
}

/// PMF of `shift + Bin(trials, p)` over `0..=shift + trials`.
fn shifted_pmf(shift: usize, trials: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; shift];
    pmf.extend(binomial_pmf(trials, p));
    pmf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinomialClaimReport {
    pub n: usize,
    pub m: usize,
    /// `n >= 931` and `m <= n/8`.
    pub in_range: bool,
    /// Success probability of `W⁺`.
    pub p_plus: f64,
    /// Total mass of the `W⁺` and `W` PMFs.
    pub pmf_sums: (f64, f64),
    pub report: IndistinguishabilityReport,
}

impl BinomialClaimReport {
    pub fn margin(&self) -> f64 {
        self.report.margin
    }

    pub fn to_claim(&self) -> ClaimReport {
        let mut c = ClaimReport::new(
            "binomial",
            self.report.margin,
            !self.in_range || self.report.margin <= 0.0,
        )
        .param("n", self.n)
        .param("m", self.m)
        .param("factor", CLAIM_FACTOR)
        .param("slack", CLAIM_SLACK);
        if !self.in_range {
            c.note = Some("out-of-range: the claim covers n >= 931 and m <= n/8; margin reported only".into());
        }
        c
    }
}

/// Compares `W⁺ ~ Bin(n, ½ + m/2n + √(ln 6 / 2n))` with `W ~ m + Bin(n - m, ½)`:
/// the margin is `Σ_{k : w⁺(k) > 51 w(k)} (w⁺(k) - 51 w(k)) - 1/3`.
pub fn binomial_claim_verify(n: usize, m: usize) -> Result<BinomialClaimReport> {
    if m > n || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= m <= n and n >= 1, got n={n}, m={m}"
        )));
    }
    let nf = n as f64;
    let p_plus = 0.5 + m as f64 / (2.0 * nf) + (6f64.ln() / (2.0 * nf)).sqrt();
    let plus = binomial_pmf(n, p_plus);
    let w = shifted_pmf(m, n - m, 0.5);
    let pmf_sums = (neumaier_sum(plus.iter().copied()), neumaier_sum(w.iter().copied()));
    let report = indistinguishability_margin(
        &FiniteDist::indexed(plus)?,
        &FiniteDist::indexed(w)?,
        CLAIM_FACTOR,
        CLAIM_SLACK,
    )?;
    Ok(BinomialClaimReport {
        n,
        m,
        in_range: n >= 931 && 8 * m <= n,
        p_plus,
        pmf_sums,
        report,
    })
}

/// Distributions of the number of `+1` messages in randomized-response mean
/// estimation: all users honest on `Rad(μ(m, n, ε))`, and `m` users sending
/// `+1` while the rest are honest on `Rad(0)`.
pub fn rr_message_count_distributions(n: usize, m: usize, epsilon: f64) -> Result<(FiniteDist, FiniteDist)> {
    if m > n {
        return Err(Error::TooManyCorrupted { corrupted: m, users: n });
    }
    let (_, mu_eps) = mu_threshold(m, n, epsilon)?;
    let a = keep_probability(epsilon);
    let plus = a * (1.0 + mu_eps) / 2.0 + (1.0 - a) * (1.0 - mu_eps) / 2.0;
    Ok((
        FiniteDist::indexed(binomial_pmf(n, plus))?,
        FiniteDist::indexed(shifted_pmf(m, n - m, 0.5))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_reference_values() {
        let pmf = binomial_pmf(10, 0.3);
        // C(10,3) 0.3^3 0.7^7
        assert!((pmf[3] - 0.26682793200000005).abs() < 1e-14);
        assert_eq!(binomial_pmf(4, 1.2), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(binomial_pmf(2, 0.0), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn small_n_is_reported_out_of_range() {
        let r = binomial_claim_verify(10, 0).unwrap();
        assert!(!r.in_range);
        assert!((r.margin() - -0.276683023252193).abs() < 1e-9);
        let c = r.to_claim();
        assert!(c.pass && c.note.unwrap().contains("out-of-range"));
    }

    #[test]
    fn message_counts_match_the_claim() {
        let (n, m) = (931, 58);
        let (h, a) = rr_message_count_distributions(n, m, 1.0).unwrap();
        let direct = indistinguishability_margin(&h, &a, CLAIM_FACTOR, CLAIM_SLACK).unwrap();
        assert!((direct.margin - binomial_claim_verify(n, m).unwrap().margin()).abs() < 1e-12);
    }
}
