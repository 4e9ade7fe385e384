//! Decomposing a binary-input channel into randomized response followed by
//! post-processing.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::{compose_channels, keep_probability, max_row_tv, rr_channel, rr_delta_channel, Channel, RrOutput};
use crate::error::{Error, Result};

/// Negative entries this close to zero are rounding noise and are clamped.
const CLAMP_TOLERANCE: f64 = 1e-12;
/// Largest accepted row total variation between `R` and the recomposition.
pub const RECOMPOSITION_TOLERANCE: f64 = 1e-9;

/// A channel whose inputs are the outputs of (raw) randomized response:
/// two inputs `(-1, +1)` for the pure case, four inputs `(-2, -1, +1, +2)`
/// when `delta > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostProcessor {
    channel: Channel,
}

impl PostProcessor {
    pub fn new(channel: Channel) -> Self {
        PostProcessor { channel }
    }

    pub fn channel(&self) -> &Channel {
        &self.channel
    }

    pub fn into_channel(self) -> Channel {
        self.channel
    }

    /// Input index for a randomized response output label.
    pub fn input_index(&self, rr_label: f64) -> Option<usize> {
        let labels: &[f64] = if self.channel.input_size() == 2 {
            &[-1.0, 1.0]
        } else {
            &[-2.0, -1.0, 1.0, 2.0]
        };
        labels.iter().position(|l| *l == rr_label)
    }
}

/// Finds a post-processor `P` with `P ∘ RR_{eps,delta} = R` for a channel `R`
/// on binary inputs. Fails when `R` is not `(eps, delta)`-DP (up to the
/// numerical tolerances above).
pub fn kov_decompose(r: &Channel, epsilon: f64, delta: f64) -> Result<PostProcessor> {
    if r.input_size() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: r.input_size(),
        });
    }
    let post = if delta == 0.0 {
        decompose_pure(r, epsilon)?
    } else {
        decompose_approx(r, epsilon, delta)?
    };
    let base = if delta == 0.0 {
        rr_channel(epsilon, RrOutput::Raw)?
    } else {
        rr_delta_channel(epsilon, delta)?
    };
    let recomposed = compose_channels(post.channel(), &base)?;
    let error = max_row_tv(&recomposed, r)?;
    if error > RECOMPOSITION_TOLERANCE {
        return Err(Error::DecompositionInfeasible { epsilon, delta, error });
    }
    Ok(post)
}

fn decompose_pure(r: &Channel, epsilon: f64) -> Result<PostProcessor> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!("invalid epsilon {epsilon}")));
    }
    let (minus, plus) = (r.row(0), r.row(1));
    if epsilon == 0.0 {
        let error = 0.5 * minus.iter().zip(plus).map(|(p, q)| (p - q).abs()).sum::<f64>();
        if error > RECOMPOSITION_TOLERANCE {
            return Err(Error::DecompositionInfeasible {
                epsilon,
                delta: 0.0,
                error,
            });
        }
        let post = Channel::constant(2, r.output_labels().to_vec(), plus.to_vec())?;
        return Ok(PostProcessor::new(post));
    }
    let a = keep_probability(epsilon);
    let b = 1.0 - a;
    let gap = (epsilon / 2.0).tanh();
    // Inverting [[a, b], [b, a]]: P(+1) = (a R(+1) - b R(-1)) / (a - b).
    let solve = |own: &[f64], other: &[f64]| -> Result<Vec<f64>> {
        own.iter()
            .zip(other)
            .map(|(p, q)| {
                let v = (a * p - b * q) / gap;
                if v >= 0.0 {
                    Ok(v)
                } else if v >= -CLAMP_TOLERANCE {
                    Ok(0.0)
                } else {
                    Err(Error::DecompositionInfeasible {
                        epsilon,
                        delta: 0.0,
                        error: -v,
                    })
                }
            })
            .collect()
    };
    let p_plus = solve(plus, minus)?;
    let p_minus = solve(minus, plus)?;
    let post = Channel::normalized(r.output_labels().to_vec(), vec![p_minus, p_plus])?;
    Ok(PostProcessor::new(post))
}

/// Solves for `P(+-1)` and the failure rows `F(+-2)` by a linear program that
/// minimizes the worst entry-wise recomposition error.
fn decompose_approx(r: &Channel, epsilon: f64, delta: f64) -> Result<PostProcessor> {
    if !epsilon.is_finite() || epsilon < 0.0 || !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "invalid privacy parameters ({epsilon}, {delta})"
        )));
    }
    let k = r.output_size();
    let a = keep_probability(epsilon);
    let b = 1.0 - a;
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut block = || -> Vec<_> { (0..k).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect() };
    let p_plus = block();
    let p_minus = block();
    let f_plus = block();
    let f_minus = block();
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));

    for vars in [&p_plus, &p_minus, &f_plus, &f_minus] {
        let terms: Vec<_> = vars.iter().map(|v| (*v, 1.0)).collect();
        lp.add_constraint(&terms, ComparisonOp::Eq, 1.0);
    }
    let keep = (1.0 - delta) * a;
    let flip = (1.0 - delta) * b;
    for y in 0..k {
        let rows = [
            (r.row(1)[y], [(p_plus[y], keep), (p_minus[y], flip), (f_plus[y], delta)]),
            (
                r.row(0)[y],
                [(p_plus[y], flip), (p_minus[y], keep), (f_minus[y], delta)],
            ),
        ];
        for (target, terms) in rows {
            // |sum terms - target| <= t
            let mut upper = terms.to_vec();
            upper.push((t, -1.0));
            lp.add_constraint(&upper, ComparisonOp::Le, target);
            let mut lower = terms.to_vec();
            lower.push((t, 1.0));
            lp.add_constraint(&lower, ComparisonOp::Ge, target);
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Solver(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Solver("solve interrupted".into()))?;
    let read =
        |vars: &[microlp::Variable]| -> Vec<f64> { vars.iter().map(|v| solution.var_value(*v).max(0.0)).collect() };
    // Input order follows the RR labels (-2, -1, +1, +2).
    let matrix = vec![read(&f_minus), read(&p_minus), read(&p_plus), read(&f_plus)];
    let post = Channel::normalized(r.output_labels().to_vec(), matrix)?;
    Ok(PostProcessor::new(post))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{embed_channel, measure_privacy, Epsilon, SubsetH};

    fn recompose(post: &PostProcessor, eps: f64, delta: f64) -> Channel {
        let base = if delta == 0.0 {
            rr_channel(eps, RrOutput::Raw).unwrap()
        } else {
            rr_delta_channel(eps, delta).unwrap()
        };
        compose_channels(post.channel(), &base).unwrap()
    }

    #[test]
    fn rr_decomposes_to_identity() {
        let r = rr_channel(1.0, RrOutput::Raw).unwrap();
        let post = kov_decompose(&r, 1.0, 0.0).unwrap();
        let id = Channel::identity(vec![-1.0, 1.0]).unwrap();
        assert!(max_row_tv(post.channel(), &id).unwrap() < 1e-12);
    }

    #[test]
    fn weaker_rr_decomposes() {
        let r = rr_channel(0.5, RrOutput::Raw).unwrap();
        let post = kov_decompose(&r, 1.0, 0.0).unwrap();
        assert!(max_row_tv(&recompose(&post, 1.0, 0.0), &r).unwrap() < 1e-12);
    }

    #[test]
    fn stronger_rr_is_rejected() {
        let r = rr_channel(1.5, RrOutput::Raw).unwrap();
        match kov_decompose(&r, 1.0, 0.0) {
            Err(Error::DecompositionInfeasible { .. }) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn embedded_dary_rr_decomposes_at_measured_epsilon() {
        let r = Channel::randomized_response(16, 1.0).unwrap();
        let h = SubsetH::new(16, &(0..8).collect::<Vec<_>>()).unwrap();
        let q = embed_channel(&r, &h).unwrap();
        let eps = match measure_privacy(&q, None).epsilon {
            Epsilon::Finite(e) => e,
            Epsilon::Infinite => panic!("finite expected"),
        };
        let post = kov_decompose(&q, eps, 0.0).unwrap();
        assert_eq!(post.channel().output_size(), 16);
        assert!(max_row_tv(&recompose(&post, eps, 0.0), &q).unwrap() < 1e-12);
    }

    #[test]
    fn zero_epsilon_needs_identical_rows() {
        let constant = Channel::constant(2, vec![1.0, 2.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert!(kov_decompose(&constant, 0.0, 0.0).is_ok());
        let r = rr_channel(0.1, RrOutput::Raw).unwrap();
        assert!(kov_decompose(&r, 0.0, 0.0).is_err());
    }

    #[test]
    fn approximate_case_rr_delta_is_identity_like() {
        let (eps, delta) = (0.7, 0.05);
        let r = rr_delta_channel(eps, delta).unwrap();
        let post = kov_decompose(&r, eps, delta).unwrap();
        assert_eq!(post.channel().input_size(), 4);
        assert!(max_row_tv(&recompose(&post, eps, delta), &r).unwrap() < 1e-9);
    }

    #[test]
    fn approximate_case_handles_non_pure_channel() {
        // Identity-with-leak: private only with delta > 0.
        let (eps, delta) = (0.5, 0.2);
        let r = Channel::new(vec![0.0, 1.0, 2.0], vec![vec![0.5, 0.5, 0.0], vec![0.4, 0.45, 0.15]]).unwrap();
        assert!(measure_privacy(&r, Some(eps)).delta <= delta);
        let post = kov_decompose(&r, eps, delta).unwrap();
        assert!(max_row_tv(&recompose(&post, eps, delta), &r).unwrap() < 1e-9);
    }

    #[test]
    fn approximate_case_rejects_non_private() {
        let id = Channel::identity(vec![-1.0, 1.0]).unwrap();
        assert!(kov_decompose(&id, 1.0, 0.1).is_err());
    }

    #[test]
    fn requires_binary_inputs() {
        let r = Channel::randomized_response(3, 1.0).unwrap();
        assert!(matches!(
            kov_decompose(&r, 1.0, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
