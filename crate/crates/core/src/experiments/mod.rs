//! Seeded Monte Carlo sweeps over `(n, m, d, ε)` and their error reports.

mod plot;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use plot::write_svg;

use crate::analysis::{vector_norm, Norm};
use crate::attacks::{run_manip_game, AdversarySpec, GameConfig, SignAlignedFlood};
use crate::channel::SubsetH;
use crate::error::{Error, Result};
use crate::protocols::{
    est1_protocol, est2_protocol, est_inf_protocol, hh_protocol, hst_protocol, raptor_protocol, rr_mean_protocol,
    run_honest_fast, suboptimal_hst_protocol, DataValue, Dataset, HashSize, Protocol, ProtocolOutput,
    SourceDistribution,
};
use crate::rng::{stream, trial_seed, Stream};
use crate::stats::{linear_fit, mean, median, quantile, wilson_interval};

/// Protocol family; instantiated at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ProtocolSpec {
    RrMean,
    EstInf,
    Hst,
    Est1,
    Est2,
    /// `m_budget` is the grid point's `m`.
    Raptor {
        beta: f64,
    },
    HeavyHitters {
        hash: HashSize,
    },
    SuboptimalHst,
}

impl ProtocolSpec {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "rr_mean" => ProtocolSpec::RrMean,
            "est_inf" => ProtocolSpec::EstInf,
            "hst" => ProtocolSpec::Hst,
            "est1" => ProtocolSpec::Est1,
            "est2" => ProtocolSpec::Est2,
            "raptor" => ProtocolSpec::Raptor { beta: 0.1 },
            "hh" => ProtocolSpec::HeavyHitters {
                hash: HashSize::Collision { beta: 0.1 },
            },
            "suboptimal_hst" => ProtocolSpec::SuboptimalHst,
            other => return Err(Error::Parse(format!("unknown protocol '{other}'"))),
        })
    }

    pub fn build(&self, n: usize, m: usize, d: usize, epsilon: f64) -> Result<Protocol> {
        match self {
            ProtocolSpec::RrMean => rr_mean_protocol(n, epsilon),
            ProtocolSpec::EstInf => est_inf_protocol(n, d, epsilon),
            ProtocolSpec::Hst => hst_protocol(n, d, epsilon),
            ProtocolSpec::Est1 => est1_protocol(n, d, epsilon),
            ProtocolSpec::Est2 => est2_protocol(n, d, epsilon),
            ProtocolSpec::Raptor { beta } => raptor_protocol(n, d, epsilon, *beta, m),
            ProtocolSpec::HeavyHitters { hash } => hh_protocol(n, d, *hash, epsilon),
            ProtocolSpec::SuboptimalHst => suboptimal_hst_protocol(n, d, epsilon),
        }
    }
}

/// Data source; instantiated at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SourceSpec {
    Rademacher {
        mu: f64,
    },
    Uniform,
    /// Every user holds this 0-based value.
    PointMass {
        value: u32,
    },
    /// `P_{H,mu}` with `H` a random half drawn from the plan seed.
    PlantedHalf {
        mu: f64,
    },
    Fixed {
        data: Dataset,
    },
}

impl SourceSpec {
    pub fn build(&self, d: usize, seed: u64) -> Result<SourceDistribution> {
        Ok(match self {
            SourceSpec::Rademacher { mu } => SourceDistribution::Rademacher { mu: *mu },
            SourceSpec::Uniform => SourceDistribution::uniform(d),
            SourceSpec::PointMass { value } => SourceDistribution::Constant {
                value: DataValue::Category(*value),
            },
            SourceSpec::PlantedHalf { mu } => SourceDistribution::PlantedHalf {
                h: SubsetH::random_half(d, &mut stream(seed, Stream::Public))?,
                mu: *mu,
            },
            SourceSpec::Fixed { data } => SourceDistribution::Fixed { data: data.clone() },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    L2,
    Linf,
    ScalarAbs,
    /// 0 when correct, 1 otherwise. A heavy-hitter list is correct when it
    /// contains every true heavy hitter.
    VerdictAccuracy,
}

impl Metric {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "l1" => Metric::L1,
            "l2" => Metric::L2,
            "linf" => Metric::Linf,
            "scalar_abs" | "abs" => Metric::ScalarAbs,
            "verdict" | "verdict_accuracy" | "verdict-accuracy" => Metric::VerdictAccuracy,
            other => return Err(Error::Parse(format!("unknown metric '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Linf => "linf",
            Metric::ScalarAbs => "scalar_abs",
            Metric::VerdictAccuracy => "verdict_accuracy",
        }
    }
}

/// Distance between an output and the truth under `metric`.
pub fn error_metric(output: &ProtocolOutput, truth: &ProtocolOutput, metric: Metric) -> Result<f64> {
    use ProtocolOutput as O;
    let mismatch = || Error::Incompatible(format!("metric {} does not apply to these outputs", metric.name()));
    match (output, truth, metric) {
        (O::Verdict(a), O::Verdict(b), Metric::VerdictAccuracy) => Ok((a != b) as u8 as f64),
        (O::HeavyHitterList(out), O::HeavyHitterList(truth), Metric::VerdictAccuracy) => {
            Ok(!truth.iter().all(|x| out.contains(x)) as u8 as f64)
        }
        (O::Scalar(a), O::Scalar(b), Metric::VerdictAccuracy) => Ok((a != b) as u8 as f64),
        (O::Scalar(a), O::Scalar(b), _) => Ok((a - b).abs()),
        (O::Vector(a), O::Vector(b), m) if m != Metric::ScalarAbs && m != Metric::VerdictAccuracy => {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: b.len(),
                    actual: a.len(),
                });
            }
            let norm = match m {
                Metric::L1 => Norm::L1,
                Metric::L2 => Norm::L2,
                _ => Norm::Linf,
            };
            Ok(vector_norm(a.iter().zip(b).map(|(x, y)| x - y), norm))
        }
        _ => Err(mismatch()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub protocol: ProtocolSpec,
    pub source: SourceSpec,
    pub adversary: AdversarySpec,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub d: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub trials: usize,
    pub metric: Metric,
    pub seed: u64,
    /// A trial fails when its error exceeds this.
    pub error_bound: Option<f64>,
    /// Largest acceptable failure probability, checked at the upper Wilson edge.
    pub fail_rate_bound: Option<f64>,
    /// Simulate honest (`m = 0`) points from sufficient statistics where
    /// the protocol supports it.
    pub count_level: bool,
}

impl ExperimentPlan {
    pub fn new(protocol: ProtocolSpec, source: SourceSpec, metric: Metric) -> Self {
        ExperimentPlan {
            protocol,
            source,
            adversary: AdversarySpec::Honest,
            n: vec![1000],
            m: vec![0],
            d: vec![1],
            epsilon: vec![1.0],
            trials: 200,
            metric,
            seed: 0,
            error_bound: None,
            fail_rate_bound: None,
            count_level: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.m.is_empty() || self.d.is_empty() || self.epsilon.is_empty() {
            return Err(Error::InvalidParameter("every grid needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if matches!(self.adversary, AdversarySpec::Custom(_)) {
            return Err(Error::InvalidParameter(
                "custom adversaries cannot be used in plans".into(),
            ));
        }
        Ok(())
    }

    /// Grid points in report order: `n` outermost, then `m`, `d`, `ε`.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut points = Vec::new();
        for &n in &self.n {
            for &m in &self.m {
                for &d in &self.d {
                    for &epsilon in &self.epsilon {
                        points.push(GridPoint { n, m, d, epsilon });
                    }
                }
            }
        }
        points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub epsilon: f64,
}

/// One trial's measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub error: f64,
    /// Distance between the attacked and the all-honest output.
    pub manipulation: f64,
    pub honest_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub epsilon: f64,
    pub metric: Metric,
    pub mean_err: f64,
    pub median_err: f64,
    pub q95_err: f64,
    pub manip_term_mean: f64,
    pub fail_rate: f64,
    pub fail_ci_hi: f64,
    /// Set when the point violated a precondition; the statistics are NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Swept variable: `n`, `m`, `d` or `epsilon`.
    pub variable: String,
    /// Values of the other grid variables for this fit.
    pub fixed: String,
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<GridRow>,
    pub slopes: Vec<SlopeFit>,
}

impl ErrorReport {
    /// Grid points whose upper Wilson edge exceeds the plan's failure bound.
    pub fn assertion_failures(&self, plan: &ExperimentPlan) -> Vec<&GridRow> {
        match plan.fail_rate_bound {
            Some(b) => self
                .rows
                .iter()
                .filter(|r| r.error.is_none() && (r.fail_ci_hi > b || r.fail_ci_hi.is_nan()))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn slope(&self, variable: &str) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.variable == variable)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "n",
            "m",
            "d",
            "epsilon",
            "metric",
            "mean_err",
            "median_err",
            "q95_err",
            "manip_term_mean",
            "fail_rate",
            "fail_ci_hi",
        ])
        .map_err(csv_error)?;
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                r.m.to_string(),
                r.d.to_string(),
                r.epsilon.to_string(),
                r.metric.name().to_string(),
                r.mean_err.to_string(),
                r.median_err.to_string(),
                r.q95_err.to_string(),
                r.manip_term_mean.to_string(),
                r.fail_rate.to_string(),
                r.fail_ci_hi.to_string(),
            ])
            .map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Slack allowed in the per-run triangle inequality.
const TRIANGLE_TOLERANCE: f64 = 1e-12;

fn run_trial(
    plan: &ExperimentPlan,
    protocol: &Protocol,
    source: &SourceDistribution,
    pt: &GridPoint,
    seed: u64,
) -> Result<TrialOutcome> {
    let honest_only = pt.m == 0 || matches!(plan.adversary, AdversarySpec::Honest);
    if honest_only && plan.count_level {
        let (output, truth) = run_honest_fast(protocol, source, seed)?;
        let error = error_metric(&output, &truth, plan.metric)?;
        return Ok(TrialOutcome {
            error,
            manipulation: 0.0,
            honest_error: error,
        });
    }
    let game = run_manip_game(protocol, source, &plan.adversary, &GameConfig::new(pt.n, pt.m, seed))?;
    let error = error_metric(&game.output, &game.ground_truth, plan.metric)?;
    let honest_error = error_metric(&game.honest_output, &game.ground_truth, plan.metric)?;
    let manipulation = error_metric(&game.output, &game.honest_output, plan.metric)?;
    if error > manipulation + honest_error + TRIANGLE_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "error decomposition violated: {error} > {manipulation} + {honest_error}"
        )));
    }
    Ok(TrialOutcome {
        error,
        manipulation,
        honest_error,
    })
}

fn summarize(plan: &ExperimentPlan, pt: &GridPoint, outcomes: &[TrialOutcome]) -> GridRow {
    let errs: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let manip: Vec<f64> = outcomes.iter().map(|o| o.manipulation).collect();
    let failures = match (plan.metric, plan.error_bound) {
        (_, Some(b)) => errs.iter().filter(|e| **e > b).count(),
        (Metric::VerdictAccuracy, None) => errs.iter().filter(|e| **e > 0.0).count(),
        (_, None) => 0,
    };
    let t = errs.len();
    GridRow {
        n: pt.n,
        m: pt.m,
        d: pt.d,
        epsilon: pt.epsilon,
        metric: plan.metric,
        mean_err: mean(&errs),
        median_err: median(&errs),
        q95_err: quantile(&errs, 0.95),
        manip_term_mean: mean(&manip),
        fail_rate: failures as f64 / t as f64,
        fail_ci_hi: wilson_interval(failures, t).1,
        error: None,
    }
}

fn failed_row(plan: &ExperimentPlan, pt: &GridPoint, e: &Error) -> GridRow {
    GridRow {
        n: pt.n,
        m: pt.m,
        d: pt.d,
        epsilon: pt.epsilon,
        metric: plan.metric,
        mean_err: f64::NAN,
        median_err: f64::NAN,
        q95_err: f64::NAN,
        manip_term_mean: f64::NAN,
        fail_rate: f64::NAN,
        fail_ci_hi: f64::NAN,
        error: Some(e.to_string()),
    }
}

/// Runs every grid point. Points violating a precondition are reported
/// with their error and the rest still run. Results depend only on the plan.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ErrorReport> {
    plan.validate()?;
    let grid = plan.grid();
    let setups: Vec<Result<(Protocol, SourceDistribution)>> = grid
        .iter()
        .enumerate()
        .map(|(g, pt)| {
            let protocol = plan.protocol.build(pt.n, pt.m, pt.d, pt.epsilon)?;
            let source = plan.source.build(pt.d, trial_seed(plan.seed, g as u64, u64::MAX))?;
            source.validate()?;
            Ok((protocol, source))
        })
        .collect();
    let jobs: Vec<(usize, u64)> = setups
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_ok())
        .flat_map(|(g, _)| (0..plan.trials as u64).map(move |t| (g, t)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let (protocol, source) = setups[g].as_ref().expect("filtered");
            run_trial(plan, protocol, source, &grid[g], trial_seed(plan.seed, g as u64, t))
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    let mut cursor = 0;
    for (g, pt) in grid.iter().enumerate() {
        match &setups[g] {
            Err(e) => rows.push(failed_row(plan, pt, e)),
            Ok(_) => {
                let chunk = &outcomes[cursor..cursor + plan.trials];
                cursor += plan.trials;
                match chunk.iter().cloned().collect::<Result<Vec<_>>>() {
                    Ok(o) => rows.push(summarize(plan, pt, &o)),
                    Err(e) => rows.push(failed_row(plan, pt, &e)),
                }
            }
        }
    }
    let slopes = fit_slopes(&rows);
    Ok(ErrorReport { rows, slopes })
}

/// Like [`run_plan`] on a pool of `jobs` worker threads.
pub fn run_plan_with_jobs(plan: &ExperimentPlan, jobs: usize) -> Result<ErrorReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| run_plan(plan))
}

fn fit_slopes(rows: &[GridRow]) -> Vec<SlopeFit> {
    type Key = fn(&GridRow) -> f64;
    let vars: [(&str, Key); 4] = [
        ("n", |r| r.n as f64),
        ("m", |r| r.m as f64),
        ("d", |r| r.d as f64),
        ("epsilon", |r| r.epsilon),
    ];
    let mut fits = Vec::new();
    for (vi, (name, key)) in vars.iter().enumerate() {
        let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in rows.iter().filter(|r| r.error.is_none()) {
            let fixed = vars
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != vi)
                .map(|(_, (n, k))| format!("{n}={}", k(r)))
                .collect::<Vec<_>>()
                .join(",");
            let (x, y) = (key(r), r.mean_err);
            if x <= 0.0 || y <= 0.0 || !y.is_finite() {
                continue;
            }
            match groups.iter_mut().find(|(f, _)| *f == fixed) {
                Some((_, pts)) => pts.push((x.ln(), y.ln())),
                None => groups.push((fixed, vec![(x.ln(), y.ln())])),
            }
        }
        for (fixed, pts) in groups {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Some((slope, intercept, std_error)) = linear_fit(&xs, &ys) {
                fits.push(SlopeFit {
                    variable: name.to_string(),
                    fixed,
                    slope,
                    intercept,
                    std_error,
                });
            }
        }
    }
    fits
}

/// Mean ℓ₁ manipulation of the flooded suboptimal protocol and of HST.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalityGap {
    pub l1_bias_suboptimal: f64,
    pub l1_bias_hst: f64,
    pub ratio: f64,
    /// Largest deviation of a suboptimal run's ℓ₁ bias from `c_ε m d / n`.
    pub max_deviation_from_exact: f64,
}

/// Floods the suboptimal protocol with `c_ε·(1, …, 1)` and HST with
/// messages aligned to the first coordinate's signs, comparing the ℓ₁ norms
/// of what the corrupted users inject.
pub fn suboptimality_gap(
    n: usize,
    d: usize,
    epsilon: f64,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<SuboptimalityGap> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let sub = suboptimal_hst_protocol(n, d, epsilon)?;
    let hst = hst_protocol(n, d, epsilon)?;
    let source = SourceDistribution::uniform(d);
    let flood = AdversarySpec::VectorFlood { direction: vec![1; d] };
    let aligned = AdversarySpec::Custom(std::sync::Arc::new(SignAlignedFlood { coordinate: 0, epsilon }));
    let exact = crate::channel::rr_scale(epsilon) * (m * d) as f64 / n as f64;
    let l1 = |v: Option<Vec<f64>>| -> Result<f64> {
        v.map(|v| v.iter().map(|x| x.abs()).sum())
            .ok_or_else(|| Error::Incompatible("protocol exposes no statistic".into()))
    };
    let runs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let s = run_manip_game(&sub, &source, &flood, &GameConfig::new(n, m, trial_seed(seed, 0, t)))?;
            let h = run_manip_game(&hst, &source, &aligned, &GameConfig::new(n, m, trial_seed(seed, 1, t)))?;
            Ok((l1(s.injected)?, l1(h.injected)?))
        })
        .collect::<Result<_>>()?;
    let subs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let hsts: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (a, b) = (mean(&subs), mean(&hsts));
    Ok(SuboptimalityGap {
        l1_bias_suboptimal: a,
        l1_bias_hst: b,
        ratio: a / b,
        max_deviation_from_exact: subs.iter().fold(0.0, |acc, x| acc.max((x - exact).abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        use ProtocolOutput as O;
        let d = 5;
        let mut point = vec![0.0; d];
        point[0] = 1.0;
        let u = vec![1.0 / d as f64; d];
        let l1 = error_metric(&O::Vector(point), &O::Vector(u), Metric::L1).unwrap();
        assert!((l1 - 2.0 * (1.0 - 1.0 / d as f64)).abs() < 1e-15);
        let v = O::Vector(vec![0.1, -0.2, 0.05]);
        assert_eq!(error_metric(&v, &O::Vector(vec![0.0; 3]), Metric::Linf).unwrap(), 0.2);
        assert_eq!(error_metric(&v, &v, Metric::L2).unwrap(), 0.0);
        assert!(error_metric(&v, &O::Scalar(0.0), Metric::L1).is_err());
        let hh = O::HeavyHitterList(vec![1, 4, 9]);
        assert_eq!(
            error_metric(&hh, &O::HeavyHitterList(vec![4]), Metric::VerdictAccuracy).unwrap(),
            0.0
        );
        assert_eq!(
            error_metric(&hh, &O::HeavyHitterList(vec![5]), Metric::VerdictAccuracy).unwrap(),
            1.0
        );
    }

    #[test]
    fn single_trial_matches_honest_run() {
        let mut plan = ExperimentPlan::new(
            ProtocolSpec::RrMean,
            SourceSpec::Rademacher { mu: 0.2 },
            Metric::ScalarAbs,
        );
        plan.n = vec![300];
        plan.trials = 1;
        plan.seed = 11;
        let report = run_plan(&plan).unwrap();
        let game = run_manip_game(
            &rr_mean_protocol(300, 1.0).unwrap(),
            &SourceDistribution::Rademacher { mu: 0.2 },
            &AdversarySpec::Honest,
            &GameConfig::new(300, 0, trial_seed(11, 0, 0)),
        )
        .unwrap();
        let expected = error_metric(&game.output, &game.ground_truth, Metric::ScalarAbs).unwrap();
        assert_eq!(report.rows[0].mean_err, expected);
    }

    #[test]
    fn bad_points_are_reported_and_others_run() {
        let mut plan = ExperimentPlan::new(ProtocolSpec::Hst, SourceSpec::Uniform, Metric::Linf);
        plan.n = vec![100];
        plan.d = vec![4];
        plan.epsilon = vec![-1.0, 1.0];
        plan.trials = 3;
        let r = run_plan(&plan).unwrap();
        assert!(r.rows[0].error.is_some() && r.rows[0].mean_err.is_nan());
        assert!(r.rows[1].error.is_none() && r.rows[1].mean_err.is_finite());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut plan = ExperimentPlan::new(ProtocolSpec::Hst, SourceSpec::Uniform, Metric::Linf);
        plan.n = vec![200, 400];
        plan.m = vec![0, 10];
        plan.d = vec![8];
        plan.trials = 6;
        plan.adversary = AdversarySpec::RrPlusOne;
        let a = run_plan_with_jobs(&plan, 1).unwrap().to_json().unwrap();
        let b = run_plan_with_jobs(&plan, 4).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn suboptimal_flood_is_exact_and_d1_coincides() {
        let g = suboptimality_gap(400, 1, 1.0, 20, 20, 3).unwrap();
        assert!(g.max_deviation_from_exact < 1e-12);
        assert!((g.ratio - 1.0).abs() < 1e-9, "{g:?}");
    }
}
