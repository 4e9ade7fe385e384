//! The `ldpm` command line.
//!
//! Exit codes: 0 success, 1 runtime failure or failed claim, 2 usage or
//! config error, 3 a `--assert`ed bound failed.

pub mod config;

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::analysis::{
    attack_indistinguishability_test, binomial_claim_verify, embedding_privacy_survey, kov_round_trip, ClaimReport,
    EmpiricalSetup,
};
use crate::attacks::{mu_threshold, run_manip_game, AdversarySpec, GameConfig};
use crate::channel::{
    compose_channels, embed_channel, kov_decompose, measure_privacy, rr_channel, rr_delta_channel, Channel, Epsilon,
    PostProcessor, PrivacyParams, RrOutput, SubsetH,
};
use crate::experiments::{run_plan, write_svg};
use crate::protocols::{rr_mean_protocol, SourceDistribution};
use crate::rng::{seeded, trial_seed};
use config::{Config, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ldpm", version, about = "Local differential privacy under manipulation")]
pub struct Cli {
    /// Worker threads for Monte Carlo work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment sweep described by a config file.
    Simulate {
        config: PathBuf,
        /// `key=value` config overrides.
        #[arg(short = 'D', long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Write an SVG plot of mean error to this path.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Exit 3 when a failure-rate bound fails at the upper Wilson edge.
        #[arg(long)]
        assert: bool,
    },
    /// Check a claim: binomial, kov, amplification or attack-indist.
    Verify {
        claim: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        num_h: Option<usize>,
        /// Users, for the independent amplification bound.
        #[arg(long)]
        users: Option<usize>,
        /// Largest output alphabet of random channels in the kov check.
        #[arg(long)]
        outputs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build, measure, decompose, compose and embed channels (JSON in/out).
    #[command(subcommand)]
    Channel(ChannelCommand),
    /// Play one manipulation game at the first grid point of a config and
    /// print the result.
    Attack {
        config: PathBuf,
        #[arg(short = 'D', long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ChannelCommand {
    /// Randomized response: binary (labels -1, +1), d-ary with --d, or
    /// with failure probability --delta.
    Rr {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        /// Labels `-c_eps, +c_eps` instead of `-1, +1`.
        #[arg(long)]
        rescaled: bool,
    },
    /// Randomized response failing with probability delta (labels -2, -1, 1, 2).
    RrDelta {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Smallest pure epsilon, or smallest delta at --eps.
    Measure {
        #[arg(long)]
        eps: Option<f64>,
        /// Channel JSON; standard input when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Post-processor turning randomized response into the input channel.
    Decompose {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Applies --post after --base (or after randomized response at --eps).
    Compose {
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// The binary embedding through a subset H of [d] (1-based members).
    Embed {
        #[arg(long)]
        d: usize,
        #[arg(long = "H", value_delimiter = ',')]
        h: Vec<usize>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Assertion(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignored when a global pool already exists (repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let outcome = match cli.command {
        Command::Simulate {
            config,
            overrides,
            seed,
            trials,
            out_csv,
            out_json,
            plot,
            assert,
        } => cmd_simulate(&config, &overrides, seed, trials, out_csv, out_json, plot, assert),
        Command::Verify {
            claim,
            n,
            m,
            eps,
            trials,
            d,
            num_h,
            users,
            outputs,
            seed,
        } => cmd_verify(
            &claim,
            VerifyArgs {
                n,
                m,
                eps,
                trials,
                d,
                num_h,
                users,
                outputs,
                seed,
            },
        ),
        Command::Channel(cmd) => cmd_channel(cmd),
        Command::Attack {
            config,
            overrides,
            seed,
            out,
        } => cmd_attack(&config, &overrides, seed, out),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            EXIT_ASSERT
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("LDPM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("LDPM_SEED must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Flag, then config, then `LDPM_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, cfg: Option<&Config>) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.map(Config::seed).transpose()?.flatten() {
        return Ok(s);
    }
    Ok(env_seed()?.unwrap_or(0))
}

fn load_config(path: &Path, overrides: &[String]) -> Result<Config, Failure> {
    let mut cfg = Config::load(path)?;
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn check_writable(path: &Path) -> Result<(), Failure> {
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(|_| ())
        .map_err(|e| Failure::Config(format!("{} is not writable: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    config: &Path,
    overrides: &[String],
    seed: Option<u64>,
    trials: Option<usize>,
    out_csv: Option<PathBuf>,
    out_json: Option<PathBuf>,
    plot: Option<PathBuf>,
    assert: bool,
) -> Result<i32, Failure> {
    let mut cfg = load_config(config, overrides)?;
    if let Some(t) = trials {
        cfg.set("trials", &t.to_string())?;
    }
    let seed = resolve_seed(seed, Some(&cfg))?;
    let plan = cfg.plan(seed)?;
    let mut outputs = cfg.outputs();
    outputs.csv = out_csv.or(outputs.csv);
    outputs.json = out_json.or(outputs.json);
    outputs.svg = plot.or(outputs.svg);
    for p in [&outputs.csv, &outputs.json, &outputs.svg].into_iter().flatten() {
        check_writable(p)?;
    }

    let report = run_plan(&plan)?;
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "grid point n={} m={} d={} epsilon={} skipped: {}",
            row.n,
            row.m,
            row.d,
            row.epsilon,
            row.error.as_deref().unwrap_or("")
        );
    }
    match &outputs.csv {
        Some(p) => report.write_csv_file(p)?,
        None => report.write_csv(std::io::stdout())?,
    }
    if let Some(p) = &outputs.json {
        std::fs::write(p, report.to_json()?).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &outputs.svg {
        write_svg(&report, &outputs.plot_var, p)?;
    }
    if assert {
        if plan.fail_rate_bound.is_none() {
            return Err(Failure::Config("--assert needs fail_rate_bound".into()));
        }
        let bad = report.assertion_failures(&plan);
        if !bad.is_empty() {
            let worst = bad.iter().map(|r| r.fail_ci_hi).fold(0.0, f64::max);
            return Err(Failure::Assertion(format!(
                "{} grid point(s) exceed the failure bound {} (largest upper Wilson edge {worst})",
                bad.len(),
                plan.fail_rate_bound.unwrap_or_default()
            )));
        }
    }
    Ok(EXIT_OK)
}

pub struct VerifyArgs {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub eps: Option<f64>,
    pub trials: Option<usize>,
    pub d: Option<usize>,
    pub num_h: Option<usize>,
    pub users: Option<usize>,
    pub outputs: Option<usize>,
    pub seed: Option<u64>,
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?);
    Ok(())
}

fn cmd_verify(claim: &str, a: VerifyArgs) -> Result<i32, Failure> {
    let seed = resolve_seed(a.seed, None)?;
    let report: ClaimReport = match claim {
        "binomial" => {
            let n = a.n.unwrap_or(931);
            binomial_claim_verify(n, a.m.unwrap_or(0))?.to_claim()
        }
        "kov" => {
            let eps = a.eps.unwrap_or(1.0);
            let trials = a.trials.unwrap_or(100);
            let outputs = a.outputs.unwrap_or(8);
            let base = ClaimReport::new("kov", f64::NAN, false)
                .param("epsilon", eps)
                .param("trials", trials)
                .param("max_outputs", outputs)
                .param("seed", seed);
            match kov_round_trip(eps, trials, outputs, &mut seeded(seed)) {
                Ok(worst) => ClaimReport {
                    margin_or_fraction: worst,
                    pass: worst <= crate::channel::RECOMPOSITION_TOLERANCE,
                    ..base
                },
                Err(e) => ClaimReport {
                    note: Some(e.to_string()),
                    ..base
                },
            }
        }
        "amplification" => {
            let d = a.d.unwrap_or(256);
            let eps = a.eps.unwrap_or(0.5);
            let ch = Channel::randomized_response(d, eps)?;
            let r = embedding_privacy_survey(
                &[ch],
                d,
                a.num_h.unwrap_or(200),
                a.users.unwrap_or(1),
                &mut seeded(seed),
            )?;
            r.to_claim().param("seed", seed)
        }
        "attack-indist" => {
            let n = a.n.unwrap_or(1000);
            let m = a.m.unwrap_or(100);
            let eps = a.eps.unwrap_or(1.0);
            let trials = a.trials.unwrap_or(10_000);
            let (_, mu_eps) = mu_threshold(m, n, eps)?;
            let setup = EmpiricalSetup {
                m,
                trials,
                factor: 51.0,
                slack: 1.0 / 3.0,
                seed,
            };
            let (r, _) = attack_indistinguishability_test(
                &rr_mean_protocol(n, eps)?,
                &AdversarySpec::RrPlusOne,
                &SourceDistribution::Rademacher { mu: mu_eps },
                &SourceDistribution::Rademacher { mu: 0.0 },
                &setup,
            )?;
            let mut c = ClaimReport::new("attack-indist", r.margin, r.holds(3.0))
                .param("n", n)
                .param("m", m)
                .param("epsilon", eps)
                .param("trials", trials)
                .param("factor", 51.0)
                .param("slack", 1.0 / 3.0)
                .param("seed", seed);
            c.confidence = r.confidence;
            c
        }
        other => {
            return Err(Failure::Config(format!(
                "unknown claim '{other}' (expected binomial, kov, amplification or attack-indist)"
            )))
        }
    };
    print_json(&report)?;
    if let Some(note) = &report.note {
        eprintln!("note: {note}");
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILURE })
}

fn read_input(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .context("reading standard input")?;
            Ok(s)
        }
    }
}

/// Accepts a bare channel document or any emitted artifact wrapping one
/// under `channel`.
fn parse_channel(text: &str) -> anyhow::Result<Channel> {
    let mut v: serde_json::Value = serde_json::from_str(text).context("parsing channel JSON")?;
    while v.get("matrix").is_none() {
        v = v
            .get("channel")
            .cloned()
            .ok_or_else(|| anyhow!("no channel found (expected input_size, output_labels, matrix)"))?;
    }
    Ok(Channel::from_json(&v.to_string())?)
}

fn privacy_json(p: &PrivacyParams) -> serde_json::Value {
    let eps = match p.epsilon {
        Epsilon::Finite(e) => json!(e),
        Epsilon::Infinite => json!("inf"),
    };
    json!({ "epsilon": eps, "delta": p.delta })
}

fn emit_channel(ch: &Channel, extra: Option<(&str, serde_json::Value)>) -> Result<i32, Failure> {
    let mut doc = serde_json::to_value(ch).map_err(anyhow::Error::from)?;
    if let (Some((k, v)), Some(obj)) = (extra, doc.as_object_mut()) {
        obj.insert(k.to_string(), v);
    }
    print_json(&doc)?;
    Ok(EXIT_OK)
}

fn cmd_channel(cmd: ChannelCommand) -> Result<i32, Failure> {
    match cmd {
        ChannelCommand::Rr {
            eps,
            d,
            delta,
            rescaled,
        } => {
            let ch = match (d, delta) {
                (Some(_), Some(_)) => return Err(Failure::Config("--d and --delta cannot be combined".into())),
                (Some(d), None) => Channel::randomized_response(d, eps)?,
                (None, Some(delta)) => rr_delta_channel(eps, delta)?,
                (None, None) => rr_channel(eps, if rescaled { RrOutput::Rescaled } else { RrOutput::Raw })?,
            };
            emit_channel(&ch, None)
        }
        ChannelCommand::RrDelta { eps, delta } => emit_channel(&rr_delta_channel(eps, delta)?, None),
        ChannelCommand::Measure { eps, input } => {
            let ch = parse_channel(&read_input(input.as_deref())?)?;
            print_json(&privacy_json(&measure_privacy(&ch, eps)))?;
            Ok(EXIT_OK)
        }
        ChannelCommand::Decompose { eps, delta, input } => {
            let ch = parse_channel(&read_input(input.as_deref())?)?;
            let post = kov_decompose(&ch, eps, delta)?;
            print_json(&json!({ "epsilon": eps, "delta": delta, "channel": post.channel() }))?;
            Ok(EXIT_OK)
        }
        ChannelCommand::Compose { post, base, eps, delta } => {
            let post = PostProcessor::new(parse_channel(&read_input(Some(&post))?)?);
            let base = match (base, eps) {
                (Some(p), _) => parse_channel(&read_input(Some(&p))?)?,
                (None, Some(e)) => match delta {
                    Some(d) if d > 0.0 => rr_delta_channel(e, d)?,
                    _ => rr_channel(e, RrOutput::Raw)?,
                },
                (None, None) => return Err(Failure::Config("compose needs --base or --eps".into())),
            };
            emit_channel(&compose_channels(post.channel(), &base)?, None)
        }
        ChannelCommand::Embed { d, h, input } => {
            if h.iter().any(|x| *x == 0 || *x > d) {
                return Err(Failure::Config(format!("--H members must lie in 1..={d}")));
            }
            let members: Vec<usize> = h.iter().map(|x| x - 1).collect();
            let subset = SubsetH::new(d, &members)?;
            let ch = parse_channel(&read_input(input.as_deref())?)?;
            let q = embed_channel(&ch, &subset)?;
            let privacy = privacy_json(&measure_privacy(&q, None));
            emit_channel(&q, Some(("privacy", privacy)))
        }
    }
}

fn cmd_attack(config: &Path, overrides: &[String], seed: Option<u64>, out: Option<PathBuf>) -> Result<i32, Failure> {
    let cfg = load_config(config, overrides)?;
    let seed = resolve_seed(seed, Some(&cfg))?;
    let plan = cfg.plan(seed)?;
    let pt = plan.grid()[0];
    if let Some(p) = &out {
        check_writable(p)?;
    }
    let protocol = plan.protocol.build(pt.n, pt.m, pt.d, pt.epsilon)?;
    let source = plan.source.build(pt.d, trial_seed(seed, 0, u64::MAX))?;
    let adversary = match &plan.adversary {
        AdversarySpec::FiniteUniverse { fixed_h } => {
            crate::attacks::finite_universe_adversary(&protocol, fixed_h.clone())?
        }
        AdversarySpec::Transferred { inner } => crate::attacks::transferred_attack(&protocol, (**inner).clone())?,
        other => other.clone(),
    };
    let result = run_manip_game(
        &protocol,
        &source,
        &adversary,
        &GameConfig::new(pt.n, pt.m, trial_seed(seed, 0, 0)),
    )?;
    let text = serde_json::to_string_pretty(&result).map_err(anyhow::Error::from)?;
    match out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(EXIT_OK)
}
