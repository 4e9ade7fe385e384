//! Flat `key = value` experiment configs.
//!
//! One entry per line; `#` starts a comment; grid keys take comma-separated
//! lists. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::attacks::AdversarySpec;
use crate::experiments::{ExperimentPlan, Metric, ProtocolSpec, SourceSpec};
use crate::protocols::{DataUniverse, DataValue, Dataset, HashSize};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    (
        "protocol",
        "rr_mean | est_inf | hst | est1 | est2 | raptor | hh | suboptimal_hst",
    ),
    (
        "raptor_beta",
        "failure probability of the uniformity tester (default 0.1)",
    ),
    ("hh_hash", "collision | fixed300 | explicit (default collision)"),
    ("hh_beta", "beta of the collision hash-size rule (default 0.1)"),
    ("hh_k", "hash range for hh_hash = explicit"),
    ("source", "rademacher | uniform | point | planted | csv"),
    ("source_mu", "mean of the rademacher or planted source"),
    ("source_value", "1-based value held by every user for source = point"),
    ("data_csv", "dataset file for source = csv"),
    (
        "adversary",
        "honest | rr_plus_one | input | vector_flood | finite_universe | transferred_rr_plus_one",
    ),
    (
        "adversary_value",
        "1-based replacement value for adversary = input (or +-1 for binary data)",
    ),
    ("n", "users (list)"),
    ("m", "corrupted users (list)"),
    ("d", "universe dimension (list)"),
    ("epsilon", "privacy parameter (list)"),
    ("trials", "Monte Carlo trials per grid point"),
    ("metric", "l1 | l2 | linf | scalar_abs | verdict_accuracy"),
    ("seed", "master seed"),
    ("error_bound", "a trial fails when its error exceeds this"),
    (
        "fail_rate_bound",
        "largest acceptable failure probability (checked by --assert)",
    ),
    (
        "count_level",
        "true to simulate honest points from sufficient statistics",
    ),
    ("out_csv", "CSV report path"),
    ("out_json", "JSON report path"),
    ("out_svg", "SVG plot path"),
    ("plot_var", "variable on the plot's x axis (default n)"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

/// Output destinations named in a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub plot_var: String,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value", lineno + 1));
            };
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return err(format!("unknown config key '{key}'"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        match spec.split_once('=') {
            Some((k, v)) => self.set(k.trim(), v.trim()),
            None => err(format!("override '{spec}' is not key=value")),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| ConfigError(format!("bad value '{v}' for {key}")))
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<Vec<T>, ConfigError> {
        match self.get(key) {
            None => Ok(vec![default]),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| ConfigError(format!("bad list entry '{s}' for {key}")))
                })
                .collect(),
        }
    }

    pub fn seed(&self) -> Result<Option<u64>, ConfigError> {
        self.parsed("seed")
    }

    pub fn outputs(&self) -> Outputs {
        Outputs {
            csv: self.get("out_csv").map(PathBuf::from),
            json: self.get("out_json").map(PathBuf::from),
            svg: self.get("out_svg").map(PathBuf::from),
            plot_var: self.get("plot_var").unwrap_or("n").to_string(),
        }
    }

    fn protocol(&self) -> Result<ProtocolSpec, ConfigError> {
        let name = self
            .get("protocol")
            .ok_or_else(|| ConfigError("missing key 'protocol'".into()))?;
        let mut spec = ProtocolSpec::parse(name).map_err(|e| ConfigError(e.to_string()))?;
        match &mut spec {
            ProtocolSpec::Raptor { beta } => {
                if let Some(b) = self.parsed("raptor_beta")? {
                    *beta = b;
                }
            }
            ProtocolSpec::HeavyHitters { hash } => {
                let beta = self.parsed("hh_beta")?.unwrap_or(0.1);
                *hash = match self.get("hh_hash").unwrap_or("collision") {
                    "collision" => HashSize::Collision { beta },
                    "fixed300" => HashSize::Fixed300,
                    "explicit" => HashSize::Explicit {
                        k: self
                            .parsed("hh_k")?
                            .ok_or_else(|| ConfigError("hh_hash = explicit needs hh_k".into()))?,
                    },
                    other => return err(format!("unknown hh_hash '{other}'")),
                };
            }
            _ => {}
        }
        Ok(spec)
    }

    fn universe_for_csv(&self, protocol: &ProtocolSpec, d: usize) -> DataUniverse {
        match protocol {
            ProtocolSpec::RrMean => DataUniverse::Binary,
            ProtocolSpec::EstInf => DataUniverse::LInfBall { d },
            ProtocolSpec::Est1 => DataUniverse::L1Ball { d },
            ProtocolSpec::Est2 => DataUniverse::Sphere { d },
            _ => DataUniverse::Categorical { d },
        }
    }

    fn source(&self, protocol: &ProtocolSpec, d: usize) -> Result<SourceSpec, ConfigError> {
        let mu = self.parsed("source_mu")?.unwrap_or(0.0);
        Ok(
            match self.get("source").unwrap_or(match protocol {
                ProtocolSpec::RrMean => "rademacher",
                _ => "uniform",
            }) {
                "rademacher" => SourceSpec::Rademacher { mu },
                "uniform" => SourceSpec::Uniform,
                "planted" => SourceSpec::PlantedHalf { mu },
                "point" => {
                    let v: u32 = self
                        .parsed("source_value")?
                        .ok_or_else(|| ConfigError("source = point needs source_value".into()))?;
                    if v == 0 {
                        return err("source_value is 1-based");
                    }
                    SourceSpec::PointMass { value: v - 1 }
                }
                "csv" => {
                    let path = self
                        .get("data_csv")
                        .ok_or_else(|| ConfigError("source = csv needs data_csv".into()))?;
                    let data = Dataset::from_csv(Path::new(path), self.universe_for_csv(protocol, d))
                        .map_err(|e| ConfigError(format!("{path}: {e}")))?;
                    SourceSpec::Fixed { data }
                }
                other => return err(format!("unknown source '{other}'")),
            },
        )
    }

    fn adversary(&self, protocol: &ProtocolSpec, d: usize) -> Result<AdversarySpec, ConfigError> {
        Ok(match self.get("adversary").unwrap_or("honest") {
            "honest" => AdversarySpec::Honest,
            "rr_plus_one" => AdversarySpec::RrPlusOne,
            "finite_universe" => AdversarySpec::FiniteUniverse { fixed_h: None },
            "vector_flood" => AdversarySpec::VectorFlood { direction: vec![1; d] },
            "transferred_rr_plus_one" => AdversarySpec::Transferred {
                inner: Box::new(AdversarySpec::RrPlusOne),
            },
            "input" => {
                let v: i64 = self
                    .parsed("adversary_value")?
                    .ok_or_else(|| ConfigError("adversary = input needs adversary_value".into()))?;
                let replacement = match protocol {
                    ProtocolSpec::RrMean if v == 1 || v == -1 => DataValue::Bit(v as i8),
                    ProtocolSpec::RrMean => return err("binary replacement must be +1 or -1"),
                    _ if v >= 1 => DataValue::Category((v - 1) as u32),
                    _ => return err("adversary_value is 1-based"),
                };
                AdversarySpec::InputManipulation { replacement }
            }
            other => return err(format!("unknown adversary '{other}'")),
        })
    }

    /// Builds the plan; `seed` is the already-resolved master seed.
    pub fn plan(&self, seed: u64) -> Result<ExperimentPlan, ConfigError> {
        let protocol = self.protocol()?;
        let d = self.list("d", 1usize)?;
        let first_d = d[0];
        let metric = match self.get("metric") {
            Some(m) => Metric::parse(m).map_err(|e| ConfigError(e.to_string()))?,
            None => match protocol {
                ProtocolSpec::RrMean => Metric::ScalarAbs,
                ProtocolSpec::Raptor { .. } | ProtocolSpec::HeavyHitters { .. } => Metric::VerdictAccuracy,
                ProtocolSpec::Est2 => Metric::L2,
                ProtocolSpec::Est1 | ProtocolSpec::SuboptimalHst => Metric::L1,
                _ => Metric::Linf,
            },
        };
        let mut plan = ExperimentPlan::new(protocol.clone(), self.source(&protocol, first_d)?, metric);
        plan.adversary = self.adversary(&protocol, first_d)?;
        plan.n = self.list("n", 1000usize)?;
        plan.m = self.list("m", 0usize)?;
        plan.d = d;
        plan.epsilon = self.list("epsilon", 1.0f64)?;
        plan.trials = self.parsed("trials")?.unwrap_or(200);
        plan.seed = seed;
        plan.error_bound = self.parsed("error_bound")?;
        plan.fail_rate_bound = self.parsed("fail_rate_bound")?;
        plan.count_level = self.parsed("count_level")?.unwrap_or(false);
        plan.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(plan)
    }
}
