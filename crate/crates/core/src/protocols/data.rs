//! Data universes, datasets and data-generating sources.
//!
//! Categorical values are 0-based (`0..d`) throughout the library; the CSV
//! loader accepts the 1-based `[1, d]` convention and converts.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::SubsetH;
use crate::error::{Error, Result};

const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataUniverse {
    /// `{-1, +1}`.
    Binary,
    /// `[d]`.
    Categorical { d: usize },
    /// The unit ℓ∞ ball of `R^d`.
    LInfBall { d: usize },
    /// The unit ℓ₁ ball of `R^d`.
    L1Ball { d: usize },
    /// The unit sphere of `R^d`.
    Sphere { d: usize },
}

impl DataUniverse {
    pub fn dimension(&self) -> usize {
        match self {
            DataUniverse::Binary => 1,
            DataUniverse::Categorical { d }
            | DataUniverse::LInfBall { d }
            | DataUniverse::L1Ball { d }
            | DataUniverse::Sphere { d } => *d,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(
            self,
            DataUniverse::LInfBall { .. } | DataUniverse::L1Ball { .. } | DataUniverse::Sphere { .. }
        )
    }

    /// Checks a single vector datum against the ball or sphere constraint.
    pub fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        match self {
            DataUniverse::LInfBall { .. } => {
                if x.iter().any(|v| v.abs() > 1.0 + PROBABILITY_TOLERANCE) {
                    return Err(Error::Incompatible("vector outside the unit l-inf ball".into()));
                }
            }
            DataUniverse::L1Ball { .. } => {
                let norm: f64 = x.iter().map(|v| v.abs()).sum();
                if norm > 1.0 + PROBABILITY_TOLERANCE {
                    return Err(Error::Incompatible(format!("l1 norm {norm} exceeds 1")));
                }
            }
            DataUniverse::Sphere { .. } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::Incompatible(format!("l2 norm {norm} is not 1")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A single datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataValue {
    Bit(i8),
    Category(u32),
    Vector(Vec<f64>),
}

/// Borrowed view of one user's datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataRef<'a> {
    Bit(i8),
    Category(u32),
    Vector(&'a [f64]),
}

impl DataRef<'_> {
    pub fn to_value(self) -> DataValue {
        match self {
            DataRef::Bit(b) => DataValue::Bit(b),
            DataRef::Category(c) => DataValue::Category(c),
            DataRef::Vector(v) => DataValue::Vector(v.to_vec()),
        }
    }
}

impl DataValue {
    pub fn as_ref(&self) -> DataRef<'_> {
        match self {
            DataValue::Bit(b) => DataRef::Bit(*b),
            DataValue::Category(c) => DataRef::Category(*c),
            DataValue::Vector(v) => DataRef::Vector(v),
        }
    }
}

/// Realized data for all `n` users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Dataset {
    Binary { values: Vec<i8> },
    Categorical { d: usize, values: Vec<u32> },
    Vectors { d: usize, rows: Vec<Vec<f64>> },
}

impl Dataset {
    pub fn binary(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|v| *v != 1 && *v != -1) {
            return Err(Error::InvalidParameter("binary data must be +1 or -1".into()));
        }
        Ok(Dataset::Binary { values })
    }

    pub fn categorical(d: usize, values: Vec<u32>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v as usize >= d) {
            return Err(Error::InvalidParameter(format!("category {v} outside [0, {d})")));
        }
        Ok(Dataset::Categorical { d, values })
    }

    pub fn vectors(d: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.len(),
            });
        }
        Ok(Dataset::Vectors { d, rows })
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Binary { values } => values.len(),
            Dataset::Categorical { values, .. } => values.len(),
            Dataset::Vectors { rows, .. } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> DataRef<'_> {
        match self {
            Dataset::Binary { values } => DataRef::Bit(values[i]),
            Dataset::Categorical { values, .. } => DataRef::Category(values[i]),
            Dataset::Vectors { rows, .. } => DataRef::Vector(&rows[i]),
        }
    }

    /// Replaces user `i`'s datum. The value must have the dataset's kind.
    pub fn set(&mut self, i: usize, value: &DataValue) -> Result<()> {
        match (self, value) {
            (Dataset::Binary { values }, DataValue::Bit(b)) => values[i] = *b,
            (Dataset::Categorical { d, values }, DataValue::Category(c)) if (*c as usize) < *d => values[i] = *c,
            (Dataset::Vectors { d, rows }, DataValue::Vector(v)) if v.len() == *d => rows[i] = v.clone(),
            _ => return Err(Error::Incompatible("replacement value does not fit the dataset".into())),
        }
        Ok(())
    }

    /// Mean of binary data.
    pub fn mean_bit(&self) -> Option<f64> {
        match self {
            Dataset::Binary { values } if !values.is_empty() => {
                Some(values.iter().map(|v| *v as f64).sum::<f64>() / values.len() as f64)
            }
            _ => None,
        }
    }

    /// Empirical frequency vector of categorical data.
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        match self {
            Dataset::Categorical { d, values } if !values.is_empty() => {
                let mut f = vec![0.0; *d];
                for v in values {
                    f[*v as usize] += 1.0;
                }
                let n = values.len() as f64;
                f.iter_mut().for_each(|x| *x /= n);
                Some(f)
            }
            _ => None,
        }
    }

    /// Coordinate-wise mean of vector data.
    pub fn mean_vector(&self) -> Option<Vec<f64>> {
        match self {
            Dataset::Vectors { d, rows } if !rows.is_empty() => {
                let mut m = vec![0.0; *d];
                for r in rows {
                    for (a, b) in m.iter_mut().zip(r) {
                        *a += b;
                    }
                }
                let n = rows.len() as f64;
                m.iter_mut().for_each(|x| *x /= n);
                Some(m)
            }
            _ => None,
        }
    }

    /// Converts categorical data to one-hot vectors.
    pub fn one_hot(&self) -> Option<Dataset> {
        match self {
            Dataset::Categorical { d, values } => Some(Dataset::Vectors {
                d: *d,
                rows: values.iter().map(|v| basis_vector(*d, *v as usize)).collect(),
            }),
            _ => None,
        }
    }

    /// Loads one row per user. Binary rows hold `+1`/`-1`; categorical rows
    /// hold an integer in `[1, d]`; vector rows hold `d` reals.
    pub fn from_csv(path: &Path, universe: DataUniverse) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Io(e.to_string()))?;
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let row: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{f:?}: {e}"))))
                .collect::<Result<_>>()?;
            records.push(row);
        }
        let scalar = |row: &[f64]| -> Result<f64> {
            match row {
                [v] => Ok(*v),
                _ => Err(Error::Parse(format!("expected one value per row, got {}", row.len()))),
            }
        };
        match universe {
            DataUniverse::Binary => {
                let values = records
                    .iter()
                    .map(|r| scalar(r).map(|v| v as i8))
                    .collect::<Result<Vec<_>>>()?;
                Dataset::binary(values)
            }
            DataUniverse::Categorical { d } => {
                let values = records
                    .iter()
                    .map(|r| {
                        let v = scalar(r)?;
                        if v.fract() != 0.0 || v < 1.0 || v > d as f64 {
                            return Err(Error::Parse(format!("category {v} outside [1, {d}]")));
                        }
                        Ok(v as u32 - 1)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Dataset::categorical(d, values)
            }
            _ => {
                let d = universe.dimension();
                for r in &records {
                    universe.check_vector(r)?;
                }
                Dataset::vectors(d, records)
            }
        }
    }
}

pub fn basis_vector(d: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[j] = 1.0;
    v
}

/// Data-generating distribution. Users' data are i.i.d. draws except for
/// [`SourceDistribution::Fixed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SourceDistribution {
    /// `Rad(mu)` over `{-1, +1}`.
    Rademacher { mu: f64 },
    /// Arbitrary distribution over `[d]`.
    Categorical { probs: Vec<f64> },
    /// `P_{H,mu}`: mass `(1 + mu)/d` on `H`, `(1 - mu)/d` on its complement.
    PlantedHalf { h: SubsetH, mu: f64 },
    /// Every user holds the same value.
    Constant { value: DataValue },
    /// A fixed dataset; its length must equal the protocol's `n`.
    Fixed { data: Dataset },
}

impl SourceDistribution {
    pub fn uniform(d: usize) -> Self {
        SourceDistribution::Categorical {
            probs: vec![1.0 / d as f64; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SourceDistribution::Rademacher { mu } | SourceDistribution::PlantedHalf { mu, .. } => {
                if !(-1.0..=1.0).contains(mu) {
                    return Err(Error::InvalidParameter(format!("mean {mu} outside [-1, 1]")));
                }
            }
            SourceDistribution::Categorical { probs } => {
                if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidParameter("invalid categorical probabilities".into()));
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return Err(Error::InvalidParameter(format!(
                        "categorical probabilities sum to {sum}"
                    )));
                }
            }
            SourceDistribution::Constant {
                value: DataValue::Bit(b),
            } if *b != 1 && *b != -1 => {
                return Err(Error::InvalidParameter("binary value must be +1 or -1".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// Exact distribution over `[d]` for categorical sources.
    pub fn categorical_probs(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            SourceDistribution::Categorical { probs } if probs.len() == d => Some(probs.clone()),
            SourceDistribution::PlantedHalf { h, mu } if h.universe_size() == d => Some(
                (0..d)
                    .map(|x| {
                        let s = if h.contains(x) { 1.0 } else { -1.0 };
                        (1.0 + s * mu) / d as f64
                    })
                    .collect(),
            ),
            SourceDistribution::Constant {
                value: DataValue::Category(c),
            } if (*c as usize) < d => Some(basis_vector(d, *c as usize)),
            _ => None,
        }
    }

    /// `true` if data are i.i.d. draws, so count-level simulation applies.
    pub fn is_iid(&self) -> bool {
        !matches!(self, SourceDistribution::Fixed { .. })
    }

    /// Draws a dataset of `n` users for `universe`. Categorical sources feed
    /// vector universes through one-hot encoding.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, universe: DataUniverse, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let data = match (self, universe) {
            (SourceDistribution::Fixed { data }, _) => {
                if data.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: data.len(),
                    });
                }
                match (data, universe) {
                    (Dataset::Categorical { .. }, u) if u.is_vector() => data.one_hot().expect("categorical"),
                    _ => data.clone(),
                }
            }
            (SourceDistribution::Rademacher { mu }, DataUniverse::Binary) => {
                let p = (1.0 + mu) / 2.0;
                Dataset::Binary {
                    values: (0..n).map(|_| if rng.random::<f64>() < p { 1 } else { -1 }).collect(),
                }
            }
            (SourceDistribution::Constant { value }, u) => match (value, u) {
                (DataValue::Bit(b), DataUniverse::Binary) => Dataset::Binary { values: vec![*b; n] },
                (DataValue::Category(c), DataUniverse::Categorical { d }) => Dataset::categorical(d, vec![*c; n])?,
                (DataValue::Category(c), u) if u.is_vector() && (*c as usize) < u.dimension() => Dataset::Vectors {
                    d: u.dimension(),
                    rows: vec![basis_vector(u.dimension(), *c as usize); n],
                },
                (DataValue::Vector(v), u) if u.is_vector() => Dataset::vectors(u.dimension(), vec![v.clone(); n])?,
                _ => return Err(incompatible(self, universe)),
            },
            (_, DataUniverse::Categorical { d }) => {
                let probs = self.categorical_probs(d).ok_or_else(|| incompatible(self, universe))?;
                Dataset::Categorical {
                    d,
                    values: sample_categorical(&probs, n, rng)?,
                }
            }
            (_, u) if u.is_vector() => {
                let d = u.dimension();
                let probs = self.categorical_probs(d).ok_or_else(|| incompatible(self, universe))?;
                let values = sample_categorical(&probs, n, rng)?;
                Dataset::Vectors {
                    d,
                    rows: values.iter().map(|v| basis_vector(d, *v as usize)).collect(),
                }
            }
            _ => return Err(incompatible(self, universe)),
        };
        check_dataset(&data, universe)?;
        Ok(data)
    }
}

fn incompatible(source: &SourceDistribution, universe: DataUniverse) -> Error {
    let kind = match source {
        SourceDistribution::Rademacher { .. } => "rademacher",
        SourceDistribution::Categorical { .. } => "categorical",
        SourceDistribution::PlantedHalf { .. } => "planted_half",
        SourceDistribution::Constant { .. } => "constant",
        SourceDistribution::Fixed { .. } => "fixed",
    };
    Error::Incompatible(format!("{kind} source cannot feed universe {universe:?}"))
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], n: usize, rng: &mut R) -> Result<Vec<u32>> {
    let alias = WeightedIndex::new(probs.to_vec()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..n).map(|_| alias.sample(rng) as u32).collect())
}

/// Checks that every datum lies in `universe`.
pub fn check_dataset(data: &Dataset, universe: DataUniverse) -> Result<()> {
    match (data, universe) {
        (Dataset::Binary { .. }, DataUniverse::Binary) => Ok(()),
        (Dataset::Categorical { d, .. }, DataUniverse::Categorical { d: u }) if *d == u => Ok(()),
        (Dataset::Vectors { d, rows }, u) if u.is_vector() && *d == u.dimension() => {
            rows.iter().try_for_each(|r| universe.check_vector(r))
        }
        _ => Err(Error::Incompatible(format!(
            "dataset does not belong to universe {universe:?}"
        ))),
    }
}

/// A uniformly random point on the unit sphere of `R^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
