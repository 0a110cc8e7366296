use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::FitResult;
use crate::sum::exact_sum;

/// A table of numbers with named columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    #[serde(with = "lossless::rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV with a header line; numbers use the shortest representation that
    /// round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// JSON has no NaN or infinity; those are written as the strings `"NaN"`,
/// `"inf"` and `"-inf"` so reports survive a round trip.
mod lossless {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Num {
        Finite(f64),
        Special(String),
    }

    fn encode(v: f64) -> Num {
        match v {
            v if v.is_finite() => Num::Finite(v),
            v if v.is_nan() => Num::Special("NaN".into()),
            v if v > 0.0 => Num::Special("inf".into()),
            _ => Num::Special("-inf".into()),
        }
    }

    fn decode<E: serde::de::Error>(n: Num) -> Result<f64, E> {
        match n {
            Num::Finite(v) => Ok(v),
            Num::Special(s) => match s.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("not a number: `{other}`"))),
            },
        }
    }

    pub mod scalar {
        use super::*;

        pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
            encode(*v).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            decode(Num::deserialize(d)?)
        }
    }

    pub mod rows {
        use super::*;

        pub fn serialize<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            let encoded: Vec<Vec<Num>> = rows.iter().map(|r| r.iter().map(|v| encode(*v)).collect()).collect();
            encoded.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Vec::<Vec<Num>>::deserialize(d)?
                .into_iter()
                .map(|r| r.into_iter().map(decode::<D::Error>).collect())
                .collect()
        }
    }
}

/// Elementwise mean of equally shaped series, summing seeds in a fixed
/// order with correct rounding.
pub fn mean_series(all: &[Series]) -> Series {
    let Some(first) = all.first() else {
        return Series::default();
    };
    let mut out = Series::new(first.columns.clone());
    for r in 0..first.rows.len() {
        let row = (0..first.columns.len())
            .map(|j| exact_sum(all.iter().map(|s| s.rows[r][j])) / all.len() as f64)
            .collect();
        out.push(row);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Comparison {
    AtMost { limit: f64 },
    AtLeast { limit: f64 },
    Within { low: f64, high: f64 },
    Finite,
}

impl Comparison {
    pub fn holds(&self, x: f64) -> bool {
        match *self {
            Comparison::AtMost { limit } => x <= limit,
            Comparison::AtLeast { limit } => x >= limit,
            Comparison::Within { low, high } => (low..=high).contains(&x),
            Comparison::Finite => x.is_finite(),
        }
    }
}

/// A named pass/fail gate with the measured value it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    #[serde(with = "lossless::scalar")]
    pub measured: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Verdict {
    pub fn new(name: impl Into<String>, measured: f64, comparison: Comparison) -> Self {
        Self {
            name: name.into(),
            measured,
            passed: comparison.holds(measured),
            comparison,
        }
    }

    pub fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self::new(name, measured, Comparison::AtMost { limit })
    }

    pub fn at_least(name: &str, measured: f64, limit: f64) -> Self {
        Self::new(name, measured, Comparison::AtLeast { limit })
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let rule = match self.comparison {
            Comparison::AtMost { limit } => format!("<= {limit}"),
            Comparison::AtLeast { limit } => format!(">= {limit}"),
            Comparison::Within { low, high } => format!("in [{low}, {high}]"),
            Comparison::Finite => "finite".to_string(),
        };
        write!(f, "[{status}] {}: {} {rule}", self.name, self.measured)
    }
}

/// Per-seed raw data of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSeries {
    pub seed: u64,
    pub series: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: serde_json::Value,
    pub seed_count: usize,
    pub per_seed: Vec<SeedSeries>,
    /// Seed-averaged series keyed by name; the CLI writes each one to
    /// `<name>.csv`.
    pub aggregated: BTreeMap<String, Series>,
    pub thresholds: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, FitResult>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn new(name: &str, config: serde_json::Value) -> Self {
        Self {
            name: name.to_string(),
            config,
            seed_count: 0,
            per_seed: Vec::new(),
            aggregated: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            fits: BTreeMap::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
            wall_time: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn threshold(&self, key: &str) -> crate::Result<f64> {
        self.thresholds
            .get(key)
            .copied()
            .ok_or_else(|| crate::Error::Input(format!("report has no threshold `{key}`")))
    }

    pub fn series(&self, key: &str) -> crate::Result<&Series> {
        self.aggregated
            .get(key)
            .ok_or_else(|| crate::Error::Input(format!("report has no series `{key}`")))
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}
