use serde::{Deserialize, Serialize};

use crate::metrics::MetricPair;

/// Which metric is maximized and which one is floored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Maximize SMI subject to a rate floor.
    P1,
    /// Maximize rate subject to an SMI floor.
    P2,
}

impl Mode {
    /// The mode with objective and floor exchanged.
    pub fn other(self) -> Self {
        match self {
            Mode::P1 => Mode::P2,
            Mode::P2 => Mode::P1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::P1 => "p1",
            Mode::P2 => "p2",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(Mode::P1),
            "p2" => Ok(Mode::P2),
            other => Err(format!("unknown mode `{other}` (expected p1 or p2)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A mode together with its constraint level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub mode: Mode,
    pub level: f64,
}

impl Problem {
    pub fn p1(rate_floor: f64) -> Self {
        Self {
            mode: Mode::P1,
            level: rate_floor,
        }
    }

    pub fn p2(smi_floor: f64) -> Self {
        Self {
            mode: Mode::P2,
            level: smi_floor,
        }
    }

    /// Pick `(objective, constraint)` out of `(smi, rate)`.
    #[inline]
    pub fn split(&self, smi: f64, rate: f64) -> (f64, f64) {
        match self.mode {
            Mode::P1 => (smi, rate),
            Mode::P2 => (rate, smi),
        }
    }

    pub fn objective(&self, pair: &MetricPair) -> f64 {
        self.split(pair.smi, pair.rate).0
    }

    pub fn constraint(&self, pair: &MetricPair) -> f64 {
        self.split(pair.smi, pair.rate).1
    }

    /// Absolute slack granted on the floor.
    pub fn slack(&self, rel: f64) -> f64 {
        rel * self.level.abs() + 1e-12
    }

    pub fn satisfied(&self, constraint: f64, rel: f64) -> bool {
        constraint >= self.level - self.slack(rel)
    }
}
