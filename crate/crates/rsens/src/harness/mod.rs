//! Simulation harness: synthetic data generators, oracle models with known
//! gradients, ranking metrics, and the benchmark experiments.

pub mod cv;
pub mod interactions;
pub mod main_effect;

pub use cv::{bootstrap_entropy, cv_mlpd_experiment, synthetic_concrete, CvConfig, CvRow};
pub use interactions::{
    run_interaction_experiment, run_interaction_experiment_with, InteractionConfig, PairResult,
};
pub use main_effect::{
    gen_main_effect_data, oracle_sensitivity, run_main_effect_experiment, MainEffectConfig,
    MethodComparative, OracleModel,
};

use crate::error::{Error, Result};
use crate::sensitivity::ImportanceReport;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Main-effect shape applied to a single predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectShape {
    /// x
    Linear,
    /// x³
    Cubic,
    /// x + cos(3x)
    LinCos,
    /// sin(3x)
    Sin3,
    /// x·exp(−x)
    XExp,
    /// exp(−x²)
    Bump,
}

pub const ALL_SHAPES: [EffectShape; 6] = [
    EffectShape::Linear,
    EffectShape::Cubic,
    EffectShape::LinCos,
    EffectShape::Sin3,
    EffectShape::XExp,
    EffectShape::Bump,
];

impl EffectShape {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Linear => x,
            Self::Cubic => x * x * x,
            Self::LinCos => x + (3.0 * x).cos(),
            Self::Sin3 => (3.0 * x).sin(),
            Self::XExp => x * (-x).exp(),
            Self::Bump => (-x * x).exp(),
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Cubic => 3.0 * x * x,
            Self::LinCos => 1.0 - 3.0 * (3.0 * x).sin(),
            Self::Sin3 => 3.0 * (3.0 * x).cos(),
            Self::XExp => (1.0 - x) * (-x).exp(),
            Self::Bump => -2.0 * x * (-x * x).exp(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "x" => Self::Linear,
            "x3" => Self::Cubic,
            "x-cos3x" => Self::LinCos,
            "sin3x" => Self::Sin3,
            "x-exp" => Self::XExp,
            "exp-x2" => Self::Bump,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown shape '{other}' (expected one of x, x3, x-cos3x, sin3x, x-exp, exp-x2)"
                )))
            }
        })
    }
}

impl fmt::Display for EffectShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Linear => "x",
            Self::Cubic => "x3",
            Self::LinCos => "x-cos3x",
            Self::Sin3 => "sin3x",
            Self::XExp => "x-exp",
            Self::Bump => "exp-x2",
        };
        f.write_str(s)
    }
}

/// Marginal (or joint, for the correlated case) predictor distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PredictorDist {
    /// Independent Student-t with 3 degrees of freedom.
    StudentT3,
    /// Independent standard normal.
    StdNormal,
    /// Independent equal-weight mixture of N(−2,1) and N(2,1).
    GaussMixture2,
    /// Jointly normal, unit variances, all pairwise correlations equal.
    CorrelatedGauss { rho: f64 },
}

impl PredictorDist {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "student-t3" => Self::StudentT3,
            "normal" => Self::StdNormal,
            "mixture" => Self::GaussMixture2,
            "correlated" => Self::CorrelatedGauss { rho: 0.8 },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown predictor distribution '{other}' (expected student-t3, normal, mixture, correlated)"
                )))
            }
        })
    }
}

impl fmt::Display for PredictorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StudentT3 => f.write_str("student-t3"),
            Self::StdNormal => f.write_str("normal"),
            Self::GaussMixture2 => f.write_str("mixture"),
            Self::CorrelatedGauss { .. } => f.write_str("correlated"),
        }
    }
}

/// Per-feature ranking methods compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RankMethod {
    Rsens,
    Ead,
    Aed,
    Var,
    Pd,
    Pfi,
}

impl RankMethod {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "rsens" => Self::Rsens,
            "ead" => Self::Ead,
            "aed" => Self::Aed,
            "var" => Self::Var,
            "pd" => Self::Pd,
            "pfi" => Self::Pfi,
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'")))?,
        })
    }
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Rsens => "rsens",
            Self::Ead => "ead",
            Self::Aed => "aed",
            Self::Var => "var",
            Self::Pd => "pd",
            Self::Pfi => "pfi",
        };
        f.write_str(s)
    }
}

/// Pairwise interaction methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairMethod {
    Rsens2,
    Eah,
    Pd,
    Hs,
}

impl PairMethod {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "rsens2" => Self::Rsens2,
            "eah" => Self::Eah,
            "pd" => Self::Pd,
            "hs" => Self::Hs,
            other => Err(Error::InvalidConfig(format!("unknown pair method '{other}'")))?,
        })
    }
}

impl fmt::Display for PairMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Rsens2 => "rsens2",
            Self::Eah => "eah",
            Self::Pd => "pd",
            Self::Hs => "hs",
        };
        f.write_str(s)
    }
}

/// Mean with a 95% normal-approximation half width (1.96·SE).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanInterval {
    pub mean: f64,
    pub half_width: f64,
}

impl MeanInterval {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("MeanInterval::from_samples"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let half_width = if samples.len() < 2 {
            0.0
        } else {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        };
        Ok(Self { mean, half_width })
    }

    pub fn excludes_zero(&self) -> bool {
        self.mean.abs() > self.half_width
    }
}

/// Mean absolute rank deviation from the true ranking.
pub fn ranking_error(
    estimated: &ImportanceReport<usize>,
    true_ranks: &BTreeMap<usize, usize>,
) -> Result<f64> {
    if estimated.ranks.len() != true_ranks.len()
        || !estimated.ranks.keys().eq(true_ranks.keys())
    {
        return Err(Error::Data("estimated and true rankings cover different keys".into()));
    }
    let n = true_ranks.len() as f64;
    Ok(estimated
        .ranks
        .iter()
        .map(|(k, r)| (*r as f64 - true_ranks[k] as f64).abs())
        .sum::<f64>()
        / n)
}

/// Derive an independent per-task seed from a base seed and task index.
pub(crate) fn task_seed(base: u64, index: u64) -> u64 {
    // splitmix64 step keeps per-task streams decorrelated
    let mut z = base.wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
