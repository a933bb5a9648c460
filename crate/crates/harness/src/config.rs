//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use uepmm_core::analytics::ClassVariances;
use uepmm_core::coding::{Combining, Family, UepCode, WindowDistribution};
use uepmm_core::decoding::DecodeMode;
use uepmm_core::galois::{Field, FieldSpec};
use uepmm_core::importance::{product_classes, ClassMap, ClassTable, LevelAssignment};
use uepmm_core::latency::LatencyModel;
use uepmm_core::synth::GaussianClassSpec;
use uepmm_core::tensor::BlockPartition;
use uepmm_core::Rational;

use crate::HarnessError;

pub const DEFAULT_TRIALS: usize = 10_000;

/// `0, 0.075, …, 1.05`
pub fn default_times() -> Vec<f64> {
    (0..15).map(|i| (i as f64 * 0.075 * 1e6).round() / 1e6).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub family: Family,
    #[serde(default)]
    pub gamma: Option<Vec<f64>>,
    pub workers: usize,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default)]
    pub combining: Combining,
}

/// Levels of the factor blocks, the class table, and per-level variances.
/// Levels and classes are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub a_levels: Vec<usize>,
    pub b_levels: Vec<usize>,
    pub table: ClassTable,
    pub a_variances: Vec<f64>,
    pub b_variances: Vec<f64>,
    /// Re-rank the generated blocks by norm instead of trusting the layout.
    #[serde(default)]
    pub classify_by_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub partition: BlockPartition,
    pub code: CodeConfig,
    pub latency: LatencyModel<f64>,
    pub classes: ClassConfig,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub decode_mode: DecodeMode,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// Everything derived from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub code: UepCode<f64>,
    pub field: Field,
    pub levels: LevelAssignment,
    pub variances: ClassVariances<f64>,
    pub synth: GaussianClassSpec<f64>,
    pub times: Vec<f64>,
}

impl ExperimentConfig {
    /// Three-tier r×c setup: N = P = 3, U = Q = 300, H = 900, variances
    /// (10, 1, 0.1), 30 workers, Γ = (0.4, 0.35, 0.25), unit-rate
    /// exponential latency.
    pub fn three_tier_rxc() -> Self {
        ExperimentConfig {
            partition: BlockPartition::rxc(3, 3, 300, 900, 300).expect("valid"),
            code: CodeConfig {
                family: Family::Now,
                gamma: Some(vec![0.4, 0.35, 0.25]),
                workers: 30,
                field: FieldSpec::gf65536(),
                combining: Combining::SubProduct,
            },
            latency: LatencyModel::exponential(1.0, Rational::from_integer(1)).expect("valid"),
            classes: ClassConfig {
                a_levels: vec![0, 1, 2],
                b_levels: vec![0, 1, 2],
                table: ClassTable::three_tier_rxc(),
                a_variances: vec![10.0, 1.0, 0.1],
                b_variances: vec![10.0, 1.0, 0.1],
                classify_by_norm: false,
            },
            times: None,
            trials: DEFAULT_TRIALS,
            seed: 1,
            decode_mode: DecodeMode::RankOracle,
            threads: None,
            output: None,
            format: Format::Csv,
        }
    }

    /// Three-tier c×r setup: M = 9, U = Q = 900, H = 100, aligned levels
    /// paired on the diagonal.
    pub fn three_tier_cxr() -> Self {
        let lv = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let mut cfg = Self::three_tier_rxc();
        cfg.partition = BlockPartition::cxr(9, 900, 100, 900).expect("valid");
        cfg.classes.a_levels = lv.clone();
        cfg.classes.b_levels = lv;
        cfg.classes.table = ClassTable::diagonal(3);
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Explicit grid, else the single deadline, else [`default_times`].
    pub fn times(&self) -> Vec<f64> {
        match (&self.times, self.latency.t_max) {
            (Some(t), _) => t.clone(),
            (None, Some(t)) => vec![t],
            (None, None) => default_times(),
        }
    }

    /// Check cross-field consistency and build the derived objects.
    pub fn resolve(&self) -> Result<Resolved, HarnessError> {
        let cfg_err = |e: &dyn std::fmt::Display| HarnessError::Config(e.to_string());
        self.latency.validate().map_err(|e| cfg_err(&e))?;
        let times = self.times();
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(HarnessError::Config("times must be finite and nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(HarnessError::Config("threads must be at least 1".into()));
        }
        let c = &self.classes;
        let s = c.table.levels();
        let levels = LevelAssignment::new(c.a_levels.clone(), c.b_levels.clone(), s).map_err(|e| cfg_err(&e))?;
        let classes: ClassMap = product_classes(&levels, &self.partition, &c.table).map_err(|e| cfg_err(&e))?;
        let gamma = self
            .code
            .gamma
            .clone()
            .map(WindowDistribution::new)
            .transpose()
            .map_err(|e| cfg_err(&e))?;
        let code = UepCode::new(self.code.family, self.partition, classes.clone(), gamma, self.code.workers)
            .map_err(|e| cfg_err(&e))?
            .with_field(self.code.field)
            .with_combining(self.code.combining);
        let field = Field::new(self.code.field).map_err(|e| cfg_err(&e))?;
        let variances = ClassVariances::from_levels(&levels, &classes, &self.partition, &c.a_variances, &c.b_variances)
            .map_err(|e| cfg_err(&e))?;
        let synth = GaussianClassSpec {
            a_variances: c.a_variances.clone(),
            b_variances: c.b_variances.clone(),
            a_levels: c.a_levels.clone(),
            b_levels: c.b_levels.clone(),
        };
        Ok(Resolved { code, field, levels, variances, synth, times })
    }
}
