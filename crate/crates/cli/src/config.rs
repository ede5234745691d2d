//! Run configuration: a TOML file with one section per subcommand.
//!
//! Values resolve in this order, later winning: built-in defaults, the
//! config file, `HLMAX_*` environment variables, command-line flags.

use std::path::Path;

use hlmax::maxop::{ExperimentBudget, InputKind, RegimeConfig};
use hlmax::multiplier::DEFAULT_DP_BUDGET;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub threads: usize,
    /// Cap on multiplier DP table updates per ball.
    pub budget_updates: u64,
    pub count: CountConfig,
    pub multiplier: MultiplierConfig,
    pub semigroup: SemigroupConfig,
    pub maximal: MaximalConfig,
    pub domination: DominationConfig,
    pub ergodic: ErgodicConfig,
    pub bau: BauConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            threads: 0,
            budget_updates: DEFAULT_DP_BUDGET,
            count: CountConfig::default(),
            multiplier: MultiplierConfig::default(),
            semigroup: SemigroupConfig::default(),
            maximal: MaximalConfig::default(),
            domination: DominationConfig::default(),
            ergodic: ErgodicConfig::default(),
            bau: BauConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountConfig {
    pub dims: Vec<usize>,
    pub radii: Vec<f64>,
    /// Any of `one`, `two`, `infinity`.
    pub norms: Vec<String>,
    /// Count/volume table: dimensions and radius multiples of `c1 · d`.
    pub volume_dims: Vec<usize>,
    pub volume_multiples: Vec<f64>,
    pub c1: f64,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig {
            dims: vec![1, 2, 3, 4],
            radii: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            norms: vec!["one".into(), "two".into(), "infinity".into()],
            volume_dims: vec![1, 2, 3, 4, 5, 6],
            volume_multiples: vec![1.0, 2.0, 4.0],
            c1: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierCheck {
    Origin,
    Decay,
    SmallScale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Mixed,
    Uniform,
    NearOrigin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplierConfig {
    pub check: MultiplierCheck,
    pub dim: usize,
    pub radius: f64,
    pub samples: usize,
    pub sampling: Sampling,
    /// Overrides the fitted constant (`C` for decay, `c` for small-scale).
    pub constant: Option<f64>,
}

impl Default for MultiplierConfig {
    fn default() -> Self {
        MultiplierConfig {
            check: MultiplierCheck::Origin,
            dim: 1,
            radius: 2.0,
            samples: 100,
            sampling: Sampling::Mixed,
            constant: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupConfig {
    pub fields: usize,
    pub times: Vec<f64>,
}

impl Default for SemigroupConfig {
    fn default() -> Self {
        SemigroupConfig { fields: 100, times: vec![0.5, 2.0] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputName {
    Delta,
    SubBall,
    RandomPositive,
    RankOne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalConfig {
    pub inputs: Vec<InputName>,
    /// Fiber size of every input.
    pub n: usize,
    pub p: f64,
    pub dims: Vec<usize>,
    pub n_max: u64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub scalar_sites: usize,
    pub matrix_sites: usize,
    /// Relative tolerance of each majorant solve.
    pub tol: f64,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        let budget = ExperimentBudget::default();
        MaximalConfig {
            inputs: vec![InputName::Delta],
            n: 1,
            p: 2.0,
            dims: vec![1, 2, 3, 4, 5, 6],
            n_max: 64,
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            scalar_sites: budget.scalar_sites,
            matrix_sites: budget.matrix_sites,
            tol: 1e-4,
        }
    }
}

impl MaximalConfig {
    pub fn regimes(&self) -> Result<RegimeConfig, RunError> {
        Ok(RegimeConfig::new(self.c0, self.c1, self.c2, self.c3, self.n_max)?)
    }

    pub fn input_kinds(&self, seed: u64) -> Vec<InputKind> {
        let n = self.n;
        self.inputs
            .iter()
            .map(|name| match name {
                InputName::Delta => InputKind::Delta { n },
                InputName::SubBall => InputKind::SubBall { n },
                InputName::RandomPositive => InputKind::RandomPositive { n, seed },
                InputName::RankOne => InputKind::RankOneProjector { n, seed },
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominationInput {
    Delta,
    Constant,
    SubBall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DominationConfig {
    pub dim: usize,
    pub radius: f64,
    pub mc_samples: usize,
    pub input: DominationInput,
    pub c1: f64,
    /// Overrides the lattice-fitted `C2`.
    pub c2: Option<f64>,
}

impl Default for DominationConfig {
    fn default() -> Self {
        DominationConfig {
            dim: 2,
            radius: 8.0,
            mc_samples: 1_000_000,
            input: DominationInput::Delta,
            c1: 1.0,
            c2: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicConfig {
    pub side: usize,
    pub dim: usize,
    pub n: usize,
    pub p: f64,
    pub radii: Vec<u64>,
    pub cube_radius: u64,
    pub eps: f64,
    /// Seeded random fields compared by the transference check.
    pub cases: usize,
}

impl Default for ErgodicConfig {
    fn default() -> Self {
        ErgodicConfig { side: 8, dim: 1, n: 2, p: 2.0, radii: vec![1, 2], cube_radius: 4, eps: 0.5, cases: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BauConfig {
    pub terms: usize,
    pub eps: f64,
    /// Torus and fiber of the ergodic-average sequence.
    pub side: usize,
    pub dim: usize,
    pub n: usize,
    /// Per-axis exponents `e` of the diagonal twist `diag(ω^e)`, `ω = e^{2πi/side}`;
    /// empty for the plain shift.
    pub twist: Vec<Vec<u64>>,
}

impl Default for BauConfig {
    fn default() -> Self {
        BauConfig { terms: 24, eps: 0.25, side: 8, dim: 2, n: 2, twist: vec![vec![0, 2], vec![1, 0]] }
    }
}

/// Scalar overrides shared by flags and environment variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub budget_updates: Option<u64>,
}

impl Overrides {
    /// Reads `HLMAX_SEED`, `HLMAX_THREADS` and `HLMAX_BUDGET_UPDATES`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Self, RunError> {
        fn parse<T: std::str::FromStr>(key: &str, raw: Option<String>) -> Result<Option<T>, RunError> {
            raw.map(|v| v.trim().parse().map_err(|_| RunError::Config(format!("{key}={v} is not a valid value"))))
                .transpose()
        }
        Ok(Overrides {
            seed: parse("HLMAX_SEED", get("HLMAX_SEED"))?,
            threads: parse("HLMAX_THREADS", get("HLMAX_THREADS"))?,
            budget_updates: parse("HLMAX_BUDGET_UPDATES", get("HLMAX_BUDGET_UPDATES"))?,
        })
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if let Some(v) = self.budget_updates {
            cfg.budget_updates = v;
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering, lowercase hex.
    pub fn content_hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Defaults, then `file`, then environment, then flags.
    pub fn resolve(file: Option<&Path>, env: &Overrides, flags: &Overrides) -> Result<Self, RunError> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        env.apply(&mut cfg);
        flags.apply(&mut cfg);
        Ok(cfg)
    }
}
