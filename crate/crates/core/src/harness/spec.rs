use std::collections::BTreeSet;
use std::path::Path;

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::kv::{KvPolicy, KvPolicySpec};
use crate::param::{CalibrationConfig, ParamSpec};
use crate::sim::{ModelConfig, TaskKind};
use crate::token_prune::TokenPruneSpec;
use crate::{budget, Error, Result};

/// A grid entry. Entries written without a `budget` key are swept over the
/// run's budget list; entries with one run at that budget only.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep<S> {
    pub spec: S,
    pub sweep: bool,
}

impl<S> Sweep<S> {
    pub fn fixed(spec: S) -> Self {
        Self { spec, sweep: false }
    }

    pub fn swept(spec: S) -> Self {
        Self { spec, sweep: true }
    }
}

impl<'de, S: DeserializeOwned> Deserialize<'de> for Sweep<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut table = toml::Table::deserialize(d)?;
        let sweep = !table.contains_key("budget");
        if sweep {
            table.insert("budget".into(), toml::Value::Float(1.0));
        }
        let spec = S::deserialize(toml::Value::Table(table)).map_err(D::Error::custom)?;
        Ok(Self { spec, sweep })
    }
}

impl<S: Serialize> Serialize for Sweep<S> {
    fn serialize<Z: Serializer>(&self, s: Z) -> std::result::Result<Z::Ok, Z::Error> {
        use serde::ser::Error as _;
        let mut v = toml::Value::try_from(&self.spec).map_err(Z::Error::custom)?;
        if self.sweep {
            if let toml::Value::Table(t) = &mut v {
                t.remove("budget");
            }
        }
        v.serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    #[serde(default)]
    pub config: ModelConfig,
}

/// Task suite; each kind is one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub kinds: Vec<TaskKind>,
    pub samples: usize,
    pub visual_len: usize,
    pub text_len: usize,
    pub span_len: usize,
    pub marks: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            kinds: vec![TaskKind::NeedleRetrieval, TaskKind::Copy],
            samples: 20,
            visual_len: 480,
            text_len: 32,
            span_len: 1,
            marks: 3,
        }
    }
}

/// Source of the timing fields of each record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// Attention multiply-accumulate counters; deterministic.
    #[default]
    Counters,
    /// Measured seconds. Records are no longer reproducible byte for byte.
    WallClock,
}

pub const DEFAULT_BUDGETS: [f64; 5] = [0.01, 0.05, 0.10, 0.20, 0.40];

/// Declarative experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed for task generation.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub timing: Timing,
    /// Greedy tokens decoded per sample.
    #[serde(default = "default_decode_steps")]
    pub decode_steps: usize,
    #[serde(default = "default_models")]
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub suite: SuiteSpec,
    #[serde(default)]
    pub token_prune: Vec<Sweep<TokenPruneSpec>>,
    #[serde(default)]
    pub kv: Vec<Sweep<KvPolicySpec>>,
    #[serde(default)]
    pub param: Vec<ParamSpec>,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn default_name() -> String {
    "run".into()
}

fn default_budgets() -> Vec<f64> {
    DEFAULT_BUDGETS.to_vec()
}

fn default_decode_steps() -> usize {
    4
}

fn default_models() -> Vec<ModelEntry> {
    vec![ModelEntry {
        name: "toy".into(),
        config: ModelConfig::default(),
    }]
}

impl Default for RunSpec {
    fn default() -> Self {
        toml::from_str("").expect("empty spec uses defaults")
    }
}

/// One resolved policy of the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum GridPoint {
    TokenPrune(TokenPruneSpec),
    Kv(KvPolicySpec),
    Param(ParamSpec),
}

impl GridPoint {
    pub fn label(&self) -> String {
        match self {
            GridPoint::TokenPrune(s) => s.label(),
            GridPoint::Kv(s) => KvPolicy::from_spec(s).map(|p| p.label()).unwrap_or_else(|_| s.method.name().into()),
            GridPoint::Param(s) => s.label(),
        }
    }

    pub fn budget(&self) -> Option<f64> {
        match self {
            GridPoint::TokenPrune(s) => Some(s.budget),
            GridPoint::Kv(s) => Some(s.budget),
            GridPoint::Param(_) => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            GridPoint::TokenPrune(_) => "token_prune",
            GridPoint::Kv(_) => "kv",
            GridPoint::Param(_) => "param",
        }
    }
}

impl RunSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: RunSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }

    /// Every grid point in run order: token pruning, then KV, then
    /// parameter compression; swept entries expand over `budgets`.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for e in &self.token_prune {
            if e.sweep {
                for &b in &self.budgets {
                    out.push(GridPoint::TokenPrune(TokenPruneSpec { budget: b, ..e.spec.clone() }));
                }
            } else {
                out.push(GridPoint::TokenPrune(e.spec.clone()));
            }
        }
        for e in &self.kv {
            if e.sweep {
                for &b in &self.budgets {
                    out.push(GridPoint::Kv(KvPolicySpec { budget: b, ..e.spec.clone() }));
                }
            } else {
                out.push(GridPoint::Kv(e.spec.clone()));
            }
        }
        out.extend(self.param.iter().cloned().map(GridPoint::Param));
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("run name `{}` is not a plain file name", self.name)));
        }
        for &b in &self.budgets {
            budget::check_fraction(b)?;
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            m.config.validate()?;
            if !names.insert(&m.name) {
                return Err(Error::Config(format!("duplicate model name `{}`", m.name)));
            }
            let len = self.suite.visual_len + self.suite.text_len + self.decode_steps;
            if len > m.config.max_seq_len {
                return Err(Error::SequenceTooLong {
                    len,
                    max: m.config.max_seq_len,
                });
            }
        }
        if self.suite.kinds.is_empty() || self.suite.samples == 0 {
            return Err(Error::Config("suite needs at least one kind and one sample".into()));
        }
        if self.decode_steps == 0 {
            return Err(Error::Config("decode_steps must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for p in self.grid() {
            match &p {
                GridPoint::TokenPrune(s) => {
                    budget::check_fraction(s.budget)?;
                }
                GridPoint::Kv(s) => {
                    KvPolicy::from_spec(s)?;
                }
                GridPoint::Param(s) => s.validate()?,
            }
            let key = (p.label(), p.budget().map(f64::to_bits));
            if !seen.insert(key) {
                return Err(Error::Config(format!("grid point `{}` appears twice", p.label())));
            }
        }
        Ok(())
    }
}
