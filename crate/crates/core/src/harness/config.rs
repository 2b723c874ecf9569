use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::features::{Activation, ActivationKind};
use crate::recon::ReconConfig;

/// Output directory override.
pub const ENV_OUT: &str = "RECONLAW_OUT";
/// Worker count override.
pub const ENV_JOBS: &str = "RECONLAW_JOBS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    #[default]
    Synthetic,
    CifarBinary,
    CifarOnehot,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Rf,
    TwoLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PUnit {
    Absolute,
    N,
    Dn,
}

/// One entry of a feature-count grid: an absolute count or a multiple of
/// `n` or of `d·n`, written `"400"`, `"2n"`, `"0.5n"`, `"10dn"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PSpec {
    pub multiplier: f64,
    pub unit: PUnit,
}

impl PSpec {
    pub fn resolve(&self, d: usize, n: usize) -> Result<usize> {
        let base = match self.unit {
            PUnit::Absolute => 1.0,
            PUnit::N => n as f64,
            PUnit::Dn => (d * n) as f64,
        };
        let p = (self.multiplier * base).round();
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("grid entry {self} resolves to p = {p}")));
        }
        Ok(p as usize)
    }
}

impl FromStr for PSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (num, unit) = if let Some(m) = t.strip_suffix("dn") {
            (m, PUnit::Dn)
        } else if let Some(m) = t.strip_suffix('n') {
            (m, PUnit::N)
        } else {
            (t, PUnit::Absolute)
        };
        let bad = || Error::InvalidArgument(format!("cannot parse p-grid entry '{s}'"));
        let multiplier = if num.is_empty() && unit != PUnit::Absolute {
            1.0
        } else {
            num.trim().parse::<f64>().map_err(|_| bad())?
        };
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(bad());
        }
        if unit == PUnit::Absolute && multiplier.fract() != 0.0 {
            return Err(bad());
        }
        Ok(Self { multiplier, unit })
    }
}

impl fmt::Display for PSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.unit {
            PUnit::Absolute => write!(f, "{}", self.multiplier),
            PUnit::N => write!(f, "{}n", self.multiplier),
            PUnit::Dn => write!(f, "{}dn", self.multiplier),
        }
    }
}

impl Serialize for PSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(c) => Ok(PSpec {
                multiplier: c as f64,
                unit: PUnit::Absolute,
            }),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Comma-separated grid, e.g. `"0.5n,n,2n,1dn,10dn"`.
pub fn parse_p_grid(list: &str) -> Result<Vec<PSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Gradient-descent settings for two-layer networks. The defaults are the
/// full-scale schedule; desk-scale runs raise the step and stop early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub step: f64,
    pub max_steps: usize,
    /// Stop once the mean loss `Σ_i ‖f(x_i) − y_i‖² / n` drops below this.
    pub target_mse: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_steps: 1_000_000,
            target_mse: 0.0,
        }
    }
}

/// Everything that defines a sweep. Serialized as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub source: DataSource,
    /// Directory holding `data_batch_{1..5}.bin` for CIFAR sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cifar_dir: Option<PathBuf>,
    /// CIFAR classes: the negative and positive class for binary tasks,
    /// the classes to draw `n / len` images from for one-hot tasks.
    #[serde(default = "default_classes")]
    pub classes: Vec<u8>,
    pub d: usize,
    pub n: usize,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
    #[serde(default)]
    pub model: ModelKind,
    pub p_grid: Vec<PSpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub recon: ReconConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn default_classes() -> Vec<u8> {
    vec![6, 9]
}

fn one() -> usize {
    1
}

fn default_activation() -> ActivationKind {
    ActivationKind::Relu
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for SweepConfig {
    /// The `d = 100, n = 20` synthetic phase-transition sweep.
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            cifar_dir: None,
            classes: default_classes(),
            d: 100,
            n: 20,
            k: 1,
            activation: ActivationKind::Relu,
            model: ModelKind::Rf,
            p_grid: parse_p_grid("0.5n,n,2n,1dn,10dn").expect("static grid"),
            seeds: vec![0, 1, 2],
            recon: ReconConfig::synthetic(),
            training: TrainingConfig::default(),
            out_dir: default_out(),
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn activation(&self) -> Result<Activation> {
        Activation::from_kind(self.activation)
            .ok_or_else(|| Error::InvalidArgument("custom activations cannot be configured by name".into()))
    }

    /// Resolved feature counts in grid order.
    pub fn resolved_grid(&self) -> Result<Vec<usize>> {
        self.p_grid.iter().map(|s| s.resolve(self.d, self.n)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 || self.n == 0 || self.k == 0 {
            return bad(format!("d, n and k must be positive (d = {}, n = {}, k = {})", self.d, self.n, self.k));
        }
        self.activation()?;
        if self.p_grid.is_empty() {
            return bad("p grid is empty".into());
        }
        let grid = self.resolved_grid()?;
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("p grid must be strictly increasing, got {grid:?}"));
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        self.recon.validate()?;
        if !(self.training.step > 0.0) {
            return bad("training step must be positive".into());
        }
        match self.source {
            DataSource::Synthetic => {}
            DataSource::CifarBinary | DataSource::CifarOnehot => {
                if self.d != crate::datagen::cifar::CIFAR_PIXELS {
                    return bad(format!("CIFAR inputs have d = 3072, config says {}", self.d));
                }
                if self.cifar_dir.is_none() {
                    return bad("CIFAR sources need cifar_dir".into());
                }
            }
        }
        match self.source {
            DataSource::CifarBinary if self.classes.len() != 2 || self.k != 1 || !self.n.is_multiple_of(2) => {
                return bad("binary CIFAR needs two classes, k = 1 and even n".into())
            }
            DataSource::CifarOnehot if self.classes.is_empty() || self.k != 10 || !self.n.is_multiple_of(self.classes.len()) => {
                return bad("one-hot CIFAR needs k = 10 and n divisible by the class count".into())
            }
            _ => {}
        }
        if self.model == ModelKind::TwoLayer {
            for p in grid {
                if p % self.k != 0 {
                    return bad(format!("two-layer p = {p} is not a multiple of k = {}", self.k));
                }
            }
        }
        Ok(())
    }
}
