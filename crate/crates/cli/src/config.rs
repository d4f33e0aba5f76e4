use std::path::Path;

use cmvlab::coefficients::{CoefficientSequence, FamilySpec, SequenceSpec};
use cmvlab::qwalk::{CoinSpec, InitialSpec};
use cmvlab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Reads a JSON object from `path` (or starts empty) and applies flag overrides.
pub fn load(path: Option<&Path>, overrides: Vec<(&str, Value)>) -> Result<Map<String, Value>, CliError> {
    let mut map = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Validation(format!("{}: top level must be an object", p.display()))),
                Err(e) => return Err(CliError::Validation(format!("{}: {e}", p.display()))),
            }
        }
        None => Map::new(),
    };
    for (k, v) in overrides {
        if !v.is_null() {
            map.insert(k.to_string(), v);
        }
    }
    Ok(map)
}

/// Deserializes with the offending field path in the message.
pub fn parse<T: DeserializeOwned>(map: &Map<String, Value>) -> Result<T, CliError> {
    serde_path_to_error::deserialize(Value::Object(map.clone()))
        .map_err(|e| CliError::Validation(format!("config field `{}`: {}", e.path(), e.inner())))
}

/// A core sequence spec, or a periodic table drawn from the run seed.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SeqConfig {
    Random(RandomSpec),
    Core(SequenceSpec),
}

impl<'de> Deserialize<'de> for SeqConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = Value::deserialize(d)?;
        if v.get("random_periodic").is_some() {
            serde_json::from_value(v).map(SeqConfig::Random).map_err(D::Error::custom)
        } else {
            serde_json::from_value(v).map(SeqConfig::Core).map_err(D::Error::custom)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub random_periodic: RandomTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTable {
    pub period: usize,
    pub radius: f64,
}

impl SeqConfig {
    pub fn build(&self, seed: u64) -> Result<CoefficientSequence, CliError> {
        match self {
            SeqConfig::Core(s) => Ok(s.build()?),
            SeqConfig::Random(RandomSpec { random_periodic: RandomTable { period, radius } }) => {
                if *period == 0 {
                    return Err(CliError::Validation("sequence.random_periodic.period must be positive".into()));
                }
                if !(0.0..1.0).contains(radius) {
                    return Err(CliError::Validation(format!("sequence.random_periodic.radius {radius} is not in [0, 1)")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values = (0..*period)
                    .map(|_| C64::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
                    .collect();
                Ok(CoefficientSequence::periodic_table(values)?)
            }
        }
    }
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    pub sequence: SeqConfig,
    pub q: usize,
    #[serde(default = "d_nk")]
    pub nk: usize,
    #[serde(default = "d_res")]
    pub resolution: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    pub sequence: SeqConfig,
    #[serde(default = "d_grid")]
    pub grid: usize,
    #[serde(default = "d_steps")]
    pub n_steps: usize,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxConfig {
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default = "d_fine_grid")]
    pub grid: usize,
    #[serde(default = "d_steps")]
    pub n_steps: usize,
    #[serde(default = "d_eps")]
    pub eps: f64,
    #[serde(default = "d_fine_res")]
    pub resolution: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub coins: CoinSpec,
    pub initial: InitialSpec,
    pub steps: usize,
    #[serde(default = "d_radius")]
    pub survival_radius: i64,
    #[serde(default = "d_every")]
    pub record_every: usize,
    /// Cap on the absorbing window.
    #[serde(default = "d_max_sites")]
    pub max_sites: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SieveConfig {
    pub sequence: SeqConfig,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylConfig {
    pub sequence: SeqConfig,
    #[serde(default)]
    pub k: i64,
    #[serde(default = "d_r")]
    pub r: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Explicit arc set; otherwise the band set at period `q`, otherwise the circle.
    #[serde(default)]
    pub arcs: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default = "d_res")]
    pub resolution: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn d_nk() -> usize {
    64
}
fn d_res() -> usize {
    1024
}
fn d_grid() -> usize {
    1024
}
fn d_fine_grid() -> usize {
    16384
}
fn d_fine_res() -> usize {
    4096
}
fn d_steps() -> usize {
    100_000
}
fn d_eps() -> f64 {
    1e-2
}
fn d_radius() -> i64 {
    5
}
fn d_every() -> usize {
    1
}
fn d_max_sites() -> usize {
    cmvlab::qwalk::DEFAULT_MAX_SITES
}
fn d_dim() -> usize {
    64
}
fn d_r() -> f64 {
    0.99
}
fn d_samples() -> usize {
    64
}
