//! TOML experiment configuration.
//!
//! ```toml
//! name = "example1"
//! horizon = 200000
//! trials = 10
//! seed = 1
//!
//! [system]
//! L = 3
//! D = 1
//! theta = [[-2.0], [5.0], [8.0]]
//!
//! [noise]
//! kind = "gaussian"      # gaussian | laplacian | discrete
//! sigma = 0.01           # standard deviation
//!
//! [input]
//! kind = "gaussian"      # gaussian | identity | fixed (with `matrix`)
//!
//! [perm]
//! kind = "uniform"       # uniform | categorical (`pi`) | markov (`pi0`, `generator`, `mu`)
//!
//! [[filter]]             # a single `[filter]` table is accepted too
//! mode = "sym-scalar"
//! eps = 1e-4
//! init = [[1.0], [2.0], [3.0]]
//! invert_every = 1000
//! ```

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use symset::filters::{build, RemModel};
use symset::{Drift, FilterConfig, HyperChain, Init, InputModel, Mode, NoiseModel, PermutationModel, SystemSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub horizon: usize,
    #[serde(default = "one")]
    pub trials: usize,
    pub seed: u64,
    pub system: RawSystem,
    pub noise: RawNoise,
    #[serde(default)]
    pub input: RawInput,
    #[serde(default)]
    pub perm: RawPerm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<RawHyper>,
    #[serde(default, deserialize_with = "one_or_many")]
    pub filter: Vec<RawFilter>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub theta: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RawNoise {
    Gaussian { sigma: f64 },
    Laplacian { sigma: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RawInput {
    #[default]
    Gaussian,
    Identity,
    Fixed { matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RawPerm {
    #[default]
    Uniform,
    Categorical { pi: Vec<f64> },
    Markov { pi0: Vec<f64>, generator: Vec<Vec<f64>>, mu: f64 },
}

/// Slow Markov chain over the true parameter matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHyper {
    pub states: Vec<Vec<Vec<f64>>>,
    pub generator: Vec<Vec<f64>>,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: String,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invert_every: Option<usize>,
    /// Std of the Gaussian noise assumed by `rem`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed_sigma: Option<f64>,
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<RawFilter>, D::Error> {
    use serde::de::Error;
    match toml::Value::deserialize(de)? {
        toml::Value::Array(items) => {
            items.into_iter().map(|v| v.try_into().map_err(D::Error::custom)).collect()
        }
        v @ toml::Value::Table(_) => Ok(vec![v.try_into().map_err(D::Error::custom)?]),
        other => Err(D::Error::custom(format!("`filter` must be a table or an array of tables, got {}", other.type_str()))),
    }
}

/// A labelled filter of an experiment.
#[derive(Clone, Debug)]
pub struct NamedFilter {
    pub label: String,
    pub config: FilterConfig,
}

/// Validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub name: String,
    pub system: SystemSpec,
    pub perm: PermutationModel,
    pub drift: Option<Drift>,
    pub filters: Vec<NamedFilter>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// SHA-256 of the canonical TOML form, after overrides.
    pub hash: String,
}

pub const PRESETS: [(&str, &str); 4] = [
    ("example1", include_str!("../presets/example1.toml")),
    ("example2", include_str!("../presets/example2.toml")),
    ("example3", include_str!("../presets/example3.toml")),
    ("example4", include_str!("../presets/example4.toml")),
];

pub fn preset(name: &str) -> Result<RawConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .with_context(|| format!("unknown preset `{name}`"))?;
    parse_str(text).with_context(|| format!("preset `{name}`"))
}

pub fn parse_str(text: &str) -> Result<RawConfig> {
    Ok(toml::from_str(text)?)
}

pub fn load(path: &std::path::Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    ensure!(!rows.is_empty() && !rows[0].is_empty(), "{what} is empty");
    let cols = rows[0].len();
    ensure!(rows.iter().all(|r| r.len() == cols), "{what} has rows of different lengths");
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

impl RawConfig {
    pub fn hash(&self) -> Result<String> {
        let canonical = toml::to_string(self)?;
        Ok(sha256_hex(&canonical))
    }

    pub fn into_spec(self) -> Result<ExperimentSpec> {
        let hash = self.hash()?;
        ensure!(self.horizon >= 1, "horizon must be >= 1");
        ensure!(self.trials >= 1, "trials must be >= 1");

        let theta = matrix(&self.system.theta, "system.theta")?;
        ensure!(
            theta.shape() == (self.system.l, self.system.d),
            "system.theta is {}x{}, but L = {} and D = {}",
            theta.nrows(),
            theta.ncols(),
            self.system.l,
            self.system.d
        );
        let noise = match self.noise {
            RawNoise::Gaussian { sigma } => NoiseModel::Gaussian { sigma },
            RawNoise::Laplacian { sigma } => NoiseModel::Laplacian { sigma },
            RawNoise::Discrete { support, probs } => NoiseModel::Discrete { support, probs },
        };
        let input = match self.input {
            RawInput::Gaussian => InputModel::Gaussian,
            RawInput::Identity => InputModel::Identity,
            RawInput::Fixed { matrix: m } => InputModel::Fixed(matrix(&m, "input.matrix")?),
        };
        let system = SystemSpec::new(theta, input, noise).context("system")?;
        let (l, d) = (system.l(), system.d());

        let perm = match self.perm {
            RawPerm::Uniform => PermutationModel::UniformIid,
            RawPerm::Categorical { pi } => PermutationModel::CategoricalIid { pi },
            RawPerm::Markov { pi0, generator, mu } => {
                PermutationModel::Markov { pi0, generator: matrix(&generator, "perm.generator")?, mu }
            }
        };
        perm.validate(l).context("perm")?;

        let drift = match self.hyper {
            None => None,
            Some(h) => {
                let states =
                    h.states.iter().map(|s| matrix(s, "hyper.states")).collect::<Result<Vec<_>>>()?;
                let n = states.len();
                let mut pi0 = vec![0.0; n];
                if n > 0 {
                    pi0[0] = 1.0;
                }
                let chain = HyperChain {
                    states,
                    generator: matrix(&h.generator, "hyper.generator")?,
                    mu: h.mu,
                    pi0: h.pi0.unwrap_or(pi0),
                };
                chain.transition(l, d).context("hyper")?;
                Some(Drift::Markov(chain))
            }
        };

        let mut filters = Vec::with_capacity(self.filter.len());
        for (i, f) in self.filter.into_iter().enumerate() {
            let mode: Mode = f.mode.parse().with_context(|| format!("filter {}", i + 1))?;
            let mut cfg = FilterConfig::new(mode, f.eps);
            if let Some(init) = &f.init {
                cfg = cfg.with_init(Init::Theta(matrix(init, "filter.init")?));
            }
            if let Some(n) = f.invert_every {
                cfg = cfg.with_invert_every(n);
            }
            if let Some(sigma) = f.assumed_sigma {
                if mode != Mode::Rem {
                    bail!("filter {}: assumed_sigma only applies to rem", i + 1);
                }
                cfg = cfg.with_rem(RemModel { assumed: NoiseModel::Gaussian { sigma }, prior: None });
            }
            cfg.validate().with_context(|| format!("filter {}", i + 1))?;
            build(&cfg, l, d).with_context(|| format!("filter {}", i + 1))?;
            let label = f.name.unwrap_or_else(|| format!("{}-{}", i + 1, mode));
            filters.push(NamedFilter { label, config: cfg });
        }
        let mut labels: Vec<&str> = filters.iter().map(|f| f.label.as_str()).collect();
        labels.sort_unstable();
        ensure!(labels.windows(2).all(|w| w[0] != w[1]), "filter names must be unique");

        Ok(ExperimentSpec {
            name: self.name.unwrap_or_else(|| "experiment".into()),
            system,
            perm,
            drift,
            filters,
            horizon: self.horizon,
            trials: self.trials,
            seed: self.seed,
            hash,
        })
    }
}
