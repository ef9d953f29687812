//! Flags and config-file keys. Both share one schema; flags win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize};
use tilted_crm::{
    Algorithm, ChainInit, Execution, NamedPreset, ProcessFamily, QuadratureConfig, RunConfig,
    TiltedSpec,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Dirichlet,
    BetaGamma,
    PoissonDirichlet,
    NormalizedStable,
    NormalizedGeneralizedGamma,
    InverseGaussian,
    GeneralizedDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    GeneralizedGamma,
    GeneralizedDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    Singletons,
    OneBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: tilted_crm::Error| e.to_string())
}

/// Accepts `algorithm = "A1"` as well as `algorithm = ["A1", "A2"]`.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Algorithm>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Algorithm),
        Many(Vec<Algorithm>),
    }
    Ok(Some(match OneOrMany::deserialize(d)? {
        OneOrMany::One(a) => vec![a],
        OneOrMany::Many(v) => v,
    }))
}

/// Options shared by every command.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Named process
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetName>,
    /// Explicit process family, used instead of a preset
    #[arg(long, conflicts_with = "preset")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Defaults to 1
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<u32>,
    /// Polynomial tilt exponent, defaults to 0
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Exponential tilt rate, defaults to 0
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Number of items
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Datasets (A1, A2) or kept sweeps (A3, A4) per batch
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Independent Gibbs chains sharing the kept sweeps
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    /// Replicate batches, each with its own random streams
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// One algorithm, or a comma-separated list for `report`
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    #[serde(
        skip_serializing_if = "Option::is_none",
        deserialize_with = "one_or_many"
    )]
    pub algorithm: Option<Vec<Algorithm>>,
    /// Starting partition of the Gibbs chains
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitName>,
    /// Run replicates on the calling thread only
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub sequential: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_tolerance: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
    /// Output file; stdout when absent
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorSettings>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSettings>,
}

/// Options of the `posterior` command.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorSettings {
    /// File holding one line of comma-separated block sizes
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<PathBuf>,
    /// Latent value; drawn from its conditional law when absent
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    /// Independent jump vectors to draw
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
}

/// Options of the `compare` command.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    /// JSON outputs of `simulate`
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PathBuf>,
    /// JSON output of `exact`; otherwise computed from the spec flags or the runs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<PathBuf>,
    /// Where to write per-batch ranges and quantiles
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub figure_out: Option<PathBuf>,
}

macro_rules! prefer {
    ($a:expr, $b:expr; $($f:ident),*) => {
        $( $a.$f = $a.$f.take().or($b.$f); )*
    };
}

impl PosteriorSettings {
    pub fn merged(mut self, file: Option<PosteriorSettings>) -> Self {
        let file = file.unwrap_or_default();
        prefer!(self, file; partition, u, draws);
        self
    }
}

impl CompareSettings {
    pub fn merged(mut self, file: Option<CompareSettings>) -> Self {
        let file = file.unwrap_or_default();
        if self.inputs.is_empty() {
            self.inputs = file.inputs;
        }
        prefer!(self, file; exact, figure_out);
        self
    }
}

impl Settings {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(1);
            CliError::Parse {
                path: path.to_owned(),
                line,
                message: e.message().to_owned(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Fill every unset field from `file`.
    pub fn merged(mut self, file: Settings) -> Self {
        prefer!(self, file;
            preset, family, alpha, theta, b, c, q, gamma, n, samples, burn_in, chains,
            batches, seed, algorithm, init, relative_tolerance, max_subdivisions, out, format,
            posterior, compare);
        self.sequential |= file.sequential;
        self
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig> {
        let mut cfg = QuadratureConfig::default();
        if let Some(t) = self.relative_tolerance {
            cfg.relative_tolerance = t;
        }
        if let Some(m) = self.max_subdivisions {
            cfg.max_subdivisions = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn has_spec(&self) -> bool {
        self.preset.is_some() || self.family.is_some()
    }

    pub fn spec(&self) -> Result<TiltedSpec> {
        let given = [
            ("alpha", self.alpha.is_some()),
            ("theta", self.theta.is_some()),
            ("b", self.b.is_some()),
            ("c", self.c.is_some()),
        ];
        let (allowed, family): (&[&str], ProcessFamily) = match (self.preset, self.family) {
            (Some(_), Some(_)) => {
                return Err(CliError::validation(
                    "give either a preset or a family, not both",
                ))
            }
            (None, None) => return Err(CliError::validation("a preset or a family is required")),
            (Some(preset), None) => {
                let named = self.named(preset)?;
                let allowed: &[&str] = match preset {
                    PresetName::Dirichlet => &["theta"],
                    PresetName::BetaGamma => &["theta", "b"],
                    PresetName::PoissonDirichlet | PresetName::NormalizedStable => &["alpha"],
                    PresetName::NormalizedGeneralizedGamma => &["alpha", "theta", "b"],
                    PresetName::InverseGaussian => &["theta", "b"],
                    PresetName::GeneralizedDirichlet => &["theta", "c"],
                };
                (allowed, named.expand()?.family)
            }
            (None, Some(FamilyName::GeneralizedGamma)) => (
                &["alpha", "theta", "b"],
                ProcessFamily::GeneralizedGamma {
                    alpha: self.need("alpha", self.alpha)?,
                    theta: self.theta.unwrap_or(1.0),
                    b: self.need("b", self.b)?,
                },
            ),
            (None, Some(FamilyName::GeneralizedDirichlet)) => (
                &["theta", "c"],
                ProcessFamily::GeneralizedDirichlet {
                    theta: self.theta.unwrap_or(1.0),
                    c: self.need("c", self.c)?,
                },
            ),
        };
        if let Some((name, _)) = given.iter().find(|(k, set)| *set && !allowed.contains(k)) {
            return Err(CliError::validation(format!(
                "parameter {name} does not apply to this process"
            )));
        }
        Ok(TiltedSpec::new(
            family,
            self.q.unwrap_or(0.0),
            self.gamma.unwrap_or(0.0),
        )?)
    }

    fn named(&self, preset: PresetName) -> Result<NamedPreset> {
        let theta = self.theta.unwrap_or(1.0);
        let q = self.q.unwrap_or(0.0);
        Ok(match preset {
            PresetName::Dirichlet => NamedPreset::Dirichlet { theta },
            PresetName::BetaGamma => NamedPreset::BetaGamma {
                theta,
                q,
                b: self.need("b", self.b)?,
            },
            PresetName::PoissonDirichlet => NamedPreset::PoissonDirichlet {
                alpha: self.need("alpha", self.alpha)?,
                q,
            },
            PresetName::NormalizedStable => NamedPreset::NormalizedStable {
                alpha: self.need("alpha", self.alpha)?,
            },
            PresetName::NormalizedGeneralizedGamma => NamedPreset::NormalizedGeneralizedGamma {
                alpha: self.need("alpha", self.alpha)?,
                theta,
                b: self.need("b", self.b)?,
            },
            PresetName::InverseGaussian => NamedPreset::InverseGaussian {
                theta,
                b: self.need("b", self.b)?,
            },
            PresetName::GeneralizedDirichlet => NamedPreset::GeneralizedDirichlet {
                theta,
                c: self.need("c", self.c)?,
            },
        })
    }

    fn need<T>(&self, name: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| CliError::validation(format!("--{name} is required")))
    }

    pub fn n(&self) -> Result<usize> {
        self.need("n", self.n)
    }

    pub fn seed(&self) -> Result<u64> {
        self.need("seed", self.seed)
    }

    pub fn algorithms(&self) -> Option<&[Algorithm]> {
        self.algorithm.as_deref()
    }

    /// Run configuration of batch `batch` for `algorithm`.
    pub fn run_config(&self, algorithm: Algorithm, batch: u32) -> Result<RunConfig> {
        let mut rc = RunConfig::new(
            self.spec()?,
            self.n()?,
            self.need("samples", self.samples)?,
            self.seed()?,
            algorithm,
        );
        rc.burn_in = self.burn_in.unwrap_or(0);
        rc.chains = self.chains.unwrap_or(1);
        rc.init = match self.init {
            Some(InitName::OneBlock) => ChainInit::OneBlock,
            _ => ChainInit::Singletons,
        };
        rc.batch = batch;
        rc.execution = self.execution();
        rc.quadrature = self.quadrature()?;
        rc.validate()?;
        Ok(rc)
    }

    pub fn batches(&self) -> Result<u32> {
        match self.batches.unwrap_or(1) {
            0 => Err(CliError::validation("--batches must be at least 1")),
            b => Ok(b),
        }
    }
}
