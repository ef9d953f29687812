//! Sampling algorithms for the block count of `n` items and the replication
//! harness around them.
//!
//! * `A1` grows each dataset item by item from the unconditional urn.
//! * `A2` grows each dataset from the conditional urn, refreshing `Ũ` after
//!   every item.
//! * `A3` is a Gibbs sampler over item allocations with `u` integrated out.
//! * `A4` is a Gibbs sampler alternating `U` and item allocations.

pub mod rng;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{Provenance, SizeDistribution};
use crate::latent::{sample_u, sample_u_tilde};
use crate::math::quadrature::QuadratureConfig;
use crate::par::{try_map_indexed, Execution};
use crate::partition::{AtomLabel, Choice, Partition};
use crate::process::TiltedSpec;
use crate::urn::{normalized_conditional, Draw, UnconditionalUrn, UrnWeights};

pub use stats::{summarize, Summary, SummaryRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    A1,
    A2,
    A3,
    A4,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::A1, Algorithm::A2, Algorithm::A3, Algorithm::A4];

    /// Whether successive draws are independent.
    pub fn is_exact(self) -> bool {
        matches!(self, Algorithm::A1 | Algorithm::A2)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::A1 => "A1",
            Algorithm::A2 => "A2",
            Algorithm::A3 => "A3",
            Algorithm::A4 => "A4",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('.', "").as_str() {
            "A1" => Ok(Algorithm::A1),
            "A2" => Ok(Algorithm::A2),
            "A3" => Ok(Algorithm::A3),
            "A4" => Ok(Algorithm::A4),
            other => Err(Error::usage(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Starting partition of the Gibbs chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInit {
    #[default]
    Singletons,
    OneBlock,
}

fn default_chains() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: TiltedSpec,
    /// Items per dataset.
    pub n: usize,
    /// Datasets for `A1`/`A2`; kept sweeps for `A3`/`A4`.
    pub num_samples: usize,
    /// Discarded sweeps per chain (`A3`/`A4` only).
    #[serde(default)]
    pub burn_in: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Independent chains sharing the kept sweeps (`A3`/`A4` only).
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub init: ChainInit,
    /// Replicate batch index; batches of one seed use disjoint random streams.
    #[serde(default)]
    pub batch: u32,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

impl RunConfig {
    pub fn new(
        spec: TiltedSpec,
        n: usize,
        num_samples: usize,
        seed: u64,
        algorithm: Algorithm,
    ) -> Self {
        RunConfig {
            spec,
            n,
            num_samples,
            burn_in: 0,
            seed,
            algorithm,
            chains: 1,
            init: ChainInit::Singletons,
            batch: 0,
            execution: Execution::Parallel,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.quadrature.validate()?;
        if self.n == 0 {
            return Err(Error::usage("n must be at least 1"));
        }
        if self.num_samples == 0 {
            return Err(Error::usage("num_samples must be at least 1"));
        }
        if self.chains == 0 {
            return Err(Error::usage("chains must be at least 1"));
        }
        if !self.algorithm.is_exact() && self.chains > self.num_samples {
            return Err(Error::usage("more chains than kept sweeps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    /// One block count per dataset (`A1`/`A2`) or kept sweep (`A3`/`A4`),
    /// chains concatenated in order.
    pub block_count_draws: Vec<u32>,
    pub size_distribution: SizeDistribution,
    pub standard_errors: Vec<f64>,
    /// The latent `u` of every kept `A4` sweep; empty for other algorithms.
    #[serde(default)]
    pub latent_trace: Vec<f64>,
}

impl RunResult {
    fn from_draws(config: RunConfig, draws: Vec<u32>, latent_trace: Vec<f64>) -> Self {
        let n = config.n;
        let total = draws.len() as f64;
        let mut counts = vec![0u64; n];
        for &d in &draws {
            counts[d as usize - 1] += 1;
        }
        let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
        let standard_errors = probabilities
            .iter()
            .map(|p| (p * (1.0 - p) / total).sqrt())
            .collect();
        RunResult {
            size_distribution: SizeDistribution {
                n,
                probabilities,
                provenance: Provenance::Simulated(config.algorithm),
                spec: config.spec,
            },
            config,
            block_count_draws: draws,
            standard_errors,
            latent_trace,
        }
    }

    /// Histogram of block counts; entry `i` counts draws equal to `i + 1`.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.config.n];
        for &d in &self.block_count_draws {
            counts[d as usize - 1] += 1;
        }
        counts
    }
}

/// Dispatch on `cfg.algorithm`.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    match cfg.algorithm {
        Algorithm::A1 => run_a1(cfg),
        Algorithm::A2 => run_a2(cfg),
        Algorithm::A3 => run_a3(cfg),
        Algorithm::A4 => run_a4(cfg),
    }
}

fn check(cfg: &RunConfig, algorithm: Algorithm) -> Result<()> {
    if cfg.algorithm != algorithm {
        return Err(Error::usage(format!(
            "config names {} but {algorithm} was requested",
            cfg.algorithm
        )));
    }
    cfg.validate()
}

/// A label not yet used in `p`.
fn fresh_label<R: Rng + ?Sized>(p: &Partition, rng: &mut R) -> AtomLabel {
    loop {
        let l = AtomLabel(rng.random());
        if !p.labels().contains(&l) {
            return l;
        }
    }
}

fn place<R: Rng + ?Sized>(
    p: &mut Partition,
    item: usize,
    weights: &UrnWeights,
    rng: &mut R,
) -> Result<()> {
    let choice = match weights.sample(rng) {
        Draw::Join(k) => Choice::Join(k),
        Draw::New => Choice::NewBlock(fresh_label(p, rng)),
    };
    p.insert_item(item, choice)
}

fn dataset_rng(cfg: &RunConfig, replicate: usize) -> ChaCha8Rng {
    rng::stream_rng(cfg.seed, rng::stream_id(cfg.batch, replicate))
}

/// Independent datasets, each grown from the unconditional urn.
pub fn run_a1(cfg: &RunConfig) -> Result<RunResult> {
    check(cfg, Algorithm::A1)?;
    let urn = UnconditionalUrn::new(cfg.spec, cfg.quadrature)?;
    let draws = try_map_indexed(cfg.num_samples, cfg.execution, |s| {
        let mut rng = dataset_rng(cfg, s);
        let mut p = Partition::new();
        for i in 0..cfg.n {
            let w = urn
                .weights(&p)
                .map_err(|e| e.context(format!("dataset {s}")))?;
            place(&mut p, i, &w, &mut rng)?;
        }
        Ok(p.num_blocks() as u32)
    })?;
    Ok(RunResult::from_draws(*cfg, draws, Vec::new()))
}

/// Independent datasets, each grown from the conditional urn with `Ũ`
/// refreshed after every item. The first item always opens a block, so the
/// chain starts at one item rather than drawing from the prior of `Ũ`.
pub fn run_a2(cfg: &RunConfig) -> Result<RunResult> {
    check(cfg, Algorithm::A2)?;
    let spec = cfg.spec;
    let draws = try_map_indexed(cfg.num_samples, cfg.execution, |s| {
        let mut rng = dataset_rng(cfg, s);
        let mut p = Partition::new();
        p.add_item(Choice::NewBlock(fresh_label(&p, &mut rng)))?;
        for i in 1..cfg.n {
            let u = sample_u_tilde(&spec, &p, &mut rng)
                .map_err(|e| e.context(format!("dataset {s}")))?;
            let w = normalized_conditional(&spec, &p, u.value());
            place(&mut p, i, &w, &mut rng)?;
        }
        Ok(p.num_blocks() as u32)
    })?;
    Ok(RunResult::from_draws(*cfg, draws, Vec::new()))
}

fn kept_per_chain(cfg: &RunConfig, chain: usize) -> usize {
    let base = cfg.num_samples / cfg.chains;
    base + usize::from(chain < cfg.num_samples % cfg.chains)
}

fn initial_partition(cfg: &RunConfig) -> Partition {
    match cfg.init {
        ChainInit::Singletons => Partition::singletons(cfg.n),
        ChainInit::OneBlock => Partition::one_block(cfg.n),
    }
}

/// Gibbs sweeps over item allocations with `u` integrated out. One kept
/// sample is the block count after a full sweep.
pub fn run_a3(cfg: &RunConfig) -> Result<RunResult> {
    check(cfg, Algorithm::A3)?;
    let urn = UnconditionalUrn::new(cfg.spec, cfg.quadrature)?;
    let chains = try_map_indexed(cfg.chains, cfg.execution, |c| {
        let mut rng = dataset_rng(cfg, c);
        let mut p = initial_partition(cfg);
        let kept = kept_per_chain(cfg, c);
        let mut draws = Vec::with_capacity(kept);
        for sweep in 0..cfg.burn_in + kept {
            for i in 0..cfg.n {
                p.remove_item(i)?;
                let w = urn
                    .weights(&p)
                    .map_err(|e| e.context(format!("chain {c}, sweep {sweep}")))?;
                place(&mut p, i, &w, &mut rng)?;
            }
            if sweep >= cfg.burn_in {
                draws.push(p.num_blocks() as u32);
            }
        }
        Ok(draws)
    })?;
    Ok(RunResult::from_draws(*cfg, chains.concat(), Vec::new()))
}

/// Gibbs sweeps alternating a draw of `U` given the partition with
/// conditional-urn reallocation of every item at that `u`.
pub fn run_a4(cfg: &RunConfig) -> Result<RunResult> {
    check(cfg, Algorithm::A4)?;
    let spec = cfg.spec;
    let chains = try_map_indexed(cfg.chains, cfg.execution, |c| {
        let mut rng = dataset_rng(cfg, c);
        let mut p = initial_partition(cfg);
        let kept = kept_per_chain(cfg, c);
        let mut draws = Vec::with_capacity(kept);
        let mut trace = Vec::with_capacity(kept);
        for sweep in 0..cfg.burn_in + kept {
            let u = sample_u(&spec, &p, &mut rng, &cfg.quadrature)
                .map_err(|e| e.context(format!("chain {c}, sweep {sweep}")))?
                .value();
            for i in 0..cfg.n {
                p.remove_item(i)?;
                let w = normalized_conditional(&spec, &p, u);
                place(&mut p, i, &w, &mut rng)?;
            }
            if sweep >= cfg.burn_in {
                draws.push(p.num_blocks() as u32);
                trace.push(u);
            }
        }
        Ok((draws, trace))
    })?;
    let (draws, traces): (Vec<_>, Vec<_>) = chains.into_iter().unzip();
    Ok(RunResult::from_draws(*cfg, draws.concat(), traces.concat()))
}
