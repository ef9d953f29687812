//! Command-line front end for `tilted-crm`: exact block-count laws, simulation
//! runs, comparisons against the exact law, and posterior descriptions.
//!
//! Every command reads an optional TOML file (`--config`) with the same keys as
//! the flags; flags take precedence. Output goes to `--out` or stdout as CSV or
//! JSON, and nothing is written unless the whole command succeeded.

pub mod error;
pub mod output;
pub mod settings;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tilted_crm::latent::sample_u;
use tilted_crm::{
    exact_size_distribution, posterior_description, run, summarize, Algorithm, Partition,
    PosteriorDescription, RunResult, SizeDistribution, Summary,
};

pub use error::{CliError, Result};
use output::{fixed6, CsvTable};
pub use settings::{CompareSettings, Format, PosteriorSettings, Settings};

pub const TOOL: &str = concat!("tiltcrm ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "tiltcrm",
    version,
    about = "Partition laws of normalized tilted random measures"
)]
pub struct Cli {
    /// TOML file supplying defaults for any flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; all cores when unset
    #[arg(long, global = true, env = "TILTCRM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact distribution of the number of blocks
    Exact(Settings),
    /// Simulate block counts with one algorithm
    Simulate(Settings),
    /// Compare saved simulation runs with the exact distribution
    Compare {
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        compare: CompareSettings,
    },
    /// Simulate with several algorithms and compare each with the exact distribution
    Report(Settings),
    /// Posterior description given a partition
    Posterior {
        #[command(flatten)]
        settings: Settings,
        #[command(flatten)]
        posterior: PosteriorSettings,
    },
}

/// JSON form of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub tool: String,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub algorithm: Algorithm,
    pub summary: Summary,
    /// Largest allowed `|z|`.
    pub gate: f64,
    /// Whether the runs used the reference's spec.
    pub spec_matches: bool,
    pub pass: bool,
}

/// JSON form of `compare` and `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub tool: String,
    pub reference: SizeDistribution,
    pub comparisons: Vec<Comparison>,
    pub pass: bool,
}

/// JSON form of `posterior`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorOutput {
    pub tool: String,
    pub sizes: Vec<u32>,
    pub u_drawn: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub description: PosteriorDescription,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<Vec<f64>>,
}

/// Everything a command produced, not yet written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: String,
    pub out: Option<PathBuf>,
    /// Per-batch figure data and its destination.
    pub figure: Option<(PathBuf, String)>,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
    pub passed: bool,
}

impl Outcome {
    fn new(output: String, settings: &Settings) -> Self {
        Outcome {
            output,
            out: settings.out.clone(),
            figure: None,
            notes: Vec::new(),
            passed: true,
        }
    }
}

/// Largest `|z|` accepted for independent draws and for Gibbs chains.
pub const EXACT_GATE: f64 = 4.0;
pub const MCMC_GATE: f64 = 6.0;

/// Run a parsed command line: compute, write the outputs, and return the exit code.
pub fn run_cli(cli: Cli) -> Result<u8> {
    let outcome = with_threads(cli.threads, || execute(&cli))?;
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    if let Some((path, text)) = &outcome.figure {
        write_file(path, text)?;
    }
    match &outcome.out {
        Some(path) => write_file(path, &outcome.output)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(outcome.output.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    Ok(if outcome.passed { 0 } else { 4 })
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        Some(0) => Err(CliError::validation("thread count must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::validation(format!("cannot start {t} threads: {e}")))?
            .install(f),
        _ => f(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

/// Compute a command's outputs without touching stdout or the filesystem
/// (inputs are still read).
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    match &cli.command {
        Command::Exact(s) => cmd_exact(&s.clone().merged(file)),
        Command::Simulate(s) => cmd_simulate(&s.clone().merged(file)),
        Command::Compare { settings, compare } => {
            let settings = settings.clone().merged(file);
            let compare = compare.clone().merged(settings.compare.clone());
            cmd_compare(&settings, &compare)
        }
        Command::Report(s) => cmd_report(&s.clone().merged(file)),
        Command::Posterior {
            settings,
            posterior,
        } => {
            let settings = settings.clone().merged(file);
            let posterior = posterior.clone().merged(settings.posterior.clone());
            cmd_posterior(&settings, &posterior)
        }
    }
}

pub fn cmd_exact(s: &Settings) -> Result<Outcome> {
    let spec = s.spec()?;
    let law = exact_size_distribution(&spec, s.n()?, &s.quadrature()?)?;
    let output = match s.format() {
        Format::Json => to_json(&law),
        Format::Csv => {
            let mut t = CsvTable::new(&["i", "probability"]);
            t.meta("tool", TOOL);
            t.meta("spec", spec);
            t.meta("n", law.n);
            for (i, p) in law.probabilities.iter().enumerate() {
                t.row([(i + 1).to_string(), p.to_string()]);
            }
            t.render()
        }
    };
    Ok(Outcome::new(output, s))
}

fn simulate_batches(s: &Settings, algorithm: Algorithm) -> Result<Vec<RunResult>> {
    (0..s.batches()?)
        .map(|b| Ok(run(&s.run_config(algorithm, b)?)?))
        .collect()
}

pub fn cmd_simulate(s: &Settings) -> Result<Outcome> {
    let algorithm = match s.algorithms() {
        Some([a]) => *a,
        Some(_) => {
            return Err(CliError::validation(
                "simulate takes exactly one algorithm; use report for several",
            ))
        }
        None => return Err(CliError::validation("--algorithm is required")),
    };
    let runs = simulate_batches(s, algorithm)?;
    let summary = summarize(&runs, None)?;
    let output = match s.format() {
        Format::Json => to_json(&SimulateOutput {
            tool: TOOL.to_owned(),
            runs,
            summary,
        }),
        Format::Csv => {
            let cfg = &runs[0].config;
            let batched = runs.len() > 1;
            let mut header = vec!["i", "p_hat", "se"];
            if batched {
                header.extend(["min", "max", "q025", "q975"]);
            }
            let mut t = CsvTable::new(&header);
            t.meta("tool", TOOL);
            t.meta("spec", cfg.spec);
            t.meta("algorithm", algorithm);
            t.meta("n", cfg.n);
            t.meta("samples", cfg.num_samples);
            t.meta("burn_in", cfg.burn_in);
            t.meta("chains", cfg.chains);
            t.meta("batches", runs.len());
            t.meta("seed", cfg.seed);
            for r in &summary.rows {
                let mut row = vec![r.i.to_string(), r.p_hat.to_string(), r.se.to_string()];
                if let (Some((lo, hi)), Some((q1, q2))) = (r.range, r.quantiles) {
                    row.extend([lo, hi, q1, q2].map(|v| v.to_string()));
                }
                t.row(row);
            }
            t.render()
        }
    };
    Ok(Outcome::new(output, s))
}

fn compare_runs(reference: &SizeDistribution, groups: &[Vec<RunResult>]) -> Result<CompareReport> {
    let comparisons = groups
        .iter()
        .map(|runs| {
            let summary = summarize(runs, Some(reference))?;
            let gate = if summary.algorithm.is_exact() {
                EXACT_GATE
            } else {
                MCMC_GATE
            };
            let pass = summary.max_abs_z.is_some_and(|z| z <= gate);
            Ok(Comparison {
                algorithm: summary.algorithm,
                spec_matches: runs.iter().all(|r| r.config.spec == reference.spec),
                summary,
                gate,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CompareReport {
        tool: TOOL.to_owned(),
        reference: reference.clone(),
        pass: comparisons.iter().all(|c| c.pass),
        comparisons,
    })
}

fn render_report(report: &CompareReport, s: &Settings, figure_out: Option<&Path>) -> Outcome {
    let output = match s.format() {
        Format::Json => to_json(report),
        Format::Csv => {
            let mut header = vec!["i".to_owned(), "probability".to_owned()];
            for c in &report.comparisons {
                for col in ["p_hat", "se", "z"] {
                    header.push(format!("{}_{col}", c.algorithm));
                }
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = CsvTable::new(&header);
            t.meta("tool", TOOL);
            t.meta("spec", report.reference.spec);
            t.meta("n", report.reference.n);
            for (idx, p) in report.reference.probabilities.iter().enumerate() {
                let mut row = vec![(idx + 1).to_string(), fixed6(*p)];
                for c in &report.comparisons {
                    let r = &c.summary.rows[idx];
                    row.extend([fixed6(r.p_hat), fixed6(r.se), fixed6(r.z.unwrap_or(0.0))]);
                }
                t.row(row);
            }
            t.render()
        }
    };
    let mut outcome = Outcome::new(output, s);
    outcome.passed = report.pass;
    for c in &report.comparisons {
        let z = c.summary.max_abs_z.unwrap_or(f64::NAN);
        let dev = c.summary.max_abs_deviation.unwrap_or(f64::NAN);
        outcome.notes.push(format!(
            "{}: max |z| {z:.3} (gate {}), max |p_hat - p| {dev:.6}: {}",
            c.algorithm,
            c.gate,
            if c.pass { "PASS" } else { "FAIL" }
        ));
        if !c.spec_matches {
            outcome.notes.push(format!(
                "{}: runs were simulated under a different spec",
                c.algorithm
            ));
        }
    }
    outcome.notes.push(format!(
        "overall: {}",
        if report.pass { "PASS" } else { "FAIL" }
    ));
    if let Some(path) = figure_out {
        let batched: Vec<&Comparison> = report
            .comparisons
            .iter()
            .filter(|c| c.summary.batches > 1)
            .collect();
        if batched.is_empty() {
            outcome
                .notes
                .push("no replicate batches; figure data not written".to_owned());
        } else {
            let mut t = CsvTable::new(&[
                "algorithm",
                "i",
                "probability",
                "min",
                "max",
                "q025",
                "q975",
            ]);
            for c in batched {
                for r in &c.summary.rows {
                    let (lo, hi) = r.range.unwrap_or_default();
                    let (q1, q2) = r.quantiles.unwrap_or_default();
                    t.row([
                        c.algorithm.to_string(),
                        r.i.to_string(),
                        r.exact.unwrap_or(f64::NAN).to_string(),
                        lo.to_string(),
                        hi.to_string(),
                        q1.to_string(),
                        q2.to_string(),
                    ]);
                }
            }
            outcome.figure = Some((path.to_owned(), t.render()));
        }
    }
    outcome
}

pub fn cmd_compare(s: &Settings, c: &CompareSettings) -> Result<Outcome> {
    if c.inputs.is_empty() {
        return Err(CliError::validation(
            "compare needs at least one simulate output",
        ));
    }
    let groups = c
        .inputs
        .iter()
        .map(|p| read_json::<SimulateOutput>(p).map(|o| o.runs))
        .collect::<Result<Vec<_>>>()?;
    let first = groups
        .iter()
        .flatten()
        .next()
        .ok_or_else(|| CliError::validation("simulate output holds no runs"))?;
    let n = first.config.n;
    if groups.iter().flatten().any(|r| r.config.n != n) {
        return Err(CliError::validation("simulate outputs disagree on n"));
    }
    let reference = match &c.exact {
        Some(path) => read_json::<SizeDistribution>(path)?,
        None => {
            let spec = if s.has_spec() {
                s.spec()?
            } else {
                first.config.spec
            };
            exact_size_distribution(&spec, n, &s.quadrature()?)?
        }
    };
    if reference.n != n {
        return Err(CliError::validation(format!(
            "exact distribution has n = {}, runs have n = {n}",
            reference.n
        )));
    }
    let report = compare_runs(&reference, &groups)?;
    Ok(render_report(&report, s, c.figure_out.as_deref()))
}

pub fn cmd_report(s: &Settings) -> Result<Outcome> {
    let algorithms = s.algorithms().unwrap_or(&Algorithm::ALL);
    if algorithms.is_empty() {
        return Err(CliError::validation("no algorithms selected"));
    }
    let reference = exact_size_distribution(&s.spec()?, s.n()?, &s.quadrature()?)?;
    let groups = algorithms
        .iter()
        .map(|&a| simulate_batches(s, a))
        .collect::<Result<Vec<_>>>()?;
    let report = compare_runs(&reference, &groups)?;
    Ok(render_report(&report, s, None))
}

/// Parse a partition file: one line of comma-separated block sizes. Blank
/// lines and lines starting with `#` are ignored.
pub fn parse_partition(text: &str, path: &Path) -> Result<Partition> {
    let err = |line: usize, message: String| CliError::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut found: Option<(usize, Vec<u32>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if found.is_some() {
            return Err(err(
                line,
                "expected a single line of block sizes".to_owned(),
            ));
        }
        let sizes = content
            .split(',')
            .map(|field| match field.trim().parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(err(line, format!("invalid block size {:?}", field.trim()))),
            })
            .collect::<Result<Vec<_>>>()?;
        found = Some((line, sizes));
    }
    let (line, sizes) = found.ok_or_else(|| err(1, "no block sizes found".to_owned()))?;
    Partition::from_sizes(&sizes).map_err(|e| err(line, e.to_string()))
}

pub fn cmd_posterior(s: &Settings, ps: &PosteriorSettings) -> Result<Outcome> {
    let spec = s.spec()?;
    let path = ps
        .partition
        .as_deref()
        .ok_or_else(|| CliError::validation("--partition is required"))?;
    let partition = parse_partition(&read_file(path)?, path)?;
    let draws = ps.draws.unwrap_or(0);
    if draws > 0 && s.format() == Format::Csv {
        return Err(CliError::validation(
            "jump draws are only emitted with --format json",
        ));
    }
    let needs_rng = ps.u.is_none() || draws > 0;
    let seed = if needs_rng { Some(s.seed()?) } else { s.seed };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let (u, u_drawn) = match ps.u {
        Some(u) => (u, false),
        None => (
            sample_u(&spec, &partition, &mut rng, &s.quadrature()?)?.value(),
            true,
        ),
    };
    let description = posterior_description(&spec, &partition, u)?;
    let jumps: Vec<Vec<f64>> = (0..draws)
        .map(|_| {
            description
                .atoms
                .iter()
                .map(|a| a.jump_law.sample(&mut rng))
                .collect()
        })
        .collect();
    let output = match s.format() {
        Format::Json => to_json(&PosteriorOutput {
            tool: TOOL.to_owned(),
            sizes: partition.sizes().to_vec(),
            u_drawn,
            seed,
            description,
            jumps,
        }),
        Format::Csv => {
            let mut t = CsvTable::new(&["block", "size", "jump_mean", "jump_variance"]);
            t.meta("tool", TOOL);
            t.meta("spec", spec);
            t.meta("u", u);
            t.meta("u_drawn", u_drawn);
            t.meta("shift", description.tilted_intensity_shift);
            for (k, atom) in description.atoms.iter().enumerate() {
                t.row([
                    (k + 1).to_string(),
                    atom.block_size.to_string(),
                    atom.jump_law.mean().to_string(),
                    atom.jump_law.variance().to_string(),
                ]);
            }
            t.render()
        }
    };
    Ok(Outcome::new(output, s))
}
