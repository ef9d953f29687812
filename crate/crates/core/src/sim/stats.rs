//! Summaries and goodness-of-fit statistics for simulated block counts and
//! latent-variable draws.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::exact::SizeDistribution;
use crate::math::inverse_cdf::InverseCdfSampler;
use crate::math::quadrature::{
    integrate_log_density, integrate_log_density_between, QuadratureConfig,
};
use crate::sim::{Algorithm, RunResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Number of blocks.
    pub i: usize,
    pub p_hat: f64,
    /// `sqrt(p̂(1 − p̂)/N)` over all pooled draws.
    pub se: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    /// `(p̂ − p)/sqrt(p(1 − p)/N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// Min and max of the per-batch estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    /// 2.5% and 97.5% quantiles of the per-batch estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub algorithm: Algorithm,
    pub batches: usize,
    pub total_samples: usize,
    pub rows: Vec<SummaryRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_z: Option<f64>,
}

/// Pool one or more batches of one algorithm and compare with `exact` when given.
pub fn summarize(results: &[RunResult], exact: Option<&SizeDistribution>) -> Result<Summary> {
    let first = results
        .first()
        .ok_or_else(|| Error::usage("summarize needs at least one run"))?;
    let n = first.config.n;
    let algorithm = first.config.algorithm;
    for r in results {
        if r.config.n != n || r.config.spec != first.config.spec {
            return Err(Error::usage("runs disagree on n or spec"));
        }
        if r.config.algorithm != algorithm {
            return Err(Error::usage("runs mix algorithms"));
        }
    }
    if let Some(e) = exact {
        if e.n != n {
            return Err(Error::usage(format!(
                "exact distribution has n = {}, runs have n = {n}",
                e.n
            )));
        }
    }
    let mut counts = vec![0u64; n];
    for r in results {
        for (c, x) in counts.iter_mut().zip(r.counts()) {
            *c += x;
        }
    }
    let total: usize = results.iter().map(|r| r.block_count_draws.len()).sum();
    let nf = total as f64;
    let batched = results.len() > 1;

    let rows: Vec<SummaryRow> = (0..n)
        .map(|idx| {
            let p_hat = counts[idx] as f64 / nf;
            let exact_p = exact.map(|e| e.probabilities[idx]);
            let z = exact_p.map(|p| {
                let sd = (p * (1.0 - p) / nf).sqrt();
                let d = p_hat - p;
                if sd > 0.0 {
                    d / sd
                } else if d == 0.0 {
                    0.0
                } else {
                    d.signum() * f64::INFINITY
                }
            });
            let (range, quantiles) = if batched {
                let mut per: Vec<f64> = results
                    .iter()
                    .map(|r| r.size_distribution.probabilities[idx])
                    .collect();
                per.sort_by(f64::total_cmp);
                (
                    Some((per[0], per[per.len() - 1])),
                    Some((quantile(&per, 0.025), quantile(&per, 0.975))),
                )
            } else {
                (None, None)
            };
            SummaryRow {
                i: idx + 1,
                p_hat,
                se: (p_hat * (1.0 - p_hat) / nf).sqrt(),
                exact: exact_p,
                z,
                range,
                quantiles,
            }
        })
        .collect();
    let max_abs_deviation = exact.map(|_| {
        rows.iter()
            .map(|r| (r.p_hat - r.exact.unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    });
    let max_abs_z = exact.map(|_| {
        rows.iter()
            .map(|r| r.z.unwrap_or(0.0).abs())
            .fold(0.0, f64::max)
    });
    Ok(Summary {
        n,
        algorithm,
        batches: results.len(),
        total_samples: total,
        rows,
        max_abs_deviation,
        max_abs_z,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `½ Σ |pᵢ − qᵢ|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test of homogeneity on histograms over the same bins.
/// Adjacent bins are pooled until every expected count is at least 5.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::usage("histograms have different lengths"));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::usage(
            "both histograms need at least one observation",
        ));
    }
    let share_a = na as f64 / (na + nb) as f64;
    let enough = |x: u64, y: u64| {
        let t = (x + y) as f64;
        t * share_a >= 5.0 && t * (1.0 - share_a) >= 5.0
    };
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let (mut ga, mut gb) = (0, 0);
    for (&x, &y) in a.iter().zip(b) {
        ga += x;
        gb += y;
        if enough(ga, gb) {
            groups.push((ga, gb));
            ga = 0;
            gb = 0;
        }
    }
    if ga + gb > 0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += ga;
                last.1 += gb;
            }
            None => groups.push((ga, gb)),
        }
    }
    if groups.len() < 2 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            degrees_of_freedom: 0,
            p_value: 1.0,
        });
    }
    let statistic: f64 = groups
        .iter()
        .map(|&(x, y)| {
            let t = (x + y) as f64;
            let (ea, eb) = (t * share_a, t * (1.0 - share_a));
            (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb
        })
        .sum();
    let df = groups.len() - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::numeric(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: df,
        p_value: dist.sf(statistic),
    })
}

/// Interior cut points splitting a density into `bins` cells of roughly equal mass.
pub fn quantile_edges(sampler: &InverseCdfSampler, bins: usize) -> Vec<f64> {
    (1..bins)
        .map(|j| sampler.draw(j as f64 / bins as f64))
        .collect()
}

/// Probability of each cell `(0, e₁], (e₁, e₂], …, (e_last, ∞)` under an
/// unnormalized log-density, by quadrature.
pub fn bin_probabilities<F>(
    log_density: F,
    edges: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    let total = integrate_log_density(&log_density, cfg)?;
    let mut bounds = Vec::with_capacity(edges.len() + 2);
    bounds.push(0.0);
    bounds.extend_from_slice(edges);
    bounds.push(f64::INFINITY);
    bounds
        .windows(2)
        .map(|w| Ok((integrate_log_density_between(&log_density, w[0], w[1], cfg)? - total).exp()))
        .collect()
}

/// Empirical cell frequencies of `samples` for the same cells.
pub fn bin_frequencies(samples: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; edges.len() + 1];
    for &x in samples {
        counts[edges.partition_point(|e| *e < x)] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / samples.len() as f64)
        .collect()
}

/// `Σ |empirical − target|` over the cells.
pub fn binned_l1(samples: &[f64], edges: &[f64], target: &[f64]) -> f64 {
    bin_frequencies(samples, edges)
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// `sup_x |F̂(x) − F(x)|` for the empirical CDF of `samples`.
pub fn sup_cdf_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Standard error of a mean from `batches` contiguous batch means; `None`
/// when the series is too short.
pub fn batch_means_se(series: &[f64], batches: usize) -> Option<f64> {
    if batches < 2 || series.len() < 2 * batches {
        return None;
    }
    let size = series.len() / batches;
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Some((var / batches as f64).sqrt())
}
