//! Exact law of the number of blocks among `n` items.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::quadrature::{integrate_log_density_many, QuadratureConfig};
use crate::math::special::{ln_gamma, lse};
use crate::partition::Partition;
use crate::process::{phi, ProcessFamily, TiltedSpec};
use crate::sim::Algorithm;
use crate::urn::log_eppf_marginal;

/// Generalized factorial coefficients in log space:
/// `C(m, k) = Σ over partitions of m items into k blocks of ∏_j Γ(n_j − α)/Γ(1 − α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StirlingTable {
    n: usize,
    alpha: f64,
    /// Row `m` holds `ln C(m, k)` for `k = 0..=m`.
    log_values: Vec<Vec<f64>>,
}

impl StirlingTable {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        rows.push(vec![0.0]);
        for m in 0..n {
            let prev = &rows[m];
            let mut next = vec![f64::NEG_INFINITY; m + 2];
            for (k, slot) in next.iter_mut().enumerate().skip(1) {
                // C(m+1, k) = C(m, k−1) + (m − kα) C(m, k)
                let carry = prev[k - 1];
                let grow = if k <= m {
                    let factor = m as f64 - k as f64 * alpha;
                    if factor > 0.0 {
                        prev[k] + factor.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    f64::NEG_INFINITY
                };
                *slot = lse([carry, grow]);
            }
            rows.push(next);
        }
        Ok(StirlingTable {
            n,
            alpha,
            log_values: rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `ln C(m, k)`; `−∞` outside `1 ≤ k ≤ m ≤ n`.
    pub fn log_value(&self, m: usize, k: usize) -> f64 {
        if m > self.n || k > m || (k == 0 && m > 0) {
            return f64::NEG_INFINITY;
        }
        self.log_values[m][k]
    }
}

/// Where a size distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    BruteForce,
    Simulated(Algorithm),
}

/// `probabilities[i]` is `P{number of blocks = i + 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub n: usize,
    pub probabilities: Vec<f64>,
    pub provenance: Provenance,
    pub spec: TiltedSpec,
}

impl SizeDistribution {
    fn from_logs(spec: &TiltedSpec, logs: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let total = lse(logs.iter().copied());
        if !total.is_finite() {
            return Err(Error::numeric(
                "block-count weights are all zero or infinite",
            ));
        }
        Ok(SizeDistribution {
            n: logs.len(),
            probabilities: logs.iter().map(|l| (l - total).exp()).collect(),
            provenance,
            spec: *spec,
        })
    }

    /// `P{number of blocks = k}` for `1 ≤ k ≤ n`.
    pub fn probability(&self, k: usize) -> f64 {
        if k == 0 || k > self.n {
            0.0
        } else {
            self.probabilities[k - 1]
        }
    }
}

/// Exact block-count distribution for `n` items.
pub fn exact_size_distribution(
    spec: &TiltedSpec,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<SizeDistribution> {
    spec.validate()?;
    cfg.validate()?;
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    let logs = match spec.family {
        ProcessFamily::GeneralizedGamma {
            alpha: 0.0, theta, ..
        } => {
            // the u-integral does not depend on k
            let table = StirlingTable::new(0.0, n)?;
            (1..=n)
                .map(|k| table.log_value(n, k) + k as f64 * theta.ln())
                .collect()
        }
        ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
            let table = StirlingTable::new(alpha, n)?;
            let nf = n as f64;
            let q = spec.q;
            let gamma = spec.gamma;
            let integrals = integrate_log_density_many(
                n,
                |u: f64, out: &mut [f64]| {
                    let a = gamma + u;
                    let lab = (a + b).ln();
                    let base = -spec.psi0(a) - nf * lab + (nf + q - 1.0) * u.ln();
                    for (k, o) in out.iter_mut().enumerate() {
                        let v = base + (k + 1) as f64 * alpha * lab;
                        *o = if v.is_nan() { f64::NEG_INFINITY } else { v };
                    }
                },
                0.0,
                f64::INFINITY,
                cfg,
            )?;
            (1..=n)
                .map(|k| table.log_value(n, k) + k as f64 * theta.ln() + integrals[k - 1])
                .collect()
        }
        ProcessFamily::GeneralizedDirichlet { theta, c } => {
            gd_block_count_logs(spec, theta, c, n, cfg)?
        }
    };
    SizeDistribution::from_logs(spec, logs, Provenance::Exact)
}

/// For each quadrature node `u`, sum `∏_k κ_{n_k}(γ+u)` over all partitions
/// with a given number of blocks via
/// `D(m+1, k) = Σ_j binom(m, j) W_{j+1} D(m−j, k−1)`, then integrate.
fn gd_block_count_logs(
    spec: &TiltedSpec,
    theta: f64,
    c: u32,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let log_binom: Vec<Vec<f64>> = (0..n)
        .map(|m| {
            (0..=m)
                .map(|j| {
                    ln_gamma(m as f64 + 1.0)
                        - ln_gamma(j as f64 + 1.0)
                        - ln_gamma((m - j) as f64 + 1.0)
                })
                .collect()
        })
        .collect();
    let log_gamma_m: Vec<f64> = (1..=n).map(|m| ln_gamma(m as f64)).collect();
    let nf = n as f64;
    let q = spec.q;
    let gamma = spec.gamma;
    integrate_log_density_many(
        n,
        |u: f64, out: &mut [f64]| {
            let a = gamma + u;
            // log κ_m(a) for m = 1..=n
            let w: Vec<f64> = (1..=n)
                .map(|m| theta.ln() + log_gamma_m[m - 1] + phi(m as f64, a, c))
                .collect();
            // d[m][k], m items in k blocks
            let mut d = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
            d[0][0] = 0.0;
            let mut terms = Vec::with_capacity(n);
            for m in 0..n {
                for k in 1..=m + 1 {
                    terms.clear();
                    for j in 0..=m {
                        let prev = d[m - j][k - 1];
                        if prev > f64::NEG_INFINITY {
                            terms.push(log_binom[m][j] + w[j] + prev);
                        }
                    }
                    d[m + 1][k] = lse(terms.iter().copied());
                }
            }
            let base = -spec.psi0(a) + (nf + q - 1.0) * u.ln();
            for (k, o) in out.iter_mut().enumerate() {
                let v = base + d[n][k + 1];
                *o = if v.is_nan() { f64::NEG_INFINITY } else { v };
            }
        },
        0.0,
        f64::INFINITY,
        cfg,
    )
}

/// Largest `n` accepted by the brute-force enumerator (Bell(10) = 115 975 partitions).
pub const BRUTE_FORCE_MAX_N: usize = 10;

/// Block-count distribution by enumerating every set partition of `n` items
/// and integrating its marginal probability. Partitions sharing a multiset of
/// block sizes share one quadrature.
pub fn brute_force_size_distribution(
    spec: &TiltedSpec,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<SizeDistribution> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::usage(format!(
            "brute-force enumeration is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
    for_each_set_partition(n, |sizes| {
        let mut key = sizes.to_vec();
        key.sort_unstable_by(|a, b| b.cmp(a));
        *counts.entry(key).or_insert(0) += 1;
    });
    let mut profiles: Vec<(Vec<u32>, u64)> = counts.into_iter().collect();
    profiles.sort();
    let mut by_k: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (sizes, count) in profiles {
        let p = Partition::from_sizes(&sizes)?;
        let l = log_eppf_marginal(spec, &p, cfg)?;
        by_k[sizes.len() - 1].push(l + (count as f64).ln());
    }
    let logs = by_k.into_iter().map(lse).collect();
    SizeDistribution::from_logs(spec, logs, Provenance::BruteForce)
}

/// Visit the block sizes of every set partition of `n` labelled items
/// (restricted growth strings).
fn for_each_set_partition(n: usize, mut visit: impl FnMut(&[u32])) {
    fn recurse(i: usize, n: usize, sizes: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
        if i == n {
            visit(sizes);
            return;
        }
        for k in 0..sizes.len() {
            sizes[k] += 1;
            recurse(i + 1, n, sizes, visit);
            sizes[k] -= 1;
        }
        sizes.push(1);
        recurse(i + 1, n, sizes, visit);
        sizes.pop();
    }
    let mut sizes = Vec::with_capacity(n);
    recurse(0, n, &mut sizes, &mut visit);
}
