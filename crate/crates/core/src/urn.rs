//! Predictive urn weights and partition probabilities.
//!
//! All weights are carried as logs. Conditional weights follow the latent-`u`
//! urn; unconditional weights average them against the density of `U` given
//! the partition, by quadrature unless a closed form exists.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::quadrature::{
    integrate_log_density, integrate_log_density_many, QuadratureConfig,
};
use crate::math::special::lse;
use crate::partition::Partition;
use crate::process::{phi, ProcessFamily, TiltedSpec};

/// Log weights for "open a new block" and "join block k".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnWeights {
    pub log_new: f64,
    pub log_join: Vec<f64>,
    pub normalized: bool,
}

/// Outcome of sampling from an urn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    New,
    Join(usize),
}

impl UrnWeights {
    fn only_new() -> Self {
        UrnWeights {
            log_new: 0.0,
            log_join: Vec::new(),
            normalized: true,
        }
    }

    /// Log of the sum of all weights.
    pub fn log_total(&self) -> f64 {
        lse(std::iter::once(self.log_new).chain(self.log_join.iter().copied()))
    }

    pub fn normalize(mut self) -> Self {
        if self.normalized {
            return self;
        }
        let total = self.log_total();
        self.log_new -= total;
        self.log_join.iter_mut().for_each(|w| *w -= total);
        self.normalized = true;
        self
    }

    /// Linear-scale probabilities: joins first, then new.
    pub fn probabilities(&self) -> Vec<f64> {
        let w = if self.normalized {
            self.clone()
        } else {
            self.clone().normalize()
        };
        w.log_join
            .iter()
            .chain(std::iter::once(&w.log_new))
            .map(|l| l.exp())
            .collect()
    }

    /// Select a choice given a uniform variate in `[0, 1)`.
    pub fn pick(&self, uniform: f64) -> Draw {
        debug_assert!(self.normalized);
        let mut acc = 0.0;
        for (k, l) in self.log_join.iter().enumerate() {
            acc += l.exp();
            if uniform < acc {
                return Draw::Join(k);
            }
        }
        Draw::New
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        self.pick(rng.random::<f64>())
    }
}

/// `ln u` plus the shared part of the conditional weights, and the per-choice
/// residuals. Splitting them keeps normalized weights free of any `u`
/// dependence that cancels analytically.
struct Split {
    common: f64,
    new: f64,
    join: Vec<f64>,
}

fn conditional_split(spec: &TiltedSpec, p: &Partition, u: f64) -> Split {
    let a = spec.gamma + u;
    match spec.family {
        ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
            // κ₁ = θ(a+b)^{α−1}; τ_{m+1}/τ_m = (m−α)/(a+b)
            let lab = (a + b).ln();
            let new = if alpha == 0.0 {
                theta.ln()
            } else {
                theta.ln() + alpha * lab
            };
            Split {
                common: u.ln() - lab,
                new,
                join: p.sizes().iter().map(|&m| (m as f64 - alpha).ln()).collect(),
            }
        }
        ProcessFamily::GeneralizedDirichlet { theta, c } => Split {
            common: u.ln(),
            new: theta.ln() + phi(1.0, a, c),
            join: p
                .sizes()
                .iter()
                .map(|&m| {
                    let m = m as f64;
                    m.ln() + phi(m + 1.0, a, c) - phi(m, a, c)
                })
                .collect(),
        },
    }
}

fn check_u(u: f64) -> Result<()> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain(format!(
            "u must be positive and finite, got {u}"
        )));
    }
    Ok(())
}

/// Unnormalized conditional weights `ω(u, ·)`; their sum is `φ(u, Xₙ)`.
pub fn conditional_urn_weights_raw(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<UrnWeights> {
    check_u(u)?;
    let s = conditional_split(spec, p, u);
    Ok(UrnWeights {
        log_new: s.common + s.new,
        log_join: s.join.iter().map(|j| s.common + j).collect(),
        normalized: false,
    })
}

/// Normalized predictive weights given the latent `u`.
pub fn conditional_urn_weights(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<UrnWeights> {
    check_u(u)?;
    Ok(normalized_conditional(spec, p, u))
}

pub(crate) fn normalized_conditional(spec: &TiltedSpec, p: &Partition, u: f64) -> UrnWeights {
    let s = conditional_split(spec, p, u);
    UrnWeights {
        log_new: s.new,
        log_join: s.join,
        normalized: false,
    }
    .normalize()
}

/// `ln φ(u, Xₙ)`, the total unnormalized conditional weight.
pub fn log_phi_total(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<f64> {
    Ok(conditional_urn_weights_raw(spec, p, u)?.log_total())
}

/// `Σ_k ln κ_{n_k}(γ + u)`.
pub fn log_eppf_conditional(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<f64> {
    check_u(u)?;
    Ok(sum_log_kappa(spec, p.sizes(), spec.gamma + u))
}

fn sum_log_kappa(spec: &TiltedSpec, sizes: &[u32], a: f64) -> f64 {
    sizes.iter().map(|&m| spec.tau(m as f64, a)).sum()
}

/// Unnormalized joint log density of `(pₙ, Uₙ = u)`:
/// `−ψ₀(γ+u) + Σ_k ln κ_{n_k}(γ+u) + (n+q−1) ln u`.
pub fn log_joint_partition_u(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::usage("the joint density needs at least one item"));
    }
    check_u(u)?;
    Ok(joint(spec, p.sizes(), p.n(), u))
}

#[inline]
pub(crate) fn joint(spec: &TiltedSpec, sizes: &[u32], n: usize, u: f64) -> f64 {
    let a = spec.gamma + u;
    let v = -spec.psi0(a) + sum_log_kappa(spec, sizes, a) + (n as f64 + spec.q - 1.0) * u.ln();
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Unnormalized marginal log probability of a partition, integrating `u` out.
pub fn log_eppf_marginal(spec: &TiltedSpec, p: &Partition, cfg: &QuadratureConfig) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::usage("the marginal EPPF needs at least one item"));
    }
    let sizes = p.sizes().to_vec();
    let n = p.n();
    integrate_log_density(|u| joint(spec, &sizes, n, u), cfg)
}

/// Averages of the conditional weights against `f_{U|X}`, relative to its
/// normalizer. Generalized Dirichlet joins are stored per distinct block size.
#[derive(Debug, Clone)]
struct Moments {
    log_new: f64,
    join: JoinMoments,
}

#[derive(Debug, Clone)]
enum JoinMoments {
    /// Generalized gamma: `ln(m − α) + shared`.
    Shared {
        alpha: f64,
        shared: f64,
    },
    BySize(Vec<(u32, f64)>),
}

impl Moments {
    fn log_join(&self, size: u32) -> f64 {
        match &self.join {
            JoinMoments::Shared { alpha, shared } => (size as f64 - alpha).ln() + shared,
            JoinMoments::BySize(table) => table
                .iter()
                .find(|(s, _)| *s == size)
                .map(|(_, v)| *v)
                .expect("moment table covers every block size"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    /// Generalized gamma: f_U depends on the partition through `(n, ℵ)` only.
    Counts(usize, usize),
    Profile(Vec<u32>),
}

/// Unconditional predictive weights for one spec, memoized per partition shape.
/// Safe to share between threads; the memo only ever holds deterministic values.
#[derive(Debug)]
pub struct UnconditionalUrn {
    spec: TiltedSpec,
    cfg: QuadratureConfig,
    cache: Mutex<HashMap<CacheKey, Arc<Moments>>>,
}

impl UnconditionalUrn {
    pub fn new(spec: TiltedSpec, cfg: QuadratureConfig) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        Ok(UnconditionalUrn {
            spec,
            cfg,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &TiltedSpec {
        &self.spec
    }

    /// Normalized weights.
    pub fn weights(&self, p: &Partition) -> Result<UrnWeights> {
        Ok(self.raw(p)?.normalize())
    }

    /// Weights scaled so that they sum to `n + q`.
    pub fn raw(&self, p: &Partition) -> Result<UrnWeights> {
        if p.is_empty() {
            return Ok(UrnWeights::only_new());
        }
        let spec = &self.spec;
        let n = p.n() as f64;
        let k = p.num_blocks() as f64;
        match spec.family {
            ProcessFamily::GeneralizedGamma { alpha, .. } if spec.damping() == 0.0 => {
                // closed form when the intensity carries no exponential damping
                return Ok(UrnWeights {
                    log_new: (spec.q + alpha * k).ln(),
                    log_join: p.sizes().iter().map(|&m| (m as f64 - alpha).ln()).collect(),
                    normalized: false,
                });
            }
            ProcessFamily::GeneralizedGamma {
                alpha: 0.0, theta, ..
            } => {
                // the u-average of 1/(a+b) cancels against the identity Σω = n+q
                let scale = (n + spec.q).ln() - (theta + n).ln();
                return Ok(UrnWeights {
                    log_new: theta.ln() + scale,
                    log_join: p.sizes().iter().map(|&m| (m as f64).ln() + scale).collect(),
                    normalized: false,
                });
            }
            _ => {}
        }
        let moments = self.moments(p)?;
        let log_join = p.sizes().iter().map(|&m| moments.log_join(m)).collect();
        Ok(UrnWeights {
            log_new: moments.log_new,
            log_join,
            normalized: false,
        })
    }

    /// Number of distinct partition shapes integrated so far.
    pub fn cached_shapes(&self) -> usize {
        self.cache.lock().expect("urn cache poisoned").len()
    }

    fn key(&self, p: &Partition) -> CacheKey {
        match self.spec.family {
            ProcessFamily::GeneralizedGamma { .. } => CacheKey::Counts(p.n(), p.num_blocks()),
            ProcessFamily::GeneralizedDirichlet { .. } => CacheKey::Profile(p.size_profile()),
        }
    }

    fn moments(&self, p: &Partition) -> Result<Arc<Moments>> {
        let key = self.key(p);
        if let Some(m) = self.cache.lock().expect("urn cache poisoned").get(&key) {
            return Ok(Arc::clone(m));
        }
        // integrate outside the lock; a concurrent duplicate computes the same bits
        let m = Arc::new(compute_moments(&self.spec, p, &self.cfg)?);
        self.cache
            .lock()
            .expect("urn cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&m));
        Ok(m)
    }
}

fn compute_moments(spec: &TiltedSpec, p: &Partition, cfg: &QuadratureConfig) -> Result<Moments> {
    let n = p.n();
    let mut distinct: Vec<u32> = p.sizes().to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let sizes = p.sizes().to_vec();
    let gamma = spec.gamma;

    match spec.family {
        ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
            // components: f_U, u(a+b)^{α−1} f_U, u/(a+b) f_U
            let k = p.num_blocks() as f64;
            let nf = n as f64;
            let logs = integrate_log_density_many(
                3,
                |u: f64, out: &mut [f64]| {
                    let a = gamma + u;
                    let lab = (a + b).ln();
                    let f = -spec.psi0(a) + (alpha * k - nf) * lab + (nf + spec.q - 1.0) * u.ln();
                    let f = if f.is_nan() { f64::NEG_INFINITY } else { f };
                    out[0] = f;
                    out[1] = f + u.ln() + (alpha - 1.0) * lab;
                    out[2] = f + u.ln() - lab;
                },
                0.0,
                f64::INFINITY,
                cfg,
            )?;
            let base = logs[0];
            Ok(Moments {
                log_new: theta.ln() + logs[1] - base,
                join: JoinMoments::Shared {
                    alpha,
                    shared: logs[2] - base,
                },
            })
        }
        ProcessFamily::GeneralizedDirichlet { theta, c } => {
            let dim = 2 + distinct.len();
            let logs = integrate_log_density_many(
                dim,
                |u: f64, out: &mut [f64]| {
                    let a = gamma + u;
                    let f = joint(spec, &sizes, n, u);
                    let lu = u.ln();
                    out[0] = f;
                    out[1] = f + lu + phi(1.0, a, c);
                    for (o, &m) in out[2..].iter_mut().zip(&distinct) {
                        let m = m as f64;
                        *o = f + lu + phi(m + 1.0, a, c) - phi(m, a, c);
                    }
                },
                0.0,
                f64::INFINITY,
                cfg,
            )?;
            let base = logs[0];
            Ok(Moments {
                log_new: theta.ln() + logs[1] - base,
                join: JoinMoments::BySize(
                    distinct
                        .iter()
                        .zip(&logs[2..])
                        .map(|(&m, l)| (m, (m as f64).ln() + l - base))
                        .collect(),
                ),
            })
        }
    }
}

/// Normalized predictive weights with `u` integrated out.
pub fn unconditional_urn_weights(
    spec: &TiltedSpec,
    p: &Partition,
    cfg: &QuadratureConfig,
) -> Result<UrnWeights> {
    UnconditionalUrn::new(*spec, *cfg)?.weights(p)
}

/// `ln E[φ(Uₙ, Xₙ) | Xₙ]` evaluated by quadrature (no closed forms), for
/// checking the identity `E[φ] = n + q`.
pub fn log_expected_phi(spec: &TiltedSpec, p: &Partition, cfg: &QuadratureConfig) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::usage("expected phi needs at least one item"));
    }
    spec.validate()?;
    let m = compute_moments(spec, p, cfg)?;
    let joins = p.sizes().iter().map(|&s| m.log_join(s));
    Ok(lse(std::iter::once(m.log_new)
        .chain(joins)
        .collect::<Vec<_>>()))
}

/// Full conditional of item `item` given the others: the urn evaluated on the
/// partition with `item` removed. With `u` given the conditional urn is used,
/// otherwise `u` is integrated out.
pub fn gibbs_full_conditional_weights(
    spec: &TiltedSpec,
    p: &Partition,
    item: usize,
    u: Option<f64>,
    cfg: &QuadratureConfig,
) -> Result<UrnWeights> {
    let mut rest = p.clone();
    rest.remove_item(item)?;
    match u {
        Some(u) => conditional_urn_weights(spec, &rest, u),
        None => unconditional_urn_weights(spec, &rest, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::NamedPreset;
    use approx::assert_relative_eq;

    fn probs(w: &UrnWeights) -> Vec<f64> {
        w.probabilities()
    }

    fn pd(alpha: f64, q: f64) -> TiltedSpec {
        NamedPreset::PoissonDirichlet { alpha, q }.expand().unwrap()
    }

    fn ngg() -> TiltedSpec {
        NamedPreset::NormalizedGeneralizedGamma {
            alpha: 0.5,
            theta: 1.0,
            b: 1.0,
        }
        .expand()
        .unwrap()
    }

    fn dirichlet(theta: f64) -> TiltedSpec {
        NamedPreset::Dirichlet { theta }.expand().unwrap()
    }

    fn sizes(s: &[u32]) -> Partition {
        Partition::from_sizes(s).unwrap()
    }

    #[test]
    fn conditional_examples() {
        for u in [0.3, 1.0, 17.0] {
            let w = conditional_urn_weights(&dirichlet(1.0), &sizes(&[2]), u).unwrap();
            assert_relative_eq!(probs(&w)[..], [2.0 / 3.0, 1.0 / 3.0][..], epsilon = 1e-14);
        }
        let w = conditional_urn_weights(&pd(0.5, 1.0), &sizes(&[1]), 1.0).unwrap();
        assert_relative_eq!(probs(&w)[..], [1.0 / 3.0, 2.0 / 3.0][..], epsilon = 1e-14);
        let w = conditional_urn_weights(&ngg(), &sizes(&[1]), 3.0).unwrap();
        assert_relative_eq!(probs(&w)[..], [0.2, 0.8][..], epsilon = 1e-14);
    }

    #[test]
    fn raw_conditional_sum_is_phi() {
        let spec = ngg();
        let p = sizes(&[3, 1]);
        let u = 2.0;
        let raw = conditional_urn_weights_raw(&spec, &p, u).unwrap();
        let a = spec.gamma + u;
        let want = lse([
            u.ln() + spec.tau(1.0, a),
            u.ln() + spec.tau(4.0, a) - spec.tau(3.0, a),
            u.ln() + spec.tau(2.0, a) - spec.tau(1.0, a),
        ]);
        assert_relative_eq!(raw.log_total(), want, epsilon = 1e-13);
    }

    #[test]
    fn unconditional_examples() {
        let cfg = QuadratureConfig::default();
        let w = unconditional_urn_weights(&dirichlet(1.0), &sizes(&[2]), &cfg).unwrap();
        assert_relative_eq!(probs(&w)[..], [2.0 / 3.0, 1.0 / 3.0][..], epsilon = 1e-14);

        let w = unconditional_urn_weights(&pd(0.5, 1.0), &sizes(&[1, 1]), &cfg).unwrap();
        assert_relative_eq!(
            probs(&w)[..],
            [0.5 / 3.0, 0.5 / 3.0, 2.0 / 3.0][..],
            epsilon = 1e-14
        );

        let urn = UnconditionalUrn::new(ngg(), cfg).unwrap();
        let raw = urn.raw(&sizes(&[1])).unwrap();
        assert_relative_eq!(raw.log_total().exp(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn pd_closed_form_matches_quadrature() {
        let cfg = QuadratureConfig::default();
        let spec = pd(0.5, 1.0);
        let p = sizes(&[1, 1]);
        let closed = UnconditionalUrn::new(spec, cfg).unwrap().raw(&p).unwrap();
        let quad = compute_moments(&spec, &p, &cfg).unwrap();
        assert_relative_eq!(closed.log_new, quad.log_new, epsilon = 1e-8);
        assert_relative_eq!(closed.log_join[0], quad.log_join(1), epsilon = 1e-8);
    }

    #[test]
    fn gibbs_examples() {
        let cfg = QuadratureConfig::default();
        let w = gibbs_full_conditional_weights(&dirichlet(1.0), &sizes(&[2, 1]), 2, None, &cfg)
            .unwrap();
        assert_relative_eq!(probs(&w)[..], [2.0 / 3.0, 1.0 / 3.0][..], epsilon = 1e-14);

        let spec = pd(0.5, 1.0);
        let w = gibbs_full_conditional_weights(&spec, &sizes(&[1, 1]), 1, Some(1.0), &cfg).unwrap();
        let want = conditional_urn_weights(&spec, &sizes(&[1]), 1.0).unwrap();
        assert_eq!(w, want);

        let w = gibbs_full_conditional_weights(&spec, &sizes(&[2]), 0, None, &cfg).unwrap();
        let want = unconditional_urn_weights(&spec, &sizes(&[1]), &cfg).unwrap();
        assert_eq!(w, want);
    }

    #[test]
    fn eppf_conditional_examples() {
        assert_eq!(
            log_eppf_conditional(&dirichlet(1.0), &Partition::new(), 1.0).unwrap(),
            0.0
        );
        let u: f64 = 0.7;
        assert_relative_eq!(
            log_eppf_conditional(&dirichlet(1.0), &sizes(&[2, 1]), u).unwrap(),
            -3.0 * (1.0 + u).ln(),
            epsilon = 1e-13
        );
        assert_relative_eq!(
            log_eppf_conditional(&pd(0.5, 1.0), &sizes(&[2]), 1.0).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn joint_examples() {
        let spec = TiltedSpec {
            family: ProcessFamily::GeneralizedGamma {
                alpha: 0.0,
                theta: 2.0,
                b: 1.0,
            },
            q: 0.0,
            gamma: 0.0,
        };
        assert_relative_eq!(
            log_joint_partition_u(&spec, &sizes(&[1]), 1.0).unwrap(),
            -2.0 * 2f64.ln(),
            epsilon = 1e-13
        );
        assert_relative_eq!(
            log_joint_partition_u(&pd(0.5, 1.0), &sizes(&[1]), 1.0).unwrap(),
            -2.0,
            epsilon = 1e-13
        );
        let tiny = log_joint_partition_u(&ngg(), &sizes(&[2, 1]), 1e-300).unwrap();
        assert!(tiny < -1000.0);
    }

    #[test]
    fn marginal_ratios() {
        let cfg = QuadratureConfig::default();
        let spec = dirichlet(1.0);
        let r = log_eppf_marginal(&spec, &sizes(&[2]), &cfg).unwrap()
            - log_eppf_marginal(&spec, &sizes(&[1, 1]), &cfg).unwrap();
        assert!(r.abs() < 1e-9);
        let spec = pd(0.5, 1.0);
        let r = log_eppf_marginal(&spec, &sizes(&[2]), &cfg).unwrap()
            - log_eppf_marginal(&spec, &sizes(&[1, 1]), &cfg).unwrap();
        assert_relative_eq!(r.exp(), 0.5 / 1.5, max_relative = 1e-9);
    }

    #[test]
    fn picks_follow_cumulative_order() {
        let w = conditional_urn_weights(&dirichlet(1.0), &sizes(&[1, 1]), 1.0).unwrap();
        assert_eq!(w.pick(0.0), Draw::Join(0));
        assert_eq!(w.pick(0.5), Draw::Join(1));
        assert_eq!(w.pick(0.99), Draw::New);
    }
}
