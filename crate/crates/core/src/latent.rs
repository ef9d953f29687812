//! The latent variable `U` given a partition, and its tilted companion `Ũ`
//! whose density is proportional to `φ(u, Xₙ) f_{U|X}(u)`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::inverse_cdf::InverseCdfSampler;
use crate::math::quadrature::{integrate_log_density, QuadratureConfig};
use crate::partition::Partition;
use crate::process::{phi, ProcessFamily, TiltedSpec};
use crate::urn::{conditional_urn_weights_raw, joint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentKind {
    /// `U` given the partition.
    Plain,
    /// `Ũ`, the φ-tilted version that drives the conditional urn.
    Tilted,
}

/// A positive, finite realization of `U` or `Ũ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentU {
    value: f64,
    kind: LatentKind,
}

impl LatentU {
    pub fn new(value: f64, kind: LatentKind) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::domain(format!(
                "latent value must be positive and finite, got {value}"
            )));
        }
        Ok(LatentU { value, kind })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn kind(&self) -> LatentKind {
        self.kind
    }
}

/// Rejection loops give up and fall back to inverse-CDF sampling after this
/// many proposals. An accepted proposal is exact whatever its index, so the
/// fallback never biases the draws.
const MAX_PROPOSALS: usize = 10_000;

fn nonempty(p: &Partition) -> Result<()> {
    if p.is_empty() {
        Err(Error::usage("latent variables need at least one item"))
    } else {
        Ok(())
    }
}

/// Unnormalized `ln f_{U|X}(u)`.
pub fn log_density_u(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<f64> {
    crate::urn::log_joint_partition_u(spec, p, u)
}

/// Unnormalized `ln f_{Ũ|X}(u) = ln φ(u, X) + ln f_{U|X}(u)`.
pub fn log_density_u_tilde(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<f64> {
    Ok(conditional_urn_weights_raw(spec, p, u)?.log_total() + log_density_u(spec, p, u)?)
}

fn unnormalized(spec: &TiltedSpec, p: &Partition, kind: LatentKind, u: f64) -> f64 {
    if !(u > 0.0) || !u.is_finite() {
        return f64::NEG_INFINITY;
    }
    let base = joint(spec, p.sizes(), p.n(), u);
    match kind {
        LatentKind::Plain => base,
        LatentKind::Tilted => {
            base + conditional_urn_weights_raw(spec, p, u)
                .map(|w| w.log_total())
                .unwrap_or(f64::NEG_INFINITY)
        }
    }
}

/// A normalized latent density for one `(spec, partition)`.
#[derive(Debug, Clone)]
pub struct LatentDensity {
    spec: TiltedSpec,
    partition: Partition,
    kind: LatentKind,
    log_normalizer: f64,
}

impl LatentDensity {
    pub fn new(
        spec: &TiltedSpec,
        p: &Partition,
        kind: LatentKind,
        cfg: &QuadratureConfig,
    ) -> Result<Self> {
        spec.validate()?;
        nonempty(p)?;
        let log_normalizer = integrate_log_density(|u| unnormalized(spec, p, kind, u), cfg)?;
        Ok(LatentDensity {
            spec: *spec,
            partition: p.clone(),
            kind,
            log_normalizer,
        })
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn log_unnormalized(&self, u: f64) -> f64 {
        unnormalized(&self.spec, &self.partition, self.kind, u)
    }

    pub fn log_pdf(&self, u: f64) -> f64 {
        self.log_unnormalized(u) - self.log_normalizer
    }
}

/// `Gamma(shape, rate)` variate.
fn gamma_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters are positive by construction")
        .sample(rng)
}

fn gg_params(spec: &TiltedSpec) -> Option<(f64, f64)> {
    match spec.family {
        ProcessFamily::GeneralizedGamma { alpha, theta, .. } => Some((alpha, theta)),
        ProcessFamily::GeneralizedDirichlet { .. } => None,
    }
}

/// Draw from the undamped (`b + γ = 0`) law of `Ũ`: a two-component mixture
/// of transformed gammas, `Ũ^α ~ Gamma(q/α + ℵ + 1, θ/α)` with probability
/// `(q + αℵ)/(n + q)` and `Gamma(q/α + ℵ, θ/α)` otherwise.
fn undamped_mixture<R: Rng + ?Sized>(
    alpha: f64,
    theta: f64,
    q: f64,
    p: &Partition,
    rng: &mut R,
) -> f64 {
    let n = p.n() as f64;
    let k = p.num_blocks() as f64;
    let w1 = (q + alpha * k) / (n + q);
    let shape = q / alpha + k + if rng.random::<f64>() < w1 { 1.0 } else { 0.0 };
    gamma_rate(shape, theta / alpha, rng).powf(1.0 / alpha)
}

/// Mixture weight of the heavier gamma component in the undamped law of `Ũ`.
pub fn pd_mixture_weight(alpha: f64, q: f64, p: &Partition) -> f64 {
    (q + alpha * p.num_blocks() as f64) / (p.n() as f64 + q)
}

/// `Ũ` for a generalized gamma intensity without exponential damping
/// (`b = γ = 0`, the Poisson–Dirichlet case).
pub fn sample_u_tilde_pd<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    rng: &mut R,
) -> Result<LatentU> {
    nonempty(p)?;
    let (alpha, theta) = gg_params(spec).filter(|(a, _)| *a > 0.0).ok_or_else(|| {
        Error::usage("the mixture sampler needs a generalized gamma spec with alpha > 0")
    })?;
    if spec.damping() != 0.0 {
        return Err(Error::usage(
            "the mixture sampler needs b = 0 and gamma = 0",
        ));
    }
    loop {
        let u = undamped_mixture(alpha, theta, spec.q, p, rng);
        if u > 0.0 && u.is_finite() {
            return LatentU::new(u, LatentKind::Tilted);
        }
    }
}

/// Log acceptance probability of the generalized gamma `Ũ` rejection step
/// at proposal `v`, with `b' = b + γ` and `m = n − αℵ`:
/// `−(θ/α)[(v+b')^α − v^α] + (m+1) ln(v/(v+b')) + ln[(θ(v+b')^α + m)/(θv^α + m)]`.
pub fn ngg_log_acceptance(spec: &TiltedSpec, p: &Partition, v: f64) -> Result<f64> {
    let (alpha, theta) = gg_params(spec)
        .filter(|(a, _)| *a > 0.0)
        .ok_or_else(|| Error::usage("needs a generalized gamma spec with alpha > 0"))?;
    let bp = spec.damping();
    let m = p.n() as f64 - alpha * p.num_blocks() as f64;
    let shifted = (v + bp).powf(alpha);
    let plain = v.powf(alpha);
    Ok(-(theta / alpha) * (shifted - plain)
        + (m + 1.0) * (v.ln() - (v + bp).ln())
        + (theta * shifted + m).ln()
        - (theta * plain + m).ln())
}

/// `Ũ` for a generalized gamma intensity with `α > 0`, by rejection from the
/// undamped mixture. Exact; with `b + γ = 0` every proposal is accepted.
pub fn sample_u_tilde_ngg<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    rng: &mut R,
) -> Result<LatentU> {
    nonempty(p)?;
    let (alpha, theta) = gg_params(spec).filter(|(a, _)| *a > 0.0).ok_or_else(|| {
        Error::usage("the rejection sampler needs a generalized gamma spec with alpha > 0")
    })?;
    for _ in 0..MAX_PROPOSALS {
        let v = undamped_mixture(alpha, theta, spec.q, p, rng);
        if !(v > 0.0 && v.is_finite()) {
            continue;
        }
        let log_acc = ngg_log_acceptance(spec, p, v)?;
        debug_assert!(log_acc <= 1e-12, "acceptance above one: {log_acc}");
        if rng.random::<f64>().ln() < log_acc {
            return LatentU::new(v, LatentKind::Tilted);
        }
    }
    sample_u_generic(
        spec,
        p,
        LatentKind::Tilted,
        rng,
        &QuadratureConfig::default(),
    )
}

/// Log acceptance of the generalized Dirichlet `Ũ` rejection step at `v`,
/// for the beta-prime proposal with density `∝ v^{n+q} (γ+v+1)^{−(θ+n+1)}`.
/// Bounded by one through `Γ(a+c+1)/Γ(a+1) ≥ (a+1)^c`, `φ_m(a) ≤ c(a+1)^{−m}`
/// and `φ_{m+1}/φ_m ≤ 1/(a+1)`.
pub fn gd_log_acceptance(spec: &TiltedSpec, p: &Partition, v: f64) -> Result<f64> {
    let ProcessFamily::GeneralizedDirichlet { theta, c } = spec.family else {
        return Err(Error::usage("needs a generalized Dirichlet spec"));
    };
    let a = spec.gamma + v;
    let n = p.n() as f64;
    let k = p.num_blocks() as f64;
    let cf = c as f64;
    let la1 = a.ln_1p();
    let mut log_f = -theta * (1..=c).map(|l| (a + l as f64).ln()).sum::<f64>();
    let mut bracket = vec![theta.ln() + phi(1.0, a, c)];
    for &m in p.sizes() {
        let m = m as f64;
        let pm = phi(m, a, c);
        log_f += pm;
        bracket.push(m.ln() + phi(m + 1.0, a, c) - pm);
    }
    log_f += crate::math::special::lse(bracket);
    Ok(log_f + (theta + n + 1.0) * la1 - k * cf.ln() - (cf * theta + n).ln())
}

/// `Ũ` for the generalized Dirichlet family: propose `W ~ Beta(n+q+1, θ−q)`,
/// `v = (γ+1)W/(1−W)`, accept with [`gd_log_acceptance`].
pub fn sample_u_tilde_gd<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    rng: &mut R,
) -> Result<LatentU> {
    nonempty(p)?;
    let ProcessFamily::GeneralizedDirichlet { theta, .. } = spec.family else {
        return Err(Error::usage(
            "the beta-prime rejection sampler needs a generalized Dirichlet spec",
        ));
    };
    if theta <= spec.q {
        return Err(Error::validation(
            "generalized Dirichlet requires theta > q",
        ));
    }
    let beta = Beta::new(p.n() as f64 + spec.q + 1.0, theta - spec.q)
        .map_err(|e| Error::domain(e.to_string()))?;
    for _ in 0..MAX_PROPOSALS {
        let w: f64 = beta.sample(rng);
        let v = beta_prime(w, spec.gamma + 1.0);
        if !(v > 0.0 && v.is_finite()) {
            continue;
        }
        let log_acc = gd_log_acceptance(spec, p, v)?;
        debug_assert!(log_acc <= 1e-12, "acceptance above one: {log_acc}");
        if rng.random::<f64>().ln() < log_acc {
            return LatentU::new(v, LatentKind::Tilted);
        }
    }
    sample_u_generic(
        spec,
        p,
        LatentKind::Tilted,
        rng,
        &QuadratureConfig::default(),
    )
}

/// `scale · W / (1 − W)`.
pub fn beta_prime(w: f64, scale: f64) -> f64 {
    scale * w / (1.0 - w)
}

/// Log acceptance of the generalized gamma `U` rejection step:
/// `−(θ/α)[(u+b')^α − u^α] + m ln(u/(u+b'))`.
pub fn u_log_acceptance(spec: &TiltedSpec, p: &Partition, u: f64) -> Result<f64> {
    let (alpha, theta) = gg_params(spec)
        .filter(|(a, _)| *a > 0.0)
        .ok_or_else(|| Error::usage("needs a generalized gamma spec with alpha > 0"))?;
    let bp = spec.damping();
    let m = p.n() as f64 - alpha * p.num_blocks() as f64;
    Ok(-(theta / alpha) * ((u + bp).powf(alpha) - u.powf(alpha)) + m * (u.ln() - (u + bp).ln()))
}

/// `U` given the partition, by the cheapest exact route for the spec:
/// rejection from `U^α ~ Gamma(q/α + ℵ, θ/α)` when `α > 0`, a beta-prime
/// draw when `α = 0`, and inverse-CDF sampling for the generalized Dirichlet family.
pub fn sample_u<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    rng: &mut R,
    cfg: &QuadratureConfig,
) -> Result<LatentU> {
    nonempty(p)?;
    match spec.family {
        ProcessFamily::GeneralizedGamma { alpha, theta, .. } if alpha > 0.0 => {
            let shape = spec.q / alpha + p.num_blocks() as f64;
            for _ in 0..MAX_PROPOSALS {
                let u = gamma_rate(shape, theta / alpha, rng).powf(1.0 / alpha);
                if !(u > 0.0 && u.is_finite()) {
                    continue;
                }
                if rng.random::<f64>().ln() < u_log_acceptance(spec, p, u)? {
                    return LatentU::new(u, LatentKind::Plain);
                }
            }
            sample_u_generic(spec, p, LatentKind::Plain, rng, cfg)
        }
        ProcessFamily::GeneralizedGamma { theta, .. } => {
            // f_U ∝ u^{n+q−1} (u+b')^{−(θ+n)}
            let u = beta_prime_draw(spec, p, theta, LatentKind::Plain, rng)?;
            LatentU::new(u, LatentKind::Plain)
        }
        ProcessFamily::GeneralizedDirichlet { .. } => {
            sample_u_generic(spec, p, LatentKind::Plain, rng, cfg)
        }
    }
}

fn beta_prime_draw<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    theta: f64,
    kind: LatentKind,
    rng: &mut R,
) -> Result<f64> {
    // φ(u, X) ∝ u/(u+b') moves one power from the tail to the origin
    let extra = match kind {
        LatentKind::Plain => 0.0,
        LatentKind::Tilted => 1.0,
    };
    let beta = Beta::new(p.n() as f64 + spec.q + extra, theta - spec.q)
        .map_err(|e| Error::domain(e.to_string()))?;
    loop {
        let u = beta_prime(beta.sample(rng), spec.damping());
        if u > 0.0 && u.is_finite() {
            return Ok(u);
        }
    }
}

/// `Ũ` given the partition, dispatching to the specialized samplers.
pub fn sample_u_tilde<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    rng: &mut R,
) -> Result<LatentU> {
    nonempty(p)?;
    match spec.family {
        ProcessFamily::GeneralizedGamma { alpha, .. } if alpha > 0.0 => {
            if spec.damping() == 0.0 {
                sample_u_tilde_pd(spec, p, rng)
            } else {
                sample_u_tilde_ngg(spec, p, rng)
            }
        }
        ProcessFamily::GeneralizedGamma { theta, .. } => {
            // f_Ũ ∝ u^{n+q} (u+b')^{−(θ+n+1)}
            let u = beta_prime_draw(spec, p, theta, LatentKind::Tilted, rng)?;
            LatentU::new(u, LatentKind::Tilted)
        }
        ProcessFamily::GeneralizedDirichlet { .. } => sample_u_tilde_gd(spec, p, rng),
    }
}

/// Inverse-CDF draw from the requested latent density; works for every spec.
pub fn sample_u_generic<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    kind: LatentKind,
    rng: &mut R,
    cfg: &QuadratureConfig,
) -> Result<LatentU> {
    let sampler = latent_sampler(spec, p, kind, cfg)?;
    LatentU::new(sampler.sample(rng), kind)
}

/// Build the tabulated sampler once when many draws share a partition.
pub fn latent_sampler(
    spec: &TiltedSpec,
    p: &Partition,
    kind: LatentKind,
    cfg: &QuadratureConfig,
) -> Result<InverseCdfSampler> {
    spec.validate()?;
    nonempty(p)?;
    InverseCdfSampler::new(|u| unnormalized(spec, p, kind, u), cfg)
}
