//! Posterior structure given a partition and the latent `u`: an exponentially
//! tilted continuous part plus one independent fixed-location jump per block.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::special::{ln_gamma, lse};
use crate::partition::{AtomLabel, Partition};
use crate::process::{ProcessFamily, TiltedSpec};

/// Law of the jump attached to one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Gamma components sharing one shape; `components` holds `(weight, rate)`.
    GammaMixture {
        shape: f64,
        components: Vec<(f64, f64)>,
    },
}

fn gamma_log_pdf(shape: f64, rate: f64, s: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * s.ln() - rate * s
}

impl JumpLaw {
    /// Jump law of a block of size `size` when the intensity is damped by an
    /// extra `e^{−shift·s}`.
    pub fn new(spec: &TiltedSpec, size: u32, shift: f64) -> Result<Self> {
        if size == 0 {
            return Err(Error::domain("block size must be positive"));
        }
        if !(shift >= 0.0) || !shift.is_finite() {
            return Err(Error::domain(format!(
                "shift must be finite and >= 0, got {shift}"
            )));
        }
        let m = size as f64;
        match spec.family {
            ProcessFamily::GeneralizedGamma { alpha, b, .. } => {
                let rate = b + shift;
                if !(rate > 0.0) {
                    return Err(Error::domain(
                        "jump law is improper: the intensity has no exponential damping",
                    ));
                }
                Ok(JumpLaw::Gamma {
                    shape: m - alpha,
                    rate,
                })
            }
            ProcessFamily::GeneralizedDirichlet { c, .. } => {
                // (1−e^{−cs})/(1−e^{−s}) = Σ_{j<c} e^{−js}
                let rates: Vec<f64> = (0..c).map(|j| shift + 1.0 + j as f64).collect();
                let logs: Vec<f64> = rates.iter().map(|r| -m * r.ln()).collect();
                let total = lse(logs.iter().copied());
                Ok(JumpLaw::GammaMixture {
                    shape: m,
                    components: logs
                        .iter()
                        .zip(&rates)
                        .map(|(l, r)| ((l - total).exp(), *r))
                        .collect(),
                })
            }
        }
    }

    pub fn log_pdf(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return f64::NEG_INFINITY;
        }
        match self {
            JumpLaw::Gamma { shape, rate } => gamma_log_pdf(*shape, *rate, s),
            JumpLaw::GammaMixture { shape, components } => lse(components
                .iter()
                .map(|(w, r)| w.ln() + gamma_log_pdf(*shape, *r, s))
                .collect::<Vec<_>>()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpLaw::Gamma { shape, rate } => shape / rate,
            JumpLaw::GammaMixture { shape, components } => {
                components.iter().map(|(w, r)| w * shape / r).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            JumpLaw::Gamma { shape, rate } => shape / (rate * rate),
            JumpLaw::GammaMixture { shape, components } => {
                let second: f64 = components
                    .iter()
                    .map(|(w, r)| w * shape * (shape + 1.0) / (r * r))
                    .sum();
                second - self.mean().powi(2)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (shape, rate) = match self {
            JumpLaw::Gamma { shape, rate } => (*shape, *rate),
            JumpLaw::GammaMixture { shape, components } => {
                let v: f64 = rng.random();
                let mut acc = 0.0;
                let mut rate = components[components.len() - 1].1;
                for (w, r) in components {
                    acc += w;
                    if v < acc {
                        rate = *r;
                        break;
                    }
                }
                (*shape, rate)
            }
        };
        Gamma::new(shape, 1.0 / rate)
            .expect("jump law parameters are positive")
            .sample(rng)
    }
}

/// Intensity of the posterior's continuous part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousPart {
    /// Still in the generalized gamma family, with `b` replaced by `b + γ + u`.
    GeneralizedGamma { alpha: f64, theta: f64, b: f64 },
    /// Generalized Dirichlet intensity multiplied by `e^{−shift·s}`.
    DampedGeneralizedDirichlet { theta: f64, c: u32, shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorAtom {
    pub label: AtomLabel,
    pub block_size: u32,
    pub jump_law: JumpLaw,
}

/// Posterior of the tilted random measure given `(Uₙ = u, Xₙ)`.
///
/// The normalized posterior equals `μ/μ(X)` where `μ` is the continuous part
/// plus `Σ_k J_k δ_{Y_k}`; the continuous part and the jumps are mutually
/// independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDescription {
    pub base_spec: TiltedSpec,
    pub u: f64,
    pub tilted_intensity_shift: f64,
    pub continuous_part: ContinuousPart,
    pub atoms: Vec<PosteriorAtom>,
}

pub fn posterior_description(
    spec: &TiltedSpec,
    p: &Partition,
    u: f64,
) -> Result<PosteriorDescription> {
    spec.validate()?;
    if p.is_empty() {
        return Err(Error::usage("the posterior needs at least one observation"));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain(format!(
            "u must be positive and finite, got {u}"
        )));
    }
    let shift = spec.gamma + u;
    let continuous_part = match spec.family {
        ProcessFamily::GeneralizedGamma { alpha, theta, b } => ContinuousPart::GeneralizedGamma {
            alpha,
            theta,
            b: b + shift,
        },
        ProcessFamily::GeneralizedDirichlet { theta, c } => {
            ContinuousPart::DampedGeneralizedDirichlet { theta, c, shift }
        }
    };
    let atoms = p
        .sizes()
        .iter()
        .zip(p.labels())
        .map(|(&size, &label)| {
            Ok(PosteriorAtom {
                label,
                block_size: size,
                jump_law: JumpLaw::new(spec, size, shift)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorDescription {
        base_spec: *spec,
        u,
        tilted_intensity_shift: shift,
        continuous_part,
        atoms,
    })
}

impl PosteriorDescription {
    /// Spec whose `τ` functionals are those of the continuous part, when it is
    /// again a generalized gamma intensity.
    pub fn continuous_spec(&self) -> Option<TiltedSpec> {
        match self.continuous_part {
            ContinuousPart::GeneralizedGamma { alpha, theta, b } => Some(TiltedSpec {
                family: ProcessFamily::GeneralizedGamma { alpha, theta, b },
                q: 0.0,
                gamma: 0.0,
            }),
            ContinuousPart::DampedGeneralizedDirichlet { .. } => None,
        }
    }
}

/// `ln` of the jump density `s^{n_k} e^{−s(γ+u)} ρ(s) / τ_{n_k}(γ+u)`.
pub fn log_jump_density(spec: &TiltedSpec, size: u32, u: f64, s: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::domain(format!("u must be positive, got {u}")));
    }
    if !(s > 0.0) {
        return Err(Error::domain(format!(
            "jump size must be positive, got {s}"
        )));
    }
    Ok(JumpLaw::new(spec, size, spec.gamma + u)?.log_pdf(s))
}

/// `ln` of the u-free jump density `s^{n_k} ρ(s) / ∫ s^{n_k} ρ(ds)`, assembled
/// from the intensity and `τ_{n_k}(0)` rather than from a named law.
pub fn log_jump_density_untilted(spec: &TiltedSpec, size: u32, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!(
            "jump size must be positive, got {s}"
        )));
    }
    let log_norm = spec.log_tau(size, 0.0)?;
    Ok(spec.log_levy_density(s)? + size as f64 * s.ln() - log_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub jumps: Vec<f64>,
}

/// One independent jump per block.
pub fn sample_jumps<R: Rng + ?Sized>(
    spec: &TiltedSpec,
    p: &Partition,
    u: f64,
    rng: &mut R,
) -> Result<JumpSample> {
    let desc = posterior_description(spec, p, u)?;
    Ok(JumpSample {
        jumps: desc.atoms.iter().map(|a| a.jump_law.sample(rng)).collect(),
    })
}
