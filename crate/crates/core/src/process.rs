//! Homogeneous process families, the tilting parameters and their scalar
//! functionals: the Laplace exponent ψ₀, the moment functionals τ_m / κ_m and
//! the finite Hurwitz difference φ_m.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::special::{ln_gamma, lse};

/// Jump intensity of a homogeneous completely random measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessFamily {
    /// `θ/Γ(1−α) · s^{−1−α} e^{−bs}`
    GeneralizedGamma { alpha: f64, theta: f64, b: f64 },
    /// `θ (1−e^{−cs})/(1−e^{−s}) · s^{−1} e^{−s}`
    GeneralizedDirichlet { theta: f64, c: u32 },
}

/// A process family together with the tilt `h(x) = e^{−γx} x^{−q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltedSpec {
    pub family: ProcessFamily,
    pub q: f64,
    pub gamma: f64,
}

impl fmt::Display for TiltedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            ProcessFamily::GeneralizedGamma { alpha, theta, b } => write!(
                f,
                "generalized_gamma(alpha={alpha}, theta={theta}, b={b}, q={}, gamma={})",
                self.q, self.gamma
            ),
            ProcessFamily::GeneralizedDirichlet { theta, c } => write!(
                f,
                "generalized_dirichlet(theta={theta}, c={c}, q={}, gamma={})",
                self.q, self.gamma
            ),
        }
    }
}

/// The named special cases of the two families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedPreset {
    Dirichlet { theta: f64 },
    BetaGamma { theta: f64, q: f64, b: f64 },
    PoissonDirichlet { alpha: f64, q: f64 },
    NormalizedStable { alpha: f64 },
    NormalizedGeneralizedGamma { alpha: f64, theta: f64, b: f64 },
    InverseGaussian { theta: f64, b: f64 },
    GeneralizedDirichlet { theta: f64, c: u32 },
}

impl NamedPreset {
    pub const NAMES: [&'static str; 7] = [
        "dirichlet",
        "beta_gamma",
        "poisson_dirichlet",
        "normalized_stable",
        "normalized_generalized_gamma",
        "inverse_gaussian",
        "generalized_dirichlet",
    ];

    /// Expand to a validated spec with `γ = 0`.
    pub fn expand(&self) -> Result<TiltedSpec> {
        use ProcessFamily::*;
        let gg = |alpha, theta, b, q| TiltedSpec {
            family: GeneralizedGamma { alpha, theta, b },
            q,
            gamma: 0.0,
        };
        let spec = match *self {
            NamedPreset::Dirichlet { theta } => gg(0.0, theta, 1.0, 0.0),
            NamedPreset::BetaGamma { theta, q, b } => gg(0.0, theta, b, q),
            NamedPreset::PoissonDirichlet { alpha, q } => gg(alpha, 1.0, 0.0, q),
            NamedPreset::NormalizedStable { alpha } => gg(alpha, 1.0, 0.0, 0.0),
            NamedPreset::NormalizedGeneralizedGamma { alpha, theta, b } => gg(alpha, theta, b, 0.0),
            NamedPreset::InverseGaussian { theta, b } => gg(0.5, theta, b, 0.0),
            NamedPreset::GeneralizedDirichlet { theta, c } => TiltedSpec {
                family: GeneralizedDirichlet { theta, c },
                q: 0.0,
                gamma: 0.0,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(format!("{name} must be finite, got {v}")))
    }
}

impl TiltedSpec {
    pub fn new(family: ProcessFamily, q: f64, gamma: f64) -> Result<Self> {
        let spec = TiltedSpec { family, q, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks parameter ranges and that the tilt has finite expectation.
    pub fn validate(&self) -> Result<()> {
        finite("q", self.q)?;
        finite("gamma", self.gamma)?;
        if self.q < 0.0 {
            return Err(Error::validation(format!("q must be >= 0, got {}", self.q)));
        }
        if self.gamma < 0.0 {
            return Err(Error::validation(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        match self.family {
            ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
                finite("alpha", alpha)?;
                finite("theta", theta)?;
                finite("b", b)?;
                if !(0.0..1.0).contains(&alpha) {
                    return Err(Error::validation(format!(
                        "alpha must lie in [0, 1), got {alpha}"
                    )));
                }
                if theta <= 0.0 {
                    return Err(Error::validation(format!("theta must be > 0, got {theta}")));
                }
                if b < 0.0 {
                    return Err(Error::validation(format!("b must be >= 0, got {b}")));
                }
                if alpha == 0.0 {
                    if b <= 0.0 {
                        return Err(Error::validation(
                            "alpha = 0 requires b > 0 (the gamma process needs exponential damping)",
                        ));
                    }
                    if theta <= self.q {
                        return Err(Error::validation(format!(
                            "alpha = 0 requires theta > q, got theta={theta}, q={}",
                            self.q
                        )));
                    }
                }
            }
            ProcessFamily::GeneralizedDirichlet { theta, c } => {
                finite("theta", theta)?;
                if theta <= 0.0 {
                    return Err(Error::validation(format!("theta must be > 0, got {theta}")));
                }
                if c == 0 {
                    return Err(Error::validation("c must be a positive integer"));
                }
                if theta <= self.q {
                    return Err(Error::validation(format!(
                        "the generalized Dirichlet family requires theta > q, got theta={theta}, q={}",
                        self.q
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        match self.family {
            ProcessFamily::GeneralizedGamma { theta, .. }
            | ProcessFamily::GeneralizedDirichlet { theta, .. } => theta,
        }
    }

    /// Stability index; zero for the generalized Dirichlet family.
    pub fn alpha(&self) -> f64 {
        match self.family {
            ProcessFamily::GeneralizedGamma { alpha, .. } => alpha,
            ProcessFamily::GeneralizedDirichlet { .. } => 0.0,
        }
    }

    /// Total exponential damping `b + γ` seen by the latent variable.
    pub(crate) fn damping(&self) -> f64 {
        match self.family {
            ProcessFamily::GeneralizedGamma { b, .. } => b + self.gamma,
            ProcessFamily::GeneralizedDirichlet { .. } => self.gamma + 1.0,
        }
    }

    /// `ψ₀(λ) = ∫ (1 − e^{−λs}) ρ(ds)`, pinned so that `ψ₀(0) = 0`.
    pub fn log_psi0(&self, lam: f64) -> Result<f64> {
        if !(lam >= 0.0) {
            return Err(Error::domain(format!("psi0 requires lam >= 0, got {lam}")));
        }
        Ok(self.psi0(lam))
    }

    #[inline]
    pub(crate) fn psi0(&self, lam: f64) -> f64 {
        if lam == 0.0 {
            return 0.0;
        }
        match self.family {
            ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
                if alpha == 0.0 {
                    theta * (lam / b).ln_1p()
                } else if b == 0.0 {
                    theta / alpha * lam.powf(alpha)
                } else {
                    // (θ/α) b^α ((1 + λ/b)^α − 1), stable for small λ
                    theta / alpha * b.powf(alpha) * (alpha * (lam / b).ln_1p()).exp_m1()
                }
            }
            ProcessFamily::GeneralizedDirichlet { theta, c } => {
                // Γ(λ+c+1)/(Γ(λ+1)Γ(c+1)) = ∏_{l=1}^{c} (1 + λ/l)
                theta * (1..=c).map(|l| (lam / l as f64).ln_1p()).sum::<f64>()
            }
        }
    }

    /// `ln τ_m(a) = ln ∫ s^m e^{−as} ρ(ds)`.
    pub fn log_tau(&self, m: u32, a: f64) -> Result<f64> {
        if m == 0 {
            return Err(Error::domain("tau requires m >= 1"));
        }
        if !(a >= 0.0) {
            return Err(Error::domain(format!("tau requires a >= 0, got {a}")));
        }
        if let ProcessFamily::GeneralizedGamma { b, .. } = self.family {
            if !(a + b > 0.0) {
                return Err(Error::domain(format!(
                    "tau diverges at a + b = 0 (a={a}, b={b})"
                )));
            }
        }
        Ok(self.tau(m as f64, a))
    }

    /// Unchecked `ln τ_m(a)` for real `m ≥ 1`.
    #[inline]
    pub(crate) fn tau(&self, m: f64, a: f64) -> f64 {
        match self.family {
            ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
                theta.ln() + ln_gamma(m - alpha) - ln_gamma(1.0 - alpha)
                    + (alpha - m) * (a + b).ln()
            }
            ProcessFamily::GeneralizedDirichlet { theta, c } => {
                theta.ln() + ln_gamma(m) + phi(m, a, c)
            }
        }
    }

    /// `ln κ_m(a)`; identical to `ln τ_m(a)` for homogeneous intensities.
    pub fn log_kappa(&self, m: u32, a: f64) -> Result<f64> {
        self.log_tau(m, a)
    }

    /// `ln ρ(s)`, the log of the jump intensity at `s > 0`.
    pub fn log_levy_density(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!(
                "levy density requires s > 0, got {s}"
            )));
        }
        Ok(match self.family {
            ProcessFamily::GeneralizedGamma { alpha, theta, b } => {
                theta.ln() - ln_gamma(1.0 - alpha) - (1.0 + alpha) * s.ln() - b * s
            }
            ProcessFamily::GeneralizedDirichlet { theta, c } => {
                // (1 − e^{−cs})/(1 − e^{−s}) = Σ_{j<c} e^{−js}
                let ratio = lse((0..c).map(|j| -(j as f64) * s));
                theta.ln() + ratio - s.ln() - s
            }
        })
    }
}

/// `ln φ_m(x, c) = ln Σ_{ℓ<c} (x + 1 + ℓ)^{−m}`.
pub fn log_phi(m: f64, x: f64, c: u32) -> Result<f64> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain(format!("phi requires m > 0, got {m}")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("phi requires x >= 0, got {x}")));
    }
    if c == 0 {
        return Err(Error::domain("phi requires c >= 1"));
    }
    Ok(phi(m, x, c))
}

#[inline]
pub(crate) fn phi(m: f64, x: f64, c: u32) -> f64 {
    if c == 1 {
        return -m * (x + 1.0).ln();
    }
    lse((0..c).map(|l| -m * (x + 1.0 + l as f64).ln()))
}
