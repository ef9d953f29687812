//! Sampling and exact partition laws for normalized completely random
//! measures under exponential-polynomial tilting `h(x) = e^{−γx} x^{−q}`.
//!
//! The crate covers the generalized gamma family (Dirichlet, Poisson–Dirichlet,
//! normalized stable, normalized inverse-Gaussian and normalized generalized
//! gamma processes) and the generalized Dirichlet family.
//!
//! ```
//! use tilted_crm::{exact_size_distribution, NamedPreset, QuadratureConfig};
//!
//! let spec = NamedPreset::Dirichlet { theta: 1.0 }.expand().unwrap();
//! let law = exact_size_distribution(&spec, 3, &QuadratureConfig::default()).unwrap();
//! assert!((law.probability(2) - 0.5).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod exact;
pub mod latent;
pub mod math;
pub mod par;
pub mod partition;
pub mod posterior;
pub mod process;
pub mod sim;
pub mod urn;

pub use error::{Error, Result};
pub use exact::{
    brute_force_size_distribution, exact_size_distribution, Provenance, SizeDistribution,
    StirlingTable,
};
pub use latent::{LatentDensity, LatentKind, LatentU};
pub use math::{InverseCdfSampler, LogValue, QuadratureConfig, Transform};
pub use par::Execution;
pub use partition::{AtomLabel, Choice, Partition};
pub use posterior::{posterior_description, JumpLaw, JumpSample, PosteriorDescription};
pub use process::{NamedPreset, ProcessFamily, TiltedSpec};
pub use sim::{run, summarize, Algorithm, ChainInit, RunConfig, RunResult, Summary};
pub use urn::{UnconditionalUrn, UrnWeights};
