#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use tilted_crm::latent::{latent_sampler, sample_u};
use tilted_crm::math::integrate_log_density_between;
use tilted_crm::sim::stats::{bin_probabilities, binned_l1, quantile, quantile_edges};
use tilted_crm::{
    JumpLaw, LatentDensity, LatentKind, NamedPreset, Partition, ProcessFamily, QuadratureConfig,
    TiltedSpec,
};

pub const DRAWS: usize = 100_000;
pub const BINS: usize = 5;

pub fn pd(q: f64) -> TiltedSpec {
    NamedPreset::PoissonDirichlet { alpha: 0.5, q }
        .expand()
        .unwrap()
}

pub fn ngg() -> TiltedSpec {
    NamedPreset::NormalizedGeneralizedGamma {
        alpha: 0.5,
        theta: 1.0,
        b: 1.0,
    }
    .expand()
    .unwrap()
}

pub fn gd() -> TiltedSpec {
    NamedPreset::GeneralizedDirichlet { theta: 2.0, c: 2 }
        .expand()
        .unwrap()
}

/// Binned L1 distance between `draws` and the latent density, on
/// equiprobable cells whose probabilities come from quadrature.
pub fn latent_l1(spec: &TiltedSpec, p: &Partition, kind: LatentKind, draws: &[f64]) -> f64 {
    let cfg = QuadratureConfig::default();
    let density = LatentDensity::new(spec, p, kind, &cfg).unwrap();
    let edges = quantile_edges(&latent_sampler(spec, p, kind, &cfg).unwrap(), BINS);
    let target = bin_probabilities(|u| density.log_unnormalized(u), &edges, &cfg).unwrap();
    binned_l1(draws, &edges, &target)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn law_cdf(law: &JumpLaw, s: f64) -> f64 {
    match law {
        JumpLaw::Gamma { shape, rate } => GammaDist::new(*shape, *rate).unwrap().cdf(s),
        JumpLaw::GammaMixture { shape, components } => components
            .iter()
            .map(|(w, r)| w * GammaDist::new(*shape, *r).unwrap().cdf(s))
            .sum(),
    }
}

/// Two-stage draws `u ~ f_U`, `s ~ jump law given u` against the mixture
/// `∫ p(s | u) f_U(u) du` evaluated cell by cell with quadrature.
pub fn mixing_l1(spec: &TiltedSpec, p: &Partition, size: u32, seed: u64) -> f64 {
    let cfg = QuadratureConfig::default();
    let density = LatentDensity::new(spec, p, LatentKind::Plain, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = latent_sampler(spec, p, LatentKind::Plain, &cfg).unwrap();
    let two_stage = |rng: &mut ChaCha8Rng| {
        // the generalized Dirichlet `U` sampler is this same table, rebuilt per call
        let u = match spec.family {
            ProcessFamily::GeneralizedDirichlet { .. } => sampler.sample(rng),
            _ => sample_u(spec, p, rng, &cfg).unwrap().value(),
        };
        JumpLaw::new(spec, size, spec.gamma + u)
            .unwrap()
            .sample(rng)
    };
    // cell edges from a separate pilot sample
    let mut pilot: Vec<f64> = (0..10_000).map(|_| two_stage(&mut rng)).collect();
    pilot.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..5).map(|j| quantile(&pilot, j as f64 / 5.0)).collect();
    let draws: Vec<f64> = (0..DRAWS).map(|_| two_stage(&mut rng)).collect();

    let mut bounds = vec![0.0];
    bounds.extend_from_slice(&edges);
    bounds.push(f64::INFINITY);
    let (lo, hi) = (sampler.draw(1e-12), sampler.draw(1.0 - 1e-12));
    let target: Vec<f64> = bounds
        .windows(2)
        .map(|w| {
            integrate_log_density_between(
                |u| {
                    let law = JumpLaw::new(spec, size, spec.gamma + u).unwrap();
                    density.log_pdf(u) + (law_cdf(&law, w[1]) - law_cdf(&law, w[0])).ln()
                },
                lo,
                hi,
                &cfg,
            )
            .unwrap()
            .exp()
        })
        .collect();
    binned_l1(&draws, &edges, &target)
}
