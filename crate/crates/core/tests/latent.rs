mod common;

use common::{gd, latent_l1, ngg, pd, DRAWS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tilted_crm::latent::{
    gd_log_acceptance, latent_sampler, log_density_u, log_density_u_tilde, ngg_log_acceptance,
    sample_u, sample_u_tilde, sample_u_tilde_gd, sample_u_tilde_ngg, sample_u_tilde_pd,
    u_log_acceptance,
};
use tilted_crm::urn::log_phi_total;
use tilted_crm::{LatentKind, Partition, ProcessFamily, QuadratureConfig, TiltedSpec};

fn draws<F: FnMut(&mut ChaCha8Rng) -> f64>(seed: u64, mut f: F) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..DRAWS).map(|_| f(&mut rng)).collect()
}

fn partition() -> Partition {
    Partition::from_sizes(&[6, 3, 3, 1, 1]).unwrap()
}

fn grid() -> impl Iterator<Item = f64> {
    (-60..=80).map(|i| (i as f64 * 0.25).exp())
}

#[test]
fn tilt_identity() {
    let specs = [
        pd(1.0),
        ngg(),
        gd(),
        TiltedSpec::new(
            ProcessFamily::GeneralizedGamma {
                alpha: 0.0,
                theta: 3.0,
                b: 1.0,
            },
            1.0,
            0.5,
        )
        .unwrap(),
    ];
    let p = partition();
    for spec in specs {
        let mut offsets = grid().map(|u| {
            log_density_u_tilde(&spec, &p, u).unwrap()
                - log_density_u(&spec, &p, u).unwrap()
                - log_phi_total(&spec, &p, u).unwrap()
        });
        let first = offsets.next().unwrap();
        assert!(offsets.all(|o| (o - first).abs() < 1e-10), "{spec}");
    }
}

#[test]
fn acceptance_functions_never_exceed_one() {
    let partitions = [
        Partition::from_sizes(&[1]).unwrap(),
        partition(),
        Partition::from_sizes(&[40, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1]).unwrap(),
    ];
    let gg = [
        ngg(),
        TiltedSpec::new(
            ProcessFamily::GeneralizedGamma {
                alpha: 0.2,
                theta: 5.0,
                b: 0.1,
            },
            2.0,
            3.0,
        )
        .unwrap(),
        TiltedSpec::new(
            ProcessFamily::GeneralizedGamma {
                alpha: 0.9,
                theta: 0.3,
                b: 10.0,
            },
            0.0,
            0.0,
        )
        .unwrap(),
    ];
    let gds = [
        gd(),
        TiltedSpec::new(
            ProcessFamily::GeneralizedDirichlet { theta: 4.0, c: 5 },
            1.5,
            2.0,
        )
        .unwrap(),
        TiltedSpec::new(
            ProcessFamily::GeneralizedDirichlet { theta: 0.5, c: 1 },
            0.0,
            0.0,
        )
        .unwrap(),
    ];
    for p in &partitions {
        for v in grid() {
            for spec in &gg {
                assert!(
                    ngg_log_acceptance(spec, p, v).unwrap() <= 1e-12,
                    "{spec} v={v}"
                );
                assert!(
                    u_log_acceptance(spec, p, v).unwrap() <= 1e-12,
                    "{spec} v={v}"
                );
            }
            for spec in &gds {
                assert!(
                    gd_log_acceptance(spec, p, v).unwrap() <= 1e-12,
                    "{spec} v={v}"
                );
            }
        }
    }
}

#[test]
fn mixture_sampler_fits() {
    let (spec, p) = (pd(1.0), partition());
    let x = draws(11, |r| sample_u_tilde_pd(&spec, &p, r).unwrap().value());
    let l1 = latent_l1(&spec, &p, LatentKind::Tilted, &x);
    assert!(l1 <= 0.01, "{l1}");
}

#[test]
fn ngg_rejection_sampler_fits() {
    let p = partition();
    for spec in [
        ngg(),
        TiltedSpec::new(
            ProcessFamily::GeneralizedGamma {
                alpha: 0.3,
                theta: 2.0,
                b: 0.5,
            },
            1.5,
            1.0,
        )
        .unwrap(),
    ] {
        let x = draws(12, |r| sample_u_tilde_ngg(&spec, &p, r).unwrap().value());
        let l1 = latent_l1(&spec, &p, LatentKind::Tilted, &x);
        assert!(l1 <= 0.01, "{spec}: {l1}");
    }
}

#[test]
fn gd_rejection_sampler_fits() {
    for (spec, p) in [
        (gd(), partition()),
        (
            TiltedSpec::new(
                ProcessFamily::GeneralizedDirichlet { theta: 1.5, c: 2 },
                0.5,
                1.0,
            )
            .unwrap(),
            Partition::from_sizes(&[3, 2]).unwrap(),
        ),
    ] {
        let x = draws(13, |r| sample_u_tilde_gd(&spec, &p, r).unwrap().value());
        let l1 = latent_l1(&spec, &p, LatentKind::Tilted, &x);
        assert!(l1 <= 0.01, "{spec}: {l1}");
    }
}

#[test]
fn plain_latent_samplers_fit() {
    let cfg = QuadratureConfig::default();
    let p = partition();
    let gamma_process = TiltedSpec::new(
        ProcessFamily::GeneralizedGamma {
            alpha: 0.0,
            theta: 3.0,
            b: 1.0,
        },
        1.0,
        0.5,
    )
    .unwrap();
    for spec in [pd(1.0), ngg(), gamma_process] {
        let x = draws(14, |r| sample_u(&spec, &p, r, &cfg).unwrap().value());
        let l1 = latent_l1(&spec, &p, LatentKind::Plain, &x);
        assert!(l1 <= 0.01, "{spec}: {l1}");
    }
    let x = draws(15, |r| {
        sample_u_tilde(&gamma_process, &p, r).unwrap().value()
    });
    let l1 = latent_l1(&gamma_process, &p, LatentKind::Tilted, &x);
    assert!(l1 <= 0.01, "{l1}");
}

#[test]
fn inverse_cdf_sampler_fits() {
    let cfg = QuadratureConfig::default();
    let p = partition();
    for (spec, kind) in [(gd(), LatentKind::Plain), (ngg(), LatentKind::Tilted)] {
        let sampler = latent_sampler(&spec, &p, kind, &cfg).unwrap();
        let x = draws(16, |r| sampler.sample(r));
        let l1 = latent_l1(&spec, &p, kind, &x);
        assert!(l1 <= 0.01, "{spec}: {l1}");
    }
}

#[test]
fn samplers_reject_the_wrong_family() {
    let p = partition();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(sample_u_tilde_pd(&gd(), &p, &mut rng).is_err());
    assert!(sample_u_tilde_ngg(&gd(), &p, &mut rng).is_err());
    assert!(sample_u_tilde_gd(&ngg(), &p, &mut rng).is_err());
    assert!(sample_u_tilde(&ngg(), &Partition::new(), &mut rng).is_err());
}
