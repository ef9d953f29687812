mod common;

use common::{gd, mixing_l1, ngg, pd, DRAWS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tilted_crm::math::integrate_log_density;
use tilted_crm::posterior::{
    log_jump_density, log_jump_density_untilted, posterior_description, sample_jumps,
};
use tilted_crm::{JumpLaw, Partition, ProcessFamily, QuadratureConfig, TiltedSpec};

fn damped_gg() -> TiltedSpec {
    TiltedSpec::new(
        ProcessFamily::GeneralizedGamma {
            alpha: 0.3,
            theta: 2.0,
            b: 0.5,
        },
        1.5,
        1.0,
    )
    .unwrap()
}

#[test]
fn jump_moments_match_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for spec in [ngg(), damped_gg(), gd()] {
        for (size, u) in [(1, 0.5), (4, 3.0), (20, 0.05)] {
            let law = JumpLaw::new(&spec, size, spec.gamma + u).unwrap();
            let x: Vec<f64> = (0..DRAWS).map(|_| law.sample(&mut rng)).collect();
            let n = DRAWS as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            let se_mean = (law.variance() / n).sqrt();
            let se_var = ((m4 - var * var) / n).sqrt();
            assert!(
                (mean - law.mean()).abs() <= 3.0 * se_mean,
                "{spec} size={size}"
            );
            assert!(
                (var - law.variance()).abs() <= 3.0 * se_var,
                "{spec} size={size}"
            );
        }
    }
}

#[test]
fn jump_density_is_the_tilted_intensity() {
    // s^m e^{−(γ+u)s} ρ(s) / τ_m(γ+u)
    for spec in [ngg(), damped_gg(), gd()] {
        for (size, u) in [(1u32, 0.5), (7, 2.0)] {
            let a = spec.gamma + u;
            for s in [0.01, 0.3, 2.0, 15.0] {
                let want = spec.log_levy_density(s).unwrap() + size as f64 * f64::ln(s)
                    - a * s
                    - spec.log_tau(size, a).unwrap();
                let got = log_jump_density(&spec, size, u, s).unwrap();
                assert!((got - want).abs() < 1e-10, "{spec}");
            }
        }
    }
}

#[test]
fn untilted_jump_density_integrates_to_one() {
    let cfg = QuadratureConfig::default();
    for spec in [ngg(), gd()] {
        for size in [1, 3, 10] {
            let l =
                integrate_log_density(|s| log_jump_density_untilted(&spec, size, s).unwrap(), &cfg)
                    .unwrap();
            assert!(l.abs() < 1e-9);
            let law = JumpLaw::new(&spec, size, 0.0).unwrap();
            for s in [0.1, 1.0, 5.0] {
                let d = log_jump_density_untilted(&spec, size, s).unwrap() - law.log_pdf(s);
                assert!(d.abs() < 1e-10);
            }
        }
    }
}

#[test]
fn continuous_part_is_a_shifted_intensity() {
    let p = Partition::from_sizes(&[4, 2, 1]).unwrap();
    for spec in [ngg(), damped_gg(), pd(1.0)] {
        for u in [0.1, 2.0, 30.0] {
            let desc = posterior_description(&spec, &p, u).unwrap();
            let post = desc.continuous_spec().unwrap();
            for m in [1, 2, 9] {
                for a in [0.0, 0.5, 4.0] {
                    let x = post.log_tau(m, a).unwrap();
                    let y = spec.log_tau(m, a + spec.gamma + u).unwrap();
                    assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
            assert_eq!(desc.atoms.len(), 3);
        }
    }
    let desc = posterior_description(&gd(), &p, 1.0).unwrap();
    assert!(desc.continuous_spec().is_none());
    let json = serde_json::to_string(&desc).unwrap();
    assert_eq!(
        serde_json::from_str::<tilted_crm::PosteriorDescription>(&json).unwrap(),
        desc
    );
}

#[test]
fn jumps_are_uncorrelated() {
    let p = Partition::from_sizes(&[5, 5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for spec in [ngg(), gd()] {
        let draws: Vec<(f64, f64)> = (0..DRAWS)
            .map(|_| {
                let j = sample_jumps(&spec, &p, 1.5, &mut rng).unwrap().jumps;
                (j[0], j[1])
            })
            .collect();
        let n = DRAWS as f64;
        let (mx, my) = draws
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in &draws {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() <= 0.01, "{spec}: {r}");
    }
}

#[test]
fn mixing_over_the_latent_variable() {
    let p = Partition::from_sizes(&[6, 3, 1]).unwrap();
    for (i, spec) in [ngg(), gd()].into_iter().enumerate() {
        let l1 = mixing_l1(&spec, &p, 3, 33 + i as u64);
        assert!(l1 <= 0.01, "{spec}: {l1}");
    }
}

#[test]
fn improper_jump_laws_are_rejected() {
    // undamped stable intensity with u→0 has no exponential factor
    assert!(JumpLaw::new(&pd(1.0), 2, 0.0).is_err());
    assert!(JumpLaw::new(&ngg(), 0, 1.0).is_err());
    assert!(posterior_description(&ngg(), &Partition::new(), 1.0).is_err());
    assert!(posterior_description(&ngg(), &Partition::singletons(2), 0.0).is_err());
}
