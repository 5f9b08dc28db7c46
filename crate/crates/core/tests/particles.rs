mod common;

use bdsampler::kernels::KernelSpec;
use bdsampler::particles::*;
use bdsampler::targets::{GaussianMixture, Target, TorusPotential, TorusTarget};
use common::{gauss, random_ensemble, rng, Flat, Isotropic, Shifted};
use proptest::prelude::*;
use rand::Rng;

/// Rates written out term by term from the particle formula.
fn kl_rates_oracle(e: &ParticleEnsemble, t: &dyn Target, eps: f64) -> Vec<f64> {
    let n = e.len();
    let nf = n as f64;
    let x: Vec<&[f64]> = e.particles().collect();
    let log_kde: Vec<f64> = (0..n).map(|i| ((0..n).map(|j| gauss(eps, x[i], x[j])).sum::<f64>() / nf).ln()).collect();
    let denom: Vec<f64> = (0..n).map(|j| (0..n).map(|l| gauss(eps, x[j], x[l])).sum()).collect();
    let log_pi: Vec<f64> = x.iter().map(|xi| t.log_density(xi)).collect();
    let mean_kde = log_kde.iter().sum::<f64>() / nf;
    let mean_pi = log_pi.iter().sum::<f64>() / nf;
    (0..n)
        .map(|i| {
            let second: f64 = (0..n).map(|j| gauss(eps, x[i], x[j]) / denom[j]).sum();
            log_kde[i] + second - log_pi[i] - mean_kde - 1.0 + mean_pi
        })
        .collect()
}

fn chi2_rates_oracle(e: &ParticleEnsemble, t: &dyn Target, eps: f64) -> Vec<f64> {
    let n = e.len();
    let nf = n as f64;
    let x: Vec<&[f64]> = e.particles().collect();
    let z = t.log_normalizer().unwrap();
    let pi: Vec<f64> = x.iter().map(|xi| (t.log_density(xi) - z).exp()).collect();
    let de: Vec<f64> = (0..n)
        .map(|i| {
            let kr: f64 = (0..n).map(|j| gauss(eps, x[i], x[j])).sum::<f64>() / nf;
            let krp: f64 = (0..n).map(|j| gauss(eps, x[i], x[j]) / pi[j]).sum::<f64>() / nf;
            0.5 * kr / pi[i] + 0.5 * krp
        })
        .collect();
    let mean = de.iter().sum::<f64>() / nf;
    de.iter().map(|v| v - mean).collect()
}

#[test]
fn kl_rates_match_formula() {
    let mut r = rng(3);
    let target = Isotropic { mu: vec![0.3, -0.2], s: 1.3 };
    let e = random_ensemble(&mut r, 50, 2, 2.0);
    let got = bd_rates_kl(&e, &target, &KernelSpec::new(0.4, 2).unwrap()).unwrap();
    let want = kl_rates_oracle(&e, &target, 0.4);
    for (g, w) in got.lambda.iter().zip(&want) {
        assert!((g - w).abs() < 1e-10, "{g} vs {w}");
    }
    assert_eq!(got.clipped, 0);
}

#[test]
fn chi2_rates_match_formula() {
    let mut r = rng(4);
    for d in 1..=3 {
        let target = Isotropic { mu: vec![0.1; d], s: 1.1 };
        let e = random_ensemble(&mut r, 40, d, 1.5);
        let got = bd_rates_chi2(&e, &target, &KernelSpec::new(0.5, d).unwrap(), None).unwrap();
        let want = chi2_rates_oracle(&e, &target, 0.5);
        for (g, w) in got.lambda.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * w.abs().max(1.0), "{g} vs {w}");
        }
        assert!(got.mean().abs() < 1e-10);
    }
}

#[test]
fn chi2_rates_need_a_normalizer() {
    let e = ParticleEnsemble::uniform(1, vec![0.0, 1.0]).unwrap();
    let k = KernelSpec::new(0.3, 1).unwrap();
    assert!(bd_rates_chi2(&e, &Flat(1), &k, None).is_err());
    assert!(bd_rates_chi2(&e, &Flat(1), &k, Some(0.0)).is_ok());
}

#[test]
fn single_particle_rates_vanish() {
    let e = ParticleEnsemble::uniform(2, vec![0.4, -1.0]).unwrap();
    let k = KernelSpec::new(0.2, 2).unwrap();
    let pi = GaussianMixture::four_mode_example();
    assert_eq!(bd_rates_kl(&e, &pi, &k).unwrap().lambda, vec![0.0]);
    assert_eq!(bd_rates_chi2(&e, &pi, &k, None).unwrap().lambda, vec![0.0]);
    assert_eq!(bd_rates_kl_nongradient(&e, &pi, &k).unwrap().lambda, vec![0.0]);
    let mut r = rng(5);
    for d in 1..=3 {
        for _ in 0..50 {
            let e = random_ensemble(&mut r, 1, d, 3.0);
            let k = KernelSpec::new(0.1 + r.random::<f64>(), d).unwrap();
            let t = Isotropic { mu: vec![0.3; d], s: 0.8 };
            assert_eq!(bd_rates_kl(&e, &t, &k).unwrap().lambda, vec![0.0]);
        }
    }
}

#[test]
fn symmetric_pair_has_zero_chi2_rates() {
    let e = ParticleEnsemble::uniform(1, vec![-0.7, 0.7]).unwrap();
    let t = Isotropic { mu: vec![0.0], s: 1.0 };
    let rates = bd_rates_chi2(&e, &t, &KernelSpec::new(0.3, 1).unwrap(), None).unwrap();
    assert!(rates.lambda.iter().all(|v| v.abs() < 1e-14), "{:?}", rates.lambda);
}

#[test]
fn rates_reject_weighted_ensembles() {
    let e = ParticleEnsemble::weighted(1, vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
    let k = KernelSpec::new(0.3, 1).unwrap();
    assert!(bd_rates_kl(&e, &Flat(1), &k).is_err());
}

#[test]
fn far_apart_particles_are_clipped_not_infinite() {
    let e = ParticleEnsemble::uniform(1, vec![0.0, 1e4]).unwrap();
    let t = Isotropic { mu: vec![0.0], s: 1.0 };
    let k = KernelSpec::new(0.2, 1).unwrap();
    let r = bd_rates_chi2(&e, &t, &k, None).unwrap();
    assert!(r.lambda.iter().all(|v| v.is_finite() && v.abs() <= RATE_CLIP));
    assert!(r.clipped > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_rates_are_mean_zero_and_shift_invariant(seed in any::<u64>(), n in 1usize..60, d in 1usize..=3, eps in 0.1f64..1.0) {
        let mut r = rng(seed);
        let e = random_ensemble(&mut r, n, d, 2.0);
        let k = KernelSpec::new(eps, d).unwrap();
        let t = Isotropic { mu: vec![0.2; d], s: 0.9 };
        let a = bd_rates_kl(&e, &t, &k).unwrap();
        let b = bd_rates_kl(&e, &Shifted(Isotropic { mu: vec![0.2; d], s: 0.9 }, 17.3), &k).unwrap();
        prop_assert!(a.mean().abs() < 1e-10);
        for (x, y) in a.lambda.iter().zip(&b.lambda) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn rates_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let e = random_ensemble(&mut r, n, 2, 1.5);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let rows = e.rows();
        let permuted = ParticleEnsemble::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
        let k = KernelSpec::new(0.3, 2).unwrap();
        let t = Isotropic { mu: vec![0.0, 0.5], s: 1.0 };
        let a = bd_rates_kl(&e, &t, &k).unwrap();
        let b = bd_rates_kl(&permuted, &t, &k).unwrap();
        let c = bd_rates_chi2(&e, &t, &k, None).unwrap();
        let dd = bd_rates_chi2(&permuted, &t, &k, None).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            prop_assert!((a.lambda[i] - b.lambda[pos]).abs() < 1e-12);
            prop_assert!((c.lambda[i] - dd.lambda[pos]).abs() < 1e-9 * c.lambda[i].abs().max(1.0));
        }
    }

    #[test]
    fn jump_step_preserves_count_and_weights(seed in any::<u64>(), n in 1usize..50, scale in 0.0f64..50.0) {
        let mut r = rng(seed);
        let mut e = random_ensemble(&mut r, n, 2, 1.0);
        let before = e.rows();
        let lambda: Vec<f64> = (0..n).map(|_| scale * (2.0 * r.random::<f64>() - 1.0)).collect();
        let rates = JumpRates { lambda, clipped: 0 };
        let diag = bd_jump_step(&mut e, &rates, 0.1, &mut r).unwrap();
        prop_assert_eq!(e.len(), n);
        prop_assert!(e.has_uniform_weights());
        // Every surviving location is one of the old ones.
        for row in e.rows() {
            prop_assert!(before.contains(&row));
        }
        if n == 1 {
            prop_assert_eq!(diag.kills + diag.births, 0);
        }
    }

    #[test]
    fn ula_and_svgd_commute_with_translation(seed in any::<u64>(), shift in -3.0f64..3.0) {
        let mut r = rng(seed);
        let e = random_ensemble(&mut r, 12, 2, 1.0);
        let t0 = Isotropic { mu: vec![0.0, 0.0], s: 1.0 };
        let t1 = Isotropic { mu: vec![shift, shift], s: 1.0 };
        let mut shifted = e.clone();
        shifted.positions_mut().iter_mut().for_each(|x| *x += shift);
        let (mut a, mut b) = (e.clone(), shifted.clone());
        ula_step(&mut a, &t0, 1e-2, &mut rng(seed ^ 1)).unwrap();
        ula_step(&mut b, &t1, 1e-2, &mut rng(seed ^ 1)).unwrap();
        for (x, y) in a.positions().iter().zip(b.positions()) {
            prop_assert!((x + shift - y).abs() < 1e-9);
        }
        let (mut a, mut b) = (e, shifted);
        svgd_step(&mut a, &t0, 1e-2).unwrap();
        svgd_step(&mut b, &t1, 1e-2).unwrap();
        for (x, y) in a.positions().iter().zip(b.positions()) {
            prop_assert!((x + shift - y).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_rates_leave_ensemble_unchanged() {
    let mut r = rng(9);
    let mut e = random_ensemble(&mut r, 30, 2, 1.0);
    let before = e.clone();
    let d = bd_jump_step(&mut e, &JumpRates::zeros(30), 1.0, &mut r).unwrap();
    assert_eq!(e, before);
    assert_eq!(d, JumpDiagnostics::default());
}

#[test]
fn large_step_removes_positive_rate_particle() {
    let n = 5;
    let trials = 10_000;
    let mut survived = 0;
    for seed in 0..trials {
        let mut e = ParticleEnsemble::uniform(1, (0..n).map(|i| i as f64).collect()).unwrap();
        let mut lambda = vec![0.0; n];
        lambda[2] = 1.0;
        bd_jump_step(&mut e, &JumpRates { lambda, clipped: 0 }, 1e3, &mut rng(seed)).unwrap();
        if e.positions().contains(&2.0) {
            survived += 1;
        }
    }
    let p = survived as f64 / trials as f64;
    let stderr = (0.25 / trials as f64).sqrt();
    assert!(p <= 3.0 * stderr, "survival fraction {p}");
}

#[test]
fn negative_rate_duplicates_particle() {
    let mut e = ParticleEnsemble::uniform(1, vec![0.0, 1.0, 2.0]).unwrap();
    let rates = JumpRates { lambda: vec![-1.0, 0.0, 0.0], clipped: 0 };
    let d = bd_jump_step(&mut e, &rates, 1e3, &mut rng(1)).unwrap();
    assert_eq!(d.births, 1);
    assert_eq!(e.positions().iter().filter(|&&x| x == 0.0).count(), 2);
}

#[test]
fn single_particle_events_are_skipped() {
    let mut e = ParticleEnsemble::uniform(1, vec![0.5]).unwrap();
    let d = bd_jump_step(&mut e, &JumpRates { lambda: vec![5.0], clipped: 0 }, 10.0, &mut rng(2)).unwrap();
    assert_eq!(d.skipped, 1);
    assert_eq!(e.positions(), &[0.5]);
}

#[test]
fn ula_noise_has_variance_two_dt() {
    let n = 100_000;
    let dt = 1e-3;
    let mut e = ParticleEnsemble::uniform(1, vec![0.0; n]).unwrap();
    ula_step(&mut e, &Flat(1), dt, &mut rng(5)).unwrap();
    let x = e.positions();
    let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    // Var of the sample second moment of N(0, σ²) is 2σ⁴/n.
    let stderr = (2.0 / n as f64).sqrt() * 2.0 * dt;
    assert!((var - 2.0 * dt).abs() < 3.0 * stderr, "{var}");
}

#[test]
fn ula_long_run_matches_gaussian_variance() {
    let t = Isotropic { mu: vec![0.0, 0.0], s: 1.0 };
    let mut e = ParticleEnsemble::uniform(2, vec![0.0; 4000]).unwrap();
    let spec = SamplerSpec {
        algorithm: Algorithm::Ula,
        dt: 1e-3,
        t_final: 20.0,
        epsilon: 0.2,
        record_interval: 20.0,
        log_normalizer: None,
    };
    run_sampler(&spec, &t, &mut e, &mut SamplerRng::new(6, 0), |_, _| Ok(())).unwrap();
    for c in 0..2 {
        let v: Vec<f64> = e.particles().map(|p| p[c]).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((0.9..=1.1).contains(&var), "coordinate {c}: {var}");
    }
}

#[test]
fn same_seed_same_trajectory() {
    let pi = GaussianMixture::four_mode_example();
    for alg in [Algorithm::BdlsKl, Algorithm::BdlsChi2, Algorithm::Ula, Algorithm::Svgd] {
        let spec = SamplerSpec {
            algorithm: alg,
            dt: 1e-2,
            t_final: 0.5,
            epsilon: 0.2,
            record_interval: 0.1,
            log_normalizer: None,
        };
        let run = || {
            let mut e = GaussianMixture::four_mode_initial().sample_seeded(60, 3).unwrap();
            let d = run_sampler(&spec, &pi, &mut e, &mut SamplerRng::new(42, 1), |_, _| Ok(())).unwrap();
            (e, d)
        };
        assert_eq!(run(), run(), "{}", alg.name());
    }
}

#[test]
fn bdls_with_one_particle_is_ula() {
    let pi = GaussianMixture::four_mode_example();
    let init = ParticleEnsemble::uniform(2, vec![0.3, -0.4]).unwrap();
    let spec = |algorithm| SamplerSpec {
        algorithm,
        dt: 1e-3,
        t_final: 1.0,
        epsilon: 0.2,
        record_interval: 0.5,
        log_normalizer: None,
    };
    let (bd, diag) = bdls_run(&spec(Algorithm::BdlsKl), &pi, init.clone(), 8, |_, _| Ok(())).unwrap();
    let mut ula = init;
    run_sampler(&spec(Algorithm::Ula), &pi, &mut ula, &mut SamplerRng::new(8, 0), |_, _| Ok(())).unwrap();
    assert_eq!(bd, ula);
    assert_eq!(diag.jumps.kills + diag.jumps.births, 0);
}

#[test]
fn sampler_observes_on_schedule() {
    let spec = SamplerSpec {
        algorithm: Algorithm::Ula,
        dt: 0.01,
        t_final: 0.25,
        epsilon: 0.2,
        record_interval: 0.1,
        log_normalizer: None,
    };
    let mut e = ParticleEnsemble::uniform(1, vec![0.0]).unwrap();
    let mut times = vec![];
    run_sampler(&spec, &Flat(1), &mut e, &mut SamplerRng::new(0, 0), |t, _| {
        times.push(t);
        Ok(())
    })
    .unwrap();
    let want = [0.0, 0.1, 0.2, 0.25];
    assert_eq!(times.len(), want.len());
    for (a, b) in times.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    let bad = SamplerSpec { dt: 0.03, ..spec };
    assert!(run_sampler(&bad, &Flat(1), &mut e, &mut SamplerRng::new(0, 0), |_, _| Ok(())).is_err());
}

#[test]
fn ula_reports_non_finite_gradient() {
    struct Bad;
    impl Target for Bad {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn grad_log_density_into(&self, x: &[f64], out: &mut [f64]) {
            out[0] = if x[0] > 0.5 { f64::NAN } else { 0.0 };
        }
    }
    let mut e = ParticleEnsemble::uniform(1, vec![0.0, 1.0]).unwrap();
    let err = ula_step(&mut e, &Bad, 0.1, &mut rng(0)).unwrap_err().to_string();
    assert!(err.contains("particle 1"), "{err}");
}

#[test]
fn svgd_single_particle_at_mode_stays() {
    let t = Isotropic { mu: vec![1.0, 2.0], s: 0.5 };
    let mut e = ParticleEnsemble::uniform(2, vec![1.0, 2.0]).unwrap();
    svgd_step(&mut e, &t, 0.1).unwrap();
    assert_eq!(e.positions(), &[1.0, 2.0]);
}

#[test]
fn svgd_keeps_mirror_symmetry() {
    let t = Isotropic { mu: vec![0.0], s: 1.0 };
    let mut e = ParticleEnsemble::uniform(1, vec![-0.8, 0.8]).unwrap();
    for _ in 0..50 {
        svgd_step(&mut e, &t, 0.05).unwrap();
        assert_eq!(e.positions()[0], -e.positions()[1]);
    }
}

#[test]
fn svgd_pushes_nearby_particles_apart() {
    // Flat target: only the kernel-gradient term acts.
    let (a, b) = (0.3, 0.3 + 1e-3);
    let mut e = ParticleEnsemble::uniform(1, vec![a, b]).unwrap();
    let dt = 0.1;
    svgd_step(&mut e, &Flat(1), dt).unwrap();
    let r2 = (b - a) * (b - a);
    let h2 = r2 / (2.0 * 3f64.ln());
    let k = (-0.5 * r2 / h2).exp();
    let push = dt / 2.0 * k * (b - a) / h2;
    let (da, db) = (e.positions()[0] - a, e.positions()[1] - b);
    assert!((da + push).abs() < 1e-12 * push && (db - push).abs() < 1e-12 * push, "{da} {db} {push}");
    assert_eq!(da, -db);
    assert!(da < 0.0 && db > 0.0);
}

#[test]
fn svgd_matches_pairwise_formula() {
    let mut r = rng(12);
    let t = Isotropic { mu: vec![0.5, -0.5, 0.0], s: 1.2 };
    let e = random_ensemble(&mut r, 25, 3, 2.0);
    let h2 = median_bandwidth_sq(&e);
    let x: Vec<&[f64]> = e.particles().collect();
    let mut pair_d2 = vec![];
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            pair_d2.push(x[i].iter().zip(x[j]).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
        }
    }
    pair_d2.sort_by(f64::total_cmp);
    let m = pair_d2.len();
    let med = if m % 2 == 1 { pair_d2[m / 2] } else { 0.5 * (pair_d2[m / 2 - 1] + pair_d2[m / 2]) };
    assert!((h2 - med / (2.0 * 26f64.ln())).abs() < 1e-14);
    let dt = 0.05;
    let mut stepped = e.clone();
    svgd_step(&mut stepped, &t, dt).unwrap();
    let n = x.len() as f64;
    for i in 0..x.len() {
        for a in 0..3 {
            let mut phi = 0.0;
            for j in 0..x.len() {
                let r2: f64 = x[i].iter().zip(x[j]).map(|(p, q)| (p - q) * (p - q)).sum();
                let k = (-0.5 * r2 / h2).exp();
                let g = -(x[j][a] - t.mu[a]) / (1.2 * 1.2);
                phi += k * g + k * (x[i][a] - x[j][a]) / h2;
            }
            let want = x[i][a] + dt / n * phi;
            assert!((stepped.particle(i)[a] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn median_bandwidth_fallbacks() {
    assert_eq!(median_bandwidth_sq(&ParticleEnsemble::uniform(1, vec![3.0]).unwrap()), 1.0);
    assert_eq!(median_bandwidth_sq(&ParticleEnsemble::uniform(1, vec![3.0, 3.0]).unwrap()), 1.0);
}

fn torus_grid_ensemble(n: usize) -> (ParticleEnsemble, f64) {
    let period = 2.0 * std::f64::consts::PI;
    let pos = (0..n).map(|i| i as f64 * period / n as f64).collect();
    (ParticleEnsemble::uniform(1, pos).unwrap(), period)
}

#[test]
fn masses_uniform_torus_is_fixed_point() {
    let (mut e, period) = torus_grid_ensemble(40);
    let flat = TorusTarget::new(TorusPotential::flat(), 64).unwrap();
    let ode = MassesOde::new(&e, &flat, &KernelSpec::new(0.3, 1).unwrap(), Geometry::Torus { period }).unwrap();
    for _ in 0..100 {
        ode.step(&mut e, 0.01).unwrap();
        for w in e.weights() {
            assert!((w - 1.0 / 40.0).abs() < 1e-12);
        }
    }
}

#[test]
fn masses_rhs_sums_to_zero() {
    let mut r = rng(21);
    for _ in 0..20 {
        let e0 = random_ensemble(&mut r, 30, 2, 2.0);
        let w: Vec<f64> = (0..30).map(|_| r.random::<f64>() + 0.1).collect();
        let total: f64 = w.iter().sum();
        let e = ParticleEnsemble::weighted(2, e0.positions().to_vec(), w.iter().map(|v| v / total).collect()).unwrap();
        let t = Isotropic { mu: vec![0.0, 0.0], s: 1.0 };
        let ode = MassesOde::new(&e, &t, &KernelSpec::new(0.5, 2).unwrap(), Geometry::Euclidean).unwrap();
        let s: f64 = ode.rhs(e.weights()).iter().sum();
        assert!(s.abs() < 1e-12, "{s}");
    }
}

#[test]
fn masses_stay_in_simplex() {
    let mut r = rng(22);
    let t = GaussianMixture::four_mode_example();
    let k = KernelSpec::new(0.3, 2).unwrap();
    for _ in 0..5 {
        let mut e = random_ensemble(&mut r, 40, 2, 4.0);
        let ode = MassesOde::new(&e, &t, &k, Geometry::Euclidean).unwrap();
        for _ in 0..1000 {
            let s = ode.step(&mut e, 0.01).unwrap();
            assert!(s.max_mass_drift < 1e-10);
            assert!(e.weights().iter().all(|w| *w > 0.0));
            assert!((e.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn masses_move_toward_target() {
    // Two locations, target favors the first.
    let e0 = ParticleEnsemble::uniform(1, vec![0.0, 3.0]).unwrap();
    let t = Isotropic { mu: vec![0.0], s: 1.0 };
    let mut e = e0.clone();
    masses_ode_step(&mut e, &t, &KernelSpec::new(0.2, 1).unwrap(), 0.1).unwrap();
    assert!(e.weights()[0] > 0.5);
}
