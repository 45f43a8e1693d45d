use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zeno::estimators::ControlVector;
use zeno::se3::{det, matmul, random_rotation, rotation_error, sample_frame_perturbation, transpose, Se3Control, Vec3};
use zeno::{
    best_of_n, discrete_kl, horizon_decay_coefficient, ou_step, renormalize_to_sqrt_d, se3_update, so3_exp, so3_log,
    vendi_score, zeno_optimize, Config, Divergence, EstimatorKind, FnGenerator, FnReward, FrameSet, Identity,
    ModeDistribution, NoiseVector, OuStepInputs,
};

fn nonzero_vec(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_dim).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn vec3() -> impl Strategy<Value = Vec3<f64>> {
    [-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0]
}

fn simplex(k: usize) -> impl Strategy<Value = ModeDistribution<f64>> {
    prop::collection::vec(0u32..100, k)
        .prop_filter("non-empty", |c| c.iter().any(|&x| x > 0))
        .prop_map(|c| ModeDistribution::from_counts(&c.iter().map(|&x| x as usize).collect::<Vec<_>>()).unwrap())
}

fn max_abs_diff(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sphere_reward(d: usize) -> FnReward<impl Fn(&[f64]) -> f64 + Sync> {
    FnReward(move |x: &[f64]| {
        -x.iter()
            .enumerate()
            .map(|(i, v)| (v - if i == 0 { (d as f64).sqrt() } else { 0.0 }).powi(2))
            .sum::<f64>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renormalization_hits_the_sphere(z in nonzero_vec(32)) {
        let d = z.len() as f64;
        let out = renormalize_to_sqrt_d(&NoiseVector::new(z.clone()).unwrap()).unwrap();
        prop_assert!((out.norm() / d.sqrt() - 1.0).abs() < 1e-12);
        let scale = out.as_slice()[0] / z[0];
        if z[0].abs() > 1e-3 {
            for (a, b) in out.as_slice().iter().zip(&z) {
                prop_assert!((a - scale * b).abs() < 1e-9 * (1.0 + a.abs()));
            }
        }
        prop_assert!(scale > 0.0 || z[0].abs() <= 1e-3);
    }

    #[test]
    fn ou_step_is_the_affine_combination(
        (z, eps, u) in (1usize..8).prop_flat_map(|d| (
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-3.0f64..3.0, d),
            prop::collection::vec(-3.0f64..3.0, d),
        )),
        beta in 0.0f64..0.99,
        eta in 0.0f64..3.0,
    ) {
        let current = NoiseVector::new(z.clone()).unwrap();
        let control = ControlVector::new(u.clone()).unwrap();
        let out = ou_step(&OuStepInputs { current: &current, beta, fresh: &eps, control: &control, eta }).unwrap();
        for i in 0..z.len() {
            let expect = (1.0 - beta).sqrt() * z[i] + beta.sqrt() * eps[i] + eta * u[i];
            prop_assert!((out.as_slice()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zeno_traces_keep_their_contract(
        seed in any::<u64>(),
        d in 1usize..6,
        particles in 2usize..8,
        estimator in prop::sample::select(EstimatorKind::ALL.to_vec()),
    ) {
        let cfg = Config { iterations: 12, particles, estimator, seed, ..Config::default() };
        let reward = sphere_reward(d);
        let z0 = NoiseVector::new(vec![1.0; d]).unwrap();
        let gen = Identity { dim: d };
        let a = zeno_optimize(&gen, &reward, &z0, &cfg).unwrap();
        let b = zeno_optimize(&gen, &reward, &z0, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.entries.len(), 12);
        prop_assert!(a.best_so_far_is_monotone());
        for e in &a.entries {
            prop_assert_eq!(e.candidate_rewards.len(), particles);
            prop_assert!((e.noise_norm / (d as f64).sqrt() - 1.0).abs() < 1e-9);
        }
        prop_assert!((a.final_noise.norm() / (d as f64).sqrt() - 1.0).abs() < 1e-9);
        let best_seen = a
            .entries
            .iter()
            .flat_map(|e| e.candidate_rewards.iter().copied().chain([e.state_reward]))
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.best_reward >= best_seen);
    }

    #[test]
    fn generator_and_reward_are_pure(z in prop::collection::vec(-3.0f64..3.0, 2)) {
        let gen = FnGenerator::new(2, 2, |z: &[f64]| vec![z[0].sin() * 3.0, z[1] * z[0]]);
        let first = zeno::evaluate(&gen, &sphere_reward(2), &z).unwrap().value();
        for _ in 0..100 {
            prop_assert_eq!(zeno::evaluate(&gen, &sphere_reward(2), &z).unwrap().value(), first);
        }
    }

    #[test]
    fn best_of_n_is_nested(seed in any::<u64>(), n in 1usize..20) {
        let reward = sphere_reward(3);
        let gen = Identity { dim: 3 };
        let (_, small) = best_of_n(&gen, &reward, 3, n, seed).unwrap();
        let (_, large) = best_of_n(&gen, &reward, 3, 2 * n, seed).unwrap();
        prop_assert!(large.value() >= small.value());
    }

    #[test]
    fn exp_of_negation_is_the_inverse(w in vec3()) {
        let prod = matmul(&so3_exp(&w), &so3_exp(&w.map(|x| -x)));
        prop_assert!(max_abs_diff(&prod, &zeno::se3::identity()) < 1e-10);
    }

    #[test]
    fn log_inverts_exp_inside_the_ball(w in vec3().prop_filter("|w| < pi - 0.01", |w| {
        (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt() < std::f64::consts::PI - 0.01
    })) {
        let back = so3_log(&so3_exp(&w));
        for k in 0..3 {
            prop_assert!((back[k] - w[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn se3_updates_keep_frames_valid(
        seed in any::<u64>(),
        n in 2usize..10,
        steps in 1usize..40,
        eta in 0.01f64..20.0,
        tau_t in 0.01f64..1.0,
        tau_r in 0.01f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frames = FrameSet::<f64>::random(n, 2.0, &mut rng).unwrap();
        frames.recenter();
        for _ in 0..steps {
            let p = sample_frame_perturbation::<f64, _>(n, &mut rng).unwrap();
            let control = Se3Control { u_t: p.v, u_r: p.omega };
            let (next, report) = se3_update(&frames, &control, eta, tau_t, tau_r).unwrap();
            prop_assert!(report.max_translation_step <= tau_t * (1.0 + 1e-12));
            prop_assert!(report.max_rotation_step <= tau_r * (1.0 + 1e-12));
            for k in 0..3 {
                prop_assert!(next.mean_translation()[k].abs() < 1e-9);
            }
            for f in next.frames() {
                prop_assert!(rotation_error(&f.rotation) < 1e-9);
                prop_assert!((det(&f.rotation) - 1.0).abs() < 1e-9);
            }
            frames = next;
        }
    }

    #[test]
    fn vendi_is_bounded_and_invariant(
        points in prop::collection::vec([-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0], 1..12)
            .prop_filter("no zero vectors", |p| p.iter().all(|x| x.iter().map(|v| v * v).sum::<f64>() > 1e-4)),
        seed in any::<u64>(),
        shift in 0usize..12,
    ) {
        let emb: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        let n = emb.len() as f64;
        let vs = vendi_score(&emb).unwrap();
        prop_assert!(vs >= 1.0 - 1e-9 && vs <= n + 1e-9);

        let mut permuted = emb.clone();
        permuted.rotate_left(shift % emb.len());
        prop_assert!((vendi_score(&permuted).unwrap() - vs).abs() < 1e-9);

        let q = random_rotation::<f64, _>(&mut ChaCha8Rng::seed_from_u64(seed));
        let rotated: Vec<Vec<f64>> = points
            .iter()
            .map(|p| (0..3).map(|i| (0..3).map(|j| q[i][j] * p[j]).sum()).collect())
            .collect();
        prop_assert!((vendi_score(&rotated).unwrap() - vs).abs() < 1e-8);
        prop_assert!(max_abs_diff(&matmul(&q, &transpose(&q)), &zeno::se3::identity()) < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal(p in simplex(4), q in simplex(4)) {
        prop_assert_eq!(discrete_kl(&p, &p).unwrap(), Divergence::Finite(0.0));
        match discrete_kl(&p, &q).unwrap() {
            Divergence::Finite(v) => prop_assert!(v >= 0.0),
            Divergence::Infinite => prop_assert!(p
                .probabilities
                .iter()
                .zip(&q.probabilities)
                .any(|(a, b)| *a > 0.0 && *b == 0.0)),
        }
        let total: f64 = p.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn horizon_coefficient_matches_the_unrolled_recursion() {
    for beta in [0.01f64, 0.1, 0.3] {
        for h in 1u32..=64 {
            // Coefficient of the control injected at the first of H steps,
            // carried through H - 1 uncontrolled contractions.
            let mut coef = beta.sqrt();
            for _ in 1..h {
                coef *= (1.0 - beta).sqrt();
            }
            let closed = horizon_decay_coefficient(beta, h).unwrap();
            assert!((closed - coef).abs() < 1e-12, "beta {beta} H {h}: {closed} vs {coef}");
        }
    }
}
