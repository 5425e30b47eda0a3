use geolab::convexity::{
    ball_convexity_check, clarkson_check, enflo_type_check, hypercube_lower_bound,
    martingale_cotype_check, roundness_check,
};
use geolab::embedding::{
    build_embedding, certify_lower, certify_upper, theorem_bound, EmbedOptions,
};
use geolab::lewis::{
    certify_lewis, psi, solve_lewis, CoefficientMatrix, SolverConfig, SolverMode, SubspaceBasis,
};
use geolab::random::{gaussian_matrix, random_orthogonal, random_psd, seeded};
use geolab::spectral::{
    loewner_contraction_check, schatten_norm, sym_power, von_neumann_check, DenseMatrix, PsdMatrix,
};
use proptest::prelude::*;

fn matrix(n: usize, seed: u64) -> DenseMatrix {
    gaussian_matrix(n, &mut seeded(seed))
}

#[test]
fn schatten_triangle_inequality_sweep() {
    let mut rng = seeded(71);
    for i in 0..10_000 {
        let p = [1.0, 1.5, 2.0, 3.0, f64::INFINITY][i % 5];
        let a = gaussian_matrix(4, &mut rng);
        let b = gaussian_matrix(4, &mut rng);
        let lhs = schatten_norm(&(&a + &b), p).unwrap();
        let rhs = schatten_norm(&a, p).unwrap() + schatten_norm(&b, p).unwrap();
        assert!(lhs <= rhs + 1e-9 * (1.0 + rhs), "p = {p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schatten_norm_decreases_in_p(seed in any::<u64>(), n in 1usize..6, p in 1.0f64..4.0, dp in 0.01f64..3.0) {
        let a = matrix(n, seed);
        let small = schatten_norm(&a, p + dp).unwrap();
        let large = schatten_norm(&a, p).unwrap();
        prop_assert!(small <= large * (1.0 + 1e-12));
    }

    #[test]
    fn schatten_norm_is_unitarily_invariant(seed in any::<u64>(), n in 1usize..6, p in 0.5f64..5.0) {
        let mut rng = seeded(seed);
        let a = gaussian_matrix(n, &mut rng);
        let u = random_orthogonal(n, &mut rng);
        let v = random_orthogonal(n, &mut rng);
        let x = schatten_norm(&a, p).unwrap();
        let y = schatten_norm(&(&u * &a * &v), p).unwrap();
        prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x));
    }

    #[test]
    fn pseudo_powers_compose(seed in any::<u64>(), n in 1usize..6, rank in 1usize..6, b1 in -2.0f64..2.0, b2 in -2.0f64..2.0) {
        let mut rng = seeded(seed);
        let t = PsdMatrix::new(random_psd(n, rank.min(n), &mut rng)).unwrap();
        let left = sym_power(&t, b1).unwrap().matrix() * sym_power(&t, b2).unwrap().matrix();
        let right = sym_power(&t, b1 + b2).unwrap();
        let scale = 1.0 + right.matrix().norm() + left.norm();
        prop_assert!((left - right.matrix()).norm() <= 1e-8 * scale);
    }

    #[test]
    fn loewner_contraction_below_one_half(seed in any::<u64>(), n in 1usize..5, beta in 0.01f64..=0.5) {
        let mut rng = seeded(seed);
        let s = random_psd(n, n, &mut rng);
        let t = &s + random_psd(n, n, &mut rng);
        let check = loewner_contraction_check(&PsdMatrix::new(s).unwrap(), &PsdMatrix::new(t).unwrap(), beta).unwrap();
        prop_assert!(check.holds, "value {}", check.value);
    }

    #[test]
    fn von_neumann_holds(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = seeded(seed);
        let (s, t) = (gaussian_matrix(n, &mut rng), gaussian_matrix(n, &mut rng));
        prop_assert!(von_neumann_check(&s, &t).unwrap().holds);
    }

    #[test]
    fn uniform_convexity_inequalities(seed in any::<u64>(), n in 1usize..5, q in 1.0f64..=2.0) {
        let mut rng = seeded(seed);
        let a = gaussian_matrix(n, &mut rng);
        let b = gaussian_matrix(n, &mut rng);
        prop_assert!(clarkson_check(q, &a, &b).unwrap().holds);
        let c: Vec<DenseMatrix> = (0..4).map(|_| gaussian_matrix(n, &mut rng)).collect();
        prop_assert!(roundness_check(q, [&c[0], &c[1], &c[2], &c[3]]).unwrap().holds);
        if q > 1.0 {
            prop_assert!(ball_convexity_check(q, &a, &b).unwrap().holds);
        }
    }

    #[test]
    fn enflo_type_and_hypercube_bounds(seed in any::<u64>(), k in 1usize..=4, q in 1.05f64..=2.0) {
        let mut rng = seeded(seed);
        let f: Vec<DenseMatrix> = (0..1usize << k).map(|_| gaussian_matrix(2, &mut rng)).collect();
        prop_assert!(enflo_type_check(q, &f).unwrap().holds);
        let b = hypercube_lower_bound(&f, 1.0, q).unwrap();
        prop_assert!(b.witnessed <= b.actual * (1.0 + 1e-9));
        prop_assert!(b.implied <= b.actual * (1.0 + 1e-9));
    }

    #[test]
    fn martingale_cotype_holds(seed in any::<u64>(), n in 1usize..=5, q in 1.05f64..=2.0) {
        let mut rng = seeded(seed);
        let mut stages = vec![vec![gaussian_matrix(2, &mut rng)]];
        for k in 0..n {
            let mut next = vec![DenseMatrix::zeros(2, 2); 1 << (k + 1)];
            for i in 0..1usize << k {
                let d = gaussian_matrix(2, &mut rng);
                next[i] = &stages[k][i] + &d;
                next[i | (1 << k)] = &stages[k][i] - &d;
            }
            stages.push(next);
        }
        prop_assert!(martingale_cotype_check(q, &stages).unwrap().holds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn psi_is_homogeneous(seed in any::<u64>(), k in 1usize..4, m in 2usize..5, p in 0.5f64..4.0, c in -3.0f64..3.0) {
        prop_assume!(c.abs() > 1e-3);
        let mut rng = seeded(seed);
        let basis = SubspaceBasis::random(k, m, p, &mut rng).unwrap();
        let a = gaussian_matrix(k, &mut rng);
        let x = psi(&CoefficientMatrix(a.clone()), &basis).unwrap();
        let y = psi(&CoefficientMatrix(a * c), &basis).unwrap();
        prop_assert!((y - c.abs().powf(p) * x).abs() <= 1e-10 * (1.0 + y.abs()));
    }

    #[test]
    fn solved_certificates_satisfy_normalization(
        seed in any::<u64>(),
        k in 1usize..=4,
        m in 2usize..=5,
        p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]),
        gradient in any::<bool>(),
    ) {
        let basis = SubspaceBasis::random(k, m, p, &mut seeded(seed)).unwrap();
        let config = SolverConfig {
            mode: if gradient { SolverMode::GradientAscent } else { SolverMode::FixedPoint },
            seed,
            ..SolverConfig::default()
        };
        let cert = solve_lewis(&basis, &config).unwrap();
        let r = certify_lewis(&cert, p);
        prop_assert!(r.gram_residual <= config.tol && r.trace_residual <= config.tol);
        prop_assert!(cert.coefficients.determinant() > 0.0);
    }

    #[test]
    fn embedding_respects_certified_constants(
        seed in any::<u64>(),
        k in 1usize..=3,
        m in 2usize..=4,
        p in prop::sample::select(vec![1.0, 1.5, 2.5]),
        dq in 0.1f64..1.5,
    ) {
        let q = p + dq;
        let basis = SubspaceBasis::random(k, m, p, &mut seeded(seed)).unwrap();
        let solver = SolverConfig { seed, ..SolverConfig::default() };
        let options = EmbedOptions { random_probes: 300, truncation_sample: 200, seed, ..EmbedOptions::default() };
        let (map, cert) = build_embedding(&basis, q, &solver, &options).unwrap();
        prop_assert_eq!(cert.violations, 0);
        prop_assert!(cert.within_bound());
        prop_assert!(cert.empirical_distortion >= 1.0 - 1e-12);
        prop_assert!(theorem_bound(p, q, k).unwrap() <= cert.certified_bound * (1.0 + 1e-12));
        let mut rng = seeded(seed ^ 1);
        for _ in 0..20 {
            let c: Vec<f64> = (0..k).map(|_| geolab::random::gaussian(&mut rng)).collect();
            let a = map.lewis.element(&c);
            prop_assert!(certify_lower(&a, &map.lewis, p, q).unwrap().holds);
            prop_assert!(certify_upper(&a, &map.lewis, p, q).unwrap().holds);
        }
    }
}

#[test]
fn coordinates_survive_nearly_repeated_singular_values() {
    // Lewis design with singular values 1.41403 and 1.41386
    let seed = 12197087059240063913;
    let basis = SubspaceBasis::random(3, 2, 1.0, &mut seeded(seed)).unwrap();
    let solver = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let options = EmbedOptions {
        random_probes: 300,
        truncation_sample: 200,
        seed,
        ..EmbedOptions::default()
    };
    let (map, _) = build_embedding(&basis, 1.8180839851281231, &solver, &options).unwrap();
    let mut rng = seeded(seed ^ 1);
    for _ in 0..20 {
        let c: Vec<f64> = (0..3).map(|_| geolab::random::gaussian(&mut rng)).collect();
        let x = geolab::embedding::lewis_coordinates(&map.lewis.element(&c), &map.lewis).unwrap();
        for (a, b) in x.iter().zip(&c) {
            assert!((a - b).abs() <= 1e-12, "{x:?} {c:?}");
        }
    }
}
