mod common;

use common::{c2_norm, cheb, quartic, semicircle, uniform_config};
use loggas::clt::{
    alpha_regularity, covariance_from_inversion, covariance_matrix, linear_statistic,
    negative_moment_probe, predict, rigidity_report, stein_bound, BoundMode, SteinContext,
};
use loggas::equilibrium::{Equilibrium, WORKING_INTERVAL};
use loggas::master::{invert_theta, InversionData};
use loggas::sampler::{generate_batch, BatchSpec, MalaParams, SampleBatch, SamplerKind};
use loggas::{ChebSeries, Error, FunctionSpec};
use proptest::prelude::*;

fn inversions(eq: &Equilibrium, xis: &[ChebSeries]) -> Vec<InversionData> {
    xis.iter().map(|x| invert_theta(eq, x).unwrap()).collect()
}

fn gbe_batch(n: usize, beta: f64, reps: usize, seed: u64) -> SampleBatch {
    let spec = BatchSpec {
        method: SamplerKind::Tridiagonal,
        n,
        beta,
        reps,
        master_seed: seed,
        mala: MalaParams::default(),
    };
    generate_batch(&spec, None).unwrap()
}

/// `(1/(2 beta)) int int dxi_i dxi_j (1 - xy) rho rho` on a midpoint rule in
/// the angle, which has no node on the diagonal.
fn covariance_oracle(a: &ChebSeries, b: &ChebSeries, beta: f64) -> f64 {
    let m = 400;
    let nodes: Vec<f64> = (0..m)
        .map(|i| (std::f64::consts::PI * (i as f64 + 0.25) / m as f64).cos())
        .collect();
    let other: Vec<f64> = (0..m)
        .map(|i| (std::f64::consts::PI * (i as f64 + 0.75) / m as f64).cos())
        .collect();
    let mut total = 0.0;
    for &x in &nodes {
        for &y in &other {
            let da = (a.eval(x) - a.eval(y)) / (x - y);
            let db = (b.eval(x) - b.eval(y)) / (x - y);
            total += da * db * (1.0 - x * y);
        }
    }
    total / (m * m) as f64 / (2.0 * beta)
}

#[test]
fn linear_statistic_of_x_squared_at_origin() {
    let eq = semicircle();
    let x2 = FunctionSpec::Poly(vec![0.0, 0.0, 1.0])
        .to_series(WORKING_INTERVAL)
        .unwrap();
    for n in [1, 5, 40] {
        let v = linear_statistic(&x2, &eq, &vec![0.0; n]);
        assert!((v + n as f64 / 4.0).abs() < 1e-12, "n={n} v={v}");
    }
}

#[test]
fn chebyshev_variances_and_means_at_quadratic() {
    let eq = semicircle();
    for beta in [1.0, 2.0, 4.0] {
        for k in 1..=6 {
            let pred = predict(&[cheb(k)], &eq, beta, 1.0).unwrap();
            assert!(
                (pred.c[0][0] - k as f64 / (2.0 * beta)).abs() < 1e-8,
                "k={k} beta={beta}"
            );
            let even = if k % 2 == 0 { 1.0 } else { 0.0 };
            assert!(
                (pred.m[0] - (0.5 - 1.0 / beta) * even).abs() < 1e-8,
                "k={k} beta={beta} m={}",
                pred.m[0]
            );
        }
    }
    let pair = predict(&[cheb(1), cheb(2)], &eq, 2.0, 1.0).unwrap();
    assert!(pair.c[0][1].abs() < 1e-12);
}

#[test]
fn covariance_matches_independent_double_integral() {
    let eq = quartic();
    let a = cheb(1).add(&cheb(3)).unwrap();
    let b = FunctionSpec::Poly(vec![0.0, 0.3, 0.0, 0.0, 1.0])
        .to_series(WORKING_INTERVAL)
        .unwrap();
    let pred = predict(&[a.clone(), b.clone()], &eq, 1.5, 1.0).unwrap();
    for (i, f) in [&a, &b].iter().enumerate() {
        for (j, g) in [&a, &b].iter().enumerate() {
            let oracle = covariance_oracle(f, g, 1.5);
            assert!(
                (pred.c[i][j] - oracle).abs() < 1e-6 * (1.0 + oracle.abs()),
                "({i},{j}) {} vs {oracle}",
                pred.c[i][j]
            );
        }
    }
}

#[test]
fn covariance_cross_identity_on_both_potentials() {
    for eq in [semicircle(), quartic()] {
        let xis: Vec<ChebSeries> = (1..=6).map(cheb).collect();
        let invs = inversions(&eq, &xis);
        let c = covariance_matrix(&xis, 2.0);
        let cross = covariance_from_inversion(&xis, &invs, &eq, 2.0);
        for i in 0..6 {
            for j in 0..6 {
                assert!(
                    (c[(i, j)] - cross[(i, j)]).abs() < 1e-8,
                    "({i},{j}) {} vs {}",
                    c[(i, j)],
                    cross[(i, j)]
                );
            }
        }
    }
}

#[test]
fn sigma_squares_to_covariance() {
    let eq = quartic();
    let pred = predict(&[cheb(1), cheb(2), cheb(4)], &eq, 1.0, 2.0).unwrap();
    let s = pred.sigma_matrix();
    let err = (&s * &s - pred.c_matrix()).abs().max();
    assert!(err < 1e-10);
}

#[test]
fn tv_prefactor_formula() {
    let eq = semicircle();
    let beta = 4.0;
    let pred = predict(&[cheb(2)], &eq, beta, 1.0).unwrap();
    let sigma2 = pred.c[0][0];
    let expected =
        1.0 / (beta * sigma2) + (0.5 - 1.0 / beta).abs() * std::f64::consts::PI.sqrt() / 2.0;
    assert!((pred.a_beta_tv.unwrap() - expected).abs() < 1e-12);
}

#[test]
fn beta_two_kills_the_mean() {
    for eq in [semicircle(), quartic()] {
        let xis = [
            cheb(2),
            cheb(3),
            FunctionSpec::Poly(vec![0.1, 0.0, 1.0, 0.0, 0.5])
                .to_series(WORKING_INTERVAL)
                .unwrap(),
        ];
        let pred = predict(&xis, &eq, 2.0, 1.0).unwrap();
        assert!(pred.m.iter().chain(&pred.m_master).all(|m| m.abs() < 1e-14));
    }
}

#[test]
fn dependent_test_functions_violate_freeness() {
    let eq = semicircle();
    let twice = cheb(2).scale(2.0);
    let err = predict(&[cheb(2), twice], &eq, 2.0, 1.0).unwrap_err();
    assert!(matches!(err, Error::FreenessViolated { .. }));
}

#[test]
fn exact_gaussian_sentinel_for_t1() {
    let eq = semicircle();
    let xi = [cheb(1)];
    let invs = inversions(&eq, &xi);
    let mut rng = common::rng(11);
    for beta in [1.0, 2.0, 4.0] {
        let ctx = SteinContext::new(&xi, &invs, &eq, beta).unwrap();
        for n in [3, 50, 300] {
            let lambdas = uniform_config(&mut rng, n, &eq);
            let t = ctx.terms(&lambdas).unwrap();
            assert!(t.z[0].abs() < 1e-12, "Z = {}", t.z[0]);
            assert!((t.gamma_xf[0][0] - 0.5 / beta).abs() < 1e-14);
        }
    }
}

#[test]
fn outlier_configuration_is_reported() {
    let eq = semicircle();
    let xi = [cheb(2)];
    let invs = inversions(&eq, &xi);
    let ctx = SteinContext::new(&xi, &invs, &eq, 2.0).unwrap();
    match ctx.terms(&[0.0, 0.5, 1.25]) {
        Err(Error::OutlierConfiguration { max_abs }) => assert_eq!(max_abs, 1.25),
        other => panic!("expected outlier error, got {other:?}"),
    }
}

#[test]
fn gamma_at_equilibrium_quantiles() {
    let eq = semicircle();
    let beta = 2.0;
    let xis = [cheb(1), cheb(2)];
    let invs = inversions(&eq, &xis);
    let ctx = SteinContext::new(&xis, &invs, &eq, beta).unwrap();
    let t = ctx.terms(&eq.quantiles(128)).unwrap();
    let expected = [[0.5 / beta, 0.0], [0.0, 1.0 / beta]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(
                (t.gamma_xf[i][j] - expected[i][j]).abs() < 0.1,
                "({i},{j}) {}",
                t.gamma_xf[i][j]
            );
        }
    }
}

#[test]
fn gamma_variance_shrinks_with_n() {
    let eq = semicircle();
    let xi = [cheb(2)];
    let invs = inversions(&eq, &xi);
    let ctx = SteinContext::new(&xi, &invs, &eq, 2.0).unwrap();
    let mut previous = f64::INFINITY;
    for (i, n) in [16, 64, 256].into_iter().enumerate() {
        let batch = gbe_batch(n, 2.0, 2000, 40 + i as u64);
        let g: Vec<f64> = batch
            .iter()
            .filter_map(|l| ctx.terms(l).ok())
            .map(|t| t.gamma_xf[0][0])
            .collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (g.len() - 1) as f64;
        assert!(var < previous, "n={n} var={var}");
        previous = var;
    }
}

#[test]
fn tv_bound_arithmetic_matches_hand_calculation() {
    let eq = semicircle();
    // xi = T_1 / sqrt(2) at beta = 1 has sigma^2 = 1/4.
    let xi = cheb(1).scale(std::f64::consts::FRAC_1_SQRT_2);
    let pred = predict(&[xi], &eq, 1.0, 1.0).unwrap();
    assert!((pred.c[0][0] - 0.25).abs() < 1e-12);
    let (g, z) = (0.0123, 0.0456);
    let bound = stein_bound(&pred, g, z, 1.0, BoundMode::Tv).unwrap();
    assert!((bound - (8.0 * g + 0.886_226_925_452_758 * z)).abs() < 1e-12);
}

#[test]
fn rigidity_on_synthetic_batches() {
    let eq = semicircle();
    let q = eq.quantiles(16);
    let batch = SampleBatch::from_replicates(16, 2.0, 0, vec![q.clone(), q.clone()]).unwrap();
    let rep = rigidity_report(&eq, &batch, 0.1);
    assert_eq!((rep.envelope_violation_rate, rep.outlier_rate), (0.0, 0.0));
    assert_eq!(rep.max_abs_lambda, q[15]);
    let mut bad = q.clone();
    bad[3] = 2.0;
    let batch = SampleBatch::from_replicates(16, 2.0, 0, vec![bad]).unwrap();
    assert_eq!(rigidity_report(&eq, &batch, 0.1).outlier_rate, 1.0);
}

#[test]
fn negative_moment_probe_examples() {
    let eq = semicircle();
    let batch = gbe_batch(32, 2.0, 200, 5);
    let one = ChebSeries::constant(1.0, WORKING_INTERVAL);
    for (eps, prob) in negative_moment_probe(&batch, &one, &[0.1, 0.5, 0.99]) {
        assert_eq!(prob, 0.0, "eps={eps}");
    }
    let zero = ChebSeries::zero(WORKING_INTERVAL);
    for (_, prob) in negative_moment_probe(&batch, &zero, &[1e-9, 1e-3]) {
        assert_eq!(prob, 1.0);
    }
    let t2_prime = cheb(2).derivative();
    let limit = eq.integral(|x| t2_prime.eval(x).powi(2));
    assert!((limit - 4.0).abs() < 1e-12);
    let probe = negative_moment_probe(&gbe_batch(128, 2.0, 2000, 6), &t2_prime, &[0.5 * limit]);
    assert_eq!(probe[0].1, 0.0);
}

#[test]
fn alpha_regularity_of_square() {
    let sq = ChebSeries::new((-1.0, 1.0), vec![0.5, 0.0, 0.5]).unwrap();
    let eps = [1e-4, 1e-3, 1e-2];
    let rep = alpha_regularity(&sq, &eps, (-1.0, 1.0));
    for (e, m) in &rep.measures {
        assert!(
            (m - 2.0 * e.sqrt()).abs() < 1e-3 * e.sqrt() + 4e-5,
            "eps={e} m={m}"
        );
    }
    assert!((rep.slope.unwrap() - 0.5).abs() < 0.01);
    assert!(rep.refinement_change < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn master_identity_for_random_polynomials(
        coeffs in prop::collection::vec(-1.0f64..1.0, 2..=9),
        quartic_potential in any::<bool>(),
        beta in 0.5f64..5.0,
        n in 2usize..200,
        seed in any::<u64>(),
    ) {
        let eq = if quartic_potential { quartic() } else { semicircle() };
        let xi = FunctionSpec::Poly(coeffs).to_series(WORKING_INTERVAL).unwrap();
        prop_assume!(xi.degree() >= 1);
        let invs = inversions(&eq, std::slice::from_ref(&xi));
        let ctx = SteinContext::new(std::slice::from_ref(&xi), &invs, &eq, beta).unwrap();
        let mut rng = common::rng(seed);
        let lambdas = uniform_config(&mut rng, n, &eq);
        let t = ctx.terms(&lambdas).unwrap();
        let tol = 1e-8 * (1.0 + c2_norm(&xi, eq.u_interval()));
        prop_assert!(t.master_residual <= tol, "residual {} tol {}", t.master_residual, tol);
    }
}
