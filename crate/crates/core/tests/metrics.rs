use loggas::clt::Prediction;
use loggas::metrics::{
    density_sup_distance, fit_rate, gaussian_density_derivative, gaussian_quantiles,
    projected_distance, projected_wp, tv_kde, wasserstein_p,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normals(r: usize, m: f64, s: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..r)
        .map(|_| m + s * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn density(x: f64, s: f64) -> f64 {
    (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
}

/// Standard normal CDF by Simpson integration of the density from 0.
fn normal_cdf(x: f64) -> f64 {
    let steps = 2000;
    let h = x / steps as f64;
    let mut s = density(0.0, 1.0) + density(x, 1.0);
    for i in 1..steps {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * density(i as f64 * h, 1.0);
    }
    0.5 + s * h / 3.0
}

/// TV between N(0, 1) and N(0, s^2) with s > 1: the densities cross at
/// +-x0, found by bisection, and TV = 2 (P(|N(0,1)| < x0) - P(|N(0,s^2)| < x0)) / 2.
fn two_gaussian_tv(s: f64) -> f64 {
    let g = |x: f64| density(x, 1.0) - density(x, s);
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x0 = 0.5 * (lo + hi);
    (2.0 * normal_cdf(x0) - 1.0) - (2.0 * normal_cdf(x0 / s) - 1.0)
}

fn prediction(m: Vec<f64>, c: Vec<Vec<f64>>) -> Prediction {
    Prediction {
        sigma: c.clone(),
        m_master: m.clone(),
        m,
        c,
        a_beta_wasserstein: 0.0,
        a_beta_tv: None,
        beta: 2.0,
        p: 1.0,
        gaussian_moment: 0.0,
    }
}

#[test]
fn wasserstein_of_a_point_mass() {
    let xs = vec![0.0; 100_000];
    let w = wasserstein_p(&xs, 0.0, 1.0, 1.0);
    assert!(
        (w - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01,
        "w={w}"
    );
}

#[test]
fn wasserstein_zero_only_on_matched_quantiles() {
    let q = gaussian_quantiles(500, -1.0, 0.5);
    assert_eq!(wasserstein_p(&q, -1.0, 0.5, 2.0), 0.0);
    let mut moved = q.clone();
    moved[250] += 1e-3;
    assert!(wasserstein_p(&moved, -1.0, 0.5, 2.0) > 0.0);
}

#[test]
fn two_gaussian_oracle_agrees_with_closed_form() {
    // Crossing point of N(0,1) and N(0,4): x0^2 = 8 ln 2 / 3.
    let x0 = (8.0 * 2f64.ln() / 3.0).sqrt();
    let erf_form = (2.0 * normal_cdf(x0) - 1.0) - (2.0 * normal_cdf(x0 / 2.0) - 1.0);
    assert!((two_gaussian_tv(2.0) - erf_form).abs() < 1e-10);
    assert!((two_gaussian_tv(2.0) - 0.322_674_568_8).abs() < 1e-8);
}

#[test]
fn tv_kde_self_distance_is_small() {
    let xs = normals(100_000, 0.3, 0.7, 1);
    let tv = tv_kde(&xs, 0.3, 0.7, None).unwrap();
    assert!(tv <= 0.02, "tv={tv}");
}

#[test]
fn tv_kde_of_a_far_sample_is_one() {
    let xs = normals(20_000, 10.0, 1.0, 2);
    let tv = tv_kde(&xs, 0.0, 1.0, None).unwrap();
    assert!(tv >= 0.99, "tv={tv}");
}

#[test]
fn tv_kde_against_wider_gaussian() {
    let xs = normals(100_000, 0.0, 2.0, 3);
    let tv = tv_kde(&xs, 0.0, 1.0, None).unwrap();
    let oracle = two_gaussian_tv(2.0);
    assert!((tv - oracle).abs() < 0.03, "tv={tv} oracle={oracle}");
}

#[test]
fn tv_kde_rejects_bad_sigma() {
    assert!(tv_kde(&[0.0; 200], 0.0, 0.0, None).is_err());
    assert!(tv_kde(&[0.0; 200], 0.0, -1.0, None).is_err());
}

#[test]
fn density_sup_examples() {
    let xs = normals(100_000, 0.0, 1.0, 4);
    let d0 = density_sup_distance(&xs, 0.0, 1.0, 0).unwrap();
    assert!(d0.value <= 0.02 && !d0.degenerate, "{d0:?}");

    let wide = normals(100_000, 0.0, 2.0, 5);
    let measured = density_sup_distance(&wide, 0.0, 1.0, 0).unwrap().value;
    let oracle = (0..=20_000)
        .map(|i| {
            let x = -8.0 + 16.0 * i as f64 / 20_000.0;
            (density(x, 2.0) - density(x, 1.0)).abs()
        })
        .fold(0.0, f64::max);
    assert!(
        (measured - oracle).abs() < 0.03,
        "measured={measured} oracle={oracle}"
    );

    let constant = vec![0.25; 2000];
    let spike = density_sup_distance(&constant, 0.0, 1.0, 1).unwrap();
    assert!(spike.degenerate);
    let max_phi_prime = gaussian_density_derivative(1, 1.0, 0.0, 1.0).abs();
    assert!(spike.value > max_phi_prime);
}

#[test]
fn fit_rate_on_exact_power_laws() {
    let n = [16, 32, 64, 128, 256];
    for (power, c) in [(1.0, 0.7), (0.5, 2.0)] {
        let d: Vec<f64> = n.iter().map(|&k| c / (k as f64).powf(power)).collect();
        let fit = fit_rate(&n, &d, &[0.0; 5]).unwrap();
        assert!((fit.slope + power).abs() < 1e-12);
        assert!((fit.intercept - c.ln()).abs() < 1e-12);
    }
}

#[test]
fn fit_rate_under_noise() {
    let n = [32, 64, 128, 256, 512, 1024];
    let mut inside = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d: Vec<f64> = n
            .iter()
            .map(|&k| 1.5 / k as f64 * (1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let se: Vec<f64> = d.iter().map(|v| 0.05 * v).collect();
        let fit = fit_rate(&n, &d, &se).unwrap();
        if (-1.15..=-0.85).contains(&fit.slope) {
            inside += 1;
        }
    }
    assert!(inside >= 190, "inside={inside}");
}

#[test]
fn projected_distance_of_exact_gaussian_draws() {
    let pred = prediction(vec![0.5, -0.2], vec![vec![0.4, 0.0], vec![0.0, 0.9]]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples: Vec<Vec<f64>> = (0..100_000)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            vec![0.5 + 0.4f64.sqrt() * a, -0.2 + 0.9f64.sqrt() * b]
        })
        .collect();
    assert!(projected_wp(&samples, &pred, 1.0, 16, 3).unwrap() <= 0.02);
}

#[test]
fn projected_distance_of_the_mean_point() {
    let pred = prediction(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 0.25]]);
    let samples = vec![vec![0.0, 0.0]; 50_000];
    // One direction: the univariate distance of a point mass, sqrt(2/pi) sqrt(u^T C u).
    let u = [0.6, 0.8];
    let along = projected_distance(&samples, &pred, &u, 1.0);
    let expected = (2.0 / std::f64::consts::PI).sqrt() * (0.36 + 0.16f64).sqrt();
    assert!((along - expected).abs() < 0.01);
    let axis = projected_distance(&samples, &pred, &[0.0, 1.0], 1.0);
    assert_eq!(axis, wasserstein_p(&vec![0.0; 50_000], 0.0, 0.5, 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn wasserstein_shift_equivariance(
        xs in prop::collection::vec(-5.0f64..5.0, 1..200),
        shift in -3.0f64..3.0,
        sigma in 0.1f64..3.0,
        p in 1.0f64..3.0,
    ) {
        let moved: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let a = wasserstein_p(&xs, 0.2, sigma, p);
        let b = wasserstein_p(&moved, 0.2 + shift, sigma, p);
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
        // Shifting the sample alone moves the distance by at most the shift.
        let c = wasserstein_p(&moved, 0.2, sigma, p);
        prop_assert!((a - c).abs() <= shift.abs() + 1e-9);
    }

    #[test]
    fn tv_kde_stays_in_unit_interval(
        xs in prop::collection::vec(-20.0f64..20.0, 100..300),
        m in -2.0f64..2.0,
        sigma in 0.05f64..5.0,
    ) {
        let tv = tv_kde(&xs, m, sigma, None).unwrap();
        prop_assert!((0.0..=1.0).contains(&tv));
    }
}
