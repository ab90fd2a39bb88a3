//! Empirical distances between a sample of linear statistics and a Gaussian:
//! quantile-coupled Wasserstein, kernel-density total variation and density
//! derivatives, sliced multivariate Wasserstein, and power-law rate fits.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::clt::Prediction;
use crate::error::{Error, Result};

/// Evaluation points of the density estimators on `[m - 8 sigma, m + 8 sigma]`.
pub const KDE_GRID: usize = 4096;
/// Kernel support in bandwidths; beyond it the Gaussian kernel is below 1e-14.
const KERNEL_CUTOFF: f64 = 8.0;
const DEGENERATE_VARIANCE: f64 = 1e-12;
pub const BOOTSTRAP_RESAMPLES: usize = 20;
const MAX_DERIVATIVE: usize = 3;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn phi(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Probabilists' Hermite polynomial `He_r`.
fn hermite(r: usize, u: f64) -> f64 {
    match r {
        0 => 1.0,
        1 => u,
        2 => u * u - 1.0,
        3 => u * u * u - 3.0 * u,
        _ => unreachable!("derivative order checked by callers"),
    }
}

/// `d^r/du^r phi(u) = (-1)^r He_r(u) phi(u)`.
fn phi_derivative(r: usize, u: f64) -> f64 {
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    sign * hermite(r, u) * phi(u)
}

/// `d^r/dx^r` of the `N(m, sigma^2)` density.
pub fn gaussian_density_derivative(r: usize, x: f64, m: f64, sigma: f64) -> f64 {
    phi_derivative(r, (x - m) / sigma) / sigma.powi(r as i32 + 1)
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Gaussian quantiles `m + sigma Phi^{-1}((i - 1/2)/R)`.
pub fn gaussian_quantiles(r: usize, m: f64, sigma: f64) -> Vec<f64> {
    let normal = std_normal();
    (0..r)
        .map(|i| m + sigma * normal.inverse_cdf((i as f64 + 0.5) / r as f64))
        .collect()
}

fn wasserstein_sorted(sorted_xs: &[f64], quantiles: &[f64], p: f64) -> f64 {
    let r = sorted_xs.len() as f64;
    let sum: f64 = sorted_xs
        .iter()
        .zip(quantiles)
        .map(|(x, q)| (x - q).abs().powf(p))
        .sum();
    (sum / r).powf(1.0 / p)
}

/// `W_p` between the empirical law of `xs` and `N(m, sigma^2)` by the
/// order-statistics coupling at levels `(i - 1/2)/R`.
pub fn wasserstein_p(xs: &[f64], m: f64, sigma: f64, p: f64) -> f64 {
    assert!(!xs.is_empty(), "wasserstein_p needs a nonempty sample");
    let q = gaussian_quantiles(xs.len(), m, sigma);
    wasserstein_sorted(&sorted(xs), &q, p)
}

/// Silverman's rule `1.06 sigma_hat R^{-1/5}`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let (_, var) = mean_and_variance(xs);
    1.06 * var.sqrt() * (xs.len() as f64).powf(-0.2)
}

/// Bandwidth for the `r`-th derivative: Silverman times `R^{1/5 - 1/(5+2r)}`.
pub fn derivative_bandwidth(xs: &[f64], r: usize) -> f64 {
    let n = xs.len() as f64;
    silverman_bandwidth(xs) * n.powf(0.2 - 1.0 / (5.0 + 2.0 * r as f64))
}

/// The `r`-th derivative of a Gaussian-kernel density estimate, evaluated on a
/// uniform grid. Samples are linearly binned on the grid spacing and the
/// binned counts convolved with the kernel; when the kernel spans too many
/// bins the sum is taken directly over samples instead.
fn kde_on_grid(
    xs: &[f64],
    h: f64,
    r: usize,
    grid_lo: f64,
    spacing: f64,
    points: usize,
) -> Vec<f64> {
    let n = xs.len() as f64;
    let norm = 1.0 / (n * h.powi(r as i32 + 1));
    let reach = KERNEL_CUTOFF * h;
    let half = (reach / spacing).ceil() as usize;
    let binned_cost = (points + 2 * half) as f64 * (2 * half + 1) as f64;
    let direct_cost = xs.len() as f64 * points as f64;
    let mut out = vec![0.0; points];
    if binned_cost <= direct_cost {
        let lo = grid_lo - half as f64 * spacing;
        let total = points + 2 * half;
        let mut counts = vec![0.0; total];
        for &x in xs {
            let t = (x - lo) / spacing;
            if !(t >= 0.0 && t < (total - 1) as f64) {
                continue;
            }
            let k = t.floor() as usize;
            let frac = t - k as f64;
            counts[k] += 1.0 - frac;
            counts[k + 1] += frac;
        }
        let kernel: Vec<f64> = (0..=2 * half)
            .map(|j| phi_derivative(r, (j as f64 - half as f64) * spacing / h))
            .collect();
        for (i, o) in out.iter_mut().enumerate() {
            // Grid point i sits at extended index i + half; sample bin b contributes
            // K((x_i - x_b)/h), i.e. kernel offset (i + half) - b.
            let mut s = 0.0;
            for (j, kv) in kernel.iter().enumerate() {
                let b = i + 2 * half - j;
                s += counts[b] * kv;
            }
            *o = s * norm;
        }
    } else {
        for &x in xs {
            let first = ((x - reach - grid_lo) / spacing).ceil().max(0.0) as usize;
            let last = ((x + reach - grid_lo) / spacing)
                .floor()
                .min((points - 1) as f64);
            if last < 0.0 {
                continue;
            }
            for (i, o) in out
                .iter_mut()
                .enumerate()
                .take(last as usize + 1)
                .skip(first)
            {
                *o += phi_derivative(r, (grid_lo + i as f64 * spacing - x) / h);
            }
        }
        out.iter_mut().for_each(|o| *o *= norm);
    }
    out
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::rejected(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(())
}

/// Bandwidth actually used: the requested one, floored at one grid spacing so
/// constant samples still produce a finite estimate.
fn effective_bandwidth(h: f64, spacing: f64) -> f64 {
    if h.is_finite() && h > spacing {
        h
    } else {
        spacing
    }
}

/// `(1/2) int |f_h - phi_{m, sigma^2}|` with a Gaussian-kernel density estimate.
/// The integral runs over `[m - 8 sigma, m + 8 sigma]`; estimate mass that
/// falls outside the window is added exactly since the target has none there.
pub fn tv_kde(xs: &[f64], m: f64, sigma: f64, bandwidth: Option<f64>) -> Result<f64> {
    check_sigma(sigma)?;
    if xs.is_empty() {
        return Err(Error::rejected("tv_kde needs a nonempty sample"));
    }
    let (a, b) = (m - 8.0 * sigma, m + 8.0 * sigma);
    let spacing = (b - a) / (KDE_GRID - 1) as f64;
    let h = effective_bandwidth(
        bandwidth.unwrap_or_else(|| silverman_bandwidth(xs)),
        spacing,
    );
    let f_hat = kde_on_grid(xs, h, 0, a, spacing, KDE_GRID);
    let diff: Vec<f64> = f_hat
        .iter()
        .enumerate()
        .map(|(i, f)| (f - gaussian_density_derivative(0, a + i as f64 * spacing, m, sigma)).abs())
        .collect();
    let inside = trapezoid(&diff, spacing);
    let normal = std_normal();
    let outside_mass: f64 = xs
        .iter()
        .map(|&x| normal.cdf((a - x) / h) + normal.cdf((x - b) / h))
        .sum::<f64>()
        / xs.len() as f64;
    Ok((0.5 * (inside + outside_mass)).clamp(0.0, 1.0))
}

fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    spacing * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySup {
    pub value: f64,
    pub bandwidth: f64,
    /// Set when the sample variance is below 1e-12 and the estimate is a spike.
    pub degenerate: bool,
}

/// `sup_x |d^r/dx^r (f_h - phi_{m, sigma^2})|` over the density grid.
pub fn density_sup_distance(xs: &[f64], m: f64, sigma: f64, r: usize) -> Result<DensitySup> {
    check_sigma(sigma)?;
    if r > MAX_DERIVATIVE {
        return Err(Error::rejected(format!(
            "derivative order {r} above {MAX_DERIVATIVE}"
        )));
    }
    if xs.is_empty() {
        return Err(Error::rejected(
            "density_sup_distance needs a nonempty sample",
        ));
    }
    let (_, var) = mean_and_variance(xs);
    let (a, b) = (m - 8.0 * sigma, m + 8.0 * sigma);
    let spacing = (b - a) / (KDE_GRID - 1) as f64;
    let h = effective_bandwidth(derivative_bandwidth(xs, r), spacing);
    let f_hat = kde_on_grid(xs, h, r, a, spacing, KDE_GRID);
    let value = f_hat
        .iter()
        .enumerate()
        .map(|(i, f)| (f - gaussian_density_derivative(r, a + i as f64 * spacing, m, sigma)).abs())
        .fold(0.0, f64::max);
    Ok(DensitySup {
        value,
        bandwidth: h,
        degenerate: var < DEGENERATE_VARIANCE,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Weighted least squares of `log distance` on `log n`. Weights are
/// `(d / se)^2`, the inverse variance of `log d` by the delta method; if any
/// standard error is zero or missing the fit is unweighted and the slope
/// error comes from the residuals.
pub fn fit_rate(n_grid: &[usize], distances: &[f64], stderrs: &[f64]) -> Result<RateFit> {
    let k = n_grid.len();
    if k < 3 || distances.len() != k || stderrs.len() != k {
        return Err(Error::rejected(
            "fit_rate needs at least 3 points of matching lengths",
        ));
    }
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::rejected(format!(
            "fit_rate needs positive distances, got {d}"
        )));
    }
    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let weighted = stderrs.iter().all(|s| *s > 0.0 && s.is_finite());
    let ws: Vec<f64> = if weighted {
        distances
            .iter()
            .zip(stderrs)
            .map(|(d, s)| (d / s).powi(2))
            .collect()
    } else {
        vec![1.0; k]
    };
    let sw: f64 = ws.iter().sum();
    let mx = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = ws
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(w, (x, y))| w * (x - mx) * (y - my))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::rejected("fit_rate needs at least two distinct n"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (k - 2) as f64 / sxx).sqrt()
    };
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Sliced lower-bound surrogate for multivariate `W_p`: the mean over random
/// unit directions `u` of the 1-d distance between `u . X` and `N(u . m, u^T C u)`.
pub fn projected_wp(
    samples: &[Vec<f64>],
    pred: &Prediction,
    p: f64,
    n_projections: usize,
    seed: u64,
) -> Result<f64> {
    let d = pred.dim();
    if samples.is_empty() || samples.iter().any(|s| s.len() != d) {
        return Err(Error::rejected(format!(
            "samples must be nonempty {d}-vectors"
        )));
    }
    if n_projections == 0 {
        return Err(Error::rejected("at least one projection required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..n_projections {
        let u = random_direction(&mut rng, d);
        total += projected_distance(samples, pred, &u, p);
    }
    Ok(total / n_projections as f64)
}

/// Uniform direction on the unit sphere in `d` dimensions.
pub fn random_direction(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// 1-d distance along a fixed direction.
pub fn projected_distance(samples: &[Vec<f64>], pred: &Prediction, u: &[f64], p: f64) -> f64 {
    let proj: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().zip(u).map(|(a, b)| a * b).sum())
        .collect();
    let mean: f64 = pred.m.iter().zip(u).map(|(a, b)| a * b).sum();
    let mut var = 0.0;
    for i in 0..u.len() {
        for j in 0..u.len() {
            var += u[i] * pred.c[i][j] * u[j];
        }
    }
    wasserstein_p(&proj, mean, var.sqrt(), p)
}

/// One-sample Kolmogorov–Smirnov test against `N(m, sigma^2)`; returns the
/// statistic and the asymptotic p-value with Stephens' small-sample correction.
pub fn ks_normality(xs: &[f64], m: f64, sigma: f64) -> (f64, f64) {
    let normal = std_normal();
    let r = xs.len() as f64;
    let d = sorted(xs)
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf((x - m) / sigma);
            (f - i as f64 / r).max((i as f64 + 1.0) / r - f)
        })
        .fold(0.0, f64::max);
    let lambda = (r.sqrt() + 0.12 + 0.11 / r.sqrt()) * d;
    (d, kolmogorov_survival(lambda))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// A distance between a 1-d sample and a Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistanceKind {
    W1,
    Wp(f64),
    Tv,
    DensitySup(usize),
}

impl DistanceKind {
    pub fn compute(&self, xs: &[f64], m: f64, sigma: f64) -> Result<f64> {
        match *self {
            DistanceKind::W1 => Ok(wasserstein_p(xs, m, sigma, 1.0)),
            DistanceKind::Wp(p) => Ok(wasserstein_p(xs, m, sigma, p)),
            DistanceKind::Tv => tv_kde(xs, m, sigma, None),
            DistanceKind::DensitySup(r) => density_sup_distance(xs, m, sigma, r).map(|d| d.value),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceKind::W1 => write!(f, "w1"),
            DistanceKind::Wp(p) => write!(f, "wp:{p}"),
            DistanceKind::Tv => write!(f, "tv"),
            DistanceKind::DensitySup(r) => write!(f, "density_sup:{r}"),
        }
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "w1" {
            return Ok(DistanceKind::W1);
        }
        if s == "tv" {
            return Ok(DistanceKind::Tv);
        }
        if let Some(p) = s.strip_prefix("wp:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::rejected(format!("bad exponent in {s:?}")))?;
            if !(p >= 1.0 && p.is_finite()) {
                return Err(Error::rejected(format!(
                    "wasserstein exponent must be >= 1 in {s:?}"
                )));
            }
            return Ok(DistanceKind::Wp(p));
        }
        if let Some(r) = s.strip_prefix("density_sup:") {
            let r: usize = r
                .parse()
                .map_err(|_| Error::rejected(format!("bad order in {s:?}")))?;
            if r > MAX_DERIVATIVE {
                return Err(Error::rejected(format!(
                    "derivative order above {MAX_DERIVATIVE} in {s:?}"
                )));
            }
            return Ok(DistanceKind::DensitySup(r));
        }
        Err(Error::rejected(format!(
            "unknown metric {s:?}; expected w1, wp:P, tv or density_sup:R"
        )))
    }
}

impl Serialize for DistanceKind {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DistanceKind {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A distance with its bootstrap standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub stderr: f64,
}

/// Distance and its standard error over `BOOTSTRAP_RESAMPLES` resamples.
pub fn measure_distance(
    kind: DistanceKind,
    xs: &[f64],
    m: f64,
    sigma: f64,
    seed: u64,
) -> Result<Measured> {
    let value = kind.compute(xs, m, sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = xs.len();
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = vec![0.0; r];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for v in resample.iter_mut() {
            *v = xs[rng.gen_range(0..r)];
        }
        boot.push(kind.compute(&resample, m, sigma)?);
    }
    let (_, var) = mean_and_variance(&boot);
    Ok(Measured {
        value,
        stderr: var.sqrt(),
    })
}

/// The distance measured on `R` exact draws from `N(m, sigma^2)`: the
/// estimator's bias floor at this sample size.
pub fn bias_floor(
    kind: DistanceKind,
    reps: usize,
    m: f64,
    sigma: f64,
    seed: u64,
) -> Result<Measured> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..reps)
        .map(|_| m + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    measure_distance(kind, &xs, m, sigma, seed.wrapping_add(1))
}

/// Distances along an n-grid with a fitted power law.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceReport {
    pub kind: DistanceKind,
    pub n_grid: Vec<usize>,
    pub distance: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Absent with fewer than three grid points.
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

impl DistanceReport {
    pub fn new(
        kind: DistanceKind,
        n_grid: Vec<usize>,
        distance: Vec<f64>,
        stderr: Vec<f64>,
    ) -> Result<Self> {
        let (fitted_slope, slope_stderr) = if n_grid.len() >= 3 {
            let fit = fit_rate(&n_grid, &distance, &stderr)?;
            (Some(fit.slope), Some(fit.slope_stderr))
        } else {
            (None, None)
        };
        Ok(DistanceReport {
            kind,
            n_grid,
            distance,
            stderr,
            fitted_slope,
            slope_stderr,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_quantiles_have_zero_distance() {
        let q = gaussian_quantiles(1000, 0.3, 2.0);
        assert_eq!(wasserstein_p(&q, 0.3, 2.0, 1.0), 0.0);
        assert_eq!(wasserstein_p(&q, 0.3, 2.0, 2.5), 0.0);
    }

    #[test]
    fn shifted_sample_equivariance() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 10.0).collect();
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.25).collect();
        let a = wasserstein_p(&xs, 1.0, 0.7, 1.5);
        let b = wasserstein_p(&shifted, 1.25, 0.7, 1.5);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_survival_values() {
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.1), 1.0);
    }

    #[test]
    fn distance_kind_round_trip() {
        for s in ["w1", "wp:2", "tv", "density_sup:1"] {
            assert_eq!(s.parse::<DistanceKind>().unwrap().to_string(), s);
        }
        assert!("density_sup:4".parse::<DistanceKind>().is_err());
        assert!("wp:0.5".parse::<DistanceKind>().is_err());
    }

    #[test]
    fn binned_and_direct_kde_agree() {
        let xs: Vec<f64> = (0..400)
            .map(|i| ((i as f64) * 0.618).fract() * 2.0 - 1.0)
            .collect();
        let spacing = 4.0 / 1023.0;
        for r in 0..=2 {
            let binned = kde_on_grid(&xs, 0.2, r, -2.0, spacing, 1024);
            let direct: Vec<f64> = (0..1024)
                .map(|i| {
                    let x = -2.0 + i as f64 * spacing;
                    xs.iter()
                        .map(|&s| phi_derivative(r, (x - s) / 0.2))
                        .sum::<f64>()
                        / (400.0 * 0.2f64.powi(r as i32 + 1))
                })
                .collect();
            let scale = direct.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = binned
                .iter()
                .zip(&direct)
                .fold(0.0f64, |a, (b, d)| a.max((b - d).abs()));
            assert!(err < 1e-3 * scale, "r={r} err={err}");
        }
    }

    #[test]
    fn fit_rate_rejects_nonpositive() {
        assert!(fit_rate(&[1, 2, 3], &[1.0, 0.0, 1.0], &[0.1; 3]).is_err());
        assert!(fit_rate(&[1, 2], &[1.0, 1.0], &[0.1; 2]).is_err());
    }
}
