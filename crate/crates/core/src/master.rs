//! The master operator `Theta_V psi = -V' psi + int (psi(x) - psi(y)) / (x - y) mu_V(dy)`,
//! its inversion, and the empirical divided-difference operator `T_n`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::funcspace::{cheb_fit, grid, u_to_t, ChebSeries};

/// Points checked for the inversion residual on `U`.
pub const RESIDUAL_GRID: usize = 512;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Minimal admissible `|m_V - V'|` outside the support.
pub const EDGE_GUARD: f64 = 1e-6;
const EDGE_POINTS_PER_SIDE: usize = 64;
const MIN_REFIT_DEGREE: usize = 160;
const MAX_DEGREE: usize = 512;
/// Below this distance to the support the off-support formula is replaced by
/// the polynomial continuation, avoiding cancellation in `m_V - V'`.
const EDGE_BLEND: f64 = 1e-6;
/// Coordinates closer than this use the diagonal derivative convention.
pub const DIAGONAL_EPS: f64 = 1e-14;

/// Precomputed `mu_V` moments for series on one interval, used to integrate
/// divided differences exactly.
#[derive(Clone, Debug)]
pub struct DividedDifferenceIntegrator {
    interval: (f64, f64),
    moments: Vec<f64>,
}

impl DividedDifferenceIntegrator {
    pub fn new(eq: &Equilibrium, interval: (f64, f64), degree: usize) -> Self {
        DividedDifferenceIntegrator {
            interval,
            moments: eq.moments(interval, degree.max(1)),
        }
    }

    pub fn for_series(eq: &Equilibrium, s: &ChebSeries) -> Self {
        Self::new(eq, s.interval(), s.degree())
    }

    /// `T_V s(x) = int (s(x) - s(y)) / (x - y) mu_V(dy)`.
    pub fn apply(&self, s: &ChebSeries, x: f64) -> f64 {
        assert_eq!(
            s.interval(),
            self.interval,
            "integrator built for another interval"
        );
        assert!(
            s.degree() <= self.moments.len(),
            "integrator built for a lower degree"
        );
        s.divided_difference_integral(x, &self.moments)
    }
}

/// `T_V s(x)`.
pub fn apply_t_v(eq: &Equilibrium, s: &ChebSeries, x: f64) -> f64 {
    DividedDifferenceIntegrator::for_series(eq, s).apply(s, x)
}

/// `Theta_V psi(x)`.
pub fn apply_theta_v(eq: &Equilibrium, psi: &ChebSeries, x: f64) -> f64 {
    -eq.potential.v1.eval(x) * psi.eval(x) + apply_t_v(eq, psi, x)
}

/// `Theta_V psi` at many points with one moment computation.
pub fn apply_theta_v_many(eq: &Equilibrium, psi: &ChebSeries, xs: &[f64]) -> Vec<f64> {
    let tv = DividedDifferenceIntegrator::for_series(eq, psi);
    xs.iter()
        .map(|&x| -eq.potential.v1.eval(x) * psi.eval(x) + tv.apply(psi, x))
        .collect()
}

/// Solution of `Theta_V psi = xi + c_xi` on `U`, with derivative and primitive.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionData {
    pub psi: ChebSeries,
    pub c_xi: f64,
    pub psi1: ChebSeries,
    /// Primitive of `psi` with `f(0) = 0`.
    pub f: ChebSeries,
    pub xi: ChebSeries,
    /// Maximum of `|Theta_V psi - xi - c_xi|` on the residual grid of `U`.
    pub residual: f64,
}

impl InversionData {
    /// `sup |psi| / sup |xi|` over `U`; a measured stand-in for the operator norm of the inverse.
    pub fn norm_ratio(&self, u: (f64, f64)) -> f64 {
        self.psi.sup_norm_on(u, RESIDUAL_GRID)
            / self.xi.sup_norm_on(u, RESIDUAL_GRID).max(f64::MIN_POSITIVE)
    }
}

/// Interval on which `psi` is represented.
pub fn inversion_interval(eq: &Equilibrium) -> (f64, f64) {
    (-1.0 - 2.0 * eq.delta, 1.0 + 2.0 * eq.delta)
}

/// Stieltjes transform `int mu_sc(dy) / (x - y)` for `|x| > 1`.
fn semicircle_stieltjes(x: f64) -> f64 {
    // 2 (x - sgn(x) sqrt(x^2 - 1)) written without cancellation.
    let r = (x * x - 1.0).sqrt();
    2.0 / (x + x.signum() * r)
}

/// `int g(y) mu_sc(dy) / (x - y)` for `g = sum b_k U_k` and `|x| > 1`, from
/// `int U_k mu_sc(dy) / (x - y) = 2 w^{k+1}` with `w = 1 / (x + sgn(x) sqrt(x^2 - 1))`.
/// Never evaluates `g` off the support, where high-degree roundoff explodes.
fn u_series_stieltjes(b: &[f64], x: f64) -> f64 {
    let w = 0.5 * semicircle_stieltjes(x);
    2.0 * w * b.iter().rev().fold(0.0, |acc, &bk| acc * w + bk)
}

const SEMICIRCLE_MOMENTS: [f64; 3] = [1.0, 0.0, -0.5];

/// `int (g(x) - g(y)) / (x - y) mu_sc(dy)` for `g` on `[-1, 1]`.
fn semicircle_divided_difference(g: &ChebSeries, x: f64) -> f64 {
    g.divided_difference_integral(x, &SEMICIRCLE_MOMENTS)
}

/// Invert the master operator for a test function defined on a domain containing `U`.
pub fn invert_theta(eq: &Equilibrium, xi: &ChebSeries) -> Result<InversionData> {
    let (jl, jh) = inversion_interval(eq);
    let (xl, xh) = xi.interval();
    if xl > jl || xh < jh {
        return Err(Error::rejected(format!(
            "test function interval [{xl}, {xh}] does not contain [{jl}, {jh}]"
        )));
    }
    let support_degree = xi.degree().min(MAX_DEGREE);
    let xi_ref = xi.reinterval((-1.0, 1.0), support_degree)?.truncate();
    let a = xi_ref.coeffs();
    let c_xi = -a[0];
    // On the support Theta_V psi = -H[psi mu_V] and H[U_k mu_sc] = 2 T_{k+1}, so
    // psi S = -(1/2) sum_k a_{k+1} U_k is the bounded solution.
    let g_u: Vec<f64> = a.iter().skip(1).map(|ak| -0.5 * ak).collect();
    let g = if g_u.is_empty() {
        ChebSeries::zero((-1.0, 1.0))
    } else {
        ChebSeries::new((-1.0, 1.0), u_to_t(&g_u))?.truncate()
    };
    let s = &eq.s;
    let v1 = &eq.potential.v1;

    let continuation = |x: f64| g.eval(x) / s.eval(x);
    let stieltjes_v =
        |x: f64| s.eval(x) * semicircle_stieltjes(x) - semicircle_divided_difference(s, x);

    for side in [-1.0, 1.0] {
        for j in 1..=EDGE_POINTS_PER_SIDE {
            let x = side * (1.0 + eq.delta * j as f64 / EDGE_POINTS_PER_SIDE as f64);
            let gap = stieltjes_v(x) - v1.eval(x);
            if gap.abs() < EDGE_GUARD {
                return Err(Error::NearCriticalEdge {
                    x,
                    value: gap.abs(),
                });
            }
        }
    }

    let psi_at = |x: f64| {
        if x.abs() <= 1.0 + EDGE_BLEND {
            return continuation(x);
        }
        let phi = u_series_stieltjes(&g_u, x);
        (xi.eval(x) + c_xi + phi) / (stieltjes_v(x) - v1.eval(x))
    };

    let u = eq.u_interval();
    let check_points = grid(u, RESIDUAL_GRID);
    let xi_sup = check_points
        .iter()
        .map(|&x| xi.eval(x).abs())
        .fold(0.0, f64::max);
    let tolerance = RESIDUAL_TOLERANCE * (1.0 + xi_sup);

    let mut degree = MIN_REFIT_DEGREE.max(support_degree + 32).min(MAX_DEGREE);
    loop {
        let psi = cheb_fit(psi_at, degree, (jl, jh))?.truncate();
        let theta = apply_theta_v_many(eq, &psi, &check_points);
        let residual = check_points
            .iter()
            .zip(&theta)
            .map(|(&x, &t)| (t - xi.eval(x) - c_xi).abs())
            .fold(0.0, f64::max);
        if residual <= tolerance {
            let psi1 = psi.derivative();
            let f = psi.antiderivative();
            return Ok(InversionData {
                psi,
                c_xi,
                psi1,
                f,
                xi: xi.clone(),
                residual,
            });
        }
        if degree >= MAX_DEGREE {
            return Err(Error::InversionResidual {
                residual,
                tolerance,
            });
        }
        degree = (degree * 3 / 2).min(MAX_DEGREE);
    }
}

/// `sum_{i != j} (fp(l_i) - fp(l_j)) / (l_i - l_j)` from precomputed values
/// `fp(l_i)` and derivatives `fpp(l_i)` (used on coincident pairs).
///
/// Every caller that needs this pair sum goes through this function so that
/// identities combining several terms cancel to rounding.
pub fn pair_divided_difference_sum(lambdas: &[f64], values: &[f64], derivs: &[f64]) -> f64 {
    let n = lambdas.len();
    let mut total = 0.0;
    for i in 0..n {
        let (li, vi) = (lambdas[i], values[i]);
        let mut row = 0.0;
        for j in (i + 1)..n {
            let dl = li - lambdas[j];
            row += if dl.abs() < DIAGONAL_EPS {
                0.5 * (derivs[i] + derivs[j])
            } else {
                (vi - values[j]) / dl
            };
        }
        total += row;
    }
    2.0 * total
}

/// `T_n fp(x) = (1/n) sum_i (fp(x) - fp(l_i)) / (x - l_i)`, with `fp'(l_i)` on the diagonal.
pub fn apply_t_n(fp: &ChebSeries, lambdas: &[f64], x: f64) -> f64 {
    assert!(!lambdas.is_empty(), "T_n needs a non-empty configuration");
    let fx = fp.eval(x);
    let mut fpp: Option<ChebSeries> = None;
    let mut total = 0.0;
    for &l in lambdas {
        let dl = x - l;
        total += if dl.abs() < DIAGONAL_EPS {
            fpp.get_or_insert_with(|| fp.derivative()).eval(l)
        } else {
            (fx - fp.eval(l)) / dl
        };
    }
    total / lambdas.len() as f64
}

/// Pieces of the quadratic remainder that other computations reuse.
#[derive(Clone, Copy, Debug)]
pub struct RemainderParts {
    /// `sum_{i != j}` divided differences of `fp`.
    pub pair_sum: f64,
    /// `sum_i fp'(l_i)`.
    pub diag_sum: f64,
    /// `<T_n fp - T_V fp, nu_n - n mu_V>`.
    pub remainder: f64,
}

/// `<T_n fp - T_V fp, nu_n - n mu_V>` together with its pair and diagonal sums.
pub fn quadratic_remainder_parts(
    eq: &Equilibrium,
    fp: &ChebSeries,
    lambdas: &[f64],
) -> RemainderParts {
    let fpp = fp.derivative();
    let tv = DividedDifferenceIntegrator::for_series(eq, fp);
    quadratic_remainder_with(eq, fp, &fpp, &tv, lambdas)
}

pub(crate) fn quadratic_remainder_with(
    eq: &Equilibrium,
    fp: &ChebSeries,
    fpp: &ChebSeries,
    tv: &DividedDifferenceIntegrator,
    lambdas: &[f64],
) -> RemainderParts {
    let n = lambdas.len() as f64;
    let values = fp.eval_many(lambdas);
    let derivs = fpp.eval_many(lambdas);
    let pair_sum = pair_divided_difference_sum(lambdas, &values, &derivs);
    let diag_sum: f64 = derivs.iter().sum();
    let tn_sum = (pair_sum + diag_sum) / n;
    let tv_sum: f64 = lambdas.iter().map(|&l| tv.apply(fp, l)).sum();
    let tv_mean = t_v_mean(eq, fp, tv);
    // n int T_n fp d mu_V = sum_i T_V fp(l_i) by Fubini.
    let remainder = tn_sum - 2.0 * tv_sum + n * tv_mean;
    RemainderParts {
        pair_sum,
        diag_sum,
        remainder,
    }
}

/// `int T_V fp d mu_V`.
fn t_v_mean(eq: &Equilibrium, fp: &ChebSeries, tv: &DividedDifferenceIntegrator) -> f64 {
    eq.integral(|x| tv.apply(fp, x))
}

/// `<T_n fp - T_V fp, nu_n - n mu_V>`.
pub fn quadratic_remainder(eq: &Equilibrium, fp: &ChebSeries, lambdas: &[f64]) -> f64 {
    quadratic_remainder_parts(eq, fp, lambdas).remainder
}
