//! Equilibrium measure `mu_V = S mu_sc` of a one-cut potential whose support
//! is normalized to `[-1, 1]`, with support normalization, CDF, quantiles and
//! Euler–Lagrange residuals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{
    self, cheb_fit, grid, u_to_t, ChebSeries, FunctionSpec, Quadrature, QUADRATURE_NODES,
};

/// Interval on which potentials and test functions are represented.
pub const WORKING_INTERVAL: (f64, f64) = (-2.0, 2.0);
pub const DEFAULT_DELTA: f64 = 0.1;
pub const MASS_TOLERANCE: f64 = 1e-8;
pub const EL_TOLERANCE: f64 = 1e-6;
const MIN_S_GRID: usize = 4001;
const EL_GRID: usize = 512;
const NEWTON_MAX_ITERATIONS: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct Potential {
    pub v: ChebSeries,
    pub v1: ChebSeries,
    pub v2: ChebSeries,
    /// Infimum of `V''` over the working interval.
    pub semiconvexity_bound: f64,
}

impl Potential {
    pub fn from_series(v: ChebSeries) -> Self {
        let v = v.truncate();
        let v1 = v.derivative();
        let v2 = v1.derivative();
        let semiconvexity_bound = grid(v.interval(), 2001)
            .iter()
            .map(|&x| v2.eval(x))
            .fold(f64::INFINITY, f64::min);
        Potential {
            v,
            v1,
            v2,
            semiconvexity_bound,
        }
    }

    pub fn from_spec(spec: &FunctionSpec) -> Result<Self> {
        Ok(Self::from_series(spec.to_series(WORKING_INTERVAL)?))
    }

    pub fn parse(spec: &str) -> Result<Self> {
        Self::from_spec(&spec.parse()?)
    }

    pub fn interval(&self) -> (f64, f64) {
        self.v.interval()
    }

    /// Leading monomial coefficient and degree of `V`.
    fn leading_monomial(&self) -> (f64, usize) {
        let d = self.v.degree();
        let (lo, hi) = self.interval();
        let a = self.v.coeffs()[d];
        let lead = if d == 0 {
            a
        } else {
            a * 2f64.powi(d as i32 - 1) * (2.0 / (hi - lo)).powi(d as i32)
        };
        (lead, d)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Equilibrium {
    pub potential: Potential,
    /// Density factor `S` on `[-1, 1]`.
    pub s: ChebSeries,
    pub s1: ChebSeries,
    pub delta: f64,
    pub mass_defect: f64,
    pub min_s: f64,
    pub el_residual_max: f64,
    /// `2 sum b_k T_{k+1}` where `S = sum b_k U_k`; equals `V'` on the support.
    #[serde(skip)]
    hilbert_s: ChebSeries,
    #[serde(skip)]
    mu_v: Quadrature,
}

#[derive(Deserialize)]
struct StoredPotential {
    v: ChebSeries,
}

#[derive(Deserialize)]
struct StoredEquilibrium {
    potential: StoredPotential,
    delta: f64,
}

impl Equilibrium {
    /// `U = (-1 - delta, 1 + delta)`.
    pub fn u_interval(&self) -> (f64, f64) {
        (-1.0 - self.delta, 1.0 + self.delta)
    }

    /// Node/weight rule for `mu_V`, exact on polynomials up to high degree.
    pub fn mu_v(&self) -> &Quadrature {
        &self.mu_v
    }

    pub fn integral(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.mu_v.integrate(f)
    }

    /// `int s d mu_V` by re-expanding `s` on `[-1, 1]` and integrating `s S`
    /// against the semicircle law; exact for polynomial `s`.
    pub fn integrate_series(&self, s: &ChebSeries) -> f64 {
        let restricted = if s.is_reference() {
            s.clone()
        } else {
            s.reinterval((-1.0, 1.0), s.degree())
                .expect("finite series")
        };
        let product = restricted.mul(&self.s).expect("same interval");
        funcspace::integral_semicircle(&product).expect("reference interval")
    }

    /// `int f d mu_V` for a pointwise `f` that may be non-smooth at `breakpoints`,
    /// by adaptive Simpson in the angle `x = cos(theta)` on each smooth piece.
    pub fn integral_pointwise(&self, f: impl Fn(f64) -> f64, breakpoints: &[f64]) -> f64 {
        let mut angles: Vec<f64> = breakpoints
            .iter()
            .filter(|b| b.abs() < 1.0)
            .map(|b| b.acos())
            .collect();
        angles.push(0.0);
        angles.push(std::f64::consts::PI);
        angles.sort_by(f64::total_cmp);
        let integrand = |theta: f64| {
            let x = theta.cos();
            let sin = theta.sin();
            f(x) * self.s.eval(x) * sin * sin
        };
        let total: f64 = angles
            .windows(2)
            .map(|w| funcspace::adaptive_simpson(&integrand, w[0], w[1], 1e-14))
            .sum();
        2.0 * total / std::f64::consts::PI
    }

    /// `int T_k(t(y)) mu_V(dy)` for `k < count` in the reference variable of `interval`.
    pub fn moments(&self, interval: (f64, f64), count: usize) -> Vec<f64> {
        self.mu_v.chebyshev_moments(interval, count)
    }

    /// Lebesgue density of `mu_V` on `(-1, 1)`.
    pub fn density(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            self.s.eval(x) * 2.0 / PI * (1.0 - x * x).sqrt()
        }
    }

    /// `mu_V((-inf, x])` from closed-form antiderivatives of `T_k sqrt(1 - x^2)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0 - self.mass_defect_signed();
        }
        let theta = x.acos();
        let antideriv = |k: usize, phi: f64| {
            let s = |j: i64| {
                if j == 0 {
                    phi
                } else {
                    (j as f64 * phi).sin() / j as f64
                }
            };
            let k = k as i64;
            0.5 * s(k) - 0.25 * s(k + 2) - 0.25 * s(k - 2)
        };
        let total: f64 = self
            .s
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, a)| a * (antideriv(k, PI) - antideriv(k, theta)))
            .sum();
        2.0 / PI * total
    }

    fn mass_defect_signed(&self) -> f64 {
        1.0 - funcspace::integral_semicircle(&self.s).unwrap_or(1.0)
    }

    /// `rho_j` with `cdf(rho_j) = j / n`, `j = 1..n`; `rho_n = 1`.
    pub fn quantiles(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut lower = -1.0;
        for j in 1..n {
            let q = self.quantile_between(j as f64 / n as f64, lower, 1.0);
            out.push(q);
            lower = q;
        }
        if n >= 1 {
            out.push(1.0);
        }
        out
    }

    pub fn quantile(&self, level: f64) -> f64 {
        if level <= 0.0 {
            -1.0
        } else if level >= 1.0 {
            1.0
        } else {
            self.quantile_between(level, -1.0, 1.0)
        }
    }

    /// Safeguarded Newton–bisection on the CDF.
    fn quantile_between(&self, level: f64, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.cdf(x) - level;
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = self.density(x);
            let newton = x - g / slope;
            let next = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-15 || hi - lo <= 1e-15 {
                return next;
            }
            x = next;
        }
        x
    }

    /// `V'(x) - int mu_V(dy) / (x - y)` (principal value) at `x` in `(-1, 1)`.
    pub fn el_residual(&self, x: f64) -> f64 {
        self.potential.v1.eval(x) - self.hilbert_s.eval(x)
    }

    /// Rebuild from the JSON form produced by serializing an `Equilibrium`.
    pub fn from_json(text: &str) -> Result<Self> {
        let stored: StoredEquilibrium = serde_json::from_str(text)?;
        build_equilibrium(&Potential::from_series(stored.potential.v), stored.delta)
    }
}

/// `S = (1/2) sum_{k>=1} a_k U_{k-1}` for `V' = sum a_k T_k` on `[-1, 1]`, using
/// `int (T_k(x) - T_k(y)) / (x - y) rho(dy) = U_{k-1}(x)`.
fn density_factor(v1_ref: &ChebSeries) -> ChebSeries {
    let a = v1_ref.coeffs();
    let u: Vec<f64> = a.iter().skip(1).map(|ak| 0.5 * ak).collect();
    if u.is_empty() {
        return ChebSeries::zero((-1.0, 1.0));
    }
    ChebSeries::new((-1.0, 1.0), u_to_t(&u)).expect("finite coefficients")
}

fn hilbert_of_density(s: &ChebSeries) -> ChebSeries {
    let b = s.u_coeffs();
    let mut c = vec![0.0; b.len() + 1];
    for (k, bk) in b.iter().enumerate() {
        c[k + 1] = 2.0 * bk;
    }
    ChebSeries::new((-1.0, 1.0), c).expect("finite coefficients")
}

pub fn build_equilibrium(p: &Potential, delta: f64) -> Result<Equilibrium> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::rejected(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let (lo, hi) = p.interval();
    // Inversion works on [-1 - 2 delta, 1 + 2 delta]; require it inside the working interval.
    if lo > -1.0 - 2.0 * delta || hi < 1.0 + 2.0 * delta {
        return Err(Error::rejected(format!(
            "potential interval [{lo}, {hi}] does not contain [-1 - 2 delta, 1 + 2 delta] for delta = {delta}"
        )));
    }
    let v1_ref = p.v1.reinterval((-1.0, 1.0), p.v1.degree())?;
    let first_moment = funcspace::integral_arcsine(&v1_ref)?;
    let s = density_factor(&v1_ref).truncate();
    let mass = funcspace::integral_semicircle(&s)?;
    let mass_defect = (mass - 1.0).abs();
    let scale = 1.0 + p.v1.coeff_abs_sum();
    if mass_defect > MASS_TOLERANCE || first_moment.abs() > MASS_TOLERANCE * scale {
        return Err(Error::SupportNotNormalized {
            mass_defect,
            first_moment,
        });
    }
    let min_s = grid((-1.0, 1.0), MIN_S_GRID)
        .iter()
        .map(|&x| s.eval(x))
        .fold(f64::INFINITY, f64::min);
    if min_s <= 0.0 {
        return Err(Error::CriticalOrMultiCut { min_s });
    }
    let hilbert_s = hilbert_of_density(&s);
    let el_residual_max = (0..EL_GRID)
        .map(|i| {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / EL_GRID as f64;
            (p.v1.eval(x) - hilbert_s.eval(x)).abs()
        })
        .fold(0.0, f64::max);
    if el_residual_max > EL_TOLERANCE * scale {
        return Err(Error::EulerLagrange {
            residual: el_residual_max,
        });
    }
    let mu_v = Quadrature::semicircle(QUADRATURE_NODES).reweighted(|x| s.eval(x));
    Ok(Equilibrium {
        potential: p.clone(),
        s1: s.derivative(),
        s,
        delta,
        mass_defect,
        min_s,
        el_residual_max,
        hilbert_s,
        mu_v,
    })
}

/// Affine normalization `V(x) = W(scale * x + center)` putting the support of
/// the equilibrium measure of `W` onto `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Normalization {
    pub scale: f64,
    pub center: f64,
    pub potential: Potential,
    pub iterations: usize,
}

/// Damped Newton iteration on `int V' rho = 0` and `int S d mu_sc = 1`.
pub fn normalize_support(raw: &Potential) -> Result<Normalization> {
    let (lead, degree) = raw.leading_monomial();
    if degree < 2 || degree % 2 == 1 || lead <= 0.0 {
        return Err(Error::rejected(
            "potential must be confining (even degree, positive leading coefficient)",
        ));
    }
    let w1 = &raw.v1;
    let w2 = &raw.v2;
    let rho = Quadrature::arcsine(QUADRATURE_NODES);
    let residual = |a: f64, b: f64| {
        let g1 = rho.integrate(|x| w1.eval(a * x + b));
        let g2 = a * rho.integrate(|x| x * w1.eval(a * x + b)) - 1.0;
        (g1, g2)
    };
    let d = degree as i32;
    let arcsine_moment = binomial(degree, degree / 2) / 2f64.powi(d);
    let mut a = (1.0 / (lead * degree as f64 * arcsine_moment)).powf(1.0 / degree as f64);
    let mut b = 0.0;
    let mut g = residual(a, b);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..NEWTON_MAX_ITERATIONS {
        iterations = it;
        let norm = g.0.hypot(g.1);
        if norm < 1e-14 {
            converged = true;
            break;
        }
        let j11 = rho.integrate(|x| x * w2.eval(a * x + b));
        let j12 = rho.integrate(|x| w2.eval(a * x + b));
        let j21 = rho.integrate(|x| x * w1.eval(a * x + b))
            + a * rho.integrate(|x| x * x * w2.eval(a * x + b));
        let j22 = a * j11;
        let det = j11 * j22 - j12 * j21;
        if !det.is_finite() || det == 0.0 {
            break;
        }
        let da = (j22 * g.0 - j12 * g.1) / det;
        let db = (-j21 * g.0 + j11 * g.1) / det;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let (na, nb) = (a - step * da, b - step * db);
            if na > 0.0 {
                let ng = residual(na, nb);
                if ng.0.hypot(ng.1) < norm {
                    a = na;
                    b = nb;
                    g = ng;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            converged = norm < 1e-10;
            break;
        }
    }
    if !converged {
        return Err(Error::NoOneCutNormalization {
            iterations: iterations + 1,
        });
    }
    let v = cheb_fit(|x| raw.v.eval(a * x + b), raw.v.degree(), WORKING_INTERVAL)?;
    Ok(Normalization {
        scale: a,
        center: b,
        potential: Potential::from_series(v),
        iterations,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
