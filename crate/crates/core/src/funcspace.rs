//! Chebyshev-T series on a finite interval: fitting, Clenshaw evaluation,
//! calculus, integrals against the arcsine and semicircle laws, and
//! convolution with a compactly supported bump.
//!
//! A series stores coefficients `a_k` of `sum a_k T_k(t)` where
//! `t = (2x - lo - hi) / (hi - lo)` maps the interval onto `[-1, 1]`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative drop tolerance used by [`ChebSeries::truncate`].
pub const DROP_TOLERANCE: f64 = 1e-13;
/// Default degree for potentials and test functions.
pub const DEFAULT_FIT_DEGREE: usize = 64;
/// Default node count for quadrature-grade work.
pub const QUADRATURE_NODES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries", into = "RawSeries")]
pub struct ChebSeries {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSeries {
    interval: [f64; 2],
    coeffs: Vec<f64>,
}

impl TryFrom<RawSeries> for ChebSeries {
    type Error = Error;

    fn try_from(raw: RawSeries) -> Result<Self> {
        ChebSeries::new((raw.interval[0], raw.interval[1]), raw.coeffs)
    }
}

impl From<ChebSeries> for RawSeries {
    fn from(s: ChebSeries) -> Self {
        RawSeries {
            interval: [s.lo, s.hi],
            coeffs: s.coeffs,
        }
    }
}

impl ChebSeries {
    pub fn new(interval: (f64, f64), coeffs: Vec<f64>) -> Result<Self> {
        let (lo, hi) = interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::rejected(format!("invalid interval [{lo}, {hi}]")));
        }
        if coeffs.is_empty() {
            return Err(Error::rejected("empty coefficient sequence"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::rejected("non-finite Chebyshev coefficient"));
        }
        Ok(ChebSeries { lo, hi, coeffs })
    }

    /// Internal constructor for coefficient vectors produced by our own algebra.
    fn raw(lo: f64, hi: f64, mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        ChebSeries { lo, hi, coeffs }
    }

    pub fn constant(c: f64, interval: (f64, f64)) -> Self {
        Self::raw(interval.0, interval.1, vec![c])
    }

    pub fn zero(interval: (f64, f64)) -> Self {
        Self::constant(0.0, interval)
    }

    /// The single basis polynomial `T_k` of the reference variable.
    pub fn basis(k: usize, interval: (f64, f64)) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::raw(interval.0, interval.1, c)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff_abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn is_reference(&self) -> bool {
        self.lo == -1.0 && self.hi == 1.0
    }

    #[inline]
    pub fn to_reference(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    #[inline]
    pub fn from_reference(&self, t: f64) -> f64 {
        0.5 * (self.hi - self.lo) * t + 0.5 * (self.hi + self.lo)
    }

    /// Clenshaw evaluation; points outside the interval extend the polynomial.
    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, self.to_reference(x))
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn derivative(&self) -> ChebSeries {
        let d = self.degree();
        if d == 0 {
            return Self::zero(self.interval());
        }
        let a = &self.coeffs;
        let mut c = vec![0.0; d + 2];
        for k in (1..=d).rev() {
            c[k - 1] = c[k + 1] + 2.0 * k as f64 * a[k];
        }
        c[0] *= 0.5;
        c.truncate(d);
        let scale = 2.0 / (self.hi - self.lo);
        for v in &mut c {
            *v *= scale;
        }
        Self::raw(self.lo, self.hi, c)
    }

    pub fn nth_derivative(&self, order: usize) -> ChebSeries {
        (0..order).fold(self.clone(), |s, _| s.derivative())
    }

    /// Antiderivative vanishing at `anchor`.
    pub fn antiderivative_at(&self, anchor: f64) -> ChebSeries {
        let a = &self.coeffs;
        let d = self.degree();
        let at = |k: usize| if k <= d { a[k] } else { 0.0 };
        let mut b = vec![0.0; d + 2];
        b[1] = at(0) - 0.5 * at(2);
        for k in 2..=d + 1 {
            b[k] = (at(k - 1) - at(k + 1)) / (2.0 * k as f64);
        }
        let scale = 0.5 * (self.hi - self.lo);
        for v in &mut b {
            *v *= scale;
        }
        let mut out = Self::raw(self.lo, self.hi, b);
        let shift = out.eval(anchor);
        out.coeffs[0] -= shift;
        out
    }

    /// Antiderivative normalized by `f(0) = 0`.
    pub fn antiderivative(&self) -> ChebSeries {
        self.antiderivative_at(0.0)
    }

    /// Drop trailing coefficients whose magnitudes sum below the drop tolerance.
    pub fn truncate(&self) -> ChebSeries {
        let tol = DROP_TOLERANCE * self.coeff_abs_sum();
        let mut tail = 0.0;
        let mut keep = self.coeffs.len();
        while keep > 1 {
            let next = tail + self.coeffs[keep - 1].abs();
            if next > tol {
                break;
            }
            tail = next;
            keep -= 1;
        }
        Self::raw(self.lo, self.hi, self.coeffs[..keep].to_vec())
    }

    pub fn scale(&self, factor: f64) -> ChebSeries {
        Self::raw(
            self.lo,
            self.hi,
            self.coeffs.iter().map(|c| c * factor).collect(),
        )
    }

    pub fn add_constant(&self, c: f64) -> ChebSeries {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// `self + factor * other`; both series must share the interval.
    pub fn axpy(&self, factor: f64, other: &ChebSeries) -> Result<ChebSeries> {
        self.check_same_interval(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![0.0; n];
        for (k, v) in self.coeffs.iter().enumerate() {
            c[k] += v;
        }
        for (k, v) in other.coeffs.iter().enumerate() {
            c[k] += factor * v;
        }
        Ok(Self::raw(self.lo, self.hi, c))
    }

    pub fn add(&self, other: &ChebSeries) -> Result<ChebSeries> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &ChebSeries) -> Result<ChebSeries> {
        self.axpy(-1.0, other)
    }

    /// Exact product via `T_j T_k = (T_{j+k} + T_{|j-k|}) / 2`.
    pub fn mul(&self, other: &ChebSeries) -> Result<ChebSeries> {
        self.check_same_interval(other)?;
        let (a, b) = (&self.coeffs, &other.coeffs);
        let mut c = vec![0.0; a.len() + b.len() - 1];
        for (j, &aj) in a.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            for (k, &bk) in b.iter().enumerate() {
                let p = 0.5 * aj * bk;
                c[j + k] += p;
                c[j.abs_diff(k)] += p;
            }
        }
        Ok(Self::raw(self.lo, self.hi, c))
    }

    fn check_same_interval(&self, other: &ChebSeries) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi {
            return Err(Error::rejected(format!(
                "interval mismatch: [{}, {}] vs [{}, {}]",
                self.lo, self.hi, other.lo, other.hi
            )));
        }
        Ok(())
    }

    /// Re-expand on another interval at the given degree. Exact when the
    /// degree is at least the current one, since the series is a polynomial.
    pub fn reinterval(&self, interval: (f64, f64), degree: usize) -> Result<ChebSeries> {
        cheb_fit(|x| self.eval(x), degree, interval)
    }

    /// Coefficients `c_k`, in the reference variable of this series, of the
    /// divided difference `y -> (p(y) - p(x)) / (y - x)`, including the
    /// chain-rule factor. The diagonal value is `p'(x)`.
    pub fn divided_difference_coeffs(&self, x: f64) -> Vec<f64> {
        let a = &self.coeffs;
        let d = self.degree();
        if d == 0 {
            return vec![0.0];
        }
        let t = self.to_reference(x);
        // b[k] for k = d..=1 from the Clenshaw recurrence.
        let mut b = vec![0.0; d + 3];
        for k in (1..=d).rev() {
            b[k] = a[k] + 2.0 * t * b[k + 1] - b[k + 2];
        }
        let scale = 2.0 / (self.hi - self.lo);
        let mut c = Vec::with_capacity(d);
        c.push(b[1] * scale);
        for k in 1..d {
            c.push(2.0 * b[k + 1] * scale);
        }
        c
    }

    /// `sum_k c_k m_k` where `m_k` are the moments of a measure against
    /// `T_k` in this series' reference variable.
    pub fn divided_difference_integral(&self, x: f64, moments: &[f64]) -> f64 {
        let c = self.divided_difference_coeffs(x);
        c.iter().zip(moments).map(|(c, m)| c * m).sum()
    }

    pub fn sup_norm_on(&self, interval: (f64, f64), points: usize) -> f64 {
        grid(interval, points)
            .iter()
            .map(|&x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    fn require_reference(&self, what: &str) -> Result<()> {
        if !self.is_reference() {
            return Err(Error::rejected(format!(
                "{what} requires interval [-1, 1], got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Coefficients in the Chebyshev-U basis of the reference variable.
    pub fn u_coeffs(&self) -> Vec<f64> {
        t_to_u(&self.coeffs)
    }
}

#[inline]
fn clenshaw(a: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ak in a.iter().skip(1).rev() {
        let b0 = ak + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    a[0] + t * b1 - b2
}

/// Evaluate `sum a_k T_k(t)` at a reference point.
pub fn clenshaw_t(a: &[f64], t: f64) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        clenshaw(a, t)
    }
}

/// Evaluate `sum b_k U_k(t)`.
pub fn clenshaw_u(b: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &bk in b.iter().rev() {
        let b0 = bk + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// Convert T-coefficients to U-coefficients of the same polynomial.
pub fn t_to_u(a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; a.len()];
    for (k, &ak) in a.iter().enumerate() {
        match k {
            0 => b[0] += ak,
            _ => {
                b[k] += 0.5 * ak;
                if k >= 2 {
                    b[k - 2] -= 0.5 * ak;
                }
            }
        }
    }
    b
}

/// Convert U-coefficients to T-coefficients of the same polynomial.
pub fn u_to_t(b: &[f64]) -> Vec<f64> {
    // Running sums over each parity class: U_k = 2 sum_{j = k, k-2, ..} T_j, T_0 halved.
    let n = b.len();
    let mut a = vec![0.0; n.max(1)];
    let mut tail = [0.0, 0.0];
    for j in (0..n).rev() {
        tail[j % 2] += b[j];
        a[j] = 2.0 * tail[j % 2];
    }
    if n > 0 {
        a[0] *= 0.5;
    }
    a
}

/// Interpolant of degree `degree` at the Chebyshev–Gauss nodes.
pub fn cheb_fit(f: impl Fn(f64) -> f64, degree: usize, interval: (f64, f64)) -> Result<ChebSeries> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::rejected(format!("invalid interval [{lo}, {hi}]")));
    }
    let n = degree + 1;
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let theta = PI * (j as f64 + 0.5) / n as f64;
        let x = 0.5 * (hi - lo) * theta.cos() + 0.5 * (hi + lo);
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::rejected(format!(
                "non-finite function value at x = {x}"
            )));
        }
        values.push(v);
    }
    let mut coeffs = vec![0.0; n];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            acc += v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
        }
        *ck = 2.0 * acc / n as f64;
    }
    coeffs[0] *= 0.5;
    Ok(ChebSeries::raw(lo, hi, coeffs))
}

/// `int s d rho` for the arcsine law `rho(dx) = dx / (pi sqrt(1 - x^2))`.
pub fn integral_arcsine(s: &ChebSeries) -> Result<f64> {
    s.require_reference("integral_arcsine")?;
    Ok(s.coeffs[0])
}

/// `int s d mu_sc` for the semicircle law on `[-1, 1]`.
pub fn integral_semicircle(s: &ChebSeries) -> Result<f64> {
    s.require_reference("integral_semicircle")?;
    let a2 = s.coeffs.get(2).copied().unwrap_or(0.0);
    Ok(s.coeffs[0] - 0.5 * a2)
}

/// Nodes and weights of a quadrature rule for a probability measure.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Gauss–Chebyshev rule of the first kind: exact for the arcsine law on
    /// polynomials of degree < 2n.
    pub fn arcsine(n: usize) -> Self {
        let nodes = (0..n)
            .map(|j| (PI * (j as f64 + 0.5) / n as f64).cos())
            .collect();
        Quadrature {
            nodes,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Gauss–Chebyshev rule of the second kind for the semicircle law.
    pub fn semicircle(n: usize) -> Self {
        let m = (n + 1) as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for j in 1..=n {
            let theta = PI * j as f64 / m;
            nodes.push(theta.cos());
            weights.push(2.0 / m * theta.sin().powi(2));
        }
        Quadrature { nodes, weights }
    }

    /// Reweight by a density factor evaluated at the nodes.
    pub fn reweighted(&self, density: impl Fn(f64) -> f64) -> Self {
        let weights = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * density(x))
            .collect();
        Quadrature {
            nodes: self.nodes.clone(),
            weights,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Moments `int T_k(t(y)) dmu(y)`, `k < count`, where `t` is the
    /// reference map of `interval`.
    pub fn chebyshev_moments(&self, interval: (f64, f64), count: usize) -> Vec<f64> {
        let (lo, hi) = interval;
        let mut m = vec![0.0; count];
        for (&y, &w) in self.nodes.iter().zip(&self.weights) {
            let t = (2.0 * y - lo - hi) / (hi - lo);
            let (mut t0, mut t1) = (1.0, t);
            for mk in m.iter_mut() {
                *mk += w * t0;
                let t2 = 2.0 * t * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
        }
        m
    }
}

/// Uniform grid of `points` values spanning the closed interval.
pub fn grid(interval: (f64, f64), points: usize) -> Vec<f64> {
    let (lo, hi) = interval;
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

// Eight-point Gauss–Legendre rule on [-1, 1].
const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const MOLLIFIER_PANELS: usize = 64;

fn bump(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

/// Composite Gauss–Legendre nodes and normalized kernel weights on [-1, 1].
fn mollifier_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let h = 2.0 / MOLLIFIER_PANELS as f64;
        let mut ys = Vec::with_capacity(8 * MOLLIFIER_PANELS);
        let mut ws = Vec::with_capacity(8 * MOLLIFIER_PANELS);
        for p in 0..MOLLIFIER_PANELS {
            let mid = -1.0 + h * (p as f64 + 0.5);
            for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
                for sign in [-1.0, 1.0] {
                    let y = mid + sign * 0.5 * h * node;
                    ys.push(y);
                    ws.push(0.5 * h * weight * bump(y));
                }
            }
        }
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        (ys, ws)
    })
}

pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Normalizing constant of the bump `exp(-1/(1-y^2))` on (-1, 1).
pub fn mollifier_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| 2.0 * adaptive_simpson(&bump, 0.0, 1.0, 1e-14))
}

/// `int |y|^gamma eta(y) dy` for the normalized bump `eta`.
pub fn mollifier_moment(gamma: f64) -> f64 {
    let f = move |y: f64| y.abs().powf(gamma) * bump(y);
    2.0 * adaptive_simpson(&f, 0.0, 1.0, 1e-14) / mollifier_mass()
}

/// `int |y| eta(y) dy`, computed once.
pub fn mollifier_abs_moment() -> f64 {
    static M1: OnceLock<f64> = OnceLock::new();
    *M1.get_or_init(|| mollifier_moment(1.0))
}

/// Convolve a pointwise evaluator with the bump scaled to `[-eps, eps]` and
/// fit the result on `interval` at `degree`.
pub fn mollify_fn(
    f: impl Fn(f64) -> f64,
    eps: f64,
    interval: (f64, f64),
    degree: usize,
) -> Result<ChebSeries> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::rejected(format!(
            "mollification width must be positive, got {eps}"
        )));
    }
    let (ys, ws) = mollifier_rule();
    cheb_fit(
        |x| ys.iter().zip(ws).map(|(y, w)| w * f(x - eps * y)).sum(),
        degree,
        interval,
    )
}

/// `s * eta_eps` on the interval of `s` shrunk by `eps` on both sides.
pub fn mollify(s: &ChebSeries, eps: f64) -> Result<ChebSeries> {
    let (lo, hi) = s.interval();
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::rejected(format!(
            "mollification width must be positive, got {eps}"
        )));
    }
    if hi - lo <= 2.0 * eps {
        return Err(Error::rejected(format!(
            "interval [{lo}, {hi}] too small for mollification width {eps}"
        )));
    }
    let degree = s.degree().max(DEFAULT_FIT_DEGREE).min(512);
    mollify_fn(|x| s.eval(x), eps, (lo + eps, hi - eps), degree)
}

/// A configured test function or potential: `poly:c0,c1,..` (ascending
/// monomials), `cheb:a0,a1,..` (coefficients of `T_k(x)`), or
/// `abspow:center,exponent` for `|x - center|^exponent`.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionSpec {
    Poly(Vec<f64>),
    Cheb(Vec<f64>),
    AbsPower { center: f64, exponent: f64 },
}

/// Degree used to fit non-polynomial specs.
pub const NONSMOOTH_FIT_DEGREE: usize = 256;

impl FunctionSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            FunctionSpec::Cheb(a) => clenshaw_t(a, x),
            FunctionSpec::AbsPower { center, exponent } => (x - center).abs().powf(*exponent),
        }
    }

    /// Polynomial degree, or `None` for non-polynomial specs.
    pub fn degree(&self) -> Option<usize> {
        match self {
            FunctionSpec::Poly(c) | FunctionSpec::Cheb(c) => Some(c.len().saturating_sub(1)),
            FunctionSpec::AbsPower { .. } => None,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        self.degree().is_some()
    }

    /// Series on `interval`; exact for polynomial specs.
    pub fn to_series(&self, interval: (f64, f64)) -> Result<ChebSeries> {
        let degree = self.degree().unwrap_or(NONSMOOTH_FIT_DEGREE);
        Ok(cheb_fit(|x| self.eval(x), degree, interval)?.truncate())
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').ok_or_else(|| {
            Error::rejected(format!("function spec '{s}' lacks a 'kind:' prefix"))
        })?;
        let values = body
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::rejected(format!("function spec '{s}': {e}")))?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::rejected(format!(
                "function spec '{s}' has invalid coefficients"
            )));
        }
        match kind.trim() {
            "poly" => Ok(FunctionSpec::Poly(values)),
            "cheb" => Ok(FunctionSpec::Cheb(values)),
            "abspow" => match values[..] {
                [center, exponent] if exponent > 0.0 => {
                    Ok(FunctionSpec::AbsPower { center, exponent })
                }
                _ => Err(Error::rejected(format!(
                    "function spec '{s}': expected abspow:center,exponent"
                ))),
            },
            other => Err(Error::rejected(format!(
                "unknown function spec kind '{other}'"
            ))),
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| {
            v.iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            FunctionSpec::Poly(c) => write!(f, "poly:{}", join(c)),
            FunctionSpec::Cheb(c) => write!(f, "cheb:{}", join(c)),
            FunctionSpec::AbsPower { center, exponent } => write!(f, "abspow:{center},{exponent}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: (f64, f64) = (-1.0, 1.0);

    #[test]
    fn fit_recovers_t2() {
        let s = cheb_fit(|x| 2.0 * x * x - 1.0, 4, REF).unwrap();
        for (k, c) in s.coeffs().iter().enumerate() {
            let expected = if k == 2 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-14, "k={k} c={c}");
        }
    }

    #[test]
    fn fit_constant_degree_zero() {
        let s = cheb_fit(|_| 1.0, 0, REF).unwrap();
        assert_eq!(s.coeffs().len(), 1);
        assert!((s.coeffs()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_non_finite() {
        assert!(matches!(
            cheb_fit(|x| 1.0 / x.abs().min(0.0), 3, REF),
            Err(Error::RejectedInput(_))
        ));
    }

    #[test]
    fn eval_basis_values() {
        assert_eq!(ChebSeries::basis(2, REF).eval(0.0), -1.0);
        assert_eq!(ChebSeries::basis(3, REF).eval(1.0), 1.0);
        assert_eq!(ChebSeries::basis(3, REF).eval(-1.0), -1.0);
    }

    #[test]
    fn derivative_basics() {
        let d1 = ChebSeries::basis(1, REF).derivative();
        assert_eq!(d1.coeffs(), &[1.0]);
        let d2 = ChebSeries::basis(2, REF).derivative();
        assert!((d2.coeffs()[1] - 4.0).abs() < 1e-15 && d2.coeffs()[0].abs() < 1e-15);
        let dd = ChebSeries::constant(3.0, REF).nth_derivative(2);
        assert_eq!(dd.coeffs(), &[0.0]);
    }

    #[test]
    fn derivative_on_shifted_interval() {
        let s = cheb_fit(|x| x.powi(3), 3, (-2.0, 5.0)).unwrap();
        let d = s.derivative();
        for x in [-1.5, 0.0, 2.2, 4.9] {
            assert!((d.eval(x) - 3.0 * x * x).abs() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let s = cheb_fit(|x| x.powi(4) - x + 2.0, 4, (-2.0, 2.0)).unwrap();
        let f = s.antiderivative();
        assert!(f.eval(0.0).abs() < 1e-14);
        let back = f.derivative();
        for x in [-1.9, -0.3, 0.7, 1.8] {
            assert!((back.eval(x) - s.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn truncate_drops_tail() {
        let s = ChebSeries::new(REF, vec![1.0, 0.5, 1e-16, 1e-17]).unwrap();
        assert_eq!(s.truncate().degree(), 1);
        let z = ChebSeries::zero(REF).truncate();
        assert_eq!(z.coeffs(), &[0.0]);
    }

    #[test]
    fn product_matches_pointwise() {
        let a = cheb_fit(|x| x * x + 0.3 * x, 2, (-2.0, 2.0)).unwrap();
        let b = cheb_fit(|x| x.powi(3) - 1.0, 3, (-2.0, 2.0)).unwrap();
        let p = a.mul(&b).unwrap();
        for x in [-1.7, 0.1, 1.3] {
            assert!((p.eval(x) - a.eval(x) * b.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn divided_difference_matches_quotient() {
        let s = cheb_fit(|x| x.powi(5) - 2.0 * x * x, 5, (-2.0, 2.0)).unwrap();
        let x = 0.37;
        let c = s.divided_difference_coeffs(x);
        let q = ChebSeries::new((-2.0, 2.0), c).unwrap();
        for y in [-1.2, 0.5, 1.9] {
            let expected = (s.eval(y) - s.eval(x)) / (y - x);
            assert!((q.eval(y) - expected).abs() < 1e-12);
        }
        assert!((q.eval(x) - s.derivative().eval(x)).abs() < 1e-12);
    }

    #[test]
    fn basis_conversions_round_trip() {
        let a = vec![0.3, -1.0, 2.0, 0.5, -0.25, 0.125];
        let b = t_to_u(&a);
        let back = u_to_t(&b);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-14);
        }
        for t in [-0.9, 0.2, 0.75] {
            assert!((clenshaw_t(&a, t) - clenshaw_u(&b, t)).abs() < 1e-13);
        }
    }

    #[test]
    fn integrals_reject_other_intervals() {
        let s = ChebSeries::constant(1.0, (-2.0, 2.0));
        assert!(integral_arcsine(&s).is_err());
        assert!(integral_semicircle(&s).is_err());
    }

    #[test]
    fn quadrature_rules_are_probability_measures() {
        let a = Quadrature::arcsine(64);
        let s = Quadrature::semicircle(64);
        assert!((a.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((s.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((s.integrate(|x| x * x) - 0.25).abs() < 1e-14);
        assert!((a.integrate(|x| x * x) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn moments_of_semicircle_in_reference_variable() {
        let m = Quadrature::semicircle(64).chebyshev_moments(REF, 6);
        let expected = [1.0, 0.0, -0.5, 0.0, 0.0, 0.0];
        for (a, b) in m.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn spec_parsing_and_display() {
        let p: FunctionSpec = "poly:0,0,1,0,1".parse().unwrap();
        assert_eq!(p, FunctionSpec::Poly(vec![0.0, 0.0, 1.0, 0.0, 1.0]));
        assert_eq!(p.to_string(), "poly:0,0,1,0,1");
        let c: FunctionSpec = "cheb:0,0,1".parse().unwrap();
        assert!((c.eval(0.5) + 0.5).abs() < 1e-15);
        assert!("spline:1".parse::<FunctionSpec>().is_err());
        assert!("poly:1,x".parse::<FunctionSpec>().is_err());
        assert!("abspow:0.3".parse::<FunctionSpec>().is_err());
        let s = c.to_series((-2.0, 2.0)).unwrap();
        assert!((s.eval(1.5) - (2.0 * 2.25 - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = ChebSeries::new((-2.0, 2.0), vec![1.0, 2.0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"interval":[-2.0,2.0],"coeffs":[1.0,2.0]}"#);
        let back: ChebSeries = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<ChebSeries>(r#"{"interval":[1,0],"coeffs":[1]}"#).is_err());
        assert!(serde_json::from_str::<ChebSeries>(r#"{"interval":[0,1],"coeffs":[]}"#).is_err());
    }

    #[test]
    fn mollifier_constants() {
        assert!((mollifier_mass() - 0.443_993_816_168_079_4).abs() < 1e-10);
        let m1 = mollifier_abs_moment();
        assert!(m1 > 0.0 && m1 < 0.5);
        let (_, ws) = mollifier_rule();
        assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mollify_rejects_bad_input() {
        let s = ChebSeries::constant(1.0, (-0.1, 0.1));
        assert!(mollify(&s, 0.2).is_err());
        assert!(mollify(&s, 0.0).is_err());
    }
}
