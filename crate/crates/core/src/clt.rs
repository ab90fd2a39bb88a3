//! Predicted Gaussian limits of linear statistics, the exact decomposition
//! `X = m + LF/n + Z` with its carré du champ terms, Stein bounds, and the
//! rigidity, negative-moment and sublevel-set probes.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::funcspace::{ChebSeries, FunctionSpec, Quadrature, QUADRATURE_NODES};
use crate::master::{
    invert_theta, quadratic_remainder_with, DividedDifferenceIntegrator, InversionData,
};
use crate::sampler::{batch_means, generator_unchecked, SampleBatch, SmoothFunction};

/// Largest number of simultaneous test functions.
pub const MAX_DIMENSION: usize = 4;
const FREENESS_RELATIVE: f64 = 1e-10;

/// `X_n = sum xi(l_i) - n int xi d mu_V`.
pub fn linear_statistic(xi: &ChebSeries, eq: &Equilibrium, lambdas: &[f64]) -> f64 {
    let n = lambdas.len() as f64;
    lambdas.iter().map(|&l| xi.eval(l)).sum::<f64>() - n * eq.integrate_series(xi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prediction {
    /// Limiting mean from the boundary-term formula.
    pub m: Vec<f64>,
    /// Centering `(1/2 - 1/beta) <psi', mu_V>` of the master decomposition.
    pub m_master: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub a_beta_wasserstein: f64,
    /// Total-variation prefactor; only defined for a single test function.
    pub a_beta_tv: Option<f64>,
    pub beta: f64,
    pub p: f64,
    /// `(E|N|^p)^{1/p}` for a standard Gaussian in dimension `d`.
    pub gaussian_moment: f64,
}

impl Prediction {
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn c_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.c)
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.sigma)
    }

    /// `||Sigma||_op`.
    pub fn sigma_op(&self) -> f64 {
        SymmetricEigen::new(self.c_matrix())
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &v| a.max(v))
            .sqrt()
    }

    /// Hilbert–Schmidt norm of `C^{-1}`.
    pub fn c_inverse_hs(&self) -> f64 {
        let eig = SymmetricEigen::new(self.c_matrix());
        eig.eigenvalues
            .iter()
            .map(|v| v.powi(-2))
            .sum::<f64>()
            .sqrt()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `(E|N|^p)^{1/p}` with `E|N|^p = 2^{p/2} Gamma((d+p)/2) / Gamma(d/2)`.
pub fn gaussian_norm(d: usize, p: f64) -> f64 {
    let d = d as f64;
    let log_moment = 0.5 * p * 2f64.ln() + ln_gamma(0.5 * (d + p)) - ln_gamma(0.5 * d);
    (log_moment / p).exp()
}

/// Boundary-term form of the limiting mean:
/// `(1/2 - 1/beta) [(xi(-1) + xi(1))/2 - int xi rho - (1/2) int int (S'/S)(x) dxi(x, y) rho(dy) mu_sc(dx)]`.
fn boundary_mean(
    xi: &ChebSeries,
    eq: &Equilibrium,
    beta: f64,
    rho: &Quadrature,
    sc: &Quadrature,
) -> f64 {
    let xi_ref = xi
        .reinterval((-1.0, 1.0), xi.degree().max(1))
        .expect("finite series");
    let arcsine_mean = xi_ref.coeffs()[0];
    let arcsine_moments = rho.chebyshev_moments((-1.0, 1.0), xi_ref.degree().max(1));
    let log_derivative = |x: f64| eq.s1.eval(x) / eq.s.eval(x);
    let double = sc
        .integrate(|x| log_derivative(x) * xi_ref.divided_difference_integral(x, &arcsine_moments));
    (0.5 - 1.0 / beta) * (0.5 * (xi.eval(-1.0) + xi.eval(1.0)) - arcsine_mean - 0.5 * double)
}

/// `c_ij = (1/(2 beta)) int int (dxi_i)(dxi_j)(1 - xy) rho(dx) rho(dy)` on a
/// tensor Gauss–Chebyshev grid; the diagonal uses `xi'`.
pub fn covariance_matrix(xis: &[ChebSeries], beta: f64) -> DMatrix<f64> {
    let rho = Quadrature::arcsine(QUADRATURE_NODES);
    let nodes = &rho.nodes;
    let w = 1.0 / nodes.len() as f64;
    let values: Vec<Vec<f64>> = xis.iter().map(|x| x.eval_many(nodes)).collect();
    let derivs: Vec<Vec<f64>> = xis
        .iter()
        .map(|x| x.derivative().eval_many(nodes))
        .collect();
    let d = xis.len();
    let mut c = DMatrix::zeros(d, d);
    let mut dd = vec![0.0; d];
    for (a, &x) in nodes.iter().enumerate() {
        for (b, &y) in nodes.iter().enumerate() {
            for k in 0..d {
                dd[k] = if a == b {
                    derivs[k][a]
                } else {
                    (values[k][a] - values[k][b]) / (x - y)
                };
            }
            let kernel = (1.0 - x * y) * w * w;
            for i in 0..d {
                for j in i..d {
                    c[(i, j)] += dd[i] * dd[j] * kernel;
                }
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            c[(i, j)] /= 2.0 * beta;
            c[(j, i)] = c[(i, j)];
        }
    }
    c
}

/// `-(1/beta) <xi_i' psi_j, mu_V>`, the covariance through the master operator.
pub fn covariance_from_inversion(
    xis: &[ChebSeries],
    invs: &[InversionData],
    eq: &Equilibrium,
    beta: f64,
) -> DMatrix<f64> {
    let d = xis.len();
    let dxis: Vec<ChebSeries> = xis.iter().map(|x| x.derivative()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        -eq.integral(|x| dxis[i].eval(x) * invs[j].psi.eval(x)) / beta
    })
}

fn check_inputs(xis: &[ChebSeries], beta: f64, p: f64) -> Result<()> {
    if xis.is_empty() || xis.len() > MAX_DIMENSION {
        return Err(Error::rejected(format!(
            "between 1 and {MAX_DIMENSION} test functions required"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::rejected(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::rejected(format!("p must be at least 1, got {p}")));
    }
    Ok(())
}

/// Predicted mean, covariance and bound prefactors, inverting the master
/// operator for each test function.
pub fn predict(xis: &[ChebSeries], eq: &Equilibrium, beta: f64, p: f64) -> Result<Prediction> {
    check_inputs(xis, beta, p)?;
    let invs = xis
        .iter()
        .map(|x| invert_theta(eq, x))
        .collect::<Result<Vec<_>>>()?;
    predict_with(xis, &invs, eq, beta, p)
}

pub fn predict_with(
    xis: &[ChebSeries],
    invs: &[InversionData],
    eq: &Equilibrium,
    beta: f64,
    p: f64,
) -> Result<Prediction> {
    check_inputs(xis, beta, p)?;
    let d = xis.len();
    let c = covariance_matrix(xis, beta);
    let eig = SymmetricEigen::new(c.clone());
    let min_eig = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let trace = c.trace();
    if !(min_eig > FREENESS_RELATIVE * trace) {
        return Err(Error::FreenessViolated {
            min_eigenvalue: min_eig,
        });
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let sigma = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    let sigma_op = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v)).sqrt();
    let c_inv_hs = eig
        .eigenvalues
        .iter()
        .map(|v| v.powi(-2))
        .sum::<f64>()
        .sqrt();
    let gaussian_moment = gaussian_norm(d, p);
    let factor = (0.5 - 1.0 / beta).abs();
    let a_beta_wasserstein = sigma_op * c_inv_hs * gaussian_moment / beta + factor * sigma_op;
    let a_beta_tv =
        (d == 1).then(|| 1.0 / (beta * c[(0, 0)]) + factor * std::f64::consts::PI.sqrt() / 2.0);

    let rho = Quadrature::arcsine(QUADRATURE_NODES);
    let sc = Quadrature::semicircle(QUADRATURE_NODES);
    let m = xis
        .iter()
        .map(|x| boundary_mean(x, eq, beta, &rho, &sc))
        .collect();
    let m_master = invs
        .iter()
        .map(|inv| master_centering(inv, eq, beta))
        .collect();
    Ok(Prediction {
        m,
        m_master,
        c: from_matrix(&c),
        sigma: from_matrix(&sigma),
        a_beta_wasserstein,
        a_beta_tv,
        beta,
        p,
        gaussian_moment,
    })
}

/// `(1/2 - 1/beta) <psi', mu_V>`.
pub fn master_centering(inv: &InversionData, eq: &Equilibrium, beta: f64) -> f64 {
    (0.5 - 1.0 / beta) * eq.integral(|x| inv.psi1.eval(x))
}

/// Everything the per-configuration decomposition needs, precomputed once.
pub struct SteinContext<'a> {
    eq: &'a Equilibrium,
    beta: f64,
    xis: Vec<ChebSeries>,
    dxis: Vec<ChebSeries>,
    funcs: Vec<SmoothFunction>,
    tvs: Vec<DividedDifferenceIntegrator>,
    xi_means: Vec<f64>,
    theta_means: Vec<f64>,
    m_master: Vec<f64>,
    c_xi: Vec<f64>,
    targets: Option<Vec<PointwiseTarget>>,
}

/// A test function evaluated pointwise, with `int xi d mu_V` computed by
/// adaptive quadrature split at its non-smooth points.
#[derive(Clone, Debug)]
pub struct PointwiseTarget {
    pub spec: FunctionSpec,
    pub mean: f64,
}

impl PointwiseTarget {
    pub fn new(spec: &FunctionSpec, eq: &Equilibrium) -> Self {
        let breakpoints = match spec {
            FunctionSpec::AbsPower { center, .. } => vec![*center],
            _ => Vec::new(),
        };
        let mean = eq.integral_pointwise(|x| spec.eval(x), &breakpoints);
        PointwiseTarget {
            spec: spec.clone(),
            mean,
        }
    }

    pub fn statistic(&self, lambdas: &[f64]) -> f64 {
        lambdas.iter().map(|&l| self.spec.eval(l)).sum::<f64>() - lambdas.len() as f64 * self.mean
    }
}

/// Per-configuration terms of `X = m + LF/n + Z`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteinTerms {
    /// Linear statistics of the test functions.
    pub x: Vec<f64>,
    /// `(1/beta) <f_i, nu_n - n mu_V>`.
    pub f: Vec<f64>,
    /// `L F_i / n`.
    pub lf_over_n: Vec<f64>,
    pub z: Vec<f64>,
    /// `Gamma[X_i, -F_j / n] = -(1/beta) <xi_i' psi_j, mu_n>`.
    pub gamma_xf: Vec<Vec<f64>>,
    /// `max_i |X_i - m_i - LF_i/n - Z_i|` with `X_i` built from `Theta_V psi_i`
    /// (before any target adjustment).
    pub master_residual: f64,
}

impl<'a> SteinContext<'a> {
    pub fn new(
        xis: &[ChebSeries],
        invs: &[InversionData],
        eq: &'a Equilibrium,
        beta: f64,
    ) -> Result<Self> {
        if xis.len() != invs.len() {
            return Err(Error::rejected("one inversion per test function required"));
        }
        let funcs: Vec<SmoothFunction> = invs
            .iter()
            .map(|inv| SmoothFunction {
                f: inv.f.clone(),
                fp: inv.psi.clone(),
                fpp: inv.psi1.clone(),
            })
            .collect();
        let tvs: Vec<DividedDifferenceIntegrator> = invs
            .iter()
            .map(|inv| DividedDifferenceIntegrator::for_series(eq, &inv.psi))
            .collect();
        let theta_means = invs
            .iter()
            .zip(&tvs)
            .map(|(inv, tv)| {
                eq.integral(|x| -eq.potential.v1.eval(x) * inv.psi.eval(x) + tv.apply(&inv.psi, x))
            })
            .collect();
        Ok(SteinContext {
            eq,
            beta,
            xis: xis.to_vec(),
            dxis: xis.iter().map(|x| x.derivative()).collect(),
            funcs,
            tvs,
            xi_means: xis.iter().map(|x| eq.integrate_series(x)).collect(),
            theta_means,
            m_master: invs
                .iter()
                .map(|inv| master_centering(inv, eq, beta))
                .collect(),
            c_xi: invs.iter().map(|inv| inv.c_xi).collect(),
            targets: None,
        })
    }

    /// Decompose the statistics of `targets` through the (smoothed) test
    /// functions of this context: `X` becomes the target statistic and
    /// `Z` absorbs `<xi - xi_smooth, nu_n - n mu_V>`.
    pub fn with_targets(mut self, targets: Vec<PointwiseTarget>) -> Result<Self> {
        if targets.len() != self.dim() {
            return Err(Error::rejected("one target per test function required"));
        }
        self.targets = Some(targets);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.xis.len()
    }

    pub fn m_master(&self) -> &[f64] {
        &self.m_master
    }

    pub fn u_bound(&self) -> f64 {
        1.0 + self.eq.delta
    }

    /// Linear statistics of the targets, or of the test functions if none.
    pub fn target_statistics(&self, lambdas: &[f64]) -> Vec<f64> {
        match &self.targets {
            Some(targets) => targets.iter().map(|t| t.statistic(lambdas)).collect(),
            None => self.statistics(lambdas),
        }
    }

    /// Linear statistics of the test functions, without the decomposition.
    pub fn statistics(&self, lambdas: &[f64]) -> Vec<f64> {
        let n = lambdas.len() as f64;
        self.xis
            .iter()
            .zip(&self.xi_means)
            .map(|(xi, mean)| lambdas.iter().map(|&l| xi.eval(l)).sum::<f64>() - n * mean)
            .collect()
    }

    pub fn terms(&self, lambdas: &[f64]) -> Result<SteinTerms> {
        let max_abs = lambdas.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        if max_abs >= self.u_bound() {
            return Err(Error::OutlierConfiguration { max_abs });
        }
        let eq = self.eq;
        let beta = self.beta;
        let n = lambdas.len() as f64;
        let d = self.dim();
        let mut out = SteinTerms {
            x: self.statistics(lambdas),
            f: Vec::with_capacity(d),
            lf_over_n: Vec::with_capacity(d),
            z: Vec::with_capacity(d),
            gamma_xf: vec![vec![0.0; d]; d],
            master_residual: 0.0,
        };
        let psi_values: Vec<Vec<f64>> =
            self.funcs.iter().map(|f| f.fp.eval_many(lambdas)).collect();
        for (i, func) in self.funcs.iter().enumerate() {
            let f_mean = eq.integral(|x| func.f.eval(x));
            let f_stat = lambdas.iter().map(|&l| func.f.eval(l)).sum::<f64>() - n * f_mean;
            out.f.push(f_stat / beta);
            let lf = generator_unchecked(&eq.potential, func, lambdas, beta) / (beta * n);
            out.lf_over_n.push(lf);
            let parts = quadratic_remainder_with(eq, &func.fp, &func.fpp, &self.tvs[i], lambdas);
            let z =
                (0.5 - 1.0 / beta) * parts.diag_sum / n - self.m_master[i] - 0.5 * parts.remainder;
            out.z.push(z);
            let theta_sum: f64 = lambdas
                .iter()
                .zip(&psi_values[i])
                .map(|(&l, &p)| -eq.potential.v1.eval(l) * p + self.tvs[i].apply(&func.fp, l))
                .sum();
            let x_theta = theta_sum - n * self.theta_means[i];
            let residual = (x_theta - self.m_master[i] - lf - z).abs();
            out.master_residual = out.master_residual.max(residual);
        }
        for i in 0..d {
            let dxi = self.dxis[i].eval_many(lambdas);
            for j in 0..d {
                let s: f64 = dxi.iter().zip(&psi_values[j]).map(|(a, b)| a * b).sum();
                out.gamma_xf[i][j] = -s / (beta * n);
            }
        }
        if let Some(targets) = &self.targets {
            for (i, t) in targets.iter().enumerate() {
                let x = t.statistic(lambdas);
                out.z[i] += x - out.x[i];
                out.x[i] = x;
            }
        }
        Ok(out)
    }

    /// `c_xi` per test function.
    pub fn c_xi(&self) -> &[f64] {
        &self.c_xi
    }
}

/// Per-configuration decomposition for a set of test functions.
pub fn stein_terms(
    xis: &[ChebSeries],
    eq: &Equilibrium,
    beta: f64,
    lambdas: &[f64],
    invs: &[InversionData],
) -> Result<SteinTerms> {
    SteinContext::new(xis, invs, eq, beta)?.terms(lambdas)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    Wasserstein,
    Tv,
}

/// Stein bound from estimated `||C - Gamma[X, -F]||_{L^p}` and `||Z||_{L^p}`.
/// Wasserstein: `||Sigma||_op ||C^{-1}|| ||N||_{L^p} gamma_dev + ||Sigma||_op z_norm`;
/// TV (one test function): `(2/sigma^2) gamma_dev + (sqrt(pi)/2) z_norm`.
pub fn stein_bound(
    pred: &Prediction,
    gamma_dev: f64,
    z_norm: f64,
    p: f64,
    mode: BoundMode,
) -> Result<f64> {
    match mode {
        BoundMode::Wasserstein => {
            let sigma_op = pred.sigma_op();
            Ok(
                sigma_op * pred.c_inverse_hs() * gaussian_norm(pred.dim(), p) * gamma_dev
                    + sigma_op * z_norm,
            )
        }
        BoundMode::Tv => {
            if pred.dim() != 1 {
                return Err(Error::rejected(
                    "total-variation bound needs exactly one test function",
                ));
            }
            let sigma2 = pred.c[0][0];
            Ok(2.0 / sigma2 * gamma_dev + std::f64::consts::PI.sqrt() / 2.0 * z_norm)
        }
    }
}

/// `(mean |v|^p)^{1/p}` with its leave-one-out jackknife standard error.
pub fn lp_norm_jackknife(values: &[f64], p: f64) -> (f64, f64) {
    let r = values.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let powered: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    let total: f64 = powered.iter().sum();
    let estimate = (total / r as f64).powf(1.0 / p);
    if r < 2 {
        return (estimate, f64::NAN);
    }
    let loo: Vec<f64> = powered
        .iter()
        .map(|a| ((total - a).max(0.0) / (r - 1) as f64).powf(1.0 / p))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / r as f64;
    let var = loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>() * (r - 1) as f64 / r as f64;
    (estimate, var.sqrt())
}

/// Batch-level summary of the decomposition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteinSummary {
    pub reps_used: usize,
    pub outliers: usize,
    pub mean_x: Vec<f64>,
    pub mean_x_stderr: Vec<f64>,
    pub cov_x: Vec<Vec<f64>>,
    pub mean_z: Vec<f64>,
    pub z_norm: f64,
    pub z_norm_stderr: f64,
    pub gamma_dev: f64,
    pub gamma_dev_stderr: f64,
    /// `||sigma - Gamma||_{L^1}` for one test function (the literal TV reading).
    pub gamma_dev_sigma_reading: Option<f64>,
    pub gamma_var: Vec<f64>,
    pub master_residual_max: f64,
}

/// Summaries of per-replicate terms; outliers already excluded by the caller.
pub fn summarize_terms(
    terms: &[SteinTerms],
    outliers: usize,
    pred: &Prediction,
    p: f64,
) -> SteinSummary {
    let d = pred.dim();
    let r = terms.len();
    let c = &pred.c;
    let mut mean_x = vec![0.0; d];
    let mut mean_x_stderr = vec![0.0; d];
    for i in 0..d {
        let xs: Vec<f64> = terms.iter().map(|t| t.x[i]).collect();
        let (m, s) = batch_means(&xs);
        mean_x[i] = m;
        mean_x_stderr[i] = s;
    }
    let mut cov_x = vec![vec![0.0; d]; d];
    if r > 1 {
        for i in 0..d {
            for j in 0..d {
                cov_x[i][j] = terms
                    .iter()
                    .map(|t| (t.x[i] - mean_x[i]) * (t.x[j] - mean_x[j]))
                    .sum::<f64>()
                    / (r - 1) as f64;
            }
        }
    }
    let mean_z = (0..d)
        .map(|i| terms.iter().map(|t| t.z[i]).sum::<f64>() / r.max(1) as f64)
        .collect();
    let z_norms: Vec<f64> = terms
        .iter()
        .map(|t| t.z.iter().map(|z| z * z).sum::<f64>().sqrt())
        .collect();
    let (z_norm, z_norm_stderr) = lp_norm_jackknife(&z_norms, p);
    let gamma_devs: Vec<f64> = terms
        .iter()
        .map(|t| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += (c[i][j] - t.gamma_xf[i][j]).powi(2);
                }
            }
            s.sqrt()
        })
        .collect();
    let (gamma_dev, gamma_dev_stderr) = lp_norm_jackknife(&gamma_devs, p);
    let gamma_dev_sigma_reading = (d == 1).then(|| {
        let sigma = c[0][0].sqrt();
        terms
            .iter()
            .map(|t| (sigma - t.gamma_xf[0][0]).abs())
            .sum::<f64>()
            / r.max(1) as f64
    });
    let gamma_var = (0..d)
        .map(|i| {
            let g: Vec<f64> = terms.iter().map(|t| t.gamma_xf[i][i]).collect();
            let m = g.iter().sum::<f64>() / r.max(1) as f64;
            g.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r.max(2) - 1) as f64
        })
        .collect();
    SteinSummary {
        reps_used: r,
        outliers,
        mean_x,
        mean_x_stderr,
        cov_x,
        mean_z,
        z_norm,
        z_norm_stderr,
        gamma_dev,
        gamma_dev_stderr,
        gamma_dev_sigma_reading,
        gamma_var,
        master_residual_max: terms.iter().map(|t| t.master_residual).fold(0.0, f64::max),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub envelope_violation_rate: f64,
    pub outlier_rate: f64,
    pub max_abs_lambda: f64,
}

/// Per-replicate rigidity flags: (envelope violated, outlier, max |lambda|).
pub fn rigidity_flags(
    quantiles: &[f64],
    lambdas: &[f64],
    eps: f64,
    delta: f64,
) -> (bool, bool, f64) {
    let n = lambdas.len();
    let scale = (n as f64).powf(-2.0 / 3.0 + eps);
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut violated = false;
    for (j0, (&l, &q)) in sorted.iter().zip(quantiles).enumerate() {
        let j = j0 + 1;
        let jhat = j.min(n - j + 1) as f64;
        if (l - q).abs() > jhat.powf(-1.0 / 3.0) * scale {
            violated = true;
            break;
        }
    }
    let max_abs = sorted.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    (violated, max_abs >= 1.0 + delta, max_abs)
}

pub fn rigidity_report(eq: &Equilibrium, batch: &SampleBatch, eps: f64) -> RigidityReport {
    let quantiles = eq.quantiles(batch.n);
    let flags: Vec<(bool, bool, f64)> = batch
        .iter()
        .map(|l| rigidity_flags(&quantiles, l, eps, eq.delta))
        .collect();
    aggregate_rigidity(&flags)
}

pub fn aggregate_rigidity(flags: &[(bool, bool, f64)]) -> RigidityReport {
    let r = flags.len().max(1) as f64;
    RigidityReport {
        envelope_violation_rate: flags.iter().filter(|f| f.0).count() as f64 / r,
        outlier_rate: flags.iter().filter(|f| f.1).count() as f64 / r,
        max_abs_lambda: flags.iter().map(|f| f.2).fold(0.0, f64::max),
    }
}

/// `<(xi')^2, mu_n>` for one configuration.
pub fn gamma_xx_density(xi_prime: &ChebSeries, lambdas: &[f64]) -> f64 {
    lambdas
        .iter()
        .map(|&l| xi_prime.eval(l).powi(2))
        .sum::<f64>()
        / lambdas.len() as f64
}

/// Empirical `P(<(xi')^2, mu_n> <= eps)` for each `eps` in the grid.
pub fn negative_moment_probe(
    batch: &SampleBatch,
    xi_prime: &ChebSeries,
    eps_grid: &[f64],
) -> Vec<(f64, f64)> {
    let stats: Vec<f64> = batch
        .iter()
        .map(|l| gamma_xx_density(xi_prime, l))
        .collect();
    tail_probabilities(&stats, eps_grid)
}

pub fn tail_probabilities(stats: &[f64], eps_grid: &[f64]) -> Vec<(f64, f64)> {
    let r = stats.len().max(1) as f64;
    eps_grid
        .iter()
        .map(|&e| (e, stats.iter().filter(|&&s| s <= e).count() as f64 / r))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaReport {
    /// `(eps, Leb{x in domain : |xi'(x)| <= eps})`.
    pub measures: Vec<(f64, f64)>,
    /// Largest difference between the base grid and a grid twice as fine.
    pub refinement_change: f64,
    /// Least-squares slope of log measure against log eps over positive measures.
    pub slope: Option<f64>,
}

const ALPHA_GRID: usize = 100_000;

fn sublevel_measure(values: &[f64], width: f64, eps: f64) -> f64 {
    width * values.iter().filter(|v| v.abs() <= eps).count() as f64 / values.len() as f64
}

fn midpoint_values(f: &ChebSeries, domain: (f64, f64), points: usize) -> Vec<f64> {
    let h = (domain.1 - domain.0) / points as f64;
    (0..points)
        .map(|i| f.eval(domain.0 + h * (i as f64 + 0.5)))
        .collect()
}

/// Lebesgue measure of `{|xi'| <= eps}` by grid counting with a refinement check.
pub fn alpha_regularity(
    xi_prime: &ChebSeries,
    eps_grid: &[f64],
    domain: (f64, f64),
) -> AlphaReport {
    let width = domain.1 - domain.0;
    let coarse = midpoint_values(xi_prime, domain, ALPHA_GRID);
    let fine = midpoint_values(xi_prime, domain, 2 * ALPHA_GRID);
    let mut measures = Vec::with_capacity(eps_grid.len());
    let mut change: f64 = 0.0;
    for &e in eps_grid {
        let a = sublevel_measure(&coarse, width, e);
        let b = sublevel_measure(&fine, width, e);
        change = change.max((a - b).abs());
        measures.push((e, b));
    }
    let pts: Vec<(f64, f64)> = measures
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|&(e, m)| (e.ln(), m.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    AlphaReport {
        measures,
        refinement_change: change,
        slope,
    }
}
