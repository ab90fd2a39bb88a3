//! Experiment configuration, end-to-end runs over an n-grid, and the JSON
//! reports and CSV rate tables they produce.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clt::{
    aggregate_rigidity, gamma_xx_density, predict_with, rigidity_flags, stein_bound,
    summarize_terms, BoundMode, PointwiseTarget, Prediction, RigidityReport, SteinContext,
    SteinSummary, SteinTerms, MAX_DIMENSION,
};
use crate::equilibrium::{
    build_equilibrium, Equilibrium, Potential, DEFAULT_DELTA, WORKING_INTERVAL,
};
use crate::error::{Error, Result};
use crate::funcspace::{mollify_fn, ChebSeries, FunctionSpec, NONSMOOTH_FIT_DEGREE};
use crate::master::{invert_theta, InversionData};
use crate::metrics::{
    bias_floor, ks_normality, measure_distance, projected_distance, random_direction, DistanceKind,
    DistanceReport, Measured, BOOTSTRAP_RESAMPLES,
};
use crate::sampler::{
    generate_batch, map_replicates, replicate_seed, BatchSpec, MalaParams, MalaStats, SampleBatch,
    SamplerKind,
};

/// Version stamped into every report; rate tooling refuses mixed versions.
pub const FORMAT_VERSION: u32 = 1;
pub const MIN_REPS: usize = 100;
/// Offset separating metric seeds from replicate seeds.
const METRIC_SEED_OFFSET: u64 = 1 << 40;

fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_sampler() -> SamplerKind {
    SamplerKind::Tridiagonal
}
fn default_p() -> f64 {
    1.0
}
fn default_metrics() -> Vec<DistanceKind> {
    vec![DistanceKind::W1]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_rigidity_eps() -> f64 {
    0.1
}
fn default_projections() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: String,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub beta: f64,
    pub xis: Vec<String>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub mala: MalaParams,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<DistanceKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Smooth every test function with the bump kernel at this width and
    /// decompose the raw statistic through the smoothed one.
    #[serde(default)]
    pub mollify: Option<f64>,
    #[serde(default = "default_rigidity_eps")]
    pub rigidity_eps: f64,
    /// Random directions for the sliced multivariate distance.
    #[serde(default = "default_projections")]
    pub projections: usize,
    /// Keep sample batches under `output_dir/cache`, keyed by content hash.
    #[serde(default)]
    pub cache: bool,
}

impl ExperimentConfig {
    /// Hex SHA-256 of the format version and every field that affects results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.cache = false;
        let mut hasher = Sha256::new();
        hasher.update(FORMAT_VERSION.to_le_bytes());
        hasher.update(serde_json::to_vec(&canonical).expect("config serializes"));
        hex(&hasher.finalize())
    }

    fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_grid.is_empty() {
            return fail("n_grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return fail(format!("n_grid not increasing: {:?}", self.n_grid));
        }
        if self.n_grid[0] < 2 {
            return fail("n_grid entries must be at least 2".into());
        }
        if self.reps < MIN_REPS {
            return fail(format!(
                "reps must be at least {MIN_REPS}, got {}",
                self.reps
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return fail(format!("p must be at least 1, got {}", self.p));
        }
        if self.xis.is_empty() || self.xis.len() > MAX_DIMENSION {
            return fail(format!("xis must hold 1 to {MAX_DIMENSION} test functions"));
        }
        if self.metrics.is_empty() {
            return fail("metrics is empty".into());
        }
        if let Some(eps) = self.mollify {
            if !(eps > 0.0 && eps < 0.5) {
                return fail(format!("mollify width must lie in (0, 0.5), got {eps}"));
            }
        }
        if !(self.rigidity_eps > 0.0) {
            return fail(format!(
                "rigidity_eps must be positive, got {}",
                self.rigidity_eps
            ));
        }
        if self.projections == 0 {
            return fail("projections must be positive".into());
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A validated configuration with everything that does not depend on `n`.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub eq: Equilibrium,
    pub specs: Vec<FunctionSpec>,
    /// Test functions as decomposed, smoothed when `mollify` is set.
    pub xis: Vec<ChebSeries>,
    pub targets: Option<Vec<PointwiseTarget>>,
    pub invs: Vec<InversionData>,
    pub prediction: Prediction,
}

/// Parse and check a JSON configuration, fit its functions, build the
/// equilibrium, invert the master operator and predict the limit.
pub fn validate_config(text: &str) -> Result<Experiment> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.check_invariants()?;
    let potential = Potential::parse(&config.potential).map_err(|e| e.in_stage("potential"))?;
    let eq = build_equilibrium(&potential, config.delta).map_err(|e| e.in_stage("equilibrium"))?;
    Experiment::assemble(config, eq)
}

fn is_quadratic(eq: &Equilibrium) -> bool {
    let v1 = &eq.potential.v1;
    [-1.5, -0.5, 0.0, 0.7, 1.5]
        .iter()
        .all(|&x| (v1.eval(x) - 2.0 * x).abs() < 1e-10)
}

impl Experiment {
    /// Build from a configuration and an equilibrium that is already known;
    /// `config.potential` is then only a label.
    pub fn assemble(config: ExperimentConfig, eq: Equilibrium) -> Result<Self> {
        config.check_invariants()?;
        if config.sampler == SamplerKind::Tridiagonal && !is_quadratic(&eq) {
            return Err(Error::Config(
                "the tridiagonal sampler only serves V(x) = x^2; use mala".into(),
            ));
        }
        let specs = config
            .xis
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<FunctionSpec>()
                    .map_err(|e| Error::rejected(format!("xis[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let xis = specs
            .iter()
            .map(|spec| match config.mollify {
                Some(eps) => {
                    let degree = spec.degree().unwrap_or(NONSMOOTH_FIT_DEGREE);
                    mollify_fn(|x| spec.eval(x), eps, WORKING_INTERVAL, degree)
                        .map(|s| s.truncate())
                }
                None => spec.to_series(WORKING_INTERVAL),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("test functions"))?;
        let targets = config
            .mollify
            .map(|_| specs.iter().map(|s| PointwiseTarget::new(s, &eq)).collect());
        let invs = xis
            .iter()
            .map(|x| invert_theta(&eq, x))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("inversion"))?;
        let prediction = predict_with(&xis, &invs, &eq, config.beta, config.p)
            .map_err(|e| e.in_stage("prediction"))?;
        Ok(Experiment {
            config_hash: config.hash(),
            config,
            eq,
            specs,
            xis,
            targets,
            invs,
            prediction,
        })
    }

    pub fn batch_spec(&self, n: usize) -> BatchSpec {
        BatchSpec {
            method: self.config.sampler,
            n,
            beta: self.config.beta,
            reps: self.config.reps,
            master_seed: replicate_seed(self.config.seed, n as u64),
            mala: self.config.mala,
        }
    }

    fn context(&self) -> Result<SteinContext<'_>> {
        let ctx = SteinContext::new(&self.xis, &self.invs, &self.eq, self.config.beta)?;
        match &self.targets {
            Some(t) => ctx.with_targets(t.clone()),
            None => Ok(ctx),
        }
    }
}

/// What each replicate contributes to a report.
#[derive(Clone, Debug)]
struct ReplicateOutcome {
    statistics: Vec<f64>,
    terms: Option<SteinTerms>,
    rigidity: (bool, bool, f64),
    gamma_xx: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionBlock {
    pub m: Vec<f64>,
    /// Centering of the exact decomposition; distances are measured around it.
    pub m_master: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    #[serde(rename = "A_beta")]
    pub a_beta_wasserstein: f64,
    pub a_beta: Option<f64>,
}

impl From<&Prediction> for PredictionBlock {
    fn from(p: &Prediction) -> Self {
        PredictionBlock {
            m: p.m.clone(),
            m_master: p.m_master.clone(),
            c: p.c.clone(),
            sigma: p.sigma.clone(),
            a_beta_wasserstein: p.a_beta_wasserstein,
            a_beta: p.a_beta_tv,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalBlock {
    pub mean: Vec<f64>,
    pub mean_stderr: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Kolmogorov–Smirnov test of the first statistic against the predicted law.
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteinBlock {
    pub summary: SteinSummary,
    /// `||Z||_{L^1}` and `||C - Gamma||_{L^1}` used by the total-variation bound.
    pub z_l1: f64,
    pub z_l1_stderr: f64,
    pub gamma_dev_l1: f64,
    pub gamma_dev_l1_stderr: f64,
    pub bound_wasserstein: f64,
    pub bound_wasserstein_stderr: f64,
    pub bound_tv: Option<f64>,
    pub bound_tv_stderr: Option<f64>,
    /// Total-variation bound with `||sigma - Gamma||` in place of `||sigma^2 - Gamma||`.
    pub bound_tv_sigma_reading: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub kind: DistanceKind,
    /// `univariate`, `marginal` or `sliced, lower-bound surrogate`.
    pub estimator: String,
    pub component: Option<usize>,
    pub value: f64,
    pub stderr: f64,
    /// Same estimator on exact draws from the predicted Gaussian.
    pub floor: f64,
    pub floor_stderr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnosticsBlock {
    pub rigidity_eps: f64,
    pub rigidity: RigidityReport,
    pub outliers: usize,
    pub mala: Option<MalaStats>,
    /// `<(xi_1')^2, mu_V>` and the smallest observed `<(xi_1')^2, mu_n>`.
    pub gamma_xx_limit: f64,
    pub gamma_xx_min: f64,
    /// Fraction of replicates with `<(xi_1')^2, mu_n>` at most half its limit.
    pub gamma_xx_half_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NReport {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub n: usize,
    pub master_seed: u64,
    pub prediction: PredictionBlock,
    pub empirical: EmpiricalBlock,
    pub stein: SteinBlock,
    pub distances: Vec<DistanceEntry>,
    pub diagnostics: DiagnosticsBlock,
}

impl NReport {
    /// The entry rate tables use: univariate for one test function, otherwise
    /// the sliced surrogate for Wasserstein kinds and the first marginal.
    pub fn primary(&self, kind: DistanceKind) -> Option<&DistanceEntry> {
        let sliced = self
            .distances
            .iter()
            .find(|e| e.kind == kind && e.estimator.starts_with("sliced"));
        let univariate = self
            .distances
            .iter()
            .find(|e| e.kind == kind && e.estimator == "univariate");
        let marginal = self
            .distances
            .iter()
            .find(|e| e.kind == kind && e.component == Some(0));
        univariate.or(sliced).or(marginal)
    }
}

/// Results of a full run, also written under `output_dir`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub reports: Vec<NReport>,
    pub rates: Vec<DistanceReport>,
}

fn batch_cache_path(exp: &Experiment, spec: &BatchSpec) -> PathBuf {
    #[derive(Serialize)]
    struct Key<'a> {
        version: u32,
        spec: &'a BatchSpec,
        potential: Option<&'a ChebSeries>,
        delta: f64,
    }
    let key = Key {
        version: FORMAT_VERSION,
        spec,
        potential: (spec.method == SamplerKind::Mala).then_some(&exp.eq.potential.v),
        delta: exp.eq.delta,
    };
    let digest = Sha256::digest(serde_json::to_vec(&key).expect("key serializes"));
    exp.config
        .output_dir
        .join("cache")
        .join(format!("batch_{}.bels", hex(&digest)))
}

fn cached_batch(exp: &Experiment, spec: &BatchSpec) -> Result<SampleBatch> {
    let path = batch_cache_path(exp, spec);
    if path.exists() {
        let batch = SampleBatch::load(&path)?;
        if batch.n == spec.n && batch.reps() == spec.reps {
            return Ok(batch);
        }
    }
    let batch = generate_batch(spec, Some(&exp.eq))?;
    fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
    batch.save(&path)?;
    Ok(batch)
}

fn process_replicate(
    exp: &Experiment,
    ctx: &SteinContext<'_>,
    quantiles: &[f64],
    xi_prime: &ChebSeries,
    lambdas: &[f64],
) -> ReplicateOutcome {
    ReplicateOutcome {
        statistics: ctx.target_statistics(lambdas),
        terms: ctx.terms(lambdas).ok(),
        rigidity: rigidity_flags(quantiles, lambdas, exp.config.rigidity_eps, exp.eq.delta),
        gamma_xx: gamma_xx_density(xi_prime, lambdas),
    }
}

/// Sample, decompose and measure at one `n`.
pub fn run_n(exp: &Experiment, n: usize) -> Result<NReport> {
    let spec = exp.batch_spec(n);
    if exp.config.cache {
        let batch = cached_batch(exp, &spec).map_err(|e| e.in_stage("sampling"))?;
        return analyze_batch(exp, &batch);
    }
    let ctx = exp.context()?;
    let quantiles = exp.eq.quantiles(n);
    let xi_prime = exp.xis[0].derivative();
    let (outcomes, mala) = map_replicates(&spec, Some(&exp.eq), |l| {
        process_replicate(exp, &ctx, &quantiles, &xi_prime, l)
    })
    .map_err(|e| e.in_stage("sampling"))?;
    analyze(exp, n, spec.master_seed, &outcomes, mala)
}

/// Decompose and measure a stored batch.
pub fn analyze_batch(exp: &Experiment, batch: &SampleBatch) -> Result<NReport> {
    let ctx = exp.context()?;
    let quantiles = exp.eq.quantiles(batch.n);
    let xi_prime = exp.xis[0].derivative();
    let outcomes: Vec<ReplicateOutcome> = (0..batch.reps())
        .into_par_iter()
        .map(|r| process_replicate(exp, &ctx, &quantiles, &xi_prime, batch.replicate(r)))
        .collect();
    analyze(exp, batch.n, batch.master_seed, &outcomes, batch.mala_stats)
}

fn analyze(
    exp: &Experiment,
    n: usize,
    master_seed: u64,
    outcomes: &[ReplicateOutcome],
    mala: Option<MalaStats>,
) -> Result<NReport> {
    let pred = &exp.prediction;
    let cfg = &exp.config;
    let d = pred.dim();
    let terms: Vec<SteinTerms> = outcomes.iter().filter_map(|o| o.terms.clone()).collect();
    let outliers = outcomes.len() - terms.len();
    if terms.is_empty() {
        return Err(
            Error::rejected("every replicate left the neighbourhood U").in_stage("stein terms")
        );
    }
    let summary = summarize_terms(&terms, outliers, pred, cfg.p);
    let stein = stein_block(pred, &terms, summary, cfg.p)?;

    let columns: Vec<Vec<f64>> = (0..d)
        .map(|i| outcomes.iter().map(|o| o.statistics[i]).collect())
        .collect();
    let empirical = empirical_block(&columns, pred);
    let distances =
        distance_entries(exp, &columns, master_seed).map_err(|e| e.in_stage("distances"))?;

    let flags: Vec<(bool, bool, f64)> = outcomes.iter().map(|o| o.rigidity).collect();
    let xi_prime = exp.xis[0].derivative();
    let gamma_xx_limit = exp.eq.integral(|x| xi_prime.eval(x).powi(2));
    let gamma_xx_min = outcomes
        .iter()
        .map(|o| o.gamma_xx)
        .fold(f64::INFINITY, f64::min);
    let half = outcomes
        .iter()
        .filter(|o| o.gamma_xx <= 0.5 * gamma_xx_limit)
        .count();
    let diagnostics = DiagnosticsBlock {
        rigidity_eps: cfg.rigidity_eps,
        rigidity: aggregate_rigidity(&flags),
        outliers,
        mala,
        gamma_xx_limit,
        gamma_xx_min,
        gamma_xx_half_rate: half as f64 / outcomes.len() as f64,
    };
    Ok(NReport {
        format_version: FORMAT_VERSION,
        config_hash: exp.config_hash.clone(),
        config: cfg.clone(),
        n,
        master_seed,
        prediction: pred.into(),
        empirical,
        stein,
        distances,
        diagnostics,
    })
}

fn stein_block(
    pred: &Prediction,
    terms: &[SteinTerms],
    summary: SteinSummary,
    p: f64,
) -> Result<SteinBlock> {
    let l1 = if p == 1.0 {
        summary.clone()
    } else {
        summarize_terms(terms, summary.outliers, pred, 1.0)
    };
    let sigma_op = pred.sigma_op();
    let gamma_coeff = sigma_op * pred.c_inverse_hs() * pred.gaussian_moment;
    let bound_wasserstein = stein_bound(
        pred,
        summary.gamma_dev,
        summary.z_norm,
        p,
        BoundMode::Wasserstein,
    )?;
    let bound_wasserstein_stderr =
        (gamma_coeff * summary.gamma_dev_stderr).hypot(sigma_op * summary.z_norm_stderr);
    let (bound_tv, bound_tv_stderr, bound_tv_sigma_reading) = if pred.dim() == 1 {
        let sigma2 = pred.c[0][0];
        let half_sqrt_pi = std::f64::consts::PI.sqrt() / 2.0;
        let tv = stein_bound(pred, l1.gamma_dev, l1.z_norm, 1.0, BoundMode::Tv)?;
        let se = (2.0 / sigma2 * l1.gamma_dev_stderr).hypot(half_sqrt_pi * l1.z_norm_stderr);
        let alt = l1
            .gamma_dev_sigma_reading
            .map(|g| 2.0 / sigma2 * g + half_sqrt_pi * l1.z_norm);
        (Some(tv), Some(se), alt)
    } else {
        (None, None, None)
    };
    Ok(SteinBlock {
        z_l1: l1.z_norm,
        z_l1_stderr: l1.z_norm_stderr,
        gamma_dev_l1: l1.gamma_dev,
        gamma_dev_l1_stderr: l1.gamma_dev_stderr,
        summary,
        bound_wasserstein,
        bound_wasserstein_stderr,
        bound_tv,
        bound_tv_stderr,
        bound_tv_sigma_reading,
    })
}

fn empirical_block(columns: &[Vec<f64>], pred: &Prediction) -> EmpiricalBlock {
    let d = columns.len();
    let r = columns[0].len();
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|c| crate::sampler::batch_means(c))
        .collect();
    let mean: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let covariance = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    columns[i]
                        .iter()
                        .zip(&columns[j])
                        .map(|(a, b)| (a - mean[i]) * (b - mean[j]))
                        .sum::<f64>()
                        / (r - 1) as f64
                })
                .collect()
        })
        .collect();
    let (ks_statistic, ks_p_value) = if d == 1 {
        let (s, p) = ks_normality(&columns[0], pred.m_master[0], pred.c[0][0].sqrt());
        (Some(s), Some(p))
    } else {
        (None, None)
    };
    EmpiricalBlock {
        mean,
        mean_stderr: stats.iter().map(|s| s.1).collect(),
        covariance,
        ks_statistic,
        ks_p_value,
    }
}

fn distance_entries(
    exp: &Experiment,
    columns: &[Vec<f64>],
    master_seed: u64,
) -> Result<Vec<DistanceEntry>> {
    let pred = &exp.prediction;
    let d = pred.dim();
    let reps = columns[0].len();
    let mut out = Vec::new();
    let mut seed_index = 0u64;
    let mut next_seed = || {
        seed_index += 1;
        replicate_seed(master_seed, METRIC_SEED_OFFSET + seed_index)
    };
    for &kind in &exp.config.metrics {
        for (i, column) in columns.iter().enumerate() {
            let (m, sigma) = (pred.m_master[i], pred.c[i][i].sqrt());
            let value = measure_distance(kind, column, m, sigma, next_seed())?;
            let floor = bias_floor(kind, reps, m, sigma, next_seed())?;
            out.push(entry(
                kind,
                if d == 1 { "univariate" } else { "marginal" },
                (d > 1).then_some(i),
                value,
                floor,
            ));
        }
        if d > 1 {
            if let Some(p) = wasserstein_exponent(kind) {
                let samples: Vec<Vec<f64>> = (0..reps)
                    .map(|r| columns.iter().map(|c| c[r]).collect())
                    .collect();
                let value = sliced_measured(&samples, pred, p, exp.config.projections, next_seed());
                let floor_samples = gaussian_samples(pred, reps, next_seed());
                let floor =
                    sliced_measured(&floor_samples, pred, p, exp.config.projections, next_seed());
                out.push(entry(
                    kind,
                    "sliced, lower-bound surrogate",
                    None,
                    value,
                    floor,
                ));
            }
        }
    }
    Ok(out)
}

fn entry(
    kind: DistanceKind,
    estimator: &str,
    component: Option<usize>,
    value: Measured,
    floor: Measured,
) -> DistanceEntry {
    DistanceEntry {
        kind,
        estimator: estimator.to_string(),
        component,
        value: value.value,
        stderr: value.stderr,
        floor: floor.value,
        floor_stderr: floor.stderr,
    }
}

fn wasserstein_exponent(kind: DistanceKind) -> Option<f64> {
    match kind {
        DistanceKind::W1 => Some(1.0),
        DistanceKind::Wp(p) => Some(p),
        _ => None,
    }
}

/// Sliced distance over fixed directions, with a bootstrap standard error
/// that reuses those directions.
fn sliced_measured(
    samples: &[Vec<f64>],
    pred: &Prediction,
    p: f64,
    projections: usize,
    seed: u64,
) -> Measured {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..projections)
        .map(|_| random_direction(&mut rng, pred.dim()))
        .collect();
    let eval = |s: &[Vec<f64>]| {
        dirs.iter()
            .map(|u| projected_distance(s, pred, u, p))
            .sum::<f64>()
            / dirs.len() as f64
    };
    let value = eval(samples);
    let r = samples.len();
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let resample: Vec<Vec<f64>> = (0..r)
                .map(|_| samples[rng.gen_range(0..r)].clone())
                .collect();
            eval(&resample)
        })
        .collect();
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;
    Measured {
        value,
        stderr: var.sqrt(),
    }
}

/// Exact draws from `N(m_master, C)`.
fn gaussian_samples(pred: &Prediction, reps: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = pred.dim();
    (0..reps)
        .map(|_| {
            let z: Vec<f64> = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            (0..d)
                .map(|i| pred.m_master[i] + (0..d).map(|j| pred.sigma[i][j] * z[j]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Rate table of one metric across reports of a single configuration.
pub fn rates_from_reports(reports: &[NReport], kind: DistanceKind) -> Result<DistanceReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::rejected("no reports given"))?;
    for r in reports {
        if r.format_version != FORMAT_VERSION {
            return Err(Error::rejected(format!(
                "report for n = {} has format version {}, expected {FORMAT_VERSION}",
                r.n, r.format_version
            )));
        }
        if r.config_hash != first.config_hash {
            return Err(Error::rejected(
                "reports come from different configurations",
            ));
        }
    }
    let mut rows: Vec<(usize, f64, f64)> = reports
        .iter()
        .map(|r| {
            r.primary(kind)
                .map(|e| (r.n, e.value, e.stderr))
                .ok_or_else(|| {
                    Error::rejected(format!("report for n = {} lacks metric {kind}", r.n))
                })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.0);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::rejected("duplicate n among reports"));
    }
    DistanceReport::new(
        kind,
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
    )
}

/// CSV with columns `n,distance,stderr,slope,slope_stderr`.
pub fn rates_csv(report: &DistanceReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("n,distance,stderr,slope,slope_stderr\n");
    for i in 0..report.n_grid.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            report.n_grid[i],
            report.distance[i],
            report.stderr[i],
            opt(report.fitted_slope),
            opt(report.slope_stderr)
        ));
    }
    out
}

pub fn load_report(path: &Path) -> Result<NReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn rates_file_name(kind: DistanceKind) -> String {
    format!("rates_{}.csv", kind.to_string().replace(':', "_"))
}

/// Run every `n` of the grid, write `config.json`, `report_n{n}.json` and one
/// `rates_{metric}.csv` per metric into the output directory.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutput> {
    let dir = &exp.config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_stage("output"))?;
    write_json(&dir.join("config.json"), &exp.config)?;
    let mut reports = Vec::with_capacity(exp.config.n_grid.len());
    for &n in &exp.config.n_grid {
        let report = run_n(exp, n)?;
        write_json(&dir.join(format!("report_n{n}.json")), &report)?;
        reports.push(report);
    }
    let mut rates = Vec::new();
    for &kind in &exp.config.metrics {
        let table = rates_from_reports(&reports, kind).map_err(|e| e.in_stage("rates"))?;
        fs::write(dir.join(rates_file_name(kind)), rates_csv(&table))?;
        rates.push(table);
    }
    Ok(RunOutput { reports, rates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{"potential": "poly:0,0,1", "beta": 2, "xis": ["cheb:0,1"], "n_grid": [8, 16], "reps": 200}"#.to_string()
    }

    #[test]
    fn minimal_config_validates() {
        let exp = validate_config(&minimal()).unwrap();
        assert_eq!(exp.config.sampler, SamplerKind::Tridiagonal);
        assert_eq!(exp.config.metrics, vec![DistanceKind::W1]);
        assert!((exp.prediction.c[0][0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn decreasing_grid_is_rejected() {
        let text = minimal().replace("[8, 16]", "[64, 32]");
        let err = validate_config(&text).unwrap_err();
        assert!(err.to_string().contains("n_grid not increasing"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unnormalized_potential_is_rejected() {
        let text = minimal().replace("poly:0,0,1", "poly:0,0,1,0,1");
        let err = validate_config(&text).unwrap_err();
        assert!(matches!(err.root(), Error::SupportNotNormalized { .. }));
        assert!(err.to_string().contains("normalize_support"));
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = validate_config(&minimal()).unwrap().config;
        let h = a.hash();
        a.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), h);
        a.seed = 7;
        assert_ne!(a.hash(), h);
    }
}
