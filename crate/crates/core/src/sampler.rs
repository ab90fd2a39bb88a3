//! Sampling the beta-ensemble `exp(-beta H_n)` with
//! `H_n = sum_{i<j} log 1/|l_i - l_j| + n sum V(l_i)`: an exact tridiagonal
//! model for `V(x) = x^2` and a Metropolis-adjusted Langevin chain for general
//! `V`. Also the Dyson generator and carré du champ on linear statistics, and
//! the binary batch format.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{Equilibrium, Potential};
use crate::error::{Error, Result};
use crate::funcspace::ChebSeries;
use crate::master::{pair_divided_difference_sum, DIAGONAL_EPS};

/// Number of independent MALA chains a batch is split across. Fixed so that
/// the output does not depend on the worker count.
pub const MALA_CHAINS: usize = 16;
/// Proposals bringing two coordinates closer than this are rejected.
pub const COLLISION_GAP: f64 = 1e-12;
pub const LOW_ACCEPTANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Tridiagonal,
    Mala,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MalaMeta {
    pub steps: usize,
    pub step_size: f64,
    pub acceptance_rate: f64,
    /// Set when the acceptance rate is below 0.1 (step size too large).
    pub low_acceptance: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub lambdas: Vec<f64>,
    pub n: usize,
    pub beta: f64,
    pub method: SamplerKind,
    pub seed: u64,
    pub mala_meta: Option<MalaMeta>,
}

/// Energy value; coincident coordinates give a distinct collision marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Energy {
    Finite(f64),
    Collision,
}

/// `sum_{i<j} log 1/|l_i - l_j| + n_scale sum V(l_i)`.
pub fn energy(p: &Potential, lambdas: &[f64], n_scale: usize) -> Energy {
    let mut interaction = 0.0;
    for (i, &a) in lambdas.iter().enumerate() {
        for &b in &lambdas[i + 1..] {
            let gap = (a - b).abs();
            if gap == 0.0 {
                return Energy::Collision;
            }
            interaction -= gap.ln();
        }
    }
    let confinement: f64 = lambdas.iter().map(|&x| p.v.eval(x)).sum();
    Energy::Finite(interaction + n_scale as f64 * confinement)
}

/// Per-replicate seed derived from the master seed by a splitmix64 step.
pub fn replicate_seed(master_seed: u64, index: u64) -> u64 {
    let mut z =
        master_seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit QL method.
/// `diag` is overwritten with the unsorted eigenvalues; `off[i]` couples `i` and `i + 1`.
pub fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n <= 1 {
        return Ok(());
    }
    assert!(off.len() >= n - 1);
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    let d = diag;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::EigenNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn sort_strict(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// One tridiagonal-model draw with joint density proportional to
/// `|Delta(l)|^beta exp(-beta n sum l_i^2)`.
pub fn sample_gbe_with(rng: &mut impl Rng, n: usize, beta: f64) -> Result<Vec<f64>> {
    let mut diag: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut off: Vec<f64> = (1..n)
        .map(|i| {
            let dof = beta * (n - i) as f64;
            ChiSquared::new(dof)
                .map(|c| (c.sample(rng) / 2.0).sqrt())
                .unwrap_or(0.0)
        })
        .collect();
    tridiagonal_eigenvalues(&mut diag, &mut off)?;
    let scale = 1.0 / (2.0 * beta * n as f64).sqrt();
    diag.iter_mut().for_each(|x| *x *= scale);
    Ok(sort_strict(diag))
}

pub fn sample_gbe(n: usize, beta: f64, seed: u64) -> Result<EnsembleSample> {
    check_n_beta(n, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas = sample_gbe_with(&mut rng, n, beta)?;
    Ok(EnsembleSample {
        lambdas,
        n,
        beta,
        method: SamplerKind::Tridiagonal,
        seed,
        mala_meta: None,
    })
}

fn check_n_beta(n: usize, beta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::rejected("n must be positive"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::rejected(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(())
}

/// State of a MALA chain targeting `exp(-beta H_n)` on ordered configurations.
struct MalaChain<'a> {
    potential: &'a Potential,
    beta: f64,
    step: f64,
    x: Vec<f64>,
    drift: Vec<f64>,
    confinement: Vec<f64>,
    proposal: Vec<f64>,
    proposal_drift: Vec<f64>,
    proposal_confinement: Vec<f64>,
    accepted: usize,
    attempted: usize,
}

/// Drift `-beta grad H_n` at `x` into `out`.
fn mala_drift(p: &Potential, beta: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let nf = n as f64;
    for (i, o) in out.iter_mut().enumerate() {
        *o = -nf * p.v1.eval(x[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let inv = 1.0 / (x[i] - x[j]);
            out[i] += inv;
            out[j] -= inv;
        }
    }
    out.iter_mut().for_each(|o| *o *= beta);
}

/// `log prod_{i<j} |y_i - y_j| / |x_i - x_j|` with periodic renormalization.
fn log_vandermonde_ratio(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut log_total = 0.0;
    let mut product = 1.0;
    for i in 0..n {
        for j in (i + 1)..n {
            product *= (y[i] - y[j]) / (x[i] - x[j]);
            if !(1e-150..=1e150).contains(&product) {
                log_total += product.ln();
                product = 1.0;
            }
        }
    }
    log_total + product.ln()
}

fn strictly_ordered(y: &[f64]) -> bool {
    y.windows(2).all(|w| w[1] - w[0] > COLLISION_GAP)
}

impl<'a> MalaChain<'a> {
    fn new(potential: &'a Potential, beta: f64, step: f64, init: Vec<f64>) -> Self {
        let n = init.len();
        let mut drift = vec![0.0; n];
        mala_drift(potential, beta, &init, &mut drift);
        let confinement = init.iter().map(|&x| potential.v.eval(x)).collect();
        MalaChain {
            potential,
            beta,
            step,
            x: init,
            drift,
            confinement,
            proposal: vec![0.0; n],
            proposal_drift: vec![0.0; n],
            proposal_confinement: vec![0.0; n],
            accepted: 0,
            attempted: 0,
        }
    }

    fn advance(&mut self, rng: &mut impl Rng) {
        self.attempted += 1;
        let h = self.step;
        if h == 0.0 {
            return;
        }
        let noise = (2.0 * h).sqrt();
        for i in 0..self.x.len() {
            let z: f64 = rng.sample(StandardNormal);
            self.proposal[i] = self.x[i] + h * self.drift[i] + noise * z;
        }
        let u: f64 = rng.gen();
        if !strictly_ordered(&self.proposal) {
            return;
        }
        mala_drift(
            self.potential,
            self.beta,
            &self.proposal,
            &mut self.proposal_drift,
        );
        for (c, &y) in self.proposal_confinement.iter_mut().zip(&self.proposal) {
            *c = self.potential.v.eval(y);
        }
        let n = self.x.len() as f64;
        let delta_conf: f64 = self
            .proposal_confinement
            .iter()
            .zip(&self.confinement)
            .map(|(a, b)| a - b)
            .sum();
        // log pi(y) - log pi(x) with pi = exp(-beta H_n).
        let log_target =
            self.beta * (log_vandermonde_ratio(&self.x, &self.proposal) - n * delta_conf);
        let mut forward = 0.0;
        let mut backward = 0.0;
        for i in 0..self.x.len() {
            let f = self.proposal[i] - self.x[i] - h * self.drift[i];
            let b = self.x[i] - self.proposal[i] - h * self.proposal_drift[i];
            forward += f * f;
            backward += b * b;
        }
        let log_alpha = log_target + (forward - backward) / (4.0 * h);
        if u.ln() < log_alpha {
            std::mem::swap(&mut self.x, &mut self.proposal);
            std::mem::swap(&mut self.drift, &mut self.proposal_drift);
            std::mem::swap(&mut self.confinement, &mut self.proposal_confinement);
            self.accepted += 1;
        }
    }

    fn acceptance_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

/// Default MALA step size `0.1 / (beta n^2)`.
pub fn default_step_size(n: usize, beta: f64) -> f64 {
    0.1 / (beta * (n * n) as f64)
}

/// Run a MALA chain for `steps` steps from `init` (default: equilibrium quantiles).
pub fn sample_mala(
    eq: &Equilibrium,
    n: usize,
    beta: f64,
    steps: usize,
    step_size: f64,
    seed: u64,
    init: Option<&[f64]>,
) -> Result<EnsembleSample> {
    check_n_beta(n, beta)?;
    if steps == 0 {
        return Err(Error::rejected("MALA needs at least one step"));
    }
    if !(step_size >= 0.0 && step_size.is_finite()) {
        return Err(Error::rejected(format!(
            "invalid MALA step size {step_size}"
        )));
    }
    let start = match init {
        Some(v) => {
            if v.len() != n {
                return Err(Error::rejected(
                    "initial configuration has the wrong length",
                ));
            }
            let sorted = sort_strict(v.to_vec());
            if !strictly_ordered(&sorted) {
                return Err(Error::Collision);
            }
            sorted
        }
        None => mala_initial_state(eq, n),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = MalaChain::new(&eq.potential, beta, step_size, start);
    for _ in 0..steps {
        chain.advance(&mut rng);
    }
    let acceptance_rate = chain.acceptance_rate();
    let meta = MalaMeta {
        steps,
        step_size,
        acceptance_rate,
        low_acceptance: step_size > 0.0 && acceptance_rate < LOW_ACCEPTANCE,
    };
    Ok(EnsembleSample {
        lambdas: chain.x,
        n,
        beta,
        method: SamplerKind::Mala,
        seed,
        mala_meta: Some(meta),
    })
}

/// Equilibrium quantiles at levels `(j - 1/2)/n`; strictly inside the support.
fn mala_initial_state(eq: &Equilibrium, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|j| eq.quantile((j as f64 - 0.5) / n as f64))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MalaParams {
    pub step_size: Option<f64>,
    /// Burn-in steps per chain; default `50 n`.
    pub burn_in: Option<usize>,
    /// Steps between retained replicates; default `5 n`.
    pub thin: Option<usize>,
}

impl MalaParams {
    pub fn resolve(&self, n: usize, beta: f64) -> (f64, usize, usize) {
        (
            self.step_size.unwrap_or_else(|| default_step_size(n, beta)),
            self.burn_in.unwrap_or(50 * n),
            self.thin.unwrap_or(5 * n).max(1),
        )
    }
}

/// What to sample: model, size, temperature, replicate count and seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub method: SamplerKind,
    pub n: usize,
    pub beta: f64,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub mala: MalaParams,
}

/// Aggregated MALA diagnostics over all chains of a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MalaStats {
    pub step_size: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub acceptance_rate: f64,
    pub low_acceptance: bool,
}

/// Draw every replicate of `spec` and map it through `f` without storing the
/// configurations. Results are in replicate-index order and independent of
/// the worker count.
pub fn map_replicates<T, F>(
    spec: &BatchSpec,
    eq: Option<&Equilibrium>,
    f: F,
) -> Result<(Vec<T>, Option<MalaStats>)>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    check_n_beta(spec.n, spec.beta)?;
    match spec.method {
        SamplerKind::Tridiagonal => {
            let out = (0..spec.reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(replicate_seed(spec.master_seed, r as u64));
                    sample_gbe_with(&mut rng, spec.n, spec.beta).map(|l| f(&l))
                })
                .collect::<Result<Vec<T>>>()?;
            Ok((out, None))
        }
        SamplerKind::Mala => {
            let eq = eq.ok_or_else(|| Error::rejected("MALA sampling needs an equilibrium"))?;
            let (step, burn_in, thin) = spec.mala.resolve(spec.n, spec.beta);
            let per_chain = spec.reps.div_ceil(MALA_CHAINS);
            let chains: Vec<(Vec<T>, usize, usize)> = (0..MALA_CHAINS)
                .into_par_iter()
                .map(|c| {
                    let start = c * per_chain;
                    let count = per_chain.min(spec.reps.saturating_sub(start));
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(replicate_seed(spec.master_seed, c as u64));
                    let mut chain = MalaChain::new(
                        &eq.potential,
                        spec.beta,
                        step,
                        mala_initial_state(eq, spec.n),
                    );
                    let mut out = Vec::with_capacity(count);
                    if count > 0 {
                        for _ in 0..burn_in {
                            chain.advance(&mut rng);
                        }
                        for _ in 0..count {
                            for _ in 0..thin {
                                chain.advance(&mut rng);
                            }
                            out.push(f(&chain.x));
                        }
                    }
                    (out, chain.accepted, chain.attempted)
                })
                .collect();
            let (mut accepted, mut attempted) = (0usize, 0usize);
            let mut out = Vec::with_capacity(spec.reps);
            for (values, a, t) in chains {
                accepted += a;
                attempted += t;
                out.extend(values);
            }
            let acceptance_rate = if attempted == 0 {
                0.0
            } else {
                accepted as f64 / attempted as f64
            };
            let stats = MalaStats {
                step_size: step,
                burn_in,
                thin,
                chains: MALA_CHAINS,
                acceptance_rate,
                low_acceptance: step > 0.0 && acceptance_rate < LOW_ACCEPTANCE,
            };
            Ok((out, Some(stats)))
        }
    }
}

/// Replicates stored contiguously, `reps x n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub n: usize,
    pub beta: f64,
    /// Unknown for batches read back from disk.
    pub method: Option<SamplerKind>,
    pub master_seed: u64,
    pub mala_stats: Option<MalaStats>,
    data: Vec<f64>,
}

const BATCH_MAGIC: &[u8; 4] = b"BELS";
const BATCH_VERSION: u32 = 1;

impl SampleBatch {
    pub fn from_replicates(
        n: usize,
        beta: f64,
        master_seed: u64,
        replicates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n * replicates.len());
        for r in &replicates {
            if r.len() != n {
                return Err(Error::rejected("replicate length differs from n"));
            }
            data.extend_from_slice(r);
        }
        Ok(SampleBatch {
            n,
            beta,
            method: None,
            master_seed,
            mala_stats: None,
            data,
        })
    }

    pub fn reps(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.data.len() / self.n
        }
    }

    pub fn replicate(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn sample(&self, r: usize) -> EnsembleSample {
        EnsembleSample {
            lambdas: self.replicate(r).to_vec(),
            n: self.n,
            beta: self.beta,
            method: self.method.unwrap_or(SamplerKind::Tridiagonal),
            seed: replicate_seed(self.master_seed, r as u64),
            mala_meta: None,
        }
    }

    /// Every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SampleBatch {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= factor);
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(BATCH_MAGIC)?;
        w.write_all(&BATCH_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.beta.to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;
        w.write_all(&(self.reps() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.data.len());
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BATCH_MAGIC {
            return Err(Error::BatchFormat("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != BATCH_VERSION {
            return Err(Error::BatchFormat(format!("unsupported version {version}")));
        }
        r.read_exact(&mut u32buf)?;
        let n = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u64buf)?;
        let beta = f64::from_le_bytes(u64buf);
        r.read_exact(&mut u64buf)?;
        let master_seed = u64::from_le_bytes(u64buf);
        r.read_exact(&mut u32buf)?;
        let reps = u32::from_le_bytes(u32buf) as usize;
        if n == 0 || !(beta > 0.0) {
            return Err(Error::BatchFormat(format!(
                "invalid header n = {n}, beta = {beta}"
            )));
        }
        let mut bytes = vec![0u8; 8 * n * reps];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::BatchFormat("truncated data".into()))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(SampleBatch {
            n,
            beta,
            method: None,
            master_seed,
            mala_stats: None,
            data,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Draw and store a full batch.
pub fn generate_batch(spec: &BatchSpec, eq: Option<&Equilibrium>) -> Result<SampleBatch> {
    let (reps, stats) = map_replicates(spec, eq, |l| l.to_vec())?;
    let mut batch = SampleBatch::from_replicates(spec.n, spec.beta, spec.master_seed, reps)?;
    batch.method = Some(spec.method);
    batch.mala_stats = stats;
    Ok(batch)
}

/// A function with its first two derivatives, for linear statistics `sum f(l_i)`.
#[derive(Clone, Debug)]
pub struct SmoothFunction {
    pub f: ChebSeries,
    pub fp: ChebSeries,
    pub fpp: ChebSeries,
}

impl SmoothFunction {
    pub fn new(f: ChebSeries) -> Self {
        let fp = f.derivative();
        let fpp = fp.derivative();
        SmoothFunction { f, fp, fpp }
    }
}

fn has_collision(lambdas: &[f64]) -> bool {
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[1] - w[0] < DIAGONAL_EPS)
}

/// Dyson generator on `F = sum f(l_i)`:
/// `sum f'' - beta n sum V' f' + (beta/2) sum_{i != j} (f'(l_i) - f'(l_j)) / (l_i - l_j)`.
pub fn apply_generator(
    p: &Potential,
    f: &SmoothFunction,
    lambdas: &[f64],
    beta: f64,
) -> Result<f64> {
    if has_collision(lambdas) {
        return Err(Error::Collision);
    }
    Ok(generator_unchecked(p, f, lambdas, beta))
}

pub(crate) fn generator_unchecked(
    p: &Potential,
    f: &SmoothFunction,
    lambdas: &[f64],
    beta: f64,
) -> f64 {
    let n = lambdas.len() as f64;
    let values = f.fp.eval_many(lambdas);
    let derivs = f.fpp.eval_many(lambdas);
    let diag: f64 = derivs.iter().sum();
    let drift: f64 = lambdas
        .iter()
        .zip(&values)
        .map(|(&l, &v)| p.v1.eval(l) * v)
        .sum();
    let pairs = pair_divided_difference_sum(lambdas, &values, &derivs);
    diag - beta * n * drift + 0.5 * beta * pairs
}

/// `Gamma[sum phi(l_i), sum psi(l_i)] = sum phi'(l_i) psi'(l_i)` from derivative series.
pub fn carre_du_champ(fp: &ChebSeries, gp: &ChebSeries, lambdas: &[f64]) -> f64 {
    lambdas.iter().map(|&l| fp.eval(l) * gp.eval(l)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbpResult {
    /// Mean of `Gamma[F, G] + F LG` over replicates.
    pub residual: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// Number of contiguous blocks used for batch-means standard errors.
pub const BATCH_MEANS_BLOCKS: usize = 50;

/// Mean and batch-means standard error; blocks absorb serial correlation of
/// replicates drawn from the same chain.
pub fn batch_means(values: &[f64]) -> (f64, f64) {
    let r = values.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    let blocks = BATCH_MEANS_BLOCKS.min(r);
    if blocks < 2 {
        return (mean, f64::NAN);
    }
    let block_means: Vec<f64> = (0..blocks)
        .map(|b| {
            let (s, e) = (b * r / blocks, (b + 1) * r / blocks);
            values[s..e].iter().sum::<f64>() / (e - s) as f64
        })
        .collect();
    let bm = block_means.iter().sum::<f64>() / blocks as f64;
    let var = block_means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (blocks - 1) as f64;
    (mean, (var / blocks as f64).sqrt())
}

/// Per-replicate integration-by-parts residual `Gamma[F, G] + F LG` with
/// `F, G` centered by `n int f d mu_V`.
pub fn ibp_residual(
    eq: &Equilibrium,
    f: &SmoothFunction,
    g: &SmoothFunction,
    lambdas: &[f64],
    beta: f64,
) -> f64 {
    let n = lambdas.len() as f64;
    let f_center = n * eq.integral(|x| f.f.eval(x));
    let big_f: f64 = lambdas.iter().map(|&l| f.f.eval(l)).sum::<f64>() - f_center;
    let gamma = carre_du_champ(&f.fp, &g.fp, lambdas);
    gamma + big_f * generator_unchecked(&eq.potential, g, lambdas, beta)
}

/// Monte Carlo check of `E Gamma[F, G] = -E[F LG]`.
pub fn ibp_check(
    eq: &Equilibrium,
    f: &SmoothFunction,
    g: &SmoothFunction,
    batch: &SampleBatch,
) -> IbpResult {
    let values: Vec<f64> = batch
        .iter()
        .map(|l| ibp_residual(eq, f, g, l, batch.beta))
        .collect();
    let (residual, stderr) = batch_means(&values);
    IbpResult {
        residual,
        stderr,
        reps: values.len(),
    }
}
