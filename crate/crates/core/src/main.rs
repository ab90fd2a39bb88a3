use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use loggas::clt::{alpha_regularity, negative_moment_probe};
use loggas::equilibrium::{
    build_equilibrium, normalize_support, Equilibrium, Potential, DEFAULT_DELTA, WORKING_INTERVAL,
};
use loggas::experiment::{
    load_report, rates_csv, rates_from_reports, run_experiment, validate_config, Experiment,
    ExperimentConfig,
};
use loggas::master::invert_theta;
use loggas::metrics::{bias_floor, density_sup_distance, measure_distance, DistanceKind};
use loggas::sampler::{generate_batch, BatchSpec, MalaParams, SampleBatch, SamplerKind};
use loggas::{Error, FunctionSpec, Result};

#[derive(Parser)]
#[command(
    name = "loggas",
    version,
    about = "Central limit theorem laboratory for one-cut beta-ensembles"
)]
struct Cli {
    /// Master seed for sampling and resampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (or directory for `run`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the equilibrium measure of a potential.
    Equilibrium {
        #[arg(long)]
        potential: String,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Rescale and shift the potential so its support becomes [-1, 1] first.
        #[arg(long)]
        normalize: bool,
    },
    /// Invert the master operator for one test function.
    Invert {
        #[arg(long)]
        eq: PathBuf,
        #[arg(long)]
        xi: String,
    },
    /// Draw a batch of ensemble configurations.
    Sample {
        /// Equilibrium file; required for MALA.
        #[arg(long)]
        eq: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long, value_enum, default_value = "tridiagonal")]
        sampler: SamplerArg,
        #[command(flatten)]
        mala: MalaArgs,
    },
    /// Prediction, decomposition, bounds and diagnostics for a stored batch.
    Clt {
        #[command(flatten)]
        common: BatchArgs,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Distances to report (w1, wp:P, tv, density_sup:R).
        #[arg(long = "metric", default_value = "w1")]
        metrics: Vec<String>,
    },
    /// Rate table of one metric across reports of a single run.
    Rates {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "w1")]
        kind: String,
    },
    /// Density and density-derivative distances to the predicted Gaussian.
    Super {
        #[command(flatten)]
        common: BatchArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        orders: Vec<usize>,
    },
    /// Negative-moment probe and sublevel-set regularity of xi'.
    Probe {
        #[arg(long)]
        eq: PathBuf,
        #[arg(long)]
        xi: String,
        /// Batch for the negative-moment probe; omitted means regularity only.
        #[arg(long)]
        batch: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
        eps: Vec<f64>,
    },
    /// Run a full experiment from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SamplerArg {
    Tridiagonal,
    Mala,
}

#[derive(Args)]
struct MalaArgs {
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    eq: PathBuf,
    #[arg(long = "xi", required = true)]
    xis: Vec<String>,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    batch: PathBuf,
}

fn read_eq(path: &Path) -> Result<Equilibrium> {
    Equilibrium::from_json(&fs::read_to_string(path)?)
}

fn emit(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out, &text)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Experiment over a stored batch: the configuration only carries what the
/// analysis needs.
fn batch_experiment(
    common: &BatchArgs,
    p: f64,
    metrics: Vec<DistanceKind>,
    batch: &SampleBatch,
    seed: u64,
) -> Result<Experiment> {
    let eq = read_eq(&common.eq)?;
    let config = ExperimentConfig {
        potential: common.eq.display().to_string(),
        delta: eq.delta,
        beta: common.beta,
        xis: common.xis.clone(),
        n_grid: vec![batch.n],
        reps: batch.reps(),
        sampler: batch.method.unwrap_or(SamplerKind::Mala),
        mala: MalaParams::default(),
        p,
        seed,
        metrics,
        output_dir: PathBuf::new(),
        mollify: None,
        rigidity_eps: 0.1,
        projections: 64,
        cache: false,
    };
    Experiment::assemble(config, eq)
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Equilibrium {
            potential,
            delta,
            normalize,
        } => {
            let mut p = Potential::parse(&potential)?;
            if normalize {
                let norm = normalize_support(&p)?;
                eprintln!(
                    "normalized: scale {}, center {}, {} iterations",
                    norm.scale, norm.center, norm.iterations
                );
                p = norm.potential;
            }
            emit(out, &build_equilibrium(&p, delta)?)
        }
        Command::Invert { eq, xi } => {
            let eq = read_eq(&eq)?;
            let xi = xi.parse::<FunctionSpec>()?.to_series(WORKING_INTERVAL)?;
            emit(out, &invert_theta(&eq, &xi)?)
        }
        Command::Sample {
            eq,
            n,
            beta,
            reps,
            sampler,
            mala,
        } => {
            let method = match sampler {
                SamplerArg::Tridiagonal => SamplerKind::Tridiagonal,
                SamplerArg::Mala => SamplerKind::Mala,
            };
            let eq = eq.as_deref().map(read_eq).transpose()?;
            let mala = MalaParams {
                step_size: mala.step_size,
                burn_in: mala.burn_in,
                thin: mala.thin,
            };
            let spec = BatchSpec {
                method,
                n,
                beta,
                reps,
                master_seed: cli.seed,
                mala,
            };
            let batch = generate_batch(&spec, eq.as_ref())?;
            let path = out.ok_or_else(|| Error::Config("sample needs --out".into()))?;
            batch.save(path)
        }
        Command::Clt { common, p, metrics } => {
            let metrics = metrics
                .iter()
                .map(|m| m.parse())
                .collect::<Result<Vec<DistanceKind>>>()?;
            let batch = SampleBatch::load(&common.batch)?;
            let exp = batch_experiment(&common, p, metrics, &batch, cli.seed)?;
            emit(out, &loggas::experiment::analyze_batch(&exp, &batch)?)
        }
        Command::Rates { reports, kind } => {
            let kind: DistanceKind = kind.parse()?;
            let reports = reports
                .iter()
                .map(|p| load_report(p))
                .collect::<Result<Vec<_>>>()?;
            write_text(out, &rates_csv(&rates_from_reports(&reports, kind)?))
        }
        Command::Super { common, orders } => {
            let batch = SampleBatch::load(&common.batch)?;
            let exp = batch_experiment(&common, 1.0, vec![DistanceKind::W1], &batch, cli.seed)?;
            let xs: Vec<f64> = batch
                .iter()
                .map(|l| loggas::clt::linear_statistic(&exp.xis[0], &exp.eq, l))
                .collect();
            let (m, sigma) = (exp.prediction.m_master[0], exp.prediction.c[0][0].sqrt());
            #[derive(Serialize)]
            struct Row {
                order: usize,
                value: f64,
                stderr: f64,
                floor: f64,
                floor_stderr: f64,
                bandwidth: f64,
                degenerate: bool,
            }
            let rows = orders
                .iter()
                .map(|&r| {
                    let kind = DistanceKind::DensitySup(r);
                    let single = density_sup_distance(&xs, m, sigma, r)?;
                    let measured = measure_distance(kind, &xs, m, sigma, cli.seed)?;
                    let floor = bias_floor(
                        kind,
                        xs.len(),
                        m,
                        sigma,
                        cli.seed.wrapping_add(r as u64 + 1),
                    )?;
                    Ok(Row {
                        order: r,
                        value: measured.value,
                        stderr: measured.stderr,
                        floor: floor.value,
                        floor_stderr: floor.stderr,
                        bandwidth: single.bandwidth,
                        degenerate: single.degenerate,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(out, &rows)
        }
        Command::Probe { eq, xi, batch, eps } => {
            let eq = read_eq(&eq)?;
            let xi_prime = xi
                .parse::<FunctionSpec>()?
                .to_series(WORKING_INTERVAL)?
                .derivative();
            #[derive(Serialize)]
            struct Probe {
                negative_moment: Option<Vec<(f64, f64)>>,
                gamma_xx_limit: f64,
                alpha: loggas::clt::AlphaReport,
            }
            let negative_moment = batch
                .map(|b| SampleBatch::load(&b).map(|b| negative_moment_probe(&b, &xi_prime, &eps)))
                .transpose()?;
            emit(
                out,
                &Probe {
                    negative_moment,
                    gamma_xx_limit: eq.integral(|x| xi_prime.eval(x).powi(2)),
                    alpha: alpha_regularity(&xi_prime, &eps, eq.u_interval()),
                },
            )
        }
        Command::Run { config } => {
            let text = fs::read_to_string(&config)?;
            let mut exp = validate_config(&text)?;
            if let Some(dir) = out {
                exp.config.output_dir = dir.to_path_buf();
            }
            let output = run_experiment(&exp)?;
            for r in &output.reports {
                eprintln!(
                    "n = {}: mean {:?}, stein bound {:.4e}",
                    r.n, r.empirical.mean, r.stein.bound_wasserstein
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
