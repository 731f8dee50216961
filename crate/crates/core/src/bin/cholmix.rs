use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cholmix::commands::{
    cmd_benchmark, cmd_diagnose, cmd_fit, cmd_simulate, mean_losses, BenchmarkConfig, Design, FitCommand,
    SimulateConfig,
};
use cholmix::gibbs::FitConfig;
use cholmix::io::LoadOptions;
use cholmix::priors::{GammaPrior, MmMethod, PriorSpec};
use cholmix::simulation::{StructureKind, StructureSpec};
use cholmix::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cholmix",
    version,
    about = "Sparse random-effects covariance for longitudinal mixed models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a truth covariance and a dataset from it.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a long-format CSV.
    Fit(FitArgs),
    /// Compare priors by squared-error loss over simulated datasets.
    Benchmark(BenchmarkArgs),
    /// ESS and Geweke table for a chain CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for all outputs.
    #[arg(long, env = "CHOLMIX_OUTPUT_DIR", default_value = "cholmix-out")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Total iterations per chain, burn-in included.
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    chains: usize,
}

impl SamplerArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            n_iter: self.iters,
            n_burnin: self.burnin,
            thin: self.thin,
            n_chains: self.chains,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorChoice {
    Neg,
    Mm,
}

#[derive(Args)]
struct PriorArgs {
    /// Target mean of every correlation under the MM prior.
    #[arg(long, default_value_t = 0.1)]
    mm_u: f64,
    /// Target variance of every correlation under the MM prior.
    #[arg(long, default_value_t = 0.09)]
    mm_v: f64,
    /// Use the linearized MM solution without Monte-Carlo refinement.
    #[arg(long)]
    mm_closed_form: bool,
    /// Resample the covariate inclusion probability.
    #[arg(long)]
    update_p0: bool,
    /// JSON prior specification; the flags above override it.
    #[arg(long)]
    prior_config: Option<PathBuf>,
}

impl PriorArgs {
    fn base(&self) -> Result<PriorSpec> {
        let mut spec = match &self.prior_config {
            Some(path) => {
                let f = std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_reader(f).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => PriorSpec::default(),
        };
        spec.beta.update_p0 |= self.update_p0;
        Ok(spec)
    }

    fn gamma(&self, choice: PriorChoice) -> GammaPrior {
        match choice {
            PriorChoice::Neg => GammaPrior::neg(),
            PriorChoice::Mm => GammaPrior::Mm {
                u: self.mm_u,
                v: self.mm_v,
                method: if self.mm_closed_form {
                    MmMethod::ClosedForm
                } else {
                    MmMethod::Calibrated
                },
            },
        }
    }
}

#[derive(Args)]
struct DesignArgs {
    /// Number of random effects, responses x visits.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    visits: Option<usize>,
    #[arg(long)]
    responses: Option<usize>,
    #[arg(long, default_value_t = 200)]
    subjects: usize,
    /// Residual variance of the simulated responses.
    #[arg(long, default_value_t = 0.25)]
    sigma2: f64,
}

impl DesignArgs {
    /// `default_q` and `default_responses` apply when the flags are absent.
    fn design(&self, default_q: usize, default_responses: usize) -> Result<Design> {
        let responses = self.responses.unwrap_or(default_responses);
        let q = if self.q.is_none() && self.visits.is_none() {
            Some(default_q)
        } else {
            self.q
        };
        Design::resolve(self.subjects, q, self.visits, responses, self.sigma2)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "identity")]
    structure: StructureKind,
    /// First off-diagonal of the tridiagonal, circulant or random structure.
    #[arg(long)]
    off_diagonal: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Long-format CSV: subject,response,visit,y, then covariates and
    /// optional random-design columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "neg")]
    gamma_prior: PriorChoice,
    #[arg(long)]
    log_transform: bool,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// One structure, or all six when omitted.
    #[arg(long)]
    structure: Option<StructureKind>,
    /// One prior, or both when omitted.
    #[arg(long, value_enum)]
    gamma_prior: Option<PriorChoice>,
    #[arg(long, default_value_t = 3)]
    replicates: usize,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Chain CSV written by `fit`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let design = a.design.design(30, 2)?;
    let mut structure = StructureSpec::new(a.structure, design.q()).with_seed(a.seed);
    if let Some(v) = a.off_diagonal {
        structure = structure.with_off_diagonal(v);
    }
    let out = cmd_simulate(&SimulateConfig {
        structure,
        design,
        seed: a.seed,
        output_dir: a.output.output_dir,
    })?;
    println!("truth: {}", out.truth.display());
    println!("data: {}", out.data.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut prior = a.prior.base()?;
    prior.gamma = a.prior.gamma(a.gamma_prior);
    let out = cmd_fit(&FitCommand {
        input: a.input,
        output_dir: a.output.output_dir,
        load: LoadOptions {
            log_transform: a.log_transform,
            standardize: a.standardize,
        },
        fit: a.sampler.config(),
        prior,
    })?;
    let flagged = out.diagnostics.iter().filter(|r| r.is_flagged()).count();
    println!(
        "{} draws kept; sigma2 mean {:.6}; {flagged} of {} traces flagged",
        out.summary.n_samples_used,
        out.summary.sigma2_mean,
        out.diagnostics.len()
    );
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let choices = match a.gamma_prior {
        Some(c) => vec![c],
        None => vec![PriorChoice::Neg, PriorChoice::Mm],
    };
    let records = cmd_benchmark(&BenchmarkConfig {
        structures: a.structure.map_or_else(|| StructureKind::ALL.to_vec(), |s| vec![s]),
        priors: choices.into_iter().map(|c| a.prior.gamma(c)).collect(),
        replicates: a.replicates,
        design: a.design.design(10, 1)?,
        prior: a.prior.base()?,
        fit: a.sampler.config(),
        seed: a.sampler.seed,
        output_dir: a.output.output_dir.clone(),
    })?;
    println!("structure,prior,mean_sel");
    for (s, p, m) in mean_losses(&records) {
        println!("{s},{p},{m:.6e}");
    }
    println!("wrote {}", a.output.output_dir.join("losses.csv").display());
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> Result<()> {
    let rows = cmd_diagnose(&a.input, &a.output.output_dir)?;
    for r in rows.iter().filter(|r| r.is_flagged()) {
        println!(
            "chain {} {}: {} (z {:.2}, ess {:.0})",
            r.chain, r.parameter, r.flag, r.geweke_z, r.ess
        );
    }
    let flagged = rows.iter().filter(|r| r.is_flagged()).count();
    println!("{flagged} of {} traces flagged", rows.len());
    println!(
        "wrote {}",
        Path::new(&a.output.output_dir).join("diagnostics.csv").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Diagnose(a) => diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
