//! The four subcommands as library functions. The binary only parses flags.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::CovMatrix;
use crate::diagnostics::{DiagnosticRow, MIN_TRACE};
use crate::dists::RngStream;
use crate::error::{Error, Result};
use crate::gibbs::{fit, summarize, FitConfig, GammaModel, Model, PosteriorSummary};
use crate::io::{
    chain_table, diagnose_table, load_csv, read_chain_csv, write_chain_csv, write_dataset_csv, write_diagnostics_csv,
    write_matrix_csv, write_response_blocks, write_summary_json, DataShape, LoadOptions, SummaryFile,
};
use crate::priors::{GammaPrior, MmPrior, PriorSpec};
use crate::simulation::{make_structure, sel_loss, simulate_dataset, StructureKind, StructureSpec};

/// Size and noise of a simulated complete design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub subjects: usize,
    pub visits: usize,
    pub responses: usize,
    pub sigma2: f64,
}

impl Design {
    pub fn q(&self) -> usize {
        self.visits * self.responses
    }

    /// Resolves `visits` from an optional `q`: `q` must be a multiple of
    /// `responses`, and must agree with `visits` when both are given.
    pub fn resolve(
        subjects: usize,
        q: Option<usize>,
        visits: Option<usize>,
        responses: usize,
        sigma2: f64,
    ) -> Result<Self> {
        if responses == 0 {
            return Err(Error::Config("need at least one response".into()));
        }
        let visits = match (q, visits) {
            (Some(q), Some(v)) if q != v * responses => {
                return Err(Error::Config(format!(
                    "q = {q} but {responses} responses x {v} visits = {}",
                    v * responses
                )))
            }
            (_, Some(v)) => v,
            (Some(q), None) if q % responses == 0 => q / responses,
            (Some(q), None) => {
                return Err(Error::Config(format!(
                    "q = {q} is not a multiple of {responses} responses"
                )))
            }
            (None, None) => return Err(Error::Config("give q or the number of visits".into())),
        };
        if visits == 0 || subjects == 0 {
            return Err(Error::Config("need at least one subject and one visit".into()));
        }
        Ok(Design {
            subjects,
            visits,
            responses,
            sigma2,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub structure: StructureSpec,
    pub design: Design,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub truth: PathBuf,
    pub data: PathBuf,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Data stream of a simulation, disjoint from every sampler stream.
fn data_stream(seed: u64) -> RngStream {
    RngStream::new(seed).split(u64::MAX)
}

/// Writes `truth.csv` (matrix CSV) and `data.csv` (long format).
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<SimulateOutput> {
    if cfg.structure.q != cfg.design.q() {
        return Err(Error::Config(format!(
            "structure has q = {} but the design has q = {}",
            cfg.structure.q,
            cfg.design.q()
        )));
    }
    let omega = make_structure(&cfg.structure)?;
    let d = &cfg.design;
    let ds = simulate_dataset(
        &omega,
        d.subjects,
        d.visits,
        d.responses,
        d.sigma2,
        &data_stream(cfg.seed),
    )?;
    ensure_dir(&cfg.output_dir)?;
    let out = SimulateOutput {
        truth: cfg.output_dir.join("truth.csv"),
        data: cfg.output_dir.join("data.csv"),
    };
    write_matrix_csv(&out.truth, omega.matrix())?;
    write_dataset_csv(&out.data, &ds)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FitCommand {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub load: LoadOptions,
    pub fit: FitConfig,
    pub prior: PriorSpec,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub summary: PosteriorSummary,
    pub diagnostics: Vec<DiagnosticRow>,
    pub files: Vec<PathBuf>,
}

/// Loads, samples, summarizes and writes `summary.json`, `omega_hat.csv`,
/// `rho_hat.csv`, `rho_lower.csv`, `rho_upper.csv`, `chains.csv`,
/// `diagnostics.csv` and, with several response types, the
/// `rho_h{a}_h{b}.csv` blocks.
pub fn cmd_fit(cfg: &FitCommand) -> Result<FitOutput> {
    cfg.fit.validate()?;
    let ds = load_csv(&cfg.input, cfg.load)?;
    let model = Model::new(&ds, cfg.prior.clone())?;
    let chains = fit(&model, &cfg.fit)?;
    let summary = summarize(&chains)?;
    let table = chain_table(&chains, ds.x_names(), ds.z_names());
    let diagnostics = if cfg.fit.n_kept() >= MIN_TRACE {
        diagnose_table(&table)?
    } else {
        log::warn!(
            "only {} kept draws per chain; diagnostics need {MIN_TRACE}",
            cfg.fit.n_kept()
        );
        Vec::new()
    };

    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    let path = |name: &str| dir.join(name);
    let mut files = vec![
        path("summary.json"),
        path("omega_hat.csv"),
        path("rho_hat.csv"),
        path("rho_lower.csv"),
        path("rho_upper.csv"),
        path("chains.csv"),
        path("diagnostics.csv"),
    ];
    write_summary_json(
        &files[0],
        &SummaryFile::new(&summary, &cfg.prior, &cfg.fit, cfg.load, &ds),
    )?;
    write_matrix_csv(&files[1], &summary.omega_mean)?;
    write_matrix_csv(&files[2], &summary.rho_mean)?;
    write_matrix_csv(&files[3], &summary.rho_lower)?;
    write_matrix_csv(&files[4], &summary.rho_upper)?;
    write_chain_csv(&files[5], &table)?;
    write_diagnostics_csv(&files[6], &diagnostics)?;
    let shape = DataShape::of(&ds);
    if shape.n_responses > 1 && shape.has_visit_blocks() {
        files.extend(write_response_blocks(
            dir,
            &summary.rho_mean,
            shape.n_responses,
            shape.max_visit,
        )?);
    }
    Ok(FitOutput {
        summary,
        diagnostics,
        files,
    })
}

/// Reads a chain CSV and writes `diagnostics.csv` into `output_dir`.
pub fn cmd_diagnose(chain_csv: &Path, output_dir: &Path) -> Result<Vec<DiagnosticRow>> {
    let table = read_chain_csv(chain_csv)?;
    let rows = diagnose_table(&table)?;
    ensure_dir(output_dir)?;
    write_diagnostics_csv(&output_dir.join("diagnostics.csv"), &rows)?;
    Ok(rows)
}

/// Short name used in loss tables.
pub fn prior_label(g: &GammaPrior) -> &'static str {
    match g {
        GammaPrior::Neg { .. } => "neg",
        GammaPrior::Mm { .. } => "mm",
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub structures: Vec<StructureKind>,
    pub priors: Vec<GammaPrior>,
    pub replicates: usize,
    pub design: Design,
    /// Base prior; its `gamma` entry is replaced per cell.
    pub prior: PriorSpec,
    pub fit: FitConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub structure: StructureKind,
    pub prior: String,
    pub replicate: usize,
    pub sel: f64,
}

/// Posterior-mean covariance from pooled draws.
fn omega_hat(summary: &PosteriorSummary) -> Result<CovMatrix> {
    CovMatrix::new((&summary.omega_mean + summary.omega_mean.transpose()) * 0.5)
}

/// Runs every (structure, prior, replicate) cell. Both priors see the same
/// dataset for a given structure and replicate; the random structure uses
/// `seed` for its extra entries, so every replicate shares one truth.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<LossRecord>> {
    cfg.fit.validate()?;
    if cfg.replicates == 0 || cfg.structures.is_empty() || cfg.priors.is_empty() {
        return Err(Error::Config(
            "benchmark needs at least one structure, prior and replicate".into(),
        ));
    }
    let q = cfg.design.q();
    let truths: Vec<CovMatrix> = cfg
        .structures
        .iter()
        .map(|&k| make_structure(&StructureSpec::new(k, q).with_seed(cfg.seed)))
        .collect::<Result<_>>()?;
    // One prior object per gamma prior, shared by all cells.
    let models: Vec<GammaModel> = cfg
        .priors
        .iter()
        .map(|g| {
            Ok(match *g {
                GammaPrior::Neg { c0, d0_shape, d0_rate } => GammaModel::Neg { c0, d0_shape, d0_rate },
                GammaPrior::Mm { u, v, method } => GammaModel::Mm(MmPrior::new(u, v, q, method)?),
            })
        })
        .collect::<Result<_>>()?;
    let base = PriorSpec {
        gamma: GammaPrior::neg(),
        ..cfg.prior.clone()
    };
    let cells: Vec<(usize, usize, usize)> = (0..cfg.structures.len())
        .flat_map(|s| (0..cfg.priors.len()).flat_map(move |p| (0..cfg.replicates).map(move |r| (s, p, r))))
        .collect();
    let root = data_stream(cfg.seed);
    let d = &cfg.design;
    cells
        .par_iter()
        .map(|&(s, p, r)| {
            let rng = root.split(s as u64).split(r as u64);
            let ds = simulate_dataset(&truths[s], d.subjects, d.visits, d.responses, d.sigma2, &rng)?;
            let model = Model::new(&ds, base.clone())?.with_gamma_model(models[p].clone())?;
            let fit_cfg = FitConfig {
                seed: rng.split(1).stream(),
                ..cfg.fit.clone()
            };
            let summary = summarize(&fit(&model, &fit_cfg)?)?;
            let sel = sel_loss(&omega_hat(&summary)?, &truths[s])?;
            log::info!(
                "{} {} replicate {}: sel {sel:.6}",
                cfg.structures[s],
                prior_label(&cfg.priors[p]),
                r + 1
            );
            Ok(LossRecord {
                structure: cfg.structures[s],
                prior: prior_label(&cfg.priors[p]).into(),
                replicate: r + 1,
                sel,
            })
        })
        .collect()
}

pub fn write_loss_csv(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs the benchmark and writes `losses.csv` plus one `truth_{structure}.csv`
/// per structure.
pub fn cmd_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<LossRecord>> {
    let records = run_benchmark(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    for &k in &cfg.structures {
        let truth = make_structure(&StructureSpec::new(k, cfg.design.q()).with_seed(cfg.seed))?;
        write_matrix_csv(&cfg.output_dir.join(format!("truth_{k}.csv")), truth.matrix())?;
    }
    write_loss_csv(&cfg.output_dir.join("losses.csv"), &records)?;
    Ok(records)
}

/// Mean loss per (structure, prior), in first-seen order.
pub fn mean_losses(records: &[LossRecord]) -> Vec<(StructureKind, String, f64)> {
    let mut out: Vec<(StructureKind, String, f64, usize)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(s, p, _, _)| *s == r.structure && *p == r.prior) {
            Some(e) => {
                e.2 += r.sel;
                e.3 += 1;
            }
            None => out.push((r.structure, r.prior.clone(), r.sel, 1)),
        }
    }
    out.into_iter().map(|(s, p, t, n)| (s, p, t / n as f64)).collect()
}
