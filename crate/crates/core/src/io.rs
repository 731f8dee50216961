//! File formats: long-format data CSV, matrix CSV, chain CSV, diagnostics
//! CSV and the posterior summary JSON.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cholesky::tri_pairs;
use crate::data::{indicator_names, indicator_z, LongDataset, Observation};
use crate::diagnostics::{diagnose_trace, DiagnosticRow, TraceVector};
use crate::error::{Error, Result};
use crate::gibbs::{Chain, FitConfig, PosteriorSummary};
use crate::priors::PriorSpec;

/// Version tag written at the top of every summary JSON.
pub const SCHEMA_VERSION: u32 = 1;

const KEY_COLUMNS: [&str; 4] = ["subject", "response", "visit", "y"];

/// Transformations applied while loading a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Replace `y` by `ln y`; every response must be positive.
    pub log_transform: bool,
    /// Center and scale every non-constant `x` column to mean 0, sd 1.
    pub standardize: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Random-design columns are named `z` followed by a digit or underscore.
fn is_z_column(name: &str) -> bool {
    let mut c = name.chars();
    c.next() == Some('z') && matches!(c.next(), Some(ch) if ch.is_ascii_digit() || ch == '_')
}

fn parse_field<T: std::str::FromStr>(raw: &str, column: &str, row: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        row,
        message: format!("column '{column}': cannot parse '{raw}'"),
    })
}

/// Reads long-format data. The header must start with
/// `subject,response,visit,y`; the remaining columns are fixed-effect
/// covariates, except those named like `z1` or `z_h1_v2`, which form the
/// random design. Without random-design columns the visit-indicator design is
/// built. Row numbers in errors count data rows from 1.
pub fn read_dataset<R: Read>(reader: R, opts: LoadOptions) -> Result<LongDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 4 || header[..4] != KEY_COLUMNS {
        return Err(Error::Schema {
            row: 0,
            message: format!(
                "header must start with {}, found '{}'",
                KEY_COLUMNS.join(","),
                header.join(",")
            ),
        });
    }
    let (mut x_cols, mut z_cols) = (Vec::new(), Vec::new());
    for (i, name) in header.iter().enumerate().skip(4) {
        if is_z_column(name) {
            z_cols.push(i);
        } else {
            x_cols.push(i);
        }
    }
    let mut subjects: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let id = rec[0].to_owned();
        if id.is_empty() {
            return Err(Error::Parse {
                row,
                message: "empty subject id".into(),
            });
        }
        let subject = *index.entry(id.clone()).or_insert_with(|| {
            subjects.push(id);
            subjects.len() - 1
        });
        let mut y: f64 = parse_field(&rec[3], "y", row)?;
        if opts.log_transform {
            if y <= 0.0 {
                return Err(Error::Parse {
                    row,
                    message: format!("log transform needs positive y, found {y}"),
                });
            }
            y = y.ln();
        }
        let x = x_cols
            .iter()
            .map(|&c| parse_field(&rec[c], &header[c], row))
            .collect::<Result<_>>()?;
        let z = z_cols
            .iter()
            .map(|&c| parse_field(&rec[c], &header[c], row))
            .collect::<Result<_>>()?;
        rows.push(Observation {
            subject,
            response: parse_field(&rec[1], "response", row)?,
            visit: parse_field(&rec[2], "visit", row)?,
            y,
            x,
            z,
        });
    }
    let x_names: Vec<String> = x_cols.iter().map(|&c| header[c].clone()).collect();
    let mut z_names: Vec<String> = z_cols.iter().map(|&c| header[c].clone()).collect();
    if z_cols.is_empty() {
        let h = rows.iter().map(|r| r.response).max().unwrap_or(0);
        let v = rows.iter().map(|r| r.visit).max().unwrap_or(0);
        for (k, r) in rows.iter_mut().enumerate() {
            if r.response == 0 || r.visit == 0 {
                return Err(Error::Schema {
                    row: k + 1,
                    message: "response and visit are 1-based".into(),
                });
            }
            r.z = indicator_z(r.response, r.visit, h, v);
        }
        z_names = indicator_names(h, v);
    }
    if opts.standardize {
        standardize_columns(&mut rows, &x_names);
    }
    LongDataset::new(subjects, rows, x_names, z_names)
}

/// Sample-sd scaling; constant columns (such as an intercept) are kept.
fn standardize_columns(rows: &mut [Observation], names: &[String]) {
    let n = rows.len() as f64;
    if rows.len() < 2 {
        return;
    }
    for (c, name) in names.iter().enumerate() {
        let mean = rows.iter().map(|r| r.x[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r.x[c] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= 0.0 {
            log::warn!("column '{name}' is constant; left unstandardized");
            continue;
        }
        let sd = var.sqrt();
        for r in rows.iter_mut() {
            r.x[c] = (r.x[c] - mean) / sd;
        }
    }
}

pub fn load_csv(path: &Path, opts: LoadOptions) -> Result<LongDataset> {
    read_dataset(open(path)?, opts)
}

/// Writes every column, including the random design, so that
/// [`load_csv`] restores the dataset exactly.
pub fn write_dataset<W: Write>(writer: W, ds: &LongDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header = KEY_COLUMNS
        .iter()
        .copied()
        .chain(ds.x_names().iter().map(String::as_str))
        .chain(ds.z_names().iter().map(String::as_str));
    w.write_record(header)?;
    for r in ds.rows() {
        let mut rec = vec![
            ds.subjects()[r.subject].clone(),
            r.response.to_string(),
            r.visit.to_string(),
            r.y.to_string(),
        ];
        rec.extend(r.x.iter().chain(&r.z).map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<dataset>", e))
}

pub fn write_dataset_csv(path: &Path, ds: &LongDataset) -> Result<()> {
    let f = create(path)?;
    write_dataset(f, ds)
}

/// Plain comma-separated rows, 17 significant digits, no header.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = create(path)?;
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(f, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    finish(f, path)
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(open(path)?);
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if *ncols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Parse {
                row: k + 1,
                message: format!("expected {} values, found {}", ncols.unwrap_or(0), rec.len()),
            });
        }
        for (j, v) in rec.iter().enumerate() {
            values.push(parse_field::<f64>(v, &format!("{}", j + 1), k + 1)?);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols.unwrap_or(0), &values))
}

/// Flat chain output: one row per kept draw per chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainTable {
    /// Parameter columns, excluding `chain` and `iter`.
    pub columns: Vec<String>,
    pub chain: Vec<usize>,
    pub iter: Vec<usize>,
    /// Row-major values, `columns.len()` per row.
    pub values: Vec<Vec<f64>>,
}

impl ChainTable {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    /// Per-chain traces of every column, chains in ascending id order.
    pub fn traces(&self) -> Vec<(usize, TraceVector)> {
        let mut by_chain: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (r, &c) in self.chain.iter().enumerate() {
            by_chain.entry(c).or_default().push(r);
        }
        let mut out = Vec::new();
        for (c, rows) in by_chain {
            for (k, name) in self.columns.iter().enumerate() {
                let values = rows.iter().map(|&r| self.values[r][k]).collect();
                out.push((c, TraceVector::new(name.clone(), values)));
            }
        }
        out
    }
}

/// Column layout: `loglik, sigma2, g, p0, delta2, beta_*, J_*, lambda_*`,
/// then `gamma_m_l` with 1-based `l < m`.
pub fn chain_table(chains: &[Chain], x_names: &[String], z_names: &[String]) -> ChainTable {
    let q = z_names.len();
    let mut columns: Vec<String> = ["loglik", "sigma2", "g", "p0", "delta2"].map(String::from).to_vec();
    columns.extend(x_names.iter().map(|x| format!("beta_{x}")));
    columns.extend(x_names.iter().map(|x| format!("J_{x}")));
    columns.extend(z_names.iter().map(|z| format!("lambda_{z}")));
    columns.extend(tri_pairs(q).map(|(m, l)| format!("gamma_{}_{}", m + 1, l + 1)));
    let mut t = ChainTable {
        columns,
        ..ChainTable::default()
    };
    for c in chains {
        for d in &c.draws {
            let mut v = vec![d.loglik, d.sigma2, d.g, d.p0, d.delta2];
            v.extend(&d.beta);
            v.extend(d.j.iter().map(|&b| if b { 1.0 } else { 0.0 }));
            v.extend(&d.lambda);
            v.extend(&d.gamma);
            t.chain.push(c.id);
            t.iter.push(d.iteration);
            t.values.push(v);
        }
    }
    t
}

pub fn write_chain_csv(path: &Path, t: &ChainTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(
        ["chain", "iter"]
            .into_iter()
            .chain(t.columns.iter().map(String::as_str)),
    )?;
    for r in 0..t.n_rows() {
        let mut rec = vec![t.chain[r].to_string(), t.iter[r].to_string()];
        rec.extend(t.values[r].iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a chain CSV. A file without data rows is an error.
pub fn read_chain_csv(path: &Path) -> Result<ChainTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 3 || header[0] != "chain" || header[1] != "iter" {
        return Err(Error::Schema {
            row: 0,
            message: "chain file header must start with chain,iter and name at least one parameter".into(),
        });
    }
    let mut t = ChainTable {
        columns: header[2..].to_vec(),
        ..ChainTable::default()
    };
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        t.chain.push(parse_field(&rec[0], "chain", row)?);
        t.iter.push(parse_field(&rec[1], "iter", row)?);
        t.values.push(
            (2..rec.len())
                .map(|c| parse_field(&rec[c], &header[c], row))
                .collect::<Result<_>>()?,
        );
    }
    if t.n_rows() == 0 {
        return Err(Error::NoSamples);
    }
    Ok(t)
}

/// ESS and Geweke for every column of every chain.
pub fn diagnose_table(t: &ChainTable) -> Result<Vec<DiagnosticRow>> {
    if t.n_rows() == 0 {
        return Err(Error::NoSamples);
    }
    t.traces().par_iter().map(|(c, tr)| diagnose_trace(tr, *c)).collect()
}

pub fn write_diagnostics_csv(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    w.write_record([
        "parameter",
        "chain",
        "n",
        "mean",
        "sd",
        "ess",
        "geweke_z",
        "zero_variance",
        "flag",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticRow>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataShape {
    pub n_subjects: usize,
    pub n_rows: usize,
    pub p: usize,
    pub q: usize,
    pub n_responses: usize,
    pub max_visit: usize,
}

impl DataShape {
    pub fn of(ds: &LongDataset) -> Self {
        DataShape {
            n_subjects: ds.n_subjects(),
            n_rows: ds.n_rows(),
            p: ds.p(),
            q: ds.q(),
            n_responses: ds.n_responses(),
            max_visit: ds.max_visit(),
        }
    }

    /// Whether the random design has one effect per (response, visit).
    pub fn has_visit_blocks(&self) -> bool {
        self.n_responses * self.max_visit == self.q && self.n_responses > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub inclusion_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub name: String,
    pub mean: f64,
    pub zero_prob: f64,
}

/// On-disk form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub schema_version: u32,
    pub prior: PriorSpec,
    pub config: FitConfig,
    pub load: LoadOptions,
    pub data: DataShape,
    pub n_samples_used: usize,
    pub sigma2_mean: f64,
    pub beta: Vec<CoefficientSummary>,
    pub lambda: Vec<ScaleSummary>,
    pub gamma_mean: Vec<f64>,
    pub omega_mean: Vec<Vec<f64>>,
    pub rho_mean: Vec<Vec<f64>>,
    pub rho_lower: Vec<Vec<f64>>,
    pub rho_upper: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl SummaryFile {
    pub fn new(
        s: &PosteriorSummary,
        prior: &PriorSpec,
        config: &FitConfig,
        load: LoadOptions,
        ds: &LongDataset,
    ) -> Self {
        let beta = ds
            .x_names()
            .iter()
            .enumerate()
            .map(|(k, name)| CoefficientSummary {
                name: name.clone(),
                mean: s.beta_mean[k],
                lower: s.beta_lower[k],
                upper: s.beta_upper[k],
                inclusion_prob: s.inclusion_prob[k],
            })
            .collect();
        let lambda = ds
            .z_names()
            .iter()
            .enumerate()
            .map(|(l, name)| ScaleSummary {
                name: name.clone(),
                mean: s.lambda_mean[l],
                zero_prob: s.lambda_zero_prob[l],
            })
            .collect();
        SummaryFile {
            schema_version: SCHEMA_VERSION,
            prior: prior.clone(),
            config: config.clone(),
            load,
            data: DataShape::of(ds),
            n_samples_used: s.n_samples_used,
            sigma2_mean: s.sigma2_mean,
            beta,
            lambda,
            gamma_mean: s.gamma_mean.clone(),
            omega_mean: rows_of(&s.omega_mean),
            rho_mean: rows_of(&s.rho_mean),
            rho_lower: rows_of(&s.rho_lower),
            rho_upper: rows_of(&s.rho_upper),
        }
    }
}

pub fn write_summary_json(path: &Path, s: &SummaryFile) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, s)?;
    writeln!(f).map_err(|e| Error::io(path, e))?;
    finish(f, path)
}

pub fn read_summary_json(path: &Path) -> Result<SummaryFile> {
    let s: SummaryFile = serde_json::from_reader(open(path)?)?;
    if s.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            row: 0,
            message: format!("unsupported summary schema version {}", s.schema_version),
        });
    }
    Ok(s)
}

/// Splits a correlation matrix over a (response x visit) design into its
/// A response pair `(a, b)` and its correlation block.
pub type ResponseBlock = ((usize, usize), DMatrix<f64>);

/// `n_visits`-square blocks. Block `(a, b)` with `a < b` holds the
/// correlations between response `a` and response `b` across visits.
pub fn response_blocks(rho: &DMatrix<f64>, n_responses: usize, n_visits: usize) -> Result<Vec<ResponseBlock>> {
    if rho.nrows() != n_responses * n_visits || rho.ncols() != rho.nrows() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix does not split into {n_responses} x {n_visits} blocks",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mut out = Vec::new();
    for a in 0..n_responses {
        for b in a..n_responses {
            let block = rho
                .view((a * n_visits, b * n_visits), (n_visits, n_visits))
                .into_owned();
            out.push(((a + 1, b + 1), block));
        }
    }
    Ok(out)
}

/// Writes `rho_h{a}_h{b}.csv` for every block, returning the paths.
pub fn write_response_blocks(
    dir: &Path,
    rho: &DMatrix<f64>,
    n_responses: usize,
    n_visits: usize,
) -> Result<Vec<PathBuf>> {
    response_blocks(rho, n_responses, n_visits)?
        .into_iter()
        .map(|((a, b), m)| {
            let path = dir.join(format!("rho_h{a}_h{b}.csv"));
            write_matrix_csv(&path, &m)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::RngStream;
    use proptest::prelude::*;

    fn load(text: &str, opts: LoadOptions) -> Result<LongDataset> {
        read_dataset(text.as_bytes(), opts)
    }

    #[test]
    fn indicator_design_when_z_absent() {
        let text = "subject,response,visit,y\n\
                    a,1,1,0.5\na,1,2,0.7\na,2,1,1.5\na,2,2,1.1\n\
                    b,1,1,0.2\nb,1,2,0.3\nb,2,1,0.9\nb,2,2,1.0\n";
        let ds = load(text, LoadOptions::default()).unwrap();
        assert_eq!((ds.n_subjects(), ds.q(), ds.p()), (2, 4, 0));
        for r in ds.rows() {
            assert_eq!(r.z.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(r.z.iter().sum::<f64>(), 1.0);
            assert_eq!(r.z[(r.response - 1) * 2 + r.visit - 1], 1.0);
        }
    }

    #[test]
    fn explicit_columns() {
        let text = "subject,response,visit,y,x1,age,z1,z2\ns,1,1,2.0,1,30,1,0.5\ns,1,2,3.0,1,31,0,1\n";
        let ds = load(text, LoadOptions::default()).unwrap();
        assert_eq!(ds.x_names(), ["x1", "age"]);
        assert_eq!(ds.z_names(), ["z1", "z2"]);
        assert_eq!(ds.rows()[0].z, vec![1.0, 0.5]);
    }

    #[test]
    fn errors_name_rows() {
        let dup = "subject,response,visit,y\na,1,1,1\na,1,2,1\na,1,1,2\n";
        assert!(matches!(
            load(dup, LoadOptions::default()),
            Err(Error::Schema { row: 3, .. })
        ));
        let bad = "subject,response,visit,y\na,1,1,1\na,1,2,oops\n";
        assert!(matches!(
            load(bad, LoadOptions::default()),
            Err(Error::Parse { row: 2, .. })
        ));
        let ragged = "subject,response,visit,y,x1\na,1,1,1,2\na,1,2,1\n";
        assert!(matches!(
            load(ragged, LoadOptions::default()),
            Err(Error::Parse { row: 2, .. })
        ));
        let header = "id,response,visit,y\na,1,1,1\n";
        assert!(matches!(
            load(header, LoadOptions::default()),
            Err(Error::Schema { row: 0, .. })
        ));
        let zero = "subject,response,visit,y\na,0,1,1\n";
        assert!(matches!(
            load(zero, LoadOptions::default()),
            Err(Error::Schema { row: 1, .. })
        ));
    }

    #[test]
    fn log_transform() {
        let text = "subject,response,visit,y\na,1,1,2.0\na,1,2,1.0\n";
        let ds = load(
            text,
            LoadOptions {
                log_transform: true,
                standardize: false,
            },
        )
        .unwrap();
        assert_eq!(ds.y(), vec![2.0f64.ln(), 0.0]);
        let neg = "subject,response,visit,y\na,1,1,-1\n";
        assert!(matches!(
            load(
                neg,
                LoadOptions {
                    log_transform: true,
                    standardize: false
                }
            ),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn standardize() {
        let mut rng = RngStream::new(2);
        let mut text = String::from("subject,response,visit,y,x0,x1,x2\n");
        for i in 0..50 {
            let (a, b) = (3.0 + 2.0 * rng.standard_normal(), 100.0 * rng.uniform());
            text.push_str(&format!("s{i},1,1,0.5,1,{a},{b}\n"));
        }
        let ds = load(
            &text,
            LoadOptions {
                log_transform: false,
                standardize: true,
            },
        )
        .unwrap();
        let n = ds.n_rows() as f64;
        assert!(ds.rows().iter().all(|r| r.x[0] == 1.0));
        for c in 1..3 {
            let mean = ds.rows().iter().map(|r| r.x[c]).sum::<f64>() / n;
            let sd = (ds.rows().iter().map(|r| (r.x[c] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12, "{mean} {sd}");
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let omega = crate::cholesky::CovMatrix::identity(4);
        let ds = crate::simulation::simulate_dataset(&omega, 5, 2, 2, 0.3, &RngStream::new(4)).unwrap();
        let path = dir.path().join("d.csv");
        write_dataset_csv(&path, &ds).unwrap();
        assert_eq!(load_csv(&path, LoadOptions::default()).unwrap(), ds);
    }

    #[test]
    fn chain_round_trip_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "chain,iter,sigma2\n").unwrap();
        assert!(matches!(read_chain_csv(&path), Err(Error::NoSamples)));
        std::fs::write(&path, "").unwrap();
        assert!(read_chain_csv(&path).is_err());
        let t = ChainTable {
            columns: vec!["a".into(), "b".into()],
            chain: vec![0, 0, 1],
            iter: vec![1, 2, 1],
            values: vec![vec![0.1, -3e-300], vec![1.0 / 3.0, 7.0], vec![f64::MAX, 0.0]],
        };
        write_chain_csv(&path, &t).unwrap();
        assert_eq!(read_chain_csv(&path).unwrap(), t);
        let tr = t.traces();
        assert_eq!(tr.len(), 4);
        assert_eq!(tr[1].1.values, vec![-3e-300, 7.0]);
    }

    #[test]
    fn blocks() {
        let rho = DMatrix::from_fn(4, 4, |i, j| (10 * i + j) as f64);
        let b = response_blocks(&rho, 2, 2).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[1].0, (1, 2));
        assert_eq!(b[1].1, DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 12.0, 13.0]));
        assert!(response_blocks(&rho, 3, 2).is_err());
    }

    #[test]
    fn z_column_names() {
        assert!(is_z_column("z1") && is_z_column("z_h1_v1"));
        assert!(!is_z_column("zinc") && !is_z_column("x1") && !is_z_column("z"));
    }

    proptest! {
        #[test]
        fn matrix_round_trip_bitwise(seed in 0u64..1000, r in 1usize..6, c in 1usize..6) {
            let mut rng = RngStream::new(seed);
            let m = DMatrix::from_fn(r, c, |_, _| rng.standard_normal() * 10f64.powi(rng.below(40) as i32 - 20));
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_matrix_csv(&path, &m).unwrap();
            let back = read_matrix_csv(&path).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
