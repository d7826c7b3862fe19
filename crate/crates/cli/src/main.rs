//! `eigenmech`: build workloads, select strategies, run the mechanism and
//! benchmark strategies against the error lower bound.
//!
//! Exit status is 0 on success, 2 for invalid input and 3 when the numerical
//! pipeline fails (solver non-convergence, unanswerable workload). The
//! worker thread count follows `RAYON_NUM_THREADS`.

mod bench;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigenmech::analysis::{empirical_error, workload_error, EmpiricalError, ErrorReport};
use eigenmech::baselines::{hierarchy_strategy, identity_strategy, wavelet_strategy};
use eigenmech::config::Spec;
use eigenmech::domain::{build_data_vector, normalize_rows, DomainShape, Workload};
use eigenmech::io;
use eigenmech::mechanism::{MatrixMechanism, PrivacyParams};
use eigenmech::reduction::{reduced_design, ReductionConfig, ReductionMode};
use eigenmech::weighting::SolverOptions;
use eigenmech::{Error, Result, Strategy};
use serde::{Deserialize, Serialize};

use manifest::{sibling, write_json, Privacy, RunManifest};

#[derive(Parser)]
#[command(name = "eigenmech", version, about = "Workload-adaptive strategies for private linear queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a workload matrix from a domain/workload spec file.
    Workload(WorkloadArgs),
    /// Choose a strategy for a workload and report its error.
    Select(SelectArgs),
    /// Answer a workload on a data vector through the mechanism.
    Run(RunArgs),
    /// Count records per cell of a domain.
    Ingest(IngestArgs),
    /// Compare methods over several workloads.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Eigen,
    Identity,
    Wavelet,
    Hierarchy,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Eigen => "eigen",
            Method::Identity => "identity",
            Method::Wavelet => "wavelet",
            Method::Hierarchy => "hierarchy",
        }
    }
}

#[derive(Args)]
struct PrivacyArgs {
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
}

impl PrivacyArgs {
    fn params(&self) -> Result<PrivacyParams> {
        PrivacyParams::new(self.eps, self.delta)
    }

    fn manifest(&self) -> Privacy {
        Privacy {
            eps: self.eps,
            delta: self.delta,
        }
    }
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShapeArgs {
    /// Attribute sizes, e.g. `4,4`; defaults to one attribute over all cells.
    #[arg(long, value_delimiter = ',', conflicts_with = "spec")]
    dims: Option<Vec<usize>>,
    /// Spec file whose domain gives the attribute sizes.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Eigen)]
    method: Method,
    #[arg(long, default_value = "full")]
    reduction: ReductionMode,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long)]
    principal_count: Option<usize>,
    /// Design for the row-normalized workload (favours relative error).
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    shape: ShapeArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long)]
    strategy: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo trials for the empirical error report (0 skips it).
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Floor on the denominator of relative errors.
    #[arg(long, default_value_t = 1.0)]
    sanity: f64,
    /// Include the true answers in the answers file.
    #[arg(long)]
    truth: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Workload(a) => cmd_workload(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Ingest(a) => cmd_ingest(&a),
        Command::Bench(a) => bench::cmd_bench(&a.config, &a.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn cmd_workload(a: &WorkloadArgs) -> Result<()> {
    let spec = Spec::from_path(&a.spec)?;
    let w = spec.build_workload()?;
    io::write_workload(&a.out, &w)?;

    let mut m = RunManifest::new("workload");
    m.input("spec", &a.spec);
    m.domain(&spec);
    m.output(&a.out);
    if w.descriptions().is_some() {
        m.output(&io::descriptions_path(&a.out));
    }
    m.write(&a.out)?;
    println!("wrote {} ({}x{})", a.out.display(), w.m(), w.n());
    Ok(())
}

fn resolve_shape(n: usize, args: &ShapeArgs) -> Result<DomainShape> {
    let shape = match (&args.dims, &args.spec) {
        (Some(dims), _) => DomainShape::new(dims.clone())?,
        (None, Some(path)) => Spec::from_path(path)?.domain.shape,
        (None, None) => DomainShape::one_dim(n)?,
    };
    if shape.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "domain {shape} has {} cells, workload has {n}",
            shape.n()
        )));
    }
    Ok(shape)
}

/// Strategy for `w` by `method`; reduction and normalization apply to the
/// eigen design only.
pub fn select_strategy(w: &Workload, method: Method, cfg: &ReductionConfig, normalize: bool) -> Result<Strategy> {
    if method != Method::Eigen && (normalize || *cfg != ReductionConfig::default()) {
        return Err(Error::InvalidArgument(format!(
            "reduction and normalization apply to the eigen method, not {}",
            method.name()
        )));
    }
    match method {
        Method::Eigen => {
            let target = if normalize { normalize_rows(w)? } else { w.clone() };
            Ok(reduced_design(&target, cfg, &SolverOptions::default())?.strategy)
        }
        Method::Identity => identity_strategy(w.n()),
        Method::Wavelet => wavelet_strategy(w.shape()),
        Method::Hierarchy => hierarchy_strategy(w.shape(), 2),
    }
}

fn cmd_select(a: &SelectArgs) -> Result<()> {
    let pp = a.privacy.params()?;
    let w = io::read_workload(&a.workload)?;
    let shape = resolve_shape(w.n(), &a.shape)?;
    let w = w.with_shape(shape.clone())?;
    let cfg = ReductionConfig {
        mode: a.reduction,
        group_size: a.group_size,
        principal_count: a.principal_count,
    };
    let strategy = select_strategy(&w, a.method, &cfg, a.normalize)?;
    let report = workload_error(&w, &strategy, &pp)?;
    io::write_strategy(&a.out, &strategy)?;
    let report_path = sibling(&a.out, "report.json");
    write_json(&report_path, &report)?;

    let mut m = RunManifest::new("select");
    m.input("workload", &a.workload);
    if let Some(spec) = &a.shape.spec {
        m.input("spec", spec);
    }
    m.domain(&shape);
    m.privacy = Some(a.privacy.manifest());
    if a.method == Method::Eigen {
        m.reduction = Some(cfg);
    }
    m.output(&a.out);
    m.output(&report_path);
    m.write(&a.out)?;
    print!("method = {}\nnormalize = {}\n{}", a.method.name(), a.normalize, report.to_key_value());
    Ok(())
}

#[derive(Serialize)]
struct RunReport<'a> {
    analytic: &'a ErrorReport,
    empirical: Option<&'a EmpiricalError>,
    /// Empirical over analytic root-mean-square error.
    rmse_ratio: Option<f64>,
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let pp = a.privacy.params()?;
    let w = io::read_workload(&a.workload)?;
    let strategy = io::read_strategy(&a.strategy)?;
    let x = io::read_data_vector(&a.data)?;
    if x.len() != w.n() {
        return Err(Error::DimensionMismatch(format!(
            "data vector has {} cells, workload has {}",
            x.len(),
            w.n()
        )));
    }
    let mech = MatrixMechanism::new(&w, &strategy)?;
    let xv = x.to_dvector();
    let out = mech.run(&xv, &pp, a.seed)?;
    let truth = w.matrix() * &xv;
    io::write_atomic(&a.out, io::answers_to_csv(&out.answers, a.truth.then_some(&truth)).as_bytes())?;

    let analytic = workload_error(&w, &strategy, &pp)?;
    let empirical = match a.trials {
        0 => None,
        t => Some(empirical_error(&w, &strategy, &x, &pp, t, a.seed, a.sanity)?),
    };
    let report = RunReport {
        analytic: &analytic,
        empirical: empirical.as_ref(),
        rmse_ratio: empirical.as_ref().map(|e| e.rmse / analytic.rms_error()),
    };
    let report_path = sibling(&a.out, "report.json");
    write_json(&report_path, &report)?;

    let mut m = RunManifest::new("run");
    m.input("workload", &a.workload);
    m.input("strategy", &a.strategy);
    m.input("data", &a.data);
    m.privacy = Some(a.privacy.manifest());
    m.seed = Some(a.seed);
    m.output(&a.out);
    m.output(&report_path);
    m.write(&a.out)?;

    println!("analytic_rmse = {}", io::format_f64(analytic.rms_error()));
    if let Some(e) = &empirical {
        println!("empirical_rmse = {}", io::format_f64(e.rmse));
        println!("rmse_ratio = {}", io::format_f64(e.rmse / analytic.rms_error()));
        println!("mean_relative_error = {}", io::format_f64(e.mean_relative));
    }
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let spec = Spec::from_path(&a.spec)?;
    let cells = spec.domain.cells.as_ref().ok_or_else(|| {
        Error::InvalidArgument("ingest needs a domain with named attributes and buckets, not dims".into())
    })?;
    let records = io::read_records(fs::File::open(&a.records)?, cells)?;
    let x = build_data_vector(&records, cells)?;
    io::write_data_vector(&a.out, &x)?;

    let mut m = RunManifest::new("ingest");
    m.input("records", &a.records);
    m.input("spec", &a.spec);
    m.domain(&spec.domain);
    m.output(&a.out);
    m.write(&a.out)?;
    println!("wrote {} ({} records, {} cells)", a.out.display(), records.len(), x.len());
    Ok(())
}

/// Resolves `path` against the directory of `base` unless absolute.
pub fn relative_to(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    base.parent().map_or_else(|| path.to_path_buf(), |d| d.join(path))
}
