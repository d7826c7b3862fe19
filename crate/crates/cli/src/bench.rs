//! Benchmark table: one row per (workload, method).
//!
//! ```toml
//! eps = 0.5
//! delta = 1e-4
//! methods = ["eigen", "wavelet", "hierarchy", "identity"]
//!
//! [reduction]            # optional, eigen rows only
//! mode = "sep"
//!
//! [[workload]]
//! name = "ranges"
//! dims = [64]
//! family = "all-range"
//!
//! [[workload]]
//! name = "students"
//! fixture = "student"    # or file = "w.csv" or spec = "w.toml"
//! dims = [8]             # optional reshape for fixture and file entries
//! ```
//!
//! A failing row keeps its place in the table with the error message.

use std::path::Path;
use std::time::Instant;

use eigenmech::analysis::workload_error;
use eigenmech::config::Spec;
use eigenmech::domain::{DomainShape, Workload};
use eigenmech::fixtures::student_workload;
use eigenmech::io::{self, format_f64};
use eigenmech::mechanism::PrivacyParams;
use eigenmech::reduction::ReductionConfig;
use eigenmech::{Error, Result};
use serde::Deserialize;
use toml::{Table, Value};

use crate::manifest::{Privacy, RunManifest};
use crate::{relative_to, select_strategy, Method};

fn default_eps() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    1e-4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default = "default_delta")]
    delta: f64,
    methods: Vec<Method>,
    #[serde(default)]
    reduction: ReductionConfig,
    #[serde(default)]
    normalize: bool,
    #[serde(rename = "workload")]
    workloads: Vec<Table>,
}

const HEADER: &str =
    "workload,method,m,n,unit_p_squared,workload_error,rms_error,svdb,lower_bound,ratio_to_bound,thm3_cap,select_seconds,error";

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn entry_name(entry: &Table, index: usize) -> String {
    entry
        .get("name")
        .and_then(Value::as_str)
        .map_or_else(|| format!("workload{}", index + 1), str::to_owned)
}

fn reshape(w: Workload, entry: &Table) -> Result<Workload> {
    match entry.get("dims") {
        None => Ok(w),
        Some(v) => {
            let dims: Vec<usize> = v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::InvalidArgument(format!("dims: {}", e.message())))?;
            w.with_shape(DomainShape::new(dims)?)
        }
    }
}

fn build_workload(entry: &Table, config_path: &Path) -> Result<Workload> {
    let path_of = |key: &str| entry.get(key).and_then(Value::as_str).map(|p| relative_to(config_path, Path::new(p)));
    if let Some(fixture) = entry.get("fixture") {
        return match fixture.as_str() {
            Some("student") => reshape(student_workload(), entry),
            _ => Err(Error::InvalidArgument(format!("unknown fixture {fixture}"))),
        };
    }
    if let Some(file) = path_of("file") {
        return reshape(io::read_workload(&file)?, entry);
    }
    if let Some(spec) = path_of("spec") {
        return Spec::from_path(&spec)?.build_workload();
    }
    // Inline: `dims` describes the domain, every other key the workload.
    let mut domain = Table::new();
    let mut workload = Table::new();
    for (k, v) in entry {
        match k.as_str() {
            "name" => {}
            "dims" => {
                domain.insert(k.clone(), v.clone());
            }
            _ => {
                workload.insert(k.clone(), v.clone());
            }
        }
    }
    let mut root = Table::new();
    root.insert("domain".into(), Value::Table(domain));
    root.insert("workload".into(), Value::Table(workload));
    let text = toml::to_string(&root).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Spec::parse(&text)?.build_workload()
}

fn row(name: &str, method: Method, w: &Workload, cfg: &BenchConfig, pp: &PrivacyParams) -> String {
    let (reduction, normalize) = if method == Method::Eigen {
        (cfg.reduction, cfg.normalize)
    } else {
        (ReductionConfig::default(), false)
    };
    let start = Instant::now();
    let selected = select_strategy(w, method, &reduction, normalize);
    let seconds = start.elapsed().as_secs_f64();
    let prefix = format!("{},{},{},{}", quote(name), method.name(), w.m(), w.n());
    match selected.and_then(|a| workload_error(w, &a, pp)) {
        Ok(r) => format!(
            "{prefix},{},{},{},{},{},{},{},{seconds:.6},",
            format_f64(r.unit_p_squared),
            format_f64(r.workload_error),
            format_f64(r.rms_error()),
            format_f64(r.svdb),
            format_f64(r.lower_bound),
            format_f64(r.ratio_to_bound),
            format_f64(r.thm3_cap),
        ),
        Err(e) => format!("{prefix},,,,,,,,,{}", quote(&e.to_string())),
    }
}

pub fn cmd_bench(config_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let cfg: BenchConfig = toml::from_str(&text).map_err(|e| Error::Parse {
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().trim().to_string(),
    })?;
    if cfg.methods.is_empty() || cfg.workloads.is_empty() {
        return Err(Error::InvalidArgument("bench needs at least one method and one workload".into()));
    }
    let pp = PrivacyParams::new(cfg.eps, cfg.delta)?;

    let mut lines = vec![HEADER.to_string()];
    let mut failed = 0;
    for (i, entry) in cfg.workloads.iter().enumerate() {
        let name = entry_name(entry, i);
        match build_workload(entry, config_path) {
            Ok(w) => {
                for &method in &cfg.methods {
                    let line = row(&name, method, &w, &cfg, &pp);
                    failed += usize::from(!line.ends_with(','));
                    lines.push(line);
                }
            }
            Err(e) => {
                for &method in &cfg.methods {
                    failed += 1;
                    lines.push(format!("{},{},,,,,,,,,,,{}", quote(&name), method.name(), quote(&e.to_string())));
                }
            }
        }
    }
    let mut table = lines.join("\n");
    table.push('\n');
    io::write_atomic(out, table.as_bytes())?;

    let mut m = RunManifest::new("bench");
    m.input("config", config_path);
    m.privacy = Some(Privacy {
        eps: cfg.eps,
        delta: cfg.delta,
    });
    m.reduction = Some(cfg.reduction);
    m.output(out);
    m.write(out)?;
    println!("wrote {} ({} rows, {failed} failed)", out.display(), lines.len() - 1);
    Ok(())
}
