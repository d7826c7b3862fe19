//! Domain and workload specification files.
//!
//! ```toml
//! [domain]
//! gender = ["M", "F"]          # categories (an inner list groups values)
//! gpa = [1.0, 2.0, 3.0, 4.0]   # bucket edges
//!
//! [workload]
//! family = "marginal"          # all-range | random-range | marginal |
//!                              # range-marginal | cdf | identity
//! subsets = [["gender"], ["gpa"]]
//! ```
//!
//! Instead of attributes the domain may give bare sizes: `dims = [4, 4]`.
//! Marginal families take either `subsets` (attribute names or 0-based
//! indices) or `k` for all k-way subsets (default 2). `random-range` takes
//! `count` and `seed`.

use std::path::Path;

use serde::Serialize;
use toml::{Table, Value as Toml};

use crate::domain::{
    all_range_workload, cdf_workload, identity_workload, k_way_subsets, marginal_workload,
    random_range_workload, Attribute, Buckets, CellConditions, DomainShape, Workload,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    AllRange,
    RandomRange,
    Marginal,
    RangeMarginal,
    Cdf,
    Identity,
}

impl FamilyKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "all-range" => FamilyKind::AllRange,
            "random-range" => FamilyKind::RandomRange,
            "marginal" => FamilyKind::Marginal,
            "range-marginal" => FamilyKind::RangeMarginal,
            "cdf" => FamilyKind::Cdf,
            "identity" => FamilyKind::Identity,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadSpec {
    pub family: FamilyKind,
    pub count: Option<usize>,
    pub seed: u64,
    /// 0-based attribute indices.
    pub subsets: Option<Vec<Vec<usize>>>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub names: Vec<String>,
    pub shape: DomainShape,
    /// Present when attributes were given with buckets rather than sizes.
    pub cells: Option<CellConditions>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spec {
    pub domain: DomainSpec,
    pub workload: Option<WorkloadSpec>,
}

/// 1-based line of the first `key =` assignment, for error messages.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn line_of_table(text: &str, name: &str) -> Option<usize> {
    let header = format!("[{name}]");
    text.lines().position(|l| l.trim() == header).map(|i| i + 1)
}

fn offset_line(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl Spec {
    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| offset_line(text, s.start));
            Error::parse(line, e.message().trim().to_string())
        })?;
        for key in table.keys() {
            if key != "domain" && key != "workload" {
                return Err(Error::parse(
                    line_of_table(text, key).or_else(|| line_of(text, key)),
                    format!("unknown section '{key}'"),
                ));
            }
        }
        let domain = match table.get("domain") {
            Some(Toml::Table(t)) => parse_domain(text, t)?,
            _ => return Err(Error::parse(None, "missing [domain] section")),
        };
        let workload = match table.get("workload") {
            Some(Toml::Table(t)) => Some(parse_workload(text, t, &domain)?),
            Some(_) => return Err(Error::parse(line_of(text, "workload"), "workload must be a table")),
            None => None,
        };
        Ok(Self { domain, workload })
    }

    pub fn build_workload(&self) -> Result<Workload> {
        let spec = self
            .workload
            .as_ref()
            .ok_or_else(|| Error::parse(None, "missing [workload] section"))?;
        spec.build(&self.domain.shape)
    }
}

fn parse_domain(text: &str, t: &Table) -> Result<DomainSpec> {
    if t.is_empty() {
        return Err(Error::parse(line_of_table(text, "domain"), "domain has no attributes"));
    }
    if let Some(dims) = t.get("dims") {
        let line = line_of(text, "dims");
        if t.len() > 1 {
            return Err(Error::parse(line, "give either dims or attributes, not both"));
        }
        let arr = dims
            .as_array()
            .ok_or_else(|| Error::parse(line, "dims must be a list of sizes"))?;
        let sizes = arr
            .iter()
            .map(|v| match v.as_integer() {
                Some(d) if d >= 0 => Ok(d as usize),
                _ => Err(Error::parse(line, format!("dims entry {v} is not a size"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let shape = DomainShape::new(sizes).map_err(|e| Error::parse(line, e.to_string()))?;
        return Ok(DomainSpec {
            names: (0..shape.k()).map(|i| format!("a{i}")).collect(),
            shape,
            cells: None,
        });
    }
    let mut attributes = Vec::new();
    for (name, v) in t {
        let line = line_of(text, name);
        let arr = v
            .as_array()
            .ok_or_else(|| Error::parse(line, format!("attribute '{name}' must be a list")))?;
        let buckets = parse_buckets(arr).map_err(|m| Error::parse(line, format!("attribute '{name}': {m}")))?;
        attributes.push(Attribute {
            name: name.clone(),
            buckets,
        });
    }
    let cells = CellConditions::new(attributes).map_err(|e| Error::parse(None, e.to_string()))?;
    Ok(DomainSpec {
        names: cells.attributes().iter().map(|a| a.name.clone()).collect(),
        shape: cells.shape(),
        cells: Some(cells),
    })
}

fn parse_buckets(arr: &[Toml]) -> std::result::Result<Buckets, String> {
    if arr.is_empty() {
        return Err("empty list".into());
    }
    let numeric = |v: &Toml| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
    if arr.iter().all(|v| numeric(v).is_some()) {
        let edges: Vec<f64> = arr.iter().filter_map(numeric).collect();
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("bucket edges must increase strictly".into());
        }
        return Buckets::from_edges(&edges).map_err(|e| e.to_string());
    }
    let mut sets = Vec::new();
    for v in arr {
        match v {
            Toml::String(s) => sets.push(vec![s.clone()]),
            Toml::Array(inner) if !inner.is_empty() => sets.push(
                inner
                    .iter()
                    .map(|x| x.as_str().map(str::to_owned).ok_or("category groups hold strings"))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            ),
            _ => return Err("expected bucket edges or categories".into()),
        }
    }
    Ok(Buckets::Categorical(sets))
}

fn parse_workload(text: &str, t: &Table, domain: &DomainSpec) -> Result<WorkloadSpec> {
    for key in t.keys() {
        if !["family", "count", "seed", "subsets", "k"].contains(&key.as_str()) {
            return Err(Error::parse(line_of(text, key), format!("unknown workload key '{key}'")));
        }
    }
    let fline = line_of(text, "family");
    let family = match t.get("family") {
        Some(Toml::String(s)) => FamilyKind::parse(s)
            .ok_or_else(|| Error::parse(fline, format!("unknown workload family '{s}'")))?,
        Some(_) => return Err(Error::parse(fline, "family must be a string")),
        None => return Err(Error::parse(line_of_table(text, "workload"), "workload needs a family")),
    };
    let uint = |key: &str| -> Result<Option<u64>> {
        match t.get(key) {
            None => Ok(None),
            Some(v) => match v.as_integer() {
                Some(i) if i >= 0 => Ok(Some(i as u64)),
                _ => Err(Error::parse(line_of(text, key), format!("{key} must be a non-negative integer"))),
            },
        }
    };
    let count = uint("count")?.map(|c| c as usize);
    let seed = uint("seed")?.unwrap_or(0);
    let k = uint("k")?.map(|k| k as usize);
    let subsets = match t.get("subsets") {
        None => None,
        Some(v) => Some(parse_subsets(v, domain).map_err(|m| Error::parse(line_of(text, "subsets"), m))?),
    };
    let marginal = matches!(family, FamilyKind::Marginal | FamilyKind::RangeMarginal);
    if !marginal && (subsets.is_some() || k.is_some()) {
        return Err(Error::parse(
            line_of(text, "subsets").or(line_of(text, "k")),
            "subsets and k apply to marginal families only",
        ));
    }
    if subsets.is_some() && k.is_some() {
        return Err(Error::parse(line_of(text, "k"), "give either subsets or k, not both"));
    }
    if let Some(k) = k {
        if k == 0 || k > domain.shape.k() {
            return Err(Error::parse(
                line_of(text, "k"),
                format!("k must lie in 1..={}", domain.shape.k()),
            ));
        }
    }
    if family == FamilyKind::RandomRange {
        if count.is_none_or(|c| c == 0) {
            return Err(Error::parse(
                line_of(text, "count").or(fline),
                "random-range needs a positive count",
            ));
        }
    } else if count.is_some() {
        return Err(Error::parse(line_of(text, "count"), "count applies to random-range only"));
    }
    if family == FamilyKind::Cdf && domain.shape.k() != 1 {
        return Err(Error::parse(fline, "cdf workloads need a single attribute"));
    }
    Ok(WorkloadSpec {
        family,
        count,
        seed,
        subsets,
        k,
    })
}

fn parse_subsets(v: &Toml, domain: &DomainSpec) -> std::result::Result<Vec<Vec<usize>>, String> {
    let outer = v.as_array().ok_or("subsets must be a list of lists")?;
    outer
        .iter()
        .map(|s| {
            let inner = s.as_array().ok_or("subsets must be a list of lists")?;
            inner
                .iter()
                .map(|a| match a {
                    Toml::String(name) => domain
                        .names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| format!("unknown attribute '{name}'")),
                    Toml::Integer(i) if *i >= 0 && (*i as usize) < domain.shape.k() => Ok(*i as usize),
                    other => Err(format!("'{other}' is not an attribute")),
                })
                .collect()
        })
        .collect()
}

impl WorkloadSpec {
    pub fn build(&self, shape: &DomainShape) -> Result<Workload> {
        let subsets = || {
            self.subsets
                .clone()
                .unwrap_or_else(|| k_way_subsets(shape.k(), self.k.unwrap_or(2).min(shape.k())))
        };
        match self.family {
            FamilyKind::AllRange => Ok(all_range_workload(shape)),
            FamilyKind::RandomRange => random_range_workload(shape, self.count.unwrap_or(0), self.seed),
            FamilyKind::Marginal => marginal_workload(shape, &subsets(), false),
            FamilyKind::RangeMarginal => marginal_workload(shape, &subsets(), true),
            FamilyKind::Cdf => cdf_workload(shape),
            FamilyKind::Identity => Ok(identity_workload(shape)),
        }
    }
}
