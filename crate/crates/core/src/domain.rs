//! Data vectors, cell conditions and workload builders.
//!
//! Cells are linearized row-major over the attribute order: the last
//! attribute varies fastest. Every builder and the record ingestion path
//! share [`DomainShape::index_of`].

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bucket counts per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainShape {
    dims: Vec<usize>,
}

impl DomainShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDomain("at least one attribute is required".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidDomain(format!(
                "attribute {pos} has zero buckets"
            )));
        }
        let mut n: usize = 1;
        for &d in &dims {
            n = n
                .checked_mul(d)
                .ok_or_else(|| Error::InvalidDomain("cell count overflows".into()))?;
        }
        Ok(Self { dims })
    }

    pub fn one_dim(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    /// Number of cells.
    pub fn n(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dims.len());
        multi
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }
}

impl fmt::Display for DomainShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", parts.join("x"))
    }
}

/// A single attribute value of an input record.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => write!(f, "{s}"),
            Value::Number(x) => write!(f, "{x}"),
        }
    }
}

/// Buckets of one attribute. Numeric buckets are half-open `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Buckets {
    Categorical(Vec<Vec<String>>),
    Numeric(Vec<(f64, f64)>),
}

impl Buckets {
    /// Contiguous numeric buckets from sorted edges `e_0 < e_1 < … < e_d`.
    pub fn from_edges(edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidCellConditions(
                "numeric attribute needs at least two edges".into(),
            ));
        }
        Ok(Buckets::Numeric(
            edges.windows(2).map(|w| (w[0], w[1])).collect(),
        ))
    }

    pub fn len(&self) -> usize {
        match self {
            Buckets::Categorical(b) => b.len(),
            Buckets::Numeric(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn matches(&self, value: &Value) -> Vec<usize> {
        match self {
            Buckets::Categorical(sets) => {
                let key = value.to_string();
                sets.iter()
                    .enumerate()
                    .filter(|(_, set)| set.contains(&key))
                    .map(|(i, _)| i)
                    .collect()
            }
            Buckets::Numeric(ranges) => {
                let x = match value {
                    Value::Number(x) => *x,
                    Value::Text(s) => match s.trim().parse::<f64>() {
                        Ok(x) => x,
                        Err(_) => return Vec::new(),
                    },
                };
                ranges
                    .iter()
                    .enumerate()
                    .filter(|(_, &(lo, hi))| lo <= x && x < hi)
                    .map(|(i, _)| i)
                    .collect()
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidCellConditions(format!(
                "attribute '{name}' has no buckets"
            )));
        }
        match self {
            Buckets::Categorical(sets) => {
                let mut seen = BTreeSet::new();
                for set in sets {
                    if set.is_empty() {
                        return Err(Error::InvalidCellConditions(format!(
                            "attribute '{name}' has an empty category bucket"
                        )));
                    }
                    for c in set {
                        if !seen.insert(c.as_str()) {
                            return Err(Error::InvalidCellConditions(format!(
                                "attribute '{name}': category '{c}' appears in two buckets"
                            )));
                        }
                    }
                }
            }
            Buckets::Numeric(ranges) => {
                for &(lo, hi) in ranges {
                    if !(lo < hi) {
                        return Err(Error::InvalidCellConditions(format!(
                            "attribute '{name}': empty range [{lo}, {hi})"
                        )));
                    }
                }
                let mut sorted = ranges.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                for w in sorted.windows(2) {
                    if w[1].0 < w[0].1 {
                        return Err(Error::InvalidCellConditions(format!(
                            "attribute '{name}': ranges [{}, {}) and [{}, {}) overlap",
                            w[0].0, w[0].1, w[1].0, w[1].1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub buckets: Buckets,
}

/// Per-attribute bucket conditions; each cell is the conjunction of one
/// bucket per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConditions {
    attributes: Vec<Attribute>,
}

impl CellConditions {
    /// Validates pairwise disjointness within each attribute. Use
    /// [`CellConditions::new_unchecked`] to defer the check to ingestion.
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let cc = Self::new_unchecked(attributes)?;
        for a in &cc.attributes {
            a.buckets.validate(&a.name)?;
        }
        Ok(cc)
    }

    pub fn new_unchecked(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::InvalidCellConditions("no attributes".into()));
        }
        let mut names = BTreeSet::new();
        for a in &attributes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::InvalidCellConditions(format!(
                    "duplicate attribute '{}'",
                    a.name
                )));
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn shape(&self) -> DomainShape {
        DomainShape::new(self.attributes.iter().map(|a| a.buckets.len()).collect())
            .expect("bucket counts validated at construction")
    }

    /// Index of the unique cell whose condition `record` satisfies. `index`
    /// is the 1-based record number used in error messages.
    pub fn cell_of(&self, index: usize, record: &[Value]) -> Result<usize> {
        let describe = || {
            record
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        if record.len() != self.attributes.len() {
            return Err(Error::DimensionMismatch(format!(
                "record {index} has {} values, expected {}",
                record.len(),
                self.attributes.len()
            )));
        }
        let mut multi = Vec::with_capacity(record.len());
        for (attr, value) in self.attributes.iter().zip(record) {
            let hits = attr.buckets.matches(value);
            match hits.as_slice() {
                [] => {
                    return Err(Error::NoMatchingCell {
                        index,
                        record: describe(),
                    })
                }
                [b] => multi.push(*b),
                _ => {
                    return Err(Error::InvalidCellConditions(format!(
                        "record {index} ({}) satisfies {} buckets of attribute '{}'",
                        describe(),
                        hits.len(),
                        attr.name
                    )))
                }
            }
        }
        Ok(self.shape().index_of(&multi))
    }

    /// Human-readable condition of cell `index`.
    pub fn describe_cell(&self, index: usize) -> String {
        let multi = self.shape().multi_index(index);
        self.attributes
            .iter()
            .zip(multi)
            .map(|(a, b)| match &a.buckets {
                Buckets::Categorical(sets) => format!("{}∈{{{}}}", a.name, sets[b].join(",")),
                Buckets::Numeric(r) => format!("{}∈[{},{})", a.name, r[b].0, r[b].1),
            })
            .collect::<Vec<_>>()
            .join(" ∧ ")
    }
}

/// Cell counts of a database instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataVector {
    counts: Vec<u64>,
}

impl DataVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.counts.len(), self.counts.iter().map(|&c| c as f64))
    }
}

pub fn build_data_vector(records: &[Vec<Value>], cc: &CellConditions) -> Result<DataVector> {
    let mut x = DataVector::zeros(cc.shape().n());
    for (i, r) in records.iter().enumerate() {
        let cell = cc.cell_of(i + 1, r)?;
        x.counts[cell] += 1;
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadFamily {
    Range,
    Marginal,
    RangeMarginal,
    Cdf,
    Predicate,
    Adhoc,
}

impl fmt::Display for WorkloadFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WorkloadFamily::Range => "range",
            WorkloadFamily::Marginal => "marginal",
            WorkloadFamily::RangeMarginal => "range-marginal",
            WorkloadFamily::Cdf => "cdf",
            WorkloadFamily::Predicate => "predicate",
            WorkloadFamily::Adhoc => "adhoc",
        };
        f.write_str(s)
    }
}

/// An m×n matrix of linear counting queries over the cells of `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    matrix: DMatrix<f64>,
    shape: DomainShape,
    family: WorkloadFamily,
    rows: Option<Vec<String>>,
}

impl Workload {
    pub fn new(matrix: DMatrix<f64>, shape: DomainShape, family: WorkloadFamily) -> Result<Self> {
        if matrix.ncols() != shape.n() {
            return Err(Error::InvalidWorkload(format!(
                "matrix has {} columns but the domain has {} cells",
                matrix.ncols(),
                shape.n()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidWorkload("workload has no queries".into()));
        }
        if let Some(i) = (0..matrix.nrows()).find(|&i| matrix.row(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::InvalidWorkload(format!("row {i} is all zero")));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWorkload("non-finite entry".into()));
        }
        Ok(Self {
            matrix,
            shape,
            family,
            rows: None,
        })
    }

    /// An ad hoc workload over a one-dimensional domain of `matrix.ncols()` cells.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let shape = DomainShape::one_dim(matrix.ncols())?;
        Self::new(matrix, shape, WorkloadFamily::Adhoc)
    }

    pub fn with_descriptions(mut self, rows: Vec<String>) -> Result<Self> {
        if rows.len() != self.matrix.nrows() {
            return Err(Error::InvalidWorkload(format!(
                "{} descriptions for {} rows",
                rows.len(),
                self.matrix.nrows()
            )));
        }
        self.rows = Some(rows);
        Ok(self)
    }

    /// Reinterprets the cells under a different shape with the same cell count.
    pub fn with_shape(mut self, shape: DomainShape) -> Result<Self> {
        if shape.n() != self.shape.n() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape} has {} cells, workload has {}",
                shape.n(),
                self.shape.n()
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn family(&self) -> WorkloadFamily {
        self.family
    }

    pub fn descriptions(&self) -> Option<&[String]> {
        self.rows.as_deref()
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    /// Stacks the rows of `other` under `self`; the family becomes ad hoc
    /// unless both agree.
    pub fn union(&self, other: &Workload) -> Result<Workload> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "cannot combine workloads over {} and {}",
                self.shape, other.shape
            )));
        }
        let mut matrix = DMatrix::zeros(self.m() + other.m(), self.n());
        matrix.rows_mut(0, self.m()).copy_from(&self.matrix);
        matrix.rows_mut(self.m(), other.m()).copy_from(&other.matrix);
        let family = if self.family == other.family {
            self.family
        } else {
            WorkloadFamily::Adhoc
        };
        let mut w = Workload::new(matrix, self.shape.clone(), family)?;
        if let (Some(a), Some(b)) = (&self.rows, &other.rows) {
            w.rows = Some(a.iter().chain(b).cloned().collect());
        }
        Ok(w)
    }
}

/// All `d(d+1)/2` closed intervals `[lo, hi]` over `d` buckets, lo-major.
pub(crate) fn intervals(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for lo in 0..d {
        for hi in lo..d {
            out.push((lo, hi));
        }
    }
    out
}

/// Sets `row[c] = 1` for every cell `c` inside the box `lo..=hi`.
fn fill_box(row: &mut [f64], shape: &DomainShape, lo: &[usize], hi: &[usize]) {
    let mut cur = lo.to_vec();
    loop {
        row[shape.index_of(&cur)] = 1.0;
        let mut axis = cur.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo[axis];
        }
    }
}

fn box_label(lo: &[usize], hi: &[usize]) -> String {
    lo.iter()
        .zip(hi)
        .map(|(l, h)| format!("[{l}..{h}]"))
        .collect::<Vec<_>>()
        .join("x")
}

fn boxes_to_workload(
    shape: &DomainShape,
    boxes: &[(Vec<usize>, Vec<usize>)],
    family: WorkloadFamily,
) -> Result<Workload> {
    let n = shape.n();
    let mut data = vec![0.0; boxes.len() * n];
    for (row, (lo, hi)) in data.chunks_mut(n).zip(boxes) {
        fill_box(row, shape, lo, hi);
    }
    let matrix = DMatrix::from_row_slice(boxes.len(), n, &data);
    let labels = boxes.iter().map(|(lo, hi)| box_label(lo, hi)).collect();
    Workload::new(matrix, shape.clone(), family)?.with_descriptions(labels)
}

/// Cartesian product of per-axis choices, last axis fastest.
fn product<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for item in axis {
                let mut p = prefix.clone();
                p.push(item.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Every axis-aligned hyper-rectangle of cells.
pub fn all_range_workload(shape: &DomainShape) -> Workload {
    let axes: Vec<Vec<(usize, usize)>> = shape.dims().iter().map(|&d| intervals(d)).collect();
    let boxes: Vec<_> = product(&axes)
        .into_iter()
        .map(|iv| iv.into_iter().unzip())
        .collect();
    boxes_to_workload(shape, &boxes, WorkloadFamily::Range).expect("range rows are nonzero")
}

/// `count` random range queries drawn by two-step sampling: each attribute
/// is constrained with probability 1/2 (redrawing an empty selection), then
/// a uniformly random interval is drawn on each constrained attribute.
/// Unconstrained attributes span their full range.
pub fn random_range_workload(shape: &DomainShape, count: usize, seed: u64) -> Result<Workload> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = shape.k();
    let mut boxes = Vec::with_capacity(count);
    for _ in 0..count {
        let selected: Vec<bool> = loop {
            let s: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
            if s.iter().any(|&b| b) {
                break s;
            }
        };
        let mut lo = Vec::with_capacity(k);
        let mut hi = Vec::with_capacity(k);
        for (&d, &sel) in shape.dims().iter().zip(&selected) {
            if sel {
                let pick = rng.random_range(0..d * (d + 1) / 2);
                let (l, h) = nth_interval(d, pick);
                lo.push(l);
                hi.push(h);
            } else {
                lo.push(0);
                hi.push(d - 1);
            }
        }
        boxes.push((lo, hi));
    }
    boxes_to_workload(shape, &boxes, WorkloadFamily::Range)
}

/// The `k`-th interval in the lo-major order of [`intervals`].
fn nth_interval(d: usize, mut k: usize) -> (usize, usize) {
    for lo in 0..d {
        let span = d - lo;
        if k < span {
            return (lo, lo + k);
        }
        k -= span;
    }
    unreachable!("interval index out of range")
}

/// All `k`-element attribute subsets of a `num_attrs`-attribute domain,
/// lexicographic.
pub fn k_way_subsets(num_attrs: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= num_attrs {
        rec(0, num_attrs, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Marginal (`range = false`) or range-marginal (`range = true`) queries
/// over the given attribute subsets. Attribute indices are 0-based. The
/// empty subset contributes the single total-count row.
pub fn marginal_workload(shape: &DomainShape, subsets: &[Vec<usize>], range: bool) -> Result<Workload> {
    if subsets.is_empty() {
        return Err(Error::InvalidArgument("no attribute subsets given".into()));
    }
    let mut seen = BTreeSet::new();
    let mut boxes = Vec::new();
    for subset in subsets {
        let set: BTreeSet<usize> = subset.iter().copied().collect();
        if set.len() != subset.len() {
            return Err(Error::InvalidArgument(format!(
                "subset {subset:?} repeats an attribute"
            )));
        }
        if let Some(&bad) = set.iter().find(|&&a| a >= shape.k()) {
            return Err(Error::InvalidArgument(format!(
                "attribute {bad} out of range for a {}-attribute domain",
                shape.k()
            )));
        }
        if !seen.insert(set.clone()) {
            return Err(Error::InvalidArgument(format!("duplicate subset {subset:?}")));
        }
        let axes: Vec<Vec<(usize, usize)>> = shape
            .dims()
            .iter()
            .enumerate()
            .map(|(a, &d)| {
                if !set.contains(&a) {
                    vec![(0, d - 1)]
                } else if range {
                    intervals(d)
                } else {
                    (0..d).map(|b| (b, b)).collect()
                }
            })
            .collect();
        boxes.extend(product(&axes).into_iter().map(|iv| iv.into_iter().unzip()));
    }
    let family = if range {
        WorkloadFamily::RangeMarginal
    } else {
        WorkloadFamily::Marginal
    };
    boxes_to_workload(shape, &boxes, family)
}

/// Prefix counts over a one-dimensional domain.
pub fn cdf_workload(shape: &DomainShape) -> Result<Workload> {
    if shape.k() != 1 {
        return Err(Error::UnsupportedShape(format!(
            "cdf workloads need a one-dimensional domain, got {shape}"
        )));
    }
    let n = shape.n();
    let boxes: Vec<_> = (0..n).map(|i| (vec![0], vec![i])).collect();
    let mut w = boxes_to_workload(shape, &boxes, WorkloadFamily::Cdf)?;
    w.rows = Some((0..n).map(|i| format!("cells 0..={i}")).collect());
    Ok(w)
}

pub fn identity_workload(shape: &DomainShape) -> Workload {
    let n = shape.n();
    Workload::new(DMatrix::identity(n, n), shape.clone(), WorkloadFamily::Adhoc)
        .expect("identity rows are nonzero")
}

/// Reorders cells: column `j` of the result is column `perm[j]` of `w`.
pub fn permute_cells(w: &Workload, perm: &[usize]) -> Result<Workload> {
    let n = w.n();
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    let matrix = w.matrix.select_columns(perm);
    let mut out = Workload::new(matrix, w.shape.clone(), WorkloadFamily::Adhoc)?;
    out.rows = w.rows.clone();
    Ok(out)
}

/// Scales every query to unit L2 norm.
pub fn normalize_rows(w: &Workload) -> Result<Workload> {
    let mut matrix = w.matrix.clone();
    for (i, mut row) in matrix.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::InvalidWorkload(format!("row {i} is all zero")));
        }
        row /= norm;
    }
    let mut out = Workload::new(matrix, w.shape.clone(), w.family)?;
    out.rows = w.rows.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(w: &Workload) -> Vec<Vec<f64>> {
        w.matrix()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    #[test]
    fn shape_rejects_zero_bucket() {
        assert!(DomainShape::new(vec![0]).is_err());
        assert!(DomainShape::new(vec![]).is_err());
    }

    #[test]
    fn multi_index_round_trip() {
        let s = DomainShape::new(vec![2, 3, 4]).unwrap();
        for i in 0..s.n() {
            assert_eq!(s.index_of(&s.multi_index(i)), i);
        }
        assert_eq!(s.multi_index(5), vec![0, 1, 1]);
    }

    #[test]
    fn all_range_on_two_cells() {
        let w = all_range_workload(&DomainShape::one_dim(2).unwrap());
        let mut r = rows(&w);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(r, vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn all_range_single_cell_and_grid() {
        assert_eq!(rows(&all_range_workload(&DomainShape::one_dim(1).unwrap())), vec![vec![1.0]]);
        assert_eq!(all_range_workload(&DomainShape::new(vec![2, 2]).unwrap()).m(), 9);
    }

    #[test]
    fn random_ranges_on_two_cells_are_ranges() {
        let shape = DomainShape::one_dim(2).unwrap();
        let all = rows(&all_range_workload(&shape));
        let w = random_range_workload(&shape, 1000, 11).unwrap();
        for r in rows(&w) {
            assert!(all.contains(&r), "{r:?}");
        }
    }

    #[test]
    fn random_ranges_are_deterministic() {
        let shape = DomainShape::one_dim(4).unwrap();
        let a = random_range_workload(&shape, 5, 3).unwrap();
        let b = random_range_workload(&shape, 5, 3).unwrap();
        assert_eq!(a, b);
        assert!(random_range_workload(&shape, 0, 3).is_err());
    }

    #[test]
    fn one_way_point_marginals() {
        let shape = DomainShape::new(vec![2, 2]).unwrap();
        let w = marginal_workload(&shape, &[vec![0], vec![1]], false).unwrap();
        assert_eq!(
            rows(&w),
            vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ]
        );
    }

    #[test]
    fn empty_subset_is_total() {
        let shape = DomainShape::one_dim(2).unwrap();
        let w = marginal_workload(&shape, &[vec![]], false).unwrap();
        assert_eq!(rows(&w), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn range_marginal_row_count() {
        let shape = DomainShape::new(vec![2, 4]).unwrap();
        let w = marginal_workload(&shape, &[vec![1]], true).unwrap();
        assert_eq!(w.m(), 10);
        assert_eq!(w.family(), WorkloadFamily::RangeMarginal);
    }

    #[test]
    fn marginal_rejects_duplicates() {
        let shape = DomainShape::new(vec![2, 2]).unwrap();
        assert!(marginal_workload(&shape, &[vec![0], vec![0]], false).is_err());
        assert!(marginal_workload(&shape, &[vec![0, 1], vec![1, 0]], false).is_err());
        assert!(marginal_workload(&shape, &[vec![2]], false).is_err());
    }

    #[test]
    fn cdf_rows_and_column_norms() {
        let w = cdf_workload(&DomainShape::one_dim(3).unwrap()).unwrap();
        assert_eq!(
            rows(&w),
            vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]]
        );
        let w = cdf_workload(&DomainShape::one_dim(1).unwrap()).unwrap();
        assert_eq!(rows(&w), vec![vec![1.0]]);
        let w = cdf_workload(&DomainShape::one_dim(4).unwrap()).unwrap();
        let norms: Vec<f64> = w.matrix().column_iter().map(|c| c.norm()).collect();
        let expect = [2.0, 3f64.sqrt(), 2f64.sqrt(), 1.0];
        for (a, b) in norms.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(cdf_workload(&DomainShape::new(vec![2, 2]).unwrap()).is_err());
    }

    #[test]
    fn permutation_swaps_and_inverts() {
        let w = Workload::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let p = permute_cells(&w, &[1, 0]).unwrap();
        assert_eq!(rows(&p), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(permute_cells(&w, &[0, 1]).unwrap().matrix(), w.matrix());
        assert!(permute_cells(&w, &[0, 0]).is_err());
        assert!(permute_cells(&w, &[0]).is_err());

        let w = all_range_workload(&DomainShape::one_dim(5).unwrap());
        let perm = [3, 0, 4, 1, 2];
        let mut inv = [0; 5];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }
        let back = permute_cells(&permute_cells(&w, &perm).unwrap(), &inv).unwrap();
        assert_eq!(back.matrix(), w.matrix());
    }

    #[test]
    fn normalize_three_four_five() {
        let w = Workload::from_matrix(DMatrix::from_row_slice(1, 2, &[3.0, 4.0])).unwrap();
        let u = normalize_rows(&w).unwrap();
        assert!((u.matrix()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((u.matrix()[(0, 1)] - 0.8).abs() < 1e-15);
        let again = normalize_rows(&u).unwrap();
        assert_eq!(again.matrix(), u.matrix());
    }

    #[test]
    fn workload_rejects_zero_rows() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(Workload::from_matrix(m).is_err());
    }

    #[test]
    fn overlapping_buckets_rejected() {
        let attr = Attribute {
            name: "x".into(),
            buckets: Buckets::Numeric(vec![(0.0, 2.0), (1.0, 3.0)]),
        };
        assert!(CellConditions::new(vec![attr]).is_err());
    }
}
