//! Model inputs: the valued directed graph as a row-stochastic matrix, the
//! per-node damping vector, and the coupling rule that derives one from the
//! other.
//!
//! Everything here is immutable once built. Construction goes through
//! validating constructors, so a [`RowStochasticMatrix`] or a
//! [`GeneralizedModel`] in hand always satisfies its invariants.

use std::fmt;

use thiserror::Error;

/// Tolerance on row sums when checking stochasticity.
pub const ROW_TOL: f64 = 1e-9;

/// Default clamp bound keeping damping values inside the open unit interval.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("node count must be positive")]
    EmptyGraph,
    #[error("node index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("row {row} has {len} entries but the matrix declares n = {n}")]
    RowLength { row: usize, len: usize, n: usize },
    #[error("edge ({from}, {to}) has invalid weight {weight}")]
    InvalidWeight { from: usize, to: usize, weight: f64 },
    #[error("clamp bound eps = {0} must lie in (0, 0.5)")]
    InvalidEps(f64),
    #[error("damping value {value} at node {node} outside [{eps}, 1 - {eps}]")]
    DampingOutOfRange { node: usize, value: f64, eps: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not row-stochastic ({} violation(s))", .0.violations.len())]
    NotStochastic(ValidationReport),
}

/// What to do with a row that has no outgoing weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DanglingPolicy {
    /// The row becomes a self-loop, `w_ii = 1`.
    #[default]
    SelfSink,
    /// The row becomes `1/n` in every column.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// The row does not sum to one; the measured value is the row sum.
    RowSum,
    /// A stored weight lies outside `[0, 1]` or is not finite.
    WeightOutOfRange,
    /// The same `(i, j)` pair appears more than once; the value is `j`.
    DuplicateEntry,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::RowSum => "row-sum",
            ViolationKind::WeightOutOfRange => "weight-out-of-range",
            ViolationKind::DuplicateEntry => "duplicate-entry",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub row: usize,
    pub kind: ViolationKind,
    pub value: f64,
}

/// Outcome of [`validate`]. `ok` is true exactly when `violations` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ok\t{}", self.ok)?;
        for v in &self.violations {
            writeln!(f, "{}\t{}\t{:.17e}", v.row, v.kind, v.value)?;
        }
        Ok(())
    }
}

/// A square matrix that has passed the structural checks but not yet the
/// numeric ones. Entries are kept sorted by `(row, column)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CandidateMatrix {
    /// Builds a candidate from dense rows; zero entries are not stored.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        let n = rows.len();
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut entries = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::RowLength {
                    row: i,
                    len: row.len(),
                    n,
                });
            }
            entries.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(j, &w)| (i, j, w)),
            );
        }
        Ok(Self { n, entries })
    }

    /// Builds a candidate from `(row, column, weight)` triplets against a
    /// declared node count. Duplicates are kept so that `validate` can
    /// report them.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut entries: Vec<_> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            let index = i.max(j);
            if index >= n {
                return Err(GraphError::IndexOutOfRange { index, n });
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    fn rows(&self) -> impl Iterator<Item = (usize, &[(usize, usize, f64)])> {
        let mut start = 0;
        (0..self.n).map(move |i| {
            let len = self.entries[start..]
                .iter()
                .take_while(|e| e.0 == i)
                .count();
            let row = &self.entries[start..start + len];
            start += len;
            (i, row)
        })
    }
}

/// Checks every row-stochastic invariant at [`ROW_TOL`] and lists each
/// violation found, row by row.
pub fn validate(candidate: &CandidateMatrix) -> ValidationReport {
    let mut violations = Vec::new();
    for (i, row) in candidate.rows() {
        let mut sum = 0.0;
        for (k, &(_, j, w)) in row.iter().enumerate() {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                violations.push(Violation {
                    row: i,
                    kind: ViolationKind::WeightOutOfRange,
                    value: w,
                });
            }
            if k > 0 && row[k - 1].1 == j {
                violations.push(Violation {
                    row: i,
                    kind: ViolationKind::DuplicateEntry,
                    value: j as f64,
                });
            }
            sum += w;
        }
        if sum.is_nan() || (sum - 1.0).abs() > ROW_TOL {
            violations.push(Violation {
                row: i,
                kind: ViolationKind::RowSum,
                value: sum,
            });
        }
    }
    ValidationReport::from_violations(violations)
}

/// Sparse row-stochastic matrix in compressed-row layout.
///
/// Column indices within a row are strictly increasing, weights lie in
/// `[0, 1]`, and each row sums to one within [`ROW_TOL`]. Zero weights are
/// not stored; a nonzero diagonal is stored like any other entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RowStochasticMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl RowStochasticMatrix {
    /// Builds `W` from a weighted edge list by summing duplicate pairs and
    /// normalizing each row. Rows with no weight follow `policy`.
    ///
    /// The result does not depend on the order of `edges`.
    pub fn from_edge_list(
        edges: &[(usize, usize, f64)],
        n: usize,
        policy: DanglingPolicy,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        for &(from, to, weight) in edges {
            let index = from.max(to);
            if index >= n {
                return Err(GraphError::IndexOutOfRange { index, n });
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(GraphError::InvalidWeight { from, to, weight });
            }
        }
        let mut sorted = edges.to_vec();
        // Weight is part of the key so duplicate sums are order independent.
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));

        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals = Vec::with_capacity(sorted.len());
        offsets.push(0);
        let mut merged: Vec<(usize, f64)> = Vec::new();
        let mut cursor = 0;
        for i in 0..n {
            merged.clear();
            while cursor < sorted.len() && sorted[cursor].0 == i {
                let (_, j, w) = sorted[cursor];
                match merged.last_mut() {
                    Some((last, acc)) if *last == j => *acc += w,
                    _ => merged.push((j, w)),
                }
                cursor += 1;
            }
            let total: f64 = merged.iter().map(|(_, w)| w).sum();
            if total > 0.0 {
                for &(j, w) in &merged {
                    if w > 0.0 {
                        cols.push(j);
                        vals.push(w / total);
                    }
                }
            } else {
                match policy {
                    DanglingPolicy::SelfSink => {
                        cols.push(i);
                        vals.push(1.0);
                    }
                    DanglingPolicy::Uniform => {
                        let w = 1.0 / n as f64;
                        cols.extend(0..n);
                        vals.extend(std::iter::repeat(w).take(n));
                    }
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self {
            n,
            offsets,
            cols,
            vals,
        })
    }

    /// Accepts a candidate that passes [`validate`], rescaling each row so it
    /// sums to one exactly (up to rounding).
    pub fn try_from_candidate(candidate: &CandidateMatrix) -> Result<Self, GraphError> {
        let report = validate(candidate);
        if !report.ok {
            return Err(GraphError::NotStochastic(report));
        }
        let n = candidate.n;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(candidate.entries.len());
        let mut vals = Vec::with_capacity(candidate.entries.len());
        offsets.push(0);
        for (_, row) in candidate.rows() {
            let sum: f64 = row.iter().map(|e| e.2).sum();
            for &(_, j, w) in row {
                if w > 0.0 {
                    cols.push(j);
                    vals.push(w / sum);
                }
            }
            offsets.push(cols.len());
        }
        Ok(Self {
            n,
            offsets,
            cols,
            vals,
        })
    }

    /// Dense constructor, mostly for tests and small fixtures.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        Self::try_from_candidate(&CandidateMatrix::from_dense(rows)?)
    }

    pub fn identity(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        Ok(Self {
            n,
            offsets: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and weights of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// `w_ii`, zero when not stored.
    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Iterates over stored `(i, j, w_ij)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &w)| (i, j, w))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, j, w) in self.triplets() {
            dense[i][j] = w;
        }
        dense
    }

    /// Damping from the coupling rule, see [`couple_damping`].
    pub fn couple_damping(&self, eps: f64) -> Result<DampingVector, GraphError> {
        couple_damping(self, eps)
    }
}

/// Per-node damping values `a_ii`, each within `[eps, 1 - eps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingVector {
    values: Vec<f64>,
    eps: f64,
}

fn check_eps(eps: f64) -> Result<(), GraphError> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(GraphError::InvalidEps(eps))
    }
}

impl DampingVector {
    pub fn new(values: Vec<f64>, eps: f64) -> Result<Self, GraphError> {
        check_eps(eps)?;
        if values.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        for (node, &value) in values.iter().enumerate() {
            if !(value >= eps && value <= 1.0 - eps) {
                return Err(GraphError::DampingOutOfRange { node, value, eps });
            }
        }
        Ok(Self { values, eps })
    }

    /// `A = alpha * I`.
    pub fn scalar(n: usize, alpha: f64) -> Result<Self, GraphError> {
        Self::new(vec![alpha; n], DEFAULT_EPS)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// The coupling rule `a_ii = 1 - w_ii`, clamped to `[eps, 1 - eps]`.
pub fn couple_damping(w: &RowStochasticMatrix, eps: f64) -> Result<DampingVector, GraphError> {
    check_eps(eps)?;
    let values = (0..w.n())
        .map(|i| (1.0 - w.diagonal(i)).clamp(eps, 1.0 - eps))
        .collect();
    Ok(DampingVector { values, eps })
}

/// The pair `(W, A)` of the generalized model.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedModel {
    w: RowStochasticMatrix,
    a: DampingVector,
}

impl GeneralizedModel {
    pub fn new(w: RowStochasticMatrix, a: DampingVector) -> Result<Self, GraphError> {
        if w.n() != a.len() {
            return Err(GraphError::DimensionMismatch {
                expected: w.n(),
                found: a.len(),
            });
        }
        Ok(Self { w, a })
    }

    /// `A` from the coupling rule.
    pub fn coupled(w: RowStochasticMatrix, eps: f64) -> Result<Self, GraphError> {
        let a = couple_damping(&w, eps)?;
        Ok(Self { w, a })
    }

    /// The classical special case `A = alpha * I`.
    pub fn scalar(w: RowStochasticMatrix, alpha: f64) -> Result<Self, GraphError> {
        let a = DampingVector::scalar(w.n(), alpha)?;
        Ok(Self { w, a })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn w(&self) -> &RowStochasticMatrix {
        &self.w
    }

    pub fn a(&self) -> &DampingVector {
        &self.a
    }

    pub fn a_max(&self) -> f64 {
        self.a.max()
    }

    pub fn into_parts(self) -> (RowStochasticMatrix, DampingVector) {
        (self.w, self.a)
    }
}
