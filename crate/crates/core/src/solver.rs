//! Total-effects matrix and centrality vector, by three routes that check
//! one another:
//!
//! * dense: `V = (I - AW)^-1 (I - A)` through an LU factorization with
//!   partial pivoting,
//! * series: the walk sum `(I + AW + (AW)^2 + ... + (AW)^K)(I - A)`,
//! * iterative: a sparse fixed point on the transposed system that yields
//!   the column-averaged centrality without forming `V`.
//!
//! The classical scalar-damping iteration lives here as well; it is the
//! special case `A = alpha * I`.
//!
//! For the iterative route, note that `r = (1/n) V^T 1 = (I - A) y` where
//! `y` solves `(I - W^T A) y = (1/n) 1`. The map `y -> (1/n) 1 + W^T A y` is
//! an L1 contraction with factor `max_i a_ii`, and starting from `y = 0`
//! the mass of `(I - A) y` after each step falls short of one by exactly
//! the last step length.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{GeneralizedModel, GraphError, RowStochasticMatrix};

/// Largest `n` accepted by the dense route unless overridden.
pub const DENSE_MAX_N: usize = 4096;

/// Below this size the transposed product runs on one thread.
const PARALLEL_MIN_N: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("damping alpha = {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("n = {n} exceeds the dense solver limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("I - AW is numerically singular")]
    Singular,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("excluding the diagonal needs at least two nodes")]
    TooFewNodes,
    #[error("exclude_diagonal averaging requires the dense solver")]
    ModeNeedsDense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Threshold on the L1 residual of the fixed-point map.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 10_000,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(SolveError::InvalidOptions(format!("tol = {} must be positive", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(SolveError::InvalidOptions("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AveragingMode {
    /// Average each column of `V` over all `n` rows.
    #[default]
    FullN,
    /// Average each column over the `n - 1` off-diagonal rows.
    ExcludeDiagonal,
}

impl AveragingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AveragingMode::FullN => "full_n",
            AveragingMode::ExcludeDiagonal => "exclude_diagonal",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    #[default]
    Iterative,
}

/// Dense `n x n` total-effects matrix, row-major. Entry `(i, j)` is the
/// relative net influence of `j` on `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectsMatrix {
    n: usize,
    data: Vec<f64>,
}

impl EffectsMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "effects matrix must be square");
        Self {
            n,
            data: rows.concat(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &EffectsMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Centrality scores with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector {
    pub scores: Vec<f64>,
    pub mode: AveragingMode,
    pub normalized: bool,
    /// Fixed-point map applications; `None` for the dense route.
    pub iterations: Option<usize>,
    /// Final L1 residual (iterative) or max-norm linear-system residual
    /// (dense).
    pub residual: f64,
}

impl CentralityVector {
    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        l1_distance(&self.scores, other)
    }
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `V` by direct factorization of `I - AW`, limited to [`DENSE_MAX_N`].
pub fn total_effects_dense(model: &GeneralizedModel) -> Result<EffectsMatrix, SolveError> {
    total_effects_dense_with_limit(model, DENSE_MAX_N)
}

pub fn total_effects_dense_with_limit(
    model: &GeneralizedModel,
    limit: usize,
) -> Result<EffectsMatrix, SolveError> {
    let n = model.n();
    if n > limit {
        return Err(SolveError::TooLarge { n, limit });
    }
    let a = model.a().values();
    let mut system = DMatrix::<f64>::identity(n, n);
    for (i, j, w) in model.w().triplets() {
        system[(i, j)] -= a[i] * w;
    }
    let rhs = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, a.iter().map(|x| 1.0 - x)));
    let solution = system.lu().solve(&rhs).ok_or(SolveError::Singular)?;
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        data.extend(solution.row(i).iter());
    }
    Ok(EffectsMatrix { n, data })
}

/// `max |(I - AW) V - (I - A)|` over all entries.
pub fn system_residual(model: &GeneralizedModel, v: &EffectsMatrix) -> f64 {
    let n = model.n();
    assert_eq!(n, v.n());
    let a = model.a().values();
    let w = model.w();
    let mut worst = 0.0f64;
    let mut acc = vec![0.0; n];
    for i in 0..n {
        acc.copy_from_slice(v.row(i));
        let (cols, vals) = w.row(i);
        for (&k, &wik) in cols.iter().zip(vals) {
            let scale = a[i] * wik;
            for (x, vk) in acc.iter_mut().zip(v.row(k)) {
                *x -= scale * vk;
            }
        }
        acc[i] -= 1.0 - a[i];
        worst = acc.iter().fold(worst, |m, x| m.max(x.abs()));
    }
    worst
}

/// Partial walk sum `V_K = (sum_{k=0..K} (AW)^k)(I - A)`.
///
/// Built term by term from `X_0 = I - A`, `X_{k+1} = AW X_k`, using sparse
/// rows of `W` against dense `X_k`.
pub fn series_oracle(model: &GeneralizedModel, order: usize) -> EffectsMatrix {
    let n = model.n();
    let a = model.a().values();
    let w = model.w();
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        term[i * n + i] = 1.0 - a[i];
    }
    let mut sum = term.clone();
    let mut next = vec![0.0; n * n];
    for _ in 0..order {
        next.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let (cols, vals) = w.row(i);
            let out = &mut next[i * n..(i + 1) * n];
            for (&k, &wik) in cols.iter().zip(vals) {
                let scale = a[i] * wik;
                for (x, t) in out.iter_mut().zip(&term[k * n..(k + 1) * n]) {
                    *x += scale * t;
                }
            }
        }
        std::mem::swap(&mut term, &mut next);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    EffectsMatrix { n, data: sum }
}

/// Max-norm bound `a_max^(K+1) / (1 - a_max)` on `V_K - V`.
pub fn series_tail_bound(a_max: f64, order: usize) -> f64 {
    a_max.powi(order as i32 + 1) / (1.0 - a_max)
}

/// Smallest order whose tail bound is at most `target`.
pub fn series_order_for(a_max: f64, target: f64) -> usize {
    let mut order = ((target * (1.0 - a_max)).ln() / a_max.ln()).ceil().max(1.0) as usize - 1;
    while series_tail_bound(a_max, order) > target {
        order += 1;
    }
    order
}

/// Column-averaged centrality of `V`.
pub fn centrality(
    v: &EffectsMatrix,
    mode: AveragingMode,
    renormalize: bool,
) -> Result<CentralityVector, SolveError> {
    let n = v.n();
    if mode == AveragingMode::ExcludeDiagonal && n < 2 {
        return Err(SolveError::TooFewNodes);
    }
    let mut columns = vec![0.0; n];
    for i in 0..n {
        for (c, x) in columns.iter_mut().zip(v.row(i)) {
            *c += x;
        }
    }
    let mut scores: Vec<f64> = match mode {
        AveragingMode::FullN => columns.iter().map(|c| c / n as f64).collect(),
        AveragingMode::ExcludeDiagonal => columns
            .iter()
            .enumerate()
            .map(|(j, c)| (c - v.get(j, j)) / (n - 1) as f64)
            .collect(),
    };
    if renormalize {
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            scores.iter_mut().for_each(|s| *s /= total);
        }
    }
    Ok(CentralityVector {
        scores,
        mode,
        normalized: renormalize || mode == AveragingMode::FullN,
        iterations: None,
        residual: 0.0,
    })
}

/// `W^T` in compressed-row layout: row `j` lists the sources `i` with
/// `w_ij > 0`, in ascending order.
struct Transposed {
    offsets: Vec<usize>,
    sources: Vec<usize>,
    vals: Vec<f64>,
}

impl Transposed {
    fn of(w: &RowStochasticMatrix) -> Self {
        let n = w.n();
        let mut counts = vec![0usize; n + 1];
        for &j in w.col_indices() {
            counts[j + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut sources = vec![0; w.nnz()];
        let mut vals = vec![0.0; w.nnz()];
        for (i, j, x) in w.triplets() {
            let slot = fill[j];
            sources[slot] = i;
            vals[slot] = x;
            fill[j] += 1;
        }
        Self {
            offsets,
            sources,
            vals,
        }
    }

    /// `out[j] = base + scale * sum_i w_ij x_i`, summed in ascending `i`.
    fn apply(&self, x: &[f64], base: f64, scale: f64, out: &mut [f64]) {
        let row = |j: usize| {
            let range = self.offsets[j]..self.offsets[j + 1];
            let dot: f64 = self.sources[range.clone()]
                .iter()
                .zip(&self.vals[range])
                .map(|(&i, &w)| w * x[i])
                .sum();
            base + scale * dot
        };
        if out.len() >= PARALLEL_MIN_N {
            out.par_iter_mut().enumerate().for_each(|(j, o)| *o = row(j));
        } else {
            out.iter_mut().enumerate().for_each(|(j, o)| *o = row(j));
        }
    }
}

/// Classical PageRank, `r <- (1 - alpha)/n + alpha W^T r`.
///
/// Starts from `(1 - alpha)/n` and stops once the normalized iterate has
/// a fixed-point residual at most `opts.tol` in L1.
pub fn classical_pagerank(
    w: &RowStochasticMatrix,
    alpha: f64,
    opts: &SolveOptions,
) -> Result<CentralityVector, SolveError> {
    opts.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SolveError::InvalidAlpha(alpha));
    }
    let n = w.n();
    let transposed = Transposed::of(w);
    let base = (1.0 - alpha) / n as f64;
    let mut current = vec![base; n];
    let mut next = vec![0.0; n];
    let mut iterations = 1;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iters {
        transposed.apply(&current, base, alpha, &mut next);
        iterations += 1;
        // Residual of current / s, expressed through the step just taken.
        let s: f64 = current.iter().sum();
        let shift = base * (1.0 - s);
        residual = current
            .iter()
            .zip(&next)
            .map(|(c, x)| (c - x + shift).abs())
            .sum::<f64>()
            / s;
        if residual <= opts.tol {
            current.iter_mut().for_each(|c| *c /= s);
            return Ok(CentralityVector {
                scores: current,
                mode: AveragingMode::FullN,
                normalized: true,
                iterations: Some(iterations),
                residual,
            });
        }
        std::mem::swap(&mut current, &mut next);
    }
    Err(SolveError::NonConvergence {
        iterations,
        residual,
    })
}

/// Generalized centrality `r = (1/n) V^T 1` without forming `V`.
///
/// Iterates `y <- (1/n) 1 + W^T (A y)` from `y = 0` until the L1 step is at
/// most `opts.tol`, then returns `(I - A) y` rescaled to unit mass.
pub fn generalized_centrality_iterative(
    model: &GeneralizedModel,
    opts: &SolveOptions,
) -> Result<CentralityVector, SolveError> {
    opts.validate()?;
    let n = model.n();
    let a = model.a().values();
    let transposed = Transposed::of(model.w());
    let base = 1.0 / n as f64;
    let mut current = vec![base; n];
    let mut next = vec![0.0; n];
    let mut damped = vec![0.0; n];
    let mut iterations = 1;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iters {
        for ((d, y), ai) in damped.iter_mut().zip(&current).zip(a) {
            *d = ai * y;
        }
        transposed.apply(&damped, base, 1.0, &mut next);
        iterations += 1;
        residual = l1_distance(&current, &next);
        std::mem::swap(&mut current, &mut next);
        if residual <= opts.tol {
            let mut scores: Vec<f64> = current.iter().zip(a).map(|(y, ai)| (1.0 - ai) * y).collect();
            let mass: f64 = scores.iter().sum();
            scores.iter_mut().for_each(|s| *s /= mass);
            return Ok(CentralityVector {
                scores,
                mode: AveragingMode::FullN,
                normalized: true,
                iterations: Some(iterations),
                residual,
            });
        }
    }
    Err(SolveError::NonConvergence {
        iterations,
        residual,
    })
}

/// Centrality of `model` by the chosen route.
///
/// The iterative route only supports [`AveragingMode::FullN`]; the
/// off-diagonal average needs `diag(V)`, which only the dense route has.
pub fn solve_centrality(
    model: &GeneralizedModel,
    solver: SolverKind,
    mode: AveragingMode,
    renormalize: bool,
    opts: &SolveOptions,
) -> Result<CentralityVector, SolveError> {
    match solver {
        SolverKind::Iterative => {
            if mode != AveragingMode::FullN {
                return Err(SolveError::ModeNeedsDense);
            }
            generalized_centrality_iterative(model, opts)
        }
        SolverKind::Dense => {
            let v = total_effects_dense(model)?;
            let mut r = centrality(&v, mode, renormalize)?;
            r.residual = system_residual(model, &v);
            Ok(r)
        }
    }
}
