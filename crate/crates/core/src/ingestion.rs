//! Estimating the model from page-visitation sessions.
//!
//! A session is the ordered list of pages a visitor saw; it ends on its last
//! page. Counting visits, terminations and page-to-page moves gives the
//! node-local statistics from which `W` is estimated:
//!
//! * `w_ij = moves(i -> j) / visits(i)` for `j != i`,
//! * `w_ii = (terminations(i) + moves(i -> i)) / visits(i)`.
//!
//! `A` then follows from the coupling rule.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{
    couple_damping, CandidateMatrix, GeneralizedModel, GraphError, RowStochasticMatrix,
};

/// Default flagging threshold for [`row_drift`].
pub const DEFAULT_DRIFT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("session {session} is empty")]
    EmptySession { session: usize },
    #[error("session {session} visits node {node}, out of range for n = {n}")]
    NodeOutOfRange { session: usize, node: usize, n: usize },
    #[error("node count must be positive")]
    EmptyGraph,
    #[error("dimension mismatch: {0} vs {1} nodes")]
    DimensionMismatch(usize, usize),
    #[error("drift threshold {0} must lie in (0, 2]")]
    InvalidThreshold(f64),
    #[error("node {node}: terminations + transitions = {outflow} but visits = {visits}")]
    InconsistentCounts { node: usize, visits: u64, outflow: u64 },
    #[error("transition {from} -> {to} out of range for n = {n}")]
    TransitionOutOfRange { from: usize, to: usize, n: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Pre-segmented sessions, each a nonempty list of node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisitLog {
    sessions: Vec<Vec<usize>>,
    /// Sessions cut short by a step cap rather than ending naturally.
    force_terminated: usize,
}

impl VisitLog {
    pub fn new(sessions: Vec<Vec<usize>>) -> Result<Self, IngestError> {
        Self::with_force_terminated(sessions, 0)
    }

    pub(crate) fn with_force_terminated(
        sessions: Vec<Vec<usize>>,
        force_terminated: usize,
    ) -> Result<Self, IngestError> {
        if let Some(session) = sessions.iter().position(Vec::is_empty) {
            return Err(IngestError::EmptySession { session });
        }
        Ok(Self {
            sessions,
            force_terminated,
        })
    }

    pub fn sessions(&self) -> &[Vec<usize>] {
        &self.sessions
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn total_visits(&self) -> usize {
        self.sessions.iter().map(Vec::len).sum()
    }

    pub fn force_terminated(&self) -> usize {
        self.force_terminated
    }

    /// Largest node id plus one, or zero for an empty log.
    pub fn inferred_n(&self) -> usize {
        self.sessions
            .iter()
            .flatten()
            .max()
            .map_or(0, |&m| m + 1)
    }
}

/// Per-node visit tallies.
///
/// For every node, `terminations + sum(transitions) == visits`. Self moves
/// are kept apart from terminations here and only merged at estimation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    n: usize,
    visits: Vec<u64>,
    terminations: Vec<u64>,
    transitions: Vec<BTreeMap<usize, u64>>,
}

impl VisitCounts {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            visits: vec![0; n],
            terminations: vec![0; n],
            transitions: vec![BTreeMap::new(); n],
        }
    }

    /// Assembles counts from raw parts, checking the per-node balance.
    pub fn from_parts(
        visits: Vec<u64>,
        terminations: Vec<u64>,
        transitions: Vec<BTreeMap<usize, u64>>,
    ) -> Result<Self, IngestError> {
        let n = visits.len();
        if terminations.len() != n {
            return Err(IngestError::DimensionMismatch(n, terminations.len()));
        }
        if transitions.len() != n {
            return Err(IngestError::DimensionMismatch(n, transitions.len()));
        }
        for (from, row) in transitions.iter().enumerate() {
            if let Some((&to, _)) = row.iter().find(|(&j, _)| j >= n) {
                return Err(IngestError::TransitionOutOfRange { from, to, n });
            }
        }
        let counts = Self {
            n,
            visits,
            terminations,
            transitions,
        };
        for node in 0..n {
            let outflow = counts.outflow(node);
            if outflow != counts.visits[node] {
                return Err(IngestError::InconsistentCounts {
                    node,
                    visits: counts.visits[node],
                    outflow,
                });
            }
        }
        Ok(counts)
    }

    fn outflow(&self, node: usize) -> u64 {
        self.terminations[node] + self.transitions[node].values().sum::<u64>()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    pub fn terminations(&self) -> &[u64] {
        &self.terminations
    }

    pub fn transitions(&self, node: usize) -> &BTreeMap<usize, u64> {
        &self.transitions[node]
    }

    pub fn transition(&self, source: usize, target: usize) -> u64 {
        self.transitions[source].get(&target).copied().unwrap_or(0)
    }

    /// Adds another batch of counts into this one.
    pub fn merge(&mut self, other: &VisitCounts) -> Result<(), IngestError> {
        if self.n != other.n {
            return Err(IngestError::DimensionMismatch(self.n, other.n));
        }
        for i in 0..self.n {
            self.visits[i] += other.visits[i];
            self.terminations[i] += other.terminations[i];
            for (&j, &c) in &other.transitions[i] {
                *self.transitions[i].entry(j).or_insert(0) += c;
            }
        }
        Ok(())
    }

    /// Estimated row `i` of `W` as `(j, w_ij)` in ascending `j`, with
    /// terminations and self moves folded into `w_ii`. `None` when node `i`
    /// was never visited.
    pub fn estimated_row(&self, i: usize) -> Option<Vec<(usize, f64)>> {
        let visits = self.visits[i];
        if visits == 0 {
            return None;
        }
        let total = visits as f64;
        let mut row = Vec::with_capacity(self.transitions[i].len() + 1);
        let stay = self.terminations[i] + self.transition(i, i);
        let mut diagonal_pending = stay > 0;
        for (&j, &c) in &self.transitions[i] {
            if j == i {
                continue;
            }
            if diagonal_pending && i < j {
                row.push((i, stay as f64 / total));
                diagonal_pending = false;
            }
            if c > 0 {
                row.push((j, c as f64 / total));
            }
        }
        if diagonal_pending {
            row.push((i, stay as f64 / total));
        }
        Some(row)
    }
}

fn count_session(counts: &mut VisitCounts, session: &[usize]) {
    for pair in session.windows(2) {
        counts.visits[pair[0]] += 1;
        *counts.transitions[pair[0]].entry(pair[1]).or_insert(0) += 1;
    }
    if let Some(&last) = session.last() {
        counts.visits[last] += 1;
        counts.terminations[last] += 1;
    }
}

fn check_sessions(log: &VisitLog, n: usize) -> Result<(), IngestError> {
    if n == 0 {
        return Err(IngestError::EmptyGraph);
    }
    for (session, pages) in log.sessions.iter().enumerate() {
        if let Some(&node) = pages.iter().find(|&&p| p >= n) {
            return Err(IngestError::NodeOutOfRange { session, node, n });
        }
    }
    Ok(())
}

/// Tallies visits, moves and terminations over every session.
pub fn accumulate(log: &VisitLog, n: usize) -> Result<VisitCounts, IngestError> {
    check_sessions(log, n)?;
    let mut counts = VisitCounts::zeros(n);
    for session in &log.sessions {
        count_session(&mut counts, session);
    }
    Ok(counts)
}

/// Same result as [`accumulate`], counting chunks of sessions on the rayon
/// pool and merging them in chunk order.
pub fn accumulate_parallel(log: &VisitLog, n: usize) -> Result<VisitCounts, IngestError> {
    check_sessions(log, n)?;
    const CHUNK: usize = 4096;
    let partials: Vec<VisitCounts> = log
        .sessions
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts = VisitCounts::zeros(n);
            for session in chunk {
                count_session(&mut counts, session);
            }
            counts
        })
        .collect();
    let mut total = VisitCounts::zeros(n);
    for part in &partials {
        total.merge(part)?;
    }
    Ok(total)
}

/// How to fill the row of a node that was never visited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ZeroVisitPolicy {
    #[default]
    Sink,
    Uniform,
}

/// Estimates `W` from visit proportions and derives `A` by coupling.
pub fn estimate_model(
    counts: &VisitCounts,
    policy: ZeroVisitPolicy,
    eps: f64,
) -> Result<GeneralizedModel, IngestError> {
    let n = counts.n;
    if n == 0 {
        return Err(IngestError::EmptyGraph);
    }
    let mut triplets = Vec::new();
    for i in 0..n {
        match counts.estimated_row(i) {
            Some(row) => triplets.extend(row.into_iter().map(|(j, w)| (i, j, w))),
            None => match policy {
                ZeroVisitPolicy::Sink => triplets.push((i, i, 1.0)),
                ZeroVisitPolicy::Uniform => {
                    triplets.extend((0..n).map(|j| (i, j, 1.0 / n as f64)))
                }
            },
        }
    }
    let candidate = CandidateMatrix::from_triplets(n, triplets)?;
    let w = RowStochasticMatrix::try_from_candidate(&candidate)?;
    let a = couple_damping(&w, eps)?;
    Ok(GeneralizedModel::new(w, a)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowDrift {
    Distance { distance: f64, flagged: bool },
    /// One of the snapshots has no visits for this node.
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub threshold: f64,
    pub rows: Vec<RowDrift>,
}

impl DriftReport {
    pub fn flagged(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, RowDrift::Distance { flagged: true, .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

/// L1 distance between the estimated rows of two snapshots, node by node.
pub fn row_drift(
    old: &VisitCounts,
    new: &VisitCounts,
    threshold: f64,
) -> Result<DriftReport, IngestError> {
    if old.n != new.n {
        return Err(IngestError::DimensionMismatch(old.n, new.n));
    }
    if !(threshold > 0.0 && threshold <= 2.0) {
        return Err(IngestError::InvalidThreshold(threshold));
    }
    let rows = (0..old.n)
        .map(|i| match (old.estimated_row(i), new.estimated_row(i)) {
            (Some(p), Some(q)) => {
                let distance = sparse_l1(&p, &q).min(2.0);
                RowDrift::Distance {
                    distance,
                    flagged: distance > threshold,
                }
            }
            _ => RowDrift::InsufficientData,
        })
        .collect();
    Ok(DriftReport { threshold, rows })
}

fn sparse_l1(p: &[(usize, f64)], q: &[(usize, f64)]) -> f64 {
    let (mut a, mut b) = (p.iter().peekable(), q.iter().peekable());
    let mut total = 0.0;
    loop {
        match (a.peek(), b.peek()) {
            (Some(&&(i, x)), Some(&&(j, y))) => {
                if i == j {
                    total += (x - y).abs();
                    a.next();
                    b.next();
                } else if i < j {
                    total += x;
                    a.next();
                } else {
                    total += y;
                    b.next();
                }
            }
            (Some(&&(_, x)), None) => {
                total += x;
                a.next();
            }
            (None, Some(&&(_, y))) => {
                total += y;
                b.next();
            }
            (None, None) => return total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate, DEFAULT_EPS};
    use proptest::prelude::*;

    fn log(sessions: &[&[usize]]) -> VisitLog {
        VisitLog::new(sessions.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    fn counts_of(visits: u64, terminations: u64, moves: &[(usize, u64)], n: usize, node: usize) -> VisitCounts {
        let mut v = vec![0; n];
        let mut t = vec![0; n];
        let mut tr = vec![BTreeMap::new(); n];
        v[node] = visits;
        t[node] = terminations;
        tr[node] = moves.iter().copied().collect();
        VisitCounts::from_parts(v, t, tr).unwrap()
    }

    #[test]
    fn single_move() {
        let c = accumulate(&log(&[&[0, 1]]), 2).unwrap();
        assert_eq!(c.visits(), &[1, 1]);
        assert_eq!(c.terminations(), &[0, 1]);
        assert_eq!(c.transition(0, 1), 1);
        assert_eq!(c.transitions(1).len(), 0);
    }

    #[test]
    fn length_one_sessions() {
        let c = accumulate(&log(&[&[0], &[0]]), 1).unwrap();
        assert_eq!(c.visits(), &[2]);
        assert_eq!(c.terminations(), &[2]);
        assert!(c.transitions(0).is_empty());
    }

    #[test]
    fn self_moves_are_transitions() {
        let c = accumulate(&log(&[&[0, 1], &[0, 0, 1]]), 2).unwrap();
        assert_eq!(c.visits(), &[3, 2]);
        assert_eq!(c.terminations(), &[0, 2]);
        assert_eq!(c.transition(0, 0), 1);
        assert_eq!(c.transition(0, 1), 2);
    }

    #[test]
    fn accumulate_errors() {
        assert_eq!(
            accumulate(&log(&[&[0], &[1, 4]]), 3),
            Err(IngestError::NodeOutOfRange { session: 1, node: 4, n: 3 })
        );
        assert_eq!(
            VisitLog::new(vec![vec![0], vec![]]),
            Err(IngestError::EmptySession { session: 1 })
        );
    }

    #[test]
    fn estimate_direct_ratio() {
        let c = counts_of(10, 4, &[(1, 6)], 2, 0);
        let m = estimate_model(&c, ZeroVisitPolicy::Sink, DEFAULT_EPS).unwrap();
        assert_eq!(m.w().row(0), (&[0usize, 1][..], &[0.4, 0.6][..]));
        assert!((m.a().values()[0] - 0.6).abs() < 1e-15);
        // node 1 never visited
        assert_eq!(m.w().row(1), (&[1usize][..], &[1.0][..]));
        assert_eq!(m.a().values()[1], DEFAULT_EPS);
    }

    #[test]
    fn estimate_uniform_zero_visit() {
        let c = counts_of(10, 4, &[(1, 6)], 2, 0);
        let m = estimate_model(&c, ZeroVisitPolicy::Uniform, DEFAULT_EPS).unwrap();
        assert_eq!(m.w().row(1), (&[0usize, 1][..], &[0.5, 0.5][..]));
        assert!((m.a().values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_terminating_node_is_pure_sink() {
        let c = counts_of(7, 7, &[], 3, 2);
        let m = estimate_model(&c, ZeroVisitPolicy::Sink, 1e-6).unwrap();
        assert_eq!(m.w().diagonal(2), 1.0);
        assert_eq!(m.a().values()[2], 1e-6);
    }

    #[test]
    fn self_moves_fold_into_diagonal() {
        let c = accumulate(&log(&[&[1, 1, 0], &[1]]), 2).unwrap();
        // node 1: 3 visits, 1 termination, 1 self move, 1 move to 0
        let row = c.estimated_row(1).unwrap();
        assert_eq!(row, vec![(0, 1.0 / 3.0), (1, 2.0 / 3.0)]);
    }

    #[test]
    fn from_parts_checks_balance() {
        let err = VisitCounts::from_parts(vec![3], vec![1], vec![BTreeMap::from([(0, 1)])]);
        assert_eq!(
            err,
            Err(IngestError::InconsistentCounts { node: 0, visits: 3, outflow: 2 })
        );
        let err = VisitCounts::from_parts(vec![1], vec![0], vec![BTreeMap::from([(5, 1)])]);
        assert!(matches!(err, Err(IngestError::TransitionOutOfRange { .. })));
    }

    #[test]
    fn drift_examples() {
        let a = counts_of(4, 2, &[(1, 2)], 2, 0);
        let report = row_drift(&a, &a, 0.1).unwrap();
        assert_eq!(report.rows[0], RowDrift::Distance { distance: 0.0, flagged: false });
        assert_eq!(report.rows[1], RowDrift::InsufficientData);
        assert!(report.flagged().is_empty());

        let terminate = counts_of(4, 4, &[], 2, 0);
        let leave = counts_of(4, 0, &[(1, 4)], 2, 0);
        let report = row_drift(&terminate, &leave, 2.0).unwrap();
        assert_eq!(report.rows[0], RowDrift::Distance { distance: 2.0, flagged: false });
        let report = row_drift(&terminate, &leave, 1.999).unwrap();
        assert_eq!(report.flagged(), vec![0]);

        let report = row_drift(&a, &terminate, 0.1).unwrap();
        assert_eq!(report.rows[0], RowDrift::Distance { distance: 1.0, flagged: true });
    }

    #[test]
    fn drift_errors() {
        let a = VisitCounts::zeros(2);
        let b = VisitCounts::zeros(3);
        assert_eq!(row_drift(&a, &b, 0.1), Err(IngestError::DimensionMismatch(2, 3)));
        assert_eq!(row_drift(&a, &a, 0.0), Err(IngestError::InvalidThreshold(0.0)));
        assert_eq!(row_drift(&a, &a, 2.5), Err(IngestError::InvalidThreshold(2.5)));
    }

    fn sessions(n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
        prop::collection::vec(prop::collection::vec(0..n, 1..8), 0..30)
    }

    proptest! {
        #[test]
        fn merge_matches_concatenation(a in sessions(6), b in sessions(6)) {
            let mut merged = accumulate(&VisitLog::new(a.clone()).unwrap(), 6).unwrap();
            merged.merge(&accumulate(&VisitLog::new(b.clone()).unwrap(), 6).unwrap()).unwrap();
            let whole = accumulate(&VisitLog::new([a, b].concat()).unwrap(), 6).unwrap();
            prop_assert_eq!(&merged, &whole);
        }

        #[test]
        fn counts_balance(s in sessions(6)) {
            let c = accumulate(&VisitLog::new(s).unwrap(), 6).unwrap();
            for i in 0..6 {
                prop_assert_eq!(c.outflow(i), c.visits()[i]);
            }
        }

        #[test]
        fn estimate_validates(s in sessions(6), uniform in any::<bool>()) {
            let c = accumulate(&VisitLog::new(s).unwrap(), 6).unwrap();
            let policy = if uniform { ZeroVisitPolicy::Uniform } else { ZeroVisitPolicy::Sink };
            let m = estimate_model(&c, policy, DEFAULT_EPS).unwrap();
            let candidate = CandidateMatrix::from_triplets(6, m.w().triplets()).unwrap();
            prop_assert!(validate(&candidate).ok);
        }

        #[test]
        fn duplicating_sessions_changes_nothing(s in sessions(6)) {
            let once = accumulate(&VisitLog::new(s.clone()).unwrap(), 6).unwrap();
            let twice = accumulate(&VisitLog::new([s.clone(), s].concat()).unwrap(), 6).unwrap();
            let a = estimate_model(&once, ZeroVisitPolicy::Sink, DEFAULT_EPS).unwrap();
            let b = estimate_model(&twice, ZeroVisitPolicy::Sink, DEFAULT_EPS).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn drift_in_range(a in sessions(5), b in sessions(5)) {
            let ca = accumulate(&VisitLog::new(a).unwrap(), 5).unwrap();
            let cb = accumulate(&VisitLog::new(b).unwrap(), 5).unwrap();
            for r in row_drift(&ca, &cb, 0.1).unwrap().rows {
                if let RowDrift::Distance { distance, .. } = r {
                    prop_assert!((0.0..=2.0).contains(&distance));
                }
            }
        }

        #[test]
        fn parallel_accumulate_matches(s in prop::collection::vec(prop::collection::vec(0usize..4, 1..5), 0..9000)) {
            let log = VisitLog::new(s).unwrap();
            prop_assert_eq!(accumulate(&log, 4).unwrap(), accumulate_parallel(&log, 4).unwrap());
        }
    }
}
