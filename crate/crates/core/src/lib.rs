//! Generalized PageRank with heterogeneous per-node damping.
//!
//! The model pairs a row-stochastic matrix `W` (a valued directed graph)
//! with a diagonal damping matrix `A`, and measures the total effects
//!
//! ```text
//! V = (I - AW)^-1 (I - A) = (I + AW + (AW)^2 + ...)(I - A)
//! ```
//!
//! Node centrality is the column average `r = (1/n) V^T 1`. With
//! `A = alpha * I` this is classical PageRank.
//!
//! * [`graph`] builds and validates `W`, `A` and the model pair.
//! * [`solver`] computes `V` and `r` by dense, series and iterative routes.
//! * [`ingestion`] estimates the model from visit sessions.
//! * [`sim`] generates sessions from a known `W`.
//! * [`formats`] reads and writes the text formats.
//! * [`cli`] is the command-line front end.

pub mod cli;
pub mod formats;
pub mod graph;
pub mod ingestion;
pub mod sim;
pub mod solver;

pub use graph::{
    couple_damping, validate, CandidateMatrix, DampingVector, DanglingPolicy, GeneralizedModel,
    GraphError, RowStochasticMatrix, ValidationReport, Violation, ViolationKind, DEFAULT_EPS,
    ROW_TOL,
};
pub use ingestion::{
    accumulate, accumulate_parallel, estimate_model, row_drift, DriftReport, IngestError, RowDrift,
    VisitCounts, VisitLog, ZeroVisitPolicy,
};
pub use sim::{simulate_sessions, simulate_sessions_sequential, SimConfig, SimError, StartDistribution};
pub use solver::{
    centrality, classical_pagerank, generalized_centrality_iterative, series_oracle,
    solve_centrality, total_effects_dense, AveragingMode, CentralityVector, EffectsMatrix,
    SolveError, SolveOptions, SolverKind,
};
