//! Random-surfer session generator.
//!
//! At page `i` the surfer draws `j` from row `i` of `W`. Drawing the
//! diagonal ends the session at `i`; any other draw moves to `j`.
//!
//! Session `k` draws from its own ChaCha8 stream: the generator is seeded
//! with `seed_from_u64(seed)` and switched to stream `k`. Sessions therefore
//! do not share state, and the parallel and sequential generators produce
//! the same log.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::RowStochasticMatrix;
use crate::ingestion::VisitLog;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum StartDistribution {
    #[default]
    Uniform,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_sessions: usize,
    pub seed: u64,
    /// Longest allowed session; longer ones are cut at this length.
    pub max_steps: usize,
    pub start: StartDistribution,
}

impl SimConfig {
    pub fn new(n_sessions: usize, seed: u64) -> Self {
        Self {
            n_sessions,
            seed,
            max_steps: 10_000,
            start: StartDistribution::Uniform,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.n_sessions == 0 {
            return Err(SimError::InvalidConfig("n_sessions must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(SimError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if let StartDistribution::Given(p) = &self.start {
            if p.len() != n {
                return Err(SimError::InvalidConfig(format!(
                    "start distribution has {} entries for {} nodes",
                    p.len(),
                    n
                )));
            }
            if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(SimError::InvalidConfig("start probabilities must be nonnegative".into()));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(SimError::InvalidConfig(format!(
                    "start distribution sums to {total}"
                )));
            }
        }
        Ok(())
    }
}

fn session_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Inverse-CDF draw over `weights`; rounding slack falls on the last
/// positive entry.
fn draw(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Returns the session and whether it hit `max_steps`.
fn run_session(w: &RowStochasticMatrix, cfg: &SimConfig, index: usize) -> (Vec<usize>, bool) {
    let mut rng = session_rng(cfg.seed, index);
    let mut page = match &cfg.start {
        StartDistribution::Uniform => rng.gen_range(0..w.n()),
        StartDistribution::Given(p) => draw(&mut rng, p),
    };
    let mut session = Vec::new();
    loop {
        session.push(page);
        let (cols, vals) = w.row(page);
        let next = cols[draw(&mut rng, vals)];
        if next == page {
            return (session, false);
        }
        if session.len() == cfg.max_steps {
            return (session, true);
        }
        page = next;
    }
}

fn collect(results: Vec<(Vec<usize>, bool)>) -> VisitLog {
    let forced = results.iter().filter(|(_, f)| *f).count();
    let sessions = results.into_iter().map(|(s, _)| s).collect();
    VisitLog::with_force_terminated(sessions, forced).expect("sessions are never empty")
}

/// Generates `cfg.n_sessions` sessions on the rayon pool.
pub fn simulate_sessions(w: &RowStochasticMatrix, cfg: &SimConfig) -> Result<VisitLog, SimError> {
    cfg.validate(w.n())?;
    let results = (0..cfg.n_sessions)
        .into_par_iter()
        .map(|k| run_session(w, cfg, k))
        .collect();
    Ok(collect(results))
}

/// Single-threaded twin of [`simulate_sessions`]; the output is identical.
pub fn simulate_sessions_sequential(
    w: &RowStochasticMatrix,
    cfg: &SimConfig,
) -> Result<VisitLog, SimError> {
    cfg.validate(w.n())?;
    let results = (0..cfg.n_sessions).map(|k| run_session(w, cfg, k)).collect();
    Ok(collect(results))
}
