#![allow(dead_code)]

use genrank::{DanglingPolicy, RowStochasticMatrix};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sizes cycled through by the seeded instance sets.
pub const SIZES: [usize; 3] = [5, 50, 200];

/// Random sparse row-stochastic matrix: every row has a diagonal weight in
/// `[diag_lo, diag_hi]` and up to `off_diag` distinct off-diagonal targets
/// sharing the rest of the mass.
pub fn random_matrix(n: usize, off_diag: usize, diag_lo: f64, diag_hi: f64, seed: u64) -> RowStochasticMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = off_diag.min(n.saturating_sub(1));
    let mut edges = Vec::with_capacity(n * (k + 1));
    for i in 0..n {
        let d = rng.gen_range(diag_lo..=diag_hi);
        edges.push((i, i, d));
        if k == 0 {
            continue;
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (slot, w) in sample(&mut rng, n - 1, k).into_iter().zip(raw) {
            let j = if slot >= i { slot + 1 } else { slot };
            edges.push((i, j, (1.0 - d) * w / total));
        }
    }
    RowStochasticMatrix::from_edge_list(&edges, n, DanglingPolicy::SelfSink).unwrap()
}

/// The seeded instance set shared by the route-agreement checks.
pub fn instance(k: usize) -> RowStochasticMatrix {
    random_matrix(SIZES[k % 3], 10, 0.1, 0.5, 1000 + k as u64)
}

pub fn write_edges(path: &std::path::Path, w: &RowStochasticMatrix) {
    let mut buf = Vec::new();
    genrank::formats::write_matrix(w, &mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("genrank").chain(args.iter().copied());
    let code = genrank::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
