//! Command-line front end.
//!
//! Exit status is 0 on success, 1 on a domain or validation failure and 2
//! on a usage error. Data goes to the output stream or the `--out` file;
//! diagnostics go to the error stream.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::formats::{self, format_float};
use crate::graph::{
    validate, CandidateMatrix, DampingVector, DanglingPolicy, GeneralizedModel,
    RowStochasticMatrix, DEFAULT_EPS,
};
use crate::ingestion::{self, RowDrift, ZeroVisitPolicy, DEFAULT_DRIFT_THRESHOLD};
use crate::sim::{self, SimConfig, StartDistribution};
use crate::solver::{self, AveragingMode, CentralityVector, SolveOptions, SolverKind};

/// Largest L1 gap `crosscheck` accepts between the dense and iterative
/// routes.
pub const CROSSCHECK_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "genrank", version, about = "Generalized PageRank with per-node damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank nodes of an edge list by centrality.
    Rank(RankArgs),
    /// Count a visit log and estimate the model from it.
    Estimate(EstimateArgs),
    /// Generate a visit log from an edge list.
    Simulate(SimulateArgs),
    /// Compare per-node allocation rows of two count snapshots.
    Drift(DriftArgs),
    /// Check that an edge list is already row-stochastic.
    Validate(ValidateArgs),
    /// Compare the dense and iterative solvers on one model.
    Crosscheck(CrosscheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DanglingArg {
    SelfSink,
    Uniform,
}

impl From<DanglingArg> for DanglingPolicy {
    fn from(d: DanglingArg) -> Self {
        match d {
            DanglingArg::SelfSink => DanglingPolicy::SelfSink,
            DanglingArg::Uniform => DanglingPolicy::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "full_n")]
    FullN,
    #[value(name = "exclude_diagonal")]
    ExcludeDiagonal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ZeroVisitArg {
    Sink,
    Uniform,
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is not in (0, 1)"))
    }
}

fn clamp_bound(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x > 0.0 && x < 0.5 {
        Ok(x)
    } else {
        Err(format!("{x} is not in (0, 0.5)"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{x} is not positive"))
    }
}

fn drift_threshold(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x > 0.0 && x <= 2.0 {
        Ok(x)
    } else {
        Err(format!("{x} is not in (0, 2]"))
    }
}

#[derive(Debug, Args)]
struct GraphInput {
    /// Edge list, `source<TAB>target<TAB>weight` per line.
    #[arg(long)]
    edges: PathBuf,
    /// Node count; defaults to the largest id plus one.
    #[arg(long)]
    nodes: Option<usize>,
    /// Completion of rows without outgoing weight.
    #[arg(long, value_enum, default_value = "self-sink")]
    dangling: DanglingArg,
}

#[derive(Debug, Args)]
struct DampingInput {
    /// Scalar damping, `A = alpha * I`.
    #[arg(long, value_parser = open_unit, conflicts_with_all = ["coupled", "damping"],
          required_unless_present_any = ["coupled", "damping"])]
    alpha: Option<f64>,
    /// Damping from the coupling rule `a_ii = 1 - w_ii`.
    #[arg(long)]
    coupled: bool,
    /// Explicit per-node damping, `i<TAB>a_ii` per line.
    #[arg(long)]
    damping: Option<PathBuf>,
    /// Clamp bound keeping damping in `[eps, 1 - eps]`.
    #[arg(long, value_parser = clamp_bound, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Debug, Args)]
struct IterationArgs {
    #[arg(long, value_parser = positive, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 10_000)]
    max_iters: u64,
}

impl IterationArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iters: self.max_iters as usize,
        }
    }
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[command(flatten)]
    damping: DampingInput,
    #[arg(long, value_enum, default_value = "iterative")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "full_n")]
    mode: ModeArg,
    /// Rescale `exclude_diagonal` scores to sum to one.
    #[arg(long)]
    renormalize: bool,
    #[command(flatten)]
    iteration: IterationArgs,
    #[arg(long, value_enum, default_value = "tsv")]
    format: FormatArg,
    /// Display names, `id<TAB>label` per line (table format only).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Visit log, one comma-separated session per line.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    nodes: Option<usize>,
    /// Where to write the visit counts; standard output if omitted.
    #[arg(long)]
    counts_out: Option<PathBuf>,
    /// Where to write the estimated `W` as an edge list.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write the coupled damping values.
    #[arg(long)]
    damping_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sink")]
    zero_visit: ZeroVisitArg,
    #[arg(long, value_parser = clamp_bound, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    sessions: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 10_000)]
    max_steps: u64,
    /// Start-page probabilities, `i<TAB>p` per line; uniform if omitted.
    #[arg(long)]
    start: Option<PathBuf>,
    /// Generate on the calling thread only.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DriftArgs {
    #[arg(long)]
    old: PathBuf,
    #[arg(long)]
    new: PathBuf,
    #[arg(long, value_parser = drift_threshold, default_value_t = DEFAULT_DRIFT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    nodes: Option<usize>,
}

#[derive(Debug, Args)]
struct CrosscheckArgs {
    #[command(flatten)]
    graph: GraphInput,
    #[command(flatten)]
    damping: DampingInput,
    #[command(flatten)]
    iteration: IterationArgs,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return if code == 0 { 0 } else { 2 };
        }
    };
    let result = match &cli.command {
        Command::Rank(args) => rank(args, stdout, stderr),
        Command::Estimate(args) => estimate(args, stdout, stderr),
        Command::Simulate(args) => simulate(args, stdout, stderr),
        Command::Drift(args) => drift(args, stdout),
        Command::Validate(args) => validate_cmd(args, stdout),
        Command::Crosscheck(args) => crosscheck(args, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn emit(out: Option<&Path>, stdout: &mut dyn Write, data: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            );
            w.write_all(data)?;
            w.flush()?;
        }
        None => stdout.write_all(data)?,
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn load_matrix(input: &GraphInput) -> Result<RowStochasticMatrix> {
    let list = formats::read_edge_list(open(&input.edges)?)
        .with_context(|| format!("reading {}", input.edges.display()))?;
    let n = input.nodes.unwrap_or(list.inferred_n);
    if n == 0 {
        bail!("{} has no edges and no --nodes was given", input.edges.display());
    }
    Ok(RowStochasticMatrix::from_edge_list(&list.edges, n, input.dangling.into())?)
}

enum Damping {
    Scalar(RowStochasticMatrix, f64),
    PerNode(GeneralizedModel),
}

fn load_damping(w: RowStochasticMatrix, input: &DampingInput) -> Result<Damping> {
    if let Some(alpha) = input.alpha {
        return Ok(Damping::Scalar(w, alpha));
    }
    let model = match &input.damping {
        Some(path) => {
            let values = formats::read_node_values(open(path)?, w.n())
                .with_context(|| format!("reading {}", path.display()))?;
            GeneralizedModel::new(w, DampingVector::new(values, input.eps)?)?
        }
        None => GeneralizedModel::coupled(w, input.eps)?,
    };
    Ok(Damping::PerNode(model))
}

fn rank(args: &RankArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mode = match args.mode {
        ModeArg::FullN => AveragingMode::FullN,
        ModeArg::ExcludeDiagonal => AveragingMode::ExcludeDiagonal,
    };
    let solver_kind = match args.solver {
        SolverArg::Dense => SolverKind::Dense,
        SolverArg::Iterative => SolverKind::Iterative,
    };
    if mode == AveragingMode::ExcludeDiagonal && solver_kind == SolverKind::Iterative {
        bail!("--mode exclude_diagonal requires --solver dense");
    }
    let labels = match &args.labels {
        Some(path) => formats::read_labels(open(path)?)?,
        None => BTreeMap::new(),
    };
    let w = load_matrix(&args.graph)?;
    let opts = args.iteration.options();
    let r = match load_damping(w, &args.damping)? {
        Damping::Scalar(w, alpha) if solver_kind == SolverKind::Iterative => {
            solver::classical_pagerank(&w, alpha, &opts)?
        }
        Damping::Scalar(w, alpha) => {
            let model = GeneralizedModel::scalar(w, alpha)?;
            solver::solve_centrality(&model, solver_kind, mode, args.renormalize, &opts)?
        }
        Damping::PerNode(model) => {
            solver::solve_centrality(&model, solver_kind, mode, args.renormalize, &opts)
                .with_context(|| {
                    format!(
                        "largest damping value is {:e}; the iteration contracts no faster than that \
                         (raise --max-iters or use --solver dense)",
                        model.a_max()
                    )
                })?
        }
    };
    if let Some(it) = r.iterations {
        let _ = writeln!(stderr, "converged in {it} iterations, residual {:e}", r.residual);
    }
    let rendered = match args.format {
        FormatArg::Tsv => render_tsv(&r),
        FormatArg::Json => render_json(&r),
        FormatArg::Table => render_table(&r, &labels),
    };
    emit(args.out.as_deref(), stdout, rendered.as_bytes())?;
    Ok(0)
}

/// Node ids by descending score, ties by ascending id.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn iterations_text(r: &CentralityVector) -> String {
    r.iterations.map_or_else(|| "null".to_owned(), |i| i.to_string())
}

fn render_tsv(r: &CentralityVector) -> String {
    let mut s = format!(
        "# n={} mode={} iterations={} residual={}\n#id\tscore\n",
        r.n(),
        r.mode.as_str(),
        iterations_text(r),
        format_float(r.residual)
    );
    for id in ranking(&r.scores) {
        s.push_str(&format!("{id}\t{}\n", format_float(r.scores[id])));
    }
    s
}

fn render_json(r: &CentralityVector) -> String {
    let scores: Vec<String> = ranking(&r.scores)
        .into_iter()
        .map(|id| format!("{{\"id\": {id}, \"score\": {}}}", format_float(r.scores[id])))
        .collect();
    format!(
        "{{\"n\": {}, \"mode\": \"{}\", \"scores\": [{}], \"iterations\": {}, \"residual\": {}}}\n",
        r.n(),
        r.mode.as_str(),
        scores.join(", "),
        iterations_text(r),
        format_float(r.residual)
    )
}

fn render_table(r: &CentralityVector, labels: &BTreeMap<usize, String>) -> String {
    let mut s = String::new();
    if labels.is_empty() {
        s.push_str(&format!("{:>6}  {:>8}  {:>10}\n", "rank", "id", "score"));
    } else {
        s.push_str(&format!("{:>6}  {:>8}  {:>10}  label\n", "rank", "id", "score"));
    }
    for (k, id) in ranking(&r.scores).into_iter().enumerate() {
        s.push_str(&format!("{:>6}  {:>8}  {:>10.6}", k + 1, id, r.scores[id]));
        if !labels.is_empty() {
            s.push_str("  ");
            s.push_str(labels.get(&id).map_or("", String::as_str));
        }
        s.push('\n');
    }
    s
}

fn estimate(args: &EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let log = formats::read_visit_log(open(&args.log)?)
        .with_context(|| format!("reading {}", args.log.display()))?;
    let n = args.nodes.unwrap_or_else(|| log.inferred_n());
    if n == 0 {
        bail!("{} has no sessions and no --nodes was given", args.log.display());
    }
    let counts = ingestion::accumulate_parallel(&log, n)?;
    let policy = match args.zero_visit {
        ZeroVisitArg::Sink => ZeroVisitPolicy::Sink,
        ZeroVisitArg::Uniform => ZeroVisitPolicy::Uniform,
    };
    let model = ingestion::estimate_model(&counts, policy, args.eps)?;

    let mut buf = Vec::new();
    formats::write_counts(&counts, &mut buf)?;
    emit(args.counts_out.as_deref(), stdout, &buf)?;
    if let Some(path) = &args.model_out {
        write_file(path, |w| formats::write_matrix(model.w(), w))?;
    }
    if let Some(path) = &args.damping_out {
        write_file(path, |w| formats::write_damping(model.a(), w))?;
    }
    let _ = writeln!(
        stderr,
        "sessions={} visits={} nodes={}",
        log.len(),
        log.total_visits(),
        n
    );
    Ok(0)
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let w = load_matrix(&args.graph)?;
    let start = match &args.start {
        Some(path) => StartDistribution::Given(
            formats::read_node_values(open(path)?, w.n())
                .with_context(|| format!("reading {}", path.display()))?,
        ),
        None => StartDistribution::Uniform,
    };
    let cfg = SimConfig {
        n_sessions: args.sessions as usize,
        seed: args.seed,
        max_steps: args.max_steps as usize,
        start,
    };
    let log = if args.sequential {
        sim::simulate_sessions_sequential(&w, &cfg)?
    } else {
        sim::simulate_sessions(&w, &cfg)?
    };
    let mut buf = Vec::new();
    formats::write_visit_log(&log, &mut buf)?;
    emit(args.out.as_deref(), stdout, &buf)?;
    let _ = writeln!(
        stderr,
        "sessions={} visits={} force_terminated={}",
        log.len(),
        log.total_visits(),
        log.force_terminated()
    );
    Ok(0)
}

fn drift(args: &DriftArgs, stdout: &mut dyn Write) -> Result<i32> {
    let old = formats::read_counts(open(&args.old)?)
        .with_context(|| format!("reading {}", args.old.display()))?;
    let new = formats::read_counts(open(&args.new)?)
        .with_context(|| format!("reading {}", args.new.display()))?;
    let report = ingestion::row_drift(&old, &new, args.threshold)?;
    let mut s = format!("# threshold={}\n#node\tdistance\tstatus\n", format_float(report.threshold));
    for (i, row) in report.rows.iter().enumerate() {
        match row {
            RowDrift::Distance { distance, flagged } => s.push_str(&format!(
                "{i}\t{}\t{}\n",
                format_float(*distance),
                if *flagged { "flagged" } else { "stable" }
            )),
            RowDrift::InsufficientData => s.push_str(&format!("{i}\tNA\tinsufficient_data\n")),
        }
    }
    emit(args.out.as_deref(), stdout, s.as_bytes())?;
    Ok(0)
}

fn validate_cmd(args: &ValidateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let list = formats::read_edge_list(open(&args.edges)?)
        .with_context(|| format!("reading {}", args.edges.display()))?;
    let n = args.nodes.unwrap_or(list.inferred_n);
    let candidate = CandidateMatrix::from_triplets(n, list.edges)?;
    let report = validate(&candidate);
    write!(stdout, "{report}")?;
    Ok(if report.ok { 0 } else { 1 })
}

fn crosscheck(args: &CrosscheckArgs, stdout: &mut dyn Write) -> Result<i32> {
    let w = load_matrix(&args.graph)?;
    let opts = args.iteration.options();
    let (model, classical) = match load_damping(w, &args.damping)? {
        Damping::Scalar(w, alpha) => {
            let classical = solver::classical_pagerank(&w, alpha, &opts)?;
            (GeneralizedModel::scalar(w, alpha)?, Some(classical))
        }
        Damping::PerNode(model) => (model, None),
    };
    let dense = solver::solve_centrality(&model, SolverKind::Dense, AveragingMode::FullN, false, &opts)?;
    let iterative =
        solver::solve_centrality(&model, SolverKind::Iterative, AveragingMode::FullN, false, &opts)?;
    let mut worst = dense.l1_distance(&iterative.scores);
    let mut s = format!("dense_vs_iterative\t{}\n", format_float(worst));
    if let Some(c) = classical {
        let d = dense.l1_distance(&c.scores);
        s.push_str(&format!("dense_vs_classical\t{}\n", format_float(d)));
        worst = worst.max(d);
    }
    s.push_str(&format!("max_l1_discrepancy\t{}\n", format_float(worst)));
    stdout.write_all(s.as_bytes())?;
    if worst > CROSSCHECK_TOL {
        return Err(anyhow!(
            "routes disagree by {worst:e} in L1 (limit {CROSSCHECK_TOL:e})"
        ));
    }
    Ok(0)
}
