//! Command-line interface for the partitioning pipelines.
//!
//! Every subcommand prints a single JSON document (schema 1, floats at 17
//! significant digits) to stdout; `--csv` additionally writes an audit CSV.
//! Exit codes: 0 on success, 1 when a guarantee audit fails, 2 on usage or
//! parse errors. Identical invocations with the same rng-seed produce
//! byte-identical output.

use clap::{Args, Parser, Subcommand, ValueEnum};
use lasqip::graph::{parse_graph, WeightedGraph};
use lasqip::linalg::spectrum;
use lasqip::oracle::{
    audit, brute_force, brute_force_independent_set, brute_force_ug, corpus, csv_header, csv_row,
    AuditOutcome, BruteForceResult,
};
use lasqip::problems::{
    parse_unique_games, solve_bisection, solve_independent_set, solve_kway, solve_maxcut,
    solve_ratio, solve_sse, solve_ug, GuaranteeReport, PartitionProblem, ProblemKind,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeSet;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lasqip", about = "Lasserre-relaxation partitioning pipelines", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum bisection: cut the graph into a side of target size μ.
    Bisect(BisectArgs),
    /// Small-set expansion: a side of target volume μ.
    Sse(BisectArgs),
    /// Ratio cuts: sparsest cut, edge expansion, normalized cut, conductance.
    Ratio(RatioArgs),
    /// Balanced k-way partitioning with prescribed class sizes.
    Kway(KwayArgs),
    /// Max cut, reported as minimum uncut weight; μ > 0 gives max bisection.
    Maxcut(MaxcutArgs),
    /// Unique games: one permutation constraint per edge.
    Ug(UgArgs),
    /// Maximum independent set.
    Indset(IndsetArgs),
    /// Audit the bisection pipeline over the bundled graph corpus.
    Audit(AuditArgs),
    /// Eigenvalues of the graph's normalized Laplacian.
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to an edge-list graph file (`u v [w]` per line).
    #[arg(long)]
    graph: std::path::PathBuf,
    /// Accuracy parameter in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Rank parameter of the spectral guarantee.
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Relaxation rounds; defaults to r + 1.
    #[arg(long)]
    r_prime: Option<usize>,
    /// Seed for the sampling RNG.
    #[arg(long, default_value_t = 7)]
    rng_seed: u64,
    /// Compute the brute-force optimum and audit the guarantee.
    #[arg(long)]
    opt: bool,
    /// Write the audit CSV (header plus one row) to this path.
    #[arg(long)]
    csv: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct BisectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target size (bisect) or volume (sse) of the returned side.
    #[arg(long)]
    mu: f64,
    /// Comma-separated vertices pinned inside the side.
    #[arg(long, value_delimiter = ',')]
    f: Vec<usize>,
    /// Comma-separated vertices pinned outside the side.
    #[arg(long, value_delimiter = ',')]
    b: Vec<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum RatioObjective {
    Sparsest,
    Expansion,
    Ncut,
    Conductance,
}

#[derive(Args)]
struct RatioArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which ratio of cut weight to side size/volume to minimize.
    #[arg(long, value_enum)]
    objective: RatioObjective,
}

#[derive(Args)]
struct KwayArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated class sizes; must sum to n.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<f64>,
}

#[derive(Args)]
struct MaxcutArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Optional side-size target; 0 leaves the cut unconstrained.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
}

#[derive(Args)]
struct UgArgs {
    /// Path to a unique-games instance file (`u v w pi(0),...,pi(k-1)`).
    #[arg(long)]
    instance: std::path::PathBuf,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long)]
    r_prime: Option<usize>,
    #[arg(long, default_value_t = 7)]
    rng_seed: u64,
    /// Compute the brute-force optimum and audit the guarantee.
    #[arg(long)]
    opt: bool,
    #[arg(long)]
    csv: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct IndsetArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct AuditArgs {
    /// Largest vertex count of the bundled corpus to cover.
    #[arg(long, default_value_t = 6)]
    max_n: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 2)]
    r_prime: usize,
    #[arg(long, default_value_t = 7)]
    rng_seed: u64,
    /// Worker threads; 1 keeps the run fully sequential.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the per-instance audit CSV to this path.
    #[arg(long)]
    csv: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    graph: std::path::PathBuf,
}

/// JSON formatter printing every finite float with 17 significant digits.
struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn print_json(value: &Value) {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    value.serialize(&mut ser).expect("json serialization");
    println!("{}", String::from_utf8(out).expect("utf8 json"));
}

/// Exits with the usage/parse code after reporting the error.
fn fail_parse(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn read_file(path: &std::path::Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| fail_parse(&format!("cannot read {}: {e}", path.display())))
}

fn load_graph(path: &std::path::Path) -> WeightedGraph {
    parse_graph(&read_file(path)).unwrap_or_else(|e| fail_parse(&e.to_string()))
}

fn write_csv(path: &std::path::Path, rows: &[String]) {
    let mut text = String::from(csv_header());
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)
        .unwrap_or_else(|e| fail_parse(&format!("cannot write {}: {e}", path.display())));
}

/// Brute-forces the optimum for the report's problem when requested;
/// returns the audit outcome alongside.
fn maybe_audit(
    opt_flag: bool,
    oracle: impl FnOnce() -> Result<BruteForceResult, lasqip::oracle::OracleError>,
    report: &mut GuaranteeReport,
) -> Option<AuditOutcome> {
    if !opt_flag {
        return None;
    }
    let opt = oracle().unwrap_or_else(|e| fail_parse(&e.to_string()));
    report.opt = Some(opt.value);
    Some(audit(report, &opt))
}

fn audit_value(outcome: &Option<AuditOutcome>) -> Value {
    match outcome {
        None => Value::Null,
        Some(o) => json!({ "pass": o.pass, "failures": o.failures }),
    }
}

/// Prints the report document and finishes the command: CSV if requested,
/// exit 1 when an audit ran and failed.
fn finish(
    command: &str,
    mut report: GuaranteeReport,
    witness: Value,
    outcome: Option<AuditOutcome>,
    csv: &Option<std::path::PathBuf>,
) -> ExitCode {
    if report.instance_id.is_empty() {
        report.instance_id = command.to_string();
    }
    if let Some(path) = csv {
        let row = csv_row(&report, outcome.as_ref().unwrap_or(&AuditOutcome {
            pass: true,
            failures: Vec::new(),
        }));
        write_csv(path, &[row]);
    }
    let doc = json!({
        "schema": 1,
        "command": command,
        "report": serde_json::to_value(&report).expect("report serializes"),
        "witness": witness,
        "audit": audit_value(&outcome),
    });
    print_json(&doc);
    match outcome {
        Some(o) if !o.pass => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}

fn set_value(set: &BTreeSet<usize>) -> Value {
    json!({ "set": set.iter().collect::<Vec<_>>() })
}

fn solve_problem(
    p: &PartitionProblem,
    r_prime: usize,
    rng_seed: u64,
) -> (BTreeSet<usize>, GuaranteeReport) {
    let run = match p.kind {
        ProblemKind::Bisection => solve_bisection(p, r_prime, rng_seed),
        ProblemKind::Sse => solve_sse(p, r_prime, rng_seed),
        ProblemKind::Indset => solve_independent_set(p, r_prime, rng_seed),
        _ => solve_ratio(p, r_prime, rng_seed),
    };
    run.unwrap_or_else(|e| fail_parse(&e.to_string()))
}

fn run_set_command(
    command: &str,
    kind: ProblemKind,
    common: &CommonArgs,
    mu: f64,
    f: &[usize],
    b: &[usize],
) -> ExitCode {
    let graph = load_graph(&common.graph);
    let mut p = PartitionProblem::new(kind, graph, common.eps, common.r);
    p.mu = mu;
    p.f_set = f.iter().cloned().collect();
    p.b_set = b.iter().cloned().collect();
    p.validate().unwrap_or_else(|e| fail_parse(&e.to_string()));
    let r_prime = common.r_prime.unwrap_or(common.r + 1);
    let (set, mut report) = solve_problem(&p, r_prime, common.rng_seed);
    let outcome = match kind {
        ProblemKind::Indset => {
            maybe_audit(common.opt, || brute_force_independent_set(&p.graph), &mut report)
        }
        _ => maybe_audit(common.opt, || brute_force(&p), &mut report),
    };
    finish(command, report, set_value(&set), outcome, &common.csv)
}

fn run_kway(args: &KwayArgs) -> ExitCode {
    let graph = load_graph(&args.common.graph);
    let mut p = PartitionProblem::new(ProblemKind::Kway, graph, args.common.eps, args.common.r);
    p.mu_list = args.sizes.clone();
    p.validate().unwrap_or_else(|e| fail_parse(&e.to_string()));
    let r_prime = args.common.r_prime.unwrap_or(args.common.r + 1);
    let (classes, mut report) = solve_kway(&p, r_prime, args.common.rng_seed)
        .unwrap_or_else(|e| fail_parse(&e.to_string()));
    let outcome = maybe_audit(args.common.opt, || brute_force(&p), &mut report);
    let witness = json!({
        "classes": classes
            .iter()
            .map(|c| c.iter().collect::<Vec<_>>())
            .collect::<Vec<_>>()
    });
    finish("kway", report, witness, outcome, &args.common.csv)
}

fn run_maxcut(args: &MaxcutArgs) -> ExitCode {
    let graph = load_graph(&args.common.graph);
    let mut p = PartitionProblem::new(ProblemKind::Maxcut, graph, args.common.eps, args.common.r);
    p.mu = args.mu;
    p.validate().unwrap_or_else(|e| fail_parse(&e.to_string()));
    let r_prime = args.common.r_prime.unwrap_or(args.common.r + 1);
    let (set, mut report) = solve_maxcut(&p, r_prime, args.common.rng_seed)
        .unwrap_or_else(|e| fail_parse(&e.to_string()));
    let outcome = maybe_audit(args.common.opt, || brute_force(&p), &mut report);
    finish("maxcut", report, set_value(&set), outcome, &args.common.csv)
}

fn run_ug(args: &UgArgs) -> ExitCode {
    let inst = parse_unique_games(&read_file(&args.instance))
        .unwrap_or_else(|e| fail_parse(&e.to_string()));
    let r_prime = args.r_prime.unwrap_or(args.r + 1);
    let (labeling, mut report) = solve_ug(&inst, args.eps, args.r, r_prime, args.rng_seed)
        .unwrap_or_else(|e| fail_parse(&e.to_string()));
    let outcome = maybe_audit(args.opt, || brute_force_ug(&inst), &mut report);
    finish("ug", report, json!({ "labeling": labeling }), outcome, &args.csv)
}

/// One corpus instance of the audit run.
struct AuditRow {
    report: GuaranteeReport,
    outcome: AuditOutcome,
}

fn audit_instance(id: &str, g: &WeightedGraph, args: &AuditArgs) -> AuditRow {
    let n = g.n();
    let mut p = PartitionProblem::new(ProblemKind::Bisection, g.clone(), args.eps, args.r);
    p.mu = (n / 2) as f64;
    let (_, mut report) =
        solve_bisection(&p, args.r_prime, args.rng_seed).unwrap_or_else(|e| fail_parse(&e.to_string()));
    report.instance_id = id.to_string();
    let opt = brute_force(&p).unwrap_or_else(|e| fail_parse(&e.to_string()));
    report.opt = Some(opt.value);
    let outcome = audit(&report, &opt);
    AuditRow { report, outcome }
}

fn run_audit(args: &AuditArgs) -> ExitCode {
    if args.jobs == 0 {
        fail_parse("--jobs must be at least 1");
    }
    let instances = corpus(args.max_n.min(6));
    let mut rows: Vec<Option<AuditRow>> = Vec::new();
    rows.resize_with(instances.len(), || None);
    let shared_rows = std::sync::Mutex::new(&mut rows);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let (rows, next, instances) = (&shared_rows, &next, &instances);
        for _ in 0..args.jobs {
            scope.spawn(move || loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= instances.len() {
                    break;
                }
                let (id, g) = &instances[i];
                let row = audit_instance(id, g, args);
                rows.lock().expect("rows lock")[i] = Some(row);
            });
        }
    });
    let rows: Vec<AuditRow> = rows.into_iter().map(|r| r.expect("every instance ran")).collect();
    let failures: Vec<&str> = rows
        .iter()
        .filter(|r| !r.outcome.pass)
        .map(|r| r.report.instance_id.as_str())
        .collect();
    if let Some(path) = &args.csv {
        let lines: Vec<String> =
            rows.iter().map(|r| csv_row(&r.report, &r.outcome)).collect();
        write_csv(path, &lines);
    }
    let doc = json!({
        "schema": 1,
        "command": "audit",
        "instances": rows.len(),
        "failures": failures,
        "pass": failures.is_empty(),
    });
    print_json(&doc);
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_spectrum(args: &SpectrumArgs) -> ExitCode {
    let graph = load_graph(&args.graph);
    let profile = spectrum(&graph.normalized_laplacian())
        .unwrap_or_else(|e| fail_parse(&e.to_string()));
    let doc = json!({
        "schema": 1,
        "command": "spectrum",
        "eigenvalues": profile.eigenvalues,
    });
    print_json(&doc);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Bisect(a) => {
            run_set_command("bisect", ProblemKind::Bisection, &a.common, a.mu, &a.f, &a.b)
        }
        Command::Sse(a) => run_set_command("sse", ProblemKind::Sse, &a.common, a.mu, &a.f, &a.b),
        Command::Ratio(a) => {
            let kind = match a.objective {
                RatioObjective::Sparsest => ProblemKind::Sparsest,
                RatioObjective::Expansion => ProblemKind::Expansion,
                RatioObjective::Ncut => ProblemKind::Ncut,
                RatioObjective::Conductance => ProblemKind::Conductance,
            };
            run_set_command("ratio", kind, &a.common, 0.0, &[], &[])
        }
        Command::Kway(a) => run_kway(a),
        Command::Maxcut(a) => run_maxcut(a),
        Command::Ug(a) => run_ug(a),
        Command::Indset(a) => run_set_command("indset", ProblemKind::Indset, &a.common, 0.0, &[], &[]),
        Command::Audit(a) => run_audit(a),
        Command::Spectrum(a) => run_spectrum(a),
    }
}
