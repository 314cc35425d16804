use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use logic_embed::constraints::AuditRecord;
use logic_embed::evaluation::{
    link_prediction_eval, puzzle_experiment, run_simulation, EvalReport, LinkMetrics, RankMode,
};
use logic_embed::kg::{
    forward_closure, gen_transitive_tree, parse_facts, parse_facts_against, parse_rules, sample_negatives,
    KnowledgeGraph, Rule, PUZZLE_FACTS, PUZZLE_RULES,
};
use logic_embed::rng::{stream, Stream};
use logic_embed::scoring::checkpoint::{read_checkpoint, write_checkpoint, write_manifest};
use logic_embed::scoring::{ModelKind, ModelParams, ModelSpec};
use logic_embed::theory::{find_transitivity_counterexample, random_matrix, symmetry_defect, verify_certificate};
use logic_embed::training::{train_with, SimConfig, SimMode, TrainConfig};
use logic_embed::Error;
use serde_json::json;

mod config;

/// Knowledge-base embeddings with logical constraints.
#[derive(Parser)]
#[command(name = "logic-embed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the transitive closure of a complete binary tree.
    GenTree(GenTreeArgs),
    /// Forward-chain rules over a facts file.
    Closure(ClosureArgs),
    /// Train embeddings with projected SGD on the BPR objective.
    Train(TrainArgs),
    /// Edge accuracy of the bilinear simulation on E, E^c and E^rev.
    EvalEdges(EvalEdgesArgs),
    /// Head and tail link prediction for a trained checkpoint.
    EvalLp(EvalLpArgs),
    /// Rank every fact of the deduction puzzle.
    Puzzle(PuzzleArgs),
    /// Search random matrices for transitivity counterexamples.
    VerifyTheory(TheoryArgs),
}

#[derive(Args)]
struct Common {
    /// Run seed; determines every random draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for reports and artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of key=value lines merged under the explicit flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for evaluation.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct Hyper {
    /// Model kind: A, B, C, D, R, T or Tucker2.
    #[arg(long, default_value = "A")]
    model: String,
    /// Entity dimension.
    #[arg(long, default_value_t = 25)]
    ent_dim: usize,
    /// L2 regularization strength.
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// Learning rate.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    /// Negatives sampled per positive fact.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Positive facts per update.
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// ProTrans mixing weight in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Entity ball radius for model T.
    #[arg(long, default_value_t = 0.25)]
    rho: f64,
    /// Maximum cyclic projection sweeps per half-update.
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// k of the HITS@k early-stopping metric.
    #[arg(long, default_value_t = 10)]
    early_stop_k: usize,
}

impl Hyper {
    fn spec(&self) -> Result<ModelSpec> {
        if self.ent_dim == 0 {
            bail!("--ent-dim must be at least 1");
        }
        Ok(ModelSpec::new(self.model.parse::<ModelKind>()?, self.ent_dim))
    }

    fn train_config(&self, seed: u64, audit_every: usize) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            eta: self.eta,
            steps: self.steps,
            batch: self.batch,
            epochs: self.epochs,
            early_stop_k: self.early_stop_k,
            lambda: self.lambda,
            rho: self.rho,
            seed,
            sweeps: self.sweeps,
            audit_every,
        }
    }
}

#[derive(Args)]
struct GenTreeArgs {
    /// Tree depth; the tree has 2^depth - 1 vertices.
    #[arg(long)]
    depth: usize,
    /// Also write |E| sampled non-edges.
    #[arg(long)]
    subset: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ClosureArgs {
    #[arg(long)]
    facts: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TrainArgs {
    /// Training facts (subject, relation, object per line).
    #[arg(long)]
    facts: PathBuf,
    /// Rules to enforce; without it training is unconstrained.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Validation facts for early stopping.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Log constraint violations every N updates to audit.csv.
    #[arg(long, default_value_t = 0)]
    audit: usize,
    #[command(flatten)]
    hyper: Hyper,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Subset,
}

#[derive(Args)]
struct EvalEdgesArgs {
    #[arg(long, default_value_t = 7)]
    depth: usize,
    #[arg(long, value_enum, default_value = "subset")]
    mode: ModeArg,
    /// R or Tucker2.
    #[arg(long, default_value = "R")]
    model: String,
    #[arg(long, default_value_t = 32)]
    ent_dim: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalLpArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// The facts file the checkpoint was trained on.
    #[arg(long)]
    facts: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Extra known facts removed from candidates in filtered mode.
    #[arg(long)]
    known: Vec<PathBuf>,
    /// Filter other known-true answers from the candidates.
    #[arg(long)]
    filtered: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PuzzleArgs {
    /// Facts file; defaults to the bundled puzzle.
    #[arg(long)]
    facts: Option<PathBuf>,
    /// Rules file; defaults to the bundled puzzle rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Train with the rule constraints.
    #[arg(long)]
    constrained: bool,
    /// Number of seeds, counted up from --seed.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[command(flatten)]
    hyper: Hyper,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[command(flatten)]
    common: Common,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn check_threads(common: &Common) -> Result<()> {
    if common.threads == 0 {
        bail!("--threads must be at least 1");
    }
    Ok(())
}

/// Writes `name.json`, `name.txt` and `metadata.json` under `--out`, and
/// prints the table.
fn emit(common: &Common, name: &str, json: &str, table: &str) -> Result<()> {
    print!("{table}");
    let Some(dir) = &common.out else {
        return Ok(());
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(format!("{name}.json")), format!("{json}\n"))?;
    fs::write(dir.join(format!("{name}.txt")), table)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let argv: Vec<String> = std::env::args().collect();
    let meta = json!({ "unix_time": started, "argv": argv, "version": env!("CARGO_PKG_VERSION") });
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn emit_report(common: &Common, name: &str, report: &EvalReport) -> Result<()> {
    emit(common, name, &report.to_json()?, &report.to_table())
}

fn gen_tree(a: &GenTreeArgs) -> Result<()> {
    let ds = gen_transitive_tree(a.depth)?;
    let summary = format!(
        "V={} E={} Ec={}\n",
        ds.vertex_count,
        ds.positives.len(),
        ds.complement_len()
    );
    let Some(dir) = &a.common.out else {
        print!("{summary}");
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let name = |v: usize| format!("n{v}");
    let mut g = KnowledgeGraph::new();
    for v in 0..ds.vertex_count {
        g.add_entity(&name(v));
    }
    let rel = g.add_relation("reaches");
    for &(u, v) in &ds.positives {
        g.insert(logic_embed::Fact::new(rel, u, v))?;
    }
    fs::write(dir.join("edges.tsv"), g.to_tsv())?;
    let pairs = |it: &mut dyn Iterator<Item = (usize, usize)>| {
        let mut s = String::new();
        for (u, v) in it {
            let _ = writeln!(s, "{}\t{}", name(u), name(v));
        }
        s
    };
    fs::write(dir.join("complement.tsv"), pairs(&mut ds.complement()))?;
    fs::write(dir.join("reversed.tsv"), pairs(&mut ds.reversed.iter().copied()))?;
    if a.subset {
        let mut rng = stream(a.common.seed, Stream::Sampling);
        let neg = sample_negatives(&ds, ds.positives.len().min(ds.complement_len()), &mut rng)?;
        fs::write(dir.join("subset_negatives.tsv"), pairs(&mut neg.into_iter()))?;
    }
    emit(&a.common, "summary", &serde_json::to_string_pretty(&json!({
        "vertices": ds.vertex_count,
        "edges": ds.positives.len(),
        "non_edges": ds.complement_len(),
        "depth": a.depth,
    }))?, &summary)
}

fn load_graph_rules(facts: &Path, rules: Option<&Path>) -> Result<(KnowledgeGraph, Vec<Rule>)> {
    let graph = parse_facts(&read(facts)?).with_context(|| format!("parsing {}", facts.display()))?;
    let rules = match rules {
        Some(p) => parse_rules(&read(p)?, &graph).with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    Ok((graph, rules))
}

fn closure(a: &ClosureArgs) -> Result<()> {
    let (graph, rules) = load_graph_rules(&a.facts, Some(&a.rules))?;
    let closed = forward_closure(graph.fact_set(), &rules, &graph);
    let mut derived: Vec<_> = closed.iter().filter(|f| !graph.contains(f)).copied().collect();
    derived.sort();
    let mut out = graph.clone();
    for f in &derived {
        out.insert(*f)?;
    }
    let mut table = format!("facts={} closure={} derived={}\n", graph.facts().len(), closed.len(), derived.len());
    for f in &derived {
        let _ = writeln!(table, "{}", graph.format_fact(f));
    }
    if let Some(dir) = &a.common.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("closure.tsv"), out.to_tsv())?;
    }
    let derived_names: Vec<String> = derived.iter().map(|f| graph.format_fact(f)).collect();
    let json = serde_json::to_string_pretty(&json!({
        "input_facts": graph.facts().len(),
        "closure_facts": closed.len(),
        "derived": derived_names,
    }))?;
    emit(&a.common, "closure", &json, &table)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let (graph, rules) = load_graph_rules(&a.facts, a.rules.as_deref())?;
    let valid = match &a.valid {
        Some(p) => Some(parse_facts_against(&graph, &read(p)?)?),
        None => None,
    };
    let spec = a.hyper.spec()?;
    let cfg = a.hyper.train_config(a.common.seed, a.audit);
    let mut log = String::new();
    let out = train_with(&graph, &rules, spec, &cfg, valid.as_deref(), &mut |e| {
        eprintln!("{e}");
        let _ = writeln!(log, "{e}");
    })?;

    let mut report = EvalReport::new(a.common.seed);
    if let Some(last) = out.history.last() {
        report.insert("final_mean_loss", last.mean_loss, out.history.len());
    }
    if let Some(v) = out.history.get(out.best_epoch - 1).and_then(|e| e.validation) {
        report.insert(&format!("valid_hits@{}", cfg.early_stop_k), v, valid.as_ref().map_or(0, |v| 2 * v.len()));
    }
    report.echo("model", spec.kind);
    report.echo("ent_dim", spec.ent_dim);
    report.echo("rules", rules.len());
    report.echo("best_epoch", out.best_epoch);
    report.echo("train", &cfg);
    if let Some(dir) = &a.common.out {
        fs::create_dir_all(dir)?;
        write_checkpoint(&dir.join("model.ckpt"), &out.params)?;
        write_manifest(&dir.join("model.manifest"), &graph)?;
        fs::write(dir.join("train_log.txt"), &log)?;
        if a.audit > 0 {
            let mut csv = format!("{}\n", AuditRecord::csv_header());
            for r in &out.audit {
                let _ = writeln!(csv, "{}", r.to_csv());
            }
            fs::write(dir.join("audit.csv"), csv)?;
        }
    }
    emit_report(&a.common, "train", &report)
}

fn eval_edges(a: &EvalEdgesArgs) -> Result<()> {
    let kind: ModelKind = a.model.parse()?;
    let mode = match a.mode {
        ModeArg::Full => SimMode::FullSet,
        ModeArg::Subset => SimMode::SubSet,
    };
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let cfg = SimConfig {
        ent_dim: a.ent_dim,
        epochs: a.epochs,
        eta: a.eta,
        alpha: a.alpha,
        seed: a.common.seed,
        ..SimConfig::default()
    };
    let seeds: Vec<u64> = (a.common.seed..a.common.seed + a.seeds).collect();
    let result = run_simulation(a.depth, mode, kind, &cfg, &seeds)?;
    let mut report = result.report(&cfg);
    report.echo("seeds", &seeds);
    emit_report(&a.common, "edges", &report)
}

/// Splits the test facts over `threads` scoped workers.
fn parallel_link_eval(
    params: &ModelParams,
    test: &[logic_embed::Fact],
    mode: RankMode,
    known: Option<&HashSet<logic_embed::Fact>>,
    threads: usize,
) -> Result<LinkMetrics> {
    let chunk = test.len().div_ceil(threads.max(1)).max(1);
    let parts: Vec<logic_embed::Result<LinkMetrics>> = std::thread::scope(|s| {
        let handles: Vec<_> = test
            .chunks(chunk)
            .map(|c| s.spawn(move || link_prediction_eval(params, c, mode, known)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut all = LinkMetrics {
        head_ranks: Vec::with_capacity(test.len()),
        tail_ranks: Vec::with_capacity(test.len()),
    };
    for p in parts {
        let p = p?;
        all.head_ranks.extend(p.head_ranks);
        all.tail_ranks.extend(p.tail_ranks);
    }
    Ok(all)
}

fn eval_lp(a: &EvalLpArgs) -> Result<()> {
    let graph = parse_facts(&read(&a.facts)?)?;
    let params = read_checkpoint(&a.checkpoint).with_context(|| format!("reading {}", a.checkpoint.display()))?;
    if params.num_entities() != graph.num_entities() || params.num_relations() != graph.num_relations() {
        bail!(
            "checkpoint has {} entities and {} relations but the facts file has {} and {}",
            params.num_entities(),
            params.num_relations(),
            graph.num_entities(),
            graph.num_relations()
        );
    }
    let test = parse_facts_against(&graph, &read(&a.test)?)?;
    let mode = if a.filtered { RankMode::Filtered } else { RankMode::Raw };
    let mut known: HashSet<_> = graph.fact_set().clone();
    known.extend(test.iter().copied());
    for p in &a.known {
        known.extend(parse_facts_against(&graph, &read(p)?)?);
    }
    let m = parallel_link_eval(&params, &test, mode, Some(&known), a.common.threads)?;
    let mut report = m.report(a.common.seed, mode);
    report.insert("hits@1", m.hits_at(1), m.queries());
    report.echo("model", params.spec.kind);
    report.echo("test_facts", test.len());
    emit_report(&a.common, "link_prediction", &report)
}

fn puzzle(a: &PuzzleArgs) -> Result<()> {
    let facts = match &a.facts {
        Some(p) => read(p)?,
        None => PUZZLE_FACTS.to_string(),
    };
    let graph = parse_facts(&facts)?;
    let rules_text = match &a.rules {
        Some(p) => read(p)?,
        None => PUZZLE_RULES.to_string(),
    };
    let rules = parse_rules(&rules_text, &graph)?;
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let spec = a.hyper.spec()?;
    let cfg = a.hyper.train_config(a.common.seed, 0);
    let seeds: Vec<u64> = (a.common.seed..a.common.seed + a.seeds).collect();
    let result = puzzle_experiment(&graph, &rules, spec.kind, a.constrained, &seeds, &cfg, spec.ent_dim)?;
    emit_report(&a.common, "puzzle", &result.report(&cfg, spec.ent_dim))
}

fn verify_theory(a: &TheoryArgs) -> Result<()> {
    if a.dim == 0 || !(a.tol > 0.0) {
        bail!("--dim must be at least 1 and --tol positive");
    }
    let mut rng = stream(a.common.seed, Stream::Theory);
    let mut rows = Vec::with_capacity(a.trials);
    let (mut found, mut verified) = (0usize, 0usize);
    for _ in 0..a.trials {
        let m = random_matrix(a.dim, &mut rng);
        let defect = symmetry_defect(&m)?;
        let cex = find_transitivity_counterexample(&m, a.tol, &mut rng)?;
        let ok = cex.as_ref().is_some_and(|c| verify_certificate(&m, c, a.tol));
        found += usize::from(cex.is_some());
        verified += usize::from(ok);
        rows.push(json!({ "matrix": m, "symmetry_defect": defect, "counterexample": cex, "verified": ok }));
    }
    let json = serde_json::to_string_pretty(&json!({
        "schema_version": logic_embed::evaluation::SCHEMA_VERSION,
        "seed": a.common.seed,
        "dim": a.dim,
        "tol": a.tol,
        "trials": rows,
    }))?;
    let table = format!("trials={} counterexamples={found} verified={verified}\n", a.trials);
    if a.common.out.is_none() {
        println!("{json}");
    }
    emit(&a.common, "theory", &json, &table)
}

fn run(args: Vec<OsString>) -> Result<()> {
    let args = config::expand_args(args)?;
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let matches = cmd.try_get_matches_from(args).unwrap_or_else(|e| e.exit());
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match &cli.command {
        Command::GenTree(a) => check_threads(&a.common).and_then(|_| gen_tree(a)),
        Command::Closure(a) => check_threads(&a.common).and_then(|_| closure(a)),
        Command::Train(a) => check_threads(&a.common).and_then(|_| train_cmd(a)),
        Command::EvalEdges(a) => check_threads(&a.common).and_then(|_| eval_edges(a)),
        Command::EvalLp(a) => check_threads(&a.common).and_then(|_| eval_lp(a)),
        Command::Puzzle(a) => check_threads(&a.common).and_then(|_| puzzle(a)),
        Command::VerifyTheory(a) => check_threads(&a.common).and_then(|_| verify_theory(a)),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NonFinite(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
