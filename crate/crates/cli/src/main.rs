use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mdl_cocluster::cluster2d::{brown_cluster, cluster_2d, ClusterConfig, ClusterState, Side};
use mdl_cocluster::cooccur::{CooccurrenceTable, TripleDataset};
use mdl_cocluster::disambig::{
    read_cases_tsv, train_pp_estimators, CaseKind, ClusterEstimator, ClusterMethod, DefaultRule, EmpiricalEstimator,
    EstimatorChain, Outcome, TableEstimator,
};
use mdl_cocluster::evalharness::{self, compare_report, report_tsv, LevelSpec, MethodSpec};
use mdl_cocluster::hardmodel::{HardClusterModel, Variant};
use mdl_cocluster::{mutual_information, oracle};

#[derive(Parser)]
#[command(name = "cocluster", version, about = "MDL co-clustering of word pairs and structural disambiguation")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a pair file and write model, dendrograms, merge history and summary.
    Cluster(ClusterArgs),
    /// Decide attachment cases with a back-off chain.
    Disambiguate(DisambiguateArgs),
    /// Cross-validate disambiguation methods and print a comparison table.
    Evaluate(EvaluateArgs),
    /// Check greedy merges against brute-force recomputation on a small table.
    #[command(hide = true)]
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Mdl,
    Brown,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Pp,
    Compound,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PpDefault {
    Noun,
    Verb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    #[value(name = "2dc")]
    TwoDc,
    Brown,
    WordBased,
}

#[derive(Args, Clone)]
struct ClusteringOpts {
    /// Maximum row merges per round.
    #[arg(long, default_value_t = 1)]
    bn: usize,
    /// Maximum column merges per round.
    #[arg(long, default_value_t = 1)]
    bv: usize,
    /// Target class counts `ROWS,COLS` for brown mode.
    #[arg(long, value_parser = parse_targets)]
    targets: Option<(usize, usize)>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl ClusteringOpts {
    fn config(&self) -> ClusterConfig {
        ClusterConfig {
            b_n: self.bn,
            b_v: self.bv,
            threads: self.threads.max(1),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if self.bn == 0 || self.bv == 0 {
            return Err(CliError::Usage("--bn and --bv must be at least 1".into()));
        }
        Ok(())
    }

    fn echo(&self) -> String {
        format!("bn={} bv={} targets={}", self.bn, self.bv, targets_str(self.targets))
    }
}

#[derive(Args)]
struct ClusterArgs {
    /// Pair TSV: row, column, optional count.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Mdl)]
    mode: Mode,
    #[command(flatten)]
    clustering: ClusteringOpts,
    /// Recorded in the output header; clustering itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for model.json, rows.nwk, cols.nwk, merges.tsv and summary.txt.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DisambiguateArgs {
    /// Case TSV.
    #[arg(long)]
    cases: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Pp)]
    kind: Kind,
    /// Training triples (head, relation, dependent, count).
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Pre-trained model for one relation, as RELATION=PATH; repeatable.
    #[arg(long = "model", value_parser = parse_model_arg)]
    models: Vec<(String, PathBuf)>,
    /// Level-1 estimator trained from --triples.
    #[arg(long, value_enum, default_value_t = Method::TwoDc)]
    method: Method,
    /// Fallback probability table (relation, head, dependent, probability).
    #[arg(long)]
    fallback: Option<PathBuf>,
    /// Number of most frequent relations to cluster.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = PpDefault::Noun)]
    pp_default: PpDefault,
    #[command(flatten)]
    clustering: ClusteringOpts,
    /// Decisions TSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Case TSV with gold labels.
    #[arg(long)]
    cases: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Pp)]
    kind: Kind,
    /// Extra training triples used in every fold.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Comma-separated methods, each `+`-joined levels from word-based, 2dc, brown,
    /// fallback, default.
    #[arg(long, default_value = "default,word-based,2dc")]
    methods: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Use one seeded holdout split with this many test cases instead of k folds.
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fallback: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = PpDefault::Noun)]
    pp_default: PpDefault,
    #[command(flatten)]
    clustering: ClusteringOpts,
    /// Append per-fold counts to the table.
    #[arg(long)]
    per_fold: bool,
    #[arg(long)]
    report_tsv: Option<PathBuf>,
    /// Full reports, including per-fold counts, as JSON.
    #[arg(long)]
    per_fold_json: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    pairs: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<mdl_cocluster::Error> for CliError {
    fn from(e: mdl_cocluster::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn parse_targets(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected ROWS,COLS")?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || b == 0 {
        return Err("targets must be positive".into());
    }
    Ok((a, b))
}

fn parse_model_arg(s: &str) -> Result<(String, PathBuf), String> {
    let (rel, path) = s.split_once('=').ok_or("expected RELATION=PATH")?;
    if rel.is_empty() {
        return Err("empty relation".into());
    }
    Ok((rel.to_string(), PathBuf::from(path)))
}

fn targets_str(t: Option<(usize, usize)>) -> String {
    t.map_or_else(|| "-".into(), |(a, b)| format!("{a},{b}"))
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input file not found: {}", path.display())));
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn read_with_path<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> mdl_cocluster::Result<T>) -> Result<T, CliError> {
    let reader = open_input(path)?;
    f(reader).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn default_rule(pp: PpDefault) -> DefaultRule {
    DefaultRule {
        pp: match pp {
            PpDefault::Noun => Outcome::AttachSecond,
            PpDefault::Verb => Outcome::AttachFirst,
        },
        ..DefaultRule::default()
    }
}

fn case_kind(k: Kind) -> CaseKind {
    match k {
        Kind::Pp => CaseKind::Pp,
        Kind::Compound => CaseKind::Compound,
    }
}

fn kind_str(k: Kind) -> &'static str {
    match k {
        Kind::Pp => "pp",
        Kind::Compound => "compound",
    }
}

fn pp_default_str(p: PpDefault) -> &'static str {
    match p {
        PpDefault::Noun => "noun",
        PpDefault::Verb => "verb",
    }
}

fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    args.clustering.check()?;
    let targets = match (args.mode, args.clustering.targets) {
        (Mode::Brown, None) => return Err(CliError::Usage("--mode brown requires --targets ROWS,COLS".into())),
        (_, t) => t,
    };
    let table = read_with_path(&args.pairs, CooccurrenceTable::read_pairs_tsv)?;
    let config = args.clustering.config();
    let outcome = match (args.mode, targets) {
        (Mode::Brown, Some((r, c))) => brown_cluster(&table, r, c, config),
        _ => cluster_2d(&table, config),
    };
    let mode = match args.mode {
        Mode::Mdl => "mdl",
        Mode::Brown => "brown",
    };
    let header = format!(
        "# cocluster cluster pairs={} mode={} {} seed={}\n",
        args.pairs.display(),
        mode,
        args.clustering.echo(),
        args.seed
    );

    let mut summary = header.clone();
    let m = table.total();
    let _ = writeln!(summary, "mode\t{mode}");
    let _ = writeln!(summary, "rows\t{}", table.n_rows());
    let _ = writeln!(summary, "cols\t{}", table.n_cols());
    let _ = writeln!(summary, "sample_size\t{m}");
    if args.mode == Mode::Mdl {
        let _ = writeln!(summary, "threshold_per_free_param_bits\t{:.6}", (m as f64).log2() / 2.0);
    }
    let _ = writeln!(summary, "iterations\t{}", outcome.iterations);
    let _ = writeln!(summary, "merges\t{}", outcome.history.len());
    let _ = writeln!(summary, "row_classes\t{}", outcome.model.row_partition().n_classes());
    let _ = writeln!(summary, "col_classes\t{}", outcome.model.col_partition().n_classes());
    for (label, dl) in [("initial", outcome.initial_length), ("final", outcome.final_length)] {
        let _ = writeln!(summary, "{label}_model_bits\t{:.9}", dl.model_bits);
        let _ = writeln!(summary, "{label}_data_bits\t{:.9}", dl.data_bits);
        let _ = writeln!(summary, "{label}_total_bits\t{:.9}", dl.total_bits);
        let _ = writeln!(summary, "{label}_free_params\t{}", dl.free_params);
    }
    let mi = mutual_information(&table, outcome.model.row_partition(), outcome.model.col_partition());
    let _ = writeln!(summary, "final_mutual_information_bits\t{mi:.9}");

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.out_dir.display())))?;
    let out = |name: &str| args.out_dir.join(name);
    write_file(&out("model.json"), &outcome.model.to_json(Some(outcome.final_length))?)?;
    write_file(&out("rows.nwk"), &outcome.row_dendrogram.to_newick())?;
    write_file(&out("cols.nwk"), &outcome.col_dendrogram.to_newick())?;
    write_file(&out("rows.thesaurus.txt"), &outcome.row_dendrogram.to_thesaurus())?;
    write_file(&out("cols.thesaurus.txt"), &outcome.col_dendrogram.to_thesaurus())?;
    write_file(&out("merges.tsv"), &format!("{header}{}", outcome.history_tsv()))?;
    write_file(&out("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn level_one(args: &DisambiguateArgs) -> Result<Option<Box<dyn mdl_cocluster::disambig::ConditionalEstimator>>, CliError> {
    if !args.models.is_empty() {
        let mut est = ClusterEstimator::new("models");
        for (rel, path) in &args.models {
            let mut text = String::new();
            open_input(path)?
                .read_to_string(&mut text)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let model =
                HardClusterModel::from_json(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            est.insert(rel.clone(), model);
        }
        return Ok(Some(Box::new(est)));
    }
    let Some(path) = &args.triples else { return Ok(None) };
    let triples = read_with_path(path, TripleDataset::read_tsv)?;
    let config = args.clustering.config();
    Ok(Some(match args.method {
        Method::WordBased => Box::new(EmpiricalEstimator::from_triples(&triples)),
        Method::TwoDc => Box::new(train_pp_estimators(&triples, args.top_k, ClusterMethod::Mdl(config), "2dc")),
        Method::Brown => {
            let (rows, cols) = args
                .clustering
                .targets
                .ok_or_else(|| CliError::Usage("--method brown requires --targets ROWS,COLS".into()))?;
            Box::new(train_pp_estimators(&triples, args.top_k, ClusterMethod::Brown { rows, cols, config }, "brown"))
        }
    }))
}

fn cmd_disambiguate(args: &DisambiguateArgs) -> Result<(), CliError> {
    args.clustering.check()?;
    if args.method == Method::Brown && args.clustering.targets.is_none() && args.models.is_empty() {
        return Err(CliError::Usage("--method brown requires --targets ROWS,COLS".into()));
    }
    let cases = read_with_path(&args.cases, |r| read_cases_tsv(r, case_kind(args.kind)))?;
    let fallback = match &args.fallback {
        Some(p) => Some(read_with_path(p, TableEstimator::read_tsv)?),
        None => None,
    };
    let mut chain = EstimatorChain::new(default_rule(args.pp_default));
    if let Some(level) = level_one(args)? {
        chain.push(level);
    }
    if let Some(fb) = fallback {
        chain.push(Box::new(fb));
    }

    let method = match args.method {
        Method::TwoDc => "2dc",
        Method::Brown => "brown",
        Method::WordBased => "word-based",
    };
    let models: Vec<String> = args.models.iter().map(|(r, p)| format!("{r}={}", p.display())).collect();
    let mut out = format!(
        "# cocluster disambiguate cases={} kind={} triples={} models={} method={} fallback={} top_k={} pp_default={} {}\n",
        args.cases.display(),
        kind_str(args.kind),
        args.triples.as_ref().map_or("-".into(), |p| p.display().to_string()),
        if models.is_empty() { "-".into() } else { models.join(",") },
        method,
        args.fallback.as_ref().map_or("-".into(), |p| p.display().to_string()),
        args.top_k,
        pp_default_str(args.pp_default),
        args.clustering.echo()
    );
    let mut labelled = Vec::new();
    for case in &cases {
        let d = chain.decide(case)?;
        let _ = writeln!(out, "{}\t{}", case.to_tsv_fields(), d.to_tsv_fields());
        if case.gold.is_some() {
            labelled.push(case.clone());
        }
    }
    let metrics = if labelled.is_empty() {
        None
    } else {
        let c = evalharness::score(&chain, &labelled, 0)?;
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        Some(format!(
            "# cases={} coverage={:.6} accuracy_covered={} accuracy_overall={}",
            c.tested,
            c.coverage(),
            opt(c.accuracy_covered()),
            opt(c.accuracy_overall())
        ))
    };
    match &args.out {
        Some(path) => {
            write_file(path, &out)?;
            if let Some(m) = metrics {
                println!("{m}");
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(out.as_bytes())?;
            if let Some(m) = metrics {
                eprintln!("{m}");
            }
        }
    }
    Ok(())
}

fn parse_methods(args: &EvaluateArgs, base: Arc<TripleDataset>) -> Result<Vec<MethodSpec>, CliError> {
    let fallback = match &args.fallback {
        Some(p) => Some(Arc::new(read_with_path(p, TableEstimator::read_tsv)?)),
        None => None,
    };
    let mut specs = Vec::new();
    for name in args.methods.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mut levels = Vec::new();
        for token in name.split('+') {
            match token {
                "word-based" => levels.push(LevelSpec::WordBased),
                "2dc" => levels.push(LevelSpec::TwoDc),
                "brown" => {
                    let (rows, cols) = args.clustering.targets.ok_or_else(|| {
                        CliError::Usage(format!("method `{name}` uses brown but --targets was not given"))
                    })?;
                    levels.push(LevelSpec::Brown { rows, cols });
                }
                "fallback" => {
                    let table = fallback.clone().ok_or_else(|| {
                        CliError::Usage(format!("method `{name}` uses fallback but --fallback was not given"))
                    })?;
                    levels.push(LevelSpec::Fallback(table));
                }
                "default" => {}
                other => return Err(CliError::Usage(format!("unknown method component `{other}` in `{name}`"))),
            }
        }
        specs.push(MethodSpec {
            name: name.to_string(),
            levels,
            default: Some(default_rule(args.pp_default)),
            base_triples: Arc::clone(&base),
            top_k: args.top_k,
            cluster: ClusterConfig {
                threads: 1,
                ..args.clustering.config()
            },
        });
    }
    if specs.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    Ok(specs)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    args.clustering.check()?;
    if args.folds == 0 {
        return Err(CliError::Usage("--folds must be at least 1".into()));
    }
    let base = match &args.triples {
        Some(p) => read_with_path(p, TripleDataset::read_tsv)?,
        None => TripleDataset::default(),
    };
    let specs = parse_methods(args, Arc::new(base))?;
    let mut cases = read_with_path(&args.cases, |r| read_cases_tsv(r, case_kind(args.kind)))?;
    if let Some(i) = cases.iter().position(|c| c.gold.is_none()) {
        return Err(CliError::Runtime(format!("{}: case {} has no gold label", args.cases.display(), i + 1)));
    }
    evalharness::canonicalize(&mut cases);
    let plan = match args.holdout {
        Some(n) => evalharness::FoldPlan::holdout(cases.len(), n, args.seed)?,
        None => evalharness::FoldPlan::kfold(cases.len(), args.folds, args.seed)?,
    };
    let mut reports = Vec::new();
    for spec in &specs {
        log::info!("evaluating {}", spec.name);
        reports.push(evalharness::evaluate(spec, &cases, &plan, args.clustering.threads.max(1))?);
    }
    let split = match args.holdout {
        Some(n) => format!("holdout={n}"),
        None => format!("folds={}", args.folds),
    };
    let header = format!(
        "# cocluster evaluate cases={} kind={} triples={} methods={} {} seed={} fallback={} top_k={} pp_default={} {}\n",
        args.cases.display(),
        kind_str(args.kind),
        args.triples.as_ref().map_or("-".into(), |p| p.display().to_string()),
        args.methods,
        split,
        args.seed,
        args.fallback.as_ref().map_or("-".into(), |p| p.display().to_string()),
        args.top_k,
        pp_default_str(args.pp_default),
        args.clustering.echo()
    );
    print!("{header}{}", compare_report(&reports, args.per_fold));
    if let Some(path) = &args.report_tsv {
        write_file(path, &format!("{header}{}", report_tsv(&reports)))?;
    }
    if let Some(path) = &args.per_fold_json {
        let json = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(path, &json)?;
    }
    Ok(())
}

fn cmd_oracle_check(args: &OracleArgs) -> Result<(), CliError> {
    let table = read_with_path(&args.pairs, CooccurrenceTable::read_pairs_tsv)?;
    let (best_rows, best_cols, best) =
        oracle::exhaustive_best(&table, oracle::EXHAUSTIVE_LIMIT, oracle::EXHAUSTIVE_LIMIT)?;
    let m = table.total() as f64;
    let mut state = ClusterState::new(&table, 1);
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    loop {
        state.next_iteration();
        let mut changed = false;
        for side in [Side::Row, Side::Col] {
            let (rp, cp) = (state.partition(Side::Row), state.partition(Side::Col));
            let mi_before = mutual_information(&table, &rp, &cp);
            for cand in state.candidates(side) {
                let direct = oracle::direct_delta(&table, &rp, &cp, side, cand.i, cand.j)?;
                let (rp2, cp2) = match side {
                    Side::Row => (rp.merged(cand.i, cand.j)?, cp.clone()),
                    Side::Col => (rp.clone(), cp.merged(cand.i, cand.j)?),
                };
                let via_mi = m * (mi_before - mutual_information(&table, &rp2, &cp2));
                worst = worst.max((cand.delta_total - direct).abs()).max((cand.delta_total - via_mi).abs());
                checked += 1;
            }
            changed |= !state.merge_round(side, 1).executed.is_empty();
        }
        if !changed {
            break;
        }
    }
    let greedy = state.model(Variant::Full).total_description_length(&table)?;
    println!("candidates_checked\t{checked}");
    println!("max_delta_discrepancy_bits\t{worst:.3e}");
    println!("greedy_total_bits\t{:.6}", greedy.total_bits);
    println!("exhaustive_total_bits\t{:.6}", best.total_bits);
    println!("exhaustive_row_classes\t{}", best_rows.n_classes());
    println!("exhaustive_col_classes\t{}", best_cols.n_classes());
    if worst > 1e-9 || greedy.total_bits < best.total_bits - 1e-9 {
        return Err(CliError::Runtime("oracle check failed".into()));
    }
    println!("status\tok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Disambiguate(a) => cmd_disambiguate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
