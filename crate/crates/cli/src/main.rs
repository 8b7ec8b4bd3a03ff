//! `cooc`: ingest co-occurrence data, train energy models, evaluate them.

mod config;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cooc_core::baselines::{Baseline, Normalization, WalkScore};
use cooc_core::corpus_file::{load_dataset, save_dataset};
use cooc_core::eval::{
    cross_validate, evaluate_masked, mask_records, mcnemar_significance, rank_candidates,
    EvalReport, Method,
};
use cooc_core::ingest::{
    read_edge_list, read_jester, read_movielens, read_transactions, EdgeMode, JESTER_THRESHOLD,
    MOVIELENS_THRESHOLD,
};
use cooc_core::rng::child_seed;
use cooc_core::scorers::sigmoid;
use cooc_core::training::checkpoint::Checkpoint;
use cooc_core::training::{
    gradient_check, parse_layer_spec, random_check_instance, train, GradientMode,
};
use cooc_core::{Hyperparams, ItemId, ItemSet, Model, ModelKind, Scorer};

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_EPSILON: f64 = 1e-5;
/// Child-seed index for the masking stream of single-split comparisons.
const COMPARE_MASK: u64 = 0x636d70;

#[derive(Parser, Debug)]
#[command(name = "cooc", version, about = "Energy-based co-occurrence models")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// File of key=value defaults; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert raw data into a corpus file plus `.vocab` sidecar.
    Ingest(IngestArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Cross-validate a model or baseline, or compare two checkpoints.
    Evaluate(EvaluateArgs),
    /// Rank the most probable missing items for a context.
    Predict(PredictArgs),
    /// Write the deep model's item embeddings as TSV.
    ExportEmbeddings(ExportArgs),
    /// Compare analytic and finite-difference gradients on a random model.
    GradCheck(GradCheckArgs),
}

const SUBCOMMANDS: &[&str] = &[
    "ingest",
    "train",
    "evaluate",
    "predict",
    "export-embeddings",
    "grad-check",
];

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Edges,
    Transactions,
    Movielens,
    Jester,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Edges {
    Out,
    In,
    Both,
}

#[derive(Args, Debug)]
struct IngestArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, value_enum)]
    format: Format,
    /// Rating threshold for movielens (>=) and jester (>).
    #[arg(long)]
    threshold: Option<f64>,
    /// Which adjacency list of a directed graph becomes a record.
    #[arg(long, value_enum, default_value = "out")]
    edges: Edges,
    /// Keep only the M most frequent items.
    #[arg(long, value_name = "M")]
    top_items: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ModelName {
    Dem,
    Fvbm,
    L1,
    Lbl,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Hidden widths for dem, e.g. 32x16; empty for none.
    #[arg(long, default_value = "32x16")]
    layers: String,
    /// Embedding width for lbl.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Drop the lbl per-item bias.
    #[arg(long)]
    no_bias: bool,
    /// Train fvbm with independent directed weights.
    #[arg(long)]
    untied: bool,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.95)]
    lr_decay: f64,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    init_scale: f64,
    #[arg(long, default_value_t = 1e-6)]
    weight_decay: f64,
    /// Scale negative terms by (N - |record|) / negatives.
    #[arg(long)]
    reweight_negatives: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn hyper(&self, model: ModelName) -> Result<Hyperparams, CliError> {
        let layer_sizes = if model == ModelName::Dem {
            parse_layer_spec(&self.layers)?
        } else {
            Vec::new()
        };
        let hyper = Hyperparams {
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            negatives: self.negatives,
            epochs: self.epochs,
            layer_sizes,
            init_scale: self.init_scale,
            weight_decay: self.weight_decay,
            reweight_negatives: self.reweight_negatives,
            seed: self.seed,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    fn kind(&self, model: ModelName) -> ModelKind {
        match model {
            ModelName::Dem => ModelKind::Dem,
            ModelName::Fvbm => ModelKind::Fvbm { tied: !self.untied },
            ModelName::L1 => ModelKind::L1,
            ModelName::Lbl => ModelKind::Lbl {
                dim: self.dim,
                use_bias: !self.no_bias,
            },
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    corpus: PathBuf,
    /// Checkpoint path; the loss trace goes to `<out>.trace.tsv`.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "dem")]
    model: ModelName,
    #[command(flatten)]
    params: ModelArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BaselineName {
    Cvg,
    Normcvg,
    Lrw,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Norm {
    Cosine,
    Target,
    Source,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Summary {
    Tsv,
    Json,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    corpus: PathBuf,
    #[arg(long, value_enum, conflicts_with_all = ["baseline", "compare"])]
    model: Option<ModelName>,
    #[arg(long, value_enum, conflicts_with = "compare")]
    baseline: Option<BaselineName>,
    /// Evaluate two checkpoints on the same masked records.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
    #[arg(long, value_enum, default_value = "cosine")]
    norm: Norm,
    #[arg(long, default_value_t = 2)]
    lrw_steps: usize,
    /// Score LRW by the final-step mass instead of the accumulated mass.
    #[arg(long)]
    lrw_final_step: bool,
    /// Comma-separated cutoffs.
    #[arg(long = "k", value_delimiter = ',', default_value = "1,10")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Print `-` instead of wall-clock seconds.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, value_enum, default_value = "tsv")]
    summary: Summary,
    #[command(flatten)]
    params: ModelArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    checkpoint: PathBuf,
    /// Comma-separated context item ids.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    items: Vec<u32>,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Args, Debug)]
struct ExportArgs {
    checkpoint: PathBuf,
    /// Output file (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    #[arg(long, default_value = "8x4")]
    layers: String,
    #[arg(long, default_value_t = 20)]
    n_items: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the backpropagated term from the hidden-layer gradient.
    #[arg(long)]
    corrupt: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Check(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Check(m) => f.write_str(m),
        }
    }
}

impl From<cooc_core::Error> for CliError {
    fn from(e: cooc_core::Error) -> Self {
        use cooc_core::Error as E;
        match e {
            E::LayerSpec(_) | E::InvalidArgument(_) | E::InvalidFolds { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn with_path(path: &Path) -> impl FnOnce(cooc_core::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {}", path.display(), CliError::from(e)))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    let input = open(&args.input)?;
    let edge_mode = match args.edges {
        Edges::Out => EdgeMode::Out,
        Edges::In => EdgeMode::In,
        Edges::Both => EdgeMode::Both,
    };
    let dataset = match args.format {
        Format::Edges => read_edge_list(input, edge_mode),
        Format::Transactions => read_transactions(input),
        Format::Movielens => read_movielens(input, args.threshold.unwrap_or(MOVIELENS_THRESHOLD)),
        Format::Jester => read_jester(input, args.threshold.unwrap_or(JESTER_THRESHOLD)),
    }
    .map_err(with_path(&args.input))?;
    let dataset = match args.top_items {
        Some(m) => dataset.retain_top_items(m),
        None => dataset,
    };
    save_dataset(&dataset, &args.output).map_err(with_path(&args.output))?;
    eprintln!(
        "{} records, {} items, {} occurrences",
        dataset.corpus.len(),
        dataset.corpus.n_items(),
        dataset.corpus.n_occurrences()
    );
    Ok(())
}

fn trace_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".trace.tsv");
    PathBuf::from(name)
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let hyper = args.params.hyper(args.model)?;
    let dataset = load_dataset(&args.corpus).map_err(with_path(&args.corpus))?;
    let (model, trace) = train(&dataset.corpus, args.params.kind(args.model), &hyper)?;

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "epoch\tloss")?;
    let mut trace_out = String::from("epoch\tloss\n");
    for (i, loss) in trace.epoch_losses.iter().enumerate() {
        writeln!(stdout, "{}\t{loss:.6}", i + 1)?;
        trace_out.push_str(&format!("{}\t{loss}\n", i + 1));
    }
    eprintln!("trained in {:.2}s", trace.wall_times.iter().sum::<f64>());

    let ckpt = Checkpoint {
        model,
        tokens: Some(dataset.vocab.tokens().to_vec()),
    };
    ckpt.save(&args.out).map_err(with_path(&args.out))?;
    fs::write(trace_path(&args.out), trace_out)?;
    Ok(())
}

fn print_reports(reports: &[EvalReport], args: &EvaluateArgs) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match args.summary {
        Summary::Json => {
            let mut value =
                serde_json::to_value(reports).map_err(|e| CliError::Data(e.to_string()))?;
            if args.no_timing {
                for r in value.as_array_mut().into_iter().flatten() {
                    r["wall_time"] = serde_json::Value::Null;
                }
            }
            serde_json::to_writer_pretty(&mut out, &value)
                .map_err(|e| CliError::Data(e.to_string()))?;
            writeln!(out)?;
        }
        Summary::Tsv => {
            writeln!(out, "{}", EvalReport::TSV_HEADER)?;
            for r in reports {
                for row in r.tsv_rows(!args.no_timing) {
                    writeln!(out, "{row}")?;
                }
            }
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(with_path(path))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    if args.ks.is_empty() || args.ks.contains(&0) {
        return Err(CliError::Usage("--k values must be positive".into()));
    }
    if args.folds < 2 {
        return Err(CliError::Usage("--folds must be at least 2".into()));
    }
    let dataset = load_dataset(&args.corpus).map_err(with_path(&args.corpus))?;
    let corpus = &dataset.corpus;

    if let Some(paths) = &args.compare {
        let all: Vec<usize> = (0..corpus.len()).collect();
        let masked = mask_records(corpus, &all, child_seed(args.params.seed, COMPARE_MASK));
        let mut reports = Vec::new();
        for path in paths {
            let ckpt = load_checkpoint(path)?;
            if ckpt.model.n_items() != corpus.n_items() {
                return Err(CliError::Data(format!(
                    "{}: model has {} items, corpus has {}",
                    path.display(),
                    ckpt.model.n_items(),
                    corpus.n_items()
                )));
            }
            let name = path.file_stem().map_or_else(
                || path.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            );
            reports.push(evaluate_masked(&name, &ckpt.model, &masked, &args.ks)?);
        }
        print_reports(&reports, args)?;
        let p = mcnemar_significance(&reports[0].hits[0], &reports[1].hits[0])?;
        println!("mcnemar_p\tK={}\t{p:.6e}", args.ks[0]);
        return Ok(());
    }

    let method = match (args.model, args.baseline) {
        (Some(m), None) => Method::Model {
            kind: args.params.kind(m),
            hyper: args.params.hyper(m)?,
        },
        (None, Some(b)) => Method::Baseline(match b {
            BaselineName::Cvg => Baseline::Cvg,
            BaselineName::Normcvg => Baseline::NormCvg(match args.norm {
                Norm::Cosine => Normalization::Cosine,
                Norm::Target => Normalization::Target,
                Norm::Source => Normalization::Source,
            }),
            BaselineName::Lrw => Baseline::Lrw {
                steps: args.lrw_steps,
                mode: if args.lrw_final_step {
                    WalkScore::FinalStep
                } else {
                    WalkScore::Accumulated
                },
            },
        }),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --model, --baseline or --compare".into(),
            ))
        }
    };
    let report = cross_validate(corpus, &method, &args.ks, args.folds, args.params.seed)?;
    print_reports(&[report], args)
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let n = ckpt.model.n_items();
    if let Some(bad) = args.items.iter().find(|&&id| id as usize >= n) {
        return Err(CliError::Data(format!(
            "unknown item id {bad}; valid ids are 0..={}",
            n.saturating_sub(1)
        )));
    }
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let context = ItemSet::new(args.items.iter().copied(), n)?;
    let ranked = rank_candidates(&ckpt.model, &context, args.k)?;
    let mut out = io::stdout().lock();
    writeln!(out, "rank\tid\ttoken\tprob")?;
    for (rank, (item, score)) in ranked.items.iter().zip(&ranked.scores).enumerate() {
        let token = token_of(&ckpt, *item);
        writeln!(
            out,
            "{}\t{}\t{token}\t{:.6}",
            rank + 1,
            item.0,
            sigmoid(*score)
        )?;
    }
    Ok(())
}

fn token_of(ckpt: &Checkpoint, item: ItemId) -> String {
    ckpt.tokens
        .as_ref()
        .and_then(|t| t.get(item.index()).cloned())
        .unwrap_or_else(|| item.0.to_string())
}

fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let Model::Dem(params) = &ckpt.model else {
        return Err(CliError::Data(format!(
            "{} model has no hierarchical embeddings; export needs a dem checkpoint",
            ckpt.model.kind_name()
        )));
    };
    if params.layers.is_empty() {
        return Err(CliError::Data(
            "zero-layer dem has no embeddings to export".into(),
        ));
    }
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for t in 0..params.n_items() {
        let item = ItemId(t as u32);
        write!(out, "{}", token_of(&ckpt, item))?;
        for v in params.embedding(item) {
            write!(out, "\t{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_grad_check(args: &GradCheckArgs) -> Result<(), CliError> {
    let layers = parse_layer_spec(&args.layers)?;
    let (params, record, negatives) = random_check_instance(args.n_items, &layers, args.seed)?;
    let mode = if args.corrupt {
        GradientMode::DropPropagated
    } else {
        GradientMode::Exact
    };
    let err = gradient_check(&params, &record, &negatives, GRAD_EPSILON, mode)?;
    let pass = err <= GRAD_TOLERANCE;
    println!(
        "{}\tmax_rel_error={err:.3e}\ttolerance={GRAD_TOLERANCE:e}",
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "gradient check failed: {err:.3e} > {GRAD_TOLERANCE:e}"
        )))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::ExportEmbeddings(a) => cmd_export(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect(), SUBCOMMANDS) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
