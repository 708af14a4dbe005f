mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use textnmn::config::Variant;
use textnmn::layout::{ParseMode, TopPolicy};
use textnmn::metrics::Metric;
use textnmn::synth::Template;

/// Neural module networks for visual question answering.
///
/// Exit codes: 0 success, 1 internal error, 2 usage error, 3 I/O error,
/// 4 malformed input, 5 dimension mismatch. Errors are printed to stderr as
/// one JSON object per line.
#[derive(Debug, Parser)]
#[command(name = "textnmn", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write its checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on labelled data.
    Eval(EvalArgs),
    /// Write one JSON line per instance with the answer and top-5 distribution.
    Predict(PredictArgs),
    /// Compile dependency parses (CoNLL) into layouts, one per line.
    CompileLayout(CompileArgs),
    /// Build a BM25 index from a title<TAB>text abstracts file.
    KbIndex(KbIndexArgs),
    /// Rank indexed documents for a question.
    KbQuery(KbQueryArgs),
    /// Generate a synthetic shapes dataset with embeddings and abstracts.
    GenSynth(GenSynthArgs),
}

#[derive(Debug, Args)]
struct KnowledgeArgs {
    /// Prebuilt knowledge index (needed by nmn+kb unless --abstracts is given)
    #[arg(long)]
    index: Option<PathBuf>,
    /// Abstracts to index on the fly when --index is absent
    #[arg(long)]
    abstracts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Model variant: nmn, nmn+cap, nmn+capattn, nmn+kb or cap-only
    #[arg(long, default_value = "nmn")]
    model: Variant,
    /// Training instances (JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Validation instances; a seeded 10% of --data is held out when absent
    #[arg(long)]
    val: Option<PathBuf>,
    /// Word embeddings (`token v1 ... vd` per line); sets the embedding size
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    knowledge: KnowledgeArgs,
    /// Checkpoint to write
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch JSON log [default: metrics.log next to --out]
    #[arg(long)]
    metrics_log: Option<PathBuf>,
    /// Instances per ADADELTA step
    #[arg(long, default_value_t = 32, value_parser = positive)]
    batch: usize,
    /// Maximum number of epochs
    #[arg(long, default_value_t = 12, value_parser = positive)]
    epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 1, value_parser = positive)]
    patience: usize,
    /// Answer vocabulary size K (plus one <other> class)
    #[arg(long, default_value_t = 64, value_parser = positive)]
    answers_k: usize,
    /// Embedding size when no --embeddings file is given
    #[arg(long, default_value_t = 64, value_parser = positive)]
    emb_dim: usize,
    /// Question LSTM size
    #[arg(long, default_value_t = 128, value_parser = positive)]
    q_hidden: usize,
    /// Caption LSTM size
    #[arg(long, default_value_t = 64, value_parser = positive)]
    c_hidden: usize,
    /// Caption attention size
    #[arg(long, default_value_t = 200, value_parser = positive)]
    attn_k: usize,
    /// Hidden units of the Measure module
    #[arg(long, default_value_t = 256, value_parser = positive)]
    measure_hidden: usize,
    /// Documents averaged into the knowledge vector
    #[arg(long, default_value_t = 3, value_parser = positive)]
    kb_topk: usize,
    /// Layout size: short or longest
    #[arg(long, visible_alias = "mode", default_value = "short")]
    parse_mode: ParseMode,
    /// Questions answered through Measure: none, count, yesno or both
    #[arg(long, default_value = "none")]
    measure_for: TopPolicy,
    /// Validation metric: exact or consensus
    #[arg(long, default_value = "exact")]
    metric: Metric,
    /// Seed for initialization, batch order and the validation split
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint to load
    #[arg(long)]
    ckpt: PathBuf,
    /// Labelled instances (JSONL)
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    knowledge: KnowledgeArgs,
    /// Word embeddings used when indexing --abstracts
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// exact or consensus
    #[arg(long, default_value = "exact")]
    metric: Metric,
    /// Also write the JSON summary here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Instances to answer (JSONL); answers are not required to be correct
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    knowledge: KnowledgeArgs,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Predictions file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompileArgs {
    /// CoNLL-style dependency parses, sentences separated by blank lines
    #[arg(long)]
    parse: PathBuf,
    /// short or longest
    #[arg(long, visible_alias = "mode", default_value = "short")]
    parse_mode: ParseMode,
    /// Questions compiled with Measure on top: none, count, yesno or both
    #[arg(long, default_value = "none")]
    measure_for: TopPolicy,
}

#[derive(Debug, Args)]
struct KbIndexArgs {
    /// title<TAB>text lines
    #[arg(long)]
    abstracts: PathBuf,
    /// Word embeddings for document vectors; without them the index only ranks
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Index file to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KbQueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Question text; its nouns become the query
    #[arg(long)]
    question: String,
    /// Number of documents to return
    #[arg(long, default_value_t = 3, value_parser = positive)]
    k: usize,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    /// Output directory for data.jsonl, embeddings.txt and abstracts.tsv
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    height: usize,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    width: usize,
    /// Probability that a caption contains the answer
    #[arg(long, default_value_t = 0.7)]
    informative_caption_rate: f64,
    /// Comma-separated question templates
    #[arg(long, value_delimiter = ',', default_value = "color,count,exist")]
    templates: Vec<Template>,
    /// Standard deviation of feature noise
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 4, value_parser = positive)]
    max_objects: usize,
    /// Size of the generated word vectors
    #[arg(long, default_value_t = 64, value_parser = positive)]
    emb_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            commands::Failure::Usage(first.to_string()).report();
            return ExitCode::from(commands::USAGE);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::CompileLayout(a) => commands::compile_layout(a),
        Command::KbIndex(a) => commands::kb_index(a),
        Command::KbQuery(a) => commands::kb_query(a),
        Command::GenSynth(a) => commands::gen_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
