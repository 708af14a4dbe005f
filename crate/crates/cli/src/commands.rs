use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use textnmn::checkpoint::{self, check_data_dims};
use textnmn::config::RunConfig;
use textnmn::data::{load_instances, write_instances, Instance};
use textnmn::encoders::{format_embeddings, read_embedding_file, EmbeddingTable};
use textnmn::knowledge::{extract_query_nouns, ingest_abstracts, read_index, tokenize, write_index, KbIndex};
use textnmn::layout::{compile_from_parse, parse_dep_parses, type_check, TopModule};
use textnmn::synth::{generate, SynthConfig};
use textnmn::train::{evaluate, split_validation, train as fit_model};
use textnmn::{Error, Model64};

use crate::{CompileArgs, EvalArgs, GenSynthArgs, KbIndexArgs, KbQueryArgs, KnowledgeArgs, PredictArgs, TrainArgs};

pub const INTERNAL: u8 = 1;
pub const USAGE: u8 = 2;
pub const IO: u8 = 3;
pub const MALFORMED: u8 = 4;
pub const DIMENSION: u8 = 5;

const VAL_FRACTION: f64 = 0.1;
const TOP_N: usize = 5;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn io_error(path: &Path, e: io::Error) -> Failure {
    Failure::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

impl Failure {
    pub fn code(&self) -> u8 {
        let Failure::Core(e) = self else { return USAGE };
        match e.root_cause() {
            Error::InvalidArgument(_) => USAGE,
            Error::Io { .. } => IO,
            Error::Malformed(_)
            | Error::DepParse { .. }
            | Error::LayoutSyntax { .. }
            | Error::LayoutType { .. }
            | Error::Uncompilable(_)
            | Error::Checkpoint(_)
            | Error::IndexFile(_)
            | Error::Json(_)
            | Error::Empty(_) => MALFORMED,
            Error::Dimension(_) | Error::ShapeMismatch { .. } => DIMENSION,
            _ => INTERNAL,
        }
    }

    fn kind(&self) -> &'static str {
        match self.code() {
            USAGE => "usage",
            IO => "io",
            MALFORMED => "malformed",
            DIMENSION => "dimension",
            _ => "internal",
        }
    }

    pub fn report(&self) {
        let message = match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        };
        let line = json!({"error": self.kind(), "code": self.code(), "message": message.replace('\n', " ")});
        eprintln!("{line}");
    }
}

type Outcome = Result<(), Failure>;

/// Writes one line; a closed pipe downstream (`| head`) is not an error.
fn emit(out: &mut impl Write, line: &impl std::fmt::Display, path: &Path) -> Outcome {
    match writeln!(out, "{line}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(io_error(path, e)),
        _ => Ok(()),
    }
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn load_embeddings(path: &Option<PathBuf>) -> Result<Option<EmbeddingTable<f64>>, Failure> {
    Ok(path.as_deref().map(read_embedding_file).transpose()?)
}

fn load_knowledge(args: &KnowledgeArgs, embeddings: Option<&EmbeddingTable<f64>>) -> Result<Option<KbIndex>, Failure> {
    if let Some(path) = &args.index {
        return Ok(Some(read_index(path)?));
    }
    match &args.abstracts {
        Some(path) => {
            let ingested = ingest_abstracts(path)?;
            Ok(Some(KbIndex::build(&ingested.docs, embeddings)?))
        }
        None => Ok(None),
    }
}

fn require_knowledge(model: &Model64, kb: &Option<KbIndex>) -> Outcome {
    if model.config.variant.uses_kb() && kb.is_none() {
        return Err(Failure::Usage(format!(
            "{} needs --index or --abstracts",
            model.config.variant
        )));
    }
    Ok(())
}

pub fn train(a: TrainArgs) -> Outcome {
    let embeddings = load_embeddings(&a.embeddings)?;
    let data = load_instances(&a.data)?;
    let (train_set, val_set) = match &a.val {
        Some(path) => (data, load_instances(path)?),
        None => split_validation(data, VAL_FRACTION, a.seed)?,
    };
    let kb = if a.model.uses_kb() {
        let kb = load_knowledge(&a.knowledge, embeddings.as_ref())?;
        Some(kb.ok_or_else(|| Failure::Usage(format!("{} needs --index or --abstracts", a.model)))?)
    } else {
        None
    };
    let config = RunConfig {
        variant: a.model,
        answers_k: a.answers_k,
        emb_dim: embeddings.as_ref().map_or(a.emb_dim, |t| t.dim()),
        q_hidden: a.q_hidden,
        c_hidden: a.c_hidden,
        attn_k: a.attn_k,
        measure_hidden: a.measure_hidden,
        kb_topk: a.kb_topk,
        kb_dim: kb.as_ref().map_or(0, KbIndex::dim),
        parse_mode: a.parse_mode,
        measure_for: a.measure_for,
        batch: a.batch,
        epochs: a.epochs,
        patience: a.patience,
        metric: a.metric,
        seed: a.seed,
        data: Some(a.data.display().to_string()),
        val: path_string(&a.val),
        embeddings: path_string(&a.embeddings),
        abstracts: path_string(&a.knowledge.abstracts),
        index: path_string(&a.knowledge.index),
        ..RunConfig::default()
    };
    config.validate()?;
    let log_path = a.metrics_log.clone().unwrap_or_else(|| {
        a.out
            .parent()
            .map_or_else(|| PathBuf::from("metrics.log"), |dir| dir.join("metrics.log"))
    });
    let mut log = create(&log_path)?;
    let mut log_error = None;
    let outcome = fit_model::<f64>(
        config,
        &train_set,
        &val_set,
        embeddings.as_ref(),
        kb.as_ref(),
        |entry| {
            let line = serde_json::to_string(entry).expect("log entries serialize");
            if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
                log_error.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = log_error {
        return Err(io_error(&log_path, e));
    }
    checkpoint::save(&outcome.model, &a.out)?;
    let best_val = outcome
        .log
        .iter()
        .find(|l| l.epoch == outcome.best_epoch)
        .map(|l| l.val_acc);
    println!(
        "{}",
        json!({
            "checkpoint": a.out.display().to_string(),
            "epochs_run": outcome.log.len(),
            "best_epoch": outcome.best_epoch,
            "best_val_acc": best_val,
            "stopped_early": outcome.stopped_early,
            "train": train_set.len(),
            "val": val_set.len(),
        })
    );
    Ok(())
}

/// Loads a checkpoint and data that matches it, plus the knowledge index
/// when the variant needs one.
fn load_for_inference(
    ckpt: &Path,
    test: &Path,
    knowledge: &KnowledgeArgs,
    embeddings: &Option<PathBuf>,
) -> Result<(Model64, Vec<Instance>, Option<KbIndex>), Failure> {
    let model: Model64 = checkpoint::load(ckpt)?;
    let data = load_instances(test)?;
    check_data_dims(&model, &data)?;
    let kb = if model.config.variant.uses_kb() {
        let table = load_embeddings(embeddings)?;
        load_knowledge(knowledge, table.as_ref())?
    } else {
        None
    };
    require_knowledge(&model, &kb)?;
    Ok((model, data, kb))
}

pub fn eval(a: EvalArgs) -> Outcome {
    let (model, data, kb) = load_for_inference(&a.ckpt, &a.test, &a.knowledge, &a.embeddings)?;
    let prep = model.prepare_all(&data, kb.as_ref())?;
    let acc = evaluate(&model, &prep, a.metric)?;
    let per_category: serde_json::Map<String, Value> = acc
        .per_category
        .iter()
        .map(|(c, (score, n))| (c.name().to_string(), json!({"accuracy": score, "count": n})))
        .collect();
    let summary = json!({
        "metric": a.metric.to_string(),
        "overall": acc.overall,
        "count": acc.count,
        "per_category": per_category,
    });
    if let Some(path) = &a.out {
        fs::write(path, format!("{summary}\n")).map_err(|e| io_error(path, e))?;
    }
    println!("{summary}");
    Ok(())
}

fn top_n(dist: &[f64], labels: &[&str], n: usize) -> Vec<Value> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&i, &j| dist[j].total_cmp(&dist[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .take(n)
        .map(|i| json!({"answer": labels[i], "p": dist[i]}))
        .collect()
}

pub fn predict(a: PredictArgs) -> Outcome {
    let (model, data, kb) = load_for_inference(&a.ckpt, &a.test, &a.knowledge, &a.embeddings)?;
    let labels = model.answers.labels();
    let mut out: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let out_path = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    for inst in &data {
        let prep = model.prepare(inst, kb.as_ref())?;
        let (answer, dist) = model.predict(&prep)?;
        let line = json!({"id": inst.id, "answer": answer, "top5": top_n(&dist, &labels, TOP_N)});
        emit(&mut out, &line, &out_path)?;
    }
    match out.flush() {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(io_error(&out_path, e)),
        _ => Ok(()),
    }
}

pub fn compile_layout(a: CompileArgs) -> Outcome {
    let text = fs::read_to_string(&a.parse).map_err(|e| io_error(&a.parse, e))?;
    let parses = parse_dep_parses(&text)?;
    if parses.is_empty() {
        return Err(Error::Empty(format!("{} holds no parses", a.parse.display())).into());
    }
    let mut stdout = io::stdout().lock();
    for parse in &parses {
        let layout = compile_from_parse(parse, a.parse_mode, TopModule::Auto(a.measure_for))?;
        type_check(&layout)?;
        emit(&mut stdout, &layout, Path::new("<stdout>"))?;
    }
    Ok(())
}

pub fn kb_index(a: KbIndexArgs) -> Outcome {
    let ingested = ingest_abstracts(&a.abstracts)?;
    let embeddings = load_embeddings(&a.embeddings)?;
    let index = KbIndex::build(&ingested.docs, embeddings.as_ref())?;
    write_index(&index, &a.out)?;
    println!(
        "{}",
        json!({
            "index": a.out.display().to_string(),
            "docs": index.num_docs(),
            "dropped": ingested.dropped,
            "malformed": ingested.malformed,
            "dim": index.dim(),
        })
    );
    Ok(())
}

pub fn kb_query(a: KbQueryArgs) -> Outcome {
    let index = read_index(&a.index)?;
    let nouns = extract_query_nouns(&tokenize(&a.question));
    let hits = index.search(&nouns, a.k)?;
    let mut stdout = io::stdout().lock();
    for (rank, (doc, score)) in hits.into_iter().enumerate() {
        let line = json!({"rank": rank + 1, "doc": doc, "title": index.title(doc), "score": score});
        emit(&mut stdout, &line, Path::new("<stdout>"))?;
    }
    Ok(())
}

pub fn gen_synth(a: GenSynthArgs) -> Outcome {
    if !(0.0..=1.0).contains(&a.informative_caption_rate) {
        return Err(Failure::Usage("--informative-caption-rate must lie in [0, 1]".into()));
    }
    if a.templates.is_empty() || a.noise.is_nan() || a.noise < 0.0 {
        return Err(Failure::Usage(
            "--templates must be nonempty and --noise nonnegative".into(),
        ));
    }
    let synth = generate(&SynthConfig {
        seed: a.seed,
        n: a.n,
        height: a.height,
        width: a.width,
        informative_caption_rate: a.informative_caption_rate,
        templates: a.templates,
        noise: a.noise,
        max_objects: a.max_objects,
        emb_dim: a.emb_dim,
    });
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let data = a.out.join("data.jsonl");
    write_instances(&data, &synth.instances)?;
    let emb = a.out.join("embeddings.txt");
    fs::write(&emb, format_embeddings(&synth.embeddings)).map_err(|e| io_error(&emb, e))?;
    let abstracts = a.out.join("abstracts.tsv");
    fs::write(&abstracts, &synth.abstracts).map_err(|e| io_error(&abstracts, e))?;
    println!(
        "{}",
        json!({
            "data": data.display().to_string(),
            "embeddings": emb.display().to_string(),
            "abstracts": abstracts.display().to_string(),
            "instances": synth.instances.len(),
        })
    );
    Ok(())
}
