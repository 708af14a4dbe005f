#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use textnmn::config::{RunConfig, Variant};
use textnmn::data::Instance;
use textnmn::gradcheck::{gradient_check, GradCheckReport};
use textnmn::model::{Model, Prepared};
use textnmn::modules::ImageGrid;
use textnmn::tape::NodeId;
use textnmn::{ParameterStore64, Result, Tape64, Tensor64};

pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_EPS: f64 = 1e-6;

pub type LossFn = Box<dyn Fn(&ParameterStore64, &mut Tape64) -> Result<NodeId>>;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor64 {
    Tensor64::new(shape.to_vec(), random_vec(rng, shape.iter().product())).unwrap()
}

/// `Σ c ⊙ x` for a fixed random `c`, so every output entry matters.
fn weighted_sum(tape: &mut Tape64, x: NodeId, seed: u64) -> Result<NodeId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.value(x).shape().to_vec();
    let c = tape.constant(tensor(&mut rng, &shape));
    let prod = tape.mul(x, c)?;
    Ok(tape.sum(prod))
}

fn store(entries: &[(&str, &[usize])], seed: u64) -> ParameterStore64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParameterStore64::new();
    for (name, shape) in entries {
        p.insert(*name, tensor(&mut rng, shape));
    }
    p
}

/// One case per differentiable tape operation.
pub fn op_cases() -> Vec<(&'static str, ParameterStore64, LossFn)> {
    let vecs = store(&[("x", &[4]), ("y", &[4])], 1);
    let lin = store(&[("W", &[3, 4]), ("x", &[4]), ("b", &[3])], 2);
    let mut scal = store(&[("x", &[4])], 3);
    scal.insert("s", Tensor64::scalar(1.7));
    let w = |f: fn(&mut Tape64, NodeId, NodeId) -> Result<NodeId>| -> LossFn {
        Box::new(move |p, t| {
            let x = t.param("x", p)?;
            let y = t.param("y", p)?;
            let out = f(t, x, y)?;
            weighted_sum(t, out, 9)
        })
    };
    let unary = |f: fn(&mut Tape64, NodeId) -> Result<NodeId>| -> LossFn {
        Box::new(move |p, t| {
            let x = t.param("x", p)?;
            let out = f(t, x)?;
            weighted_sum(t, out, 9)
        })
    };
    vec![
        ("add", vecs.clone(), w(|t, x, y| t.add(x, y))),
        ("mul", vecs.clone(), w(|t, x, y| t.mul(x, y))),
        ("concat", vecs.clone(), w(|t, x, y| t.concat(&[x, y]))),
        ("stack_rows", vecs.clone(), w(|t, x, y| t.stack_rows(&[x, y]))),
        ("relu", vecs.clone(), unary(|t, x| Ok(t.relu(x)))),
        ("sigmoid", vecs.clone(), unary(|t, x| Ok(t.sigmoid(x)))),
        ("tanh", vecs.clone(), unary(|t, x| Ok(t.tanh(x)))),
        ("softmax", vecs.clone(), unary(|t, x| t.softmax(x))),
        (
            "masked_softmax",
            vecs.clone(),
            unary(|t, x| t.masked_softmax(x, &[true, false, true, true])),
        ),
        ("sum", vecs.clone(), unary(|t, x| Ok(t.sum(x)))),
        ("add_const", vecs.clone(), unary(|t, x| Ok(t.add_const(x, 0.3)))),
        ("scale", vecs.clone(), unary(|t, x| Ok(t.scale(x, -1.9)))),
        (
            "nll",
            vecs.clone(),
            unary(|t, x| {
                let p = t.softmax(x)?;
                t.nll(p, 2)
            }),
        ),
        (
            "matvec",
            lin.clone(),
            Box::new(|p, t| {
                let (w, x, b) = (t.param("W", p)?, t.param("x", p)?, t.param("b", p)?);
                let out = t.matvec(w, x, Some(b))?;
                weighted_sum(t, out, 9)
            }),
        ),
        (
            "matvec_t",
            lin.clone(),
            Box::new(|p, t| {
                let (w, b) = (t.param("W", p)?, t.param("b", p)?);
                let out = t.matvec_t(w, b)?;
                weighted_sum(t, out, 9)
            }),
        ),
        (
            "gather_row",
            lin.clone(),
            Box::new(|p, t| {
                let w = t.param("W", p)?;
                let out = t.gather_row(w, 1)?;
                weighted_sum(t, out, 9)
            }),
        ),
        (
            "reshape",
            lin,
            Box::new(|p, t| {
                let w = t.param("W", p)?;
                let out = t.reshape(w, &[12])?;
                weighted_sum(t, out, 9)
            }),
        ),
        (
            "div_scalar",
            scal,
            Box::new(|p, t| {
                let (x, s) = (t.param("x", p)?, t.param("s", p)?);
                let out = t.div_scalar(x, s)?;
                weighted_sum(t, out, 9)
            }),
        ),
    ]
}

pub const TOY_D: usize = 4;
pub const TOY_H: usize = 3;
pub const TOY_W: usize = 3;
pub const TOY_HIDDEN: usize = 8;
pub const TOY_KB_DIM: usize = 6;

const TOY_LAYOUTS: [&str; 4] = [
    "Describe(Find(dog))",
    "Describe(And(Find(dog), Find(ball)))",
    "Measure(Find(ball))",
    "Measure(And(Find(dog), Find(dog)))",
];

/// Four instances over a `4×3×3` grid with five distinct answers, one per
/// layout shape.
pub fn toy_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let answers = ["yes", "no", "red", "2", "ball"];
    TOY_LAYOUTS
        .iter()
        .enumerate()
        .map(|(i, layout)| Instance {
            id: format!("toy-{i}"),
            question: ["what", "is", "the", "dog", "doing"].map(String::from).to_vec(),
            caption: ["a", "dog", "with", "a", "red", "ball"].map(String::from).to_vec(),
            answers: answers.iter().cycle().skip(i).take(5).map(|s| s.to_string()).collect(),
            features: ImageGrid::from_vec(TOY_D, TOY_H, TOY_W, random_vec(&mut rng, TOY_D * TOY_H * TOY_W)).unwrap(),
            dep_parse: None,
            layout: Some(layout.to_string()),
        })
        .collect()
}

/// A toy model of `variant` with `K = 5` answer classes and every hidden
/// size 8, plus its prepared instances.
pub fn toy_model(variant: Variant) -> (Model<f64>, Vec<Prepared<f64>>) {
    let data = toy_instances();
    let config = RunConfig {
        variant,
        answers_k: 4,
        emb_dim: TOY_HIDDEN,
        q_hidden: TOY_HIDDEN,
        c_hidden: TOY_HIDDEN,
        attn_k: TOY_HIDDEN,
        measure_hidden: TOY_HIDDEN,
        kb_dim: if variant.uses_kb() { TOY_KB_DIM } else { 0 },
        seed: 5,
        ..RunConfig::default()
    };
    let model = Model::init(config, &data, None).unwrap();
    assert_eq!(model.num_classes(), 5);
    let plain = Model {
        config: RunConfig {
            variant: if variant.uses_kb() { Variant::Nmn } else { variant },
            ..model.config.clone()
        },
        ..model.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let preps = data
        .iter()
        .map(|inst| {
            let mut p = plain.prepare(inst, None).unwrap();
            if variant.uses_kb() {
                p.kb = Some(random_vec(&mut rng, TOY_KB_DIM));
            }
            p
        })
        .collect();
    (model, preps)
}

/// Gradient check of the summed loss over all toy instances.
pub fn head_gradient_check(variant: Variant) -> GradCheckReport {
    let (model, preps) = toy_model(variant);
    let f = move |p: &ParameterStore64, tape: &mut Tape64| -> Result<NodeId> {
        let m = Model {
            params: p.clone(),
            ..model.clone()
        };
        let mut total: Option<NodeId> = None;
        for prep in &preps {
            let (_, loss) = m.loss(tape, prep)?;
            total = Some(match total {
                Some(t) => tape.add(t, loss)?,
                None => loss,
            });
        }
        Ok(total.expect("nonempty"))
    };
    let (m, _) = toy_model(variant);
    gradient_check(f, &m.params, GRAD_EPS).unwrap()
}

pub const HEAD_VARIANTS: [Variant; 4] = [Variant::Nmn, Variant::NmnCap, Variant::NmnCapAttn, Variant::NmnKb];

pub struct LayoutCase {
    pub question: String,
    pub policy: textnmn::layout::TopPolicy,
    pub short: String,
    pub longest: String,
    pub parse: Vec<textnmn::layout::DepToken>,
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn layout_cases() -> Vec<LayoutCase> {
    let text = std::fs::read_to_string(fixture("layouts.conll")).unwrap();
    let mut cases = Vec::new();
    for block in text.split("\n\n") {
        let comment = |key: &str| {
            block
                .lines()
                .find_map(|l| l.strip_prefix(&format!("# {key}: ")))
                .map(str::to_string)
        };
        let Some(question) = comment("question") else { continue };
        let parses = textnmn::layout::parse_dep_parses(block).unwrap();
        assert_eq!(parses.len(), 1, "{question}");
        cases.push(LayoutCase {
            question,
            policy: comment("policy").unwrap().parse().unwrap(),
            short: comment("short").unwrap(),
            longest: comment("longest").unwrap(),
            parse: parses.into_iter().next().unwrap(),
        });
    }
    cases
}

/// Compiles every fixture question in both modes; returns the mismatches.
pub fn layout_mismatches(cases: &[LayoutCase]) -> Vec<String> {
    use textnmn::layout::{compile_from_parse, type_check, ParseMode, TopModule};
    let mut bad = Vec::new();
    for case in cases {
        for (mode, expected) in [(ParseMode::Short, &case.short), (ParseMode::Longest, &case.longest)] {
            match compile_from_parse(&case.parse, mode, TopModule::Auto(case.policy)) {
                Ok(layout) => {
                    let got = layout.to_string();
                    if &got != expected || type_check(&layout).is_err() {
                        bad.push(format!("{} ({mode:?}): got {got}, expected {expected}", case.question));
                    }
                }
                Err(e) => bad.push(format!("{} ({mode:?}): {e}", case.question)),
            }
        }
    }
    bad
}

/// Scores every document with BM25 from raw token counts.
pub fn brute_force(docs: &[textnmn::knowledge::AbstractDoc], terms: &[&str], k: usize) -> Vec<(usize, f64)> {
    let (k1, b) = (1.2, 0.75);
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| textnmn::knowledge::tokenize(&d.text)).collect();
    let n = docs.len() as f64;
    let avg = tokens.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut seen = Vec::new();
    for t in terms {
        let t = t.to_lowercase();
        if !seen.contains(&t) {
            seen.push(t);
        }
    }
    let mut scored = Vec::new();
    for (id, toks) in tokens.iter().enumerate() {
        let mut score = 0.0;
        let mut matched = false;
        for t in &seen {
            let tf = toks.iter().filter(|x| *x == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = tokens.iter().filter(|d| d.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * (toks.len() as f64 / avg)));
        }
        if matched {
            scored.push((id, score));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Random corpora of at most 200 documents over a small vocabulary; every
/// query is compared against [`brute_force`]. Returns the number of queries
/// checked, or the first disagreement.
pub fn random_retrieval_sweep(
    seed: u64,
    corpora: usize,
    queries_per_corpus: usize,
) -> std::result::Result<usize, String> {
    use textnmn::knowledge::{parse_abstracts, KbIndex};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for c in 0..corpora {
        let vocab = rng.random_range(3..16u32);
        let n_docs = rng.random_range(1..=200usize);
        let text: String = (0..n_docs)
            .map(|i| {
                let len = rng.random_range(1..25);
                let words: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect();
                format!("Doc{i}\t{}\n", words.join(" "))
            })
            .collect();
        let docs = parse_abstracts(&text).map_err(|e| e.to_string())?.docs;
        let index = KbIndex::build(&docs, None).map_err(|e| e.to_string())?;
        for _ in 0..queries_per_corpus {
            let len = rng.random_range(0..6);
            let terms: Vec<String> = (0..len)
                .map(|_| format!("w{}", rng.random_range(0..vocab + 2)))
                .collect();
            let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
            let k = rng.random_range(1..=n_docs.min(20));
            let got = index.search(&refs, k).map_err(|e| e.to_string())?;
            let want = brute_force(&docs, &refs, k);
            if got != want {
                return Err(format!(
                    "corpus {c}, query {terms:?}, k {k}: got {got:?}, want {want:?}"
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Plain-arithmetic ADADELTA on one scalar, written from the update rule
/// rather than from the library.
pub struct ReferenceAdadelta {
    rho: f64,
    eps: f64,
    eg2: f64,
    edx2: f64,
}

impl ReferenceAdadelta {
    pub fn new(rho: f64, eps: f64) -> Self {
        Self {
            rho,
            eps,
            eg2: 0.0,
            edx2: 0.0,
        }
    }

    pub fn delta(&mut self, g: f64) -> f64 {
        self.eg2 = self.rho * self.eg2 + (1.0 - self.rho) * g.powi(2);
        let dx = -g * ((self.edx2 + self.eps) / (self.eg2 + self.eps)).sqrt();
        self.edx2 = self.rho * self.edx2 + (1.0 - self.rho) * dx.powi(2);
        dx
    }
}

/// `(curvature, centre, start)` of each quadratic `a/2 · (x - c)²`.
pub const QUADRATICS: [(f64, f64, f64); 5] = [
    (1.0, 0.0, 1.0),
    (2.0, 3.0, -1.0),
    (0.5, -2.0, 4.0),
    (10.0, 0.1, 0.0),
    (3.0, 1e-3, 7.5),
];

/// Largest absolute gap between the library optimizer and the reference
/// over `steps` steps on every quadratic.
pub fn adadelta_max_gap(steps: usize) -> f64 {
    use textnmn::optim::{Adadelta, DEFAULT_EPS, DEFAULT_RHO};
    let mut worst: f64 = 0.0;
    for (a, c, x0) in QUADRATICS {
        let mut store = ParameterStore64::new();
        store.insert("x", Tensor64::vector(vec![x0]));
        let mut opt = Adadelta::<f64>::default();
        let mut reference = ReferenceAdadelta::new(DEFAULT_RHO, DEFAULT_EPS);
        let mut x_ref = x0;
        for _ in 0..steps {
            let x = store.get("x").unwrap().data()[0];
            store.zero_grad();
            store.get_mut("x").unwrap().accumulate_grad(&[a * (x - c)], 1.0);
            opt.step(&mut store).unwrap();
            x_ref += reference.delta(a * (x_ref - c));
            worst = worst.max((store.get("x").unwrap().data()[0] - x_ref).abs());
        }
    }
    worst
}

/// The library's first step from `x = 0` with gradient `g`.
pub fn adadelta_first_step(g: f64) -> f64 {
    let mut store = ParameterStore64::new();
    store.insert("x", Tensor64::vector(vec![0.0]));
    store.get_mut("x").unwrap().accumulate_grad(&[g], 1.0);
    textnmn::optim::Adadelta::<f64>::default().step(&mut store).unwrap();
    store.get("x").unwrap().data()[0]
}

/// The six example questions with the yes/no, number and other counts
/// they split into.
pub const EXAMPLE_QUESTIONS: [&str; 6] = [
    "How many planes are flying?",
    "What is the food called?",
    "What is the child holding?",
    "How many people are standing?",
    "What color is the sign?",
    "Is there a tree on the desk?",
];

pub fn category_counts(questions: &[&str]) -> std::collections::BTreeMap<&'static str, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for q in questions {
        let tokens: Vec<&str> = q.trim_end_matches('?').split_whitespace().collect();
        *counts.entry(textnmn::metrics::categorize(&tokens).name()).or_insert(0) += 1;
    }
    counts
}

/// Ten human answers with `matches` copies of "yes".
pub fn humans(matches: usize) -> Vec<String> {
    (0..10)
        .map(|i| if i < matches { "yes" } else { "no" }.to_string())
        .collect()
}

/// Desk-scale synthetic data: 200 training and 100 validation instances
/// with at most two objects per scene.
pub fn desk_data(seed: u64, rate: f64, templates: &[textnmn::synth::Template]) -> (Vec<Instance>, Vec<Instance>) {
    use textnmn::synth::{generate, SynthConfig};
    let make = |seed, n| {
        generate(&SynthConfig {
            seed,
            n,
            informative_caption_rate: rate,
            templates: templates.to_vec(),
            max_objects: 2,
            ..SynthConfig::default()
        })
        .instances
    };
    (make(seed, 200), make(seed + 1000, 100))
}

/// Twelve epochs in batches of four, with Measure for counting and yes/no
/// questions; patience covers the whole run so every epoch is logged.
pub fn desk_config(variant: Variant, seed: u64) -> RunConfig {
    RunConfig {
        variant,
        batch: 4,
        epochs: 12,
        patience: 12,
        measure_for: textnmn::layout::TopPolicy::Both,
        seed,
        ..RunConfig::default()
    }
}

/// Small, fast configuration for persistence checks.
pub fn small_config(variant: Variant, seed: u64) -> RunConfig {
    RunConfig {
        variant,
        emb_dim: 8,
        q_hidden: 8,
        c_hidden: 6,
        attn_k: 5,
        measure_hidden: 8,
        batch: 8,
        epochs: 2,
        patience: 2,
        seed,
        ..RunConfig::default()
    }
}

pub fn small_data(seed: u64, n: usize) -> Vec<Instance> {
    textnmn::synth::generate(&textnmn::synth::SynthConfig {
        seed,
        n,
        ..Default::default()
    })
    .instances
}

/// Checkpoint bytes of a short seeded training run.
pub fn trained_checkpoint(variant: Variant, seed: u64) -> Vec<u8> {
    let (tr, va) = textnmn::train::split_validation(small_data(seed, 40), 0.2, seed).unwrap();
    let out = textnmn::train::train::<f64>(small_config(variant, seed), &tr, &va, None, None, |_| {}).unwrap();
    textnmn::checkpoint::to_bytes(&out.model).unwrap()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Instances on which a reloaded model's distribution differs in any bit.
pub fn reload_mismatches(model: &Model<f64>, instances: &[Instance]) -> Vec<String> {
    let path = tempfile::NamedTempFile::new().unwrap();
    textnmn::checkpoint::save(model, path.path()).unwrap();
    let back: Model<f64> = textnmn::checkpoint::load(path.path()).unwrap();
    instances
        .iter()
        .filter(|inst| {
            let a = model.distribution(&model.prepare(inst, None).unwrap()).unwrap();
            let b = back.distribution(&back.prepare(inst, None).unwrap()).unwrap();
            bits(&a) != bits(&b)
        })
        .map(|inst| inst.id.clone())
        .collect()
}

/// Instances on which a knowledge-seeded model fed the zero vector, with
/// zero seed bias, differs in any bit from the same weights run unseeded.
pub fn zero_kb_mismatches(instances: &[Instance]) -> Vec<String> {
    let kb_config = RunConfig {
        kb_dim: TOY_KB_DIM,
        ..small_config(Variant::NmnKb, 3)
    };
    let mut seeded = Model::<f64>::init(kb_config, instances, None).unwrap();
    seeded
        .params
        .get_mut(textnmn::fusion::SEED_BIAS)
        .unwrap()
        .data_mut()
        .iter_mut()
        .for_each(|b| *b = 0.0);
    let plain = Model {
        config: RunConfig {
            variant: Variant::Nmn,
            kb_dim: 0,
            ..seeded.config.clone()
        },
        ..seeded.clone()
    };
    instances
        .iter()
        .filter(|inst| {
            let base = plain.prepare(inst, None).unwrap();
            let with_kb = Prepared {
                kb: Some(vec![0.0; TOY_KB_DIM]),
                ..base.clone()
            };
            bits(&seeded.distribution(&with_kb).unwrap()) != bits(&plain.distribution(&base).unwrap())
        })
        .map(|inst| inst.id.clone())
        .collect()
}
