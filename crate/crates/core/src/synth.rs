//! Synthetic shapes VQA: colored shapes on a grid, templated questions with
//! exact answers, captions and matching dependency parses.
//!
//! Channel layout of the `D = 16` features: shape one-hot (4), color
//! one-hot (6), object presence (1), pure noise (5). Every channel also
//! carries Gaussian noise.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Instance;
use crate::encoders::{EmbeddingTable, WordVocab};
use crate::error::{Error, Result};
use crate::layout::{DepToken, Pos};
use crate::modules::ImageGrid;
use crate::tensor::Tensor;

pub const SHAPES: [&str; 4] = ["circle", "square", "triangle", "star"];
pub const COLORS: [&str; 6] = ["red", "green", "blue", "yellow", "purple", "orange"];
pub const CHANNELS: usize = 16;
pub const ANSWERS_PER_INSTANCE: usize = 10;

const PRESENCE: usize = SHAPES.len() + COLORS.len();
const UNINFORMATIVE: [&str; 6] = ["some", "shapes", "on", "a", "gray", "background"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    /// "what color is the <shape>"
    Color,
    /// "how many <shape>s are there"
    Count,
    /// "is there a <shape>"
    Exist,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::Color, Template::Count, Template::Exist];

    pub fn name(self) -> &'static str {
        match self {
            Template::Color => "color",
            Template::Count => "count",
            Template::Exist => "exist",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown question template `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub informative_caption_rate: f64,
    pub templates: Vec<Template>,
    pub noise: f64,
    pub max_objects: usize,
    pub emb_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 200,
            height: 5,
            width: 5,
            informative_caption_rate: 0.7,
            templates: Template::ALL.to_vec(),
            noise: 0.1,
            max_objects: 4,
            emb_dim: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub instances: Vec<Instance>,
    /// Random vectors for every question and caption token.
    pub embeddings: EmbeddingTable<f64>,
    /// A small `title<TAB>text` corpus about the shapes and colors.
    pub abstracts: String,
}

#[derive(Debug, Clone, Copy)]
struct Object {
    cell: usize,
    shape: usize,
    color: usize,
}

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(str::to_string).collect()
}

fn plural(shape: &str) -> String {
    format!("{shape}s")
}

fn parse(spec: &[(&str, usize, &str, Pos)]) -> Vec<DepToken> {
    spec.iter()
        .enumerate()
        .map(|(i, &(form, head, rel, pos))| DepToken::new(i + 1, form, head, rel, pos))
        .collect()
}

fn question_for(template: Template, shape: &str) -> (Vec<String>, Vec<DepToken>) {
    match template {
        Template::Color => (
            words(&format!("what color is the {shape}")),
            parse(&[
                ("what", 2, "det", Pos::Wh),
                ("color", 3, "attr", Pos::Wh),
                ("is", 0, "root", Pos::Other),
                ("the", 5, "det", Pos::Other),
                (shape, 3, "nsubj", Pos::Noun),
            ]),
        ),
        Template::Count => {
            let p = plural(shape);
            (
                words(&format!("how many {p} are there")),
                parse(&[
                    ("how", 2, "advmod", Pos::Wh),
                    ("many", 3, "amod", Pos::Wh),
                    (&p, 4, "nsubj", Pos::Noun),
                    ("are", 0, "root", Pos::Other),
                    ("there", 4, "expl", Pos::Other),
                ]),
            )
        }
        Template::Exist => (
            words(&format!("is there a {shape}")),
            parse(&[
                ("is", 0, "root", Pos::Other),
                ("there", 1, "expl", Pos::Other),
                ("a", 4, "det", Pos::Other),
                (shape, 1, "nsubj", Pos::Noun),
            ]),
        ),
    }
}

fn informative_caption(template: Template, shape: &str, color: Option<&str>, answer: &str) -> Vec<String> {
    match template {
        Template::Color => words(&format!("a {} {shape} on a gray background", color.unwrap_or(answer))),
        Template::Count => words(&format!("{answer} {} on a gray background", plural(shape))),
        Template::Exist => words(&format!("{answer} there is a {shape} here")),
    }
}

fn render<R: Rng>(rng: &mut R, objects: &[Object], h: usize, w: usize, noise: f64) -> ImageGrid<f64> {
    let hw = h * w;
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite std");
    let mut data = vec![0.0; CHANNELS * hw];
    for o in objects {
        data[o.shape * hw + o.cell] = 1.0;
        data[(SHAPES.len() + o.color) * hw + o.cell] = 1.0;
        data[PRESENCE * hw + o.cell] = 1.0;
    }
    if noise > 0.0 {
        for v in data.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    ImageGrid::new(Tensor::new(vec![CHANNELS, h, w], data).expect("sized above")).expect("rank 3")
}

fn scene<R: Rng>(rng: &mut R, cells: usize, max_objects: usize) -> Vec<Object> {
    let k = rng.random_range(1..=max_objects.clamp(1, cells));
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(rng);
    order[..k]
        .iter()
        .map(|&cell| Object {
            cell,
            shape: rng.random_range(0..SHAPES.len()),
            color: rng.random_range(0..COLORS.len()),
        })
        .collect()
}

/// Deterministic in `config`: the same seed yields the same data.
pub fn generate(config: &SynthConfig) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cells = config.height * config.width;
    let templates = if config.templates.is_empty() {
        Template::ALL.to_vec()
    } else {
        config.templates.clone()
    };
    let mut instances = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let template = templates[rng.random_range(0..templates.len())];
        let (objects, shape, answer, color) = loop {
            let objects = scene(&mut rng, cells, config.max_objects);
            match template {
                Template::Color => {
                    let unique: Vec<&Object> = objects
                        .iter()
                        .filter(|o| objects.iter().filter(|p| p.shape == o.shape).count() == 1)
                        .collect();
                    if unique.is_empty() {
                        continue;
                    }
                    let o = *unique[rng.random_range(0..unique.len())];
                    let color = COLORS[o.color];
                    break (objects, o.shape, color.to_string(), Some(color));
                }
                Template::Count => {
                    let shape = rng.random_range(0..SHAPES.len());
                    let n = objects.iter().filter(|o| o.shape == shape).count();
                    break (objects, shape, n.to_string(), None);
                }
                Template::Exist => {
                    let shape = rng.random_range(0..SHAPES.len());
                    let yes = objects.iter().any(|o| o.shape == shape);
                    break (objects, shape, if yes { "yes" } else { "no" }.to_string(), None);
                }
            }
        };
        let features = render(&mut rng, &objects, config.height, config.width, config.noise);
        let (question, dep_parse) = question_for(template, SHAPES[shape]);
        let informative = rng.random_bool(config.informative_caption_rate.clamp(0.0, 1.0));
        let caption = if informative {
            informative_caption(template, SHAPES[shape], color, &answer)
        } else {
            UNINFORMATIVE.iter().map(|s| s.to_string()).collect()
        };
        instances.push(Instance {
            id: format!("synth-{i}"),
            question,
            caption,
            answers: vec![answer; ANSWERS_PER_INSTANCE],
            features,
            dep_parse: Some(dep_parse),
            layout: None,
        });
    }
    let embeddings = random_embeddings(&mut rng, &instances, config.emb_dim);
    SynthData {
        instances,
        embeddings,
        abstracts: abstracts(),
    }
}

fn random_embeddings<R: Rng>(rng: &mut R, instances: &[Instance], dim: usize) -> EmbeddingTable<f64> {
    let vocab = WordVocab::from_tokens(instances.iter().flat_map(|i| i.question.iter().chain(&i.caption)));
    let normal = Normal::new(0.0, 1.0 / (dim.max(1) as f64).sqrt()).expect("finite std");
    let data: Vec<f64> = (0..vocab.len() * dim.max(1)).map(|_| normal.sample(rng)).collect();
    let n = vocab.len();
    EmbeddingTable::new(vocab, Tensor::matrix(n, dim.max(1), data).expect("non-empty")).expect("sized above")
}

fn abstracts() -> String {
    let mut out = String::new();
    for shape in SHAPES {
        let title = format!("{}{}", shape[..1].to_uppercase(), &shape[1..]);
        out.push_str(&format!(
            "{title}\tA {shape} is a plane figure. A drawing may show one or more {} in any color.\n",
            plural(shape)
        ));
    }
    for color in COLORS {
        let title = format!("{}{}", color[..1].to_uppercase(), &color[1..]);
        out.push_str(&format!(
            "{title}\t{title} is a color. Shapes painted {color} appear {color}.\n"
        ));
    }
    out
}
