//! Mini-batch training with ADADELTA, early stopping on validation accuracy,
//! and evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::Instance;
use crate::encoders::EmbeddingTable;
use crate::error::{Error, Result};
use crate::knowledge::KbIndex;
use crate::metrics::{Accuracy, AccuracyTally, Metric};
use crate::model::{Model, Prepared};
use crate::optim::Adadelta;
use crate::scalar::Scalar;
use crate::tape::Tape;

/// Stream of the seeded generator used for batch order; stream 0 is
/// parameter initialization.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once validation accuracy has failed to improve on the best so far
/// for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience: patience.max(1),
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, acc: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if acc <= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, acc));
                self.stale = 0;
                StopDecision::Improved
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S> {
    /// Parameters from the best validation epoch.
    pub model: Model<S>,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

pub fn evaluate<S: Scalar>(model: &Model<S>, data: &[Prepared<S>], metric: Metric) -> Result<Accuracy> {
    let mut tally = AccuracyTally::default();
    for prep in data {
        let (answer, _) = model.predict(prep)?;
        tally.add(prep.category, metric.score(&answer, &prep.answers));
    }
    Ok(tally.finish())
}

/// Runs one epoch over `data` in a seeded order; returns the mean loss.
pub fn train_epoch<S: Scalar>(
    model: &mut Model<S>,
    optimizer: &mut Adadelta<S>,
    data: &[Prepared<S>],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(model.config.batch) {
        model.params.zero_grad();
        let scale = S::one() / S::lit(batch.len() as f64);
        for &i in batch {
            let mut tape = Tape::new();
            let (_, loss) = model.loss(&mut tape, &data[i])?;
            total += tape.value(loss).item().to_f64().unwrap_or(f64::NAN);
            tape.backward_scaled(loss, scale)?
                .accumulate_into(&mut model.params, S::one());
        }
        optimizer.step(&mut model.params)?;
        model.params.round_to_storage();
    }
    Ok(total / data.len() as f64)
}

/// Trains `model` in place and returns the best-validation snapshot.
/// `on_epoch` sees each log line as soon as the epoch finishes.
pub fn fit<S: Scalar>(
    mut model: Model<S>,
    train: &[Prepared<S>],
    val: &[Prepared<S>],
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<S>> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("training and validation sets must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut optimizer = Adadelta::default();
    let mut stopper = EarlyStopping::new(model.config.patience);
    let metric = model.config.metric;
    let mut best = model.clone();
    let mut log = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=model.config.epochs {
        let start = Instant::now();
        let train_loss = train_epoch(&mut model, &mut optimizer, train, &mut rng)?;
        let train_acc = evaluate(&model, train, metric)?.overall;
        let val_acc = evaluate(&model, val, metric)?.overall;
        let entry = EpochLog {
            epoch,
            train_loss,
            train_acc,
            val_acc,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("epoch {epoch}: loss {train_loss:.4} train {train_acc:.4} val {val_acc:.4}");
        on_epoch(&entry);
        log.push(entry);
        match stopper.observe(epoch, val_acc) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = epoch < model.config.epochs;
                break;
            }
        }
    }
    best.params.iter_mut().for_each(|(_, t)| t.clear_grad());
    Ok(TrainOutcome {
        model: best,
        log,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        stopped_early,
    })
}

/// Builds and trains a model from raw instances. Feature dimensions of both
/// sets are checked before the first epoch.
pub fn train<S: Scalar>(
    config: RunConfig,
    train: &[Instance],
    val: &[Instance],
    embeddings: Option<&EmbeddingTable<f64>>,
    kb: Option<&KbIndex>,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<S>> {
    let model = Model::init(config, train, embeddings)?;
    let train_prep = model.prepare_all(train, kb)?;
    let val_prep = model.prepare_all(val, kb)?;
    fit(model, &train_prep, &val_prep, on_epoch)
}

/// Deterministic `(train, val)` split holding out `ceil(fraction · n)`
/// instances, at least one and never all of them.
pub fn split_validation(instances: Vec<Instance>, fraction: f64, seed: u64) -> Result<(Vec<Instance>, Vec<Instance>)> {
    if instances.len() < 2 {
        return Err(Error::Empty(
            "need at least two instances to hold out a validation split".into(),
        ));
    }
    let n = instances.len();
    let held = ((fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; n];
    order[..held].iter().for_each(|&i| is_val[i] = true);
    let (mut tr, mut va) = (Vec::new(), Vec::new());
    for (inst, v) in instances.into_iter().zip(is_val) {
        if v {
            va.push(inst);
        } else {
            tr.push(inst);
        }
    }
    Ok((tr, va))
}
