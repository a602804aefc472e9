//! The training loop: weighted cross-entropy, SGD with momentum, global
//! gradient-norm clipping, seeded shuffling, and early stopping on
//! development loss with best-checkpoint restore.
//!
//! Training is bit-reproducible for a fixed `(seed, corpus, config)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, Label};
use crate::error::{Error, Result};
use crate::eval::Counts;
use crate::features::{FeatureExtractor, PreparedDoc, SidecarTags};
use crate::linalg::Vector;
use crate::network::{Gradients, ModelParams};

/// Probabilities below this are clamped before the log in the loss. Clamp
/// events are counted in [`TrainHistory::clamp_events`], not treated as
/// errors.
pub const PROB_CLAMP: f64 = 1e-12;

/// Optimizer and loop hyperparameters. The defaults are the tuned values:
/// learning rate 0.01, batch 32, SGD momentum 0.1, class weights (2, 1) for
/// toponym vs non-toponym, clip threshold 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    /// (toponym, non-toponym) loss weights; both strictly positive.
    pub class_weights: (f64, f64),
    pub clip_threshold: f64,
    pub max_epochs: usize,
    /// Evaluations (not epochs) without dev-loss improvement before stopping.
    pub patience: usize,
    /// Evaluate on the dev set every this many epochs.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            momentum: 0.1,
            class_weights: (2.0, 1.0),
            clip_threshold: 1.0,
            max_epochs: 100,
            patience: 5,
            eval_every: 1,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.class_weights.0 <= 0.0 || self.class_weights.1 <= 0.0 {
            return Err(Error::InvalidInput(
                "class weights must be strictly positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidInput("eval_every must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidInput("patience must be positive".into()));
        }
        if self.clip_threshold <= 0.0 {
            return Err(Error::InvalidInput(
                "clip_threshold must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn weight_for(&self, label: Label) -> f64 {
        match label {
            Label::Toponym => self.class_weights.0,
            Label::NonToponym => self.class_weights.1,
        }
    }
}

/// One recorded evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The training record: evaluation points, how training ended, and where the
/// returned checkpoint came from.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub points: Vec<EvalPoint>,
    pub stopped_early: bool,
    pub best_epoch: usize,
    /// Loss evaluations where a probability had to be clamped to
    /// [`PROB_CLAMP`] before the log.
    pub clamp_events: usize,
}

impl TrainHistory {
    /// TSV rendering: `epoch train_loss dev_loss precision recall f1`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tdev_loss\tprecision\trecall\tf1\n");
        for p in &self.points {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.2}\t{:.2}\t{:.2}\n",
                p.epoch, p.train_loss, p.dev_loss, p.precision, p.recall, p.f1
            ));
        }
        out
    }
}

/// `-w(target) · ln(p[target])`, clamping the probability to
/// [`PROB_CLAMP`] first.
pub fn weighted_cross_entropy(probs: &Vector, target: Label, weights: (f64, f64)) -> f64 {
    let w = match target {
        Label::Toponym => weights.0,
        Label::NonToponym => weights.1,
    };
    let p = probs[target.class_index()].max(PROB_CLAMP);
    -w * p.ln()
}

/// Rescales all gradients jointly so their combined L2 norm does not exceed
/// `threshold`: if the global norm `g` is above it, every component is
/// multiplied by `threshold / g`. Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut Gradients, threshold: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    norm
}

/// One momentum-SGD update: `v ← momentum·v − lr·grad; param ← param + v`.
pub fn sgd_momentum_step(
    params: &mut ModelParams,
    grads: &Gradients,
    velocity: &mut Gradients,
    learning_rate: f64,
    momentum: f64,
) {
    for ((layer, grad), vel) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut velocity.layers)
    {
        for ((w, &g), v) in layer
            .weights
            .data_mut()
            .iter_mut()
            .zip(grad.weights.data())
            .zip(vel.weights.data_mut())
        {
            *v = momentum * *v - learning_rate * g;
            *w += *v;
        }
        for ((b, &g), v) in layer
            .bias
            .0
            .iter_mut()
            .zip(grad.bias.iter())
            .zip(&mut vel.bias.0)
        {
            *v = momentum * *v - learning_rate * g;
            *b += *v;
        }
    }
}

/// Dev-loss early stopping with checkpoint-restore semantics: an evaluation
/// improves iff its loss is strictly below the best seen; `patience`
/// consecutive non-improvements stop training.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    wait: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            wait: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> StopDecision {
        match self.best {
            Some(best) if loss >= best => {
                self.wait += 1;
                if self.wait >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::NoImprovement
                }
            }
            _ => {
                self.best = Some(loss);
                self.wait = 0;
                StopDecision::Improved
            }
        }
    }
}

/// Test and experimentation hooks. `dev_loss` maps the computed dev loss to
/// the value the early stopper observes; it receives the 1-based evaluation
/// index.
#[derive(Default)]
pub struct TrainHooks<'h> {
    pub dev_loss: Option<Box<dyn FnMut(usize, f64) -> f64 + 'h>>,
}

struct WindowSet {
    docs: Vec<PreparedDoc>,
    /// (doc index, kept-token index, label) in deterministic order.
    examples: Vec<(usize, usize, Label)>,
    /// Gold labels of tokens removed by filtering; those are auto-predicted
    /// non-toponym at scoring time.
    dropped_gold: Vec<Label>,
}

fn prepare_windows(
    extractor: &FeatureExtractor,
    docs: &[Document],
    sidecars: &SidecarTags,
    what: &str,
) -> Result<WindowSet> {
    let mut prepared = Vec::with_capacity(docs.len());
    let mut examples = Vec::new();
    let mut dropped_gold = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        let sidecar = sidecars.get(&doc.id).map(Vec::as_slice);
        let prep = extractor.prepare(&doc.tokens, sidecar)?;
        let missing_label = || {
            Error::InvalidInput(format!(
                "{what} document {:?} has unlabeled tokens; project labels first",
                doc.id
            ))
        };
        for i in 0..prep.len() {
            let label = prep.labels[i].ok_or_else(missing_label)?;
            examples.push((d, i, label));
        }
        let kept: std::collections::HashSet<usize> = prep.kept.iter().copied().collect();
        for (i, token) in doc.tokens.iter().enumerate() {
            if !kept.contains(&i) {
                dropped_gold.push(token.label.ok_or_else(missing_label)?);
            }
        }
        prepared.push(prep);
    }
    Ok(WindowSet {
        docs: prepared,
        examples,
        dropped_gold,
    })
}

/// Trains `model` on windows over the kept tokens of `train_docs`, shuffled
/// globally each epoch. Per batch: forward in train mode, weighted
/// cross-entropy averaged over the batch, backward, global-norm clip,
/// momentum step. Every `eval_every` epochs the dev loss is computed; when
/// it fails to improve `patience` consecutive evaluations, training stops
/// and the parameters from the best evaluation are returned.
pub fn train(
    model: ModelParams,
    train_docs: &[Document],
    dev_docs: &[Document],
    extractor: &FeatureExtractor,
    sidecars: &SidecarTags,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with_hooks(
        model,
        train_docs,
        dev_docs,
        extractor,
        sidecars,
        config,
        TrainHooks::default(),
    )
}

/// [`train`] with an injection point for the observed dev loss.
pub fn train_with_hooks(
    mut model: ModelParams,
    train_docs: &[Document],
    dev_docs: &[Document],
    extractor: &FeatureExtractor,
    sidecars: &SidecarTags,
    config: &TrainConfig,
    mut hooks: TrainHooks,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if extractor.input_dim() != model.arch.input_dim {
        return Err(Error::Dimension {
            context: "train feature/input dims",
            expected: model.arch.input_dim,
            actual: extractor.input_dim(),
        });
    }

    let train_set = prepare_windows(extractor, train_docs, sidecars, "training")?;
    if train_set.examples.is_empty() {
        return Err(Error::InvalidInput(
            "training set has no classification targets".into(),
        ));
    }
    let dev_set = prepare_windows(extractor, dev_docs, sidecars, "development")?;
    if dev_set.examples.is_empty() {
        return Err(Error::InvalidInput(
            "development set has no classification targets".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocity = Gradients::zeros_like(&model);
    let mut batch_grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..train_set.examples.len()).collect();

    let mut history = TrainHistory::default();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best: Option<(usize, ModelParams)> = None;
    let mut eval_index = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;

        for batch in order.chunks(config.batch_size) {
            batch_grads.scale(0.0);
            for &idx in batch {
                let (d, i, label) = train_set.examples[idx];
                let x = extractor.assemble_window(&train_set.docs[d], i)?.values;
                let (trace, pred) = model.forward_train(&x, &mut rng)?;
                if pred.probabilities[label.class_index()] < PROB_CLAMP {
                    history.clamp_events += 1;
                }
                epoch_loss +=
                    weighted_cross_entropy(&pred.probabilities, label, config.class_weights);
                model.backward_into(
                    &trace,
                    &label.one_hot(),
                    config.weight_for(label),
                    &mut batch_grads,
                )?;
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            clip_global_norm(&mut batch_grads, config.clip_threshold);
            sgd_momentum_step(
                &mut model,
                &batch_grads,
                &mut velocity,
                config.learning_rate,
                config.momentum,
            );
        }

        if epoch % config.eval_every != 0 {
            continue;
        }

        let train_loss = epoch_loss / train_set.examples.len() as f64;
        let (computed_dev_loss, counts) = evaluate_dev(&model, extractor, &dev_set, config)?;
        eval_index += 1;
        let dev_loss = match &mut hooks.dev_loss {
            Some(hook) => hook(eval_index, computed_dev_loss),
            None => computed_dev_loss,
        };

        history.points.push(EvalPoint {
            epoch,
            train_loss,
            dev_loss,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
        });

        match stopper.observe(dev_loss) {
            StopDecision::Improved => {
                best = Some((epoch, model.clone()));
            }
            StopDecision::NoImprovement => {}
            StopDecision::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, best_model) = best.unwrap_or((0, model));
    history.best_epoch = best_epoch;
    Ok((best_model, history))
}

fn evaluate_dev(
    model: &ModelParams,
    extractor: &FeatureExtractor,
    dev_set: &WindowSet,
    config: &TrainConfig,
) -> Result<(f64, Counts)> {
    let mut loss = 0.0;
    let mut counts = Counts::default();
    for &(d, i, label) in &dev_set.examples {
        let x = extractor.assemble_window(&dev_set.docs[d], i)?.values;
        let pred = model.forward(&x)?;
        loss += weighted_cross_entropy(&pred.probabilities, label, config.class_weights);
        counts.add(pred.label, label);
    }
    // tokens dropped by filtering are auto-predicted non-toponym
    for &gold in &dev_set.dropped_gold {
        counts.add(Label::NonToponym, gold);
    }
    Ok((loss / dev_set.examples.len() as f64, counts))
}
