use std::str::FromStr;

use log::{debug, info};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_alpha, BlseModel, Gradients, LexiconBatch, SentimentBatch};
use crate::corpus::LabeledCorpus;
use crate::embeddings::EmbeddingSpace;
use crate::eval::evaluate;
use crate::lexicon::ProjectionLexicon;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    Glorot,
    Identity,
}

impl FromStr for Init {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "glorot" => Ok(Init::Glorot),
            "identity" => Ok(Init::Identity),
            other => Err(format!("unknown init `{other}` (expected glorot|identity)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(format!("unknown optimizer `{other}` (expected sgd|adam)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init: Init,
    pub optimizer: Optimizer,
    pub ablate_target_matrix: bool,
    /// Joint space size; defaults to the source dimension.
    pub joint_dim: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            epochs: 20,
            batch_size: 50,
            learning_rate: 1e-3,
            seed: 0,
            init: Init::Glorot,
            optimizer: Optimizer::Adam,
            ablate_target_matrix: false,
            joint_dim: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be a positive finite number".into()));
        }
        if self.joint_dim == Some(0) {
            return Err(Error::Config("joint dimension must be positive".into()));
        }
        Ok(())
    }
}

/// Full-data losses at one point of training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub joint: f64,
    pub sentiment: f64,
    pub projection: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Losses before the first update.
    pub initial: EpochLosses,
    /// One entry per epoch.
    pub joint_loss: Vec<f64>,
    pub sentiment_loss: Vec<f64>,
    pub projection_loss: Vec<f64>,
    /// Source dev macro F1 per epoch; empty when no dev data was given.
    pub dev_macro_f1: Vec<f64>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub train_documents: usize,
    pub lexicon_pairs: usize,
    pub lexicon_pairs_skipped: usize,
    pub config: TrainConfig,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.joint_loss.len()
    }

    pub fn best_dev_macro_f1(&self) -> Option<f64> {
        self.dev_macro_f1.get(self.best_epoch.checked_sub(1)?).copied()
    }
}

#[allow(clippy::large_enum_variant)]
enum Stepper {
    Sgd,
    Adam {
        step: i32,
        first: [Array2<f64>; 3],
        second: [Array2<f64>; 3],
    },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

impl Stepper {
    fn new(kind: Optimizer, model: &BlseModel) -> Self {
        match kind {
            Optimizer::Sgd => Stepper::Sgd,
            Optimizer::Adam => {
                let zeros = || {
                    [
                        Array2::zeros(model.source_projection.raw_dim()),
                        Array2::zeros(model.target_projection.raw_dim()),
                        Array2::zeros(model.classifier.raw_dim()),
                    ]
                };
                Stepper::Adam {
                    step: 0,
                    first: zeros(),
                    second: zeros(),
                }
            }
        }
    }

    fn apply(&mut self, model: &mut BlseModel, grads: Gradients, lr: f64) {
        let params = [
            &mut model.source_projection,
            &mut model.target_projection,
            &mut model.classifier,
        ];
        let grads = [grads.source_projection, grads.target_projection, grads.classifier];
        match self {
            Stepper::Sgd => {
                for (param, grad) in params.into_iter().zip(grads) {
                    param.scaled_add(-lr, &grad);
                }
            }
            Stepper::Adam { step, first, second } => {
                *step += 1;
                let correction1 = 1.0 - ADAM_BETA1.powi(*step);
                let correction2 = 1.0 - ADAM_BETA2.powi(*step);
                for (((param, grad), m), v) in params.into_iter().zip(grads).zip(first.iter_mut()).zip(second.iter_mut()) {
                    ndarray::Zip::from(param)
                        .and(&grad)
                        .and(m)
                        .and(v)
                        .for_each(|p, &g, m, v| {
                            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                            let m_hat = *m / correction1;
                            let v_hat = *v / correction2;
                            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                        });
                }
            }
        }
    }
}

fn full_losses(model: &BlseModel, sentiment: &SentimentBatch, lexicon: &LexiconBatch, alpha: f64) -> Result<EpochLosses> {
    let sentiment_loss = model.sentiment_loss(sentiment)?;
    let projection_loss = model.projection_loss(lexicon)?;
    Ok(EpochLosses {
        joint: alpha * sentiment_loss + (1.0 - alpha) * projection_loss,
        sentiment: sentiment_loss,
        projection: projection_loss,
    })
}

fn dev_macro_f1(model: &BlseModel, dev: &SentimentBatch) -> Result<f64> {
    let predictions: Vec<_> = dev
        .inputs
        .rows()
        .into_iter()
        .map(|a| {
            let z = model.project_source(a)?;
            model.predict(z.view()).map(super::decide)
        })
        .collect::<Result<_>>()?;
    Ok(evaluate(&predictions, &dev.labels)?.macro_f1)
}

/// Trains the joint model on labeled source sentences and the projection lexicon.
///
/// Each epoch shuffles the sentiment examples; every sentiment batch is
/// paired with the next equally sized batch of a once-shuffled lexicon,
/// cycling when it runs out. The parameters of the epoch with the best source
/// dev macro F1 are returned (the last epoch when `dev` has no labeled data).
/// `config.seed` drives initialization, shuffling and OOV vectors.
pub fn train(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    lexicon: &ProjectionLexicon,
    train: &LabeledCorpus,
    dev: &LabeledCorpus,
    config: &TrainConfig,
) -> Result<(BlseModel, TrainReport)> {
    config.validate()?;
    if config.ablate_target_matrix && source.dimension() != target.dimension() {
        return Err(Error::Config(format!(
            "ablating the target matrix needs equal dimensions, got {} and {}",
            source.dimension(),
            target.dimension()
        )));
    }
    let (train_batch, skipped) = SentimentBatch::from_corpus(source, train, config.seed);
    if train_batch.is_empty() {
        return Err(Error::Config("training split has no labeled, non-empty documents".into()));
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} unlabeled or empty training documents");
    }
    let (dev_batch, _) = SentimentBatch::from_corpus(source, dev, config.seed);

    let (lexicon, lexicon_skipped) = lexicon.filter_resolvable(source, target);
    if lexicon.is_empty() {
        return Err(Error::Config("projection lexicon is empty after out-of-vocabulary filtering".into()));
    }
    let lexicon_batch = LexiconBatch::gather(source, target, &lexicon)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let joint_dim = config.joint_dim.unwrap_or(source.dimension());
    let mut model = match config.init {
        Init::Glorot => BlseModel::glorot(&mut rng, source.dimension(), target.dimension(), joint_dim),
        Init::Identity => BlseModel::identity(&mut rng, source.dimension(), target.dimension(), joint_dim),
    };
    model.ablate_target_matrix = config.ablate_target_matrix;
    model.alpha = config.alpha;
    if config.ablate_target_matrix {
        model.target_projection.fill(0.0);
    }

    let mut lexicon_order: Vec<usize> = (0..lexicon_batch.len()).collect();
    lexicon_order.shuffle(&mut rng);
    let mut lexicon_cursor = 0;
    let mut example_order: Vec<usize> = (0..train_batch.len()).collect();
    let mut stepper = Stepper::new(config.optimizer, &model);

    let initial = full_losses(&model, &train_batch, &lexicon_batch, config.alpha)?;
    info!(
        "initial loss joint {:.6} sentiment {:.6} projection {:.6}",
        initial.joint, initial.sentiment, initial.projection
    );
    let mut report = TrainReport {
        initial,
        joint_loss: Vec::with_capacity(config.epochs),
        sentiment_loss: Vec::with_capacity(config.epochs),
        projection_loss: Vec::with_capacity(config.epochs),
        dev_macro_f1: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        train_documents: train_batch.len(),
        lexicon_pairs: lexicon.len(),
        lexicon_pairs_skipped: lexicon_skipped,
        config: config.clone(),
    };
    let mut best: Option<(f64, BlseModel)> = None;

    for epoch in 1..=config.epochs {
        example_order.shuffle(&mut rng);
        for (step, chunk) in example_order.chunks(config.batch_size).enumerate() {
            let sentiment = train_batch.select(chunk);
            let pair_rows: Vec<usize> = (0..chunk.len())
                .map(|_| {
                    let row = lexicon_order[lexicon_cursor];
                    lexicon_cursor = (lexicon_cursor + 1) % lexicon_order.len();
                    row
                })
                .collect();
            let pairs = lexicon_batch.select(&pair_rows);
            let (loss, grads) = model.loss_and_gradients(&sentiment, &pairs, config.alpha)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: step + 1 });
            }
            stepper.apply(&mut model, grads, config.learning_rate);
        }
        let losses = full_losses(&model, &train_batch, &lexicon_batch, config.alpha)?;
        if !losses.joint.is_finite() || !model.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step: 0 });
        }
        report.joint_loss.push(losses.joint);
        report.sentiment_loss.push(losses.sentiment);
        report.projection_loss.push(losses.projection);

        let score = if dev_batch.is_empty() {
            None
        } else {
            let f1 = dev_macro_f1(&model, &dev_batch)?;
            report.dev_macro_f1.push(f1);
            Some(f1)
        };
        debug!(
            "epoch {epoch}: joint {:.6} sentiment {:.6} projection {:.6} dev F1 {:?}",
            losses.joint, losses.sentiment, losses.projection, score
        );
        let improved = match (&best, score) {
            (None, _) => true,
            (Some((best_f1, _)), Some(f1)) => f1 > *best_f1,
            (Some(_), None) => true,
        };
        if improved {
            best = Some((score.unwrap_or(f64::NEG_INFINITY), model.clone()));
            report.best_epoch = epoch;
        }
    }

    let (_, model) = best.expect("at least one epoch ran");
    match report.best_dev_macro_f1() {
        Some(f1) => info!("best epoch {} of {} (dev macro F1 {f1:.4})", report.best_epoch, config.epochs),
        None => info!("no dev data; returning epoch {}", report.best_epoch),
    }
    Ok((model, report))
}

/// One grid point of a hyperparameter search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub alpha: f64,
    pub batch_size: usize,
    pub best_epoch: usize,
    pub dev_macro_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    pub model: BlseModel,
    pub report: TrainReport,
    pub trials: Vec<TrialResult>,
}

/// Grid search over `alphas × batch_sizes`, each trial early-stopped on dev
/// macro F1. The first trial with the highest dev score wins.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    lexicon: &ProjectionLexicon,
    train_corpus: &LabeledCorpus,
    dev: &LabeledCorpus,
    base: &TrainConfig,
    alphas: &[f64],
    batch_sizes: &[usize],
) -> Result<TuneResult> {
    if dev.labeled().next().is_none() {
        return Err(Error::Config("hyperparameter tuning requires labeled dev data".into()));
    }
    if alphas.is_empty() || batch_sizes.is_empty() {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    let mut trials = Vec::new();
    let mut best: Option<(f64, BlseModel, TrainReport)> = None;
    for &alpha in alphas {
        for &batch_size in batch_sizes {
            let config = TrainConfig {
                alpha,
                batch_size,
                ..base.clone()
            };
            let (model, report) = train(source, target, lexicon, train_corpus, dev, &config)?;
            let f1 = report.best_dev_macro_f1().unwrap_or(0.0);
            info!("trial alpha {alpha} batch {batch_size}: dev macro F1 {f1:.4}");
            trials.push(TrialResult {
                alpha,
                batch_size,
                best_epoch: report.best_epoch,
                dev_macro_f1: f1,
            });
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, model, report));
            }
        }
    }
    let (_, model, report) = best.expect("grid is non-empty");
    Ok(TuneResult { model, report, trials })
}
