//! The joint bi-domain projection model.
//!
//! Source sentences are averaged in the source space, projected by `M` into
//! the joint space and classified by the softmax layer `P`. Lexicon pairs tie
//! the spaces together: the squared distance between `S[s]·M` and `T[t]·M'`
//! is minimised alongside the sentiment cross-entropy, weighted by `alpha`.
//! Target sentences are projected by `M'` and classified by the same `P`.

mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::corpus::{Label, LabeledCorpus};
use crate::embeddings::EmbeddingSpace;
use crate::lexicon::ProjectionLexicon;
use crate::{Error, Result};

pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use train::{
    train, tune, EpochLosses, Init, Optimizer, TrainConfig, TrainReport, TrialResult, TuneResult,
};

/// Lower clamp on predicted probabilities inside the cross-entropy.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BlseModel {
    /// `M`, d × k.
    pub source_projection: Array2<f64>,
    /// `M'`, d' × k.
    pub target_projection: Array2<f64>,
    /// `P`, k × 2; column 0 scores the positive class.
    pub classifier: Array2<f64>,
    /// Project target vectors with `M` instead of `M'`.
    pub ablate_target_matrix: bool,
    /// Weight of the sentiment loss the model was trained with.
    pub alpha: f64,
}

/// Averaged sentence vectors with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SentimentBatch {
    pub inputs: Array2<f64>,
    pub labels: Vec<Label>,
}

/// Source and target vectors of lexicon pairs, row-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct LexiconBatch {
    pub source: Array2<f64>,
    pub target: Array2<f64>,
}

/// Gradients of the joint loss, shaped like the model's matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub source_projection: Array2<f64>,
    pub target_projection: Array2<f64>,
    pub classifier: Array2<f64>,
}

/// Per-document predictions; `None` marks documents that could not be classified.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Predictions {
    pub labels: Vec<Option<Label>>,
    pub positive_probability: Vec<Option<f64>>,
    pub skipped: usize,
}

impl Predictions {
    /// Pairs each prediction with the gold label, dropping unpredicted or unlabeled documents.
    pub fn aligned_with(&self, gold: &LabeledCorpus) -> (Vec<Label>, Vec<Label>) {
        self.labels
            .iter()
            .zip(&gold.documents)
            .filter_map(|(p, d)| Some((*p)?).zip(d.label))
            .unzip()
    }
}

impl SentimentBatch {
    /// Averages every labeled, non-empty document in `space`. Returns the
    /// batch and the number of documents skipped.
    pub fn from_corpus(space: &EmbeddingSpace, corpus: &LabeledCorpus, seed: u64) -> (Self, usize) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut skipped = 0;
        for doc in &corpus.documents {
            match (doc.label, space.average_sentence(&doc.tokens, seed)) {
                (Some(label), Ok(v)) => {
                    rows.push(v);
                    labels.push(label);
                }
                _ => skipped += 1,
            }
        }
        let mut inputs = Array2::zeros((rows.len(), space.dimension()));
        for (mut dst, src) in inputs.rows_mut().into_iter().zip(&rows) {
            dst.assign(src);
        }
        (SentimentBatch { inputs, labels }, skipped)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        SentimentBatch {
            inputs: self.inputs.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

impl LexiconBatch {
    /// Looks up every pair. All words must be in-vocabulary.
    pub fn gather(source: &EmbeddingSpace, target: &EmbeddingSpace, lexicon: &ProjectionLexicon) -> Result<Self> {
        let n = lexicon.len();
        let mut src = Array2::zeros((n, source.dimension()));
        let mut tgt = Array2::zeros((n, target.dimension()));
        for (i, (s, t)) in lexicon.pairs().iter().enumerate() {
            let s_row = source
                .row(s)
                .ok_or_else(|| Error::Config(format!("lexicon source word `{s}` is out of vocabulary")))?;
            let t_row = target
                .row(t)
                .ok_or_else(|| Error::Config(format!("lexicon target word `{t}` is out of vocabulary")))?;
            src.row_mut(i).assign(&s_row);
            tgt.row_mut(i).assign(&t_row);
        }
        Ok(LexiconBatch { source: src, target: tgt })
    }

    pub fn len(&self) -> usize {
        self.source.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.source.nrows() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        LexiconBatch {
            source: self.source.select(Axis(0), rows),
            target: self.target.select(Axis(0), rows),
        }
    }
}

/// Two-way softmax with max subtraction.
pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    let total = e0 + e1;
    [e0 / total, e1 / total]
}

/// Argmax over `[positive, negative]` probabilities; exact ties go to positive.
pub fn decide(probs: [f64; 2]) -> Label {
    if probs[0] >= probs[1] {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn target_value(label: Label) -> f64 {
    match label {
        Label::Positive => 1.0,
        Label::Negative => 0.0,
    }
}

/// Binary cross-entropy on the positive-class probability, clamped away from 0 and 1.
fn cross_entropy(p_positive: f64, label: Label) -> f64 {
    let p = p_positive.clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP);
    let y = target_value(label);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}

fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

fn truncated_identity(rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| if i == j { 1.0 } else { 0.0 })
}

impl BlseModel {
    /// Glorot-uniform initialization of all three matrices.
    pub fn glorot<R: Rng>(rng: &mut R, source_dim: usize, target_dim: usize, joint_dim: usize) -> Self {
        BlseModel {
            source_projection: uniform_matrix(rng, source_dim, joint_dim),
            target_projection: uniform_matrix(rng, target_dim, joint_dim),
            classifier: uniform_matrix(rng, joint_dim, 2),
            ablate_target_matrix: false,
            alpha: 0.5,
        }
    }

    /// Truncated identity projections and a Glorot-uniform classifier.
    pub fn identity<R: Rng>(rng: &mut R, source_dim: usize, target_dim: usize, joint_dim: usize) -> Self {
        BlseModel {
            source_projection: truncated_identity(source_dim, joint_dim),
            target_projection: truncated_identity(target_dim, joint_dim),
            classifier: uniform_matrix(rng, joint_dim, 2),
            ablate_target_matrix: false,
            alpha: 0.5,
        }
    }

    pub fn source_dim(&self) -> usize {
        self.source_projection.nrows()
    }

    pub fn target_dim(&self) -> usize {
        self.effective_target_projection().nrows()
    }

    pub fn joint_dim(&self) -> usize {
        self.source_projection.ncols()
    }

    pub fn label_order(&self) -> [Label; 2] {
        Label::ORDER
    }

    fn effective_target_projection(&self) -> &Array2<f64> {
        if self.ablate_target_matrix {
            &self.source_projection
        } else {
            &self.target_projection
        }
    }

    pub fn project_source(&self, a: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.source_dim(), a.len())?;
        Ok(a.dot(&self.source_projection))
    }

    /// Projects with `M'`, or with `M` when the target matrix is ablated.
    pub fn project_target(&self, a: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let projection = self.effective_target_projection();
        check_dim(projection.nrows(), a.len())?;
        Ok(a.dot(projection))
    }

    /// Softmax of `z·P` as `[p(positive), p(negative)]`.
    pub fn predict(&self, z: ArrayView1<'_, f64>) -> Result<[f64; 2]> {
        check_dim(self.joint_dim(), z.len())?;
        let logits = z.dot(&self.classifier);
        Ok(softmax([logits[0], logits[1]]))
    }

    fn source_projected(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.source_dim(), inputs.ncols())?;
        Ok(inputs.dot(&self.source_projection))
    }

    fn target_projected(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let projection = self.effective_target_projection();
        check_dim(projection.nrows(), inputs.ncols())?;
        Ok(inputs.dot(projection))
    }

    /// Mean over pairs of `‖S[s]·M − T[t]·M'‖²`, summed over joint components.
    pub fn projection_loss(&self, batch: &LexiconBatch) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let diff = self.source_projected(batch.source.view())? - self.target_projected(batch.target.view())?;
        Ok(diff.iter().map(|x| x * x).sum::<f64>() / batch.len() as f64)
    }

    /// Mean binary cross-entropy of the source-side predictions.
    pub fn sentiment_loss(&self, batch: &SentimentBatch) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let logits = self.source_projected(batch.inputs.view())?.dot(&self.classifier);
        let total: f64 = logits
            .rows()
            .into_iter()
            .zip(&batch.labels)
            .map(|(l, &label)| cross_entropy(softmax([l[0], l[1]])[0], label))
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// `alpha · sentiment + (1 − alpha) · projection`.
    pub fn joint_loss(&self, sentiment: &SentimentBatch, lexicon: &LexiconBatch, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        Ok(alpha * self.sentiment_loss(sentiment)? + (1.0 - alpha) * self.projection_loss(lexicon)?)
    }

    /// Analytic gradients of [`joint_loss`](Self::joint_loss) for all three matrices.
    pub fn gradients(&self, sentiment: &SentimentBatch, lexicon: &LexiconBatch, alpha: f64) -> Result<Gradients> {
        self.loss_and_gradients(sentiment, lexicon, alpha).map(|(_, g)| g)
    }

    pub(crate) fn loss_and_gradients(
        &self,
        sentiment: &SentimentBatch,
        lexicon: &LexiconBatch,
        alpha: f64,
    ) -> Result<(f64, Gradients)> {
        check_alpha(alpha)?;
        if sentiment.is_empty() || lexicon.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut grad_m = Array2::zeros(self.source_projection.raw_dim());
        let mut grad_m_prime = Array2::zeros(self.target_projection.raw_dim());

        // Sentiment term.
        let z = self.source_projected(sentiment.inputs.view())?;
        let logits = z.dot(&self.classifier);
        let batch = sentiment.len() as f64;
        let mut dlogits = Array2::zeros((sentiment.len(), 2));
        let mut sentiment_loss = 0.0;
        for ((row, mut d), &label) in logits.rows().into_iter().zip(dlogits.rows_mut()).zip(&sentiment.labels) {
            let probs = softmax([row[0], row[1]]);
            sentiment_loss += cross_entropy(probs[0], label);
            // Inside the clamp the loss is flat, so the gradient vanishes.
            if (PROBABILITY_CLAMP..=1.0 - PROBABILITY_CLAMP).contains(&probs[0]) {
                let y = target_value(label);
                d[0] = (probs[0] - y) * alpha / batch;
                d[1] = (probs[1] - (1.0 - y)) * alpha / batch;
            }
        }
        sentiment_loss /= batch;
        let grad_p = z.t().dot(&dlogits);
        let dz = dlogits.dot(&self.classifier.t());
        grad_m += &sentiment.inputs.t().dot(&dz);

        // Projection term.
        let source_z = self.source_projected(lexicon.source.view())?;
        let target_z = self.target_projected(lexicon.target.view())?;
        let diff = &source_z - &target_z;
        let pairs = lexicon.len() as f64;
        let projection_loss = diff.iter().map(|x| x * x).sum::<f64>() / pairs;
        let ddiff = &diff * (2.0 * (1.0 - alpha) / pairs);
        grad_m += &lexicon.source.t().dot(&ddiff);
        let target_grad = lexicon.target.t().dot(&ddiff);
        if self.ablate_target_matrix {
            grad_m -= &target_grad;
        } else {
            grad_m_prime -= &target_grad;
        }

        let loss = alpha * sentiment_loss + (1.0 - alpha) * projection_loss;
        Ok((
            loss,
            Gradients {
                source_projection: grad_m,
                target_projection: grad_m_prime,
                classifier: grad_p,
            },
        ))
    }

    fn classify_with(
        &self,
        space: &EmbeddingSpace,
        corpus: &LabeledCorpus,
        seed: u64,
        project: impl Fn(&Self, ArrayView1<'_, f64>) -> Result<Array1<f64>>,
    ) -> Result<Predictions> {
        let mut out = Predictions::default();
        for doc in &corpus.documents {
            match space.average_sentence(&doc.tokens, seed) {
                Ok(a) => {
                    let probs = self.predict(project(self, a.view())?.view())?;
                    out.labels.push(Some(decide(probs)));
                    out.positive_probability.push(Some(probs[0]));
                }
                Err(Error::EmptySentence) => {
                    out.labels.push(None);
                    out.positive_probability.push(None);
                    out.skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        if out.skipped > 0 {
            log::warn!("skipped {} empty documents in `{}`", out.skipped, corpus.domain_name);
        }
        Ok(out)
    }

    /// Classifies documents through the source space and `M`.
    pub fn classify_source(&self, source: &EmbeddingSpace, corpus: &LabeledCorpus, seed: u64) -> Result<Predictions> {
        self.classify_with(source, corpus, seed, Self::project_source)
    }

    /// Classifies target-domain documents through `T` and `M'` (or `M` when ablated).
    pub fn classify_target(&self, target: &EmbeddingSpace, corpus: &LabeledCorpus, seed: u64) -> Result<Predictions> {
        self.classify_with(target, corpus, seed, Self::project_target)
    }

    pub fn is_finite(&self) -> bool {
        self.source_projection.iter().all(|x| x.is_finite())
            && self.target_projection.iter().all(|x| x.is_finite())
            && self.classifier.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}
