//! Seeded two-domain synthetic benchmark.
//!
//! Source word vectors are standard Gaussian; sentiment words are shifted by
//! `±separation · u` along a random unit direction `u`. The target space is
//! `T = S·Q + noise` with `Q` either the identity or a random orthogonal
//! matrix, so the target is solvable by a linear map but a classifier fitted
//! in source coordinates does not carry over.

use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, Document, Label, LabeledCorpus};
use crate::embeddings::EmbeddingSpace;
use crate::lexicon::ProjectionLexicon;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    Identity,
    #[default]
    RandomOrthogonal,
}

impl FromStr for Rotation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Rotation::Identity),
            "random_orthogonal" => Ok(Rotation::RandomOrthogonal),
            other => Err(format!("unknown rotation `{other}` (expected identity|random_orthogonal)")),
        }
    }
}

/// Which sentiment words the target test sentences draw from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSentiment {
    /// Same sentiment words as the source sentences.
    #[default]
    Shared,
    /// Source and target sentences use disjoint halves of the sentiment words.
    Disjoint,
}

impl FromStr for TargetSentiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "shared" => Ok(TargetSentiment::Shared),
            "disjoint" => Ok(TargetSentiment::Disjoint),
            other => Err(format!("unknown target sentiment `{other}` (expected shared|disjoint)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub dimension: usize,
    pub vocab_size: usize,
    /// Fraction of the vocabulary carrying sentiment, split evenly between classes.
    pub sentiment_fraction: f64,
    /// Distance of each class cluster mean from the origin along `u`.
    pub separation: f64,
    pub rotation: Rotation,
    /// Standard deviation of the Gaussian noise added to the target space.
    pub noise: f64,
    pub sentence_length: usize,
    pub train_size: usize,
    pub dev_size: usize,
    /// Size of both the source test split and the target test set.
    pub test_size: usize,
    pub target_sentiment: TargetSentiment,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dimension: 20,
            vocab_size: 300,
            sentiment_fraction: 0.2,
            separation: 2.0,
            rotation: Rotation::RandomOrthogonal,
            noise: 0.05,
            sentence_length: 8,
            train_size: 500,
            dev_size: 100,
            test_size: 200,
            target_sentiment: TargetSentiment::Shared,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dimension < 2 {
            return fail("dimension must be at least 2");
        }
        if self.noise < 0.0 || !self.noise.is_finite() {
            return fail("noise must be a finite non-negative number");
        }
        if !self.separation.is_finite() {
            return fail("separation must be finite");
        }
        if self.vocab_size == 0 || self.sentence_length == 0 || self.train_size == 0 || self.dev_size == 0 || self.test_size == 0 {
            return fail("sizes must be at least 1");
        }
        let pools = match self.target_sentiment {
            TargetSentiment::Shared => 2,
            TargetSentiment::Disjoint => 4,
        };
        let sentiment = self.sentiment_word_count();
        if sentiment < pools {
            return fail("sentiment fraction leaves too few sentiment words for every pool");
        }
        if sentiment >= self.vocab_size {
            return fail("sentiment fraction leaves no neutral filler words");
        }
        Ok(())
    }

    fn sentiment_word_count(&self) -> usize {
        let raw = (self.vocab_size as f64 * self.sentiment_fraction).round();
        if raw.is_finite() && raw > 0.0 {
            raw as usize
        } else {
            0
        }
    }

    /// Sentiment tokens per sentence; the rest are neutral filler.
    pub fn sentiment_tokens_per_sentence(&self) -> usize {
        (self.sentence_length / 2).max(1)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub source_embeddings: EmbeddingSpace,
    pub target_embeddings: EmbeddingSpace,
    pub source: CorpusSplit,
    pub target_test: LabeledCorpus,
    pub lexicon: ProjectionLexicon,
    /// The matrix `Q` mapping source coordinates to target coordinates.
    pub rotation: Array2<f64>,
    /// Unit sentiment direction `u` in source coordinates.
    pub direction: Array1<f64>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Orthogonal factor of the QR decomposition of a Gaussian matrix, with
/// column signs fixed so `R` has a positive diagonal.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> Array2<f64> {
    let g = gaussian_matrix(rng, dim, dim);
    let m = DMatrix::from_fn(dim, dim, |i, j| g[[i, j]]);
    let qr = m.qr();
    let q = qr.q();
    let r = qr.r();
    Array2::from_shape_fn((dim, dim), |(i, j)| {
        let s = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
        q[(i, j)] * s
    })
}

struct WordPools {
    positive: Vec<usize>,
    negative: Vec<usize>,
    neutral: Vec<usize>,
}

impl WordPools {
    fn for_label(&self, label: Label) -> &[usize] {
        match label {
            Label::Positive => &self.positive,
            Label::Negative => &self.negative,
        }
    }
}

fn sentences(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    words: &[String],
    pools: &WordPools,
    count: usize,
    name: &str,
) -> LabeledCorpus {
    let n_sentiment = spec.sentiment_tokens_per_sentence().min(spec.sentence_length);
    let mut docs: Vec<Document> = (0..count)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
            let mut ids: Vec<usize> = (0..spec.sentence_length)
                .map(|j| {
                    let pool = if j < n_sentiment { pools.for_label(label) } else { &pools.neutral };
                    *pool.choose(rng).expect("pools are non-empty")
                })
                .collect();
            ids.shuffle(rng);
            Document::new(ids.into_iter().map(|id| words[id].clone()).collect(), Some(label))
        })
        .collect();
    docs.shuffle(rng);
    LabeledCorpus::new(name, docs)
}

/// Generates embeddings, corpora and an identity lexicon, deterministically in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dimension;
    let v = spec.vocab_size;
    let words: Vec<String> = (0..v).map(|i| format!("w{i:04}")).collect();

    let n_sentiment = spec.sentiment_word_count();
    let half = n_sentiment / 2;
    let positive: Vec<usize> = (0..half).collect();
    let negative: Vec<usize> = (half..n_sentiment).collect();
    let neutral: Vec<usize> = (n_sentiment..v).collect();

    let mut direction: Array1<f64> = Array1::from_shape_simple_fn(d, || StandardNormal.sample(&mut rng));
    let norm = direction.dot(&direction).sqrt();
    direction /= norm;

    let mut source = gaussian_matrix(&mut rng, v, d);
    for &i in &positive {
        source.row_mut(i).scaled_add(spec.separation, &direction);
    }
    for &i in &negative {
        source.row_mut(i).scaled_add(-spec.separation, &direction);
    }

    let rotation = match spec.rotation {
        Rotation::Identity => Array2::eye(d),
        Rotation::RandomOrthogonal => random_orthogonal(&mut rng, d),
    };
    let mut target = source.dot(&rotation);
    if spec.noise > 0.0 {
        target.scaled_add(spec.noise, &gaussian_matrix(&mut rng, v, d));
    }

    let (source_pools, target_pools) = match spec.target_sentiment {
        TargetSentiment::Shared => {
            let pools = || WordPools {
                positive: positive.clone(),
                negative: negative.clone(),
                neutral: neutral.clone(),
            };
            (pools(), pools())
        }
        TargetSentiment::Disjoint => {
            let split = |ids: &[usize]| {
                let mid = ids.len() / 2;
                (ids[..mid].to_vec(), ids[mid..].to_vec())
            };
            let (pos_src, pos_tgt) = split(&positive);
            let (neg_src, neg_tgt) = split(&negative);
            (
                WordPools {
                    positive: pos_src,
                    negative: neg_src,
                    neutral: neutral.clone(),
                },
                WordPools {
                    positive: pos_tgt,
                    negative: neg_tgt,
                    neutral: neutral.clone(),
                },
            )
        }
    };

    let train = sentences(&mut rng, spec, &words, &source_pools, spec.train_size, "source");
    let dev = sentences(&mut rng, spec, &words, &source_pools, spec.dev_size, "source");
    let test = sentences(&mut rng, spec, &words, &source_pools, spec.test_size, "source");
    let target_test = sentences(&mut rng, spec, &words, &target_pools, spec.test_size, "target");

    Ok(SyntheticData {
        source_embeddings: EmbeddingSpace::new(words.clone(), source)?,
        target_embeddings: EmbeddingSpace::new(words.clone(), target)?,
        source: CorpusSplit { train, dev, test },
        target_test,
        lexicon: ProjectionLexicon::identity(words),
        rotation,
        direction,
    })
}
