//! Non-adaptive baseline: bag-of-n-gram features and a hinge-loss linear
//! classifier trained on the source domain only.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_ngrams, Label, LabeledCorpus};
use crate::eval::{evaluate, EvalReport};
use crate::{Error, Result};

/// Regularization grid searched on dev accuracy.
pub const DEFAULT_C_GRID: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Presence,
    Count,
    Tfidf,
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "presence" => Ok(Weighting::Presence),
            "count" => Ok(Weighting::Count),
            "tfidf" => Ok(Weighting::Tfidf),
            other => Err(format!("unknown weighting `{other}` (expected presence|count|tfidf)")),
        }
    }
}

/// Sparse feature vector as sorted `(index, value)` pairs.
pub type SparseVector = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowVectorizer {
    features: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub max_n: usize,
    pub min_df: usize,
    pub weighting: Weighting,
    /// Inverse document frequencies, populated for tf-idf weighting.
    idf: Vec<f64>,
}

impl BowVectorizer {
    /// Collects every n-gram with document frequency ≥ `min_df` in `corpus`.
    pub fn fit(corpus: &LabeledCorpus, max_n: usize, min_df: usize, weighting: Weighting) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyVocabulary("cannot fit a vectorizer on an empty corpus".into()));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in &corpus.documents {
            for feature in extract_ngrams(&doc.tokens, max_n).into_keys() {
                *df.entry(feature).or_insert(0) += 1;
            }
        }
        let kept: Vec<(String, usize)> = df.into_iter().filter(|(_, n)| *n >= min_df.max(1)).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary(format!("no feature reaches min_df = {min_df}")));
        }
        let n_docs = corpus.len() as f64;
        let idf = match weighting {
            Weighting::Tfidf => kept.iter().map(|(_, d)| ((1.0 + n_docs) / (1.0 + *d as f64)).ln() + 1.0).collect(),
            _ => Vec::new(),
        };
        let features: Vec<String> = kept.into_iter().map(|(f, _)| f).collect();
        let mut vectorizer = BowVectorizer {
            features,
            index: HashMap::new(),
            max_n,
            min_df,
            weighting,
            idf,
        };
        vectorizer.rebuild_index();
        Ok(vectorizer)
    }

    fn rebuild_index(&mut self) {
        self.index = self.features.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature vector of a token list; unseen n-grams are ignored.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut out: SparseVector = extract_ngrams(tokens, self.max_n)
            .into_iter()
            .filter_map(|(f, count)| {
                let &i = self.index.get(&f)?;
                let value = match self.weighting {
                    Weighting::Presence => 1.0,
                    Weighting::Count => count as f64,
                    Weighting::Tfidf => count as f64 * self.idf[i],
                };
                Some((i, value))
            })
            .collect();
        out.sort_by_key(|(i, _)| *i);
        if self.weighting == Weighting::Tfidf {
            let norm = out.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|(_, v)| *v /= norm);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

impl LinearModel {
    pub fn score(&self, x: &[(usize, f64)]) -> f64 {
        x.iter().map(|&(i, v)| self.weights[i] * v).sum::<f64>() + self.bias
    }

    /// `sign(w·x + b)`, with zero mapped to positive.
    pub fn predict(&self, x: &[(usize, f64)]) -> Label {
        if self.score(x) >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Options for the subgradient solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub epochs: usize,
    pub seed: u64,
    pub initial_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epochs: 30,
            seed: 0,
            initial_step: 0.1,
        }
    }
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Positive => 1.0,
        Label::Negative => -1.0,
    }
}

/// Minimises `λ/2‖w‖² + mean(hinge)` with `λ = 1/(C·n)` by seeded SGD.
///
/// The weight vector is stored as `scale · v` so each step touches only the
/// example's non-zero features.
pub fn fit_linear(
    xs: &[SparseVector],
    ys: &[Label],
    dim: usize,
    c: f64,
    options: &SolverOptions,
) -> Result<LinearModel> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    if !(ys.contains(&Label::Positive) && ys.contains(&Label::Negative)) {
        return Err(Error::SingleClass);
    }
    let lambda = 1.0 / (c * xs.len() as f64);
    let eta0 = options.initial_step.min(0.5 / lambda);
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut t = 0.0;
    for _ in 0..options.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = eta0 / (1.0 + eta0 * lambda * t);
            t += 1.0;
            let y = sign(ys[i]);
            let margin = y * (scale * xs[i].iter().map(|&(j, x)| v[j] * x).sum::<f64>() + bias);
            scale *= 1.0 - eta * lambda;
            if margin < 1.0 {
                for &(j, x) in &xs[i] {
                    v[j] += eta * y * x / scale;
                }
                bias += eta * y;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    let weights: Vec<f64> = v.into_iter().map(|w| w * scale).collect();
    if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: options.epochs, step: 0 });
    }
    Ok(LinearModel { weights, bias, c })
}

/// Vectorizer, selected classifier and the dev accuracy of every grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoAdModel {
    pub vectorizer: BowVectorizer,
    pub model: LinearModel,
    pub grid: Vec<(f64, f64)>,
}

impl NoAdModel {
    pub fn predict_corpus(&self, corpus: &LabeledCorpus) -> Vec<Label> {
        corpus
            .documents
            .iter()
            .map(|d| self.model.predict(&self.vectorizer.transform(&d.tokens)))
            .collect()
    }

    /// Metrics over the labeled documents of `corpus`.
    pub fn evaluate(&self, corpus: &LabeledCorpus) -> Result<EvalReport> {
        let (pred, gold): (Vec<_>, Vec<_>) = corpus
            .labeled()
            .map(|(d, l)| (self.model.predict(&self.vectorizer.transform(&d.tokens)), l))
            .unzip();
        evaluate(&pred, &gold)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finite model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: NoAdModel = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if model.model.weights.len() != model.vectorizer.len() {
            return Err(Error::Shape {
                field: "weights".into(),
                message: format!(
                    "has {} entries but the vectorizer has {} features",
                    model.model.weights.len(),
                    model.vectorizer.len()
                ),
            });
        }
        model.vectorizer.rebuild_index();
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn labeled_vectors(vectorizer: &BowVectorizer, corpus: &LabeledCorpus) -> (Vec<SparseVector>, Vec<Label>) {
    corpus
        .labeled()
        .map(|(d, l)| (vectorizer.transform(&d.tokens), l))
        .unzip()
}

fn accuracy(model: &LinearModel, xs: &[SparseVector], ys: &[Label]) -> f64 {
    let correct = xs.iter().zip(ys).filter(|(x, y)| model.predict(x) == **y).count();
    correct as f64 / ys.len().max(1) as f64
}

/// Fits the vectorizer on `train`, trains one classifier per `C` and keeps
/// the first with the best dev accuracy (train accuracy when dev is empty).
pub fn fit_noad(
    train: &LabeledCorpus,
    dev: &LabeledCorpus,
    c_grid: &[f64],
    max_n: usize,
    min_df: usize,
    weighting: Weighting,
    options: &SolverOptions,
) -> Result<NoAdModel> {
    let (pos, neg) = train.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if c_grid.is_empty() {
        return Err(Error::Config("C grid is empty".into()));
    }
    let vectorizer = BowVectorizer::fit(train, max_n, min_df, weighting)?;
    let (train_x, train_y) = labeled_vectors(&vectorizer, train);
    let (dev_x, dev_y) = labeled_vectors(&vectorizer, dev);
    let (select_x, select_y) = if dev_y.is_empty() {
        (&train_x, &train_y)
    } else {
        (&dev_x, &dev_y)
    };
    let mut grid = Vec::with_capacity(c_grid.len());
    let mut best: Option<(f64, LinearModel)> = None;
    for &c in c_grid {
        let model = fit_linear(&train_x, &train_y, vectorizer.len(), c, options)?;
        let acc = accuracy(&model, select_x, select_y);
        grid.push((c, acc));
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, model));
        }
    }
    let (_, model) = best.expect("grid is non-empty");
    Ok(NoAdModel { vectorizer, model, grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;

    fn corpus(docs: &[(&str, Label)]) -> LabeledCorpus {
        LabeledCorpus::new("toy", docs.iter().map(|(t, l)| Document::from_text(t, Some(*l))).collect())
    }

    fn toy() -> LabeledCorpus {
        use Label::*;
        corpus(&[
            ("good book great plot", Positive),
            ("great read good", Positive),
            ("good story", Positive),
            ("great fun", Positive),
            ("bad book awful plot", Negative),
            ("awful read bad", Negative),
            ("bad story", Negative),
            ("awful mess", Negative),
        ])
    }

    #[test]
    fn vectorizer_features() {
        let c = corpus(&[("good book", Label::Positive)]);
        let v = BowVectorizer::fit(&c, 2, 1, Weighting::Presence).unwrap();
        assert_eq!(v.features(), &["book", "good", "good_book"]);

        let c = corpus(&[("good book", Label::Positive), ("good film", Label::Negative)]);
        let v = BowVectorizer::fit(&c, 2, 2, Weighting::Presence).unwrap();
        assert_eq!(v.features(), &["good"]);
        assert!(v.transform(&["unseen".to_string(), "words".to_string()]).is_empty());

        let single = corpus(&[("lonely", Label::Positive)]);
        assert!(BowVectorizer::fit(&single, 2, 2, Weighting::Presence).is_err());
    }

    #[test]
    fn separable_toy_is_fit_and_deterministic() {
        let train = toy();
        let opts = SolverOptions::default();
        let a = fit_noad(&train, &train, &DEFAULT_C_GRID, 2, 1, Weighting::Presence, &opts).unwrap();
        assert_eq!(a.evaluate(&train).unwrap().accuracy, 1.0);
        let b = fit_noad(&train, &train, &DEFAULT_C_GRID, 2, 1, Weighting::Presence, &opts).unwrap();
        assert_eq!(a, b);
        let back = NoAdModel::from_json(&a.to_json()).unwrap();
        assert_eq!(back.predict_corpus(&train), a.predict_corpus(&train));
    }

    #[test]
    fn single_class_is_rejected() {
        let c = corpus(&[("good", Label::Positive), ("great", Label::Positive)]);
        assert!(matches!(
            fit_noad(&c, &c, &[1.0], 1, 1, Weighting::Presence, &SolverOptions::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn training_accuracy_monotone_in_c() {
        let train = toy();
        let v = BowVectorizer::fit(&train, 2, 1, Weighting::Presence).unwrap();
        let (x, y) = labeled_vectors(&v, &train);
        let mut last = 0.0;
        for c in DEFAULT_C_GRID {
            let m = fit_linear(&x, &y, v.len(), c, &SolverOptions::default()).unwrap();
            let acc = accuracy(&m, &x, &y);
            assert!(acc >= last, "C = {c}: {acc} < {last}");
            last = acc;
        }
    }

    #[test]
    fn dev_selection_matches_exhaustive_grid() {
        use Label::*;
        let train = corpus(&[
            ("good fine plot", Positive),
            ("great good cast", Positive),
            ("fine nice story", Positive),
            ("good nice", Positive),
            ("great plot twist", Positive),
            ("bad dull plot", Negative),
            ("awful bad cast", Negative),
            ("dull poor story", Negative),
            ("bad poor", Negative),
            ("awful plot hole", Negative),
            ("nice but dull", Positive),
            ("fine but bad", Negative),
        ]);
        let dev = corpus(&[
            ("good story", Positive),
            ("nice cast", Positive),
            ("dull cast", Negative),
            ("poor plot", Negative),
            ("fine twist", Positive),
            ("bad hole", Negative),
            ("great but poor", Negative),
            ("awful but nice", Positive),
        ]);
        let opts = SolverOptions { seed: 5, ..SolverOptions::default() };
        let chosen = fit_noad(&train, &dev, &DEFAULT_C_GRID, 2, 1, Weighting::Presence, &opts).unwrap();

        // Grid oracle: fit every C independently and score on dev.
        let v = BowVectorizer::fit(&train, 2, 1, Weighting::Presence).unwrap();
        let (tx, ty) = labeled_vectors(&v, &train);
        let (dx, dy) = labeled_vectors(&v, &dev);
        let mut best_c = f64::NAN;
        let mut best_acc = -1.0;
        for c in DEFAULT_C_GRID {
            let m = fit_linear(&tx, &ty, v.len(), c, &opts).unwrap();
            let acc = dx.iter().zip(&dy).filter(|(x, y)| m.predict(x) == **y).count() as f64 / dy.len() as f64;
            if acc > best_acc {
                best_acc = acc;
                best_c = c;
            }
        }
        assert_eq!(chosen.model.c, best_c);
    }

    proptest! {
        #[test]
        fn positive_rescaling_preserves_labels(scale in 0.01f64..100.0, seed in 0u64..50) {
            let train = toy();
            let opts = SolverOptions { seed, epochs: 3, ..SolverOptions::default() };
            let m = fit_noad(&train, &train, &[1.0], 2, 1, Weighting::Presence, &opts).unwrap();
            let mut scaled = m.clone();
            scaled.model.weights.iter_mut().for_each(|w| *w *= scale);
            scaled.model.bias *= scale;
            for d in &train.documents {
                let x = m.vectorizer.transform(&d.tokens);
                let s = m.model.score(&x);
                prop_assume!(s.abs() > 1e-9);
                prop_assert_eq!(m.model.predict(&x), scaled.model.predict(&x));
            }
        }
    }
}
