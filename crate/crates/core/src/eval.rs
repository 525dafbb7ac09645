//! Classification metrics and corpus divergence.

use std::fmt::Write as _;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_term_distribution, shared_top_k_vocab, Label, LabeledCorpus, TermDistribution};
use crate::{Error, Result};

/// Default size of the shared vocabulary for divergence analysis.
pub const DEFAULT_SHARED_VOCAB: usize = 10_000;

/// Confusion counts with positive as the reference class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_negative: usize,
    pub false_positive: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_negative + self.false_positive + self.true_negative
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Misclassified documents of this class over its gold size.
    pub error_rate: f64,
    pub errors: usize,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub positive: ClassMetrics,
    pub negative: ClassMetrics,
    pub macro_f1: f64,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize, what: &str) -> f64 {
    if den == 0 {
        warn!("{what} is undefined (zero denominator); reporting 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(hit: usize, missed: usize, false_alarm: usize, label: Label) -> ClassMetrics {
    let f1_den = 2 * hit + false_alarm + missed;
    ClassMetrics {
        precision: ratio(hit, hit + false_alarm, &format!("precision of `{label}`")),
        recall: ratio(hit, hit + missed, &format!("recall of `{label}`")),
        f1: ratio(2 * hit, f1_den, &format!("F1 of `{label}`")),
        error_rate: ratio(missed, hit + missed, &format!("error rate of `{label}`")),
        errors: missed,
        support: hit + missed,
    }
}

/// Confusion-derived metrics of `predictions` against `gold`.
pub fn evaluate(predictions: &[Label], gold: &[Label]) -> Result<EvalReport> {
    if predictions.len() != gold.len() {
        return Err(Error::LengthMismatch(predictions.len(), gold.len()));
    }
    if gold.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut c = Confusion::default();
    for (p, g) in predictions.iter().zip(gold) {
        match (g, p) {
            (Label::Positive, Label::Positive) => c.true_positive += 1,
            (Label::Positive, Label::Negative) => c.false_negative += 1,
            (Label::Negative, Label::Positive) => c.false_positive += 1,
            (Label::Negative, Label::Negative) => c.true_negative += 1,
        }
    }
    let positive = class_metrics(c.true_positive, c.false_negative, c.false_positive, Label::Positive);
    let negative = class_metrics(c.true_negative, c.false_positive, c.false_negative, Label::Negative);
    Ok(EvalReport {
        accuracy: (c.true_positive + c.true_negative) as f64 / c.total() as f64,
        macro_f1: (positive.f1 + negative.f1) / 2.0,
        positive,
        negative,
        confusion: c,
    })
}

impl EvalReport {
    /// Aligned-column plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>10} {:>8}", "class", "precision", "recall", "f1", "error_rate", "support").unwrap();
        for (name, m) in [("pos", &self.positive), ("neg", &self.negative)] {
            writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>10.4} {:>8}",
                name, m.precision, m.recall, m.f1, m.error_rate, m.support
            )
            .unwrap();
        }
        writeln!(out, "{:<10} {:>9.4}", "accuracy", self.accuracy).unwrap();
        writeln!(out, "{:<10} {:>9.4}", "macro_f1", self.macro_f1).unwrap();
        let c = &self.confusion;
        writeln!(
            out,
            "confusion  tp={} fn={} fp={} tn={}",
            c.true_positive, c.false_negative, c.false_positive, c.true_negative
        )
        .unwrap();
        out
    }

    /// Named scalar metrics in a fixed order, used for long-format exports.
    pub fn metric_rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("accuracy", self.accuracy),
            ("macro_f1", self.macro_f1),
            ("precision_pos", self.positive.precision),
            ("recall_pos", self.positive.recall),
            ("f1_pos", self.positive.f1),
            ("error_rate_pos", self.positive.error_rate),
            ("precision_neg", self.negative.precision),
            ("recall_neg", self.negative.recall),
            ("f1_neg", self.negative.f1),
            ("error_rate_neg", self.negative.error_rate),
        ]
    }
}

fn check_vocab(a: &TermDistribution, b: &TermDistribution) -> Result<()> {
    if a.vocabulary != b.vocabulary || a.probabilities.len() != b.probabilities.len() {
        return Err(Error::VocabularyMismatch);
    }
    Ok(())
}

fn kl_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(&ai, _)| ai > 0.0)
        .map(|(&ai, &bi)| ai * (ai / bi).log2())
        .sum()
}

/// Kullback-Leibler divergence in bits; terms with `a_i = 0` contribute nothing.
pub fn kl_divergence(a: &TermDistribution, b: &TermDistribution) -> Result<f64> {
    check_vocab(a, b)?;
    Ok(kl_raw(&a.probabilities, &b.probabilities))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceVariant {
    /// `½[KL(A‖B) + KL(B‖A)]`.
    SymmetrizedKl,
    /// `½[KL(A‖M) + KL(B‖M)]` with `M = (A + B)/2`; bounded by 1 bit.
    #[default]
    JensenShannon,
}

impl FromStr for DivergenceVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "symmetrized_kl" => Ok(DivergenceVariant::SymmetrizedKl),
            "jensen_shannon" => Ok(DivergenceVariant::JensenShannon),
            other => Err(format!("unknown variant `{other}` (expected symmetrized_kl|jensen_shannon)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMode {
    #[default]
    Divergence,
    /// `1 − divergence`; only meaningful for the bounded Jensen-Shannon variant.
    Similarity,
}

impl FromStr for DivergenceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "divergence" => Ok(DivergenceMode::Divergence),
            "similarity" => Ok(DivergenceMode::Similarity),
            other => Err(format!("unknown mode `{other}` (expected divergence|similarity)")),
        }
    }
}

/// Symmetric divergence between two distributions over the same vocabulary.
pub fn js_divergence(a: &TermDistribution, b: &TermDistribution, variant: DivergenceVariant) -> Result<f64> {
    check_vocab(a, b)?;
    let (pa, pb) = (&a.probabilities, &b.probabilities);
    let value = match variant {
        DivergenceVariant::SymmetrizedKl => 0.5 * (kl_raw(pa, pb) + kl_raw(pb, pa)),
        DivergenceVariant::JensenShannon => {
            let mixture: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| (x + y) / 2.0).collect();
            (0.5 * (kl_raw(pa, &mixture) + kl_raw(pb, &mixture))).min(1.0)
        }
    };
    // Rounding can push identical-distribution results a hair below zero.
    Ok(value.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceMatrix {
    pub domain_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub variant: DivergenceVariant,
    pub mode: DivergenceMode,
    pub vocabulary_size: usize,
}

/// Pairwise divergences over the top-`k` unigrams shared by every corpus.
pub fn divergence_matrix(
    corpora: &[&LabeledCorpus],
    k: usize,
    smoothing: f64,
    variant: DivergenceVariant,
    mode: DivergenceMode,
) -> Result<DivergenceMatrix> {
    if corpora.len() < 2 {
        return Err(Error::Config("divergence needs at least two corpora".into()));
    }
    if mode == DivergenceMode::Similarity && variant != DivergenceVariant::JensenShannon {
        return Err(Error::Config("similarity mode requires the jensen_shannon variant".into()));
    }
    let vocabulary = shared_top_k_vocab(corpora, k);
    if vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary("the corpora share no unigrams".into()));
    }
    let distributions: Vec<TermDistribution> = corpora
        .iter()
        .map(|c| build_term_distribution(c, &vocabulary, smoothing))
        .collect::<Result<_>>()?;
    let n = corpora.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let d = if i == j {
                0.0
            } else {
                js_divergence(&distributions[i], &distributions[j], variant)?
            };
            let v = match mode {
                DivergenceMode::Divergence => d,
                DivergenceMode::Similarity => 1.0 - d,
            };
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(DivergenceMatrix {
        domain_names: corpora.iter().map(|c| c.domain_name.clone()).collect(),
        values,
        variant,
        mode,
        vocabulary_size: vocabulary.len(),
    })
}

impl DivergenceMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("domain");
        for name in &self.domain_names {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.domain_names.iter().zip(&self.values) {
            out.push_str(name);
            for v in row {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.domain_names.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$}", "");
        for name in &self.domain_names {
            write!(out, " {name:>width$}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.domain_names.iter().zip(&self.values) {
            write!(out, "{name:<width$}").unwrap();
            for v in row {
                write!(out, " {v:>width$.3}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}
