//! Projection lexicons: word pairs that supervise the mapping between the
//! source and target embedding spaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_ngrams, rank_by_count, LabeledCorpus};
use crate::embeddings::EmbeddingSpace;
use crate::{Error, Result};

/// Lexicon size used for the frequency strategy by default.
pub const DEFAULT_FREQUENCY_SIZE: usize = 20_000;
/// Minimum per-domain count for pivot candidates by default.
pub const DEFAULT_MIN_COUNT: usize = 10;
/// Number of pivots kept by default.
pub const DEFAULT_TOP_M: usize = 500;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProjectionLexicon {
    pairs: Vec<(String, String)>,
}

impl ProjectionLexicon {
    /// Builds a lexicon, dropping repeated pairs while keeping first-seen order.
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut seen = BTreeSet::new();
        let pairs = pairs
            .into_iter()
            .filter(|p| seen.insert(p.clone()))
            .collect();
        ProjectionLexicon { pairs }
    }

    pub fn identity<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        Self::new(words.into_iter().map(|w| {
            let w = w.into();
            (w.clone(), w)
        }))
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.pairs.iter().all(|(s, t)| s == t)
    }

    /// Keeps the pairs whose source word is in `source` and target word in
    /// `target`; returns the filtered lexicon and the number of dropped pairs.
    pub fn filter_resolvable(&self, source: &EmbeddingSpace, target: &EmbeddingSpace) -> (Self, usize) {
        let kept: Vec<_> = self
            .pairs
            .iter()
            .filter(|(s, t)| source.contains(s) && target.contains(t))
            .cloned()
            .collect();
        let dropped = self.pairs.len() - kept.len();
        if dropped > 0 {
            warn!("skipped {dropped} lexicon pairs with out-of-vocabulary words");
        }
        (ProjectionLexicon { pairs: kept }, dropped)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.pairs {
            writeln!(out, "{s}\t{t}").unwrap();
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [s, t] if !s.is_empty() && !t.is_empty() => pairs.push((s.to_string(), t.to_string())),
                _ => {
                    return Err(Error::parse(
                        origin,
                        idx + 1,
                        format!("expected `source\\ttarget`, found {} field(s)", fields.len()),
                    ))
                }
            }
        }
        Ok(Self::new(pairs))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Identity pairs for the `k` most frequent unigrams of the concatenated corpora.
pub fn build_frequency_identity(corpora: &[&LabeledCorpus], k: usize) -> ProjectionLexicon {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for corpus in corpora {
        for (word, c) in corpus.unigram_counts() {
            *counts.entry(word).or_insert(0) += c;
        }
    }
    ProjectionLexicon::identity(rank_by_count(counts, k))
}

/// Identity pairs for the lexicon words that occur in every corpus, in lexicon order.
pub fn build_sentiment_subset<S: AsRef<str>>(
    lexicon_words: &[S],
    corpora: &[&LabeledCorpus],
) -> Result<ProjectionLexicon> {
    let vocabularies: Vec<BTreeSet<&str>> = corpora.iter().map(|c| crate::corpus::unigram_set(c)).collect();
    let words = lexicon_words
        .iter()
        .map(AsRef::as_ref)
        .filter(|w| vocabularies.iter().all(|v| v.contains(w)));
    let lexicon = ProjectionLexicon::identity(words);
    if lexicon.is_empty() {
        return Err(Error::NoLexiconOverlap);
    }
    Ok(lexicon)
}

/// Variable a pivot's presence is correlated with.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MiTarget {
    /// Source sentiment label over labeled source documents.
    #[default]
    Label,
    /// Domain membership over the pooled unlabeled documents.
    Domain,
}

impl FromStr for MiTarget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "label" => Ok(MiTarget::Label),
            "domain" => Ok(MiTarget::Domain),
            other => Err(format!("unknown MI target `{other}` (expected label|domain)")),
        }
    }
}

/// 2x2 contingency table of feature presence against a binary variable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PresenceTable {
    /// Documents where the feature is present, per class.
    pub present: [usize; 2],
    /// Documents where the feature is absent, per class.
    pub absent: [usize; 2],
}

impl PresenceTable {
    pub fn total(&self) -> usize {
        self.present[0] + self.present[1] + self.absent[0] + self.absent[1]
    }

    /// Mutual information in bits between presence and class.
    ///
    /// The four cell terms are summed in sorted order, so tables that are
    /// permutations of each other (class swap, presence swap) score identically.
    pub fn mutual_information(&self) -> f64 {
        let n = self.total() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let cells = [self.present, self.absent];
        let feature = [
            (self.present[0] + self.present[1]) as f64,
            (self.absent[0] + self.absent[1]) as f64,
        ];
        let class = [
            (self.present[0] + self.absent[0]) as f64,
            (self.present[1] + self.absent[1]) as f64,
        ];
        let mut terms = Vec::with_capacity(4);
        for (f, row) in cells.iter().enumerate() {
            for (c, &count) in row.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let joint = count as f64;
                terms.push(joint / n * (joint * n / (feature[f] * class[c])).log2());
            }
        }
        terms.sort_by(f64::total_cmp);
        terms.iter().sum::<f64>().max(0.0)
    }
}

/// A scored pivot candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotScore {
    pub feature: String,
    pub score: f64,
}

fn presence_sets<'a>(corpus: &'a LabeledCorpus) -> impl Iterator<Item = (BTreeSet<String>, Option<crate::corpus::Label>)> + 'a {
    corpus
        .documents
        .iter()
        .map(|d| (extract_ngrams(&d.tokens, 2).into_keys().collect(), d.label))
}

fn ngram_totals(corpus: &LabeledCorpus) -> BTreeMap<String, usize> {
    let mut totals = BTreeMap::new();
    for doc in &corpus.documents {
        for (f, c) in extract_ngrams(&doc.tokens, 2) {
            *totals.entry(f).or_insert(0) += c;
        }
    }
    totals
}

/// Scores every unigram/bigram that occurs at least `min_count` times in
/// both unlabeled corpora, sorted by descending MI then lexicographically.
pub fn score_mi_pivots(
    source_labeled: &LabeledCorpus,
    source_unlabeled: &LabeledCorpus,
    target_unlabeled: &LabeledCorpus,
    min_count: usize,
    target: MiTarget,
) -> Result<Vec<PivotScore>> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let source_counts = ngram_totals(source_unlabeled);
    let target_counts = ngram_totals(target_unlabeled);
    let candidates: BTreeSet<&String> = source_counts
        .iter()
        .filter(|(f, &c)| c >= min_count && target_counts.get(*f).is_some_and(|&t| t >= min_count))
        .map(|(f, _)| f)
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoPivotCandidates);
    }

    // (presence set, class index) per observation
    let observations: Vec<(BTreeSet<String>, usize)> = match target {
        MiTarget::Label => {
            let (pos, neg) = source_labeled.class_counts();
            if pos == 0 || neg == 0 {
                return Err(Error::SingleClass);
            }
            presence_sets(source_labeled)
                .filter_map(|(set, label)| label.map(|l| (set, l.index())))
                .collect()
        }
        MiTarget::Domain => presence_sets(source_unlabeled)
            .map(|(set, _)| (set, 0))
            .chain(presence_sets(target_unlabeled).map(|(set, _)| (set, 1)))
            .collect(),
    };
    let mut class_sizes = [0usize; 2];
    for (_, class) in &observations {
        class_sizes[*class] += 1;
    }

    let mut scores: Vec<PivotScore> = candidates
        .into_iter()
        .map(|feature| {
            let mut present = [0usize; 2];
            for (set, class) in &observations {
                if set.contains(feature) {
                    present[*class] += 1;
                }
            }
            let table = PresenceTable {
                present,
                absent: [class_sizes[0] - present[0], class_sizes[1] - present[1]],
            };
            PivotScore {
                feature: feature.clone(),
                score: table.mutual_information(),
            }
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.feature.cmp(&b.feature)));
    Ok(scores)
}

/// Identity pairs for the `top_m` highest-MI pivot features.
pub fn build_mi_pivots(
    source_labeled: &LabeledCorpus,
    source_unlabeled: &LabeledCorpus,
    target_unlabeled: &LabeledCorpus,
    min_count: usize,
    top_m: usize,
    target: MiTarget,
) -> Result<ProjectionLexicon> {
    let scores = score_mi_pivots(source_labeled, source_unlabeled, target_unlabeled, min_count, target)?;
    Ok(ProjectionLexicon::identity(
        scores.into_iter().take(top_m).map(|s| s.feature),
    ))
}
