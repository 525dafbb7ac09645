//! Corpus ingestion: tokenization, the tab-separated corpus format, n-gram
//! features and smoothed term distributions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default additive smoothing for term distributions.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// Binary sentiment label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
}

impl Label {
    /// Canonical order used by every model: positive first.
    pub const ORDER: [Label; 2] = [Label::Positive, Label::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "pos",
            Label::Negative => "neg",
        }
    }

    /// Column of this label in a two-way probability vector.
    pub fn index(self) -> usize {
        match self {
            Label::Positive => 0,
            Label::Negative => 1,
        }
    }

    pub fn from_index(index: usize) -> Label {
        if index == 0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pos" => Ok(Label::Positive),
            "neg" => Ok(Label::Negative),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// Parses the label column of a corpus line. `unlabeled` maps to `None`.
pub fn parse_label_token(token: &str) -> std::result::Result<Option<Label>, String> {
    match token {
        "unlabeled" => Ok(None),
        other => other.parse().map(Some),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub tokens: Vec<String>,
    pub label: Option<Label>,
}

impl Document {
    pub fn new(tokens: Vec<String>, label: Option<Label>) -> Self {
        Document { tokens, label }
    }

    /// Tokenizes `text` and wraps it.
    pub fn from_text(text: &str, label: Option<Label>) -> Self {
        Document {
            tokens: tokenize(text),
            label,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub domain_name: String,
    pub documents: Vec<Document>,
}

impl LabeledCorpus {
    pub fn new(domain_name: impl Into<String>, documents: Vec<Document>) -> Self {
        LabeledCorpus {
            domain_name: domain_name.into(),
            documents,
        }
    }

    /// The fixed label order, positive then negative.
    pub fn label_set(&self) -> (Label, Label) {
        (Label::Positive, Label::Negative)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (&Document, Label)> {
        self.documents
            .iter()
            .filter_map(|doc| doc.label.map(|label| (doc, label)))
    }

    /// Number of positive and negative documents.
    pub fn class_counts(&self) -> (usize, usize) {
        self.labeled().fold((0, 0), |(p, n), (_, label)| match label {
            Label::Positive => (p + 1, n),
            Label::Negative => (p, n + 1),
        })
    }

    pub fn unigram_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for doc in &self.documents {
            for token in &doc.tokens {
                *counts.entry(token.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Writes the corpus in the tab-separated corpus format.
    pub fn write<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for doc in &self.documents {
            let label = doc.label.map_or("unlabeled", Label::as_str);
            writeln!(writer, "{}\t{}", label, doc.tokens.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: LabeledCorpus,
    pub dev: LabeledCorpus,
    pub test: LabeledCorpus,
}

/// Probability distribution over an explicit ordered vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDistribution {
    pub vocabulary: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl TermDistribution {
    /// Builds a distribution from raw probabilities, checking the simplex constraints.
    pub fn new(vocabulary: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        if vocabulary.len() != probabilities.len() {
            return Err(Error::Dimension {
                expected: vocabulary.len(),
                actual: probabilities.len(),
            });
        }
        if probabilities.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Config("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("probabilities sum to {total}, not 1")));
        }
        Ok(TermDistribution {
            vocabulary,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Lowercases `text` and splits it into word tokens.
///
/// A token is a run of alphanumeric characters, optionally joined by single
/// internal apostrophes or hyphens (`don't`, `state-of-the-art`). Every other
/// character, including `_`, separates tokens and is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_joiner(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|next| next.is_alphanumeric())
        {
            current.push(if c == '\u{2019}' { '\'' } else { c });
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Reads a corpus from any reader. `origin` names the source in errors.
pub fn read_corpus<R: Read>(reader: R, origin: &str, domain_name: &str) -> Result<LabeledCorpus> {
    let mut documents = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, line_no, "expected `<label>\\t<text>`"))?;
        let label = parse_label_token(label).map_err(|msg| Error::parse(origin, line_no, msg))?;
        documents.push(Document::from_text(text, label));
    }
    Ok(LabeledCorpus::new(domain_name, documents))
}

/// Loads a `<label>\t<text>` corpus file where label is `pos`, `neg` or `unlabeled`.
pub fn load_corpus(path: impl AsRef<Path>, domain_name: &str) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(file, &path.display().to_string(), domain_name)
}

/// Counts unigram and (for `max_n >= 2`) bigram features. Bigrams are joined with `_`.
pub fn extract_ngrams(tokens: &[String], max_n: usize) -> BTreeMap<String, usize> {
    let mut features = BTreeMap::new();
    for token in tokens {
        *features.entry(token.clone()).or_insert(0) += 1;
    }
    if max_n >= 2 {
        for pair in tokens.windows(2) {
            *features.entry(format!("{}_{}", pair[0], pair[1])).or_insert(0) += 1;
        }
    }
    features
}

/// Up to `k` unigrams present in every corpus, ranked by their total count
/// across all corpora. Ties are broken lexicographically.
pub fn shared_top_k_vocab(corpora: &[&LabeledCorpus], k: usize) -> Vec<String> {
    let Some((first, rest)) = corpora.split_first() else {
        return Vec::new();
    };
    let mut totals = first.unigram_counts();
    for corpus in rest {
        let counts = corpus.unigram_counts();
        totals.retain(|word, total| match counts.get(word) {
            Some(&c) => {
                *total += c;
                true
            }
            None => false,
        });
    }
    rank_by_count(totals, k)
}

/// Sorts `(word, count)` by descending count then ascending word and keeps `k`.
pub(crate) fn rank_by_count(counts: BTreeMap<String, usize>, k: usize) -> Vec<String> {
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(w, _)| w).collect()
}

/// Smoothed unigram distribution of `corpus` restricted to `vocabulary`:
/// `p(w) = (count(w) + smoothing) / sum(count + smoothing)`.
pub fn build_term_distribution(
    corpus: &LabeledCorpus,
    vocabulary: &[String],
    smoothing: f64,
) -> Result<TermDistribution> {
    if vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary("term distribution needs a vocabulary".into()));
    }
    if smoothing.is_nan() || smoothing < 0.0 {
        return Err(Error::Config("smoothing must be non-negative".into()));
    }
    let counts = corpus.unigram_counts();
    let weights: Vec<f64> = vocabulary
        .iter()
        .map(|w| counts.get(w).copied().unwrap_or(0) as f64 + smoothing)
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyVocabulary(format!(
            "corpus `{}` has no occurrences of the vocabulary and smoothing is zero",
            corpus.domain_name
        )));
    }
    Ok(TermDistribution {
        vocabulary: vocabulary.to_vec(),
        probabilities: weights.into_iter().map(|w| w / total).collect(),
    })
}

/// Set of distinct unigrams across a corpus.
pub fn unigram_set(corpus: &LabeledCorpus) -> BTreeSet<&str> {
    corpus
        .documents
        .iter()
        .flat_map(|d| d.tokens.iter().map(String::as_str))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn corpus(name: &str, texts: &[&str]) -> LabeledCorpus {
        LabeledCorpus::new(
            name,
            texts.iter().map(|t| Document::from_text(t, None)).collect(),
        )
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Good, GREAT book!"), toks(&["good", "great", "book"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("don't stop"), toks(&["don't", "stop"]));
    }

    #[test]
    fn tokenize_golden_file() {
        let golden = include_str!("../tests/data/tokenize_golden.tsv");
        for line in golden.lines().filter(|l| !l.is_empty()) {
            let (input, expected) = line.split_once('\t').unwrap();
            let expected: Vec<String> = expected.split_whitespace().map(String::from).collect();
            assert_eq!(tokenize(input), expected, "input {input:?}");
        }
    }

    #[test]
    fn read_corpus_formats() {
        let c = read_corpus("pos\tgreat phone\nneg\tbroke fast".as_bytes(), "mem", "d").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.class_counts(), (1, 1));

        let c = read_corpus("unlabeled\tsome text\n\n".as_bytes(), "mem", "d").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.documents[0].label, None);

        match read_corpus("maybe\tok".as_bytes(), "mem", "d") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match read_corpus("pos\tfine\nno tab here".as_bytes(), "mem", "d") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ngram_examples() {
        let f = extract_ngrams(&toks(&["not", "good"]), 2);
        assert_eq!(f.keys().cloned().collect::<Vec<_>>(), toks(&["good", "not", "not_good"]));

        let f = extract_ngrams(&toks(&["a"]), 2);
        assert_eq!(f.len(), 1);

        let f = extract_ngrams(&toks(&["a", "b", "a"]), 1);
        assert_eq!(f["a"], 2);
        assert_eq!(f["b"], 1);
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn shared_vocab_examples() {
        let a = corpus("a", &["a b"]);
        let b = corpus("b", &["b c"]);
        assert_eq!(shared_top_k_vocab(&[&a, &b], 10), toks(&["b"]));

        let x = corpus("x", &["good good bad fine"]);
        let y = x.clone();
        assert_eq!(shared_top_k_vocab(&[&x, &y], 1), toks(&["good"]));
    }

    #[test]
    fn shared_vocab_matches_brute_force() {
        let corpora = [
            corpus("a", &["the cat sat on the mat", "a dog and the cat"]),
            corpus("b", &["the dog sat", "cat cat cat on a mat"]),
            corpus("c", &["on the mat the dog", "a cat sat"]),
        ];
        let refs: Vec<&LabeledCorpus> = corpora.iter().collect();

        // Exhaustive recount: every word in any corpus, checked one by one.
        let mut all: Vec<String> = Vec::new();
        for c in &corpora {
            for d in &c.documents {
                all.extend(d.tokens.iter().cloned());
            }
        }
        all.sort();
        all.dedup();
        let mut scored: Vec<(String, usize)> = Vec::new();
        for w in &all {
            let per: Vec<usize> = corpora
                .iter()
                .map(|c| {
                    c.documents
                        .iter()
                        .map(|d| d.tokens.iter().filter(|t| *t == w).count())
                        .sum()
                })
                .collect();
            if per.iter().all(|&n| n > 0) {
                scored.push((w.clone(), per.iter().sum()));
            }
        }
        scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let expected: Vec<String> = scored.into_iter().take(4).map(|x| x.0).collect();
        assert_eq!(expected, toks(&["cat", "the", "a", "dog"]));
        assert_eq!(shared_top_k_vocab(&refs, 4), expected);
    }

    #[test]
    fn term_distribution_examples() {
        let c = corpus("c", &["a a a b"]);
        let d = build_term_distribution(&c, &toks(&["a", "b"]), 0.0).unwrap();
        assert_eq!(d.probabilities, vec![0.75, 0.25]);

        let d = build_term_distribution(&c, &toks(&["x", "y"]), 1e-6).unwrap();
        assert_eq!(d.probabilities, vec![0.5, 0.5]);

        let c = corpus("c", &["a b c c"]);
        let d = build_term_distribution(&c, &toks(&["a", "b", "c"]), 1e-6).unwrap();
        for (p, e) in d.probabilities.iter().zip([0.25, 0.25, 0.5]) {
            assert!((p - e).abs() < 1e-6);
        }

        assert!(build_term_distribution(&c, &[], 1e-6).is_err());
        assert!(build_term_distribution(&c, &toks(&["zz"]), 0.0).is_err());
    }
}
