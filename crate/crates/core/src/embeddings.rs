//! Mono-domain embedding spaces in the plain-text vector format.
//!
//! The file starts with a `<rows> <dims>` header followed by one
//! `word x1 ... xd` line per row. Out-of-vocabulary words receive a vector
//! drawn uniformly from `[-0.25, 0.25]^d` by a generator keyed on the pair
//! `(seed, word)`, so every caller sees the same vector for the same word.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::RwLock;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Half-width of the uniform interval OOV vectors are drawn from.
pub const OOV_RANGE: f64 = 0.25;

pub struct EmbeddingSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
    oov_cache: RwLock<HashMap<(u64, String), Array1<f64>>>,
}

impl Clone for EmbeddingSpace {
    fn clone(&self) -> Self {
        EmbeddingSpace {
            words: self.words.clone(),
            index: self.index.clone(),
            matrix: self.matrix.clone(),
            oov_cache: RwLock::new(self.oov_cache.read().unwrap().clone()),
        }
    }
}

impl std::fmt::Debug for EmbeddingSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingSpace")
            .field("rows", &self.matrix.nrows())
            .field("dimension", &self.matrix.ncols())
            .finish()
    }
}

impl EmbeddingSpace {
    /// Builds a space from words and a matching row matrix.
    ///
    /// Duplicate words keep the position of their first occurrence and the
    /// values of their last one.
    pub fn new(words: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if words.len() != matrix.nrows() {
            return Err(Error::Dimension {
                expected: words.len(),
                actual: matrix.nrows(),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("embedding matrix contains non-finite values".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        let mut unique_words = Vec::with_capacity(words.len());
        let mut rows: Vec<usize> = Vec::with_capacity(words.len());
        for (row, word) in words.into_iter().enumerate() {
            match index.get(&word) {
                Some(&slot) => {
                    warn!("duplicate embedding for `{word}`; keeping the last occurrence");
                    rows[slot] = row;
                }
                None => {
                    index.insert(word.clone(), unique_words.len());
                    unique_words.push(word);
                    rows.push(row);
                }
            }
        }
        let matrix = if rows.len() == matrix.nrows() {
            matrix
        } else {
            matrix.select(ndarray::Axis(0), &rows)
        };
        Ok(EmbeddingSpace {
            words: unique_words,
            index,
            matrix,
            oov_cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Row of an in-vocabulary word.
    pub fn row(&self, word: &str) -> Option<ArrayView1<'_, f64>> {
        self.index.get(word).map(|&i| self.matrix.row(i))
    }

    /// Vector for `word`: its row if known, otherwise the cached OOV vector for `(seed, word)`.
    pub fn lookup(&self, word: &str, seed: u64) -> Array1<f64> {
        if let Some(row) = self.row(word) {
            return row.to_owned();
        }
        let key = (seed, word.to_string());
        if let Some(v) = self.oov_cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let mut cache = self.oov_cache.write().unwrap();
        cache
            .entry(key)
            .or_insert_with(|| oov_vector(word, seed, self.dimension()))
            .clone()
    }

    /// Number of cached OOV vectors.
    pub fn oov_cached(&self) -> usize {
        self.oov_cache.read().unwrap().len()
    }

    /// Resolves every OOV token up front so later lookups only read the cache.
    pub fn warm_oov<'a>(&self, tokens: impl IntoIterator<Item = &'a str>, seed: u64) {
        for token in tokens {
            if !self.contains(token) {
                self.lookup(token, seed);
            }
        }
    }

    /// Element-wise mean of the token vectors.
    pub fn average_sentence<S: AsRef<str>>(&self, tokens: &[S], seed: u64) -> Result<Array1<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptySentence);
        }
        let mut sum = Array1::zeros(self.dimension());
        for token in tokens {
            let token = token.as_ref();
            match self.row(token) {
                Some(row) => sum += &row,
                None => sum += &self.lookup(token, seed),
            }
        }
        Ok(sum / tokens.len() as f64)
    }

    /// Serializes in the plain-text vector format with shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.vocab_size(), self.dimension()).unwrap();
        for (word, row) in self.words.iter().zip(self.matrix.rows()) {
            out.push_str(word);
            for x in row {
                write!(out, " {x:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Deterministic uniform vector in `[-OOV_RANGE, OOV_RANGE]^dim` for `(seed, word)`.
pub fn oov_vector(word: &str, seed: u64, dim: usize) -> Array1<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(word.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    Array1::from_iter((0..dim).map(|_| rng.random_range(-OOV_RANGE..=OOV_RANGE)))
}

/// Reads the plain-text vector format. `origin` names the source in errors.
pub fn read_text_embeddings<R: Read>(reader: R, origin: &str) -> Result<EmbeddingSpace> {
    let mut lines = BufReader::new(reader).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::parse(origin, 1, e.to_string()))?,
        None => return Err(Error::parse(origin, 1, "missing `<rows> <dims>` header")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, dims) = match fields.as_slice() {
        [r, d] => match (r.parse::<usize>(), d.parse::<usize>()) {
            (Ok(r), Ok(d)) if d > 0 => (r, d),
            _ => return Err(Error::parse(origin, 1, format!("bad header `{header}`"))),
        },
        _ => return Err(Error::parse(origin, 1, format!("bad header `{header}`"))),
    };

    let mut words = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dims);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-blank line has a field");
        let before = data.len();
        for part in parts {
            let x: f64 = part
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("non-numeric component `{part}`")))?;
            if !x.is_finite() {
                return Err(Error::parse(origin, line_no, format!("non-finite component `{part}`")));
            }
            data.push(x);
        }
        let got = data.len() - before;
        if got != dims {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {dims} components for `{word}`, found {got}"),
            ));
        }
        words.push(word.to_string());
    }
    if words.len() != rows {
        return Err(Error::parse(
            origin,
            1,
            format!("header declares {rows} rows but the body has {}", words.len()),
        ));
    }
    let matrix = Array2::from_shape_vec((rows, dims), data).expect("row lengths checked");
    EmbeddingSpace::new(words, matrix)
}

pub fn load_text_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_text_embeddings(file, &path.display().to_string())
}
