//! Word vectors and word frequencies.
//!
//! Vectors are read from the GloVe text convention (`token v1 v2 ... vd`, one
//! per line). Frequencies are `token count` lines. Both tables are immutable
//! once built and can be shared freely between worker threads.

use std::collections::HashMap;
use std::io::BufRead;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Dense word vectors keyed by token.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
    lowercase: bool,
    rejected_lines: Vec<usize>,
    duplicates: usize,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Later duplicates replace
    /// earlier ones.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut builder = Builder::default();
        for (word, vector) in pairs {
            let dim = *builder.dim.get_or_insert(vector.len());
            if vector.len() != dim || dim == 0 {
                return Err(Error::InvalidArgument(format!(
                    "vector of length {} in a table of dimension {}",
                    vector.len(),
                    dim
                )));
            }
            builder.insert(word.into(), &vector);
        }
        builder.finish()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Tokens in insertion order (first occurrence position).
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// The vocabulary as an `len × dim` matrix, rows in [`Self::words`] order.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.vectors
    }

    /// 1-based line numbers that were skipped while loading.
    pub fn rejected_lines(&self) -> &[usize] {
        &self.rejected_lines
    }

    /// Number of lines that redefined an already loaded token.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    /// Enables or disables lowercasing in [`Self::lookup`]. Default: enabled.
    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    /// Looks up a token. With lowercasing on, the lowercased form is tried
    /// first and the verbatim form second.
    pub fn lookup(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.position(token).map(|i| self.vectors.row(i))
    }

    fn position(&self, token: &str) -> Option<usize> {
        if self.lowercase {
            let lower = token.to_lowercase();
            if let Some(&i) = self.index.get(&lower) {
                return Some(i);
            }
        }
        self.index.get(token).copied()
    }

    fn with_vectors(&self, vectors: Array2<f64>) -> Self {
        EmbeddingTable {
            words: self.words.clone(),
            index: self.index.clone(),
            vectors,
            lowercase: self.lowercase,
            rejected_lines: self.rejected_lines.clone(),
            duplicates: self.duplicates,
        }
    }
}

#[derive(Default)]
struct Builder {
    dim: Option<usize>,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    rejected_lines: Vec<usize>,
    duplicates: usize,
}

impl Builder {
    fn insert(&mut self, word: String, vector: &[f64]) {
        let dim = vector.len();
        match self.index.get(&word) {
            Some(&row) => {
                self.duplicates += 1;
                self.data[row * dim..(row + 1) * dim].copy_from_slice(vector);
            }
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.data.extend_from_slice(vector);
            }
        }
    }

    fn finish(self) -> Result<EmbeddingTable> {
        let dim = match self.dim {
            Some(d) if !self.words.is_empty() => d,
            _ => return Err(Error::NoVectors),
        };
        let vectors = Array2::from_shape_vec((self.words.len(), dim), self.data)
            .expect("row-major buffer matches shape");
        Ok(EmbeddingTable {
            words: self.words,
            index: self.index,
            vectors,
            lowercase: true,
            rejected_lines: self.rejected_lines,
            duplicates: self.duplicates,
        })
    }
}

/// Reads vectors in GloVe text format.
///
/// The dimension is taken from `expected_dim` or, when absent, from the
/// first parseable line. Lines whose arity differs from the inferred
/// dimension, or that contain non-numeric components, are skipped and their
/// line numbers recorded in [`EmbeddingTable::rejected_lines`]. An arity
/// mismatch against an explicit `expected_dim` is an error.
pub fn load_embeddings<R: BufRead>(source: R, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    if expected_dim == Some(0) {
        return Err(Error::InvalidArgument("expected_dim must be positive".into()));
    }
    let mut builder = Builder {
        dim: expected_dim,
        ..Default::default()
    };
    let mut vector = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        vector.clear();
        let mut malformed = false;
        for field in fields {
            match field.parse::<f64>() {
                Ok(x) if x.is_finite() => vector.push(x),
                _ => {
                    malformed = true;
                    break;
                }
            }
        }
        if malformed || vector.is_empty() {
            builder.rejected_lines.push(line_no);
            continue;
        }
        match builder.dim {
            Some(d) if d != vector.len() => {
                if expected_dim.is_some() {
                    return Err(Error::DimensionMismatch {
                        line: line_no,
                        expected: d,
                        found: vector.len(),
                    });
                }
                builder.rejected_lines.push(line_no);
                continue;
            }
            Some(_) => {}
            None => builder.dim = Some(vector.len()),
        }
        builder.insert(word.to_string(), &vector);
    }
    builder.finish()
}

/// Principal directions fitted on the mean-centered vocabulary matrix.
#[derive(Debug, Clone)]
pub struct PrincipalComponents {
    mean: Vec<f64>,
    /// Unit-norm directions, largest variance first.
    directions: Vec<Vec<f64>>,
}

impl PrincipalComponents {
    /// Fits the top-`m` principal directions of `table`.
    pub fn fit(table: &EmbeddingTable, m: usize) -> Result<Self> {
        let (n, dim) = table.vectors.dim();
        if m >= n || m > dim {
            return Err(Error::InvalidArgument(format!(
                "cannot remove {m} components from {n} vectors of dimension {dim}"
            )));
        }
        let mean = table
            .vectors
            .mean_axis(Axis(0))
            .expect("table is nonempty")
            .to_vec();
        if m == 0 {
            return Ok(PrincipalComponents { mean, directions: Vec::new() });
        }

        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for row in table.vectors.rows() {
            for (c, (x, mu)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
                *c = x - mu;
            }
            for a in 0..dim {
                let ca = centered[a];
                for b in a..dim {
                    cov[(a, b)] += ca * centered[b];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                cov[(a, b)] = cov[(b, a)];
            }
        }

        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let directions = order[..m]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        Ok(PrincipalComponents { mean, directions })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Subtracts from `v` its projection onto each fitted direction.
    pub fn project_out(&self, v: &mut [f64]) {
        for dir in &self.directions {
            let dot: f64 = v.iter().zip(dir).map(|(x, c)| x * c).sum();
            for (x, c) in v.iter_mut().zip(dir) {
                *x -= dot * c;
            }
        }
    }

    /// Centers every vector of `table` and projects out the fitted directions.
    pub fn transform(&self, table: &EmbeddingTable) -> EmbeddingTable {
        let mut out = table.vectors.clone();
        for mut row in out.rows_mut() {
            let v = row.as_slice_mut().expect("standard layout");
            for (x, mu) in v.iter_mut().zip(&self.mean) {
                *x -= mu;
            }
            self.project_out(v);
        }
        table.with_vectors(out)
    }
}

/// Removes the top-`m` principal components of the vocabulary.
///
/// The vocabulary matrix is mean-centered, its leading `m` principal
/// directions are computed, and every centered vector has its projection onto
/// those directions removed. `m == 0` returns the input unchanged.
pub fn remove_principal_components(table: &EmbeddingTable, m: usize) -> Result<EmbeddingTable> {
    let pcs = PrincipalComponents::fit(table, m)?;
    if m == 0 {
        return Ok(table.clone());
    }
    Ok(pcs.transform(table))
}

/// Unigram counts.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut table = FrequencyTable::default();
        for (w, c) in counts {
            table.insert(w.into(), c);
        }
        table
    }

    fn insert(&mut self, word: String, count: u64) {
        if let Some(old) = self.counts.insert(word, count) {
            self.total -= old;
        }
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// `count(word) / total`; unseen words have probability 0.
    pub fn probability(&self, word: &str) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyFrequencyTable);
        }
        Ok(self.count(word) as f64 / self.total as f64)
    }

    /// Like [`Self::probability`] but tries the lowercased form first.
    pub fn probability_normalized(&self, word: &str) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::EmptyFrequencyTable);
        }
        let lower = word.to_lowercase();
        let count = self
            .counts
            .get(&lower)
            .or_else(|| self.counts.get(word))
            .copied()
            .unwrap_or(0);
        Ok(count as f64 / self.total as f64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }
}

/// Reads `token count` lines. Blank lines are ignored.
pub fn load_frequencies<R: BufRead>(source: R) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::default();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let (Some(count), None) = (fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: line_no,
                message: "expected `token count`".into(),
            });
        };
        let count: u64 = count.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid count {count:?}"),
        })?;
        table.insert(word.to_string(), count);
    }
    Ok(table)
}
