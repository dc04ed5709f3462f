//! STS-style evaluation: datasets, scoring, and Pearson correlation.

use std::io::BufRead;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Settings;
use crate::embeddings::{remove_principal_components, EmbeddingTable, FrequencyTable};
use crate::error::{Error, Result};
use crate::similarity::{score, similarity_report, Method, SimilarityConfig, SimilarityReport, TreeKind};
use crate::structure::{build_binary_tree, ingest_dependency_tree, DependencyTree, StructureTree, WeightedSentence};
use crate::treebank::PairTree;
use crate::weighting::{SchemeKind, WeightScheme};

/// Lowercases, splits on whitespace, and strips punctuation from both ends
/// of every token. Tokens that are all punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StsRecord {
    pub gold: f64,
    pub sentence1: String,
    pub sentence2: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsDataset {
    pub records: Vec<StsRecord>,
    /// Lines that could not be parsed.
    pub malformed: usize,
}

/// Reads `gold<TAB>sentence1<TAB>sentence2` lines. Lines without exactly
/// three fields or with a non-finite gold score are skipped and counted.
pub fn read_sts_dataset<R: BufRead>(source: R) -> Result<StsDataset> {
    let mut records = Vec::new();
    let mut malformed = 0;
    for line in source.lines() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let gold = fields.first().and_then(|g| g.trim().parse::<f64>().ok());
        match (fields.len(), gold) {
            (3, Some(gold)) if gold.is_finite() => records.push(StsRecord {
                gold,
                sentence1: fields[1].to_string(),
                sentence2: fields[2].to_string(),
            }),
            _ => malformed += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(StsDataset { records, malformed })
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pearson needs two equal-length lists of at least 2 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::DegenerateScores);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Everything needed to turn raw sentences into scores.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub table: EmbeddingTable,
    pub frequencies: Option<FrequencyTable>,
    pub scheme: WeightScheme,
    pub config: SimilarityConfig,
}

impl Scorer {
    /// Builds a scorer from loaded tables: removes `settings.components`
    /// principal components and sets up the weight scheme.
    pub fn new(table: EmbeddingTable, frequencies: Option<FrequencyTable>, settings: &Settings) -> Result<Self> {
        settings.validate()?;
        let table = remove_principal_components(&table, settings.components)?.with_lowercase(settings.lowercase);
        let scheme = match settings.weight_scheme {
            SchemeKind::Uniform => WeightScheme::Uniform,
            SchemeKind::Sif => WeightScheme::sif(settings.sif_a)?,
            SchemeKind::Usif => {
                let freq = frequencies
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("usif weights need a frequency table".into()))?;
                WeightScheme::usif(freq, settings.usif_sentence_length)?
            }
        };
        if scheme.needs_frequencies() && frequencies.is_none() {
            return Err(Error::InvalidArgument("weight scheme needs a frequency table".into()));
        }
        Ok(Scorer {
            table,
            frequencies,
            scheme,
            config: settings.similarity.clone(),
        })
    }

    pub fn sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Result<WeightedSentence> {
        WeightedSentence::from_tokens(tokens, &self.table, &self.scheme, self.frequencies.as_ref())
    }

    /// Sentence plus its structure tree. Dependency parses are restricted to
    /// the in-vocabulary tokens.
    pub fn prepare(&self, text: &str, parse: Option<&DependencyTree>) -> Result<(WeightedSentence, StructureTree)> {
        match (self.config.tree_kind, parse) {
            (TreeKind::Dependency, Some(parse)) => {
                let sentence = self.sentence(&parse.tokens)?;
                let mut keep = vec![false; parse.len()];
                for &i in sentence.retained() {
                    keep[i] = true;
                }
                let restricted = parse.restrict(&keep)?;
                let tree = ingest_dependency_tree(&restricted.tokens, &restricted.heads)?;
                Ok((sentence, tree))
            }
            (TreeKind::Dependency, None) => Err(Error::InvalidArgument("dependency trees requested but none supplied".into())),
            (TreeKind::Binary, _) => {
                let sentence = self.sentence(&tokenize(text))?;
                let tree = build_binary_tree(sentence.len())?;
                Ok((sentence, tree))
            }
        }
    }

    pub fn score_pair(&self, text1: &str, text2: &str, parses: Option<&PairTree>, method: Method) -> Result<f64> {
        let (s1, t1) = self.prepare(text1, parses.map(|p| &p.sentence1))?;
        let (s2, t2) = self.prepare(text2, parses.map(|p| &p.sentence2))?;
        score(&s1, &s2, Some((&t1, &t2)), &self.config, method)
    }

    /// Like [`Scorer::score_pair`], keeping the per-level diagnostics.
    pub fn report_pair(&self, text1: &str, text2: &str, parses: Option<&PairTree>, method: Method) -> Result<SimilarityReport> {
        let (s1, t1) = self.prepare(text1, parses.map(|p| &p.sentence1))?;
        let (s2, t2) = self.prepare(text2, parses.map(|p| &p.sentence2))?;
        similarity_report(&s1, &s2, Some((&t1, &t2)), &self.config, method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub method: Method,
    /// One entry per dataset record; `None` for skipped records.
    pub predictions: Vec<Option<f64>>,
    pub pearson_x100: f64,
    pub scored: usize,
    pub skipped: usize,
}

/// Scores every record with `method` and correlates against the gold scores.
///
/// Records with no in-vocabulary token on either side are skipped. Scoring
/// runs on `workers` threads; results keep dataset order.
pub fn run_eval(
    dataset: &StsDataset,
    scorer: &Scorer,
    method: Method,
    parses: Option<&[PairTree]>,
    workers: usize,
) -> Result<EvalResult> {
    if scorer.config.tree_kind == TreeKind::Dependency && matches!(method, Method::Rot | Method::Rots) {
        match parses {
            Some(p) if p.len() == dataset.records.len() => {}
            Some(p) => {
                return Err(Error::InvalidArgument(format!(
                    "{} tree records for {} dataset rows",
                    p.len(),
                    dataset.records.len()
                )))
            }
            None => return Err(Error::InvalidArgument("dependency trees requested but none supplied".into())),
        }
    }
    let parses_for = |i: usize| match scorer.config.tree_kind {
        TreeKind::Dependency => parses.map(|p| &p[i]),
        TreeKind::Binary => None,
    };
    let score_one = |(i, record): (usize, &StsRecord)| -> Result<Option<f64>> {
        match scorer.score_pair(&record.sentence1, &record.sentence2, parses_for(i), method) {
            Ok(v) => Ok(Some(v)),
            Err(Error::EmptySentence) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let predictions: Vec<Option<f64>> = pool.install(|| {
        dataset
            .records
            .par_iter()
            .enumerate()
            .map(score_one)
            .collect::<Result<Vec<_>>>()
    })?;

    let (gold, predicted): (Vec<f64>, Vec<f64>) = dataset
        .records
        .iter()
        .zip(&predictions)
        .filter_map(|(r, p)| p.map(|p| (r.gold, p)))
        .unzip();
    if gold.is_empty() {
        return Err(Error::NoRecords);
    }
    let r = pearson(&predicted, &gold)?;
    Ok(EvalResult {
        method,
        scored: gold.len(),
        skipped: predictions.len() - gold.len(),
        predictions,
        pearson_x100: 100.0 * r,
    })
}
