//! Word weights, norm-modified weights, and the comprehensive coefficient.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::embeddings::FrequencyTable;
use crate::error::{Error, Result};
use crate::linalg::norm;

/// Default SIF constant.
pub const DEFAULT_SIF_A: f64 = 1e-3;

/// Default average sentence length used to estimate the uSIF constant.
pub const DEFAULT_USIF_SENTENCE_LENGTH: f64 = 11.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Uniform,
    Sif,
    Usif,
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SchemeKind::Uniform),
            "sif" => Ok(SchemeKind::Sif),
            "usif" => Ok(SchemeKind::Usif),
            other => Err(Error::InvalidArgument(format!("unknown weight scheme {other:?}"))),
        }
    }
}

/// Corpus statistics behind the uSIF weight `a / (a/2 + p)`.
///
/// With vocabulary size `V` and average sentence length `n`, a word is
/// "frequent" when its probability exceeds `1 - (1 - 1/V)^n`. `alpha` is the
/// fraction of frequent words, `Z = V/2`, and `a = (1 - alpha) / (alpha Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsifParams {
    pub vocab_size: usize,
    pub avg_sentence_length: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub a: f64,
}

impl UsifParams {
    pub fn estimate(freq: &FrequencyTable, avg_sentence_length: f64) -> Result<Self> {
        let v = freq.vocab_size();
        if v < 2 || freq.total() == 0 {
            return Err(Error::InvalidArgument(
                "uSIF needs a frequency table with at least two words".into(),
            ));
        }
        if !(avg_sentence_length > 0.0) {
            return Err(Error::InvalidArgument("average sentence length must be positive".into()));
        }
        let vf = v as f64;
        let threshold = 1.0 - (1.0 - 1.0 / vf).powf(avg_sentence_length);
        let total = freq.total() as f64;
        let frequent = freq.iter().filter(|&(_, c)| c as f64 / total > threshold).count();
        // alpha must stay inside (0, 1) for `a` to be positive and finite.
        let alpha = (frequent as f64 / vf).clamp(1.0 / vf, 1.0 - 1.0 / vf);
        let z = 0.5 * vf;
        let a = (1.0 - alpha) / (alpha * z);
        Ok(UsifParams {
            vocab_size: v,
            avg_sentence_length,
            threshold,
            alpha,
            a,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightScheme {
    Uniform,
    Sif { a: f64 },
    Usif(UsifParams),
}

impl WeightScheme {
    pub fn sif(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("sif_a must be positive, got {a}")));
        }
        Ok(WeightScheme::Sif { a })
    }

    pub fn usif(freq: &FrequencyTable, avg_sentence_length: f64) -> Result<Self> {
        UsifParams::estimate(freq, avg_sentence_length).map(WeightScheme::Usif)
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            WeightScheme::Uniform => SchemeKind::Uniform,
            WeightScheme::Sif { .. } => SchemeKind::Sif,
            WeightScheme::Usif(_) => SchemeKind::Usif,
        }
    }

    /// Whether weights depend on word probabilities.
    pub fn needs_frequencies(&self) -> bool {
        !matches!(self, WeightScheme::Uniform)
    }
}

/// Weight of a word with corpus probability `probability`.
pub fn word_weight(scheme: &WeightScheme, probability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(Error::ProbabilityOutOfRange(probability));
    }
    Ok(match scheme {
        WeightScheme::Uniform => 1.0,
        WeightScheme::Sif { a } => a / (a + probability),
        WeightScheme::Usif(params) => params.a / (0.5 * params.a + probability),
    })
}

/// Normalized weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedWeights {
    values: Vec<f64>,
}

impl ModifiedWeights {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// `a_i = w_i |v_i| / sum_k w_k |v_k|`.
///
/// Zero-norm vectors get zero mass; only an all-zero sentence is an error.
pub fn modified_weights(weights: &[f64], vectors: ArrayView2<'_, f64>) -> Result<ModifiedWeights> {
    check_lengths(weights, vectors)?;
    let scaled: Vec<f64> = weights
        .iter()
        .zip(vectors.rows())
        .map(|(w, v)| w * norm(v))
        .collect();
    normalize(scaled).ok_or(Error::DegenerateSentenceNorm)
}

/// `w_i / sum_k w_k`.
pub fn normalized_weights(weights: &[f64]) -> Result<ModifiedWeights> {
    normalize(weights.to_vec()).ok_or(Error::DegenerateSentenceNorm)
}

fn normalize(mut values: Vec<f64>) -> Option<ModifiedWeights> {
    let total: f64 = values.iter().sum();
    if values.is_empty() || !(total > 0.0) || !total.is_finite() {
        return None;
    }
    for x in &mut values {
        *x /= total;
    }
    Some(ModifiedWeights { values })
}

/// `K = (sum_k w_k |v_k|)^2 / |sum_k w_k v_k|^2`, always at least 1.
pub fn intra_sentence_factor(weights: &[f64], vectors: ArrayView2<'_, f64>) -> Result<f64> {
    check_lengths(weights, vectors)?;
    let mut mass = 0.0;
    let mut avg = vec![0.0; vectors.ncols()];
    for (w, v) in weights.iter().zip(vectors.rows()) {
        mass += w * norm(v);
        for (a, x) in avg.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    let denom: f64 = avg.iter().map(|x| x * x).sum();
    if !(denom > 0.0) {
        return Err(Error::DegenerateSentenceVector);
    }
    Ok(mass * mass / denom)
}

/// `C = sqrt(K1 K2)`.
pub fn comprehensive_coefficient(
    weights1: &[f64],
    vectors1: ArrayView2<'_, f64>,
    weights2: &[f64],
    vectors2: ArrayView2<'_, f64>,
) -> Result<f64> {
    let k1 = intra_sentence_factor(weights1, vectors1)?;
    let k2 = intra_sentence_factor(weights2, vectors2)?;
    Ok((k1 * k2).sqrt())
}

fn check_lengths(weights: &[f64], vectors: ArrayView2<'_, f64>) -> Result<()> {
    if weights.is_empty() || weights.len() != vectors.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} vectors",
            weights.len(),
            vectors.nrows()
        )));
    }
    Ok(())
}
