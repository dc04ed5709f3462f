//! Run settings, readable from a `key = value` file.
//!
//! Recognized keys:
//!
//! | key | default |
//! |-----|---------|
//! | `method` | `rots` |
//! | `weight_scheme` | `usif` |
//! | `sif_a` | `0.001` |
//! | `usif_sentence_length` | `11` |
//! | `components` | `5` |
//! | `lowercase` | `true` |
//! | `tree` | `binary` |
//! | `depth` | `5` |
//! | `gamma` | `10` |
//! | `sinkhorn_tol` | `1e-9` |
//! | `sinkhorn_max_iter` | `10000` |
//! | `prior_floor_lambda` | `1e-6` |
//! | `level_cap` | `64` |
//! | `workers` | `1` |
//!
//! Blank lines and lines starting with `#` are ignored.

use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::similarity::{Method, SimilarityConfig, TreeKind};
use crate::weighting::{SchemeKind, DEFAULT_SIF_A, DEFAULT_USIF_SENTENCE_LENGTH};

/// Environment variable naming a settings file.
pub const CONFIG_ENV: &str = "ROT_SIM_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub method: Method,
    pub weight_scheme: SchemeKind,
    pub sif_a: f64,
    pub usif_sentence_length: f64,
    pub components: usize,
    pub lowercase: bool,
    pub similarity: SimilarityConfig,
    pub workers: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            method: Method::Rots,
            weight_scheme: SchemeKind::Usif,
            sif_a: DEFAULT_SIF_A,
            usif_sentence_length: DEFAULT_USIF_SENTENCE_LENGTH,
            components: 5,
            lowercase: true,
            similarity: SimilarityConfig::default(),
            workers: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value {value:?} for {key}")))
}

impl Settings {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "method" => self.method = value.parse()?,
            "weight_scheme" => self.weight_scheme = value.parse()?,
            "sif_a" => self.sif_a = parse(key, value)?,
            "usif_sentence_length" => self.usif_sentence_length = parse(key, value)?,
            "components" => self.components = parse(key, value)?,
            "lowercase" => self.lowercase = parse(key, value)?,
            "tree" => self.similarity.tree_kind = TreeKind::from_str(value)?,
            "depth" => self.similarity.depth = parse(key, value)?,
            "gamma" => self.similarity.gamma = parse(key, value)?,
            "sinkhorn_tol" => self.similarity.sinkhorn.tol = parse(key, value)?,
            "sinkhorn_max_iter" => self.similarity.sinkhorn.max_iter = parse(key, value)?,
            "prior_floor_lambda" => self.similarity.sinkhorn.prior_floor = parse(key, value)?,
            "level_cap" => self.similarity.level_cap = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `source`.
    pub fn merge_file<R: BufRead>(&mut self, source: R) -> Result<()> {
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `key = value`".into(),
                });
            };
            self.set(key, value).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.similarity.validate()?;
        if !(self.sif_a > 0.0) {
            return Err(Error::InvalidArgument("sif_a must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }
}
