//! Readers for parsed sentences.
//!
//! Two encodings are accepted:
//!
//! * JSON lines, one object per sentence: `{"tokens": [...], "heads": [...]}`
//!   with `-1` marking the root, or one object per sentence pair:
//!   `{"sentence1": {...}, "sentence2": {...}}`.
//! * CoNLL-U, reading the ID, FORM, and HEAD columns. Multiword ranges and
//!   empty nodes are skipped.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::DependencyTree;

/// Parses of both sentences of a dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTree {
    pub sentence1: DependencyTree,
    pub sentence2: DependencyTree,
}

fn json_lines<T: serde::de::DeserializeOwned, R: BufRead>(source: R) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

/// Reads one `{"tokens", "heads"}` record per line and validates each tree.
pub fn read_sentence_trees<R: BufRead>(source: R) -> Result<Vec<DependencyTree>> {
    json_lines::<DependencyTree, _>(source)?
        .into_iter()
        .map(|(line, tree)| {
            tree.validate().map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            Ok(tree)
        })
        .collect()
}

/// Reads one `{"sentence1", "sentence2"}` record per line.
pub fn read_pair_trees<R: BufRead>(source: R) -> Result<Vec<PairTree>> {
    json_lines::<PairTree, _>(source)?
        .into_iter()
        .map(|(line, pair)| {
            for tree in [&pair.sentence1, &pair.sentence2] {
                tree.validate().map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
            }
            Ok(pair)
        })
        .collect()
}

/// Reads CoNLL-U sentences. HEAD `0` becomes `-1`; other heads are shifted
/// to 0-based indices.
pub fn read_conllu<R: BufRead>(source: R) -> Result<Vec<DependencyTree>> {
    let mut trees = Vec::new();
    let mut tokens = Vec::new();
    let mut heads = Vec::new();
    let mut start_line = 1;
    let mut finish = |tokens: &mut Vec<String>, heads: &mut Vec<i64>, line: usize| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let tree = DependencyTree::new(std::mem::take(tokens), std::mem::take(heads)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        trees.push(tree);
        Ok(())
    };
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            finish(&mut tokens, &mut heads, start_line)?;
            start_line = line_no + 1;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 10 tab-separated columns, found {}", fields.len()),
            });
        }
        if fields[0].contains('-') || fields[0].contains('.') {
            continue;
        }
        let id: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid ID {:?}", fields[0]),
        })?;
        if id != tokens.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected ID {}, found {id}", tokens.len() + 1),
            });
        }
        let head: i64 = fields[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid HEAD {:?}", fields[6]),
        })?;
        tokens.push(fields[1].to_string());
        heads.push(head - 1);
    }
    finish(&mut tokens, &mut heads, start_line)?;
    Ok(trees)
}
