//! Sentences, tree structures over their words, and per-level substructures.
//!
//! A [`StructureTree`] node owns a set of word indices; every node's set is
//! the disjoint union of its children's sets. Level `k` of a tree is the set
//! of nodes at depth `k`, with leaves from shallower depths carried down as
//! they are, so every level is an exact cover of the sentence.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::embeddings::{EmbeddingTable, FrequencyTable};
use crate::error::{Error, Result};
use crate::weighting::{word_weight, WeightScheme};

/// In-vocabulary tokens of a sentence with their vectors and weights.
#[derive(Debug, Clone)]
pub struct WeightedSentence {
    tokens: Vec<String>,
    vectors: Array2<f64>,
    weights: Vec<f64>,
    /// Position of each retained token in the original token list.
    retained: Vec<usize>,
    dropped: usize,
}

impl WeightedSentence {
    pub fn new(tokens: Vec<String>, vectors: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = tokens.len();
        if n == 0 {
            return Err(Error::EmptySentence);
        }
        if vectors.nrows() != n || weights.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} tokens, {} vectors, {} weights",
                vectors.nrows(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("word weight {w} is not positive")));
        }
        Ok(WeightedSentence {
            tokens,
            vectors,
            weights,
            retained: (0..n).collect(),
            dropped: 0,
        })
    }

    /// Looks up every token, drops the out-of-vocabulary ones, and weights the
    /// rest with `scheme`. `freq` is required unless the scheme is uniform.
    pub fn from_tokens<S: AsRef<str>>(
        tokens: &[S],
        table: &EmbeddingTable,
        scheme: &WeightScheme,
        freq: Option<&FrequencyTable>,
    ) -> Result<Self> {
        let mut kept = Vec::new();
        let mut retained = Vec::new();
        let mut data = Vec::new();
        let mut weights = Vec::new();
        for (i, token) in tokens.iter().enumerate() {
            let token = token.as_ref();
            let Some(v) = table.lookup(token) else {
                continue;
            };
            let p = match (scheme.needs_frequencies(), freq) {
                (false, _) => 0.0,
                (true, Some(f)) => f.probability_normalized(token)?,
                (true, None) => {
                    return Err(Error::InvalidArgument(
                        "weight scheme requires a frequency table".into(),
                    ))
                }
            };
            weights.push(word_weight(scheme, p)?);
            data.extend(v.iter().copied());
            kept.push(token.to_string());
            retained.push(i);
        }
        if kept.is_empty() {
            return Err(Error::EmptySentence);
        }
        let vectors = Array2::from_shape_vec((kept.len(), table.dim()), data).expect("shape");
        let mut s = WeightedSentence::new(kept, vectors, weights)?;
        s.dropped = tokens.len() - s.len();
        s.retained = retained;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// Number of tokens dropped as out of vocabulary.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Weighted sum of word vectors, `sum_i w_i v_i`.
    pub fn wawv(&self) -> Array1<f64> {
        let w = ArrayView1::from(&self.weights);
        w.dot(&self.vectors)
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.vectors *= factor;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Sorted word indices owned by the node.
    pub words: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rooted tree over word indices `0..n`. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureTree {
    nodes: Vec<TreeNode>,
}

impl StructureTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Number of words covered.
    pub fn len(&self) -> usize {
        self.nodes[0].words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Depth of the deepest node (a single leaf has height 0).
    pub fn height(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut height = 0;
        // Children are always created after their parent.
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                depth[id] = depth[p] + 1;
                height = height.max(depth[id]);
            }
        }
        height
    }

    fn push(&mut self, parent: Option<usize>, mut words: Vec<usize>) -> usize {
        words.sort_unstable();
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            parent,
            children: Vec::new(),
            words,
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn sort_children(&mut self) {
        for id in 0..self.nodes.len() {
            let mut children = std::mem::take(&mut self.nodes[id].children);
            children.sort_by_key(|&c| self.nodes[c].words[0]);
            self.nodes[id].children = children;
        }
    }
}

/// Balanced binary tree over positions: each node of `k > 1` words gives the
/// first `ceil(k/2)` to its left child and the rest to its right child.
pub fn build_binary_tree(n: usize) -> Result<StructureTree> {
    if n == 0 {
        return Err(Error::InvalidTree("binary tree over zero words".into()));
    }
    let mut tree = StructureTree { nodes: Vec::new() };
    let mut stack = vec![(None, 0, n)];
    while let Some((parent, lo, hi)) = stack.pop() {
        let id = tree.push(parent, (lo..hi).collect());
        if hi - lo > 1 {
            let mid = lo + (hi - lo).div_ceil(2);
            stack.push((Some(id), mid, hi));
            stack.push((Some(id), lo, mid));
        }
    }
    tree.sort_children();
    Ok(tree)
}

/// Head-index encoding of a dependency parse: `heads[i]` is the index of the
/// head of word `i`, or `-1` for the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    pub tokens: Vec<String>,
    pub heads: Vec<i64>,
}

impl DependencyTree {
    pub fn new(tokens: Vec<String>, heads: Vec<i64>) -> Result<Self> {
        let tree = DependencyTree { tokens, heads };
        tree.validate()?;
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Checks head ranges, root count, and acyclicity. Returns the root.
    pub fn validate(&self) -> Result<usize> {
        let n = self.heads.len();
        if n == 0 {
            return Err(Error::InvalidTree("empty dependency tree".into()));
        }
        if self.tokens.len() != n {
            return Err(Error::InvalidTree(format!("{} tokens but {n} heads", self.tokens.len())));
        }
        let mut root = None;
        for (i, &h) in self.heads.iter().enumerate() {
            if h == -1 {
                if root.replace(i).is_some() {
                    return Err(Error::InvalidTree("multiple roots".into()));
                }
            } else if h < 0 || h as usize >= n || h as usize == i {
                return Err(Error::InvalidTree(format!("word {i} has invalid head {h}")));
            }
        }
        let root = root.ok_or_else(|| Error::InvalidTree("no root".into()))?;
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while self.heads[cur] != -1 {
                cur = self.heads[cur] as usize;
                steps += 1;
                if steps > n {
                    return Err(Error::InvalidTree(format!("cycle through word {start}")));
                }
            }
        }
        Ok(root)
    }

    /// Restricts the parse to the words with `keep[i] == true`.
    ///
    /// Each kept word is re-attached to its nearest kept ancestor. Kept words
    /// with no kept ancestor hang off the shallowest of them (lowest index on
    /// ties), which becomes the new root.
    pub fn restrict(&self, keep: &[bool]) -> Result<DependencyTree> {
        self.validate()?;
        let n = self.len();
        if keep.len() != n {
            return Err(Error::ShapeMismatch(format!("{} flags for {n} words", keep.len())));
        }
        let mut new_index = vec![usize::MAX; n];
        let mut kept = 0;
        for i in 0..n {
            if keep[i] {
                new_index[i] = kept;
                kept += 1;
            }
        }
        if kept == 0 {
            return Err(Error::EmptySentence);
        }
        let depth = |mut i: usize| {
            let mut d = 0;
            while self.heads[i] != -1 {
                i = self.heads[i] as usize;
                d += 1;
            }
            d
        };
        let mut heads = Vec::with_capacity(kept);
        let mut orphans = Vec::new();
        for i in (0..n).filter(|&i| keep[i]) {
            let mut h = self.heads[i];
            while h != -1 && !keep[h as usize] {
                h = self.heads[h as usize];
            }
            if h == -1 {
                orphans.push(new_index[i]);
                heads.push(-1);
            } else {
                heads.push(new_index[h as usize] as i64);
            }
        }
        let originals: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
        let root = *orphans
            .iter()
            .min_by_key(|&&j| (depth(originals[j]), j))
            .expect("some kept word has no kept ancestor");
        for &j in &orphans {
            if j != root {
                heads[j] = root as i64;
            }
        }
        let tokens = originals.iter().map(|&i| self.tokens[i].clone()).collect();
        Ok(DependencyTree { tokens, heads })
    }
}

/// Builds the structure tree of a dependency parse.
///
/// Each word owns its subtree. A word with dependents expands into a singleton
/// node holding the word itself plus one node per dependent subtree, so
/// every level stays an exact cover. Level 1 is the expansion of the root.
pub fn ingest_dependency_tree<S: AsRef<str>>(tokens: &[S], heads: &[i64]) -> Result<StructureTree> {
    let dep = DependencyTree {
        tokens: tokens.iter().map(|t| t.as_ref().to_string()).collect(),
        heads: heads.to_vec(),
    };
    let root = dep.validate()?;
    let n = heads.len();
    let mut dependents = vec![Vec::new(); n];
    for (i, &h) in heads.iter().enumerate() {
        if h >= 0 {
            dependents[h as usize].push(i);
        }
    }
    let mut subtree: Vec<Vec<usize>> = vec![Vec::new(); n];
    fn collect(w: usize, dependents: &[Vec<usize>], subtree: &mut [Vec<usize>]) {
        let mut words = vec![w];
        for &d in &dependents[w] {
            collect(d, dependents, subtree);
            words.extend_from_slice(&subtree[d]);
        }
        subtree[w] = words;
    }
    collect(root, &dependents, &mut subtree);

    let mut tree = StructureTree { nodes: Vec::new() };
    let mut stack = vec![(None, root)];
    while let Some((parent, w)) = stack.pop() {
        let id = tree.push(parent, subtree[w].clone());
        if !dependents[w].is_empty() {
            tree.push(Some(id), vec![w]);
            for &d in dependents[w].iter().rev() {
                stack.push((Some(id), d));
            }
        }
    }
    tree.sort_children();
    Ok(tree)
}

/// Word-index groups of level `k`, ordered by minimum index.
///
/// Leaves above depth `k` are carried down unchanged, so levels at or past the
/// tree height are all singletons.
pub fn level_partition(tree: &StructureTree, k: usize) -> Vec<Vec<usize>> {
    let mut frontier = vec![0usize];
    for _ in 0..k {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        let mut changed = false;
        for &id in &frontier {
            let node = &tree.nodes[id];
            if node.is_leaf() {
                next.push(id);
            } else {
                next.extend_from_slice(&node.children);
                changed = true;
            }
        }
        frontier = next;
        if !changed {
            break;
        }
    }
    let mut groups: Vec<Vec<usize>> = frontier.iter().map(|&id| tree.nodes[id].words.clone()).collect();
    groups.sort_by_key(|g| g[0]);
    groups
}

/// Groups of levels `1..=depth`, each refining the one before. Any level with
/// more than `cap` groups is coarsened by merging adjacent sibling groups of
/// smallest combined weight until it fits (or no siblings remain to merge).
pub fn level_ladder(tree: &StructureTree, depth: usize, cap: usize, word_weights: &[f64]) -> Vec<Vec<Vec<usize>>> {
    let mut ladder: Vec<Vec<Vec<usize>>> = Vec::with_capacity(depth);
    for k in 1..=depth {
        let groups = level_partition(tree, k);
        let groups = if groups.len() > cap {
            let parents = ladder.last().map(|p| p.as_slice());
            coarsen(groups, parents, cap, word_weights)
        } else {
            groups
        };
        ladder.push(groups);
    }
    ladder
}

/// Merges adjacent groups that share a parent group, smallest combined weight
/// first, until at most `cap` groups remain or no such pair exists.
pub fn coarsen(
    mut groups: Vec<Vec<usize>>,
    parents: Option<&[Vec<usize>]>,
    cap: usize,
    word_weights: &[f64],
) -> Vec<Vec<usize>> {
    let parent_of = |g: &[usize]| -> usize {
        match parents {
            None => 0,
            Some(ps) => ps.iter().position(|p| p.contains(&g[0])).unwrap_or(usize::MAX),
        }
    };
    let weight = |g: &[usize]| -> f64 { g.iter().map(|&i| word_weights[i]).sum() };
    while groups.len() > cap {
        let owners: Vec<usize> = groups.iter().map(|g| parent_of(g)).collect();
        let weights: Vec<f64> = groups.iter().map(|g| weight(g)).collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..groups.len() {
            // next group (in index order) with the same parent
            if let Some(j) = (i + 1..groups.len()).find(|&j| owners[j] == owners[i]) {
                let w = weights[i] + weights[j];
                if best.is_none_or(|(bw, _, _)| w < bw) {
                    best = Some((w, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else {
            break;
        };
        let merged = groups.remove(j);
        groups[i].extend(merged);
        groups[i].sort_unstable();
    }
    groups
}

/// A level of substructures with aggregated weights and vectors.
#[derive(Debug, Clone)]
pub struct LevelPartition {
    pub level: usize,
    pub groups: Vec<Vec<usize>>,
    /// `w~_j = sum_{i in S_j} w_i`
    pub weights: Vec<f64>,
    /// `v~_j = sum_{i in S_j} w_i v_i / w~_j`, one row per group.
    pub vectors: Array2<f64>,
}

impl LevelPartition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Aggregates word weights and vectors over `groups`, which must cover every
/// word of `sentence` exactly once.
pub fn aggregate_substructures(sentence: &WeightedSentence, groups: &[Vec<usize>], level: usize) -> Result<LevelPartition> {
    let n = sentence.len();
    let mut seen = vec![false; n];
    for &i in groups.iter().flatten() {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument(format!("groups do not partition {n} words (index {i})")));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidArgument(format!("groups do not cover all {n} words")));
    }
    let dim = sentence.dim();
    let mut weights = Vec::with_capacity(groups.len());
    let mut vectors = Array2::zeros((groups.len(), dim));
    for (j, group) in groups.iter().enumerate() {
        let total: f64 = group.iter().map(|&i| sentence.weights[i]).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroWeightSubstructure);
        }
        let mut row = vectors.row_mut(j);
        for &i in group {
            row.scaled_add(sentence.weights[i] / total, &sentence.vectors.row(i));
        }
        weights.push(total);
    }
    Ok(LevelPartition {
        level,
        groups: groups.to_vec(),
        weights,
        vectors,
    })
}
