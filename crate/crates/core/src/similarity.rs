//! Sentence similarities: WMD, cosine of weighted averages, and the
//! recursive transport measures ROT (a distance) and ROTS (a similarity).
//!
//! The recursive measures walk the levels of a tree over each sentence. Level
//! 1 is solved exactly; every later level is a KL-regularized problem whose
//! prior is the previous level's plan split down onto the child groups. The
//! result is the unweighted mean of the per-level scores.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::cosine;
use crate::structure::{aggregate_substructures, build_binary_tree, level_ladder, LevelPartition, StructureTree, WeightedSentence};
use crate::transport::{
    cosine_similarity_matrix, solve_exact_ot, solve_kot, split_prior, transport_objective, CostMatrix, SinkhornOptions,
    TransportPlan,
};
use crate::weighting::{comprehensive_coefficient, modified_weights, normalized_weights};

/// Largest number of groups per side at any level.
pub const DEFAULT_LEVEL_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wmd,
    CosWawv,
    Rot,
    Rots,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Wmd => "wmd",
            Method::CosWawv => "cos_wawv",
            Method::Rot => "rot",
            Method::Rots => "rots",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wmd" => Ok(Method::Wmd),
            "cos" | "cos_wawv" => Ok(Method::CosWawv),
            "rot" => Ok(Method::Rot),
            "rots" => Ok(Method::Rots),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Binary,
    Dependency,
}

impl std::str::FromStr for TreeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(TreeKind::Binary),
            "dependency" => Ok(TreeKind::Dependency),
            other => Err(Error::InvalidArgument(format!("unknown tree kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityConfig {
    pub depth: usize,
    pub gamma: f64,
    pub tree_kind: TreeKind,
    /// Norm-modified marginals; `None` picks the method default (on for
    /// ROTS, off for ROT).
    pub use_modified_weights: Option<bool>,
    pub sinkhorn: SinkhornOptions,
    pub level_cap: usize,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            depth: 5,
            gamma: 10.0,
            tree_kind: TreeKind::Binary,
            use_modified_weights: None,
            sinkhorn: SinkhornOptions::default(),
            level_cap: DEFAULT_LEVEL_CAP,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.level_cap == 0 {
            return Err(Error::InvalidArgument("level cap must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics for one level of a recursive computation.
#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub groups: (usize, usize),
    pub plan: Vec<Vec<f64>>,
    /// `sum_ij plan_ij (1 - Sim_ij)`
    pub cost: f64,
    /// `sum_ij plan_ij Sim_ij`
    pub similarity: f64,
    pub coefficient: f64,
    /// Contribution of this level before averaging: `cost` for ROT,
    /// `coefficient * similarity` for ROTS.
    pub score: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimilarityReport {
    pub method: Method,
    pub score: f64,
    pub levels: Vec<LevelReport>,
}

/// Cosine of the two weighted-average sentence vectors.
pub fn cos_wawv(s1: &WeightedSentence, s2: &WeightedSentence) -> Result<f64> {
    let d1 = s1.wawv();
    let d2 = s2.wawv();
    let n1 = d1.dot(&d1).sqrt();
    let n2 = d2.dot(&d2).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::DegenerateSentenceVector);
    }
    Ok(d1.dot(&d2) / (n1 * n2))
}

/// Exact word mover's plan on cosine cost between the normalized word weights.
pub fn wmd_plan(s1: &WeightedSentence, s2: &WeightedSentence) -> Result<(TransportPlan, CostMatrix)> {
    let cost = CostMatrix::new(cosine_similarity_matrix(s1.vectors().view(), s2.vectors().view()).mapv(|s| 1.0 - s))?;
    let r = normalized_weights(s1.weights())?;
    let c = normalized_weights(s2.weights())?;
    let plan = solve_exact_ot(&cost, r.values(), c.values())?;
    Ok((plan, cost))
}

pub fn wmd(s1: &WeightedSentence, s2: &WeightedSentence) -> Result<f64> {
    let (plan, cost) = wmd_plan(s1, s2)?;
    transport_objective(plan.matrix.view(), cost.view())
}

/// `C * sum_ij a_i b_j Sim(v_i, w_j)`: cosine similarity written as a
/// transport of the norm-modified weights under their product plan.
pub fn induced_plan_similarity(s1: &WeightedSentence, s2: &WeightedSentence) -> Result<f64> {
    let c = comprehensive_coefficient(s1.weights(), s1.vectors().view(), s2.weights(), s2.vectors().view())?;
    let a = modified_weights(s1.weights(), s1.vectors().view())?;
    let b = modified_weights(s2.weights(), s2.vectors().view())?;
    let mut total = 0.0;
    for (ai, vi) in a.values().iter().zip(s1.vectors().rows()) {
        for (bj, vj) in b.values().iter().zip(s2.vectors().rows()) {
            total += ai * bj * cosine(vi, vj);
        }
    }
    Ok(c * total)
}

/// Group lists for levels `1..=depth` of each sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub first: Vec<Vec<Vec<usize>>>,
    pub second: Vec<Vec<Vec<usize>>>,
}

impl Ladder {
    pub fn from_trees(
        s1: &WeightedSentence,
        s2: &WeightedSentence,
        tree1: &StructureTree,
        tree2: &StructureTree,
        config: &SimilarityConfig,
    ) -> Result<Self> {
        config.validate()?;
        for (s, t) in [(s1, tree1), (s2, tree2)] {
            if s.len() != t.len() {
                return Err(Error::ShapeMismatch(format!("tree over {} words for a {}-word sentence", t.len(), s.len())));
            }
        }
        Ok(Ladder {
            first: level_ladder(tree1, config.depth, config.level_cap, s1.weights()),
            second: level_ladder(tree2, config.depth, config.level_cap, s2.weights()),
        })
    }

    /// Balanced binary trees over both sentences.
    pub fn binary(s1: &WeightedSentence, s2: &WeightedSentence, config: &SimilarityConfig) -> Result<Self> {
        let t1 = build_binary_tree(s1.len())?;
        let t2 = build_binary_tree(s2.len())?;
        Self::from_trees(s1, s2, &t1, &t2, config)
    }

    /// `depth` copies of the all-singleton partition.
    pub fn singletons(s1: &WeightedSentence, s2: &WeightedSentence, depth: usize) -> Self {
        let single = |n: usize| (0..n).map(|i| vec![i]).collect::<Vec<_>>();
        Ladder {
            first: vec![single(s1.len()); depth],
            second: vec![single(s2.len()); depth],
        }
    }

    pub fn depth(&self) -> usize {
        self.first.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Recursion {
    Distance,
    Similarity,
}

struct LevelData {
    partition1: LevelPartition,
    partition2: LevelPartition,
    marginals1: Vec<f64>,
    marginals2: Vec<f64>,
}

fn level_data(s1: &WeightedSentence, s2: &WeightedSentence, ladder: &Ladder, k: usize, modified: bool) -> Result<LevelData> {
    let partition1 = aggregate_substructures(s1, &ladder.first[k], k + 1)?;
    let partition2 = aggregate_substructures(s2, &ladder.second[k], k + 1)?;
    let marginals = |p: &LevelPartition| {
        if modified {
            modified_weights(&p.weights, p.vectors.view())
        } else {
            normalized_weights(&p.weights)
        }
        .map(|w| w.into_vec())
    };
    Ok(LevelData {
        marginals1: marginals(&partition1)?,
        marginals2: marginals(&partition2)?,
        partition1,
        partition2,
    })
}

fn recurse(
    s1: &WeightedSentence,
    s2: &WeightedSentence,
    ladder: &Ladder,
    config: &SimilarityConfig,
    mode: Recursion,
) -> Result<SimilarityReport> {
    config.validate()?;
    if ladder.first.len() != ladder.second.len() || ladder.first.is_empty() {
        return Err(Error::InvalidArgument("ladders must have the same nonzero depth".into()));
    }
    let modified = config.use_modified_weights.unwrap_or(mode == Recursion::Similarity);
    let mut levels = Vec::with_capacity(ladder.depth());
    let mut previous: Option<(TransportPlan, Vec<Vec<usize>>, Vec<Vec<usize>>)> = None;
    for k in 0..ladder.depth() {
        let data = level_data(s1, s2, ladder, k, modified)?;
        let sims: Array2<f64> =
            cosine_similarity_matrix(data.partition1.vectors.view(), data.partition2.vectors.view());
        let cost = CostMatrix::new(sims.mapv(|s| 1.0 - s))?;
        let plan = match &previous {
            None => solve_exact_ot(&cost, &data.marginals1, &data.marginals2)?,
            Some((parent, groups1, groups2)) => {
                let prior = split_prior(
                    parent.matrix.view(),
                    (groups1, groups2),
                    (&data.partition1.groups, &data.partition2.groups),
                    (&data.marginals1, &data.marginals2),
                )?;
                solve_kot(&cost, &data.marginals1, &data.marginals2, &prior, config.gamma, &config.sinkhorn)?
            }
        };
        let level_cost = transport_objective(plan.matrix.view(), cost.view())?;
        let level_sim = transport_objective(plan.matrix.view(), sims.view())?;
        let coefficient = comprehensive_coefficient(
            &data.partition1.weights,
            data.partition1.vectors.view(),
            &data.partition2.weights,
            data.partition2.vectors.view(),
        )?;
        let score = match mode {
            Recursion::Distance => level_cost,
            Recursion::Similarity => coefficient * level_sim,
        };
        levels.push(LevelReport {
            level: k + 1,
            groups: plan.dim(),
            plan: plan.to_rows(),
            cost: level_cost,
            similarity: level_sim,
            coefficient,
            score,
            max_violation: plan.max_violation(),
        });
        previous = Some((plan, data.partition1.groups, data.partition2.groups));
    }
    let score = levels.iter().map(|l| l.score).sum::<f64>() / levels.len() as f64;
    let method = match mode {
        Recursion::Distance => Method::Rot,
        Recursion::Similarity => Method::Rots,
    };
    Ok(SimilarityReport { method, score, levels })
}

/// ROT distance over explicit per-level groups.
pub fn rot_report(s1: &WeightedSentence, s2: &WeightedSentence, ladder: &Ladder, config: &SimilarityConfig) -> Result<SimilarityReport> {
    recurse(s1, s2, ladder, config, Recursion::Distance)
}

/// ROTS similarity over explicit per-level groups.
pub fn rots_report(s1: &WeightedSentence, s2: &WeightedSentence, ladder: &Ladder, config: &SimilarityConfig) -> Result<SimilarityReport> {
    recurse(s1, s2, ladder, config, Recursion::Similarity)
}

pub fn rot_distance(
    s1: &WeightedSentence,
    s2: &WeightedSentence,
    tree1: &StructureTree,
    tree2: &StructureTree,
    config: &SimilarityConfig,
) -> Result<f64> {
    let ladder = Ladder::from_trees(s1, s2, tree1, tree2, config)?;
    Ok(rot_report(s1, s2, &ladder, config)?.score)
}

pub fn rots_similarity(
    s1: &WeightedSentence,
    s2: &WeightedSentence,
    tree1: &StructureTree,
    tree2: &StructureTree,
    config: &SimilarityConfig,
) -> Result<f64> {
    let ladder = Ladder::from_trees(s1, s2, tree1, tree2, config)?;
    Ok(rots_report(s1, s2, &ladder, config)?.score)
}

/// Runs `method`, capturing per-level diagnostics for the recursive ones.
/// Trees are only consulted by ROT and ROTS; when absent, binary trees are
/// built.
pub fn similarity_report(
    s1: &WeightedSentence,
    s2: &WeightedSentence,
    trees: Option<(&StructureTree, &StructureTree)>,
    config: &SimilarityConfig,
    method: Method,
) -> Result<SimilarityReport> {
    let flat = |score| SimilarityReport {
        method,
        score,
        levels: Vec::new(),
    };
    match method {
        Method::CosWawv => Ok(flat(cos_wawv(s1, s2)?)),
        Method::Wmd => {
            let (plan, cost) = wmd_plan(s1, s2)?;
            let objective = transport_objective(plan.matrix.view(), cost.view())?;
            let mut report = flat(objective);
            report.levels.push(LevelReport {
                level: 1,
                groups: plan.dim(),
                plan: plan.to_rows(),
                cost: objective,
                similarity: 1.0 - objective,
                coefficient: 1.0,
                score: objective,
                max_violation: plan.max_violation(),
            });
            Ok(report)
        }
        Method::Rot | Method::Rots => {
            let ladder = match trees {
                Some((t1, t2)) => Ladder::from_trees(s1, s2, t1, t2, config)?,
                None => Ladder::binary(s1, s2, config)?,
            };
            recurse(
                s1,
                s2,
                &ladder,
                config,
                if method == Method::Rot { Recursion::Distance } else { Recursion::Similarity },
            )
        }
    }
}

/// Convenience for callers that only need the score.
pub fn score(
    s1: &WeightedSentence,
    s2: &WeightedSentence,
    trees: Option<(&StructureTree, &StructureTree)>,
    config: &SimilarityConfig,
    method: Method,
) -> Result<f64> {
    match method {
        Method::CosWawv => cos_wawv(s1, s2),
        Method::Wmd => wmd(s1, s2),
        _ => similarity_report(s1, s2, trees, config, method).map(|r| r.score),
    }
}

/// Word cosine, exposed for single-word checks.
pub fn word_cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    cosine(a, b)
}
