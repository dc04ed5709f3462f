//! Cost matrices, transport plans, and the two solvers: an exact
//! transportation simplex and a KL-regularized Sinkhorn.

mod exact;
mod kot;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::cosine;

pub use exact::solve_exact_ot;
pub use kot::{solve_kot, SinkhornOptions};

/// Pairwise costs `D_ij = 1 - cos(v_i, w_j)`, entries in `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(Array2<f64>);

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("cost matrix has non-finite entries".into()));
        }
        Ok(CostMatrix(values))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn t(&self) -> CostMatrix {
        CostMatrix(self.0.t().to_owned())
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl std::ops::Index<(usize, usize)> for CostMatrix {
    type Output = f64;

    fn index(&self, ix: (usize, usize)) -> &f64 {
        &self.0[ix]
    }
}

/// Cosine similarities between the rows of `a` and the rows of `b`. A zero
/// vector has similarity 0 with everything.
pub fn cosine_similarity_matrix(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    for (i, u) in a.rows().into_iter().enumerate() {
        for (j, w) in b.rows().into_iter().enumerate() {
            out[(i, j)] = cosine(u, w);
        }
    }
    out
}

pub fn cosine_cost(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> CostMatrix {
    CostMatrix(cosine_similarity_matrix(a, b).mapv(|s| 1.0 - s))
}

/// A nonnegative plan together with the marginals it was solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: Array2<f64>,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
}

impl TransportPlan {
    pub fn dim(&self) -> (usize, usize) {
        self.matrix.dim()
    }

    /// Largest absolute deviation of a row or column sum from its target.
    pub fn max_violation(&self) -> f64 {
        marginal_violation(self.matrix.view(), &self.rows, &self.cols)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.matrix.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    pub fn transposed(&self) -> TransportPlan {
        TransportPlan {
            matrix: self.matrix.t().to_owned(),
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }
}

pub(crate) fn marginal_violation(plan: ArrayView2<'_, f64>, rows: &[f64], cols: &[f64]) -> f64 {
    let row_err = plan
        .sum_axis(Axis(1))
        .iter()
        .zip(rows)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max);
    let col_err = plan
        .sum_axis(Axis(0))
        .iter()
        .zip(cols)
        .map(|(s, t)| (s - t).abs())
        .fold(0.0, f64::max);
    row_err.max(col_err)
}

/// Frobenius inner product `sum_ij plan_ij * matrix_ij`.
pub fn transport_objective(plan: ArrayView2<'_, f64>, matrix: ArrayView2<'_, f64>) -> Result<f64> {
    if plan.dim() != matrix.dim() {
        return Err(Error::ShapeMismatch(format!("plan {:?} vs matrix {:?}", plan.dim(), matrix.dim())));
    }
    Ok(plan.iter().zip(matrix.iter()).map(|(p, m)| p * m).sum())
}

/// Validates marginals for a cost of shape `(m, n)`.
pub(crate) fn check_marginals(dim: (usize, usize), rows: &[f64], cols: &[f64]) -> Result<()> {
    let (m, n) = dim;
    if m == 0 || n == 0 || rows.len() != m || cols.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "cost {m}x{n} with {} row and {} column marginals",
            rows.len(),
            cols.len()
        )));
    }
    if rows.iter().chain(cols).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("marginals must be finite and nonnegative".into()));
    }
    let row_sum: f64 = rows.iter().sum();
    let col_sum: f64 = cols.iter().sum();
    if (row_sum - col_sum).abs() > 1e-6 || row_sum <= 0.0 {
        return Err(Error::MarginalMismatch { row_sum, col_sum });
    }
    Ok(())
}

/// The only feasible plan when one side has a single entry.
pub(crate) fn trivial_plan(rows: &[f64], cols: &[f64]) -> Option<TransportPlan> {
    let matrix = if rows.len() == 1 {
        Array2::from_shape_vec((1, cols.len()), cols.to_vec()).expect("shape")
    } else if cols.len() == 1 {
        Array2::from_shape_vec((rows.len(), 1), rows.to_vec()).expect("shape")
    } else {
        return None;
    };
    Some(TransportPlan {
        matrix,
        rows: rows.to_vec(),
        cols: cols.to_vec(),
    })
}

/// Refines a plan between parent groups into a prior between child groups.
///
/// Child `m` of parent `i` and child `n` of parent `j` receive
/// `plan_ij * w_m w_n / (sum_{m' in i} w_m' * sum_{n' in j} w_n')`, so every
/// parent block keeps its mass. A parent whose children all have zero weight
/// splits its mass evenly.
pub fn split_prior(
    parent_plan: ArrayView2<'_, f64>,
    parent_groups: (&[Vec<usize>], &[Vec<usize>]),
    child_groups: (&[Vec<usize>], &[Vec<usize>]),
    child_weights: (&[f64], &[f64]),
) -> Result<Array2<f64>> {
    let (p, q) = parent_plan.dim();
    if parent_groups.0.len() != p || parent_groups.1.len() != q {
        return Err(Error::ShapeMismatch(format!(
            "plan {p}x{q} over {}x{} parent groups",
            parent_groups.0.len(),
            parent_groups.1.len()
        )));
    }
    let owner1 = owners(parent_groups.0, child_groups.0)?;
    let owner2 = owners(parent_groups.1, child_groups.1)?;
    let fractions1 = block_fractions(&owner1, child_weights.0, p)?;
    let fractions2 = block_fractions(&owner2, child_weights.1, q)?;

    let mut out = Array2::zeros((owner1.len(), owner2.len()));
    for (m, (&i, &fm)) in owner1.iter().zip(&fractions1).enumerate() {
        for (n, (&j, &fn_)) in owner2.iter().zip(&fractions2).enumerate() {
            out[(m, n)] = parent_plan[(i, j)] * fm * fn_;
        }
    }
    Ok(out)
}

fn owners(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>> {
    let max_word = parents.iter().flatten().copied().max().unwrap_or(0);
    let mut parent_of_word = vec![usize::MAX; max_word + 1];
    for (p, group) in parents.iter().enumerate() {
        for &w in group {
            parent_of_word[w] = p;
        }
    }
    children
        .iter()
        .map(|child| {
            let mut owner = None;
            for &w in child {
                let p = parent_of_word.get(w).copied().unwrap_or(usize::MAX);
                if p == usize::MAX || owner.is_some_and(|o| o != p) {
                    return Err(Error::InvalidArgument(format!(
                        "child group {child:?} is not inside a single parent group"
                    )));
                }
                owner = Some(p);
            }
            owner.ok_or_else(|| Error::InvalidArgument("empty child group".into()))
        })
        .collect()
}

/// Each child's share of its parent's weight.
fn block_fractions(owner: &[usize], weights: &[f64], parents: usize) -> Result<Vec<f64>> {
    if weights.len() != owner.len() {
        return Err(Error::ShapeMismatch(format!("{} weights for {} child groups", weights.len(), owner.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("child weights must be nonnegative".into()));
    }
    let mut totals = vec![0.0; parents];
    let mut counts = vec![0usize; parents];
    for (&p, &w) in owner.iter().zip(weights) {
        totals[p] += w;
        counts[p] += 1;
    }
    Ok(owner
        .iter()
        .zip(weights)
        .map(|(&p, &w)| if totals[p] > 0.0 { w / totals[p] } else { 1.0 / counts[p] as f64 })
        .collect())
}
