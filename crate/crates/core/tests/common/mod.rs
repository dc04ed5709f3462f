//! Shared fixtures and independent reference implementations.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rots::structure::WeightedSentence;
use rots::transport::TransportPlan;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// `n` random words of dimension `dim` with weights in [0.1, 1).
pub fn random_sentence(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> WeightedSentence {
    let vectors = random_matrix(rng, n, dim);
    let weights = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let tokens = (0..n).map(|i| format!("w{i}")).collect();
    WeightedSentence::new(tokens, vectors, weights).unwrap()
}

pub fn uniform_sentence(tokens: &[&str], vectors: Array2<f64>) -> WeightedSentence {
    let n = tokens.len();
    WeightedSentence::new(tokens.iter().map(|t| t.to_string()).collect(), vectors, vec![1.0; n]).unwrap()
}

/// Random probability vector of length `n` with entries bounded away from 0.
pub fn random_marginal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Largest absolute deviation of the plan's row and column sums.
pub fn marginal_error(plan: &Array2<f64>, rows: &[f64], cols: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (row, r) in plan.rows().into_iter().zip(rows) {
        worst = worst.max((row.sum() - r).abs());
    }
    for (col, c) in plan.columns().into_iter().zip(cols) {
        worst = worst.max((col.sum() - c).abs());
    }
    worst
}

pub fn plan_error(plan: &TransportPlan) -> f64 {
    marginal_error(&plan.matrix, &plan.rows, &plan.cols)
}

/// Minimum transport cost by enumerating every vertex of the transport
/// polytope: each choice of `m + n - 1` cells whose equality system has a
/// unique nonnegative solution.
pub fn vertex_enumeration_ot(cost: &Array2<f64>, rows: &[f64], cols: &[f64]) -> f64 {
    let (m, n) = cost.dim();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    subsets(cells.len(), k, 0, &mut chosen, &mut |subset| {
        let picked: Vec<(usize, usize)> = subset.iter().map(|&s| cells[s]).collect();
        if let Some(x) = solve_basis(&picked, rows, cols, m, n) {
            if x.iter().all(|&v| v >= -1e-12) {
                let value: f64 = picked.iter().zip(&x).map(|(&(i, j), v)| cost[(i, j)] * v).sum();
                best = best.min(value);
            }
        }
    });
    best
}

fn subsets(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for s in start..total {
        if total - s < k - chosen.len() {
            break;
        }
        chosen.push(s);
        subsets(total, k, s + 1, chosen, visit);
        chosen.pop();
    }
}

/// Solves the row/column equalities restricted to `cells` by Gaussian
/// elimination. Returns `None` unless the solution is unique and consistent.
fn solve_basis(cells: &[(usize, usize)], rows: &[f64], cols: &[f64], m: usize, n: usize) -> Option<Vec<f64>> {
    let k = cells.len();
    let eqs = m + n;
    let mut a = vec![vec![0.0; k + 1]; eqs];
    for (v, &(i, j)) in cells.iter().enumerate() {
        a[i][v] = 1.0;
        a[m + j][v] = 1.0;
    }
    for i in 0..m {
        a[i][k] = rows[i];
    }
    for j in 0..n {
        a[m + j][k] = cols[j];
    }
    let mut pivot_row = 0;
    for col in 0..k {
        let p = (pivot_row..eqs).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(pivot_row, p);
        let div = a[pivot_row][col];
        for entry in a[pivot_row].iter_mut() {
            *entry /= div;
        }
        for r in 0..eqs {
            if r != pivot_row && a[r][col] != 0.0 {
                let f = a[r][col];
                let pivot = a[pivot_row].clone();
                for (x, p) in a[r].iter_mut().zip(&pivot) {
                    *x -= f * p;
                }
            }
        }
        pivot_row += 1;
    }
    if a[pivot_row..].iter().any(|row| row[k].abs() > 1e-9) {
        return None;
    }
    Some((0..k).map(|r| a[r][k]).collect())
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// eigenvalues and the matching unit eigenvectors, largest eigenvalue first.
pub fn jacobi_eigen(matrix: &Array2<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (0..n).map(move |q| (p, q))).filter(|(p, q)| p != q).map(|(p, q)| a[(p, q)].powi(2)).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = order.iter().map(|&k| v.column(k).to_vec()).collect();
    (values, vectors)
}

/// `K` computed as `1 / (sum_ij a_i a_j cos(v_i, v_j))`, the route through
/// modified weights rather than the norm ratio.
pub fn k_from_pairwise_cosines(weights: &[f64], vectors: &Array2<f64>) -> f64 {
    let norms: Vec<f64> = vectors.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mass: f64 = weights.iter().zip(&norms).map(|(w, n)| w * n).sum();
    let a: Vec<f64> = weights.iter().zip(&norms).map(|(w, n)| w * n / mass).collect();
    let mut total = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            let cos = vectors.row(i).dot(&vectors.row(j)) / (norms[i] * norms[j]);
            total += a[i] * a[j] * cos;
        }
    }
    1.0 / total
}

/// Word cosine computed from scratch.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
