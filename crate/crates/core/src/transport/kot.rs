//! KL-regularized optimal transport by Sinkhorn scaling.
//!
//! Minimizing `<plan, D> + gamma * KL(plan || prior)` under marginal
//! constraints has the solution `diag(u) K diag(v)` with kernel
//! `K_ij = prior_ij * exp(-D_ij / gamma)`; Sinkhorn alternates the row and
//! column scalings until the marginals match.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Axis};

use super::{check_marginals, marginal_violation, trivial_plan, CostMatrix, TransportPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Stop once the largest marginal violation is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the product plan `r c^T` mixed into the prior.
    pub prior_floor: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        SinkhornOptions {
            tol: 1e-9,
            max_iter: 10_000,
            prior_floor: 1e-6,
        }
    }
}

/// Log-domain iterations kick in below this fraction of the mean cost, or
/// when `max(D) / gamma` would underflow the plain kernel.
const LOG_DOMAIN_GAMMA_FRACTION: f64 = 0.05;
const MAX_EXPONENT: f64 = 500.0;

/// Sinkhorn sweeps before switching to Newton steps on the potentials.
const SINKHORN_WARMUP: usize = 200;

/// Solves KL-regularized OT of `cost` between `rows` and `cols` relative to
/// `prior` with strength `gamma`.
///
/// The prior is normalized to unit mass and floored as
/// `(1 - lambda) prior + lambda r c^T` so the kernel has no empty rows or
/// columns. Rows and columns with zero marginal mass are held at zero.
pub fn solve_kot(
    cost: &CostMatrix,
    rows: &[f64],
    cols: &[f64],
    prior: &Array2<f64>,
    gamma: f64,
    options: &SinkhornOptions,
) -> Result<TransportPlan> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    check_marginals(cost.dim(), rows, cols)?;
    if prior.dim() != cost.dim() {
        return Err(Error::ShapeMismatch(format!("prior {:?} vs cost {:?}", prior.dim(), cost.dim())));
    }
    if prior.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("prior entries must be finite and nonnegative".into()));
    }
    if !(0.0..=1.0).contains(&options.prior_floor) {
        return Err(Error::InvalidArgument("prior floor must lie in [0, 1]".into()));
    }
    if let Some(plan) = trivial_plan(rows, cols) {
        return Ok(plan);
    }

    let active_rows: Vec<usize> = (0..rows.len()).filter(|&i| rows[i] > 0.0).collect();
    let active_cols: Vec<usize> = (0..cols.len()).filter(|&j| cols[j] > 0.0).collect();
    let r: Vec<f64> = active_rows.iter().map(|&i| rows[i]).collect();
    let c: Vec<f64> = active_cols.iter().map(|&j| cols[j]).collect();
    let (m, n) = (r.len(), c.len());

    let mut sub_cost = Array2::zeros((m, n));
    let mut sub_prior = Array2::zeros((m, n));
    for (a, &i) in active_rows.iter().enumerate() {
        for (b, &j) in active_cols.iter().enumerate() {
            sub_cost[(a, b)] = cost[(i, j)];
            sub_prior[(a, b)] = prior[(i, j)];
        }
    }
    let floored = floor_prior(&sub_prior, &r, &c, options.prior_floor);

    let sub_plan = scale_kernel(&sub_cost, &r, &c, &floored, gamma, options)?;

    let mut matrix = Array2::zeros(cost.dim());
    for (a, &i) in active_rows.iter().enumerate() {
        for (b, &j) in active_cols.iter().enumerate() {
            matrix[(i, j)] = sub_plan[(a, b)];
        }
    }
    Ok(TransportPlan {
        matrix,
        rows: rows.to_vec(),
        cols: cols.to_vec(),
    })
}

fn floor_prior(prior: &Array2<f64>, r: &[f64], c: &[f64], lambda: f64) -> Array2<f64> {
    let total: f64 = prior.sum();
    let r_total: f64 = r.iter().sum();
    let c_total: f64 = c.iter().sum();
    let scale = r_total * c_total;
    let mut out = Array2::zeros(prior.dim());
    for ((i, j), x) in out.indexed_iter_mut() {
        let product = r[i] * c[j] / scale;
        let p = if total > 0.0 { prior[(i, j)] / total } else { product };
        *x = (1.0 - lambda) * p + lambda * product;
    }
    out
}

/// Finds scalings with `plan_ij = exp(f_i + log K_ij + g_j)` matching `r`
/// and `c`.
///
/// A warm-up of Sinkhorn sweeps is followed by damped Newton steps on the
/// dual potentials, which converge quickly even when the kernel is nearly
/// block-diagonal (a split prior from a sparse parent plan). Every sweep or
/// step counts against `max_iter`.
fn scale_kernel(
    cost: &Array2<f64>,
    r: &[f64],
    c: &[f64],
    prior: &Array2<f64>,
    gamma: f64,
    options: &SinkhornOptions,
) -> Result<Array2<f64>> {
    let (m, n) = cost.dim();
    let log_kernel = Array2::from_shape_fn((m, n), |ix| prior[ix].ln() - cost[ix] / gamma);
    let mean_cost = cost.mean().unwrap_or(0.0);
    let max_cost = cost.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let use_log = gamma < LOG_DOMAIN_GAMMA_FRACTION * mean_cost || max_cost / gamma > MAX_EXPONENT;

    let warmup = options.max_iter.min(SINKHORN_WARMUP);
    let (mut f, mut g) = if use_log {
        sinkhorn_log(&log_kernel, r, c, warmup)
    } else {
        sinkhorn_plain(&log_kernel, r, c, warmup)
    };
    let mut plan = plan_from(&log_kernel, &f, &g);
    let mut violation = marginal_violation(plan.view(), r, c);
    let mut used = warmup;
    while violation.is_finite() && violation >= options.tol && used < options.max_iter {
        if !newton_step(&log_kernel, r, c, &mut f, &mut g) {
            let (nf, ng) = sinkhorn_log_from(&log_kernel, r, c, f, g, 1);
            f = nf;
            g = ng;
        }
        used += 1;
        plan = plan_from(&log_kernel, &f, &g);
        violation = marginal_violation(plan.view(), r, c);
    }
    if violation < options.tol {
        return Ok(plan);
    }
    Err(Error::NotConverged {
        iterations: options.max_iter,
        violation,
    })
}

fn plan_from(log_kernel: &Array2<f64>, f: &[f64], g: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(log_kernel.dim(), |(i, j)| (f[i] + log_kernel[(i, j)] + g[j]).exp())
}

/// Plain-domain sweeps; returns the log of the scalings.
fn sinkhorn_plain(log_kernel: &Array2<f64>, r: &[f64], c: &[f64], sweeps: usize) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = log_kernel.dim();
    let kernel = log_kernel.mapv(f64::exp);
    let mut u = vec![1.0; m];
    let mut v = vec![1.0; n];
    for _ in 0..sweeps {
        for i in 0..m {
            let s: f64 = (0..n).map(|j| kernel[(i, j)] * v[j]).sum();
            u[i] = r[i] / s;
        }
        for j in 0..n {
            let s: f64 = (0..m).map(|i| kernel[(i, j)] * u[i]).sum();
            v[j] = c[j] / s;
        }
    }
    (u.iter().map(|x| x.ln()).collect(), v.iter().map(|x| x.ln()).collect())
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn sinkhorn_log(log_kernel: &Array2<f64>, r: &[f64], c: &[f64], sweeps: usize) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = log_kernel.dim();
    sinkhorn_log_from(log_kernel, r, c, vec![0.0; m], vec![0.0; n], sweeps)
}

fn sinkhorn_log_from(
    log_kernel: &Array2<f64>,
    r: &[f64],
    c: &[f64],
    mut f: Vec<f64>,
    mut g: Vec<f64>,
    sweeps: usize,
) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = log_kernel.dim();
    for _ in 0..sweeps {
        for i in 0..m {
            f[i] = r[i].ln() - log_sum_exp((0..n).map(|j| log_kernel[(i, j)] + g[j]));
        }
        for j in 0..n {
            g[j] = c[j].ln() - log_sum_exp((0..m).map(|i| log_kernel[(i, j)] + f[i]));
        }
    }
    (f, g)
}

/// Dual objective `<r, f> + <c, g> - sum_ij plan_ij`, concave in `(f, g)`.
fn dual(log_kernel: &Array2<f64>, r: &[f64], c: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let linear: f64 = r.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + c.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    linear - plan_from(log_kernel, f, g).sum()
}

/// One damped Newton ascent step on the dual, with `g` fixed at its last
/// coordinate to remove the `(f + t, g - t)` invariance. Returns false when
/// no step along the Newton direction improves the iterate.
fn newton_step(log_kernel: &Array2<f64>, r: &[f64], c: &[f64], f: &mut [f64], g: &mut [f64]) -> bool {
    let (m, n) = log_kernel.dim();
    let plan = plan_from(log_kernel, f, g);
    let rows = plan.sum_axis(Axis(1));
    let cols = plan.sum_axis(Axis(0));
    let size = m + n - 1;
    let mut hessian = DMatrix::<f64>::zeros(size, size);
    let mut grad = DVector::<f64>::zeros(size);
    for i in 0..m {
        hessian[(i, i)] = rows[i];
        grad[i] = r[i] - rows[i];
        for j in 0..n - 1 {
            hessian[(i, m + j)] = plan[(i, j)];
            hessian[(m + j, i)] = plan[(i, j)];
        }
    }
    for j in 0..n - 1 {
        hessian[(m + j, m + j)] = cols[j];
        grad[m + j] = c[j] - cols[j];
    }
    let step = match hessian.clone().cholesky() {
        Some(chol) => chol.solve(&grad),
        None => {
            let ridge = 1e-12 * hessian.trace().max(1e-300);
            match (hessian + DMatrix::identity(size, size) * ridge).cholesky() {
                Some(chol) => chol.solve(&grad),
                None => return false,
            }
        }
    };
    if step.iter().any(|x| !x.is_finite()) {
        return false;
    }

    let base = dual(log_kernel, r, c, f, g);
    let base_violation = marginal_violation(plan.view(), r, c);
    let slope = grad.dot(&step);
    let mut t = 1.0;
    for _ in 0..40 {
        let nf: Vec<f64> = (0..m).map(|i| f[i] + t * step[i]).collect();
        let ng: Vec<f64> = (0..n).map(|j| if j < n - 1 { g[j] + t * step[m + j] } else { g[j] }).collect();
        let value = dual(log_kernel, r, c, &nf, &ng);
        let improved = value >= base + 1e-4 * t * slope
            || marginal_violation(plan_from(log_kernel, &nf, &ng).view(), r, c) < base_violation;
        if value.is_finite() && improved {
            f.copy_from_slice(&nf);
            g.copy_from_slice(&ng);
            return true;
        }
        t *= 0.5;
    }
    false
}
