//! Transportation simplex: north-west corner start, MODI pricing, and
//! cycle pivots along the basis tree.
//!
//! Basis cells form a spanning tree of the bipartite row/column graph (`m +
//! n - 1` cells, zero-flow cells allowed). Each pivot prices every non-basic
//! cell against the dual potentials, brings in the most negative one, and
//! pushes flow around the unique cycle it closes. After a run of degenerate
//! pivots the pricing switches to Bland's rule so it cannot cycle.

use std::collections::VecDeque;

use ndarray::Array2;

use super::{check_marginals, trivial_plan, CostMatrix, TransportPlan};
use crate::error::Result;

const REDUCED_COST_EPS: f64 = 1e-12;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

/// Minimizes `sum_ij plan_ij cost_ij` over plans with row sums `rows` and
/// column sums `cols`. Returns an optimal vertex.
pub fn solve_exact_ot(cost: &CostMatrix, rows: &[f64], cols: &[f64]) -> Result<TransportPlan> {
    check_marginals(cost.dim(), rows, cols)?;
    if let Some(plan) = trivial_plan(rows, cols) {
        return Ok(plan);
    }
    let mut simplex = Simplex::north_west(cost, rows, cols);
    simplex.optimize();
    Ok(TransportPlan {
        matrix: simplex.flow,
        rows: rows.to_vec(),
        cols: cols.to_vec(),
    })
}

struct Simplex<'a> {
    cost: &'a CostMatrix,
    m: usize,
    n: usize,
    flow: Array2<f64>,
    basic: Array2<bool>,
    /// Basis-tree adjacency: nodes `0..m` are rows, `m..m+n` are columns.
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn north_west(cost: &'a CostMatrix, rows: &[f64], cols: &[f64]) -> Self {
        let (m, n) = cost.dim();
        // balance column total onto the row total
        let row_total: f64 = rows.iter().sum();
        let col_total: f64 = cols.iter().sum();
        let mut supply = rows.to_vec();
        let mut demand: Vec<f64> = cols.iter().map(|c| c * row_total / col_total).collect();

        let mut s = Simplex {
            cost,
            m,
            n,
            flow: Array2::zeros((m, n)),
            basic: Array2::from_elem((m, n), false),
            adj: vec![Vec::new(); m + n],
            u: vec![0.0; m],
            v: vec![0.0; n],
        };
        let (mut i, mut j) = (0, 0);
        loop {
            let last = i == m - 1 && j == n - 1;
            let x = if last { supply[i].max(0.0) } else { supply[i].min(demand[j]).max(0.0) };
            s.flow[(i, j)] = x;
            s.add_basic(i, j);
            if last {
                break;
            }
            supply[i] -= x;
            demand[j] -= x;
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        s
    }

    fn add_basic(&mut self, i: usize, j: usize) {
        self.basic[(i, j)] = true;
        self.adj[i].push(self.m + j);
        self.adj[self.m + j].push(i);
    }

    fn remove_basic(&mut self, i: usize, j: usize) {
        self.basic[(i, j)] = false;
        let col = self.m + j;
        self.adj[i].retain(|&x| x != col);
        self.adj[col].retain(|&x| x != i);
    }

    fn compute_potentials(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &next in &self.adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < m {
                    let j = next - m;
                    self.v[j] = self.cost[(node, j)] - self.u[node];
                } else {
                    let j = node - m;
                    self.u[next] = self.cost[(next, j)] - self.v[j];
                }
                queue.push_back(next);
            }
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.m {
            for j in 0..self.n {
                if self.basic[(i, j)] {
                    continue;
                }
                let reduced = self.cost[(i, j)] - self.u[i] - self.v[j];
                if reduced < -REDUCED_COST_EPS {
                    if bland {
                        return Some((i, j));
                    }
                    if best.is_none_or(|(b, _, _)| reduced < b) {
                        best = Some((reduced, i, j));
                    }
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }

    /// Tree path from row `i` to column `j` as a list of cells.
    fn path(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let total = self.m + self.n;
        let mut parent = vec![usize::MAX; total];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        let target = self.m + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &next in &self.adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let prev = parent[node];
            let cell = if prev < self.m { (prev, node - self.m) } else { (node, prev - self.m) };
            cells.push(cell);
            node = prev;
        }
        // cells run from column j back to row i
        cells
    }

    fn optimize(&mut self) {
        let mut degenerate_run = 0;
        let max_pivots = 50 * (self.m * self.n).max(100);
        for _ in 0..max_pivots {
            self.compute_potentials();
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let Some((ei, ej)) = self.entering(bland) else {
                return;
            };
            // Cycle: entering cell (+), then path cells from column ej back to
            // row ei alternating (-), (+), ..., (-).
            let path = self.path(ei, ej);
            let mut theta = f64::INFINITY;
            let mut leaving = None;
            for (k, &(i, j)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    let f = self.flow[(i, j)];
                    let better = match leaving {
                        None => true,
                        Some(l) => f < theta || (bland && f == theta && (i, j) < l),
                    };
                    if better {
                        theta = f;
                        leaving = Some((i, j));
                    }
                }
            }
            let (li, lj) = leaving.expect("cycle has a decreasing cell");
            for (k, &(i, j)) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[(i, j)] = (self.flow[(i, j)] - theta).max(0.0);
                } else {
                    self.flow[(i, j)] += theta;
                }
            }
            self.flow[(ei, ej)] = theta;
            self.flow[(li, lj)] = 0.0;
            self.remove_basic(li, lj);
            self.add_basic(ei, ej);
            if theta == 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }
}
