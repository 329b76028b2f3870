//! Minimum-cost rectangular assignment (Kuhn–Munkres in matrix form).
//!
//! Rows are measured objects and columns are predictions. The solver first
//! subtracts each row minimum and then each column minimum; those reductions
//! seed the dual potentials of a shortest-augmenting-path Hungarian method,
//! which completes the assignment in `O(k³)` for `k = max(rows, cols)`.
//! Rectangular inputs are padded to square with a sentinel cost.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("cost matrix must have at least one row and one column")]
    Empty,
    #[error("expected {expected} costs, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("invalid cost {value} at ({row}, {col}); costs must be finite and nonnegative")]
    InvalidCost { row: usize, col: usize, value: f64 },
}

/// A dense nonnegative `rows×cols` cost grid, row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    cost: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, cost: Vec<f64>) -> Result<Self, AssignmentError> {
        if cost.len() != rows * cols {
            return Err(AssignmentError::DataLength {
                expected: rows * cols,
                got: cost.len(),
            });
        }
        let m = CostMatrix { rows, cols, cost };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, AssignmentError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut cost = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(AssignmentError::DataLength {
                    expected: cols,
                    got: r.len(),
                });
            }
            cost.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, cost)
    }

    /// Resizes in place, zero-filled, keeping the allocation.
    pub fn reset(&mut self, rows: usize, cols: usize) {
        self.rows = rows;
        self.cols = cols;
        self.cost.clear();
        self.cost.resize(rows * cols, 0.0);
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cost[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.cost[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.cost
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.cost
    }

    pub fn validate(&self) -> Result<(), AssignmentError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(AssignmentError::Empty);
        }
        if let Some(idx) = self.cost.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(AssignmentError::InvalidCost {
                row: idx / self.cols,
                col: idx % self.cols,
                value: self.cost[idx],
            });
        }
        Ok(())
    }

    fn max_entry(&self) -> f64 {
        self.cost.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentResult {
    /// `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    pub total_cost: f64,
}

impl AssignmentResult {
    fn clear(&mut self) {
        self.pairs.clear();
        self.unmatched_rows.clear();
        self.unmatched_cols.clear();
        self.total_cost = 0.0;
    }
}

/// Reusable scratch space for repeated solves.
#[derive(Debug, Default, Clone)]
pub struct HungarianSolver {
    square: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    col_owner: Vec<usize>,
    way: Vec<usize>,
    min_slack: Vec<f64>,
    used: Vec<bool>,
}

impl HungarianSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solves into `out`, reusing both the solver's and `out`'s buffers.
    pub fn solve_into(
        &mut self,
        c: &CostMatrix,
        out: &mut AssignmentResult,
    ) -> Result<(), AssignmentError> {
        c.validate()?;
        out.clear();
        let (n, m) = (c.rows, c.cols);
        let k = n.max(m);
        let sentinel = 1.0 + (n * m) as f64 * c.max_entry();

        self.square.clear();
        self.square.resize(k * k, sentinel);
        for i in 0..n {
            self.square[i * k..i * k + m].copy_from_slice(&c.cost[i * m..(i + 1) * m]);
        }
        self.run(k);

        // col_owner is 1-based: col_owner[j + 1] = row + 1.
        for j in 0..k {
            let i = self.col_owner[j + 1] - 1;
            // Reuse `way` as the row -> col map; it is dead after `run`.
            self.way[i] = j;
        }
        for i in 0..n {
            let j = self.way[i];
            if j < m {
                out.pairs.push((i, j));
                out.total_cost += c.get(i, j);
            } else {
                out.unmatched_rows.push(i);
            }
        }
        for j in 0..m {
            if self.col_owner[j + 1] - 1 >= n {
                out.unmatched_cols.push(j);
            }
        }
        Ok(())
    }

    /// Square Hungarian method on `self.square` (`k×k`), leaving the optimal
    /// matching in `col_owner`.
    fn run(&mut self, k: usize) {
        let a = &self.square;
        self.u.clear();
        self.u.resize(k + 1, 0.0);
        self.v.clear();
        self.v.resize(k + 1, 0.0);
        self.col_owner.clear();
        self.col_owner.resize(k + 1, 0);
        self.way.clear();
        self.way.resize(k + 1, 0);
        self.min_slack.resize(k + 1, 0.0);
        self.used.resize(k + 1, false);
        let (u, v, p, way, minv, used) = (
            &mut self.u,
            &mut self.v,
            &mut self.col_owner,
            &mut self.way,
            &mut self.min_slack,
            &mut self.used,
        );

        // Row reduction, then column reduction, as feasible starting duals.
        for i in 0..k {
            u[i + 1] = a[i * k..(i + 1) * k].iter().copied().fold(f64::INFINITY, f64::min);
        }
        for j in 0..k {
            v[j + 1] = (0..k)
                .map(|i| a[i * k + j] - u[i + 1])
                .fold(f64::INFINITY, f64::min);
        }

        for i in 1..=k {
            p[0] = i;
            let mut j0 = 0usize;
            minv.iter_mut().for_each(|x| *x = f64::INFINITY);
            used.iter_mut().for_each(|x| *x = false);
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                let row = &a[(i0 - 1) * k..i0 * k];
                for j in 1..=k {
                    if used[j] {
                        continue;
                    }
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for j in 0..=k {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
    }
}

/// Optimal assignment of `c`.
///
/// `total_cost` is the minimum over all matchings of size `min(rows, cols)`.
/// Among equal-cost alternatives the lowest column index wins, so the
/// result is deterministic.
pub fn solve(c: &CostMatrix) -> Result<AssignmentResult, AssignmentError> {
    solve_rectangular_padded(c)
}

/// Pads `c` to square with sentinel `1 + rows·cols·max(c)`, solves, and
/// moves sentinel pairs to the unmatched lists.
pub fn solve_rectangular_padded(c: &CostMatrix) -> Result<AssignmentResult, AssignmentError> {
    let mut out = AssignmentResult::default();
    HungarianSolver::new().solve_into(c, &mut out)?;
    Ok(out)
}
