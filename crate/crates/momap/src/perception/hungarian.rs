//! Minimum-cost assignment (Hungarian / Jonker-Volgenant style) with a
//! `FORBIDDEN` sentinel and deterministic lexicographic tie resolution.

use thiserror::Error;

/// Sentinel marking a pair that must never be selected.
pub const FORBIDDEN: f64 = f64::INFINITY;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix dimensions ({rows}x{cols}) do not match {len} entries")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("cost entry at ({row},{col}) must be finite and non-negative or FORBIDDEN")]
    InvalidEntry { row: usize, col: usize },
    #[error("no feasible assignment: FORBIDDEN entries block every complete matching")]
    Infeasible,
}

/// Dense rectangular cost matrix; rows are tracks, columns observations.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if data.len() != rows * cols {
            return Err(AssignmentError::ShapeMismatch { rows, cols, len: data.len() });
        }
        for (i, &v) in data.iter().enumerate() {
            let ok = v == FORBIDDEN || (v.is_finite() && v >= 0.0);
            if !ok {
                return Err(AssignmentError::InvalidEntry { row: i / cols, col: i % cols });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows_data: Vec<Vec<f64>>) -> Result<Self, AssignmentError> {
        let rows = rows_data.len();
        let cols = rows_data.first().map_or(0, |r| r.len());
        let data: Vec<f64> = rows_data.into_iter().flatten().collect();
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Shortest-augmenting-path solve over an implicit submatrix given by
/// `row_ids`/`col_ids` index lists. Requires `row_ids.len() <= col_ids.len()`;
/// assigns every listed row. Returns `(row -> position in col_ids, value)`.
fn jv_solve(
    cost: &CostMatrix,
    row_ids: &[usize],
    col_ids: &[usize],
    transposed: bool,
) -> Option<(Vec<usize>, f64)> {
    let n = row_ids.len();
    let m = col_ids.len();
    debug_assert!(n <= m);
    if n == 0 {
        return Some((Vec::new(), 0.0));
    }
    let at = |ri: usize, cj: usize| -> f64 {
        if transposed {
            cost.get(col_ids[cj], row_ids[ri])
        } else {
            cost.get(row_ids[ri], col_ids[cj])
        }
    };

    // 1-indexed potentials; p[j] = row matched to column j (0 = none).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let c = at(i0 - 1, j - 1);
                let cur = if c == FORBIDDEN { f64::INFINITY } else { c - u[i0] - v[j] };
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return None; // every augmenting edge is forbidden
            }
            for j in 0..=m {
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

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let mut total = 0.0;
    for (ri, &cj) in row_to_col.iter().enumerate() {
        let c = at(ri, cj);
        if c == FORBIDDEN {
            return None;
        }
        total += c;
    }
    Some((row_to_col, total))
}

/// Optimal value of the subproblem on `row_ids` x `col_ids` where every
/// element of the shorter side gets assigned.
fn subproblem_value(cost: &CostMatrix, row_ids: &[usize], col_ids: &[usize]) -> Option<f64> {
    if row_ids.len() <= col_ids.len() {
        jv_solve(cost, row_ids, col_ids, false).map(|(_, v)| v)
    } else {
        jv_solve(cost, col_ids, row_ids, true).map(|(_, v)| v)
    }
}

/// Exhaustive lexicographic refinement is only worthwhile on small
/// matrices; above this size the (deterministic) augmenting-path solution
/// is returned as-is, which is still optimal but breaks exact ties in
/// solver order rather than lexicographic order.
const EXACT_TIE_LIMIT: usize = 12;

/// Optimal assignment over `min(rows, cols)` pairs.
///
/// `FORBIDDEN` pairs are never selected; among equal-cost optima the
/// lexicographically smallest (row, col) sequence is returned.
pub fn solve_assignment(cost: &CostMatrix) -> Result<Vec<(usize, usize)>, AssignmentError> {
    let (rows, cols) = (cost.rows, cost.cols);
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }

    let all_rows: Vec<usize> = (0..rows).collect();
    let all_cols: Vec<usize> = (0..cols).collect();
    let base = if rows <= cols {
        jv_solve(cost, &all_rows, &all_cols, false).map(|(rc, v)| {
            (rc.iter().enumerate().map(|(r, &c)| (r, c)).collect::<Vec<_>>(), v)
        })
    } else {
        jv_solve(cost, &all_cols, &all_rows, true).map(|(cr, v)| {
            let mut pairs: Vec<(usize, usize)> =
                cr.iter().enumerate().map(|(c, &r)| (r, c)).collect();
            pairs.sort_unstable();
            (pairs, v)
        })
    };
    let (base_pairs, v_star) = base.ok_or(AssignmentError::Infeasible)?;

    let k = rows.min(cols);
    if rows.max(cols) > EXACT_TIE_LIMIT {
        return Ok(base_pairs);
    }

    let tol = 1e-9 * (1.0 + v_star.abs());
    let base_col_of_row: Vec<Option<usize>> = {
        let mut m = vec![None; rows];
        for &(r, c) in &base_pairs {
            m[r] = Some(c);
        }
        m
    };

    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut avail_cols: Vec<usize> = (0..cols).collect();
    let mut prefix = 0.0f64;

    for r in 0..rows {
        if fixed.len() == k {
            break;
        }
        let rest_rows: Vec<usize> = (r + 1..rows).collect();
        // Try columns in ascending order; the first one that still admits a
        // completion at the optimal value wins the tie.
        let mut chosen: Option<(usize, f64)> = None;
        let mut best_fallback: Option<(usize, f64)> = None;
        for (ci, &c) in avail_cols.iter().enumerate() {
            let edge = cost.get(r, c);
            if edge == FORBIDDEN {
                continue;
            }
            let mut rest_cols = avail_cols.clone();
            rest_cols.remove(ci);
            // Every remaining column still has to fit into a remaining row.
            if rows > cols && rest_cols.len() > rest_rows.len() {
                continue;
            }
            let Some(rest) = subproblem_value(cost, &rest_rows, &rest_cols) else {
                continue;
            };
            let total = prefix + edge + rest;
            if total <= v_star + tol {
                chosen = Some((c, edge));
                break;
            }
            if best_fallback.map_or(true, |(_, t)| total < t) {
                best_fallback = Some((c, total));
            }
        }
        if chosen.is_none() && rows <= cols {
            // Every row must be assigned; take the best column seen even if
            // rounding pushed it past the tolerance window.
            if let Some((c, _)) = best_fallback {
                chosen = Some((c, cost.get(r, c)));
            } else if let Some(c) = base_col_of_row[r] {
                chosen = Some((c, cost.get(r, c)));
            }
        }
        if rows > cols {
            let can_skip = rest_rows.len() >= avail_cols.len();
            if !can_skip && chosen.is_none() {
                if let Some((c, _)) = best_fallback {
                    chosen = Some((c, cost.get(r, c)));
                }
            }
            if can_skip {
                if let Some((c, edge)) = chosen {
                    // Skipping this row must not be strictly better.
                    if let Some(skip_v) = subproblem_value(cost, &rest_rows, &avail_cols) {
                        let mut rest_cols = avail_cols.clone();
                        rest_cols.retain(|&x| x != c);
                        let assign_v = subproblem_value(cost, &rest_rows, &rest_cols)
                            .map(|rv| edge + rv);
                        if !assign_v.is_some_and(|av| av <= skip_v + tol) {
                            chosen = None;
                        }
                    }
                }
            }
        }
        if let Some((c, edge)) = chosen {
            prefix += edge;
            fixed.push((r, c));
            avail_cols.retain(|&x| x != c);
        }
    }

    if fixed.len() != k {
        return Err(AssignmentError::Infeasible);
    }
    Ok(fixed)
}

/// Total cost of a pair list against a matrix, summed in pair order.
pub fn assignment_cost(cost: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost.get(r, c)).sum()
}
