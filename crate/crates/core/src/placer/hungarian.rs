//! Minimum-cost bipartite assignment (Hungarian method with potentials).
//!
//! Dense O(n²·m) shortest-augmenting-path formulation for an `n × m` matrix
//! with `n ≤ m`; taller matrices are solved on their transpose. Reduced
//! costs are tracked as `Option<T>` so no "infinity" sentinel is needed,
//! which keeps the solver exact for integer and rational costs.

use thiserror::Error;

use crate::scalar::Cost;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("cost matrix must have at least one row and one column")]
    Empty,
    #[error("row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("entry ({row}, {col}) is negative or not finite")]
    Inadmissible { row: usize, col: usize },
}

/// Optimal matching of rows (predictions) to columns (pseudo boxes).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `row_to_col[r]` is the column matched to row `r`, if any.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the selected entries, accumulated in row order.
    pub total_cost: T,
}

impl<T: Copy> Assignment<T> {
    /// Matched `(row, col)` pairs in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().enumerate().filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    pub fn len(&self) -> usize {
        self.row_to_col.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn validate<T: Cost>(costs: &[Vec<T>]) -> Result<usize, AssignmentError> {
    let m = costs.first().map(Vec::len).unwrap_or(0);
    if costs.is_empty() || m == 0 {
        return Err(AssignmentError::Empty);
    }
    for (row, r) in costs.iter().enumerate() {
        if r.len() != m {
            return Err(AssignmentError::Ragged { row, expected: m, got: r.len() });
        }
        if let Some(col) = r.iter().position(|c| !c.is_admissible()) {
            return Err(AssignmentError::Inadmissible { row, col });
        }
    }
    Ok(m)
}

/// Solves the rectangular assignment problem, matching `min(n, m)` pairs.
pub fn hungarian_match<T: Cost>(costs: &[Vec<T>]) -> Result<Assignment<T>, AssignmentError> {
    let m = validate(costs)?;
    let n = costs.len();
    let row_to_col = if n <= m {
        solve_wide(n, m, |i, j| costs[i][j])
    } else {
        let col_to_row = solve_wide(m, n, |i, j| costs[j][i]);
        let mut rows = vec![None; n];
        for (c, r) in col_to_row.into_iter().enumerate() {
            if let Some(r) = r {
                rows[r] = Some(c);
            }
        }
        rows
    };
    let total_cost = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| costs[r][c]))
        .fold(T::zero(), |acc, c| acc + c);
    Ok(Assignment { row_to_col, total_cost })
}

fn solve_wide<T: Cost>(n: usize, m: usize, cost: impl Fn(usize, usize) -> T) -> Vec<Option<usize>> {
    debug_assert!(n <= m);
    // 1-based: index 0 is the virtual source column/row.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv: Vec<Option<T>> = vec![None; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if minv[j].is_none_or(|mv| cur < mv) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].unwrap();
                if delta.is_none_or(|d| mj < d) {
                    delta = Some(mj);
                    j1 = j;
                }
            }
            let delta = delta.expect("n <= m leaves a free column");
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else if let Some(mv) = minv[j] {
                    minv[j] = Some(mv - delta);
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

    let mut row_to_col = vec![None; n];
    for j in 1..=m {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = Some(j - 1);
        }
    }
    row_to_col
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    #[test]
    fn two_by_two() {
        let a = hungarian_match(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a.row_to_col, vec![Some(0), Some(1)]);
        assert_eq!(a.total_cost, 2.0);
        let b = hungarian_match(&[vec![3i64, 1], vec![1, 3]]).unwrap();
        assert_eq!(b.row_to_col, vec![Some(1), Some(0)]);
        assert_eq!(b.total_cost, 2);
    }

    #[test]
    fn zero_diagonal_gives_identity() {
        let n = 6;
        let c: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 + (i * j) as f64 }).collect()).collect();
        let a = hungarian_match(&c).unwrap();
        assert_eq!(a.row_to_col, (0..n).map(Some).collect::<Vec<_>>());
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn rectangular_matches_min_side() {
        let wide = vec![vec![5, 1, 9], vec![4, 8, 2]];
        let a = hungarian_match(&wide).unwrap();
        assert_eq!(a.row_to_col, vec![Some(1), Some(2)]);
        assert_eq!(a.total_cost, 3);
        let tall: Vec<Vec<i64>> = (0..3).map(|j| wide.iter().map(|r| r[j]).collect()).collect();
        let b = hungarian_match(&tall).unwrap();
        assert_eq!(b.row_to_col, vec![None, Some(0), Some(1)]);
        assert_eq!(b.total_cost, 3);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(hungarian_match::<f64>(&[]).unwrap_err(), AssignmentError::Empty);
        assert_eq!(hungarian_match(&[vec![1.0], vec![f64::NAN]]).unwrap_err(), AssignmentError::Inadmissible { row: 1, col: 0 });
        assert_eq!(hungarian_match(&[vec![-1.0]]).unwrap_err(), AssignmentError::Inadmissible { row: 0, col: 0 });
        assert!(matches!(hungarian_match(&[vec![1.0, 2.0], vec![1.0]]), Err(AssignmentError::Ragged { .. })));
    }

    #[test]
    fn rational_costs_are_exact() {
        let c = vec![
            vec![Ratio::new(1i64, 3), Ratio::new(1, 2), Ratio::new(2, 7)],
            vec![Ratio::new(1, 5), Ratio::new(1, 9), Ratio::new(3, 4)],
            vec![Ratio::new(2, 3), Ratio::new(1, 6), Ratio::new(1, 8)],
        ];
        let a = hungarian_match(&c).unwrap();
        assert_eq!(a.total_cost, brute::min_assignment_cost(&c));
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<u16>>> {
        (1usize..6, 1usize..6).prop_flat_map(|(n, m)| proptest::collection::vec(proptest::collection::vec(0u16..50, m), n))
    }

    proptest! {
        #[test]
        fn integer_matches_brute_force(c in matrix()) {
            let c: Vec<Vec<i64>> = c.into_iter().map(|r| r.into_iter().map(i64::from).collect()).collect();
            let a = hungarian_match(&c).unwrap();
            prop_assert_eq!(a.total_cost, brute::min_assignment_cost(&c));
            prop_assert_eq!(a.len(), c.len().min(c[0].len()));
            let mut cols: Vec<usize> = a.pairs().map(|(_, j)| j).collect();
            cols.sort_unstable();
            cols.dedup();
            prop_assert_eq!(cols.len(), a.len());
        }

        #[test]
        fn positive_scaling_keeps_permutation(c in matrix(), k in 1i64..20) {
            let c: Vec<Vec<i64>> = c.into_iter().map(|r| r.into_iter().map(i64::from).collect()).collect();
            let scaled: Vec<Vec<i64>> = c.iter().map(|r| r.iter().map(|v| v * k).collect()).collect();
            let a = hungarian_match(&c).unwrap();
            let b = hungarian_match(&scaled).unwrap();
            prop_assert_eq!(a.row_to_col, b.row_to_col);
            prop_assert_eq!(a.total_cost * k, b.total_cost);
        }
    }
}
