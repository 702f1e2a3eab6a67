//! Exact rational primal simplex for equality-form linear programs.
//!
//! Solves `max c.x  s.t.  A x = b, x >= 0` over exact rationals with a
//! two-phase method. Pricing is largest-coefficient with an automatic switch
//! to Bland's rule after a run of degenerate pivots, which guarantees
//! termination. Redundant rows are tolerated: any row whose artificial
//! variable cannot be pivoted out after phase one is dropped.

use crate::ratio::Q;

#[derive(Debug, Clone)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, Q)>,
    pub rhs: Q,
}

#[derive(Debug)]
pub enum SimplexOutcome {
    Optimal { value: Q, solution: Vec<Q>, pivots: u64 },
    Infeasible,
    Unbounded,
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: u32 = 24;

#[derive(Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Structural(usize),
    Artificial(usize),
}

impl BasisVar {
    /// Index in the Bland ordering: structural variables first.
    fn order(&self, n: usize) -> usize {
        match self {
            BasisVar::Structural(j) => *j,
            BasisVar::Artificial(i) => n + i,
        }
    }
}

struct Tableau {
    n: usize,
    rows: Vec<Vec<Q>>, // m rows, n structural columns
    rhs: Vec<Q>,
    basis: Vec<BasisVar>,
    obj: Vec<Q>, // reduced-cost row
    obj_value: Q,
    pivots: u64,
    degenerate_run: u32,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.rows[row][col].clone();
        debug_assert!(!pivot.is_zero());
        if pivot != Q::ONE {
            for v in self.rows[row].iter_mut() {
                if !v.is_zero() {
                    *v /= &pivot;
                }
            }
            self.rhs[row] /= &pivot;
        }
        let touched: Vec<usize> =
            (0..self.n).filter(|&j| !self.rows[row][j].is_zero()).collect();
        let pivot_row = std::mem::take(&mut self.rows[row]);
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col].clone();
            if factor.is_zero() {
                continue;
            }
            for &j in &touched {
                let delta = &factor * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            if !pivot_rhs.is_zero() {
                self.rhs[i] -= &factor * &pivot_rhs;
            }
        }
        let factor = self.obj[col].clone();
        if !factor.is_zero() {
            for &j in &touched {
                let delta = &factor * &pivot_row[j];
                self.obj[j] -= delta;
            }
            // entering variable takes value pivot_rhs, improving the
            // objective by its reduced cost times that value
            if !pivot_rhs.is_zero() {
                self.obj_value += &factor * &pivot_rhs;
            }
        }
        self.rows[row] = pivot_row;
        self.basis[row] = BasisVar::Structural(col);
        self.pivots += 1;
    }

    /// One phase of primal iterations on the current objective row.
    /// Returns false when the column choice found no pivot row (unbounded).
    fn optimize(&mut self) -> bool {
        let trace = std::env::var_os("CHORDALCERT_LP_TRACE").is_some();
        let start = std::time::Instant::now();
        loop {
            if trace && self.pivots % 500 == 0 {
                let small = self
                    .rows
                    .iter()
                    .flat_map(|r| r.iter())
                    .filter(|q| !q.is_zero())
                    .count();
                eprintln!(
                    "lp trace: pivots={} degenerate_run={} nonzeros={} obj={} t={:?}",
                    self.pivots, self.degenerate_run, small, self.obj_value, start.elapsed()
                );
            }
            let col = if self.degenerate_run >= DEGENERATE_LIMIT {
                // Bland: smallest improving index
                (0..self.n).find(|&j| self.obj[j].is_positive())
            } else {
                // Dantzig: most positive reduced cost, smallest index on ties
                let mut best: Option<usize> = None;
                for j in 0..self.n {
                    if self.obj[j].is_positive()
                        && best.map_or(true, |b| self.obj[j] > self.obj[b])
                    {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = col else { return true };
            // ratio test; ties broken by Bland order of the leaving variable
            let mut row: Option<(usize, Q)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &row {
                    None => true,
                    Some((r, best)) => {
                        ratio < *best
                            || (ratio == *best
                                && self.basis[i].order(self.n) < self.basis[*r].order(self.n))
                    }
                };
                if better {
                    row = Some((i, ratio));
                }
            }
            let Some((row, ratio)) = row else { return false };
            if ratio.is_zero() {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(row, col);
        }
    }
}

/// Maximize `objective . x` subject to `rows` as equalities and `x >= 0`.
pub fn solve_max(num_vars: usize, rows: &[SparseRow], objective: &[Q]) -> SimplexOutcome {
    assert_eq!(objective.len(), num_vars);
    let m = rows.len();
    let mut t = Tableau {
        n: num_vars,
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: (0..m).map(BasisVar::Artificial).collect(),
        obj: vec![Q::ZERO; num_vars],
        obj_value: Q::ZERO,
        pivots: 0,
        degenerate_run: 0,
    };
    for r in rows {
        let mut dense = vec![Q::ZERO; num_vars];
        for (j, c) in &r.coeffs {
            dense[*j] += c;
        }
        let mut rhs = r.rhs.clone();
        if rhs.is_negative() {
            for v in dense.iter_mut() {
                *v = -&*v;
            }
            rhs = -rhs;
        }
        t.rows.push(dense);
        t.rhs.push(rhs);
    }

    // Phase one: maximize -(sum of artificials). With the artificial basis the
    // reduced-cost row is the column sum of A and the objective value is
    // -(sum of b).
    for j in 0..t.n {
        let mut s = Q::ZERO;
        for row in &t.rows {
            s += &row[j];
        }
        t.obj[j] = s;
    }
    for b in &t.rhs {
        t.obj_value -= b;
    }
    if !t.optimize() {
        unreachable!("phase one objective is bounded above by zero");
    }
    if t.obj_value.is_negative() {
        return SimplexOutcome::Infeasible;
    }
    // Drive remaining artificials out of the basis; rows that cannot pivot on
    // any structural column are redundant and get dropped.
    let mut drop_rows = Vec::new();
    for i in 0..t.rows.len() {
        if let BasisVar::Artificial(_) = t.basis[i] {
            debug_assert!(t.rhs[i].is_zero());
            match (0..t.n).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => drop_rows.push(i),
            }
        }
    }
    for &i in drop_rows.iter().rev() {
        t.rows.remove(i);
        t.rhs.remove(i);
        t.basis.remove(i);
    }

    // Phase two: true objective expressed in the current basis.
    t.obj = objective.to_vec();
    t.obj_value = Q::ZERO;
    for (i, bv) in t.basis.iter().enumerate() {
        let BasisVar::Structural(jb) = bv else { unreachable!("artificials eliminated") };
        let c = objective[*jb].clone();
        if c.is_zero() {
            continue;
        }
        for j in 0..t.n {
            if !t.rows[i][j].is_zero() {
                let delta = &c * &t.rows[i][j];
                t.obj[j] -= delta;
            }
        }
        t.obj_value += &c * &t.rhs[i];
    }
    // basic columns now have zero reduced cost by construction
    t.degenerate_run = 0;
    if !t.optimize() {
        return SimplexOutcome::Unbounded;
    }

    let mut x = vec![Q::ZERO; t.n];
    for (i, bv) in t.basis.iter().enumerate() {
        if let BasisVar::Structural(j) = bv {
            x[*j] = t.rhs[i].clone();
        }
    }
    SimplexOutcome::Optimal { value: t.obj_value, solution: x, pivots: t.pivots }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, i64)], rhs: i64) -> SparseRow {
        SparseRow {
            coeffs: coeffs.iter().map(|&(j, c)| (j, Q::from_int(c))).collect(),
            rhs: Q::from_int(rhs),
        }
    }

    fn optimum(out: SimplexOutcome) -> (Q, Vec<Q>) {
        match out {
            SimplexOutcome::Optimal { value, solution, .. } => (value, solution),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn simplex_on_a_simplex() {
        // max x0 + 2 x1 over the probability simplex of 3 variables
        let rows = vec![row(&[(0, 1), (1, 1), (2, 1)], 1)];
        let obj = vec![Q::from_int(1), Q::from_int(2), Q::ZERO];
        let (v, x) = optimum(solve_max(3, &rows, &obj));
        assert_eq!(v, Q::from_int(2));
        assert_eq!(x[1], Q::ONE);
    }

    #[test]
    fn two_constraints_with_slacks() {
        // max 3x + 2y  s.t.  x + y <= 4, x + 2y <= 6 (slacks s, t)
        let rows = vec![row(&[(0, 1), (1, 1), (2, 1)], 4), row(&[(0, 1), (1, 2), (3, 1)], 6)];
        let obj = vec![Q::from_int(3), Q::from_int(2), Q::ZERO, Q::ZERO];
        let (v, x) = optimum(solve_max(4, &rows, &obj));
        assert_eq!(v, Q::from_int(12));
        assert_eq!(x[0], Q::from_int(4));
        assert_eq!(x[1], Q::ZERO);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        // the same constraint twice plus its double
        let rows = vec![
            row(&[(0, 1), (1, 1)], 1),
            row(&[(0, 1), (1, 1)], 1),
            row(&[(0, 2), (1, 2)], 2),
        ];
        let obj = vec![Q::from_int(5), Q::from_int(1)];
        let (v, _) = optimum(solve_max(2, &rows, &obj));
        assert_eq!(v, Q::from_int(5));
    }

    #[test]
    fn infeasible_system() {
        let rows = vec![row(&[(0, 1), (1, 1)], 1), row(&[(0, 1), (1, 1)], 2)];
        let obj = vec![Q::ONE, Q::ONE];
        assert!(matches!(solve_max(2, &rows, &obj), SimplexOutcome::Infeasible));
    }

    #[test]
    fn unbounded_program() {
        // x - y = 0 leaves the ray x = y -> objective x + y unbounded
        let rows = vec![row(&[(0, 1), (1, -1)], 0)];
        let obj = vec![Q::ONE, Q::ONE];
        assert!(matches!(solve_max(2, &rows, &obj), SimplexOutcome::Unbounded));
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // -x - y = -1 is the simplex again
        let rows = vec![row(&[(0, -1), (1, -1)], -1)];
        let obj = vec![Q::from_int(2), Q::ONE];
        let (v, _) = optimum(solve_max(2, &rows, &obj));
        assert_eq!(v, Q::from_int(2));
    }

    #[test]
    fn fractional_optimum_is_exact() {
        // max y  s.t.  3y + x = 1  ->  y = 1/3
        let rows = vec![row(&[(0, 1), (1, 3)], 1)];
        let obj = vec![Q::ZERO, Q::ONE];
        let (v, x) = optimum(solve_max(2, &rows, &obj));
        assert_eq!(v, Q::new(1, 3));
        assert_eq!(x[1], Q::new(1, 3));
    }
}
