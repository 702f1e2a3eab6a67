//! Algebraic, classical, and no-disturbance bounds of expressions.
//!
//! Classical bounds come from exhaustive enumeration of deterministic
//! assignments (mixed-radix counter in observable order, so witnesses are
//! reproducible). No-disturbance bounds come from exact rational linear
//! programming over the no-disturbance polytope: one variable per maximal
//! context and joint outcome, per-context normalization, and equal shared
//! marginals for every overlapping context pair. Redundant equality rows are
//! removed by rank filtering before the simplex runs; the returned witness is
//! then re-checked against every generated constraint with exact arithmetic,
//! which makes the filtering safe by construction.

mod simplex;



use serde::{Deserialize, Serialize};

use crate::behavior::Behavior;
use crate::ratio::Q;
use crate::scenario::{index_tuple, space_size, tuple_index, Expression, Scenario, Sense};
use crate::Error;

pub use simplex::{solve_max, SimplexOutcome, SparseRow};

/// Default ceiling on the deterministic assignment space.
pub const DEFAULT_ASSIGNMENT_BUDGET: u128 = 1 << 24;

/// A bound together with the object achieving it.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub value: Q,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone)]
pub enum Witness {
    /// One outcome per observable, in scenario index order.
    Assignment(Vec<usize>),
    Box(Behavior),
}

/// The no-disturbance polytope of a scenario in equality form.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub contexts: Vec<Vec<usize>>,
    /// Variable range of context `i` starts at `var_offsets[i]`.
    pub var_offsets: Vec<usize>,
    pub num_vars: usize,
    pub rows: Vec<LpRow>,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, Q)>,
    pub rhs: Q,
    pub kind: RowKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowKind {
    Normalization { context: usize },
    MarginalMatch { a: usize, b: usize, shared: Vec<usize> },
}

/// Exact optimum over the no-disturbance polytope with a primal witness.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub optimum: Q,
    pub witness: Behavior,
    pub stats: LpStats,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LpStats {
    pub variables: usize,
    pub rows_generated: usize,
    pub rows_used: usize,
    pub pivots: u64,
    pub refinements: u32,
}

/// Per-term independent optimization: the sum over terms of the best
/// coefficient-scaled table value (worst for minimize expressions).
pub fn algebraic_max(e: &Expression) -> Q {
    let mut total = Q::ZERO;
    for t in e.terms() {
        let (lo, hi) = t.value_range();
        total += match e.sense() {
            Sense::Maximize => hi,
            Sense::Minimize => lo,
        };
    }
    total
}

pub fn classical_max(e: &Expression) -> Result<BoundResult, Error> {
    classical_max_with_budget(e, DEFAULT_ASSIGNMENT_BUDGET)
}

/// Exact optimum of the expression over all deterministic assignments, with
/// the lexicographically smallest witness. Minimize expressions are bounded
/// from below by negating through the maximize path.
pub fn classical_max_with_budget(e: &Expression, budget: u128) -> Result<BoundResult, Error> {
    let required = e.scenario().assignment_space();
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let em = e.as_maximize();
    let scenario = em.scenario();
    let active = em.active_observables();
    let dims: Vec<usize> = active.iter().map(|&i| scenario.outcomes(i)).collect();

    // Flatten terms against positions in `active` and fold coefficients in.
    struct Flat {
        positions: Vec<usize>,
        dims: Vec<usize>,
        scaled: Vec<Q>,
    }
    let flats: Vec<Flat> = em
        .terms()
        .iter()
        .map(|t| Flat {
            positions: t
                .support()
                .iter()
                .map(|v| active.binary_search(v).expect("support is active"))
                .collect(),
            dims: t.support().iter().map(|&v| scenario.outcomes(v)).collect(),
            scaled: t.values().iter().map(|v| t.coefficient() * v).collect(),
        })
        .collect();

    let mut tuple = vec![0usize; active.len()];
    let mut best: Option<(Q, Vec<usize>)> = None;
    loop {
        let mut value = Q::ZERO;
        for f in &flats {
            let restricted: Vec<usize> = f.positions.iter().map(|&k| tuple[k]).collect();
            value += &f.scaled[tuple_index(&f.dims, &restricted)];
        }
        if best.as_ref().map_or(true, |(b, _)| value > *b) {
            best = Some((value, tuple.clone()));
        }
        // mixed-radix increment, last coordinate fastest
        let mut pos = active.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            tuple[pos] += 1;
            if tuple[pos] < dims[pos] {
                break;
            }
            tuple[pos] = 0;
            if pos == 0 {
                break;
            }
        }
        if tuple.iter().all(|&o| o == 0) {
            break;
        }
    }
    let (value, arg) = best.expect("at least one assignment");
    let mut assignment = vec![0usize; scenario.observable_count()];
    for (k, &v) in active.iter().enumerate() {
        assignment[v] = arg[k];
    }
    let value = match e.sense() {
        Sense::Maximize => value,
        Sense::Minimize => -value,
    };
    Ok(BoundResult { value, witness: Some(Witness::Assignment(assignment)) })
}

/// Constraint system of the no-disturbance polytope: normalization per
/// maximal context, then shared-marginal equality for every overlapping pair
/// of maximal contexts (redundancy included on purpose; it is filtered later).
pub fn nd_polytope(scenario: &Scenario) -> LinearProgram {
    let contexts = scenario.maximal_contexts();
    let mut var_offsets = Vec::with_capacity(contexts.len());
    let mut num_vars = 0usize;
    for ctx in &contexts {
        var_offsets.push(num_vars);
        num_vars += space_size(&dims_of(scenario, ctx));
    }
    let mut rows = Vec::new();
    for (i, ctx) in contexts.iter().enumerate() {
        let len = space_size(&dims_of(scenario, ctx));
        rows.push(LpRow {
            coeffs: (0..len).map(|k| (var_offsets[i] + k, Q::ONE)).collect(),
            rhs: Q::ONE,
            kind: RowKind::Normalization { context: i },
        });
    }
    // Pairs ordered by index distance so that chains of neighbouring contexts
    // come first; the rank filter then saturates early.
    let k = contexts.len();
    for gap in 1..k {
        for i in 0..k - gap {
            let j = i + gap;
            let shared: Vec<usize> =
                contexts[i].iter().copied().filter(|v| contexts[j].contains(v)).collect();
            if shared.is_empty() {
                continue;
            }
            let shared_dims = dims_of(scenario, &shared);
            for s_idx in 0..space_size(&shared_dims) {
                let s_tuple = index_tuple(&shared_dims, s_idx);
                let mut coeffs = Vec::new();
                collect_extension_vars(scenario, &contexts[i], var_offsets[i], &shared, &s_tuple, Q::ONE, &mut coeffs);
                collect_extension_vars(scenario, &contexts[j], var_offsets[j], &shared, &s_tuple, -Q::ONE, &mut coeffs);
                rows.push(LpRow {
                    coeffs,
                    rhs: Q::ZERO,
                    kind: RowKind::MarginalMatch { a: i, b: j, shared: shared.clone() },
                });
            }
        }
    }
    LinearProgram { contexts, var_offsets, num_vars, rows }
}

fn dims_of(scenario: &Scenario, vs: &[usize]) -> Vec<usize> {
    vs.iter().map(|&v| scenario.outcomes(v)).collect()
}

/// All context variables whose outcome tuple restricts to `s_tuple` on
/// `shared`, with the given coefficient.
fn collect_extension_vars(
    scenario: &Scenario,
    ctx: &[usize],
    offset: usize,
    shared: &[usize],
    s_tuple: &[usize],
    coeff: Q,
    out: &mut Vec<(usize, Q)>,
) {
    let dims = dims_of(scenario, ctx);
    let positions: Vec<usize> =
        shared.iter().map(|v| ctx.iter().position(|c| c == v).expect("shared within context")).collect();
    for idx in 0..space_size(&dims) {
        let tuple = index_tuple(&dims, idx);
        if positions.iter().zip(s_tuple).all(|(&p, &s)| tuple[p] == s) {
            out.push((offset + idx, coeff.clone()));
        }
    }
}

/// Affine dimension of the no-disturbance polytope: the sum over nonempty
/// cliques of the commutation graph of the product of (outcomes - 1).
fn nd_dimension(scenario: &Scenario) -> u128 {
    let graph = scenario.graph();
    let mut dim: u128 = 0;
    graph.for_each_clique(|mask| {
        let mut product: u128 = 1;
        let mut m = mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            product *= (scenario.outcomes(v) - 1) as u128;
        }
        dim += product;
    });
    dim
}

// --- mod-p rank filtering -------------------------------------------------

const FILTER_PRIME: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % FILTER_PRIME as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base);
        }
        base = mulmod(base, base);
        exp >>= 1;
    }
    acc
}

fn invmod(a: u64) -> u64 {
    powmod(a, FILTER_PRIME - 2)
}

fn q_mod_p(q: &Q) -> u64 {
    // coefficients here are small integers, but stay general
    let s = q.to_string();
    let (num, den) = s.split_once('/').expect("canonical p/q form");
    let num_mod = bigstr_mod(num);
    let den_mod = bigstr_mod(den);
    mulmod(num_mod, invmod(den_mod))
}

fn bigstr_mod(s: &str) -> u64 {
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let mut acc: u64 = 0;
    for ch in digits.bytes() {
        acc = (mulmod(acc, 10) + (ch - b'0') as u64) % FILTER_PRIME;
    }
    if neg && acc != 0 {
        FILTER_PRIME - acc
    } else {
        acc
    }
}

/// Incremental row-echelon filter over the prime field. Keeps the indices of
/// rows that are independent modulo p; stops once `target_rank` rows have
/// been kept. A row dropped here but actually independent over the rationals
/// is caught by the exact post-verification in [`nd_max`].
fn rank_filter(rows: &[LpRow], num_vars: usize, target_rank: usize) -> Vec<usize> {
    let width = num_vars + 1; // rhs folded in
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; width];
    let mut pivot_rows: Vec<Vec<u64>> = Vec::new();
    let mut kept = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        if kept.len() >= target_rank {
            break;
        }
        let mut dense = vec![0u64; width];
        for (j, c) in &row.coeffs {
            dense[*j] = (dense[*j] + q_mod_p(c)) % FILTER_PRIME;
        }
        dense[num_vars] = q_mod_p(&row.rhs);
        let mut col = 0;
        while col < width {
            if dense[col] != 0 {
                match pivot_of_col[col] {
                    Some(p) => {
                        let factor = dense[col];
                        let prow = &pivot_rows[p];
                        for j in col..width {
                            if prow[j] != 0 {
                                let sub = mulmod(factor, prow[j]);
                                dense[j] = (dense[j] + FILTER_PRIME - sub) % FILTER_PRIME;
                            }
                        }
                    }
                    None => {
                        let inv = invmod(dense[col]);
                        for j in col..width {
                            if dense[j] != 0 {
                                dense[j] = mulmod(dense[j], inv);
                            }
                        }
                        pivot_of_col[col] = Some(pivot_rows.len());
                        pivot_rows.push(dense);
                        kept.push(ri);
                        break;
                    }
                }
            }
            col += 1;
        }
    }
    kept
}

/// Exact optimum of the expression over the no-disturbance polytope, via
/// exact rational simplex, with the primal witness returned as a behavior.
/// The witness is re-verified against every generated polytope row; any
/// violated row is added back and the solve repeats, so the result is exact
/// regardless of the probabilistic row filter.
pub fn nd_max(e: &Expression) -> Result<LpSolution, Error> {
    let em = e.as_maximize();
    let scenario = em.scenario().clone();
    let lp = nd_polytope(&scenario);
    if lp.contexts.is_empty() {
        return Err(Error::BadInput("scenario has no contexts".into()));
    }

    // objective over polytope variables; every term lands in its first
    // containing maximal context
    let mut objective = vec![Q::ZERO; lp.num_vars];
    for term in em.terms() {
        let ctx_idx = lp
            .contexts
            .iter()
            .position(|c| term.support().iter().all(|v| c.contains(v)))
            .ok_or_else(|| {
                Error::TermNotInContext(scenario.indices_to_ids(term.support()).join(","))
            })?;
        let ctx = &lp.contexts[ctx_idx];
        let dims = dims_of(&scenario, ctx);
        let positions: Vec<usize> = term
            .support()
            .iter()
            .map(|v| ctx.iter().position(|c| c == v).expect("support within context"))
            .collect();
        let sup_dims = dims_of(&scenario, term.support());
        for idx in 0..space_size(&dims) {
            let tuple = index_tuple(&dims, idx);
            let restricted: Vec<usize> = positions.iter().map(|&k| tuple[k]).collect();
            let v = &term.values()[tuple_index(&sup_dims, &restricted)];
            if !v.is_zero() {
                objective[lp.var_offsets[ctx_idx] + idx] += term.coefficient() * v;
            }
        }
    }

    let dim = nd_dimension(&scenario).min(lp.num_vars as u128) as usize;
    let target_rank = lp.num_vars - dim;
    let mut kept = rank_filter(&lp.rows, lp.num_vars, target_rank);

    let mut refinements = 0u32;
    loop {
        let rows: Vec<SparseRow> = kept
            .iter()
            .map(|&ri| SparseRow { coeffs: lp.rows[ri].coeffs.clone(), rhs: lp.rows[ri].rhs.clone() })
            .collect();
        let outcome = solve_max(lp.num_vars, &rows, &objective);
        let (value, solution, pivots) = match outcome {
            SimplexOutcome::Optimal { value, solution, pivots } => (value, solution, pivots),
            SimplexOutcome::Infeasible => return Err(Error::LpInfeasible),
            SimplexOutcome::Unbounded => return Err(Error::LpUnbounded),
        };

        let violated: Vec<usize> = lp
            .rows
            .iter()
            .enumerate()
            .filter(|(_, row)| {
                let mut lhs = Q::ZERO;
                for (j, c) in &row.coeffs {
                    if !solution[*j].is_zero() {
                        lhs += c * &solution[*j];
                    }
                }
                lhs != row.rhs
            })
            .map(|(ri, _)| ri)
            .collect();
        if !violated.is_empty() {
            refinements += 1;
            if refinements > 8 {
                return Err(Error::Internal(
                    "no-disturbance LP failed to stabilize after repeated row refinement".into(),
                ));
            }
            kept.extend(violated);
            kept.sort_unstable();
            kept.dedup();
            continue;
        }

        let tables: Vec<(Vec<usize>, Vec<Q>)> = lp
            .contexts
            .iter()
            .enumerate()
            .map(|(i, ctx)| {
                let len = space_size(&dims_of(&scenario, ctx));
                let table = solution[lp.var_offsets[i]..lp.var_offsets[i] + len].to_vec();
                (ctx.clone(), table)
            })
            .collect();
        let witness = Behavior::new(scenario.clone(), tables)?;
        witness.validate()?;
        let check = witness.evaluate(&em)?;
        if check != value {
            return Err(Error::Internal(format!(
                "LP optimum {value} disagrees with witness evaluation {check}"
            )));
        }
        let optimum = match e.sense() {
            Sense::Maximize => value,
            Sense::Minimize => -value,
        };
        return Ok(LpSolution {
            optimum,
            witness,
            stats: LpStats {
                variables: lp.num_vars,
                rows_generated: lp.rows.len(),
                rows_used: kept.len(),
                pivots,
                refinements,
            },
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Observable;
    use std::sync::Arc;

    fn q(n: i64) -> Q {
        Q::from_int(n)
    }

    fn chsh_scenario() -> Arc<Scenario> {
        Arc::new(
            Scenario::bell(&[
                ("A", vec![Observable::dichotomic("A1"), Observable::dichotomic("A2")]),
                ("B", vec![Observable::dichotomic("B1"), Observable::dichotomic("B2")]),
            ])
            .unwrap(),
        )
    }

    fn chsh(scn: &Arc<Scenario>) -> Expression {
        let t = |ids: [&str; 2], c: i64| Expression::correlator(scn, &ids, q(c)).unwrap();
        Expression::new(
            scn.clone(),
            "chsh",
            Sense::Maximize,
            vec![t(["A1", "B1"], 1), t(["A1", "B2"], 1), t(["A2", "B1"], 1), t(["A2", "B2"], -1)],
        )
    }

    fn five_cycle() -> Arc<Scenario> {
        let obs: Vec<Observable> = (1..=5).map(|i| Observable::dichotomic(format!("A{i}"))).collect();
        let scn = Scenario::new(obs, &[]).unwrap();
        let cliques: Vec<Vec<String>> =
            (1..=5).map(|i| vec![format!("A{i}"), format!("A{}", i % 5 + 1)]).collect();
        Arc::new(scn.add_contexts(&cliques).unwrap())
    }

    fn cycle_expression(scn: &Arc<Scenario>) -> Expression {
        let mut terms = Vec::new();
        for i in 1..=5 {
            let j = i % 5 + 1;
            let coeff = if i == 5 { q(-1) } else { q(1) };
            terms.push(
                Expression::correlator(scn, &[format!("A{i}"), format!("A{j}")], coeff).unwrap(),
            );
        }
        Expression::new(scn.clone(), "cycle5", Sense::Maximize, terms)
    }

    #[test]
    fn algebraic_of_chsh_is_four() {
        let scn = chsh_scenario();
        assert_eq!(algebraic_max(&chsh(&scn)), q(4));
    }

    #[test]
    fn classical_chsh_is_two_with_witness() {
        let scn = chsh_scenario();
        let r = classical_max(&chsh(&scn)).unwrap();
        assert_eq!(r.value, q(2));
        let Some(Witness::Assignment(a)) = r.witness else { panic!("expected assignment") };
        assert_eq!(chsh(&scn).evaluate_assignment(&a), q(2));
        // lexicographically smallest maximizer: all observables at outcome 0
        assert_eq!(a, vec![0, 0, 0, 0]);
    }

    #[test]
    fn classical_budget_is_enforced() {
        let scn = chsh_scenario();
        let e = chsh(&scn);
        let err = classical_max_with_budget(&e, 8).unwrap_err();
        match err {
            Error::BudgetExceeded { required, budget } => {
                assert_eq!(required, 16);
                assert_eq!(budget, 8);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn classical_cycle_bound() {
        let scn = five_cycle();
        let e = cycle_expression(&scn);
        assert_eq!(classical_max(&e).unwrap().value, q(3));
        assert_eq!(algebraic_max(&e), q(5));
    }

    #[test]
    fn minimize_goes_through_negation() {
        let scn = five_cycle();
        let e = cycle_expression(&scn);
        let neg = e.negated();
        assert!(matches!(neg.sense(), Sense::Minimize));
        assert_eq!(classical_max(&neg).unwrap().value, q(-3));
        assert_eq!(algebraic_max(&neg), q(-5));
    }

    #[test]
    fn polytope_shape_small_cases() {
        // path a-b-c: two contexts of 4 outcomes, 2 normalizations + 2 match rows
        let scn = Arc::new(
            Scenario::new(
                vec![
                    Observable::dichotomic("a"),
                    Observable::dichotomic("b"),
                    Observable::dichotomic("c"),
                ],
                &[("a".into(), "b".into()), ("b".into(), "c".into())],
            )
            .unwrap(),
        );
        let lp = nd_polytope(&scn);
        assert_eq!(lp.num_vars, 8);
        assert_eq!(lp.rows.len(), 4);

        // single context: simplex constraints only
        let single = Arc::new(
            Scenario::new(
                vec![Observable::dichotomic("x"), Observable::dichotomic("y")],
                &[("x".into(), "y".into())],
            )
            .unwrap(),
        );
        let lp = nd_polytope(&single);
        assert_eq!(lp.num_vars, 4);
        assert_eq!(lp.rows.len(), 1);
        assert!(matches!(lp.rows[0].kind, RowKind::Normalization { .. }));
    }

    #[test]
    fn nd_max_single_context_mean() {
        let scn = Arc::new(
            Scenario::new(
                vec![Observable::dichotomic("x"), Observable::dichotomic("y")],
                &[("x".into(), "y".into())],
            )
            .unwrap(),
        );
        let term = Expression::correlator(&scn, &["x"], Q::ONE).unwrap();
        let e = Expression::new(scn, "mean_x", Sense::Maximize, vec![term]);
        let sol = nd_max(&e).unwrap();
        assert_eq!(sol.optimum, Q::ONE);
        assert!(sol.witness.is_no_disturbance().unwrap().ok());
    }

    #[test]
    fn nd_max_chsh_reaches_algebraic() {
        let scn = chsh_scenario();
        let e = chsh(&scn);
        let sol = nd_max(&e).unwrap();
        assert_eq!(sol.optimum, q(4));
        assert!(sol.witness.is_no_disturbance().unwrap().ok());
        assert_eq!(sol.witness.evaluate(&e).unwrap(), q(4));
    }

    #[test]
    fn nd_max_cycle_reaches_algebraic() {
        let scn = five_cycle();
        let e = cycle_expression(&scn);
        let sol = nd_max(&e).unwrap();
        assert_eq!(sol.optimum, q(5));
    }

    #[test]
    fn nd_min_cycle() {
        let scn = five_cycle();
        let e = cycle_expression(&scn).negated();
        let sol = nd_max(&e).unwrap();
        assert_eq!(sol.optimum, q(-5));
    }

    #[test]
    fn nd_max_on_chordal_equals_classical() {
        // path graph: chordal, so classical = no-disturbance
        let scn = Arc::new(
            Scenario::new(
                vec![
                    Observable::dichotomic("a"),
                    Observable::dichotomic("b"),
                    Observable::dichotomic("c"),
                ],
                &[("a".into(), "b".into()), ("b".into(), "c".into())],
            )
            .unwrap(),
        );
        let terms = vec![
            Expression::correlator(&scn, &["a", "b"], q(1)).unwrap(),
            Expression::correlator(&scn, &["b", "c"], q(-1)).unwrap(),
            Expression::correlator(&scn, &["b"], q(1)).unwrap(),
        ];
        let e = Expression::new(scn, "path", Sense::Maximize, terms);
        let classical = classical_max(&e).unwrap().value;
        let nd = nd_max(&e).unwrap().optimum;
        assert_eq!(classical, nd);
        assert_eq!(nd, q(3));
    }

    #[test]
    fn rank_filter_consistency() {
        let scn = five_cycle();
        let lp = nd_polytope(&scn);
        let dim = nd_dimension(&scn) as usize;
        // C5: 5 vertices + 5 edges = 10 cliques, dichotomic
        assert_eq!(dim, 10);
        let kept = rank_filter(&lp.rows, lp.num_vars, lp.num_vars - dim);
        assert_eq!(kept.len(), lp.num_vars - dim);
    }
}
