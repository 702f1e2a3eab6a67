//! Monogamy certification by chordal decomposition.
//!
//! A decomposition splits the terms of an expression over vertex subsets of
//! its scenario. It certifies a no-disturbance bound when every part induces
//! a chordal subgraph and the classical values of the per-part reduced
//! expressions add up to the classical value of the whole expression: each
//! part then also attains its classical value over the no-disturbance
//! polytope, so the sum bounds the whole expression under no-disturbance.
//!
//! The module also provides an exhaustive search over term partitions
//! (restricted-growth enumeration with chordality and bound pruning, so a
//! negative answer is a proof of non-existence) and the explicit two-cycle
//! constructions, including the directed many-outcome variant.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{classical_max_with_budget, Witness, DEFAULT_ASSIGNMENT_BUDGET};
use crate::graph::{iter_bits, vertex_mask, UndirectedGraph};
use crate::ratio::Q;
use crate::scenario::{Expression, Scenario, Sense};
use crate::Error;

/// A family of vertex subsets with every expression term assigned to exactly
/// one part containing its support. Parts may overlap as vertex sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub parts: Vec<Vec<usize>>,
    /// `assignment[t]` is the part receiving term `t`.
    pub assignment: Vec<usize>,
}

impl Decomposition {
    /// Assigns every term to the first part containing its support.
    pub fn from_parts(e: &Expression, parts: Vec<Vec<usize>>) -> Result<Decomposition, Error> {
        let mut assignment = Vec::with_capacity(e.terms().len());
        for term in e.terms() {
            let part = parts
                .iter()
                .position(|p| term.support().iter().all(|v| p.contains(v)))
                .ok_or_else(|| {
                    Error::BadDecomposition(format!(
                        "term on {{{}}} has support in no part",
                        e.scenario().indices_to_ids(term.support()).join(",")
                    ))
                })?;
            assignment.push(part);
        }
        Ok(Decomposition { parts, assignment })
    }

    fn check_structure(&self, e: &Expression) -> Result<(), Error> {
        if self.assignment.len() != e.terms().len() {
            return Err(Error::BadDecomposition(format!(
                "assignment covers {} terms, expression has {}",
                self.assignment.len(),
                e.terms().len()
            )));
        }
        if let Some(&bad) = self.assignment.iter().find(|&&p| p >= self.parts.len()) {
            return Err(Error::BadDecomposition(format!(
                "assignment references part {bad}, only {} parts given",
                self.parts.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "UPPERCASE")]
pub enum Verdict {
    Certified,
    Failed(String),
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Certified => write!(f, "CERTIFIED"),
            Verdict::Failed(reason) => write!(f, "FAILED: {reason}"),
        }
    }
}

/// Report for one part of a decomposition.
#[derive(Debug, Clone)]
pub struct PartCertificate {
    pub vertices: Vec<usize>,
    pub chordal: bool,
    pub term_indices: Vec<usize>,
    /// Classical bound of the reduced expression, in the expression's sense.
    pub classical_value: Q,
}

/// Outcome of verifying a decomposition. `Certified` implies every part is
/// chordal and the part values sum exactly to the classical bound, which is
/// then also the exact no-disturbance bound of the expression.
#[derive(Debug, Clone)]
pub struct MonogamyCertificate {
    pub expression_name: String,
    pub sense: Sense,
    /// Classical bound of the combined expression.
    pub omega: Q,
    pub classical_witness: Option<Vec<usize>>,
    pub parts: Vec<PartCertificate>,
    pub part_sum: Q,
    pub verdict: Verdict,
    /// Kind of per-part bound entering the sum; always the classical bound,
    /// which on chordal parts equals the no-disturbance bound.
    pub reduced_bound_kind: &'static str,
}

/// Checks, in order: every part induces a chordal subgraph, every term is
/// assigned to a part containing its support, and the per-part classical
/// values sum to the classical value of the whole expression. The first
/// violated check decides the FAILED reason.
pub fn verify_decomposition(e: &Expression, d: &Decomposition) -> Result<MonogamyCertificate, Error> {
    verify_decomposition_with_budget(e, d, DEFAULT_ASSIGNMENT_BUDGET)
}

pub fn verify_decomposition_with_budget(
    e: &Expression,
    d: &Decomposition,
    budget: u128,
) -> Result<MonogamyCertificate, Error> {
    d.check_structure(e)?;
    let scenario = e.scenario();
    let graph = scenario.graph();
    let em = e.as_maximize();

    let whole = classical_max_with_budget(&em, budget)?;
    let omega_max = whole.value.clone();
    let classical_witness = match whole.witness {
        Some(Witness::Assignment(a)) => Some(a),
        _ => None,
    };

    let mut verdict = None;
    let mut parts = Vec::with_capacity(d.parts.len());
    let mut part_sum_max = Q::ZERO;
    for (pi, vertices) in d.parts.iter().enumerate() {
        let sub = graph.induced_subgraph(vertices)?;
        let chordal = sub.is_chordal();
        if verdict.is_none() && !chordal {
            verdict = Some(Verdict::Failed(format!(
                "part {pi} {{{}}} induces a non-chordal subgraph",
                scenario.indices_to_ids(vertices).join(",")
            )));
        }
        let term_indices: Vec<usize> = d
            .assignment
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == pi)
            .map(|(t, _)| t)
            .collect();
        let reduced = Expression::new(
            em.scenario().clone(),
            format!("{}#part{}", em.name(), pi),
            Sense::Maximize,
            term_indices.iter().map(|&t| em.terms()[t].clone()).collect(),
        );
        let value_max = classical_max_with_budget(&reduced, budget)?.value;
        part_sum_max += &value_max;
        parts.push(PartCertificate {
            vertices: vertices.clone(),
            chordal,
            term_indices,
            classical_value: restore_sense(e.sense(), value_max),
        });
    }
    if verdict.is_none() {
        for (t, term) in e.terms().iter().enumerate() {
            let part = &d.parts[d.assignment[t]];
            if !term.support().iter().all(|v| part.contains(v)) {
                verdict = Some(Verdict::Failed(format!(
                    "term {t} on {{{}}} assigned to part {} not containing its support",
                    scenario.indices_to_ids(term.support()).join(","),
                    d.assignment[t]
                )));
                break;
            }
        }
    }
    if verdict.is_none() && part_sum_max != omega_max {
        verdict = Some(Verdict::Failed(format!(
            "part values sum to {}, classical bound is {}",
            restore_sense(e.sense(), part_sum_max.clone()),
            restore_sense(e.sense(), omega_max.clone())
        )));
    }

    Ok(MonogamyCertificate {
        expression_name: e.name().to_string(),
        sense: e.sense(),
        omega: restore_sense(e.sense(), omega_max),
        classical_witness,
        parts,
        part_sum: restore_sense(e.sense(), part_sum_max),
        verdict: verdict.unwrap_or(Verdict::Certified),
        reduced_bound_kind: "classical",
    })
}

fn restore_sense(sense: Sense, value_max: Q) -> Q {
    match sense {
        Sense::Maximize => value_max,
        Sense::Minimize => -value_max,
    }
}

/// Counters from an exhaustive decomposition search; a NONE verdict is backed
/// by the whole trace.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub placements: u64,
    pub pruned_nonchordal: u64,
    pub pruned_bound: u64,
    pub leaves: u64,
    pub max_parts: usize,
    pub terms: usize,
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Found { decomposition: Decomposition, certificate: MonogamyCertificate, stats: SearchStats },
    Exhausted { stats: SearchStats },
}

impl SearchOutcome {
    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Found { stats, .. } | SearchOutcome::Exhausted { stats } => stats,
        }
    }
}

/// Node ceiling for the partition search; exceeding it is an error distinct
/// from an exhausted (NONE) search.
pub const DEFAULT_SEARCH_NODE_BUDGET: u64 = 200_000_000;

pub fn search_decomposition(e: &Expression, max_parts: usize) -> Result<SearchOutcome, Error> {
    let order: Vec<usize> = canonical_term_order(e);
    search_decomposition_with_order(e, max_parts, &order, DEFAULT_SEARCH_NODE_BUDGET)
}

/// Terms ordered by (support, coefficient) so enumeration is canonical.
pub fn canonical_term_order(e: &Expression) -> Vec<usize> {
    let mut order: Vec<usize> = (0..e.terms().len()).collect();
    order.sort_by(|&a, &b| {
        let (ta, tb) = (&e.terms()[a], &e.terms()[b]);
        ta.support()
            .cmp(tb.support())
            .then_with(|| ta.coefficient().cmp(tb.coefficient()))
            .then(a.cmp(&b))
    });
    order
}

/// Exhaustive search over partitions of the term list into at most
/// `max_parts` groups, in restricted-growth order over `order`. Each group's
/// part is the union of its term supports (closed to the induced subgraph).
/// Pruning is sound: a non-chordal part stays non-chordal under any later
/// vertex additions, and the bound prune uses a lower bound on the final part
/// sum. Returns the first certified decomposition or the exhaustion trace.
pub fn search_decomposition_with_order(
    e: &Expression,
    max_parts: usize,
    order: &[usize],
    node_budget: u64,
) -> Result<SearchOutcome, Error> {
    let em = e.as_maximize();
    let nterms = em.terms().len();
    if nterms == 0 {
        return Err(Error::BadInput("cannot search decompositions of an empty expression".into()));
    }
    if nterms > 64 {
        return Err(Error::BadInput(format!(
            "search supports at most 64 terms, expression has {nterms}"
        )));
    }
    if order.len() != nterms {
        return Err(Error::BadInput("term order must be a permutation of the term list".into()));
    }
    let scenario = em.scenario().clone();
    let graph = scenario.graph();
    let omega = classical_max_with_budget(&em, DEFAULT_ASSIGNMENT_BUDGET)?.value;

    let support_masks: Vec<u64> = em.terms().iter().map(|t| vertex_mask(t.support())).collect();
    let term_min: Vec<Q> = em.terms().iter().map(|t| t.value_range().0).collect();
    let term_max: Vec<Q> = em.terms().iter().map(|t| t.value_range().1).collect();
    // suffix_min[i] = sum of minimal contributions of terms order[i..]
    let mut suffix_min = vec![Q::ZERO; nterms + 1];
    for i in (0..nterms).rev() {
        suffix_min[i] = &suffix_min[i + 1] + &term_min[order[i]];
    }

    let mut ctx = SearchCtx {
        em: &em,
        scenario: &scenario,
        graph: &graph,
        order,
        support_masks: &support_masks,
        term_max: &term_max,
        suffix_min: &suffix_min,
        omega: &omega,
        max_parts: max_parts.max(1),
        node_budget,
        chordal_memo: HashMap::new(),
        value_memo: HashMap::new(),
        stats: SearchStats { max_parts: max_parts.max(1), terms: nterms, ..SearchStats::default() },
    };
    let mut blocks = Vec::new();
    let mut labels = Vec::new();
    let found = ctx.dfs(0, &mut blocks, &Q::ZERO, &mut labels)?;
    let stats = ctx.stats.clone();
    match found {
        Some(labels) => {
            let nparts = labels.iter().max().map_or(0, |&j| j + 1);
            let mut part_masks = vec![0u64; nparts];
            let mut assignment = vec![0usize; nterms];
            for (pos, &j) in labels.iter().enumerate() {
                let t = order[pos];
                part_masks[j] |= support_masks[t];
                assignment[t] = j;
            }
            let parts: Vec<Vec<usize>> = part_masks.iter().map(|&m| iter_bits(m).collect()).collect();
            let decomposition = Decomposition { parts, assignment };
            let certificate = verify_decomposition(e, &decomposition)?;
            if !certificate.verdict.is_certified() {
                return Err(Error::Internal(format!(
                    "search produced a non-certified decomposition: {}",
                    certificate.verdict
                )));
            }
            Ok(SearchOutcome::Found { decomposition, certificate, stats })
        }
        None => Ok(SearchOutcome::Exhausted { stats }),
    }
}

struct SearchCtx<'a> {
    em: &'a Expression,
    scenario: &'a Scenario,
    graph: &'a UndirectedGraph,
    order: &'a [usize],
    support_masks: &'a [u64],
    term_max: &'a [Q],
    suffix_min: &'a [Q],
    omega: &'a Q,
    max_parts: usize,
    node_budget: u64,
    chordal_memo: HashMap<u64, bool>,
    value_memo: HashMap<u64, Q>,
    stats: SearchStats,
}

struct SearchBlock {
    vmask: u64,
    tmask: u64,
    value: Q,
}

impl SearchCtx<'_> {
    fn is_chordal(&mut self, vmask: u64) -> bool {
        if let Some(&b) = self.chordal_memo.get(&vmask) {
            return b;
        }
        let b = self.graph.is_subset_chordal(vmask);
        self.chordal_memo.insert(vmask, b);
        b
    }

    /// Classical maximum of the sub-expression given by a term mask.
    fn block_value(&mut self, tmask: u64) -> Q {
        if let Some(v) = self.value_memo.get(&tmask) {
            return v.clone();
        }
        let terms: Vec<usize> = iter_bits(tmask).collect();
        let active: Vec<usize> = {
            let mut m = 0u64;
            for &t in &terms {
                m |= self.support_masks[t];
            }
            iter_bits(m).collect()
        };
        let dims: Vec<usize> = active.iter().map(|&v| self.scenario.outcomes(v)).collect();
        let mut tuple = vec![0usize; active.len()];
        let mut best: Option<Q> = None;
        loop {
            let mut value = Q::ZERO;
            for &t in &terms {
                let term = &self.em.terms()[t];
                let restricted: Vec<usize> = term
                    .support()
                    .iter()
                    .map(|v| tuple[active.binary_search(v).expect("active covers supports")])
                    .collect();
                let sup_dims: Vec<usize> =
                    term.support().iter().map(|&v| self.scenario.outcomes(v)).collect();
                value += term.coefficient() * term.value_at(&restricted, &sup_dims);
            }
            if best.as_ref().map_or(true, |b| value > *b) {
                best = Some(value);
            }
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
        let v = best.expect("nonempty enumeration");
        self.value_memo.insert(tmask, v.clone());
        v
    }

    /// Depth-first over placements of `order[i..]`; blocks carry their
    /// running classical value. Returns the found partition as growth labels.
    fn dfs(
        &mut self,
        i: usize,
        blocks: &mut Vec<SearchBlock>,
        sum: &Q,
        labels: &mut Vec<usize>,
    ) -> Result<Option<Vec<usize>>, Error> {
        self.stats.nodes += 1;
        if self.stats.nodes > self.node_budget {
            return Err(Error::BudgetExceeded {
                required: self.stats.nodes as u128,
                budget: self.node_budget as u128,
            });
        }
        if i == self.order.len() {
            self.stats.leaves += 1;
            if sum == self.omega {
                return Ok(Some(labels.clone()));
            }
            return Ok(None);
        }
        let t = self.order[i];
        let smask = self.support_masks[t];
        let nblocks = blocks.len();
        for j in 0..=nblocks {
            if j == nblocks && nblocks >= self.max_parts {
                break;
            }
            self.stats.placements += 1;
            let (new_vmask, new_tmask, old_value) = if j < nblocks {
                (blocks[j].vmask | smask, blocks[j].tmask | 1 << t, blocks[j].value.clone())
            } else {
                (smask, 1u64 << t, Q::ZERO)
            };
            if !self.is_chordal(new_vmask) {
                self.stats.pruned_nonchordal += 1;
                continue;
            }
            let new_value =
                if j < nblocks { self.block_value(new_tmask) } else { self.term_max[t].clone() };
            let new_sum = &(sum - &old_value) + &new_value;
            // every remaining term must join some part, contributing at least
            // its minimum; a sum already beyond omega cannot come back down
            if &(&new_sum + &self.suffix_min[i + 1]) > self.omega {
                self.stats.pruned_bound += 1;
                continue;
            }
            if j < nblocks {
                let saved_v = blocks[j].vmask;
                let saved_t = blocks[j].tmask;
                blocks[j].vmask = new_vmask;
                blocks[j].tmask = new_tmask;
                let saved_value = std::mem::replace(&mut blocks[j].value, new_value);
                labels.push(j);
                let found = self.dfs(i + 1, blocks, &new_sum, labels)?;
                labels.pop();
                blocks[j].vmask = saved_v;
                blocks[j].tmask = saved_t;
                blocks[j].value = saved_value;
                if found.is_some() {
                    return Ok(found);
                }
            } else {
                blocks.push(SearchBlock { vmask: new_vmask, tmask: new_tmask, value: new_value });
                labels.push(j);
                let found = self.dfs(i + 1, blocks, &new_sum, labels)?;
                labels.pop();
                blocks.pop();
                if found.is_some() {
                    return Ok(found);
                }
            }
        }
        Ok(None)
    }
}

// --- two-cycle constructions ----------------------------------------------

/// Which construction of the two-cycle decomposition applies: case one pairs
/// the two boundary arcs holding the contradictions; case two splits off the
/// interior arc pair holding the second contradiction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleCase {
    One,
    Two,
}

impl fmt::Display for CycleCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleCase::One => write!(f, "i"),
            CycleCase::Two => write!(f, "ii"),
        }
    }
}

/// Specification of two cycle inequalities over partially shared observables.
/// Positions are 1-based along each cycle; `shared` pairs a position in the
/// first cycle with its alias in the second. Contradiction edges sit between
/// the stated position and its cyclic successor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CyclePairSpec {
    pub n: usize,
    pub m: usize,
    /// Outcomes per observable; 2 gives the familiar correlator cycles.
    pub d: usize,
    pub shared: Vec<(usize, usize)>,
    pub contradiction_first: usize,
    pub contradiction_second: usize,
    /// Directed modular-difference terms (minimize sense) instead of
    /// correlators; requires `d >= 2` and admits only case one.
    pub directed: bool,
}

impl CyclePairSpec {
    pub fn correlator(n: usize, m: usize, shared: Vec<(usize, usize)>) -> CyclePairSpec {
        CyclePairSpec {
            n,
            m,
            d: 2,
            shared,
            contradiction_first: n,
            contradiction_second: m,
            directed: false,
        }
    }

    pub fn directed(n: usize, m: usize, d: usize, shared: Vec<(usize, usize)>) -> CyclePairSpec {
        CyclePairSpec {
            n,
            m,
            d,
            shared,
            contradiction_first: n,
            contradiction_second: m,
            directed: true,
        }
    }
}

/// Two cycle expressions over the union scenario, plus position bookkeeping.
#[derive(Debug, Clone)]
pub struct CyclePair {
    pub scenario: Arc<Scenario>,
    pub first: Expression,
    pub second: Expression,
    pub combined: Expression,
    pub spec: CyclePairSpec,
    /// Scenario index of each 0-based position along the first cycle.
    verts_first: Vec<usize>,
    verts_second: Vec<usize>,
}

/// The two vertex subsets and term assignment produced by the cycle
/// construction, plus the closed vertex walks of each part (used to place
/// triangulating commutation relations).
#[derive(Debug, Clone)]
pub struct CycleDecomposition {
    pub decomposition: Decomposition,
    pub case: CycleCase,
    /// Per part, the closed vertex walks forming it (one cycle for simple
    /// parts; several glued cycles for the remainder part of case two).
    pub part_cycles: Vec<Vec<Vec<usize>>>,
}

/// Builds the union scenario of two cycles and their inequality expressions.
/// Shared observables must appear in the same cyclic order in both cycles.
pub fn cycle_pair(spec: &CyclePairSpec) -> Result<CyclePair, Error> {
    validate_cycle_spec(spec)?;
    let n = spec.n;
    let m = spec.m;
    // name first-cycle positions A1..An; exclusive second-cycle positions B1..
    let mut second_names: Vec<Option<String>> = vec![None; m];
    for &(i, j) in &spec.shared {
        second_names[j - 1] = Some(format!("A{i}"));
    }
    let mut bcount = 0;
    for slot in second_names.iter_mut() {
        if slot.is_none() {
            bcount += 1;
            *slot = Some(format!("B{bcount}"));
        }
    }
    let mut observables: Vec<crate::scenario::Observable> =
        (1..=n).map(|i| crate::scenario::Observable::new(format!("A{i}"), spec.d)).collect();
    for name in second_names.iter().flatten() {
        if name.starts_with('B') {
            observables.push(crate::scenario::Observable::new(name.clone(), spec.d));
        }
    }
    let mut edges = Vec::new();
    for p in 0..n {
        edges.push((format!("A{}", p + 1), format!("A{}", (p + 1) % n + 1)));
    }
    for p in 0..m {
        edges.push((second_names[p].clone().unwrap(), second_names[(p + 1) % m].clone().unwrap()));
    }
    let scenario = Arc::new(Scenario::new(observables, &edges)?);
    build_cycle_pair(spec.clone(), scenario, second_names)
}

fn validate_cycle_spec(spec: &CyclePairSpec) -> Result<(), Error> {
    if spec.n < 3 || spec.m < 3 {
        return Err(Error::BadCycleSpec("cycles need at least three observables".into()));
    }
    if spec.d < 2 {
        return Err(Error::BadCycleSpec("observables need at least two outcomes".into()));
    }
    if !spec.directed && spec.d != 2 {
        return Err(Error::BadCycleSpec(
            "correlator cycles are dichotomic; use the directed form for more outcomes".into(),
        ));
    }
    if spec.shared.len() < 2 {
        return Err(Error::BadCycleSpec("at least two shared observables are required".into()));
    }
    if !(1..=spec.n).contains(&spec.contradiction_first)
        || !(1..=spec.m).contains(&spec.contradiction_second)
    {
        return Err(Error::BadCycleSpec("contradiction position out of range".into()));
    }
    let mut is: Vec<usize> = spec.shared.iter().map(|&(i, _)| i).collect();
    let mut js: Vec<usize> = spec.shared.iter().map(|&(_, j)| j).collect();
    is.sort_unstable();
    js.sort_unstable();
    is.dedup();
    js.dedup();
    if is.len() != spec.shared.len() || js.len() != spec.shared.len() {
        return Err(Error::BadCycleSpec("shared positions must be distinct".into()));
    }
    if is.iter().any(|&i| i < 1 || i > spec.n) || js.iter().any(|&j| j < 1 || j > spec.m) {
        return Err(Error::BadCycleSpec("shared position out of range".into()));
    }
    // consistent cyclic order: sorted by first-cycle position, the
    // second-cycle positions must be a rotation of an increasing sequence
    let mut pairs = spec.shared.clone();
    pairs.sort_by_key(|&(i, _)| i);
    let seq: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    let descents = (0..seq.len()).filter(|&t| seq[t] > seq[(t + 1) % seq.len()]).count();
    if descents > 1 {
        return Err(Error::BadCycleSpec(
            "shared observables must appear in the same cyclic order in both cycles".into(),
        ));
    }
    Ok(())
}

fn build_cycle_pair(
    spec: CyclePairSpec,
    scenario: Arc<Scenario>,
    second_names: Vec<Option<String>>,
) -> Result<CyclePair, Error> {
    let verts_first: Vec<usize> =
        (1..=spec.n).map(|i| scenario.index_of(&format!("A{i}"))).collect::<Result<_, _>>()?;
    let verts_second: Vec<usize> = second_names
        .iter()
        .map(|name| scenario.index_of(name.as_ref().unwrap()))
        .collect::<Result<_, _>>()?;
    let first = cycle_expression(
        &scenario,
        &verts_first,
        spec.contradiction_first,
        spec.directed,
        format!("cycle{}", spec.n),
    )?;
    let second = cycle_expression(
        &scenario,
        &verts_second,
        spec.contradiction_second,
        spec.directed,
        format!("cycle{}b", spec.m),
    )?;
    let combined = Expression::combine(&[first.clone(), second.clone()], &[Q::ONE, Q::ONE])?;
    Ok(CyclePair { scenario, first, second, combined, spec, verts_first, verts_second })
}

/// The cycle inequality over the given positional vertices: correlators with
/// one negative sign at the contradiction edge, or directed modular
/// differences (minimize) with the `-1` shift on the contradiction edge.
fn cycle_expression(
    scenario: &Arc<Scenario>,
    verts: &[usize],
    contradiction: usize,
    directed: bool,
    name: String,
) -> Result<Expression, Error> {
    let len = verts.len();
    let mut terms = Vec::with_capacity(len);
    for p in 0..len {
        let u = scenario.id_of(verts[p]).to_string();
        let v = scenario.id_of(verts[(p + 1) % len]).to_string();
        let is_contradiction = p + 1 == contradiction;
        let term = if directed {
            let shift = if is_contradiction { 1 } else { 0 };
            Expression::modular_difference(scenario, &u, &v, shift, Q::ONE)?
        } else {
            let coeff = if is_contradiction { -Q::ONE } else { Q::ONE };
            Expression::correlator(scenario, &[u, v], coeff)?
        };
        terms.push(term);
    }
    let sense = if directed { Sense::Minimize } else { Sense::Maximize };
    Ok(Expression::new(scenario.clone(), name, sense, terms))
}

/// Is edge `p` (0-based, joining positions `p` and `p+1`) inside the arc that
/// runs from position `from` forward to position `to`?
fn edge_in_arc(p: usize, from: usize, to: usize, len: usize) -> bool {
    let arc_len = (to + len - from) % len;
    (p + len - from) % len < arc_len
}

/// Vertex positions of the arc from `from` forward to `to`, inclusive.
fn arc_positions(from: usize, to: usize, len: usize) -> Vec<usize> {
    let mut out = vec![from];
    let mut p = from;
    while p != to {
        p = (p + 1) % len;
        out.push(p);
    }
    out
}

/// The two-part decomposition of a cycle pair prescribed by the shared
/// boundary. In case one each part takes one cycle's contradiction arc and
/// the other cycle's path through all shared observables; in case two the
/// interior arc pair holding the second contradiction splits off. The
/// directed many-outcome form telescopes only along consistently oriented
/// walks and therefore admits case one alone.
pub fn cycle_decomposition(pair: &CyclePair) -> Result<CycleDecomposition, Error> {
    let spec = &pair.spec;
    let k = spec.shared.len();
    let n = spec.n;
    let m = spec.m;
    let mut shared = spec.shared.clone();
    shared.sort_by_key(|&(i, _)| i);
    // 0-based positions
    let pos_i0: Vec<usize> = shared.iter().map(|&(i, _)| i - 1).collect();
    let pos_j0: Vec<usize> = shared.iter().map(|&(_, j)| j - 1).collect();
    let c1 = spec.contradiction_first - 1;
    let c2 = spec.contradiction_second - 1;

    let arc_of_first = (0..k)
        .find(|&t| edge_in_arc(c1, pos_i0[t], pos_i0[(t + 1) % k], n))
        .ok_or_else(|| {
            Error::BadCycleSpec("contradiction edge not located on the first cycle".into())
        })?;
    // rotate shared labels so the first contradiction lies on the boundary
    // arc from the last shared observable to the first
    let rot = (arc_of_first + 1) % k;
    let pos_i: Vec<usize> = (0..k).map(|t| pos_i0[(t + rot) % k]).collect();
    let pos_j: Vec<usize> = (0..k).map(|t| pos_j0[(t + rot) % k]).collect();
    let arc_of_second = (0..k)
        .find(|&t| edge_in_arc(c2, pos_j[t], pos_j[(t + 1) % k], m))
        .ok_or_else(|| {
            Error::BadCycleSpec("contradiction edge not located on the second cycle".into())
        })?;

    let case = if arc_of_second == k - 1 { CycleCase::One } else { CycleCase::Two };
    if spec.directed && case == CycleCase::Two {
        return Err(Error::UnsupportedCycleCase);
    }

    let vf = &pair.verts_first;
    let vs = &pair.verts_second;
    let seq_first =
        |from: usize, to: usize| -> Vec<usize> { arc_positions(from, to, n).iter().map(|&p| vf[p]).collect() };
    let seq_second =
        |from: usize, to: usize| -> Vec<usize> { arc_positions(from, to, m).iter().map(|&p| vs[p]).collect() };

    let nterms = pair.combined.terms().len();
    debug_assert_eq!(nterms, n + m);
    let mut assignment = vec![0usize; nterms];
    let mut part_cycles: Vec<Vec<Vec<usize>>>;

    match case {
        CycleCase::One => {
            // part 0: first-cycle boundary arc + second-cycle path through
            // all shared observables; part 1 symmetric
            let g_outer = seq_first(pos_i[k - 1], pos_i[0]);
            let h_inner = seq_second(pos_j[0], pos_j[k - 1]);
            let mut cycle0 = g_outer;
            cycle0.extend_from_slice(&h_inner[1..h_inner.len() - 1]);
            let h_outer = seq_second(pos_j[k - 1], pos_j[0]);
            let g_inner = seq_first(pos_i[0], pos_i[k - 1]);
            let mut cycle1 = h_outer;
            cycle1.extend_from_slice(&g_inner[1..g_inner.len() - 1]);
            part_cycles = vec![vec![cycle0], vec![cycle1]];
            for p in 0..n {
                assignment[p] = if edge_in_arc(p, pos_i[k - 1], pos_i[0], n) { 0 } else { 1 };
            }
            for p in 0..m {
                assignment[n + p] = if edge_in_arc(p, pos_j[k - 1], pos_j[0], m) { 1 } else { 0 };
            }
        }
        CycleCase::Two => {
            let l = arc_of_second;
            // part 0: the arc pair between shared observables l and l+1
            let g_arc = seq_first(pos_i[l], pos_i[l + 1]);
            let h_arc = seq_second(pos_j[l], pos_j[l + 1]);
            let mut cycle0 = g_arc;
            let interior: Vec<usize> = h_arc[1..h_arc.len() - 1].iter().rev().copied().collect();
            cycle0.extend_from_slice(&interior);
            // part 1: every other arc pair, glued at shared observables
            let mut cycles1 = Vec::new();
            for t in 0..k {
                if t == l {
                    continue;
                }
                let g_arc = seq_first(pos_i[t], pos_i[(t + 1) % k]);
                let h_arc = seq_second(pos_j[t], pos_j[(t + 1) % k]);
                let mut cyc = g_arc;
                let interior: Vec<usize> =
                    h_arc[1..h_arc.len() - 1].iter().rev().copied().collect();
                cyc.extend_from_slice(&interior);
                // arcs that coincide on a single shared edge add no cycle
                if cyc.len() >= 3 {
                    cycles1.push(cyc);
                }
            }
            part_cycles = vec![vec![cycle0], cycles1];
            for p in 0..n {
                assignment[p] = if edge_in_arc(p, pos_i[l], pos_i[l + 1], n) { 0 } else { 1 };
            }
            for p in 0..m {
                assignment[n + p] = if edge_in_arc(p, pos_j[l], pos_j[l + 1], m) { 0 } else { 1 };
            }
        }
    }

    let mut parts: Vec<Vec<usize>> = Vec::with_capacity(2);
    for cycles in &mut part_cycles {
        let mut mask = 0u64;
        for c in cycles.iter() {
            mask |= vertex_mask(c);
        }
        parts.push(iter_bits(mask).collect());
    }
    Ok(CycleDecomposition { decomposition: Decomposition { parts, assignment }, case, part_cycles })
}

/// Triangulating commutation relations for the parts of a cycle
/// decomposition: each closed walk of length four or more gets fan chords
/// from a vertex exclusive to its part, so the added relations never leak
/// into the other part's induced subgraph.
pub fn triangulation_contexts(
    pair: &CyclePair,
    cd: &CycleDecomposition,
) -> Result<Vec<Vec<String>>, Error> {
    let scenario = &pair.scenario;
    let mut cliques = Vec::new();
    for (pi, cycles) in cd.part_cycles.iter().enumerate() {
        let other: &Vec<usize> = &cd.decomposition.parts[1 - pi];
        for cycle in cycles {
            let len = cycle.len();
            if len < 4 {
                continue;
            }
            let apex_pos = cycle.iter().position(|v| !other.contains(v)).ok_or_else(|| {
                Error::BadCycleSpec(
                    "cannot triangulate a part whose cycle consists of shared observables only"
                        .into(),
                )
            })?;
            let apex = cycle[apex_pos];
            for (pos, &v) in cycle.iter().enumerate() {
                let adjacent = pos == apex_pos
                    || (pos + 1) % len == apex_pos
                    || (apex_pos + 1) % len == pos;
                if !adjacent {
                    cliques.push(vec![
                        scenario.id_of(apex).to_string(),
                        scenario.id_of(v).to_string(),
                    ]);
                }
            }
        }
    }
    Ok(cliques)
}

impl CyclePair {
    /// Rebuilds the pair over the scenario extended with the given contexts
    /// (typically the triangulating relations of its decomposition).
    pub fn with_additional_contexts(&self, cliques: &[Vec<String>]) -> Result<CyclePair, Error> {
        let extended = Arc::new(self.scenario.add_contexts(cliques)?);
        let second_names: Vec<Option<String>> = self
            .verts_second
            .iter()
            .map(|&v| Some(self.scenario.id_of(v).to_string()))
            .collect();
        build_cycle_pair(self.spec.clone(), extended, second_names)
    }
}

/// Full pipeline: build the pair, derive its decomposition, add the
/// triangulating relations, and verify. A CERTIFIED certificate carries the
/// no-disturbance bound `n + m - 4` for correlator cycles and `2(d-1)` for
/// directed ones.
pub fn certified_cycle_pair(
    spec: &CyclePairSpec,
) -> Result<(CyclePair, CycleDecomposition, MonogamyCertificate), Error> {
    let bare = cycle_pair(spec)?;
    let cd = cycle_decomposition(&bare)?;
    let grey = triangulation_contexts(&bare, &cd)?;
    let pair = bare.with_additional_contexts(&grey)?;
    let cd = cycle_decomposition(&pair)?;
    let certificate = verify_decomposition(&pair.combined, &cd.decomposition)?;
    Ok((pair, cd, certificate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{classical_max, nd_max};
    use crate::scenario::Observable;

    fn q(n: i64) -> Q {
        Q::from_int(n)
    }

    fn chsh_pair() -> (Arc<Scenario>, Expression) {
        let obs = |p: &str| {
            vec![Observable::dichotomic(format!("{p}1")), Observable::dichotomic(format!("{p}2"))]
        };
        let scn =
            Arc::new(Scenario::bell(&[("A", obs("A")), ("B", obs("B")), ("C", obs("C"))]).unwrap());
        let t = |ids: [&str; 2], c: i64| Expression::correlator(&scn, &ids, q(c)).unwrap();
        let chsh_ab = Expression::new(
            scn.clone(),
            "chsh_AB",
            Sense::Maximize,
            vec![t(["A1", "B1"], 1), t(["A1", "B2"], 1), t(["A2", "B1"], 1), t(["A2", "B2"], -1)],
        );
        let chsh_ac = Expression::new(
            scn.clone(),
            "chsh_AC",
            Sense::Maximize,
            vec![t(["A1", "C1"], 1), t(["A1", "C2"], 1), t(["A2", "C1"], 1), t(["A2", "C2"], -1)],
        );
        let sum = Expression::combine(&[chsh_ab, chsh_ac], &[Q::ONE, Q::ONE]).unwrap();
        (scn, sum)
    }

    #[test]
    fn chsh_pair_two_part_decomposition_certifies() {
        let (scn, sum) = chsh_pair();
        let parts = vec![
            scn.ids_to_indices(&["A1", "A2", "B1", "C2"]).unwrap(),
            scn.ids_to_indices(&["A1", "A2", "B2", "C1"]).unwrap(),
        ];
        let d = Decomposition::from_parts(&sum, parts).unwrap();
        let cert = verify_decomposition(&sum, &d).unwrap();
        assert!(cert.verdict.is_certified(), "{}", cert.verdict);
        assert_eq!(cert.omega, q(4));
        assert_eq!(cert.parts.len(), 2);
        assert_eq!(cert.parts[0].classical_value, q(2));
        assert_eq!(cert.parts[1].classical_value, q(2));
    }

    #[test]
    fn chsh_pair_triangle_parts_fail_sum_check() {
        let (scn, sum) = chsh_pair();
        let parts = vec![
            scn.ids_to_indices(&["A1", "B1", "C1"]).unwrap(),
            scn.ids_to_indices(&["A2", "B1", "C1"]).unwrap(),
            scn.ids_to_indices(&["A1", "B2", "C2"]).unwrap(),
            scn.ids_to_indices(&["A2", "B2", "C2"]).unwrap(),
        ];
        let d = Decomposition::from_parts(&sum, parts).unwrap();
        let cert = verify_decomposition(&sum, &d).unwrap();
        match &cert.verdict {
            Verdict::Failed(reason) => assert!(reason.contains("sum to 8/1"), "{reason}"),
            Verdict::Certified => panic!("must fail"),
        }
    }

    #[test]
    fn non_chordal_part_fails_first() {
        let (scn, sum) = chsh_pair();
        let all: Vec<usize> = (0..scn.observable_count()).collect();
        let d = Decomposition::from_parts(&sum, vec![all]).unwrap();
        let cert = verify_decomposition(&sum, &d).unwrap();
        match &cert.verdict {
            Verdict::Failed(reason) => assert!(reason.contains("non-chordal"), "{reason}"),
            Verdict::Certified => panic!("must fail"),
        }
    }

    #[test]
    fn term_with_support_in_no_part_is_an_error() {
        let (scn, sum) = chsh_pair();
        let parts = vec![scn.ids_to_indices(&["A1", "A2", "B1", "B2"]).unwrap()];
        assert!(matches!(Decomposition::from_parts(&sum, parts), Err(Error::BadDecomposition(_))));
    }

    #[test]
    fn search_finds_chsh_certificate() {
        let (_, sum) = chsh_pair();
        let outcome = search_decomposition(&sum, sum.terms().len()).unwrap();
        match outcome {
            SearchOutcome::Found { certificate, decomposition, .. } => {
                assert!(certificate.verdict.is_certified());
                assert_eq!(certificate.omega, q(4));
                assert_eq!(decomposition.parts.len(), 2);
            }
            SearchOutcome::Exhausted { .. } => panic!("expected a certificate"),
        }
    }

    #[test]
    fn search_single_term_is_trivial() {
        let scn = Arc::new(
            Scenario::new(
                vec![Observable::dichotomic("x"), Observable::dichotomic("y")],
                &[("x".into(), "y".into())],
            )
            .unwrap(),
        );
        let e = Expression::new(
            scn.clone(),
            "one",
            Sense::Maximize,
            vec![Expression::correlator(&scn, &["x", "y"], Q::ONE).unwrap()],
        );
        match search_decomposition(&e, 4).unwrap() {
            SearchOutcome::Found { decomposition, certificate, .. } => {
                assert_eq!(decomposition.parts.len(), 1);
                assert!(certificate.verdict.is_certified());
            }
            _ => panic!("single term always certifies"),
        }
    }

    #[test]
    fn cycle_pair_5_5_case_one() {
        let spec = CyclePairSpec::correlator(5, 5, vec![(1, 1), (2, 2)]);
        let (pair, cd, cert) = certified_cycle_pair(&spec).unwrap();
        assert_eq!(cd.case, CycleCase::One);
        assert!(cert.verdict.is_certified(), "{}", cert.verdict);
        assert_eq!(cert.omega, q(6));
        // each part holds exactly one contradiction term
        for part in &cert.parts {
            let negatives = part
                .term_indices
                .iter()
                .filter(|&&t| pair.combined.terms()[t].coefficient().is_negative())
                .count();
            assert_eq!(negatives, 1);
        }
        // the no-disturbance bound matches exactly
        let sol = nd_max(&pair.combined).unwrap();
        assert_eq!(sol.optimum, q(6));
    }

    #[test]
    fn cycle_pair_5_5_case_two() {
        // second-cycle aliases chosen so the second contradiction falls in an
        // interior arc
        let spec = CyclePairSpec::correlator(5, 5, vec![(1, 4), (2, 2)]);
        let (pair, cd, cert) = certified_cycle_pair(&spec).unwrap();
        assert_eq!(cd.case, CycleCase::Two);
        assert!(cert.verdict.is_certified(), "{}", cert.verdict);
        assert_eq!(cert.omega, q(6));
        let sol = nd_max(&pair.combined).unwrap();
        assert_eq!(sol.optimum, q(6));
    }

    #[test]
    fn directed_cycle_pair_d3() {
        let spec = CyclePairSpec::directed(5, 5, 3, vec![(1, 1), (2, 2)]);
        let (pair, cd, cert) = certified_cycle_pair(&spec).unwrap();
        assert_eq!(cd.case, CycleCase::One);
        assert!(matches!(pair.combined.sense(), Sense::Minimize));
        assert!(cert.verdict.is_certified(), "{}", cert.verdict);
        assert_eq!(cert.omega, q(4)); // 2(d-1)
        assert_eq!(classical_max(&pair.combined).unwrap().value, q(4));
    }

    #[test]
    fn directed_cycle_pair_d2_sanity() {
        let spec = CyclePairSpec::directed(5, 5, 2, vec![(1, 1), (2, 2)]);
        let (_, _, cert) = certified_cycle_pair(&spec).unwrap();
        assert!(cert.verdict.is_certified());
        assert_eq!(cert.omega, q(2));
    }

    #[test]
    fn directed_case_two_is_rejected() {
        let spec = CyclePairSpec::directed(5, 5, 3, vec![(1, 4), (2, 2)]);
        let err = certified_cycle_pair(&spec).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCycleCase));
    }

    #[test]
    fn inconsistent_cyclic_order_is_rejected() {
        // three shared observables in reversed order on the second cycle
        let spec = CyclePairSpec::correlator(6, 6, vec![(1, 1), (2, 4), (3, 2)]);
        assert!(matches!(cycle_pair(&spec), Err(Error::BadCycleSpec(_))));
    }

    #[test]
    fn fewer_than_two_shared_is_rejected() {
        let spec = CyclePairSpec::correlator(5, 5, vec![(1, 1)]);
        assert!(matches!(cycle_pair(&spec), Err(Error::BadCycleSpec(_))));
    }

    #[test]
    fn cycle_pair_6_7_case_one_matches_bound() {
        let spec = CyclePairSpec::correlator(6, 7, vec![(1, 1), (2, 2)]);
        let (pair, cd, cert) = certified_cycle_pair(&spec).unwrap();
        assert_eq!(cd.case, CycleCase::One);
        assert!(cert.verdict.is_certified(), "{}", cert.verdict);
        assert_eq!(cert.omega, q(9)); // n + m - 4
        assert_eq!(nd_max(&pair.combined).unwrap().optimum, q(9));
    }

    #[test]
    fn search_respects_node_budget() {
        let (_, sum) = chsh_pair();
        let order = canonical_term_order(&sum);
        let err = search_decomposition_with_order(&sum, 8, &order, 2).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn exhausted_search_is_order_independent() {
        // with a single part allowed, the non-chordal whole graph blocks
        // every partition of the CHSH pair
        let (_, sum) = chsh_pair();
        let out = search_decomposition(&sum, 1).unwrap();
        assert!(matches!(out, SearchOutcome::Exhausted { .. }));
        let mut order = canonical_term_order(&sum);
        order.reverse();
        let out =
            search_decomposition_with_order(&sum, 1, &order, DEFAULT_SEARCH_NODE_BUDGET).unwrap();
        assert!(matches!(out, SearchOutcome::Exhausted { .. }));
    }
}
