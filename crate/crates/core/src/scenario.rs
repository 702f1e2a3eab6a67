//! Measurement scenarios, commutation structure, and inequality expressions.
//!
//! A [`Scenario`] is a set of observables together with a commutation graph:
//! vertices are observables, edges join pairs that can be measured together,
//! cliques are contexts. An [`Expression`] is a rational-linear functional
//! over behaviors, given as terms on compatible subsets. Scenarios and
//! expressions are immutable after construction and safe to share across
//! threads.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::UndirectedGraph;
use crate::ratio::Q;
use crate::Error;

/// A measurement with `outcomes` distinguishable results, indexed `0..d-1`.
/// Dichotomic observables map outcome index `a` to the value `(-1)^a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observable {
    pub id: String,
    pub label: String,
    pub outcomes: usize,
    pub party: Option<String>,
}

impl Observable {
    pub fn new(id: impl Into<String>, outcomes: usize) -> Observable {
        let id = id.into();
        Observable { label: id.clone(), id, outcomes, party: None }
    }

    pub fn dichotomic(id: impl Into<String>) -> Observable {
        Observable::new(id, 2)
    }
}

/// Observables plus the commutation graph over them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    observables: Vec<Observable>,
    index: BTreeMap<String, usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl Scenario {
    pub fn new(observables: Vec<Observable>, edge_ids: &[(String, String)]) -> Result<Scenario, Error> {
        let mut index = BTreeMap::new();
        for (i, o) in observables.iter().enumerate() {
            if o.outcomes < 2 {
                return Err(Error::TooFewOutcomes(o.id.clone()));
            }
            if index.insert(o.id.clone(), i).is_some() {
                return Err(Error::DuplicateObservable(o.id.clone()));
            }
        }
        let mut s = Scenario { observables, index, edges: BTreeSet::new() };
        for (a, b) in edge_ids {
            let (u, v) = (s.index_of(a)?, s.index_of(b)?);
            s.insert_edge(u, v)?;
        }
        Ok(s)
    }

    fn insert_edge(&mut self, u: usize, v: usize) -> Result<(), Error> {
        if u == v {
            return Err(Error::SelfLoop(self.observables[u].id.clone()));
        }
        self.edges.insert((u.min(v), u.max(v)));
        Ok(())
    }

    /// The Bell scenario over the given parties: observables of distinct
    /// parties commute, observables within one party do not.
    pub fn bell(parties: &[(&str, Vec<Observable>)]) -> Result<Scenario, Error> {
        let mut tags = BTreeSet::new();
        for (tag, _) in parties {
            if !tags.insert(tag.to_string()) {
                return Err(Error::DuplicateParty(tag.to_string()));
            }
        }
        let mut observables = Vec::new();
        let mut party_of = Vec::new();
        for (p, (tag, obs)) in parties.iter().enumerate() {
            for o in obs {
                let mut o = o.clone();
                o.party = Some(tag.to_string());
                observables.push(o);
                party_of.push(p);
            }
        }
        let mut s = Scenario::new(observables, &[])?;
        for u in 0..party_of.len() {
            for v in u + 1..party_of.len() {
                if party_of[u] != party_of[v] {
                    s.insert_edge(u, v)?;
                }
            }
        }
        Ok(s)
    }

    /// Adds every pair within each given clique as a commutation edge.
    /// Idempotent: edges already present are unchanged.
    pub fn add_contexts<S: AsRef<str>>(&self, cliques: &[Vec<S>]) -> Result<Scenario, Error> {
        let mut s = self.clone();
        for clique in cliques {
            let idx: Vec<usize> =
                clique.iter().map(|id| s.index_of(id.as_ref())).collect::<Result<_, _>>()?;
            for (i, &u) in idx.iter().enumerate() {
                for &v in &idx[i + 1..] {
                    s.insert_edge(u, v)?;
                }
            }
        }
        Ok(s)
    }

    pub fn observable_count(&self) -> usize {
        self.observables.len()
    }

    pub fn observable(&self, idx: usize) -> &Observable {
        &self.observables[idx]
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn outcomes(&self, idx: usize) -> usize {
        self.observables[idx].outcomes
    }

    pub fn index_of(&self, id: &str) -> Result<usize, Error> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownObservable(id.to_string()))
    }

    pub fn id_of(&self, idx: usize) -> &str {
        &self.observables[idx].id
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// The commutation graph, labelled by observable ids.
    pub fn graph(&self) -> UndirectedGraph {
        let labels = self.observables.iter().map(|o| o.id.clone()).collect();
        let edges: Vec<(usize, usize)> = self.edges.iter().copied().collect();
        UndirectedGraph::new(labels, &edges).expect("scenario enforces graph invariants")
    }

    /// Maximal cliques of the commutation graph: the maximal contexts.
    pub fn maximal_contexts(&self) -> Vec<Vec<usize>> {
        self.graph().maximal_cliques()
    }

    pub fn is_clique(&self, vs: &[usize]) -> bool {
        vs.iter().enumerate().all(|(i, &u)| vs[i + 1..].iter().all(|&v| self.has_edge(u, v)))
    }

    /// Joint outcome space size over all observables.
    pub fn assignment_space(&self) -> u128 {
        self.observables.iter().map(|o| o.outcomes as u128).product()
    }

    pub fn ids_to_indices<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, Error> {
        ids.iter().map(|s| self.index_of(s.as_ref())).collect()
    }

    pub fn indices_to_ids(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.observables[i].id.clone()).collect()
    }
}

/// Row-major index of an outcome tuple: the first coordinate varies slowest.
pub(crate) fn tuple_index(dims: &[usize], tuple: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), tuple.len());
    let mut idx = 0;
    for (d, o) in dims.iter().zip(tuple) {
        debug_assert!(o < d);
        idx = idx * d + o;
    }
    idx
}

/// Inverse of [`tuple_index`].
pub(crate) fn index_tuple(dims: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
    out
}

pub(crate) fn space_size(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Whether the bound reads `<= w` (maximize) or `>= w` (minimize).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[serde(alias = "max")]
    Maximize,
    #[serde(alias = "min")]
    Minimize,
}

/// One term of an expression: a rational value table over the joint outcomes
/// of a compatible support, scaled by a coefficient. Supports are stored
/// sorted by observable index; the table is permuted accordingly on
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionTerm {
    support: Vec<usize>,
    coefficient: Q,
    values: Vec<Q>,
}

impl ExpressionTerm {
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coefficient(&self) -> &Q {
        &self.coefficient
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn value_at(&self, tuple: &[usize], dims: &[usize]) -> &Q {
        &self.values[tuple_index(dims, tuple)]
    }

    /// Minimum and maximum of `coefficient * value` over the support
    /// outcomes.
    pub fn value_range(&self) -> (Q, Q) {
        let mut lo: Option<Q> = None;
        let mut hi: Option<Q> = None;
        for v in &self.values {
            let x = &self.coefficient * v;
            if lo.as_ref().map_or(true, |l| &x < l) {
                lo = Some(x.clone());
            }
            if hi.as_ref().map_or(true, |h| &x > h) {
                hi = Some(x);
            }
        }
        (lo.unwrap(), hi.unwrap())
    }

    fn scaled(&self, w: &Q) -> ExpressionTerm {
        ExpressionTerm {
            support: self.support.clone(),
            coefficient: &self.coefficient * w,
            values: self.values.clone(),
        }
    }
}

/// A rational-linear functional over behaviors.
#[derive(Debug, Clone)]
pub struct Expression {
    scenario: Arc<Scenario>,
    name: String,
    sense: Sense,
    terms: Vec<ExpressionTerm>,
}

impl Expression {
    pub fn new(
        scenario: Arc<Scenario>,
        name: impl Into<String>,
        sense: Sense,
        terms: Vec<ExpressionTerm>,
    ) -> Expression {
        Expression { scenario, name: name.into(), sense, terms }
    }

    /// Build a term from a support in any order with a value table indexed in
    /// that order; the term is canonicalized to sorted support.
    pub fn term<S: AsRef<str>>(
        scenario: &Arc<Scenario>,
        support_ids: &[S],
        coefficient: Q,
        values: Vec<Q>,
    ) -> Result<ExpressionTerm, Error> {
        let support = scenario.ids_to_indices(support_ids)?;
        Self::term_indices(scenario, &support, coefficient, values)
    }

    pub fn term_indices(
        scenario: &Arc<Scenario>,
        support: &[usize],
        coefficient: Q,
        values: Vec<Q>,
    ) -> Result<ExpressionTerm, Error> {
        let mut seen = BTreeSet::new();
        for &v in support {
            if !seen.insert(v) {
                return Err(Error::BadInput(format!(
                    "support repeats observable `{}`",
                    scenario.id_of(v)
                )));
            }
        }
        if support.is_empty() {
            return Err(Error::BadInput("term support must be nonempty".into()));
        }
        if !scenario.is_clique(support) {
            return Err(Error::SupportNotClique(
                scenario.indices_to_ids(support).join(","),
            ));
        }
        let dims: Vec<usize> = support.iter().map(|&i| scenario.outcomes(i)).collect();
        let want = space_size(&dims);
        if values.len() != want {
            return Err(Error::BadTableLength { got: values.len(), want });
        }
        // canonicalize: sort support ascending, permute the table
        let mut perm: Vec<usize> = (0..support.len()).collect();
        perm.sort_by_key(|&i| support[i]);
        let sorted_support: Vec<usize> = perm.iter().map(|&i| support[i]).collect();
        let sorted_dims: Vec<usize> = perm.iter().map(|&i| dims[i]).collect();
        let mut sorted_values = vec![Q::ZERO; want];
        for idx in 0..want {
            let tuple = index_tuple(&dims, idx);
            let sorted_tuple: Vec<usize> = perm.iter().map(|&i| tuple[i]).collect();
            sorted_values[tuple_index(&sorted_dims, &sorted_tuple)] = values[idx].clone();
        }
        Ok(ExpressionTerm { support: sorted_support, coefficient, values: sorted_values })
    }

    /// `coeff * <X_1 ... X_k>` for dichotomic observables: the table assigns
    /// `prod_i (-1)^{a_i}` to each outcome tuple.
    pub fn correlator<S: AsRef<str>>(
        scenario: &Arc<Scenario>,
        ids: &[S],
        coefficient: Q,
    ) -> Result<ExpressionTerm, Error> {
        let support = scenario.ids_to_indices(ids)?;
        for &i in &support {
            if scenario.outcomes(i) != 2 {
                return Err(Error::BadInput(format!(
                    "correlator requires dichotomic observables, `{}` has {}",
                    scenario.id_of(i),
                    scenario.outcomes(i)
                )));
            }
        }
        let dims = vec![2usize; support.len()];
        let values = (0..space_size(&dims))
            .map(|idx| {
                let parity: usize = index_tuple(&dims, idx).iter().sum();
                if parity % 2 == 0 {
                    Q::ONE
                } else {
                    -Q::ONE
                }
            })
            .collect();
        Self::term_indices(scenario, &support, coefficient, values)
    }

    /// `coeff * <[X_i - X_j - shift]>`: the observed value of the difference
    /// modulo the (common) outcome count. Supports the directed many-outcome
    /// cycle terms; `shift = 0` gives the plain difference.
    pub fn modular_difference(
        scenario: &Arc<Scenario>,
        from: &str,
        to: &str,
        shift: i64,
        coefficient: Q,
    ) -> Result<ExpressionTerm, Error> {
        let (i, j) = (scenario.index_of(from)?, scenario.index_of(to)?);
        let d = scenario.outcomes(i);
        if scenario.outcomes(j) != d {
            return Err(Error::BadInput(format!(
                "modular difference needs equal outcome counts, got {} and {}",
                d,
                scenario.outcomes(j)
            )));
        }
        let dims = [d, d];
        let values = (0..d * d)
            .map(|idx| {
                let t = index_tuple(&dims, idx);
                let diff = (t[0] as i64 - t[1] as i64 - shift).rem_euclid(d as i64);
                Q::from_int(diff)
            })
            .collect();
        // support order (from, to); canonicalization permutes the table if needed
        Self::term_indices(scenario, &[i, j], coefficient, values)
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Expression {
        self.name = name.into();
        self
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn terms(&self) -> &[ExpressionTerm] {
        &self.terms
    }

    /// Union of term supports, sorted.
    pub fn active_observables(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.terms.iter().flat_map(|t| t.support.iter().copied()).collect();
        set.into_iter().collect()
    }

    /// Weighted sum of expressions over a common scenario and sense. The term
    /// list is the weighted concatenation; zero-weight terms are dropped.
    /// Equal-support terms are kept separate so that decompositions can
    /// assign them to different parts; use [`Expression::merge_terms`] to
    /// canonicalize.
    pub fn combine(exprs: &[Expression], weights: &[Q]) -> Result<Expression, Error> {
        if exprs.is_empty() {
            return Err(Error::BadInput("combine needs at least one expression".into()));
        }
        if exprs.len() != weights.len() {
            return Err(Error::WeightCountMismatch { exprs: exprs.len(), weights: weights.len() });
        }
        let scenario = exprs[0].scenario.clone();
        let sense = exprs[0].sense;
        for e in &exprs[1..] {
            if !Arc::ptr_eq(&e.scenario, &scenario) && *e.scenario != *scenario {
                return Err(Error::MixedScenarios);
            }
            if e.sense != sense {
                return Err(Error::MixedSenses);
            }
        }
        let mut terms = Vec::new();
        for (e, w) in exprs.iter().zip(weights) {
            if w.is_zero() {
                continue;
            }
            for t in &e.terms {
                let scaled = t.scaled(w);
                if !scaled.coefficient.is_zero() {
                    terms.push(scaled);
                }
            }
        }
        let name = exprs.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join("+");
        Ok(Expression { scenario, name, sense, terms })
    }

    /// Keeps exactly the terms whose support lies inside `vertices`.
    pub fn reduce_to(&self, vertices: &[usize]) -> Expression {
        let set: BTreeSet<usize> = vertices.iter().copied().collect();
        let terms =
            self.terms.iter().filter(|t| t.support.iter().all(|v| set.contains(v))).cloned().collect();
        Expression { scenario: self.scenario.clone(), name: self.name.clone(), sense: self.sense, terms }
    }

    pub fn reduce_to_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Expression, Error> {
        Ok(self.reduce_to(&self.scenario.ids_to_indices(ids)?))
    }

    /// Merges equal-support terms by summing coefficient-scaled tables;
    /// resulting terms have coefficient one. Evaluation is unchanged.
    pub fn merge_terms(&self) -> Expression {
        let mut merged: BTreeMap<Vec<usize>, Vec<Q>> = BTreeMap::new();
        for t in &self.terms {
            let entry =
                merged.entry(t.support.clone()).or_insert_with(|| vec![Q::ZERO; t.values.len()]);
            for (acc, v) in entry.iter_mut().zip(&t.values) {
                *acc += &t.coefficient * v;
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, values)| values.iter().any(|v| !v.is_zero()))
            .map(|(support, values)| ExpressionTerm { support, coefficient: Q::ONE, values })
            .collect();
        Expression {
            scenario: self.scenario.clone(),
            name: self.name.clone(),
            sense: self.sense,
            terms,
        }
    }

    /// Negates all coefficients and flips the sense. Evaluating the result
    /// equals the negated evaluation of `self`.
    pub fn negated(&self) -> Expression {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpressionTerm {
                support: t.support.clone(),
                coefficient: -&t.coefficient,
                values: t.values.clone(),
            })
            .collect();
        let sense = match self.sense {
            Sense::Maximize => Sense::Minimize,
            Sense::Minimize => Sense::Maximize,
        };
        Expression { scenario: self.scenario.clone(), name: self.name.clone(), sense, terms }
    }

    /// The expression in maximize form: unchanged if already maximizing,
    /// negated otherwise.
    pub fn as_maximize(&self) -> Expression {
        match self.sense {
            Sense::Maximize => self.clone(),
            Sense::Minimize => self.negated(),
        }
    }

    /// Value under a deterministic assignment (one outcome per observable,
    /// indexed by observable position in the scenario).
    pub fn evaluate_assignment(&self, assignment: &[usize]) -> Q {
        let mut total = Q::ZERO;
        for t in &self.terms {
            let dims: Vec<usize> = t.support.iter().map(|&i| self.scenario.outcomes(i)).collect();
            let tuple: Vec<usize> = t.support.iter().map(|&i| assignment[i]).collect();
            total += &t.coefficient * &t.values[tuple_index(&dims, &tuple)];
        }
        total
    }
}

// --- JSON wire format ---------------------------------------------------

/// Scenario file schema: observables, commutation edges, optional contexts
/// (cliques added on load), and named expressions. Rationals are `"p/q"`
/// strings; value tables are flat arrays in row-major order over the support
/// outcome tuples with the first support id varying slowest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expressions: Vec<ExpressionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub id: String,
    pub outcomes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpressionSpec {
    pub name: String,
    #[serde(default = "default_sense")]
    pub sense: Sense,
    pub terms: Vec<TermSpec>,
}

fn default_sense() -> Sense {
    Sense::Maximize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermSpec {
    pub support: Vec<String>,
    pub coefficient: Q,
    pub values: Vec<Q>,
}

impl ScenarioFile {
    pub fn build(&self) -> Result<(Arc<Scenario>, Vec<Expression>), Error> {
        let observables = self
            .observables
            .iter()
            .map(|o| {
                let mut obs = Observable::new(o.id.clone(), o.outcomes);
                obs.party = o.party.clone();
                obs
            })
            .collect();
        let mut scenario = Scenario::new(observables, &self.edges)?;
        if !self.contexts.is_empty() {
            scenario = scenario.add_contexts(&self.contexts)?;
        }
        let scenario = Arc::new(scenario);
        let mut exprs = Vec::new();
        for spec in &self.expressions {
            let terms = spec
                .terms
                .iter()
                .map(|t| Expression::term(&scenario, &t.support, t.coefficient.clone(), t.values.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            exprs.push(Expression::new(scenario.clone(), spec.name.clone(), spec.sense, terms));
        }
        Ok((scenario, exprs))
    }

    pub fn from_scenario(scenario: &Scenario, exprs: &[Expression]) -> ScenarioFile {
        ScenarioFile {
            observables: scenario
                .observables()
                .iter()
                .map(|o| ObservableSpec { id: o.id.clone(), outcomes: o.outcomes, party: o.party.clone() })
                .collect(),
            edges: scenario
                .edges()
                .map(|(u, v)| (scenario.id_of(u).to_string(), scenario.id_of(v).to_string()))
                .collect(),
            contexts: Vec::new(),
            expressions: exprs
                .iter()
                .map(|e| ExpressionSpec {
                    name: e.name().to_string(),
                    sense: e.sense(),
                    terms: e
                        .terms()
                        .iter()
                        .map(|t| TermSpec {
                            support: e.scenario().indices_to_ids(t.support()),
                            coefficient: t.coefficient().clone(),
                            values: t.values().to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dichotomics(prefix: &str, n: usize) -> Vec<Observable> {
        (1..=n).map(|i| Observable::dichotomic(format!("{prefix}{i}"))).collect()
    }

    pub(crate) fn chsh_pair_scenario() -> Arc<Scenario> {
        Arc::new(
            Scenario::bell(&[
                ("A", dichotomics("A", 2)),
                ("B", dichotomics("B", 2)),
                ("C", dichotomics("C", 2)),
            ])
            .unwrap(),
        )
    }

    fn chsh(scn: &Arc<Scenario>, other: &str) -> Expression {
        let t = |ids: [&str; 2], c: i64| Expression::correlator(scn, &ids, Q::from_int(c)).unwrap();
        Expression::new(
            scn.clone(),
            format!("chsh_A{other}"),
            Sense::Maximize,
            vec![
                t(["A1", &format!("{other}1")], 1),
                t(["A1", &format!("{other}2")], 1),
                t(["A2", &format!("{other}1")], 1),
                t(["A2", &format!("{other}2")], -1),
            ],
        )
    }

    #[test]
    fn bell_scenario_edge_counts() {
        // CHSH: 4 vertices, complete bipartite, 4 edges
        let s = Scenario::bell(&[("A", dichotomics("A", 2)), ("B", dichotomics("B", 2))]).unwrap();
        assert_eq!(s.observable_count(), 4);
        assert_eq!(s.edge_count(), 4);

        // three parties of two observables: 12 inter-party edges
        let s = chsh_pair_scenario();
        assert_eq!(s.edge_count(), 12);

        // one party: no edges at all
        let s = Scenario::bell(&[("A", dichotomics("A", 3))]).unwrap();
        assert_eq!(s.edge_count(), 0);
    }

    #[test]
    fn bell_scenario_rejects_duplicates() {
        let obs = vec![Observable::dichotomic("A1"), Observable::dichotomic("A1")];
        assert!(matches!(
            Scenario::bell(&[("A", obs)]),
            Err(Error::DuplicateObservable(_))
        ));
        assert!(matches!(
            Scenario::bell(&[("A", dichotomics("A", 1)), ("A", dichotomics("B", 1))]),
            Err(Error::DuplicateParty(_))
        ));
    }

    #[test]
    fn add_contexts_builds_cycle_and_is_idempotent() {
        let s = Scenario::new(dichotomics("A", 5), &[]).unwrap();
        let cliques: Vec<Vec<String>> = (1..=5)
            .map(|i| vec![format!("A{i}"), format!("A{}", i % 5 + 1)])
            .collect();
        let cycled = s.add_contexts(&cliques).unwrap();
        assert_eq!(cycled.edge_count(), 5);
        let again = cycled.add_contexts(&cliques).unwrap();
        assert_eq!(again, cycled);
        assert!(matches!(
            s.add_contexts(&[vec!["A1".to_string(), "Z9".to_string()]]),
            Err(Error::UnknownObservable(_))
        ));
    }

    #[test]
    fn term_requires_clique_support() {
        let s = Scenario::new(dichotomics("A", 3), &[]).unwrap();
        let s = Arc::new(s);
        assert!(matches!(
            Expression::correlator(&s, &["A1", "A2"], Q::ONE),
            Err(Error::SupportNotClique(_))
        ));
        // singletons are always cliques
        assert!(Expression::correlator(&s, &["A1"], Q::ONE).is_ok());
    }

    #[test]
    fn term_canonicalization_permutes_table() {
        let s = Arc::new(
            Scenario::new(
                vec![Observable::new("X", 3), Observable::new("Y", 3)],
                &[("X".into(), "Y".into())],
            )
            .unwrap(),
        );
        // [Y - X] given with support (Y, X), then queried in sorted order (X, Y)
        let t = Expression::modular_difference(&s, "Y", "X", 0, Q::ONE).unwrap();
        assert_eq!(t.support(), &[0, 1]);
        let dims = [3, 3];
        // value at (x=1, y=0) must be (0 - 1) mod 3 = 2
        assert_eq!(t.value_at(&[1, 0], &dims), &Q::from_int(2));
        assert_eq!(t.value_at(&[1, 1], &dims), &Q::ZERO);
        assert_eq!(t.value_at(&[0, 2], &dims), &Q::from_int(2));
    }

    #[test]
    fn combine_identity_zero_and_weights() {
        let scn = chsh_pair_scenario();
        let e = chsh(&scn, "B");
        let same = Expression::combine(std::slice::from_ref(&e), &[Q::ONE]).unwrap();
        assert_eq!(same.terms().len(), 4);
        let zero = Expression::combine(std::slice::from_ref(&e), &[Q::ZERO]).unwrap();
        assert!(zero.terms().is_empty());

        let f = chsh(&scn, "C");
        let sum = Expression::combine(&[e.clone(), f], &[Q::ONE, Q::from_int(2)]).unwrap();
        assert_eq!(sum.terms().len(), 8);
        assert_eq!(sum.terms()[4].coefficient(), &Q::from_int(2));

        assert!(matches!(
            Expression::combine(&[e.clone()], &[]),
            Err(Error::WeightCountMismatch { .. })
        ));
        let other = chsh(&chsh_pair_scenario_smaller(), "B");
        assert!(matches!(
            Expression::combine(&[e, other], &[Q::ONE, Q::ONE]),
            Err(Error::MixedScenarios)
        ));
    }

    fn chsh_pair_scenario_smaller() -> Arc<Scenario> {
        Arc::new(
            Scenario::bell(&[
                ("A", dichotomics("A", 2)),
                ("B", dichotomics("B", 2)),
                ("C", dichotomics("C", 3)),
            ])
            .unwrap(),
        )
    }

    #[test]
    fn reduce_to_filters_terms() {
        let scn = chsh_pair_scenario();
        let sum =
            Expression::combine(&[chsh(&scn, "B"), chsh(&scn, "C")], &[Q::ONE, Q::ONE]).unwrap();
        let reduced = sum.reduce_to_ids(&["A1", "A2", "B1", "C2"]).unwrap();
        let mut kept: Vec<(Vec<String>, Q)> = reduced
            .terms()
            .iter()
            .map(|t| (scn.indices_to_ids(t.support()), t.coefficient().clone()))
            .collect();
        kept.sort();
        assert_eq!(
            kept,
            vec![
                (vec!["A1".into(), "B1".into()], Q::ONE),
                (vec!["A1".into(), "C2".into()], Q::ONE),
                (vec!["A2".into(), "B1".into()], Q::ONE),
                (vec!["A2".into(), "C2".into()], -Q::ONE),
            ]
        );

        let all: Vec<usize> = (0..scn.observable_count()).collect();
        assert_eq!(sum.reduce_to(&all).terms().len(), sum.terms().len());
        assert!(sum.reduce_to(&[]).terms().is_empty());
    }

    #[test]
    fn reduce_to_composes_like_intersection() {
        let scn = chsh_pair_scenario();
        let sum =
            Expression::combine(&[chsh(&scn, "B"), chsh(&scn, "C")], &[Q::ONE, Q::ONE]).unwrap();
        let v1: Vec<usize> = scn.ids_to_indices(&["A1", "A2", "B1", "B2", "C1"]).unwrap();
        let v2: Vec<usize> = scn.ids_to_indices(&["A1", "A2", "B1", "C1", "C2"]).unwrap();
        let inter: Vec<usize> = v1.iter().copied().filter(|v| v2.contains(v)).collect();
        let a = sum.reduce_to(&v1).reduce_to(&v2).merge_terms();
        let b = sum.reduce_to(&inter).merge_terms();
        assert_eq!(a.terms(), b.terms());
    }

    #[test]
    fn evaluate_assignment_chsh() {
        let scn = chsh_pair_scenario();
        let e = chsh(&scn, "B");
        // all observables at outcome 0 (+1): 1 + 1 + 1 - 1 = 2
        let all_plus = vec![0; scn.observable_count()];
        assert_eq!(e.evaluate_assignment(&all_plus), Q::from_int(2));
    }

    #[test]
    fn scenario_file_roundtrip() {
        let scn = chsh_pair_scenario();
        let e = chsh(&scn, "B");
        let file = ScenarioFile::from_scenario(&scn, std::slice::from_ref(&e));
        let json = serde_json::to_string_pretty(&file).unwrap();
        let parsed: ScenarioFile = serde_json::from_str(&json).unwrap();
        let (scn2, exprs) = parsed.build().unwrap();
        assert_eq!(*scn2, *scn);
        assert_eq!(exprs.len(), 1);
        assert_eq!(exprs[0].terms().len(), 4);
        assert_eq!(exprs[0].terms()[3].coefficient(), &-Q::ONE);
    }
}
