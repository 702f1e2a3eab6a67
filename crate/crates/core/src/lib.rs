//! Certification of monogamy relations for Bell and non-contextuality
//! inequalities under the no-signaling / no-disturbance principle.
//!
//! The library models measurement scenarios as commutation graphs, computes
//! exact classical, no-disturbance, and algebraic bounds of rational linear
//! expressions over behaviors (boxes), and certifies monogamy relations by
//! decomposing commutation graphs into induced chordal subgraphs whose
//! reduced classical values add up to the classical bound of the combined
//! expression. All arithmetic is exact rational; no contract involves
//! floating point.
//!
//! Module map:
//! - [`ratio`]: exact rational numbers serialized as `"p/q"` strings.
//! - [`graph`]: chordality recognition, maximal cliques, clique trees.
//! - [`scenario`]: observables, commutation structure, expressions.
//! - [`behavior`]: boxes, no-disturbance checking, joint distributions.
//! - [`bounds`]: classical / no-disturbance / algebraic maxima, exact LP.
//! - [`certify`]: decomposition verification, exhaustive search, cycle
//!   constructions.
//! - [`catalog`]: named self-verifying fixtures.

pub mod behavior;
pub mod bounds;
pub mod catalog;
pub mod certify;
pub mod graph;
pub mod ratio;
pub mod scenario;

pub use behavior::{Behavior, JointDistribution, NdReport};
pub use bounds::{BoundResult, LinearProgram, LpSolution, Witness};
pub use certify::{CycleCase, Decomposition, MonogamyCertificate, SearchOutcome, Verdict};
pub use graph::{CliqueTree, EliminationOrdering, UndirectedGraph};
pub use ratio::Q;
pub use scenario::{Expression, ExpressionTerm, Observable, Scenario, Sense};

/// Errors across the crate. Input-shape problems, budget refusals, and
/// mathematical preconditions are kept in distinct variants so callers can
/// map them to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid rational literal `{0}`")]
    BadRational(String),
    #[error("duplicate observable id `{0}`")]
    DuplicateObservable(String),
    #[error("unknown observable id `{0}`")]
    UnknownObservable(String),
    #[error("observable `{0}` must have at least 2 outcomes")]
    TooFewOutcomes(String),
    #[error("duplicate party tag `{0}`")]
    DuplicateParty(String),
    #[error("self-loop on observable `{0}`")]
    SelfLoop(String),
    #[error("graphs with more than {max} vertices are not supported (got {got})")]
    TooManyVertices { max: usize, got: usize },
    #[error("term support {{{0}}} is not a clique of the scenario")]
    SupportNotClique(String),
    #[error("value table has {got} entries, support outcome space has {want}")]
    BadTableLength { got: usize, want: usize },
    #[error("expressions are attached to different scenarios")]
    MixedScenarios,
    #[error("expressions have mixed optimization senses")]
    MixedSenses,
    #[error("combine called with {exprs} expressions and {weights} weights")]
    WeightCountMismatch { exprs: usize, weights: usize },
    #[error("graph is not chordal")]
    NotChordal,
    #[error("behavior table for context {{{context}}}: {problem}")]
    MalformedTable { context: String, problem: String },
    #[error("behavior violates no-disturbance: {0}")]
    Disturbance(String),
    #[error("term support {{{0}}} is not contained in any maximal context")]
    TermNotInContext(String),
    #[error("assignment is missing observable `{0}`")]
    MissingAssignment(String),
    #[error("assignment outcome {got} out of range for `{id}` with {outcomes} outcomes")]
    OutcomeOutOfRange { id: String, got: usize, outcomes: usize },
    #[error("budget exceeded: computation requires {required} units, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("linear program infeasible; the constraint builder produced an empty polytope")]
    LpInfeasible,
    #[error("linear program unbounded; the constraint builder lost normalization")]
    LpUnbounded,
    #[error("decomposition invalid: {0}")]
    BadDecomposition(String),
    #[error("cycle construction invalid: {0}")]
    BadCycleSpec(String),
    #[error("the directed many-outcome construction supports only configurations where both contradiction edges fall between the same boundary pair (case two requested)")]
    UnsupportedCycleCase,
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("fixture `{name}` failed its verification gate: {check}")]
    GateFailure { name: String, check: String },
    #[error("bit mask `{0}` must be one of 10, 01, 11")]
    BadBitMask(String),
    #[error("bit correlators require 4-outcome observables, `{id}` has {outcomes}")]
    BadBitOutcomes { id: String, outcomes: usize },
    #[error("malformed input: {0}")]
    BadInput(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}
