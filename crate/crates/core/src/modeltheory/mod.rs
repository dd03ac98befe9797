//! Crown-shaped orders, their colored-graph encoding, Ehrenfeucht-Fraisse
//! games, Hanf locality and the cycle edge-swap construction.

mod crown;
mod ef;
mod locality;
mod structure;
mod swap;

pub use crown::{build_crown, build_double_crown, extend_with_bottom, recognize, Crown, CrownSpec, Family};
pub use ef::{ef_cap, ef_game, ef_game_with_cap, q_equivalent, EfOutcome, Round, Side, Winner};
pub use locality::{hanf_check, neighborhood_type, r_neighborhood, GameParameters, Neighborhood, TypeCode};
pub use structure::{from_colored_graph, to_colored_graph, GraphJson, RelationalStructure};
pub use swap::{swap_construction, verify_crown_split, CrownSplitReport, SwapReport};

use thiserror::Error;

use crate::order::OrderError;

/// Largest ball accepted by the general (non-path, non-cycle) canonicalizer.
pub const CANONICAL_VERTEX_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelTheoryError {
    #[error("crown width {0} is below 2")]
    CrownTooNarrow(usize),
    #[error("order is not an extended crown or extended double crown")]
    NotInCrownFamily,
    #[error("colors L1, L2, L3 do not partition the vertices (vertex {0})")]
    ColorsNotPartition(usize),
    #[error("edge {a}-{b} joins colors that no order comparability produces")]
    MiscoloredEdge { a: usize, b: usize },
    #[error("colored graph does not encode a partial order")]
    NotPartialOrder,
    #[error("EF game with q = {q} on {size} elements exceeds the solver cap")]
    EfCapExceeded { q: usize, size: usize },
    #[error("structures have different signatures: {left:?} vs {right:?}")]
    SignatureMismatch { left: Vec<String>, right: Vec<String> },
    #[error("neighborhood of {size} vertices exceeds the canonicalization cap")]
    CanonicalizationCap { size: usize },
    #[error("structures have {left} and {right} elements; no bijection exists")]
    SizeMismatch { left: usize, right: usize },
    #[error("not a 2-colored cycle: {0}")]
    NotColoredCycle(String),
    #[error("no pair of far-apart vertices with isomorphic neighborhoods")]
    NoQualifyingPair,
    #[error("cycle of length {length} is below the required {bound}")]
    BelowBound { length: usize, bound: u128 },
    #[error("expected {expected} extension sets, got {got}")]
    ExtensionArity { expected: usize, got: usize },
    #[error("invalid structure JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Order(#[from] OrderError),
}
