use serde::Serialize;

use super::locality::all_types;
use super::{
    ef_cap, ef_game, from_colored_graph, hanf_check, recognize, to_colored_graph, Crown, CrownSpec, GameParameters,
    ModelTheoryError, RelationalStructure, Winner,
};
use crate::order::{ElementSet, PartialPreorder};

#[derive(Debug, Clone, Serialize)]
pub struct SwapReport {
    #[serde(skip)]
    pub result: RelationalStructure,
    pub a: usize,
    pub a_succ: usize,
    pub b: usize,
    pub b_succ: usize,
    pub cycle_lengths: Vec<usize>,
    pub params: GameParameters,
    /// Whether the input cycle reaches `params.bound()`.
    pub above_bound: bool,
}

fn is_extension_name(name: &str) -> bool {
    name.strip_prefix('A').is_some_and(|rest| rest.parse::<usize>().is_ok())
}

/// Checks that `c` is one connected 2-regular graph whose edges alternate
/// between `L1` and `L2`, and returns its orientation starting at vertex 0
/// toward its higher-numbered neighbor.
fn oriented_cycle(c: &RelationalStructure) -> Result<Vec<usize>, ModelTheoryError> {
    let bad = |why: &str| Err(ModelTheoryError::NotColoredCycle(why.to_string()));
    let n = c.size();
    if n < 4 {
        return bad("fewer than 4 vertices");
    }
    if !c.is_symmetric() || (0..n).any(|v| c.related(v, v)) {
        return bad("relation is not an undirected loop-free graph");
    }
    let (Some(l1), Some(l2)) = (c.unary("L1"), c.unary("L2")) else {
        return bad("missing L1 or L2");
    };
    for v in 0..n {
        if l1.contains(v) == l2.contains(v) {
            return bad(&format!("vertex {v} is not in exactly one of L1, L2"));
        }
        if c.degree(v) != 2 {
            return bad(&format!("vertex {v} has degree {}", c.degree(v)));
        }
    }
    if let Some((a, b)) = c.edges().into_iter().find(|&(a, b)| l1.contains(a) == l1.contains(b)) {
        return bad(&format!("edge {a}-{b} joins two vertices of the same color"));
    }
    let mut cycle = vec![0];
    let mut prev = 0;
    let mut cur = *c.neighbors(0).iter().max().expect("degree 2");
    while cur != 0 {
        cycle.push(cur);
        let next = c.neighbors(cur).into_iter().find(|&w| w != prev).expect("degree 2");
        prev = cur;
        cur = next;
    }
    if cycle.len() != n {
        return bad("graph is not connected");
    }
    Ok(cycle)
}

/// Splits an alternating 2-colored cycle (with `ell` extension colors
/// `A1..A{ell}`) into two cycles by swapping the oriented edges leaving two
/// vertices of equal `r`-neighborhood type at cycle distance at least
/// `2r + 2`. The lexicographically smallest such pair is used. The search
/// runs even below the length bound; `above_bound` reports it.
pub fn swap_construction(c1: &RelationalStructure, q: usize, ell: usize) -> Result<SwapReport, ModelTheoryError> {
    let colors = c1.signature().iter().filter(|n| is_extension_name(n)).count();
    if colors != ell {
        return Err(ModelTheoryError::ExtensionArity {
            expected: ell,
            got: colors,
        });
    }
    let cycle = oriented_cycle(c1)?;
    let n = cycle.len();
    let params = GameParameters::new(q, ell);
    let mut position = vec![0; n];
    let mut succ = vec![0; n];
    for (i, &v) in cycle.iter().enumerate() {
        position[v] = i;
        succ[v] = cycle[(i + 1) % n];
    }
    let distance = |a: usize, b: usize| {
        let d = position[a].abs_diff(position[b]);
        d.min(n - d)
    };
    let types = all_types(c1, params.r)?;
    let (a, b) = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .find(|&(a, b)| distance(a, b) >= params.min_distance() && types[a] == types[b])
        .ok_or(ModelTheoryError::NoQualifyingPair)?;
    let (a_succ, b_succ) = (succ[a], succ[b]);
    let mut result = c1.clone();
    result.remove_edge(a, a_succ);
    result.remove_edge(b, b_succ);
    result.add_edge(a, b_succ);
    result.add_edge(b, a_succ);
    let mut cycle_lengths: Vec<usize> = result.gaifman_graph().components().iter().map(|c| c.len()).collect();
    cycle_lengths.sort_unstable();
    Ok(SwapReport {
        result,
        a,
        a_succ,
        b,
        b_succ,
        cycle_lengths,
        above_bound: n as u128 >= params.bound(),
        params,
    })
}

/// Outcome of splitting the cycle of an extended crown and comparing the
/// extended colored graphs before and after.
#[derive(Debug, Clone, Serialize)]
pub struct CrownSplitReport {
    pub params: GameParameters,
    pub cycle_length: usize,
    /// Swapped edges in the numbering of the input order.
    pub swapped: [(usize, usize); 2],
    pub added: [(usize, usize); 2],
    pub result_spec: Option<CrownSpec>,
    pub same_size: bool,
    pub regular_disconnected: bool,
    pub cycle_types_match: bool,
    pub winner: Winner,
    pub holds: bool,
    #[serde(skip)]
    pub result: PartialPreorder,
}

/// Checks that splitting the cycle of `m1` (an extended crown, with extension
/// `A1..A{ell}` given by `extension`) yields an extended double crown of the
/// same size that is regular-disconnected and `q`-equivalent to `m1` with the
/// same extension.
pub fn verify_crown_split(
    m1: &Crown,
    q: usize,
    ell: usize,
    extension: &[ElementSet],
) -> Result<CrownSplitReport, ModelTheoryError> {
    let spec = m1.spec();
    if spec.is_double() || spec.bottoms == 0 {
        return Err(ModelTheoryError::NotInCrownFamily);
    }
    if extension.len() != ell {
        return Err(ModelTheoryError::ExtensionArity {
            expected: ell,
            got: extension.len(),
        });
    }
    let size = m1.order().size();
    if let Some(set) = extension.iter().find(|s| s.len() != size) {
        return Err(ModelTheoryError::ExtensionArity {
            expected: size,
            got: set.len(),
        });
    }
    let params = GameParameters::new(q, ell);
    let cycle_length = 2 * spec.s;
    if (cycle_length as u128) < params.bound() {
        return Err(ModelTheoryError::BelowBound {
            length: cycle_length,
            bound: params.bound(),
        });
    }
    if !ef_cap(q, size) {
        return Err(ModelTheoryError::EfCapExceeded { q, size });
    }

    let g1 = to_colored_graph(m1).with_extension(extension);
    let mut crown_vertices: Vec<usize> = m1.tops().iter().chain(m1.lows()).copied().collect();
    crown_vertices.sort_unstable();
    let c1 = g1.induced(&crown_vertices).without_unary(|n| n == "L3");
    let swap = swap_construction(&c1, q, ell)?;
    let c2 = &swap.result;
    let cycle_types_match = hanf_check(&c1, c2, params.r)?.is_some();

    let id = |v: usize| crown_vertices[v];
    let mut g2 = g1.clone();
    g2.remove_edge(id(swap.a), id(swap.a_succ));
    g2.remove_edge(id(swap.b), id(swap.b_succ));
    g2.add_edge(id(swap.a), id(swap.b_succ));
    g2.add_edge(id(swap.b), id(swap.a_succ));

    let m2 = from_colored_graph(&g2.without_unary(is_extension_name))?;
    let result_spec = recognize(&m2).map(|c| c.spec());
    let same_size = m2.size() == size;
    let regular_disconnected = m2.is_regular_disconnected();
    let winner = ef_game(&g1, &g2, q)?.winner;
    let holds = result_spec.is_some_and(|s| s.is_double() && s.bottoms == spec.bottoms)
        && same_size
        && regular_disconnected
        && winner == Winner::Duplicator;
    Ok(CrownSplitReport {
        params,
        cycle_length,
        swapped: [(id(swap.a), id(swap.a_succ)), (id(swap.b), id(swap.b_succ))],
        added: [(id(swap.a), id(swap.b_succ)), (id(swap.b), id(swap.a_succ))],
        result_spec,
        same_size,
        regular_disconnected,
        cycle_types_match,
        winner,
        holds,
        result: m2,
    })
}
