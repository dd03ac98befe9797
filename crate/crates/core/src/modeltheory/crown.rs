use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelTheoryError;
use crate::order::{element_set, PartialPreorder};

/// Shape of an extended (double) crown: widths of its crowns and the number
/// of bottom elements below everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrownSpec {
    pub s: usize,
    pub s2: Option<usize>,
    pub bottoms: usize,
}

impl CrownSpec {
    pub fn single(s: usize, bottoms: usize) -> Self {
        CrownSpec { s, s2: None, bottoms }
    }

    pub fn double(s1: usize, s2: usize, bottoms: usize) -> Self {
        CrownSpec {
            s: s1,
            s2: Some(s2),
            bottoms,
        }
    }

    /// Same shape with the smaller width first; specs describe isomorphic
    /// orders iff their canonical forms are equal.
    pub fn canonical(&self) -> Self {
        match self.s2 {
            Some(s2) if s2 < self.s => CrownSpec::double(s2, self.s, self.bottoms),
            _ => *self,
        }
    }

    pub fn is_double(&self) -> bool {
        self.s2.is_some()
    }

    pub fn total(&self) -> usize {
        2 * self.s + 2 * self.s2.unwrap_or(0) + self.bottoms
    }

    /// Regular exactly when there is a bottom and the size is a power of 2.
    pub fn is_regular_size(&self) -> bool {
        self.bottoms >= 1 && self.total().is_power_of_two()
    }
}

impl fmt::Display for CrownSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.s2 {
            None => write!(f, "crown({})", self.s)?,
            Some(s2) => write!(f, "double-crown({}, {})", self.s, s2)?,
        }
        if self.bottoms > 0 {
            write!(f, " + {} bottoms", self.bottoms)?;
        }
        Ok(())
    }
}

/// An extended (double) crown together with the roles of its elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crown {
    spec: CrownSpec,
    order: PartialPreorder,
    tops: Vec<usize>,
    lows: Vec<usize>,
    bottoms: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

/// `a_i = i-1`, `b_i = s+i-1`, with `a_i > b_i` and `a_i > b_{i+1}` cyclically.
pub fn build_crown(s: usize) -> Result<PartialPreorder, ModelTheoryError> {
    if s < 2 {
        return Err(ModelTheoryError::CrownTooNarrow(s));
    }
    if s == 2 {
        log::warn!("crown of width 2 is complete bipartite; its cycle is degenerate");
    }
    let pairs = (0..s).flat_map(|i| [(s + i, i), (s + (i + 1) % s, i)]);
    Ok(PartialPreorder::from_pairs(2 * s, pairs)?)
}

/// Two crowns side by side, the second on elements `2*s1..2*(s1+s2)`.
pub fn build_double_crown(s1: usize, s2: usize) -> Result<PartialPreorder, ModelTheoryError> {
    Ok(build_crown(s1)?.disjoint_union(&build_crown(s2)?))
}

/// Adds `k` new elements `size..size+k` below every existing element.
pub fn extend_with_bottom(r: &PartialPreorder, k: usize) -> PartialPreorder {
    r.extend_with_bottom(k)
}

impl Crown {
    pub fn build(spec: CrownSpec) -> Result<Crown, ModelTheoryError> {
        let base = match spec.s2 {
            None => build_crown(spec.s)?,
            Some(s2) => build_double_crown(spec.s, s2)?,
        };
        let order = base.extend_with_bottom(spec.bottoms);
        let mut tops = Vec::new();
        let mut lows = Vec::new();
        let mut offset = 0;
        for s in [Some(spec.s), spec.s2].into_iter().flatten() {
            tops.extend(offset..offset + s);
            lows.extend(offset + s..offset + 2 * s);
            offset += 2 * s;
        }
        let bottoms = (offset..offset + spec.bottoms).collect();
        let cycles = oriented_cycles(&order, &tops, &lows);
        Ok(Crown {
            spec,
            order,
            tops,
            lows,
            bottoms,
            cycles,
        })
    }

    pub fn spec(&self) -> CrownSpec {
        self.spec
    }

    pub fn order(&self) -> &PartialPreorder {
        &self.order
    }

    /// Maximal elements of the crowns (`a_i`).
    pub fn tops(&self) -> &[usize] {
        &self.tops
    }

    /// Minimal elements of the crowns (`b_i`).
    pub fn lows(&self) -> &[usize] {
        &self.lows
    }

    pub fn bottoms(&self) -> &[usize] {
        &self.bottoms
    }

    /// Each crown's comparability cycle, starting at its lowest-numbered
    /// element and stepping first to the higher-numbered neighbor; for a
    /// built crown this is `a_1, b_2, a_2, b_3, ..., a_s, b_1`.
    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }
}

/// Orients each component of the comparability graph on `tops` and `lows`.
fn oriented_cycles(order: &PartialPreorder, tops: &[usize], lows: &[usize]) -> Vec<Vec<usize>> {
    let m = order.size();
    let crown = element_set(m, tops.iter().chain(lows).copied());
    let graph = order.restrict_graph(&crown);
    graph
        .components_on(&crown)
        .into_iter()
        .map(|component| {
            let start = component[0];
            let mut cycle = vec![start];
            let mut prev = start;
            let mut cur = graph.neighbors(start).max().expect("cycle vertex");
            while cur != start {
                cycle.push(cur);
                let next = graph.neighbors(cur).find(|&v| v != prev).expect("cycle vertex");
                prev = cur;
                cur = next;
            }
            cycle
        })
        .collect()
}

/// Classifies `r` as an extended crown or extended double crown (including
/// zero bottoms), recovering element roles.
pub fn recognize(r: &PartialPreorder) -> Option<Crown> {
    if !r.is_partial_order() {
        return None;
    }
    let m = r.size();
    let minimal: Vec<usize> = r.minimal().ones().collect();
    let below_all = minimal
        .iter()
        .all(|&b| (0..m).all(|x| minimal.contains(&x) || r.lt(b, x)));
    if below_all && minimal.len() < m {
        if let Some(c) = recognize_with_bottoms(r, minimal) {
            return Some(c);
        }
    }
    recognize_with_bottoms(r, Vec::new())
}

fn recognize_with_bottoms(r: &PartialPreorder, bottoms: Vec<usize>) -> Option<Crown> {
    let m = r.size();
    let rest = element_set(m, (0..m).filter(|x| !bottoms.contains(x)));
    let graph = r.restrict_graph(&rest);
    let lows: Vec<usize> = rest.ones().filter(|&x| rest.ones().all(|y| !r.lt(y, x))).collect();
    let tops: Vec<usize> = rest.ones().filter(|x| !lows.contains(x)).collect();
    // height one, every crown vertex on exactly two comparabilities
    let height_one = tops.iter().all(|&a| tops.iter().all(|&b| a == b || !r.leq(a, b)));
    if !height_one || rest.ones().any(|x| graph.degree(x) != 2) {
        return None;
    }
    let components = graph.components_on(&rest);
    let widths: Vec<usize> = components.iter().map(|c| c.len() / 2).collect();
    let spec = match widths[..] {
        [s] => CrownSpec::single(s, bottoms.len()),
        [s1, s2] => CrownSpec::double(s1, s2, bottoms.len()),
        _ => return None,
    };
    if widths.iter().any(|&s| s < 2) {
        return None;
    }
    let cycles = oriented_cycles(r, &tops, &lows);
    Some(Crown {
        spec,
        order: r.clone(),
        tops,
        lows,
        bottoms,
        cycles,
    })
}

/// Families of regular orders used for representability questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Regular,
    RegularDisconnected,
    ExtendedCrown,
    ExtendedDoubleCrown,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Regular,
        Family::RegularDisconnected,
        Family::ExtendedCrown,
        Family::ExtendedDoubleCrown,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Regular => "regular",
            Family::RegularDisconnected => "regular-disconnected",
            Family::ExtendedCrown => "extended-crown",
            Family::ExtendedDoubleCrown => "extended-double-crown",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn contains(&self, r: &PartialPreorder) -> bool {
        match self {
            Family::Regular => r.is_regular(),
            Family::RegularDisconnected => r.is_regular_disconnected(),
            Family::ExtendedCrown | Family::ExtendedDoubleCrown => recognize(r).is_some_and(|c| {
                c.spec.is_regular_size() && c.spec.is_double() == (*self == Family::ExtendedDoubleCrown)
            }),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
