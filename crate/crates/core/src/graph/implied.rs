use alloc::vec::Vec;

use super::separation::{reachable, SeparationQuery};
use super::{CausalDag, GraphError};

/// Which set of graph-implied independence claims to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClaimBasis {
    /// One claim per (variable, non-descendant non-parent) given the
    /// variable's parents.
    #[default]
    LocalMarkov,
    /// Every non-adjacent pair with every separating set. Exponential.
    Pairwise,
}

/// Local Markov claims `v ⊥ u | parents(v)`, ordered by `v` then `u`.
pub fn implied_independencies(g: &CausalDag) -> Vec<SeparationQuery> {
    let mut by_name: Vec<usize> = (0..g.len()).collect();
    by_name.sort_by(|&a, &b| g.name(a).cmp(g.name(b)));

    let mut claims = Vec::new();
    for &v in &by_name {
        let desc = g.descendant_mask(&[v]);
        let parents = g.parent_ids(v);
        let z: Vec<&str> = parents.iter().map(|&p| g.name(p)).collect();
        for &u in &by_name {
            if desc[u] || parents.contains(&u) {
                continue;
            }
            let claim = SeparationQuery::new(g.name(v), g.name(u), z.iter().copied());
            debug_assert!(
                !reachable(g, v, parents, None)[u],
                "local Markov claim must hold: {claim}"
            );
            claims.push(claim);
        }
    }
    claims
}

/// Largest number of candidate conditioning variables for the pairwise
/// enumeration.
const MAX_PAIRWISE_POOL: usize = 16;

/// For every non-adjacent pair `x < y` (by name), every conditioning set that
/// d-separates them. Ordered by pair, then by set size and names.
pub fn pairwise_independencies(g: &CausalDag) -> Result<Vec<SeparationQuery>, GraphError> {
    let n = g.len();
    if n.saturating_sub(2) > MAX_PAIRWISE_POOL {
        return Err(GraphError::SearchTooLarge(n - 2));
    }
    let mut by_name: Vec<usize> = (0..n).collect();
    by_name.sort_by(|&a, &b| g.name(a).cmp(g.name(b)));

    let mut claims = Vec::new();
    for (i, &x) in by_name.iter().enumerate() {
        for &y in &by_name[i + 1..] {
            if g.child_ids(x).contains(&y) || g.child_ids(y).contains(&x) {
                continue;
            }
            let pool: Vec<usize> = by_name.iter().copied().filter(|&v| v != x && v != y).collect();
            let mut found: Vec<SeparationQuery> = Vec::new();
            let mut z = Vec::new();
            for m in 0u32..(1 << pool.len()) {
                z.clear();
                z.extend((0..pool.len()).filter(|b| m >> b & 1 == 1).map(|b| pool[b]));
                if !reachable(g, x, &z, None)[y] {
                    found.push(SeparationQuery::new(g.name(x), g.name(y), z.iter().map(|&v| g.name(v))));
                }
            }
            found.sort_by(|a, b| a.z.len().cmp(&b.z.len()).then_with(|| a.z.cmp(&b.z)));
            claims.extend(found);
        }
    }
    Ok(claims)
}
