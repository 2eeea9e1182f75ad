use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{CausalDag, GraphError};

/// A conditional-independence claim `x ⊥ y | z`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SeparationQuery {
    pub x: String,
    pub y: String,
    /// Kept sorted.
    pub z: Vec<String>,
}

impl SeparationQuery {
    pub fn new<S: Into<String>>(x: impl Into<String>, y: impl Into<String>, z: impl IntoIterator<Item = S>) -> Self {
        let mut z: Vec<String> = z.into_iter().map(Into::into).collect();
        z.sort();
        z.dedup();
        SeparationQuery {
            x: x.into(),
            y: y.into(),
            z,
        }
    }

    /// Same claim with `x` and `y` swapped.
    pub fn swapped(&self) -> Self {
        SeparationQuery {
            x: self.y.clone(),
            y: self.x.clone(),
            z: self.z.clone(),
        }
    }

    /// Checks the query against a graph and returns (x, y, z) indices.
    pub(crate) fn resolve(&self, g: &CausalDag) -> Result<(usize, usize, Vec<usize>), GraphError> {
        let x = g.require(&self.x)?;
        let y = g.require(&self.y)?;
        let z = self.z.iter().map(|n| g.require(n)).collect::<Result<Vec<_>, _>>()?;
        self.check_roles()?;
        Ok((x, y, z))
    }

    pub fn check_roles(&self) -> Result<(), GraphError> {
        if self.x == self.y {
            return Err(GraphError::InvalidQuery(alloc::format!(
                "x and y are both `{}`",
                self.x
            )));
        }
        for v in [&self.x, &self.y] {
            if self.z.contains(v) {
                return Err(GraphError::InvalidQuery(alloc::format!(
                    "`{v}` appears in the conditioning set"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SeparationQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ⊥ {}", self.x, self.y)?;
        if !self.z.is_empty() {
            write!(f, " | {}", self.z.join(", "))?;
        }
        Ok(())
    }
}

/// Whether `q.x` and `q.y` are d-separated by `q.z`.
///
/// Runs the reachability ("Bayes ball") procedure over (node, direction)
/// states after marking the ancestors of `z`; linear in the graph size.
pub fn d_separated(g: &CausalDag, q: &SeparationQuery) -> Result<bool, GraphError> {
    let (x, y, z) = q.resolve(g)?;
    let reach = reachable(g, x, &z, None);
    Ok(!reach[y])
}

/// Nodes d-connected to `source` given `z`. When `cut_outgoing` is set, the
/// edges leaving that node are treated as removed.
pub(crate) fn reachable(g: &CausalDag, source: usize, z: &[usize], cut_outgoing: Option<usize>) -> Vec<bool> {
    let n = g.len();
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    let z_anc = g.ancestor_mask(z);

    // visited[v][0]: reached travelling up (from a child),
    // visited[v][1]: reached travelling down (from a parent).
    let mut visited = vec![[false; 2]; n];
    let mut reached = vec![false; n];
    let mut stack = vec![(source, 0usize)];
    let children = |v: usize| -> &[usize] {
        if Some(v) == cut_outgoing {
            &[]
        } else {
            g.child_ids(v)
        }
    };

    while let Some((v, dir)) = stack.pop() {
        if core::mem::replace(&mut visited[v][dir], true) {
            continue;
        }
        if !in_z[v] {
            reached[v] = true;
        }
        let up = 0;
        let down = 1;
        if dir == up {
            if !in_z[v] {
                for &p in g.parent_ids(v) {
                    if Some(p) != cut_outgoing {
                        stack.push((p, up));
                    }
                }
                for &c in children(v) {
                    stack.push((c, down));
                }
            }
        } else {
            if !in_z[v] {
                for &c in children(v) {
                    stack.push((c, down));
                }
            }
            if z_anc[v] {
                for &p in g.parent_ids(v) {
                    if Some(p) != cut_outgoing {
                        stack.push((p, up));
                    }
                }
            }
        }
    }
    reached[source] = false;
    reached
}

/// Sorted unique names, used to build canonical sets.
pub(crate) fn sorted_set<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    names
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(ToString::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::test_support::dag;

    fn sep(g: &CausalDag, x: &str, y: &str, z: &[&str]) -> bool {
        d_separated(g, &SeparationQuery::new(x, y, z.iter().copied())).unwrap()
    }

    #[test]
    fn chain_blocks_on_middle() {
        let g = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert!(sep(&g, "A", "C", &["B"]));
        assert!(!sep(&g, "A", "C", &[]));
    }

    #[test]
    fn fork_blocks_on_middle() {
        let g = dag(&["A", "B", "C"], &[("B", "A"), ("B", "C")]);
        assert!(sep(&g, "A", "C", &["B"]));
        assert!(!sep(&g, "A", "C", &[]));
    }

    #[test]
    fn collider_opens_on_conditioning() {
        let g = dag(&["A", "B", "C"], &[("A", "B"), ("C", "B")]);
        assert!(sep(&g, "A", "C", &[]));
        assert!(!sep(&g, "A", "C", &["B"]));
    }

    #[test]
    fn collider_descendant_opens() {
        let g = dag(&["A", "B", "C", "D"], &[("A", "B"), ("C", "B"), ("B", "D")]);
        assert!(!sep(&g, "A", "C", &["D"]));
    }

    #[test]
    fn invalid_queries() {
        let g = dag(&["A", "B"], &[("A", "B")]);
        assert!(matches!(
            d_separated(&g, &SeparationQuery::new("A", "A", Vec::<String>::new())),
            Err(GraphError::InvalidQuery(_))
        ));
        assert!(matches!(
            d_separated(&g, &SeparationQuery::new("A", "B", ["A"])),
            Err(GraphError::InvalidQuery(_))
        ));
        assert_eq!(
            d_separated(&g, &SeparationQuery::new("A", "Q", Vec::<String>::new())),
            Err(GraphError::UnknownVariable("Q".into()))
        );
    }

    #[test]
    fn display() {
        let q = SeparationQuery::new("C", "A", ["B"]);
        assert_eq!(alloc::format!("{q}"), "C ⊥ A | B");
    }
}
