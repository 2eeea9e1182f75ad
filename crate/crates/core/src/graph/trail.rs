use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{CausalDag, GraphError};

/// Orientation of one step of a trail relative to the underlying edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    /// `nodes[i] -> nodes[i + 1]`
    AlongEdge,
    /// `nodes[i] <- nodes[i + 1]`
    AgainstEdge,
}

/// A simple undirected path through a DAG with the orientation of each step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrailPath {
    pub nodes: Vec<String>,
    pub directions: Vec<Orientation>,
}

impl TrailPath {
    /// Intermediate nodes with both adjacent edges pointing into them.
    pub fn colliders(&self) -> Vec<&str> {
        (1..self.nodes.len().saturating_sub(1))
            .filter(|&k| is_collider(&self.directions, k))
            .map(|k| self.nodes[k].as_str())
            .collect()
    }

    /// True when the first step points into the first node.
    pub fn enters_start(&self) -> bool {
        self.directions.first() == Some(&Orientation::AgainstEdge)
    }
}

impl fmt::Display for TrailPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, node) in self.nodes.iter().enumerate() {
            if k > 0 {
                let arrow = match self.directions[k - 1] {
                    Orientation::AlongEdge => " → ",
                    Orientation::AgainstEdge => " ← ",
                };
                f.write_str(arrow)?;
            }
            f.write_str(node)?;
        }
        Ok(())
    }
}

pub(crate) fn is_collider(directions: &[Orientation], k: usize) -> bool {
    directions[k - 1] == Orientation::AlongEdge && directions[k] == Orientation::AgainstEdge
}

/// Index-level trail used by the algorithms.
#[derive(Debug, Clone)]
pub(crate) struct Trail {
    pub nodes: Vec<usize>,
    pub directions: Vec<Orientation>,
}

impl Trail {
    pub fn to_path(&self, g: &CausalDag) -> TrailPath {
        TrailPath {
            nodes: self.nodes.iter().map(|&i| g.name(i).into()).collect(),
            directions: self.directions.clone(),
        }
    }
}

/// Depth-first enumeration of every simple trail from `x` to `y`.
pub(crate) fn enumerate_trails(g: &CausalDag, x: usize, y: usize) -> Vec<Trail> {
    let mut out = Vec::new();
    let mut on_path = vec![false; g.len()];
    let mut nodes = vec![x];
    let mut directions = Vec::new();
    on_path[x] = true;
    extend(g, y, &mut on_path, &mut nodes, &mut directions, &mut out);
    out
}

fn extend(
    g: &CausalDag,
    target: usize,
    on_path: &mut [bool],
    nodes: &mut Vec<usize>,
    directions: &mut Vec<Orientation>,
    out: &mut Vec<Trail>,
) {
    let v = *nodes.last().expect("path is never empty");
    let steps = g
        .child_ids(v)
        .iter()
        .map(|&c| (c, Orientation::AlongEdge))
        .chain(g.parent_ids(v).iter().map(|&p| (p, Orientation::AgainstEdge)));
    for (w, dir) in steps {
        if on_path[w] {
            continue;
        }
        nodes.push(w);
        directions.push(dir);
        if w == target {
            out.push(Trail {
                nodes: nodes.clone(),
                directions: directions.clone(),
            });
        } else {
            on_path[w] = true;
            extend(g, target, on_path, nodes, directions, out);
            on_path[w] = false;
        }
        nodes.pop();
        directions.pop();
    }
}

/// Blocking rule for a single trail given conditioning mask `z` and the mask
/// of `z` together with its ancestors.
pub(crate) fn blocked(trail: &Trail, z: &[bool], z_ancestors: &[bool]) -> bool {
    (1..trail.nodes.len() - 1).any(|k| {
        let v = trail.nodes[k];
        if is_collider(&trail.directions, k) {
            // open iff the collider or one of its descendants is conditioned on
            !z_ancestors[v]
        } else {
            z[v]
        }
    })
}

pub(crate) fn sort_paths(g: &CausalDag, trails: Vec<Trail>) -> Vec<TrailPath> {
    let mut paths: Vec<TrailPath> = trails.iter().map(|t| t.to_path(g)).collect();
    paths.sort();
    paths
}

/// Every undirected simple path between `x` and `y`, ordered lexicographically
/// by node sequence.
pub fn all_simple_trails(g: &CausalDag, x: &str, y: &str) -> Result<Vec<TrailPath>, GraphError> {
    let (xi, yi) = (g.require(x)?, g.require(y)?);
    if xi == yi {
        return Err(GraphError::InvalidQuery("trail endpoints must differ".into()));
    }
    Ok(sort_paths(g, enumerate_trails(g, xi, yi)))
}

/// Whether `trail` is blocked by conditioning on `z` under the d-separation
/// rules.
pub fn trail_is_blocked(g: &CausalDag, trail: &TrailPath, z: &[String]) -> Result<bool, GraphError> {
    let mut zmask = vec![false; g.len()];
    let mut seeds = Vec::new();
    for name in z {
        let i = g.require(name)?;
        zmask[i] = true;
        seeds.push(i);
    }
    let nodes = trail
        .nodes
        .iter()
        .map(|n| g.require(n))
        .collect::<Result<Vec<_>, _>>()?;
    let internal = Trail {
        nodes,
        directions: trail.directions.clone(),
    };
    Ok(blocked(&internal, &zmask, &g.ancestor_mask(&seeds)))
}
