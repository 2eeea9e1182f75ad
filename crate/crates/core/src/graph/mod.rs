//! Causal DAGs over categorical variables and the exact graph algorithms
//! built on them.
//!
//! A [`CausalDag`] is immutable once constructed. Edits go through
//! [`CausalDag::with_edge`] and [`CausalDag::without_edge`], which return a
//! fresh, re-validated graph.

mod adjust;
mod implied;
mod separation;
mod trail;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use adjust::{
    backdoor_trails, backdoor_violation, minimal_adjustment_sets, satisfies_backdoor, AdjustmentSet, BackdoorViolation,
    MAX_ADJUSTMENT_CANDIDATES,
};
pub use implied::{implied_independencies, pairwise_independencies, ClaimBasis};
pub use separation::{d_separated, SeparationQuery};
pub use trail::{all_simple_trails, trail_is_blocked, Orientation, TrailPath};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("variable name `{0}` is not a valid identifier")]
    InvalidName(String),
    #[error("variable `{0}` needs at least two levels")]
    TooFewLevels(String),
    #[error("variable `{variable}` declares level `{level}` twice")]
    DuplicateLevel { variable: String, level: String },
    #[error("reference level `{level}` is not a level of `{variable}`")]
    UnknownReferenceLevel { variable: String, level: String },
    #[error("variable `{0}` is declared twice")]
    DuplicateVariable(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge {src} -> {dst} names an undeclared variable `{missing}`")]
    UnknownEndpoint { src: String, dst: String, missing: String },
    #[error("edge {0} -> {1} is declared twice")]
    DuplicateEdge(String, String),
    #[error("edge {} -> {} lies on a cycle ({})", .edge.0, .edge.1, .cycle.join(" -> "))]
    CycleDetected { edge: (String, String), cycle: Vec<String> },
    #[error("edge {0} -> {1} does not exist")]
    UnknownEdge(String, String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("adjustment search over {0} candidate variables exceeds the supported limit")]
    SearchTooLarge(usize),
}

/// Names may start with a digit (`1stConcernWhileStuckInTraffic`), but must
/// not contain whitespace or the punctuation used by the text formats.
pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
}

/// A categorical variable: a name, an ordered level set and a reference level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Variable {
    name: String,
    levels: Vec<String>,
    reference: usize,
}

impl Variable {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
        reference_level: &str,
    ) -> Result<Self, GraphError> {
        let name = name.into();
        if !is_valid_name(&name) {
            return Err(GraphError::InvalidName(name));
        }
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        if levels.len() < 2 {
            return Err(GraphError::TooFewLevels(name));
        }
        let mut seen = BTreeSet::new();
        for level in &levels {
            if !is_valid_name(level) {
                return Err(GraphError::InvalidName(level.clone()));
            }
            if !seen.insert(level.as_str()) {
                return Err(GraphError::DuplicateLevel {
                    variable: name,
                    level: level.clone(),
                });
            }
        }
        let reference =
            levels
                .iter()
                .position(|l| l == reference_level)
                .ok_or_else(|| GraphError::UnknownReferenceLevel {
                    variable: name.clone(),
                    level: reference_level.to_string(),
                })?;
        Ok(Variable {
            name,
            levels,
            reference,
        })
    }

    /// Variable whose reference level is its first level.
    pub fn with_levels<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Result<Self, GraphError> {
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        let first = levels.first().cloned().unwrap_or_default();
        Variable::new(name, levels, &first)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn reference_index(&self) -> usize {
        self.reference
    }

    pub fn reference_level(&self) -> &str {
        &self.levels[self.reference]
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    pub fn level(&self, index: usize) -> &str {
        &self.levels[index]
    }
}

/// A validated directed acyclic graph over named categorical variables.
///
/// Variables keep their declaration order (it is the schema order for data
/// tables); every name-facing output is sorted lexicographically instead.
#[derive(Debug, Clone)]
pub struct CausalDag {
    variables: Vec<Variable>,
    index: BTreeMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for CausalDag {
    /// Graphs are equal when they declare the same variables (in any order)
    /// and the same edge set.
    fn eq(&self, other: &Self) -> bool {
        fn sorted_vars(g: &CausalDag) -> Vec<&Variable> {
            let mut v: Vec<&Variable> = g.variables.iter().collect();
            v.sort_by(|a, b| a.name.cmp(&b.name));
            v
        }
        sorted_vars(self) == sorted_vars(other) && self.edge_names() == other.edge_names()
    }
}

impl Eq for CausalDag {}

impl CausalDag {
    /// Validates candidate nodes and edges and builds the graph.
    ///
    /// Acyclicity is established by a topological ordering; on failure the
    /// error names one edge that lies on a cycle.
    pub fn new<S: AsRef<str>>(
        variables: Vec<Variable>,
        edges: impl IntoIterator<Item = (S, S)>,
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(GraphError::DuplicateVariable(v.name.clone()));
            }
        }
        let n = variables.len();
        let mut edge_set = BTreeSet::new();
        let mut edge_list = Vec::new();
        for (src, dst) in edges {
            let (src, dst) = (src.as_ref(), dst.as_ref());
            if src == dst {
                return Err(GraphError::SelfLoop(src.to_string()));
            }
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| GraphError::UnknownEndpoint {
                    src: src.to_string(),
                    dst: dst.to_string(),
                    missing: name.to_string(),
                })
            };
            let (s, d) = (lookup(src)?, lookup(dst)?);
            if !edge_set.insert((s, d)) {
                return Err(GraphError::DuplicateEdge(src.to_string(), dst.to_string()));
            }
            edge_list.push((s, d));
        }

        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(s, d) in &edge_set {
            children[s].push(d);
            parents[d].push(s);
        }

        let topo = topological_order(&variables, &parents, &children)
            .map_err(|cycle| cycle_error(&variables, &children, cycle))?;

        Ok(CausalDag {
            variables,
            index,
            edges: edge_list,
            parents,
            children,
            topo,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.index.get(name).map(|&i| &self.variables[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn has_edge(&self, src: &str, dst: &str) -> bool {
        match (self.index.get(src), self.index.get(dst)) {
            (Some(&s), Some(&d)) => self.children[s].contains(&d),
            _ => false,
        }
    }

    /// Edges in declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges.iter().map(move |&(s, d)| (self.name(s), self.name(d)))
    }

    /// Edges sorted by (source, target) name.
    pub fn edge_names(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self.edges().map(|(s, d)| (s.to_string(), d.to_string())).collect();
        out.sort();
        out
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(name)?;
        Ok(self.sorted_names(&self.parents[i]))
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(name)?;
        Ok(self.sorted_names(&self.children[i]))
    }

    /// Proper descendants of `name`, sorted.
    pub fn descendants(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(name)?;
        let mask = self.descendant_mask(&[i]);
        Ok(self.mask_names(&mask, Some(i)))
    }

    /// Proper ancestors of `name`, sorted.
    pub fn ancestors(&self, name: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(name)?;
        let mask = self.ancestor_mask(&[i]);
        Ok(self.mask_names(&mask, Some(i)))
    }

    /// Variable names in a topological order (ties broken by name).
    pub fn topological_names(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.name(i)).collect()
    }

    /// Returns a new graph with `src -> dst` added.
    pub fn with_edge(&self, src: &str, dst: &str) -> Result<CausalDag, GraphError> {
        let mut edges = self.edge_names();
        edges.push((src.to_string(), dst.to_string()));
        CausalDag::new(self.variables.clone(), edges)
    }

    /// Returns a new graph with `src -> dst` removed.
    pub fn without_edge(&self, src: &str, dst: &str) -> Result<CausalDag, GraphError> {
        if !self.has_edge(src, dst) {
            return Err(GraphError::UnknownEdge(src.to_string(), dst.to_string()));
        }
        let edges = self.edge_names().into_iter().filter(|(s, d)| !(s == src && d == dst));
        CausalDag::new(self.variables.clone(), edges)
    }

    pub(crate) fn name(&self, i: usize) -> &str {
        &self.variables[i].name
    }

    pub(crate) fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub(crate) fn require(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownVariable(name.to_string()))
    }

    pub(crate) fn parent_ids(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn child_ids(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn topo_ids(&self) -> &[usize] {
        &self.topo
    }

    /// Marks `seeds` and all their ancestors.
    pub(crate) fn ancestor_mask(&self, seeds: &[usize]) -> Vec<bool> {
        self.closure(seeds, &self.parents)
    }

    /// Marks `seeds` and all their descendants.
    pub(crate) fn descendant_mask(&self, seeds: &[usize]) -> Vec<bool> {
        self.closure(seeds, &self.children)
    }

    fn closure(&self, seeds: &[usize], adjacency: &[Vec<usize>]) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if core::mem::replace(&mut mark[v], true) {
                continue;
            }
            stack.extend(adjacency[v].iter().copied().filter(|&w| !mark[w]));
        }
        mark
    }

    fn sorted_names(&self, ids: &[usize]) -> Vec<&str> {
        let mut out: Vec<&str> = ids.iter().map(|&i| self.name(i)).collect();
        out.sort_unstable();
        out
    }

    fn mask_names(&self, mask: &[bool], exclude: Option<usize>) -> Vec<&str> {
        let ids: Vec<usize> = (0..self.len()).filter(|&i| mask[i] && Some(i) != exclude).collect();
        self.sorted_names(&ids)
    }
}

impl fmt::Display for CausalDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CausalDag({} variables, {} edges)", self.len(), self.n_edges())
    }
}

/// Kahn's algorithm with name-ordered tie breaking. On failure returns the
/// nodes left with unresolved in-degree (all of them on or downstream of a
/// cycle).
fn topological_order(
    variables: &[Variable],
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
) -> Result<Vec<usize>, Vec<usize>> {
    let n = variables.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<(&str, usize)> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| (variables[i].name.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(entry) = ready.pop_first() {
        let v = entry.1;
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert((variables[c].name.as_str(), c));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}

/// Walks parent links inside the residual set until a node repeats, which
/// yields a concrete cycle.
fn cycle_error(variables: &[Variable], children: &[Vec<usize>], residual: Vec<usize>) -> GraphError {
    let n = variables.len();
    let mut in_residual = vec![false; n];
    for &v in &residual {
        in_residual[v] = true;
    }
    // Every residual node keeps at least one residual parent, so following
    // parent links inside the residual set must eventually loop.
    let mut residual_parent = vec![usize::MAX; n];
    for &v in &residual {
        for &c in &children[v] {
            if in_residual[c]
                && (residual_parent[c] == usize::MAX || variables[v].name < variables[residual_parent[c]].name)
            {
                residual_parent[c] = v;
            }
        }
    }
    let start = *residual
        .iter()
        .min_by(|&&a, &&b| variables[a].name.cmp(&variables[b].name))
        .expect("cycle residual is nonempty");
    let mut seen_at = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut v = start;
    while seen_at[v] == usize::MAX {
        seen_at[v] = walk.len();
        walk.push(v);
        v = residual_parent[v];
    }
    let mut cycle: Vec<usize> = walk[seen_at[v]..].to_vec();
    // `walk` follows parent links; reverse to get edge direction.
    cycle.reverse();
    let names: Vec<String> = cycle
        .iter()
        .chain(cycle.first())
        .map(|&i| variables[i].name.clone())
        .collect();
    GraphError::CycleDetected {
        edge: (names[0].clone(), names[1].clone()),
        cycle: names,
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn binary(name: &str) -> Variable {
        Variable::with_levels(name, ["0", "1"]).unwrap()
    }

    pub fn dag(names: &[&str], edges: &[(&str, &str)]) -> CausalDag {
        CausalDag::new(names.iter().map(|n| binary(n)).collect(), edges.iter().copied()).unwrap()
    }
}
