//! Structural causal models over categorical variables: the Markov
//! factorization, ancestral sampling, do-interventions by truncated
//! factorization and exact interventional oracles.

pub mod scenarios;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{DataTable, Schema};
use crate::graph::{CausalDag, GraphError, Variable};
use crate::rng::CounterRng;

/// Tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no conditional probability table for `{0}`")]
    MissingCpt(String),
    #[error("`{0}` has more than one conditional probability table")]
    DuplicateCpt(String),
    #[error("table for `{child}` is conditioned on [{found}] but the graph parents are [{expected}]")]
    ParentMismatch {
        child: String,
        expected: String,
        found: String,
    },
    #[error("table for `{child}` has {found} rows, expected {expected}")]
    RowCount {
        child: String,
        expected: usize,
        found: usize,
    },
    #[error("table for `{child}`, row {row}: {found} probabilities for {expected} levels")]
    RowWidth {
        child: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table for `{child}`, row {row}: probabilities sum to {sum}")]
    RowSum { child: String, row: usize, sum: f64 },
    #[error("table for `{child}`, row {row}: invalid probability {value}")]
    InvalidProbability { child: String, row: usize, value: f64 },
    #[error("assignment does not cover `{0}`")]
    IncompleteAssignment(String),
    #[error("`{level}` is not a level of `{variable}`")]
    UnknownLevel { variable: String, level: String },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("reference arm has a degenerate outcome probability ({0})")]
    ZeroDenominator(f64),
}

/// Conditional distribution of one variable given an ordered parent list.
///
/// Rows are indexed by the mixed-radix value of the parent levels, first
/// parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    child: String,
    n_levels: usize,
    parents: Vec<String>,
    radix: Vec<usize>,
    table: Vec<f64>,
}

impl Cpt {
    pub fn new(child: &Variable, parents: &[&Variable], rows: Vec<Vec<f64>>) -> Result<Self, SynthError> {
        let radix: Vec<usize> = parents.iter().map(|p| p.n_levels()).collect();
        let expected_rows: usize = radix.iter().product();
        if rows.len() != expected_rows {
            return Err(SynthError::RowCount {
                child: child.name().into(),
                expected: expected_rows,
                found: rows.len(),
            });
        }
        let k = child.n_levels();
        let mut table = Vec::with_capacity(expected_rows * k);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(SynthError::RowWidth {
                    child: child.name().into(),
                    row: r,
                    expected: k,
                    found: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(SynthError::InvalidProbability {
                    child: child.name().into(),
                    row: r,
                    value: bad,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(SynthError::RowSum {
                    child: child.name().into(),
                    row: r,
                    sum,
                });
            }
            table.extend(row);
        }
        Ok(Cpt {
            child: child.name().into(),
            n_levels: k,
            parents: parents.iter().map(|p| p.name().to_string()).collect(),
            radix,
            table,
        })
    }

    /// Builds each row from unnormalized nonnegative weights.
    pub fn from_weights(
        child: &Variable,
        parents: &[&Variable],
        mut weights: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> Result<Self, SynthError> {
        let radix: Vec<usize> = parents.iter().map(|p| p.n_levels()).collect();
        let rows = parent_combinations(&radix)
            .map(|combo| {
                let w = weights(&combo);
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            })
            .collect();
        Cpt::new(child, parents, rows)
    }

    /// Softmax of per-level logits.
    pub fn from_logits(
        child: &Variable,
        parents: &[&Variable],
        mut logits: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> Result<Self, SynthError> {
        Cpt::from_weights(child, parents, |combo| {
            let l = logits(combo);
            let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            l.into_iter().map(|v| libm::exp(v - max)).collect()
        })
    }

    /// A root distribution.
    pub fn marginal(child: &Variable, probs: Vec<f64>) -> Result<Self, SynthError> {
        Cpt::new(child, &[], vec![probs])
    }

    /// Point mass at `level`, with no parents.
    pub fn point_mass(child: &Variable, level: usize) -> Self {
        let mut probs = vec![0.0; child.n_levels()];
        probs[level] = 1.0;
        Cpt {
            child: child.name().into(),
            n_levels: child.n_levels(),
            parents: Vec::new(),
            radix: Vec::new(),
            table: probs,
        }
    }

    pub fn child(&self) -> &str {
        &self.child
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn n_rows(&self) -> usize {
        self.radix.iter().product()
    }

    /// Distribution over child levels for the given parent levels (in
    /// parent-list order).
    pub fn row(&self, parent_levels: &[usize]) -> &[f64] {
        let mut r = 0;
        for (&l, &k) in parent_levels.iter().zip(&self.radix) {
            r = r * k + l;
        }
        self.row_at(r)
    }

    pub fn row_at(&self, r: usize) -> &[f64] {
        &self.table[r * self.n_levels..(r + 1) * self.n_levels]
    }

    /// Parent level combinations in row order.
    pub fn combinations(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        parent_combinations(&self.radix)
    }
}

/// Mixed-radix enumeration, last position fastest.
pub(crate) fn parent_combinations(radix: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = radix.iter().product();
    (0..total).map(move |mut r| {
        let mut combo = vec![0; radix.len()];
        for (slot, &k) in combo.iter_mut().zip(radix).rev() {
            *slot = r % k;
            r /= k;
        }
        combo
    })
}

/// A causal DAG with one conditional probability table per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    graph: CausalDag,
    /// Indexed like `graph.variables()`.
    cpts: Vec<Cpt>,
    /// For each variable, graph indices of the CPT's parents in CPT order.
    parent_slots: Vec<Vec<usize>>,
}

impl ScmSpec {
    pub fn new(graph: CausalDag, cpts: Vec<Cpt>) -> Result<Self, SynthError> {
        let n = graph.len();
        let mut slots: Vec<Option<Cpt>> = vec![None; n];
        for cpt in cpts {
            let i = graph.require(&cpt.child)?;
            if slots[i].is_some() {
                return Err(SynthError::DuplicateCpt(cpt.child));
            }
            slots[i] = Some(cpt);
        }
        let mut cpts = Vec::with_capacity(n);
        let mut parent_slots = Vec::with_capacity(n);
        for (i, slot) in slots.into_iter().enumerate() {
            let var = &graph.variables()[i];
            let cpt = slot.ok_or_else(|| SynthError::MissingCpt(var.name().into()))?;
            let mut expected: Vec<&str> = graph.parents(var.name())?;
            let mut found: Vec<&str> = cpt.parents.iter().map(String::as_str).collect();
            expected.sort_unstable();
            found.sort_unstable();
            if expected != found {
                return Err(SynthError::ParentMismatch {
                    child: var.name().into(),
                    expected: expected.join(","),
                    found: found.join(","),
                });
            }
            if cpt.n_levels != var.n_levels() {
                return Err(SynthError::RowWidth {
                    child: var.name().into(),
                    row: 0,
                    expected: var.n_levels(),
                    found: cpt.n_levels,
                });
            }
            let ids: Vec<usize> = cpt
                .parents
                .iter()
                .map(|p| graph.index_of(p).expect("parent checked against graph"))
                .collect();
            for (&pid, &k) in ids.iter().zip(&cpt.radix) {
                if graph.variables()[pid].n_levels() != k {
                    return Err(SynthError::RowCount {
                        child: var.name().into(),
                        expected: graph.variables()[pid].n_levels(),
                        found: k,
                    });
                }
            }
            parent_slots.push(ids);
            cpts.push(cpt);
        }
        Ok(ScmSpec {
            graph,
            cpts,
            parent_slots,
        })
    }

    pub fn graph(&self) -> &CausalDag {
        &self.graph
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, name: &str) -> Option<&Cpt> {
        self.graph.index_of(name).map(|i| &self.cpts[i])
    }

    pub fn schema(&self) -> Schema {
        Schema::from_dag(&self.graph)
    }

    /// `Pr(variable i = its level in `levels` | parents)`, with `levels` in
    /// graph variable order.
    fn factor(&self, i: usize, levels: &[usize]) -> f64 {
        let parents: Vec<usize> = self.parent_slots[i].iter().map(|&p| levels[p]).collect();
        self.cpts[i].row(&parents)[levels[i]]
    }

    /// Resolves a name-based full assignment into level indices.
    pub fn resolve_assignment<S: AsRef<str>>(&self, assignment: &[(S, S)]) -> Result<Vec<usize>, SynthError> {
        let n = self.graph.len();
        let mut levels = vec![usize::MAX; n];
        for (name, level) in assignment {
            let i = self.graph.require(name.as_ref())?;
            let var = &self.graph.variables()[i];
            levels[i] = var
                .level_index(level.as_ref())
                .ok_or_else(|| SynthError::UnknownLevel {
                    variable: var.name().into(),
                    level: level.as_ref().into(),
                })?;
        }
        if let Some(i) = levels.iter().position(|&l| l == usize::MAX) {
            return Err(SynthError::IncompleteAssignment(
                self.graph.variables()[i].name().into(),
            ));
        }
        Ok(levels)
    }

    /// Product of the per-variable conditional probabilities of a full
    /// assignment of (variable, level) names.
    pub fn joint_probability<S: AsRef<str>>(&self, assignment: &[(S, S)]) -> Result<f64, SynthError> {
        let levels = self.resolve_assignment(assignment)?;
        Ok(self.joint_probability_levels(&levels))
    }

    /// As [`ScmSpec::joint_probability`], with level indices in graph order.
    pub fn joint_probability_levels(&self, levels: &[usize]) -> f64 {
        self.graph.topo_ids().iter().map(|&i| self.factor(i, levels)).product()
    }

    /// Calls `visit(levels, probability)` for every full assignment with
    /// nonzero probability.
    pub fn for_each_assignment(&self, mut visit: impl FnMut(&[usize], f64)) {
        let order: Vec<usize> = self.graph.topo_ids().to_vec();
        let mut levels = vec![0usize; self.graph.len()];
        self.walk(&order, 0, 1.0, &mut levels, &mut visit);
    }

    fn walk(&self, order: &[usize], depth: usize, p: f64, levels: &mut [usize], visit: &mut impl FnMut(&[usize], f64)) {
        if depth == order.len() {
            visit(levels, p);
            return;
        }
        let i = order[depth];
        for l in 0..self.graph.variables()[i].n_levels() {
            levels[i] = l;
            let q = p * self.factor(i, levels);
            if q > 0.0 {
                self.walk(order, depth + 1, q, levels, visit);
            }
        }
    }

    /// Exact marginal distribution of one variable, enumerating only its
    /// ancestral set.
    pub fn marginal(&self, name: &str) -> Result<Vec<f64>, SynthError> {
        let target = self.graph.require(name)?;
        let anc = self.graph.ancestor_mask(&[target]);
        let order: Vec<usize> = self.graph.topo_ids().iter().copied().filter(|&i| anc[i]).collect();
        let mut dist = vec![0.0; self.graph.variables()[target].n_levels()];
        let mut levels = vec![0usize; self.graph.len()];
        self.walk(&order, 0, 1.0, &mut levels, &mut |lv: &[usize], p| {
            dist[lv[target]] += p
        });
        Ok(dist)
    }

    /// Draws one row ancestrally into `levels` (graph order).
    fn draw_row(&self, rng: &mut CounterRng, levels: &mut [usize]) {
        for &i in self.graph.topo_ids() {
            let parents: Vec<usize> = self.parent_slots[i].iter().map(|&p| levels[p]).collect();
            levels[i] = rng.categorical(self.cpts[i].row(&parents));
        }
    }

    /// Draws row `r` of a sample with `seed`. Each row has its own stream,
    /// so any partition of rows across workers reproduces the same table.
    pub fn sample_row(&self, seed: u64, r: u64) -> Vec<u16> {
        let mut rng = CounterRng::for_stream(seed, r);
        let mut levels = vec![0usize; self.graph.len()];
        self.draw_row(&mut rng, &mut levels);
        levels.into_iter().map(|l| l as u16).collect()
    }

    /// Assembles rows (graph variable order) into a table.
    pub fn table_from_rows(&self, rows: &[Vec<u16>]) -> DataTable {
        let n = self.graph.len();
        let columns = (0..n).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
        DataTable::from_columns(self.schema(), columns).expect("sampled levels are in range")
    }

    /// `n` rows drawn ancestrally in topological order; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataTable, SynthError> {
        if n == 0 {
            return Err(SynthError::EmptySample);
        }
        let rows: Vec<Vec<u16>> = (0..n as u64).map(|r| self.sample_row(seed, r)).collect();
        Ok(self.table_from_rows(&rows))
    }

    /// The model under `do(variable = level)`: incoming edges are removed and
    /// the variable's table becomes a point mass. `self` is unchanged.
    pub fn intervene(&self, variable: &str, level: &str) -> Result<ScmSpec, SynthError> {
        let i = self.graph.require(variable)?;
        let var = &self.graph.variables()[i];
        let l = var.level_index(level).ok_or_else(|| SynthError::UnknownLevel {
            variable: variable.into(),
            level: level.into(),
        })?;
        let edges: Vec<(String, String)> = self
            .graph
            .edge_names()
            .into_iter()
            .filter(|(_, dst)| dst != variable)
            .collect();
        let graph = CausalDag::new(self.graph.variables().to_vec(), edges)?;
        let mut cpts = self.cpts.clone();
        cpts[i] = Cpt::point_mass(var, l);
        ScmSpec::new(graph, cpts)
    }

    /// Exact `Pr(outcome = outcome_level | do(treatment = level))`.
    pub fn interventional_probability(
        &self,
        treatment: &str,
        level: &str,
        outcome: &str,
        outcome_level: &str,
    ) -> Result<f64, SynthError> {
        let out = self.graph.require(outcome)?;
        let ol = self.graph.variables()[out]
            .level_index(outcome_level)
            .ok_or_else(|| SynthError::UnknownLevel {
                variable: outcome.into(),
                level: outcome_level.into(),
            })?;
        Ok(self.intervene(treatment, level)?.marginal(outcome)?[ol])
    }

    /// Exact interventional contrast between `level` and `reference`.
    pub fn oracle_effect(
        &self,
        treatment: &str,
        outcome: &str,
        outcome_level: &str,
        level: &str,
        reference: &str,
    ) -> Result<OracleEffect, SynthError> {
        let treated = self.interventional_probability(treatment, level, outcome, outcome_level)?;
        let control = self.interventional_probability(treatment, reference, outcome, outcome_level)?;
        if control <= 0.0 || control >= 1.0 {
            return Err(SynthError::ZeroDenominator(control));
        }
        let odds = |p: f64| p / (1.0 - p);
        Ok(OracleEffect {
            risk_treated: treated,
            risk_reference: control,
            risk_ratio: treated / control,
            odds_ratio: odds(treated) / odds(control),
        })
    }
}

/// Exact interventional risks for one contrast and their ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEffect {
    pub risk_treated: f64,
    pub risk_reference: f64,
    pub risk_ratio: f64,
    pub odds_ratio: f64,
}

/// Samples a designed study: for each unit, variables that are neither a
/// design factor nor downstream of one are drawn once; then for each design
/// row the factors are set by intervention and their descendants drawn.
/// Rows are unit-major, design-row-minor.
pub fn sample_study<S: AsRef<str>>(
    m: &ScmSpec,
    units: usize,
    design: &[Vec<(S, S)>],
    seed: u64,
) -> Result<DataTable, SynthError> {
    if units == 0 || design.is_empty() {
        return Err(SynthError::EmptySample);
    }
    let g = m.graph();
    let mut resolved: Vec<Vec<(usize, usize)>> = Vec::with_capacity(design.len());
    for row in design {
        let mut fixed = Vec::new();
        for (name, level) in row {
            let i = g.require(name.as_ref())?;
            let l = g.variables()[i]
                .level_index(level.as_ref())
                .ok_or_else(|| SynthError::UnknownLevel {
                    variable: name.as_ref().into(),
                    level: level.as_ref().into(),
                })?;
            fixed.push((i, l));
        }
        resolved.push(fixed);
    }
    let factor_ids: Vec<usize> = resolved.iter().flatten().map(|&(i, _)| i).collect();
    let downstream = g.descendant_mask(&factor_ids);

    let mut rows = Vec::with_capacity(units * design.len());
    for u in 0..units as u64 {
        let mut unit_rng = CounterRng::for_stream(seed, u << 32);
        let mut base = vec![0usize; g.len()];
        for &i in g.topo_ids() {
            if downstream[i] {
                continue;
            }
            let parents: Vec<usize> = m.parent_slots[i].iter().map(|&p| base[p]).collect();
            base[i] = unit_rng.categorical(m.cpts[i].row(&parents));
        }
        for (s, fixed) in resolved.iter().enumerate() {
            let mut rng = CounterRng::for_stream(seed, (u << 32) | (s as u64 + 1));
            let mut levels = base.clone();
            for &(i, l) in fixed {
                levels[i] = l;
            }
            for &i in g.topo_ids() {
                if !downstream[i] || fixed.iter().any(|&(f, _)| f == i) {
                    continue;
                }
                let parents: Vec<usize> = m.parent_slots[i].iter().map(|&p| levels[p]).collect();
                levels[i] = rng.categorical(m.cpts[i].row(&parents));
            }
            rows.push(levels.into_iter().map(|l| l as u16).collect());
        }
    }
    Ok(m.table_from_rows(&rows))
}
