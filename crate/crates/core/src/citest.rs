//! Conditional-independence testing of categorical data and the
//! graph-against-data implication report.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::data::{stratified_counts, ContingencyTable, DataError, DataTable};
use crate::graph::{implied_independencies, CausalDag, GraphError, SeparationQuery};
use crate::special::chi2_sf;

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Expected cell count below which a result is flagged [`TestFlag::LowCount`].
pub const LOW_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CiError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("`{0}` has fewer than two observed levels")]
    DegenerateTable(String),
    #[error("significance level {0} is outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("graph and data schemas disagree: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestStatistic {
    /// G² with Williams' correction: each stratum's deviance is divided by
    /// `q = 1 + (n Σ 1/rᵢ - 1)(n Σ 1/cⱼ - 1) / (6 n dof)`. Without it, G² runs
    /// well above its chi-squared reference once strata get sparse.
    #[default]
    GSquaredWilliams,
    /// Likelihood-ratio deviance `2 Σ o ln(o/e)`, uncorrected.
    GSquared,
    /// Pearson `Σ (o - e)² / e`.
    Pearson,
}

impl TestStatistic {
    pub const ALL: [TestStatistic; 3] = [
        TestStatistic::GSquaredWilliams,
        TestStatistic::GSquared,
        TestStatistic::Pearson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestStatistic::GSquaredWilliams => "g2-williams",
            TestStatistic::GSquared => "g2",
            TestStatistic::Pearson => "pearson",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiConfig {
    pub alpha: f64,
    pub statistic: TestStatistic,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            alpha: DEFAULT_ALPHA,
            statistic: TestStatistic::GSquaredWilliams,
        }
    }
}

impl CiConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        CiConfig {
            alpha,
            ..CiConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), CiError> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(CiError::InvalidAlpha(self.alpha))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Independent,
    Dependent,
    /// No stratum had two observed levels on both axes.
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Independent => "Independent",
            Verdict::Dependent => "Dependent",
            Verdict::Undetermined => "Undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFlag {
    /// Some stratum had an expected cell count below [`LOW_EXPECTED_COUNT`].
    LowCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceTestResult {
    pub claim: SeparationQuery,
    /// Value referred to the chi-squared distribution; see [`TestStatistic`].
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub verdict: Verdict,
    pub flags: Vec<TestFlag>,
}

impl IndependenceTestResult {
    pub fn low_count(&self) -> bool {
        self.flags.contains(&TestFlag::LowCount)
    }
}

impl fmt::Display for IndependenceTestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}  {}  {}", self.claim, format_p_value(self.p_value), self.verdict)
    }
}

/// Renders p-values the way statistical packages print them:
/// `p=0.504`, `p=3.57E-10`, `p<2.2E-16`, `p=1`.
pub fn format_p_value(p: f64) -> String {
    if p < 2.2e-16 {
        "p<2.2E-16".to_string()
    } else if p < 1e-3 {
        alloc::format!("p={p:.2E}")
    } else {
        let s = alloc::format!("{p:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        alloc::format!("p={s}")
    }
}

/// Statistic and degrees of freedom contributed by one stratum, after
/// dropping all-zero rows and columns.
fn stratum_statistic(table: &ContingencyTable, kind: TestStatistic, low_count: &mut bool) -> (f64, usize) {
    let rows: Vec<u64> = (0..table.n_x)
        .map(|i| (0..table.n_y).map(|j| table.get(i, j)).sum())
        .collect();
    let cols: Vec<u64> = (0..table.n_y)
        .map(|j| (0..table.n_x).map(|i| table.get(i, j)).sum())
        .collect();
    let live_rows = rows.iter().filter(|&&r| r > 0).count();
    let live_cols = cols.iter().filter(|&&c| c > 0).count();
    if live_rows < 2 || live_cols < 2 {
        return (0.0, 0);
    }
    let n = table.total() as f64;
    let mut stat = 0.0;
    for i in (0..table.n_x).filter(|&i| rows[i] > 0) {
        for j in (0..table.n_y).filter(|&j| cols[j] > 0) {
            let expected = rows[i] as f64 * cols[j] as f64 / n;
            if expected < LOW_EXPECTED_COUNT {
                *low_count = true;
            }
            let observed = table.get(i, j) as f64;
            stat += match kind {
                TestStatistic::GSquared | TestStatistic::GSquaredWilliams if observed > 0.0 => {
                    2.0 * observed * libm::log(observed / expected)
                }
                TestStatistic::GSquared | TestStatistic::GSquaredWilliams => 0.0,
                TestStatistic::Pearson => (observed - expected) * (observed - expected) / expected,
            };
        }
    }
    let dof = (live_rows - 1) * (live_cols - 1);
    if kind == TestStatistic::GSquaredWilliams {
        let inv_sum = |margins: &[u64]| margins.iter().filter(|&&m| m > 0).map(|&m| 1.0 / m as f64).sum::<f64>();
        let q = 1.0 + (n * inv_sum(&rows) - 1.0) * (n * inv_sum(&cols) - 1.0) / (6.0 * n * dof as f64);
        stat /= q;
    }
    (stat.max(0.0), dof)
}

/// Tests `x ⊥ y | z` on `t`.
///
/// The statistic is summed over the non-empty strata of `z`; the result is
/// computed on a canonical (name-ordered) orientation of the pair, so it is
/// exactly symmetric in `x` and `y`.
pub fn ci_test<S: AsRef<str>>(
    t: &DataTable,
    x: &str,
    y: &str,
    z: &[S],
    config: &CiConfig,
) -> Result<IndependenceTestResult, CiError> {
    config.validate()?;
    let claim = SeparationQuery::new(x, y, z.iter().map(AsRef::as_ref));
    let (first, second) = if x <= y { (x, y) } else { (y, x) };
    let strata = stratified_counts(t, first, second, &claim.z)?;

    for name in [first, second] {
        let observed = t.frequencies(name)?.iter().filter(|&&f| f > 0.0).count();
        if observed < 2 {
            return Err(CiError::DegenerateTable(name.to_string()));
        }
    }

    let mut low_count = false;
    let (mut statistic, mut dof) = (0.0, 0usize);
    for table in &strata {
        let (s, d) = stratum_statistic(table, config.statistic, &mut low_count);
        statistic += s;
        dof += d;
    }
    let (p_value, verdict) = if dof == 0 {
        (1.0, Verdict::Undetermined)
    } else {
        let p = chi2_sf(statistic, dof);
        (
            p,
            if p > config.alpha {
                Verdict::Independent
            } else {
                Verdict::Dependent
            },
        )
    };
    let mut flags = Vec::new();
    if low_count {
        flags.push(TestFlag::LowCount);
    }
    Ok(IndependenceTestResult {
        claim,
        statistic,
        dof,
        p_value,
        verdict,
        flags,
    })
}

/// Result of testing one graph edge `src -> dst` for support in the data:
/// `src ⊥ dst | parents(dst) \ {src}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTest {
    pub src: String,
    pub dst: String,
    pub result: IndependenceTestResult,
}

impl EdgeTest {
    /// The data cannot distinguish the edge from its absence.
    pub fn unsupported(&self) -> bool {
        self.result.verdict == Verdict::Independent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitVerdict {
    Consistent,
    Inconsistent,
}

impl fmt::Display for FitVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitVerdict::Consistent => "Consistent",
            FitVerdict::Inconsistent => "Inconsistent",
        })
    }
}

/// Claims and edge tests planned for a graph, in report order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicationPlan {
    pub claims: Vec<SeparationQuery>,
    pub edges: Vec<SeparationQuery>,
}

impl ImplicationPlan {
    pub fn new(g: &CausalDag) -> Self {
        let claims = implied_independencies(g);
        let edges = g
            .edge_names()
            .into_iter()
            .map(|(src, dst)| {
                let z: Vec<&str> = g
                    .parents(&dst)
                    .expect("edge endpoint is declared")
                    .into_iter()
                    .filter(|p| *p != src)
                    .collect();
                SeparationQuery::new(src, dst, z)
            })
            .collect();
        ImplicationPlan { claims, edges }
    }
}

/// How well a graph's testable implications fit a data table.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicationReport {
    pub config: CiConfig,
    pub claims: Vec<IndependenceTestResult>,
    /// Indices into `claims`: the graph implies independence, the data
    /// rejects it.
    pub violated: Vec<usize>,
    pub edge_tests: Vec<EdgeTest>,
    /// Indices into `edge_tests` whose endpoints test as conditionally
    /// independent.
    pub unsupported: Vec<usize>,
    pub verdict: FitVerdict,
}

impl ImplicationReport {
    /// Builds a report from results produced for an [`ImplicationPlan`], in
    /// plan order.
    pub fn assemble(
        config: CiConfig,
        claims: Vec<IndependenceTestResult>,
        edge_results: Vec<IndependenceTestResult>,
    ) -> Self {
        let violated: Vec<usize> = claims
            .iter()
            .enumerate()
            .filter(|(_, r)| r.verdict == Verdict::Dependent)
            .map(|(i, _)| i)
            .collect();
        let edge_tests: Vec<EdgeTest> = edge_results
            .into_iter()
            .map(|result| EdgeTest {
                src: result.claim.x.clone(),
                dst: result.claim.y.clone(),
                result,
            })
            .collect();
        let unsupported: Vec<usize> = edge_tests
            .iter()
            .enumerate()
            .filter(|(_, e)| e.unsupported())
            .map(|(i, _)| i)
            .collect();
        let verdict = if violated.is_empty() && unsupported.is_empty() {
            FitVerdict::Consistent
        } else {
            FitVerdict::Inconsistent
        };
        ImplicationReport {
            config,
            claims,
            violated,
            edge_tests,
            unsupported,
            verdict,
        }
    }

    pub fn violated_claims(&self) -> impl Iterator<Item = &IndependenceTestResult> {
        self.violated.iter().map(move |&i| &self.claims[i])
    }

    pub fn unsupported_edges(&self) -> impl Iterator<Item = &EdgeTest> {
        self.unsupported.iter().map(move |&i| &self.edge_tests[i])
    }
}

/// Checks that every graph variable exists in the table with the same levels.
pub fn check_schema(g: &CausalDag, t: &DataTable) -> Result<(), CiError> {
    for v in g.variables() {
        match t.schema().variable(v.name()) {
            None => {
                return Err(CiError::SchemaMismatch(alloc::format!(
                    "`{}` is not in the data",
                    v.name()
                )))
            }
            Some(d) if d.levels() != v.levels() => {
                return Err(CiError::SchemaMismatch(alloc::format!(
                    "`{}` has levels [{}] in the graph but [{}] in the data",
                    v.name(),
                    v.levels().join(","),
                    d.levels().join(",")
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Tests every local Markov claim of `g`, plus every edge against its
/// target's other parents, on `t`.
pub fn test_implications(g: &CausalDag, t: &DataTable, config: &CiConfig) -> Result<ImplicationReport, CiError> {
    config.validate()?;
    check_schema(g, t)?;
    let plan = ImplicationPlan::new(g);
    let run = |q: &SeparationQuery| ci_test(t, &q.x, &q.y, &q.z, config);
    let claims = plan.claims.iter().map(run).collect::<Result<Vec<_>, _>>()?;
    let edges = plan.edges.iter().map(run).collect::<Result<Vec<_>, _>>()?;
    Ok(ImplicationReport::assemble(*config, claims, edges))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EditKind {
    RemoveEdge,
}

/// A suggested graph edit with the test that motivates it.
#[derive(Debug, Clone, PartialEq)]
pub struct EditProposal {
    pub kind: EditKind,
    pub src: String,
    pub dst: String,
    pub evidence: IndependenceTestResult,
}

impl fmt::Display for EditProposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EditKind::RemoveEdge => write!(
                f,
                "remove {}→{} ({}, {})",
                self.src,
                self.dst,
                self.evidence.claim,
                format_p_value(self.evidence.p_value)
            ),
        }
    }
}

/// One remove-edge proposal per unsupported edge. Never edits a graph.
pub fn suggest_edits(report: &ImplicationReport) -> Vec<EditProposal> {
    report
        .unsupported_edges()
        .map(|e| EditProposal {
            kind: EditKind::RemoveEdge,
            src: e.src.clone(),
            dst: e.dst.clone(),
            evidence: e.result.clone(),
        })
        .collect()
}
