//! Versioned report documents and their text renderings.
//!
//! Every report is one JSON object with `format`, `version`, `kind` and
//! `provenance` fields followed by kind-specific content. The same document
//! is written by the CLI (`--out`) and returned by the HTTP service.

use std::fmt::Write as _;

use causeway_core::citest::{format_p_value, ImplicationReport, IndependenceTestResult, TestFlag};
use causeway_core::estimate::{Certification, Convergence, EffectAnalysis, WeightKind};
use causeway_core::graph::CausalDag;
use causeway_core::DataTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dagfile::canonical_dag;
use crate::table::table_to_string;

pub const REPORT_FORMAT: &str = "causeway-report";
pub const REPORT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn graph_id(g: &CausalDag) -> String {
    short_hash(canonical_dag(g).as_bytes())
}

pub fn data_id(t: &DataTable) -> String {
    short_hash(table_to_string(t).as_bytes())
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    short_hash(&serde_json::to_vec(config).expect("config serializes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub graph_id: Option<String>,
    pub data_id: Option<String>,
    pub config_hash: String,
}

impl Provenance {
    pub fn new<T: Serialize>(g: Option<&CausalDag>, t: Option<&DataTable>, config: &T) -> Self {
        Provenance {
            tool_version: TOOL_VERSION.to_string(),
            graph_id: g.map(graph_id),
            data_id: t.map(data_id),
            config_hash: config_hash(config),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: ReportBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)] // built once per request
pub enum ReportBody {
    Validation(ValidationDoc),
    Implications(ImplicationsDoc),
    Adjustment(AdjustmentDoc),
    Estimate(EstimateDoc),
    Simulation(SimulationDoc),
}

impl Report {
    pub fn new(provenance: Provenance, body: ReportBody) -> Self {
        Report {
            format: REPORT_FORMAT.to_string(),
            version: REPORT_VERSION,
            provenance,
            body,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.body {
            ReportBody::Validation(_) => "validation",
            ReportBody::Implications(_) => "implications",
            ReportBody::Adjustment(_) => "adjustment",
            ReportBody::Estimate(_) => "estimate",
            ReportBody::Simulation(_) => "simulation",
        }
    }

    /// Content address: identical inputs give identical ids.
    pub fn id(&self) -> String {
        let p = &self.provenance;
        let key = format!(
            "{}|{}|{}|{}",
            self.kind(),
            p.graph_id.as_deref().unwrap_or("-"),
            p.data_id.as_deref().unwrap_or("-"),
            p.config_hash
        );
        short_hash(key.as_bytes())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        match &self.body {
            ReportBody::Validation(d) => d.render(),
            ReportBody::Implications(d) => d.render(),
            ReportBody::Adjustment(d) => d.render(),
            ReportBody::Estimate(d) => d.render(),
            ReportBody::Simulation(d) => d.render(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationDoc {
    pub variables: usize,
    pub edges: usize,
    pub has_model: bool,
}

impl ValidationDoc {
    fn render(&self) -> String {
        let what = if self.has_model { "structural model" } else { "DAG" };
        format!("valid {what}: {} variables, {} edges\n", self.variables, self.edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationsConfig {
    pub alpha: f64,
    pub statistic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDoc {
    pub claim: String,
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub verdict: String,
    pub flags: Vec<String>,
}

impl From<&IndependenceTestResult> for TestDoc {
    fn from(r: &IndependenceTestResult) -> Self {
        TestDoc {
            claim: r.claim.to_string(),
            x: r.claim.x.clone(),
            y: r.claim.y.clone(),
            given: r.claim.z.clone(),
            statistic: r.statistic,
            dof: r.dof,
            p_value: r.p_value,
            verdict: r.verdict.to_string(),
            flags: r
                .flags
                .iter()
                .map(|f| match f {
                    TestFlag::LowCount => "low-count".to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub src: String,
    pub dst: String,
    pub test: TestDoc,
    pub supported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalDoc {
    /// Same shape as an edit accepted by the service.
    pub op: String,
    pub src: String,
    pub dst: String,
    pub evidence: TestDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationsDoc {
    pub config: ImplicationsConfig,
    pub claims: Vec<TestDoc>,
    /// Indices into `claims`.
    pub violated: Vec<usize>,
    pub edges: Vec<EdgeDoc>,
    pub proposals: Vec<ProposalDoc>,
    pub verdict: String,
}

impl ImplicationsDoc {
    pub fn new(config: ImplicationsConfig, r: &ImplicationReport) -> Self {
        let edges = r
            .edge_tests
            .iter()
            .map(|e| EdgeDoc {
                src: e.src.clone(),
                dst: e.dst.clone(),
                test: (&e.result).into(),
                supported: !e.unsupported(),
            })
            .collect();
        let proposals = causeway_core::citest::suggest_edits(r)
            .into_iter()
            .map(|p| ProposalDoc {
                op: "remove-edge".into(),
                src: p.src,
                dst: p.dst,
                evidence: (&p.evidence).into(),
            })
            .collect();
        ImplicationsDoc {
            config,
            claims: r.claims.iter().map(TestDoc::from).collect(),
            violated: r.violated.clone(),
            edges,
            proposals,
            verdict: r.verdict.to_string(),
        }
    }

    pub fn consistent(&self) -> bool {
        self.verdict == "Consistent"
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Conditional independence tests (alpha = {}, {})",
            self.config.alpha, self.config.statistic
        );
        let rows: Vec<[String; 3]> = self
            .claims
            .iter()
            .map(|c| [c.claim.clone(), format_p_value(c.p_value), verdict_cell(c)])
            .collect();
        table(&mut out, ["Implied independence", "p-value", "Verdict"], &rows);
        out.push('\n');
        let _ = writeln!(out, "Edge support (source ⊥ target | other parents of target)");
        let rows: Vec<[String; 3]> = self
            .edges
            .iter()
            .map(|e| {
                [
                    format!("{}→{}", e.src, e.dst),
                    format_p_value(e.test.p_value),
                    if e.supported {
                        "supported".into()
                    } else {
                        "unsupported".into()
                    },
                ]
            })
            .collect();
        table(&mut out, ["Edge", "p-value", "Status"], &rows);
        out.push('\n');
        let unsupported = self.edges.iter().filter(|e| !e.supported).count();
        let _ = writeln!(
            out,
            "Verdict: {} ({} of {} claims violated, {} of {} edges unsupported)",
            self.verdict,
            self.violated.len(),
            self.claims.len(),
            unsupported,
            self.edges.len()
        );
        for v in &self.violated {
            let _ = writeln!(out, "  violated: {}", self.claims[*v].claim);
        }
        if !self.proposals.is_empty() {
            let _ = writeln!(out, "Suggested edits:");
            for p in &self.proposals {
                let _ = writeln!(
                    out,
                    "  remove {}→{} ({}, {})",
                    p.src,
                    p.dst,
                    p.evidence.claim,
                    format_p_value(p.evidence.p_value)
                );
            }
        }
        out
    }
}

fn verdict_cell(c: &TestDoc) -> String {
    if c.flags.is_empty() {
        c.verdict.clone()
    } else {
        format!("{} ({})", c.verdict, c.flags.join(", "))
    }
}

/// Left-aligned columns separated by two spaces.
fn table<const N: usize>(out: &mut String, header: [&str; N], rows: &[[String; N]]) {
    let mut width: [usize; N] = header.map(|h| h.chars().count());
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut line = |cells: [&str; N]| {
        let mut s = String::new();
        for (k, (cell, w)) in cells.iter().zip(width).enumerate() {
            if k + 1 == N {
                s.push_str(cell);
            } else {
                let _ = write!(s, "{cell}{}  ", " ".repeat(w - cell.chars().count()));
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header);
    for row in rows {
        line(row.each_ref().map(String::as_str));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetCheckDoc {
    pub set: Vec<String>,
    pub valid: bool,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentDoc {
    pub treatment: String,
    pub outcome: String,
    pub backdoor_trails: Vec<String>,
    /// Inclusion-minimal valid sets, smallest first.
    pub minimal_sets: Vec<Vec<String>>,
    pub checked: Option<SetCheckDoc>,
}

fn set_text(set: &[String]) -> String {
    if set.is_empty() {
        "∅ (no adjustment needed)".into()
    } else {
        format!("{{{}}}", set.join(", "))
    }
}

impl AdjustmentDoc {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Back-door trails from {} to {}:", self.treatment, self.outcome);
        if self.backdoor_trails.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        for t in &self.backdoor_trails {
            let _ = writeln!(out, "  {t}");
        }
        let rows: Vec<[String; 2]> = self
            .minimal_sets
            .iter()
            .map(|s| [self.treatment.clone(), set_text(s)])
            .collect();
        let _ = writeln!(
            out,
            "Minimal adjustment sets for {} → {}:",
            self.treatment, self.outcome
        );
        if rows.is_empty() {
            let _ = writeln!(out, "  none: no set of observed variables blocks every back-door trail");
        } else {
            table(&mut out, ["Treatment", "Confounders in back-door paths"], &rows);
        }
        if let Some(c) = &self.checked {
            match &c.violation {
                None => _ = writeln!(out, "{} is a valid adjustment set", set_text(&c.set)),
                Some(v) => _ = writeln!(out, "{} is not a valid adjustment set: {v}", set_text(&c.set)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateConfigDoc {
    pub treatment: String,
    pub outcome: String,
    pub outcome_level: String,
    pub adjustment: Vec<String>,
    /// `"minimal"` when chosen automatically, `"requested"` otherwise.
    pub adjustment_source: String,
    pub measure: String,
    pub weights: String,
    pub truncate: bool,
    pub replicates: usize,
    pub seed: u64,
    pub allow_invalid_adjustment: bool,
    pub compare_unadjusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastDoc {
    pub level: String,
    pub reference: String,
    pub odds_ratio: f64,
    pub risk_ratio: f64,
    pub risk_level: f64,
    pub risk_reference: f64,
    /// Value of the headline measure.
    pub point: f64,
    pub interval: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDoc {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

impl From<&Convergence> for ConvergenceDoc {
    fn from(c: &Convergence) -> Self {
        ConvergenceDoc {
            iterations: c.iterations,
            gradient_norm: c.gradient_norm,
            converged: c.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsDoc {
    pub kind: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub level_means: Vec<(String, f64)>,
    pub truncated_at: Option<[f64; 2]>,
    pub mean_near_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDoc {
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDoc {
    pub method: String,
    pub adjustment: Vec<String>,
    pub contrasts: Vec<ContrastDoc>,
    pub weights: WeightsDoc,
    pub propensity_model: Option<ConvergenceDoc>,
    pub outcome_model: ConvergenceDoc,
    pub bootstrap: Option<BootstrapDoc>,
}

pub fn weight_kind_str(k: WeightKind) -> &'static str {
    match k {
        WeightKind::Stabilized => "stabilized",
        WeightKind::Unstabilized => "unstabilized",
    }
}

impl From<&EffectAnalysis> for AnalysisDoc {
    fn from(a: &EffectAnalysis) -> Self {
        let w = &a.weights;
        AnalysisDoc {
            method: a.estimates.first().map_or_else(String::new, |e| e.method.to_string()),
            adjustment: a
                .estimates
                .first()
                .map(|e| e.adjustment.names().to_vec())
                .unwrap_or_default(),
            contrasts: a
                .estimates
                .iter()
                .map(|e| ContrastDoc {
                    level: e.level.clone(),
                    reference: e.reference.clone(),
                    odds_ratio: e.odds_ratio,
                    risk_ratio: e.risk_ratio,
                    risk_level: e.risk_level,
                    risk_reference: e.risk_reference,
                    point: e.point(),
                    interval: e.interval.map(|i| [i.low, i.high]),
                })
                .collect(),
            weights: WeightsDoc {
                kind: weight_kind_str(a.weight_kind).into(),
                min: w.min,
                max: w.max,
                mean: w.mean,
                level_means: w.level_means.clone(),
                truncated_at: w.truncated_at.map(|(l, h)| [l, h]),
                mean_near_one: w.mean_near_one(),
            },
            propensity_model: a.propensity.as_ref().map(ConvergenceDoc::from),
            outcome_model: (&a.outcome_model).into(),
            bootstrap: a.bootstrap.as_ref().map(|b| BootstrapDoc {
                replicates: b.replicates,
                failed: b.failed,
                seed: b.seed,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationDoc {
    /// `certified`, `overridden` or `not-checked`.
    pub status: String,
    pub violation: Option<String>,
}

impl From<&Certification> for CertificationDoc {
    fn from(c: &Certification) -> Self {
        let (status, violation) = match c {
            Certification::Certified => ("certified", None),
            Certification::Overridden(v) => ("overridden", Some(v.to_string())),
            Certification::NotChecked => ("not-checked", None),
        };
        CertificationDoc {
            status: status.into(),
            violation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDoc {
    pub config: EstimateConfigDoc,
    pub certification: CertificationDoc,
    pub adjusted: AnalysisDoc,
    pub unadjusted: Option<AnalysisDoc>,
}

fn interval_text(c: &ContrastDoc) -> String {
    c.interval
        .map_or_else(|| "—".into(), |[l, h]| format!("[{l:.3}, {h:.3}]"))
}

impl EstimateDoc {
    pub fn render(&self) -> String {
        let cfg = &self.config;
        let measure = if cfg.measure == "or" {
            "odds ratio"
        } else {
            "risk ratio"
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Effect of {} on {} = {} ({measure}, {} weights)",
            cfg.treatment, cfg.outcome, cfg.outcome_level, cfg.weights
        );
        let _ = writeln!(
            out,
            "Adjustment set: {} [{}]",
            set_text(&cfg.adjustment),
            self.certification.status
        );
        if let Some(v) = &self.certification.violation {
            let _ = writeln!(out, "Warning: {v}");
        }
        out.push('\n');
        match &self.unadjusted {
            None => {
                let rows: Vec<[String; 4]> = self
                    .adjusted
                    .contrasts
                    .iter()
                    .map(|c| {
                        [
                            format!("{}: {} vs {}", cfg.treatment, c.level, c.reference),
                            format!("{:.3}", c.point),
                            interval_text(c),
                            format!("RR {:.3} / OR {:.3}", c.risk_ratio, c.odds_ratio),
                        ]
                    })
                    .collect();
                table(
                    &mut out,
                    ["Contrast", "Estimate", "95% interval", "Both measures"],
                    &rows,
                );
            }
            Some(u) => {
                let rows: Vec<[String; 5]> = self
                    .adjusted
                    .contrasts
                    .iter()
                    .zip(&u.contrasts)
                    .map(|(a, n)| {
                        [
                            format!("{}: {} vs {}", cfg.treatment, a.level, a.reference),
                            format!("{:.3}", a.point),
                            interval_text(a),
                            format!("{:.3}", n.point),
                            interval_text(n),
                        ]
                    })
                    .collect();
                table(
                    &mut out,
                    ["Contrast", "Adjusted", "95% interval", "Unadjusted", "95% interval"],
                    &rows,
                );
            }
        }
        out.push('\n');
        let w = &self.adjusted.weights;
        let _ = writeln!(
            out,
            "Weights: min {:.3}, max {:.3}, mean {:.3}{}",
            w.min,
            w.max,
            w.mean,
            if w.mean_near_one || w.kind != "stabilized" {
                ""
            } else {
                " (mean far from 1: check positivity)"
            }
        );
        if let Some(b) = &self.adjusted.bootstrap {
            let _ = writeln!(
                out,
                "Bootstrap: {} replicates, {} failed, seed {}",
                b.replicates, b.failed, b.seed
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationDoc {
    pub model: String,
    pub rows: usize,
    pub seed: u64,
    pub layout: String,
    /// The sampled data as CSV text.
    pub csv: String,
}

impl SimulationDoc {
    fn render(&self) -> String {
        format!(
            "sampled {} rows from {} (seed {}, {})\n",
            self.rows, self.model, self.seed, self.layout
        )
    }
}
