//! Analyses shared by the command line and the HTTP service. Both front ends
//! call these functions, so identical inputs give identical reports.
//!
//! Independence tests and bootstrap replicates run on the rayon pool. Each
//! unit of work is a pure function of its index and results are collected in
//! index order, so output does not depend on scheduling.

use causeway_core::citest::{
    check_schema, ci_test, CiConfig, CiError, ImplicationPlan, ImplicationReport, TestStatistic,
};
use causeway_core::estimate::{
    adjusted_problem, Certification, EffectAnalysis, EffectProblem, EstimateConfig, EstimateError, Measure, Method,
    WeightKind, DEFAULT_REPLICATES,
};
use causeway_core::graph::{
    backdoor_trails, backdoor_violation, minimal_adjustment_sets, AdjustmentSet, CausalDag, GraphError, SeparationQuery,
};
use causeway_core::synth::ScmSpec;
use causeway_core::DataTable;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{
    AdjustmentDoc, AnalysisDoc, CertificationDoc, EstimateConfigDoc, EstimateDoc, ImplicationsConfig, ImplicationsDoc,
    Provenance, Report, ReportBody, SetCheckDoc, SimulationDoc,
};
use crate::table::table_to_string;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Ci(#[from] CiError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("unknown test statistic `{0}` (expected g2-williams, g2 or pearson)")]
    UnknownStatistic(String),
    #[error("unknown measure `{0}` (expected rr or or)")]
    UnknownMeasure(String),
    #[error("no set of observed variables blocks every back-door trail from {treatment} to {outcome}")]
    NoAdjustmentSet { treatment: String, outcome: String },
    #[error("sample size must be at least 1")]
    EmptySample,
}

impl AnalysisError {
    /// Whether the error stems from the request rather than the data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            AnalysisError::Graph(_)
                | AnalysisError::UnknownStatistic(_)
                | AnalysisError::UnknownMeasure(_)
                | AnalysisError::EmptySample
                | AnalysisError::Ci(CiError::Graph(_) | CiError::InvalidAlpha(_) | CiError::SchemaMismatch(_))
                | AnalysisError::Estimate(
                    EstimateError::Graph(_)
                        | EstimateError::SchemaMismatch(_)
                        | EstimateError::UnknownLevel { .. }
                        | EstimateError::InvalidAdjustment { .. }
                        | EstimateError::OutcomeLevelRequired { .. }
                        | EstimateError::TooFewReplicates(_)
                        | EstimateError::InvalidPredictors(_)
                )
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImplicationsRequest {
    pub alpha: f64,
    pub statistic: String,
}

impl Default for ImplicationsRequest {
    fn default() -> Self {
        ImplicationsRequest {
            alpha: causeway_core::citest::DEFAULT_ALPHA,
            statistic: TestStatistic::default().as_str().to_string(),
        }
    }
}

impl ImplicationsRequest {
    fn config(&self) -> Result<CiConfig, AnalysisError> {
        let statistic = TestStatistic::parse(&self.statistic)
            .ok_or_else(|| AnalysisError::UnknownStatistic(self.statistic.clone()))?;
        Ok(CiConfig {
            alpha: self.alpha,
            statistic,
        })
    }
}

/// Tests the graph's implications with claims evaluated in parallel.
pub fn test_implications_parallel(
    g: &CausalDag,
    t: &DataTable,
    config: &CiConfig,
) -> Result<ImplicationReport, CiError> {
    config.validate()?;
    check_schema(g, t)?;
    let plan = ImplicationPlan::new(g);
    let run = |qs: &[SeparationQuery]| {
        qs.par_iter()
            .map(|q| ci_test(t, &q.x, &q.y, &q.z, config))
            .collect::<Result<Vec<_>, _>>()
    };
    let claims = run(&plan.claims)?;
    let edges = run(&plan.edges)?;
    Ok(ImplicationReport::assemble(*config, claims, edges))
}

pub fn implications(g: &CausalDag, t: &DataTable, req: &ImplicationsRequest) -> Result<Report, AnalysisError> {
    let config = req.config()?;
    let report = test_implications_parallel(g, t, &config)?;
    let doc_config = ImplicationsConfig {
        alpha: config.alpha,
        statistic: config.statistic.as_str().into(),
    };
    let provenance = Provenance::new(Some(g), Some(t), &doc_config);
    Ok(Report::new(
        provenance,
        ReportBody::Implications(ImplicationsDoc::new(doc_config, &report)),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentRequest {
    pub treatment: String,
    pub outcome: String,
    /// Optional candidate set to check against the criterion.
    #[serde(default)]
    pub check: Option<Vec<String>>,
}

pub fn adjustment(g: &CausalDag, req: &AdjustmentRequest) -> Result<Report, AnalysisError> {
    let (x, y) = (req.treatment.as_str(), req.outcome.as_str());
    let trails = backdoor_trails(g, x, y)?;
    let sets = minimal_adjustment_sets(g, x, y)?;
    let checked = match &req.check {
        None => None,
        Some(names) => {
            let set = AdjustmentSet::new(names);
            let violation = backdoor_violation(g, x, y, &set)?;
            Some(SetCheckDoc {
                set: set.names().to_vec(),
                valid: violation.is_none(),
                violation: violation.map(|v| v.to_string()),
            })
        }
    };
    let doc = AdjustmentDoc {
        treatment: x.into(),
        outcome: y.into(),
        backdoor_trails: trails.iter().map(ToString::to_string).collect(),
        minimal_sets: sets.iter().map(|s| s.names().to_vec()).collect(),
        checked,
    };
    Ok(Report::new(
        Provenance::new(Some(g), None, req),
        ReportBody::Adjustment(doc),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateRequest {
    pub treatment: String,
    pub outcome: String,
    /// Adjustment set; the first minimal set when absent.
    pub adjustment: Option<Vec<String>>,
    /// Event level of the outcome; required for outcomes with more than two
    /// levels.
    pub outcome_level: Option<String>,
    pub measure: String,
    pub stabilized: bool,
    pub truncate: bool,
    pub replicates: usize,
    pub seed: u64,
    pub allow_invalid_adjustment: bool,
    pub compare_unadjusted: bool,
}

impl Default for EstimateRequest {
    fn default() -> Self {
        EstimateRequest {
            treatment: String::new(),
            outcome: String::new(),
            adjustment: None,
            outcome_level: None,
            measure: Measure::default().as_str().into(),
            stabilized: true,
            truncate: false,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            allow_invalid_adjustment: false,
            compare_unadjusted: false,
        }
    }
}

/// Runs a problem's bootstrap on the rayon pool.
pub fn run_problem(problem: &EffectProblem, certification: Certification) -> Result<EffectAnalysis, EstimateError> {
    let point = problem.point()?;
    let cfg = problem.config();
    if cfg.replicates == 0 {
        return problem.assemble(point, None, certification);
    }
    let results: Vec<_> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| problem.replicate(cfg.seed, r))
        .collect();
    problem.assemble(point, Some(&results), certification)
}

pub fn estimate(g: &CausalDag, t: &DataTable, req: &EstimateRequest) -> Result<Report, AnalysisError> {
    let (x, y) = (req.treatment.as_str(), req.outcome.as_str());
    let measure = Measure::parse(&req.measure).ok_or_else(|| AnalysisError::UnknownMeasure(req.measure.clone()))?;
    let (adjustment, source) = match &req.adjustment {
        Some(names) => (AdjustmentSet::new(names), "requested"),
        None => {
            let sets = minimal_adjustment_sets(g, x, y)?;
            let first = sets.into_iter().next().ok_or_else(|| AnalysisError::NoAdjustmentSet {
                treatment: x.into(),
                outcome: y.into(),
            })?;
            (first, "minimal")
        }
    };
    let config = EstimateConfig {
        outcome_level: req.outcome_level.clone(),
        measure,
        weights: if req.stabilized {
            WeightKind::Stabilized
        } else {
            WeightKind::Unstabilized
        },
        truncate: req.truncate,
        replicates: req.replicates,
        seed: req.seed,
        allow_invalid_adjustment: req.allow_invalid_adjustment,
    };
    let (problem, certification) = adjusted_problem(g, t, x, y, &adjustment, &config)?;
    let adjusted = run_problem(&problem, certification.clone())?;
    let unadjusted = if req.compare_unadjusted {
        let p = EffectProblem::new(t, x, y, &AdjustmentSet::empty(), Method::Unadjusted, &config)?;
        Some(run_problem(&p, Certification::NotChecked)?)
    } else {
        None
    };
    let outcome_level = adjusted.estimates.first().map_or_else(
        || req.outcome_level.clone().unwrap_or_default(),
        |e| e.outcome_level.clone(),
    );
    let doc_config = EstimateConfigDoc {
        treatment: x.into(),
        outcome: y.into(),
        outcome_level,
        adjustment: adjustment.names().to_vec(),
        adjustment_source: source.into(),
        measure: measure.as_str().into(),
        weights: crate::report::weight_kind_str(config.weights).into(),
        truncate: req.truncate,
        replicates: req.replicates,
        seed: req.seed,
        allow_invalid_adjustment: req.allow_invalid_adjustment,
        compare_unadjusted: req.compare_unadjusted,
    };
    let doc = EstimateDoc {
        certification: CertificationDoc::from(&certification),
        adjusted: AnalysisDoc::from(&adjusted),
        unadjusted: unadjusted.as_ref().map(AnalysisDoc::from),
        config: doc_config,
    };
    let provenance = Provenance::new(Some(g), Some(t), &doc.config);
    Ok(Report::new(provenance, ReportBody::Estimate(doc)))
}

/// Samples `n` rows in parallel. Rows are drawn from independent counter
/// streams, so the table equals [`ScmSpec::sample`] for the same seed.
pub fn sample_parallel(m: &ScmSpec, n: usize, seed: u64) -> Result<DataTable, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::EmptySample);
    }
    let rows: Vec<Vec<u16>> = (0..n as u64).into_par_iter().map(|r| m.sample_row(seed, r)).collect();
    Ok(m.table_from_rows(&rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SimulationConfig<'a> {
    model: &'a str,
    rows: usize,
    seed: u64,
    layout: &'a str,
}

/// Wraps sampled data in a report.
pub fn simulation_report(m: &ScmSpec, model: &str, t: &DataTable, seed: u64, layout: &str) -> Report {
    let config = SimulationConfig {
        model,
        rows: t.n_rows(),
        seed,
        layout,
    };
    let provenance = Provenance::new(Some(m.graph()), Some(t), &config);
    Report::new(
        provenance,
        ReportBody::Simulation(SimulationDoc {
            model: model.into(),
            rows: t.n_rows(),
            seed,
            layout: layout.into(),
            csv: table_to_string(t),
        }),
    )
}
