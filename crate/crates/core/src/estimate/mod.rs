//! Effect estimation by inverse-probability weighting.
//!
//! An [`EffectProblem`] reduces a table to counts over
//! (adjustment pattern, treatment level, outcome indicator). The propensity
//! model, the weights and the weighted outcome model are all functions of
//! those counts, and a bootstrap replicate only changes them by row
//! multiplicities. Replicate `r` depends on nothing but `(seed, r)`, so
//! replicates can be computed in any order or in parallel.

mod design;
mod logistic;
mod weights;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

pub use design::Encoding;
pub use logistic::{
    fit_logistic, fit_logistic_weighted, fit_multinomial, fit_multinomial_weighted, Convergence, LogisticModel,
    GRADIENT_TOLERANCE, MAX_ITERATIONS, RIDGE,
};
pub use weights::{
    ip_weights, propensity_scores, treatment_association, truncate_weights, Association, WeightDiagnostics, WeightKind,
    WeightVector, STABILIZED_MEAN_TOLERANCE, TRUNCATION_PERCENTILES,
};

use crate::data::{DataError, DataTable};
use crate::graph::{backdoor_violation, AdjustmentSet, BackdoorViolation, CausalDag, GraphError, Variable};
use crate::rng::{derive_key, CounterRng};
use design::Patterns;
use logistic::{solve_grouped, Solved};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid predictors: {0}")]
    InvalidPredictors(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("`{variable}` has no level `{level}`")]
    UnknownLevel { variable: String, level: String },
    #[error("outcome `{0}` has a single observed class")]
    DegenerateOutcome(String),
    #[error("level `{level}` of `{variable}` does not occur in the data")]
    UnobservedLevel { variable: String, level: String },
    #[error("perfect separation fitting `{outcome}`: coefficients for `{predictor}` diverge")]
    PerfectSeparation { outcome: String, predictor: String },
    #[error("row {row}: value {value} is not a usable score or weight")]
    NonFinite { row: usize, value: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("`{outcome}` has {levels} levels; name the level to model")]
    OutcomeLevelRequired { outcome: String, levels: usize },
    #[error("{set} is not a valid adjustment set: {violation}")]
    InvalidAdjustment { set: String, violation: BackdoorViolation },
    #[error("outcome risk is zero at reference level `{0}`")]
    ZeroRisk(String),
    #[error("{failed} of {replicates} bootstrap replicates failed (limit is 20%)")]
    TooManyFailures { failed: usize, replicates: usize },
    #[error("bootstrap needs at least {MIN_REPLICATES} replicates, got {0}")]
    TooFewReplicates(usize),
}

pub const MIN_REPLICATES: usize = 100;
pub const DEFAULT_REPLICATES: usize = 500;
/// Largest tolerated share of failed bootstrap replicates.
pub const MAX_FAILURE_SHARE: f64 = 0.2;
/// Domain separator so bootstrap draws never reuse sampler streams.
const BOOTSTRAP_DOMAIN: u64 = 0xB007_57A9;

/// Measure carried by the interval and shown as the headline value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    #[default]
    RiskRatio,
    OddsRatio,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::RiskRatio => "rr",
            Measure::OddsRatio => "or",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rr" => Some(Measure::RiskRatio),
            "or" => Some(Measure::OddsRatio),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Adjusted,
    Unadjusted,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Adjusted => "Adjusted",
            Method::Unadjusted => "Unadjusted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    /// Outcome level counted as the event. May be omitted for binary
    /// outcomes, where the non-reference level is used.
    pub outcome_level: Option<String>,
    pub measure: Measure,
    pub weights: WeightKind,
    pub truncate: bool,
    /// Bootstrap replicates; 0 skips the interval.
    pub replicates: usize,
    pub seed: u64,
    /// Estimate even when the adjustment set fails the back-door check.
    pub allow_invalid_adjustment: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            outcome_level: None,
            measure: Measure::RiskRatio,
            weights: WeightKind::Stabilized,
            truncate: false,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            allow_invalid_adjustment: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// One treatment contrast, `level` against the reference level.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub treatment: String,
    pub level: String,
    pub reference: String,
    pub outcome: String,
    pub outcome_level: String,
    pub odds_ratio: f64,
    pub risk_ratio: f64,
    /// Weighted outcome risk at `level` and at the reference level.
    pub risk_level: f64,
    pub risk_reference: f64,
    pub measure: Measure,
    /// 95% percentile-bootstrap interval for `measure`.
    pub interval: Option<Interval>,
    pub adjustment: AdjustmentSet,
    pub method: Method,
}

impl EffectEstimate {
    pub fn point(&self) -> f64 {
        match self.measure {
            Measure::RiskRatio => self.risk_ratio,
            Measure::OddsRatio => self.odds_ratio,
        }
    }
}

impl fmt::Display for EffectEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} vs {} — {:.3}",
            self.treatment,
            self.level,
            self.reference,
            self.point()
        )?;
        if let Some(i) = self.interval {
            write!(f, " [{:.3}, {:.3}]", i.low, i.high)?;
        }
        Ok(())
    }
}

/// Whether the adjustment set passed the back-door check.
#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    Certified,
    /// Used anyway on request; the violation is kept for the record.
    Overridden(BackdoorViolation),
    /// No graph was consulted (unadjusted comparison).
    NotChecked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectAnalysis {
    pub estimates: Vec<EffectEstimate>,
    pub weights: WeightDiagnostics,
    pub weight_kind: WeightKind,
    /// `None` when the adjustment set is empty and no model was needed.
    pub propensity: Option<Convergence>,
    pub outcome_model: Convergence,
    pub certification: Certification,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Point estimates for every contrast, before intervals are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    /// `(odds ratio, risk ratio, risk at level, risk at reference)` for
    /// each non-reference treatment level in declared order.
    pub contrasts: Vec<(f64, f64, f64, f64)>,
    pub weights: WeightDiagnostics,
    pub propensity: Option<Convergence>,
    pub outcome_model: Convergence,
}

/// A treatment/outcome/adjustment question reduced to cell counts.
#[derive(Debug, Clone)]
pub struct EffectProblem {
    treatment: Variable,
    outcome: Variable,
    event: usize,
    adjustment: AdjustmentSet,
    method: Method,
    config: EstimateConfig,
    adjust_encoding: Encoding,
    pattern_rows: Vec<Vec<f64>>,
    /// Cell of each row: `(pattern * n_x + x) * 2 + event`.
    row_cell: Vec<u32>,
    n_cells: usize,
}

impl EffectProblem {
    pub fn new(
        t: &DataTable,
        treatment: &str,
        outcome: &str,
        adjustment: &AdjustmentSet,
        method: Method,
        config: &EstimateConfig,
    ) -> Result<Self, EstimateError> {
        let schema = t.schema();
        let lookup = |name: &str, role: &str| {
            schema
                .variable(name)
                .cloned()
                .ok_or_else(|| EstimateError::SchemaMismatch(format!("{role} `{name}` is not a column")))
        };
        let tv = lookup(treatment, "treatment")?;
        let ov = lookup(outcome, "outcome")?;
        if treatment == outcome || adjustment.contains(treatment) || adjustment.contains(outcome) {
            return Err(EstimateError::InvalidPredictors(format!(
                "treatment, outcome and adjustment set {adjustment} must be disjoint"
            )));
        }
        let event = match &config.outcome_level {
            Some(level) => ov.level_index(level).ok_or_else(|| EstimateError::UnknownLevel {
                variable: outcome.to_string(),
                level: level.clone(),
            })?,
            None if ov.n_levels() == 2 => 1 - ov.reference_index(),
            None => {
                return Err(EstimateError::OutcomeLevelRequired {
                    outcome: outcome.to_string(),
                    levels: ov.n_levels(),
                })
            }
        };
        let adjust_encoding = Encoding::for_table(t, adjustment.names())?;
        let columns: Vec<usize> = adjustment
            .names()
            .iter()
            .map(|n| schema.require(n))
            .collect::<Result<_, _>>()?;
        let patterns = Patterns::of(t, &columns);
        let n_x = tv.n_levels();
        let x = t.column(treatment)?;
        let y = t.column(outcome)?;
        let row_cell = patterns
            .row_pattern
            .iter()
            .enumerate()
            .map(|(r, &g)| ((g as usize * n_x + x[r] as usize) * 2 + usize::from(y[r] as usize == event)) as u32)
            .collect();
        let pattern_rows = patterns.levels.iter().map(|l| adjust_encoding.encode(l)).collect();
        Ok(EffectProblem {
            n_cells: patterns.len() * n_x * 2,
            treatment: tv,
            outcome: ov,
            event,
            adjustment: adjustment.clone(),
            method,
            config: config.clone(),
            adjust_encoding,
            pattern_rows,
            row_cell,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_cell.len()
    }

    pub fn config(&self) -> &EstimateConfig {
        &self.config
    }

    fn base_counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.n_cells];
        for &c in &self.row_cell {
            counts[c as usize] += 1.0;
        }
        counts
    }

    /// Row indices drawn with replacement for bootstrap replicate `r`.
    pub fn resample_indices(&self, seed: u64, r: u64) -> Vec<usize> {
        let n = self.n_rows();
        let mut rng = CounterRng::for_stream(derive_key(seed, BOOTSTRAP_DOMAIN), r);
        (0..n).map(|_| rng.below(n)).collect()
    }

    pub fn point(&self) -> Result<PointEstimates, EstimateError> {
        self.evaluate(&self.base_counts())
    }

    /// Headline measure of every contrast on bootstrap replicate `r`.
    pub fn replicate(&self, seed: u64, r: u64) -> Result<Vec<f64>, EstimateError> {
        let mut counts = vec![0.0; self.n_cells];
        for i in self.resample_indices(seed, r) {
            counts[self.row_cell[i] as usize] += 1.0;
        }
        let p = self.evaluate(&counts)?;
        Ok(p.contrasts.iter().map(|c| self.headline(c)).collect())
    }

    fn headline(&self, c: &(f64, f64, f64, f64)) -> f64 {
        match self.config.measure {
            Measure::OddsRatio => c.0,
            Measure::RiskRatio => c.1,
        }
    }

    fn evaluate(&self, counts: &[f64]) -> Result<PointEstimates, EstimateError> {
        let n_x = self.treatment.n_levels();
        let n_patterns = self.pattern_rows.len();
        let cell = |g: usize, x: usize, e: usize| counts[(g * n_x + x) * 2 + e];
        let total: f64 = counts.iter().sum();
        let mut level_totals = vec![0.0; n_x];
        for g in 0..n_patterns {
            for (x, lt) in level_totals.iter_mut().enumerate() {
                *lt += cell(g, x, 0) + cell(g, x, 1);
            }
        }
        if let Some(x) = level_totals.iter().position(|&c| c == 0.0) {
            return Err(EstimateError::UnobservedLevel {
                variable: self.treatment.name().to_string(),
                level: self.treatment.level(x).to_string(),
            });
        }
        let numerator = |x: usize| match self.config.weights {
            WeightKind::Stabilized => level_totals[x] / total,
            WeightKind::Unstabilized => 1.0,
        };

        // weight[g * n_x + x]
        let r = self.treatment.reference_index();
        let (mut weight, propensity) = if self.adjust_encoding.is_intercept_only() {
            let w = (0..n_x)
                .map(|x| match self.config.weights {
                    WeightKind::Stabilized => 1.0,
                    WeightKind::Unstabilized => total / level_totals[x],
                })
                .collect::<Vec<_>>();
            (w, None)
        } else {
            // classes: reference first, then the other levels in order
            let class_of: Vec<usize> = (0..n_x)
                .map(|x| {
                    if x == r {
                        0
                    } else if x < r {
                        x + 1
                    } else {
                        x
                    }
                })
                .collect();
            let mut grouped = vec![0.0; n_patterns * n_x];
            for g in 0..n_patterns {
                for x in 0..n_x {
                    grouped[g * n_x + class_of[x]] = cell(g, x, 0) + cell(g, x, 1);
                }
            }
            match solve_grouped(&self.pattern_rows, &grouped, n_x) {
                Solved::Diverged(column) => {
                    return Err(EstimateError::PerfectSeparation {
                        outcome: self.treatment.name().to_string(),
                        predictor: self
                            .adjust_encoding
                            .column_variable(column)
                            .unwrap_or("(intercept)")
                            .to_string(),
                    })
                }
                Solved::Fit(beta, conv) => {
                    let mut probs = vec![0.0; n_x];
                    let mut w = vec![0.0; n_patterns * n_x];
                    for (g, row) in self.pattern_rows.iter().enumerate() {
                        logistic::softmax_into(row, &beta, &mut probs);
                        for x in 0..n_x {
                            w[g * n_x + x] = numerator(x) / probs[class_of[x]];
                        }
                    }
                    (w, Some(conv))
                }
            }
        };
        let weight_at = |weight: &[f64], g: usize, x: usize| {
            if propensity.is_none() {
                weight[x]
            } else {
                weight[g * n_x + x]
            }
        };

        let mut cells: Vec<(usize, f64, f64)> = Vec::with_capacity(n_patterns * n_x);
        for g in 0..n_patterns {
            for x in 0..n_x {
                cells.push((x, weight_at(&weight, g, x), cell(g, x, 0) + cell(g, x, 1)));
            }
        }
        let mut bounds = None;
        if self.config.truncate {
            let mut pairs: Vec<(f64, f64)> = cells.iter().filter(|c| c.2 > 0.0).map(|c| (c.1, c.2)).collect();
            let (lo, hi) = weights::percentile_bounds(&mut pairs);
            weight.iter_mut().for_each(|w| *w = w.clamp(lo, hi));
            cells.iter_mut().for_each(|c| c.1 = c.1.clamp(lo, hi));
            bounds = Some((lo, hi));
        }
        let mut diagnostics = WeightDiagnostics::from_cells(&cells, self.treatment.levels());
        diagnostics.truncated_at = bounds;

        // weighted (level, event) table
        let mut wt = vec![0.0; n_x * 2];
        for g in 0..n_patterns {
            for x in 0..n_x {
                let w = weight_at(&weight, g, x);
                wt[x * 2] += w * cell(g, x, 0);
                wt[x * 2 + 1] += w * cell(g, x, 1);
            }
        }
        if (0..n_x).all(|x| wt[x * 2 + 1] == 0.0) || (0..n_x).all(|x| wt[x * 2] == 0.0) {
            return Err(EstimateError::DegenerateOutcome(self.outcome.name().to_string()));
        }
        let risk: Vec<f64> = (0..n_x).map(|x| wt[x * 2 + 1] / (wt[x * 2] + wt[x * 2 + 1])).collect();
        if risk[r] == 0.0 {
            return Err(EstimateError::ZeroRisk(self.treatment.level(r).to_string()));
        }

        let outcome_encoding = Encoding::new(core::slice::from_ref(&self.treatment));
        let rows: Vec<Vec<f64>> = (0..n_x).map(|x| outcome_encoding.encode(&[x as u16])).collect();
        let (beta, outcome_model) = match solve_grouped(&rows, &wt, 2) {
            Solved::Fit(beta, conv) => (beta, conv),
            Solved::Diverged(_) => {
                return Err(EstimateError::PerfectSeparation {
                    outcome: self.outcome.name().to_string(),
                    predictor: self.treatment.name().to_string(),
                })
            }
        };
        let contrasts = (0..n_x)
            .filter(|&x| x != r)
            .map(|x| {
                let column = if x < r { x } else { x - 1 } + 1;
                (libm::exp(beta[column]), risk[x] / risk[r], risk[x], risk[r])
            })
            .collect();
        Ok(PointEstimates {
            contrasts,
            weights: diagnostics,
            propensity,
            outcome_model,
        })
    }

    /// Attaches intervals from replicate results (in replicate order) to a
    /// point estimate.
    pub fn assemble(
        &self,
        point: PointEstimates,
        replicates: Option<&[Result<Vec<f64>, EstimateError>]>,
        certification: Certification,
    ) -> Result<EffectAnalysis, EstimateError> {
        let headline: Vec<f64> = point.contrasts.iter().map(|c| self.headline(c)).collect();
        let (intervals, bootstrap) = match replicates {
            None => (vec![None; headline.len()], None),
            Some(results) => {
                let (intervals, failed) = percentile_intervals(&headline, results)?;
                (
                    intervals.into_iter().map(Some).collect(),
                    Some(BootstrapSummary {
                        replicates: results.len(),
                        failed,
                        seed: self.config.seed,
                    }),
                )
            }
        };
        let r = self.treatment.reference_index();
        let estimates = (0..self.treatment.n_levels())
            .filter(|&x| x != r)
            .zip(point.contrasts.iter().zip(intervals))
            .map(|(x, (&(or, rr, rl, rref), interval))| EffectEstimate {
                treatment: self.treatment.name().to_string(),
                level: self.treatment.level(x).to_string(),
                reference: self.treatment.reference_level().to_string(),
                outcome: self.outcome.name().to_string(),
                outcome_level: self.outcome.level(self.event).to_string(),
                odds_ratio: or,
                risk_ratio: rr,
                risk_level: rl,
                risk_reference: rref,
                measure: self.config.measure,
                interval,
                adjustment: self.adjustment.clone(),
                method: self.method,
            })
            .collect();
        Ok(EffectAnalysis {
            estimates,
            weights: point.weights,
            weight_kind: self.config.weights,
            propensity: point.propensity,
            outcome_model: point.outcome_model,
            certification,
            bootstrap,
        })
    }
}

/// 2.5% and 97.5% percentiles of each contrast over successful replicates,
/// widened if needed so each interval contains its point estimate.
/// Returns the intervals and the number of failed replicates.
pub fn percentile_intervals(
    point: &[f64],
    results: &[Result<Vec<f64>, EstimateError>],
) -> Result<(Vec<Interval>, usize), EstimateError> {
    if results.len() < MIN_REPLICATES {
        return Err(EstimateError::TooFewReplicates(results.len()));
    }
    let ok: Vec<&Vec<f64>> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = results.len() - ok.len();
    if failed as f64 > MAX_FAILURE_SHARE * results.len() as f64 {
        return Err(EstimateError::TooManyFailures {
            failed,
            replicates: results.len(),
        });
    }
    let intervals = point
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let mut values: Vec<(f64, f64)> = ok.iter().map(|v| (v[k], 1.0)).collect();
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            let low = weights::quantile_sorted(&values, 0.025);
            let high = weights::quantile_sorted(&values, 0.975);
            Interval {
                low: low.min(est),
                high: high.max(est),
            }
        })
        .collect();
    Ok((intervals, failed))
}

/// Bootstrap intervals computed sequentially.
pub fn bootstrap_ci(problem: &EffectProblem, replicates: usize, seed: u64) -> Result<Vec<Interval>, EstimateError> {
    let point = problem.point()?;
    let headline: Vec<f64> = point.contrasts.iter().map(|c| problem.headline(c)).collect();
    let results: Vec<_> = (0..replicates as u64).map(|r| problem.replicate(seed, r)).collect();
    percentile_intervals(&headline, &results).map(|(i, _)| i)
}

/// Checks `adjustment` against the back-door criterion on `g`.
pub fn certify(
    g: &CausalDag,
    treatment: &str,
    outcome: &str,
    adjustment: &AdjustmentSet,
    allow_invalid: bool,
) -> Result<Certification, EstimateError> {
    match backdoor_violation(g, treatment, outcome, adjustment)? {
        None => Ok(Certification::Certified),
        Some(v) if allow_invalid => Ok(Certification::Overridden(v)),
        Some(violation) => Err(EstimateError::InvalidAdjustment {
            set: adjustment.to_string(),
            violation,
        }),
    }
}

fn check_graph_schema(g: &CausalDag, t: &DataTable, names: &[&str]) -> Result<(), EstimateError> {
    for name in names {
        let gv = g
            .variable(name)
            .ok_or_else(|| GraphError::UnknownVariable(name.to_string()))?;
        match t.schema().variable(name) {
            Some(tv) if tv == gv => {}
            Some(_) => {
                return Err(EstimateError::SchemaMismatch(format!(
                    "levels of `{name}` differ between graph and data"
                )))
            }
            None => return Err(EstimateError::SchemaMismatch(format!("`{name}` is not a column"))),
        }
    }
    Ok(())
}

fn run(problem: &EffectProblem, certification: Certification) -> Result<EffectAnalysis, EstimateError> {
    let point = problem.point()?;
    let cfg = problem.config();
    if cfg.replicates == 0 {
        return problem.assemble(point, None, certification);
    }
    let results: Vec<_> = (0..cfg.replicates as u64)
        .map(|r| problem.replicate(cfg.seed, r))
        .collect();
    problem.assemble(point, Some(&results), certification)
}

/// Checks the data against `g`, certifies `adjustment` and sets up the
/// adjusted problem. Callers that schedule bootstrap replicates themselves
/// start here.
pub fn adjusted_problem(
    g: &CausalDag,
    t: &DataTable,
    treatment: &str,
    outcome: &str,
    adjustment: &AdjustmentSet,
    config: &EstimateConfig,
) -> Result<(EffectProblem, Certification), EstimateError> {
    let mut names = vec![treatment, outcome];
    names.extend(adjustment.names().iter().map(String::as_str));
    check_graph_schema(g, t, &names)?;
    let certification = certify(g, treatment, outcome, adjustment, config.allow_invalid_adjustment)?;
    let problem = EffectProblem::new(t, treatment, outcome, adjustment, Method::Adjusted, config)?;
    Ok((problem, certification))
}

/// Adjusted estimate of the effect of each treatment level against the
/// reference level, after certifying `adjustment` on `g`.
pub fn estimate_effect(
    g: &CausalDag,
    t: &DataTable,
    treatment: &str,
    outcome: &str,
    adjustment: &AdjustmentSet,
    config: &EstimateConfig,
) -> Result<EffectAnalysis, EstimateError> {
    let (problem, certification) = adjusted_problem(g, t, treatment, outcome, adjustment, config)?;
    run(&problem, certification)
}

/// The same contrasts with no adjustment and unit weights.
pub fn unadjusted_estimate(
    t: &DataTable,
    treatment: &str,
    outcome: &str,
    config: &EstimateConfig,
) -> Result<EffectAnalysis, EstimateError> {
    let problem = EffectProblem::new(
        t,
        treatment,
        outcome,
        &AdjustmentSet::empty(),
        Method::Unadjusted,
        config,
    )?;
    run(&problem, Certification::NotChecked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Variable;
    use crate::synth::scenarios;

    fn quick(replicates: usize) -> EstimateConfig {
        EstimateConfig {
            replicates,
            seed: 7,
            ..EstimateConfig::default()
        }
    }

    #[test]
    fn triangle_recovers_oracle() {
        let m = scenarios::confounded_triangle();
        let t = m.sample(10_000, 11).unwrap();
        let oracle = m.oracle_effect("X", "Y", "Yes", "Yes", "No").unwrap();
        let a = estimate_effect(m.graph(), &t, "X", "Y", &AdjustmentSet::new(["Z"]), &quick(0)).unwrap();
        let u = unadjusted_estimate(&t, "X", "Y", &quick(0)).unwrap();
        let (ar, ur) = (a.estimates[0].risk_ratio, u.estimates[0].risk_ratio);
        assert!((ar / oracle.risk_ratio - 1.0).abs() < 0.1, "{ar}");
        assert!(ur > ar, "positive confounding inflates the naive ratio");
        assert!((ur / 3.25 - 1.0).abs() < 0.15);
        assert_eq!(a.certification, Certification::Certified);
        assert!(a.weights.mean_near_one());
    }

    #[test]
    fn saturated_outcome_odds_ratio_matches_weighted_cells() {
        let m = scenarios::confounded_triangle();
        let t = m.sample(3000, 4).unwrap();
        let a = estimate_effect(m.graph(), &t, "X", "Y", &AdjustmentSet::new(["Z"]), &quick(0)).unwrap();
        let e = &a.estimates[0];
        let odds = |p: f64| p / (1.0 - p);
        assert!((e.odds_ratio - odds(e.risk_level) / odds(e.risk_reference)).abs() < 1e-9);
    }

    #[test]
    fn invalid_adjustment_rejected_unless_overridden() {
        let m = scenarios::confounded_triangle();
        let t = m.sample(2000, 4).unwrap();
        let err = estimate_effect(m.graph(), &t, "X", "Y", &AdjustmentSet::empty(), &quick(0)).unwrap_err();
        assert!(matches!(err, EstimateError::InvalidAdjustment { .. }), "{err}");
        let cfg = EstimateConfig {
            allow_invalid_adjustment: true,
            ..quick(0)
        };
        let a = estimate_effect(m.graph(), &t, "X", "Y", &AdjustmentSet::empty(), &cfg).unwrap();
        assert!(matches!(a.certification, Certification::Overridden(_)));
    }

    #[test]
    fn empty_adjustment_is_bit_identical_to_unadjusted() {
        let m = scenarios::collider_trap();
        let t = m.sample(4000, 21).unwrap();
        let cfg = quick(120);
        let a = estimate_effect(m.graph(), &t, "X", "Y", &AdjustmentSet::empty(), &cfg).unwrap();
        let u = unadjusted_estimate(&t, "X", "Y", &cfg).unwrap();
        assert!(a.weights.min == 1.0 && a.weights.max == 1.0);
        let (ea, eu) = (&a.estimates[0], &u.estimates[0]);
        assert_eq!(ea.odds_ratio.to_bits(), eu.odds_ratio.to_bits());
        assert_eq!(ea.risk_ratio.to_bits(), eu.risk_ratio.to_bits());
        assert_eq!(ea.interval, eu.interval);
        assert_eq!((ea.method, eu.method), (Method::Adjusted, Method::Unadjusted));
    }

    #[test]
    fn relabelling_reference_inverts_ratios() {
        let m = scenarios::confounded_triangle();
        let t = m.sample(5000, 8).unwrap();
        let flipped_var = Variable::new("X", ["No", "Yes"], "Yes").unwrap();
        let vars: Vec<Variable> = t
            .schema()
            .variables()
            .iter()
            .map(|v| {
                if v.name() == "X" {
                    flipped_var.clone()
                } else {
                    v.clone()
                }
            })
            .collect();
        let cols: Vec<Vec<u16>> = (0..vars.len()).map(|i| t.column_at(i).to_vec()).collect();
        let flipped = DataTable::from_columns(crate::data::Schema::new(vars).unwrap(), cols).unwrap();
        let adj = AdjustmentSet::new(["Z"]);
        let cfg = quick(0);
        let a = EffectProblem::new(&t, "X", "Y", &adj, Method::Adjusted, &cfg)
            .unwrap()
            .point()
            .unwrap();
        let b = EffectProblem::new(&flipped, "X", "Y", &adj, Method::Adjusted, &cfg)
            .unwrap()
            .point()
            .unwrap();
        assert!((a.contrasts[0].0 * b.contrasts[0].0 - 1.0).abs() < 1e-9);
        assert!((a.contrasts[0].1 * b.contrasts[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bootstrap_is_seeded() {
        let m = scenarios::confounded_triangle();
        let t = m.sample(1500, 2).unwrap();
        let p = EffectProblem::new(&t, "X", "Y", &AdjustmentSet::new(["Z"]), Method::Adjusted, &quick(0)).unwrap();
        let a = bootstrap_ci(&p, 150, 1).unwrap();
        let b = bootstrap_ci(&p, 150, 1).unwrap();
        let c = bootstrap_ci(&p, 150, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let point = p.point().unwrap().contrasts[0].1;
        assert!(a[0].low <= point && point <= a[0].high);
        assert_eq!(
            bootstrap_ci(&p, 50, 1).unwrap_err(),
            EstimateError::TooFewReplicates(50)
        );
    }

    #[test]
    fn constant_estimator_collapses_interval() {
        let point = [2.0];
        let results: Vec<Result<Vec<f64>, EstimateError>> = (0..100).map(|_| Ok(vec![2.0])).collect();
        let (i, failed) = percentile_intervals(&point, &results).unwrap();
        assert_eq!((i[0].low, i[0].high, failed), (2.0, 2.0, 0));
        let mut results = results;
        for r in results.iter_mut().take(21) {
            *r = Err(EstimateError::ZeroRisk("x".into()));
        }
        assert_eq!(
            percentile_intervals(&point, &results).unwrap_err(),
            EstimateError::TooManyFailures {
                failed: 21,
                replicates: 100
            }
        );
    }

    #[test]
    fn report_row_format() {
        let e = EffectEstimate {
            treatment: "Traffic".into(),
            level: "Heavy".into(),
            reference: "Normal".into(),
            outcome: "RouteChoice".into(),
            outcome_level: "ExitA".into(),
            odds_ratio: 9.0,
            risk_ratio: 6.5621,
            risk_level: 0.6,
            risk_reference: 0.1,
            measure: Measure::RiskRatio,
            interval: Some(Interval {
                low: 4.8172,
                high: 8.3061,
            }),
            adjustment: AdjustmentSet::new(["SocialImpact", "Urgency"]),
            method: Method::Adjusted,
        };
        assert_eq!(e.to_string(), "Traffic: Heavy vs Normal — 6.562 [4.817, 8.306]");
    }

    #[test]
    fn deterministic_treatment_surfaces_separation() {
        use crate::synth::{Cpt, ScmSpec};
        let yn = |n: &str| Variable::with_levels(n, ["No", "Yes"]).unwrap();
        let (z, x, y) = (yn("Z"), yn("X"), yn("Y"));
        let g = CausalDag::new(
            vec![z.clone(), x.clone(), y.clone()],
            [("Z", "X"), ("Z", "Y"), ("X", "Y")],
        )
        .unwrap();
        let m = ScmSpec::new(
            g,
            vec![
                Cpt::marginal(&z, vec![0.5, 0.5]).unwrap(),
                Cpt::new(&x, &[&z], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
                Cpt::new(&y, &[&x, &z], vec![vec![0.7, 0.3]; 4]).unwrap(),
            ],
        )
        .unwrap();
        let t = m.sample(500, 1).unwrap();
        let err = estimate_effect(m.graph(), &t, "X", "Y", &AdjustmentSet::new(["Z"]), &quick(0)).unwrap_err();
        assert_eq!(
            err,
            EstimateError::PerfectSeparation {
                outcome: "X".into(),
                predictor: "Z".into()
            }
        );
    }
}
