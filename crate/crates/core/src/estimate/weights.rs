//! Propensity scores, inverse-probability weights and balance checks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::design::Patterns;
use super::logistic::LogisticModel;
use super::EstimateError;
use crate::data::DataTable;
use crate::special::chi2_sf;

/// Truncation percentiles used when truncation is switched on.
pub const TRUNCATION_PERCENTILES: (f64, f64) = (0.01, 0.99);
/// Stabilized weights whose overall mean strays further than this from 1
/// are flagged in diagnostics.
pub const STABILIZED_MEAN_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `1 / Pr(X = xᵢ | Zᵢ)`.
    Unstabilized,
    /// `Pr(X = xᵢ) / Pr(X = xᵢ | Zᵢ)`.
    Stabilized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightDiagnostics {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Mean weight among rows at each treatment level, in declared order.
    pub level_means: Vec<(String, f64)>,
    /// Bounds applied when truncation was requested.
    pub truncated_at: Option<(f64, f64)>,
}

impl WeightDiagnostics {
    /// Summarizes weights given as `(treatment level, weight, row count)`
    /// cells. Cells with zero count are ignored.
    pub(crate) fn from_cells(cells: &[(usize, f64, f64)], levels: &[String]) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let (mut sum, mut n) = (0.0, 0.0);
        let mut by_level = vec![(0.0, 0.0); levels.len()];
        for &(x, w, c) in cells.iter().filter(|c| c.2 > 0.0) {
            min = min.min(w);
            max = max.max(w);
            sum += w * c;
            n += c;
            by_level[x].0 += w * c;
            by_level[x].1 += c;
        }
        WeightDiagnostics {
            min,
            max,
            mean: sum / n,
            level_means: levels
                .iter()
                .zip(by_level)
                .map(|(l, (s, c))| (l.clone(), if c > 0.0 { s / c } else { f64::NAN }))
                .collect(),
            truncated_at: None,
        }
    }

    /// Whether a stabilized weight vector has mean within
    /// [`STABILIZED_MEAN_TOLERANCE`] of 1.
    pub fn mean_near_one(&self) -> bool {
        (self.mean - 1.0).abs() <= STABILIZED_MEAN_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub kind: WeightKind,
    pub diagnostics: WeightDiagnostics,
}

/// `Pr(X = xᵢ | Zᵢ)` for every row, from a model fitted with the treatment
/// as outcome.
pub fn propensity_scores(model: &LogisticModel, t: &DataTable, treatment: &str) -> Result<Vec<f64>, EstimateError> {
    if model.outcome() != treatment {
        return Err(EstimateError::SchemaMismatch(format!(
            "model was fitted for `{}`, not `{treatment}`",
            model.outcome()
        )));
    }
    let var = t
        .schema()
        .variable(treatment)
        .ok_or_else(|| EstimateError::SchemaMismatch(format!("treatment `{treatment}` is not a column")))?;
    let class_of = model.class_of();
    if class_of.len() != var.n_levels() {
        return Err(EstimateError::SchemaMismatch(format!(
            "`{treatment}` has {} levels but the model was fitted on {}",
            var.n_levels(),
            class_of.len()
        )));
    }
    let columns = model.predictor_columns(t)?;
    let patterns = Patterns::of(t, &columns);
    let probs: Vec<Vec<f64>> = patterns.levels.iter().map(|l| model.predict(l)).collect();
    let x = t.column(treatment)?;
    Ok(patterns
        .row_pattern
        .iter()
        .zip(x)
        .map(|(&g, &level)| probs[g as usize][class_of[level as usize]])
        .collect())
}

/// Inverse-probability weights from propensity scores.
pub fn ip_weights(
    scores: &[f64],
    t: &DataTable,
    treatment: &str,
    kind: WeightKind,
) -> Result<WeightVector, EstimateError> {
    let var = t
        .schema()
        .variable(treatment)
        .ok_or_else(|| EstimateError::SchemaMismatch(format!("treatment `{treatment}` is not a column")))?;
    if scores.len() != t.n_rows() {
        return Err(EstimateError::InvalidWeights(format!(
            "{} scores for {} rows",
            scores.len(),
            t.n_rows()
        )));
    }
    if let Some(r) = scores.iter().position(|s| !(*s > 0.0 && *s < 1.0)) {
        return Err(EstimateError::NonFinite {
            row: r + 1,
            value: scores[r],
        });
    }
    let x = t.column(treatment)?;
    let marginal = t.frequencies(treatment)?;
    let weights: Vec<f64> = scores
        .iter()
        .zip(x)
        .map(|(s, &level)| match kind {
            WeightKind::Unstabilized => 1.0 / s,
            WeightKind::Stabilized => marginal[level as usize] / s,
        })
        .collect();
    let cells: Vec<(usize, f64, f64)> = weights.iter().zip(x).map(|(&w, &l)| (l as usize, w, 1.0)).collect();
    Ok(WeightVector {
        diagnostics: WeightDiagnostics::from_cells(&cells, var.levels()),
        weights,
        kind,
    })
}

/// Clamps weights to their 1st and 99th percentiles.
pub fn truncate_weights(w: &WeightVector, t: &DataTable, treatment: &str) -> Result<WeightVector, EstimateError> {
    let var = t
        .schema()
        .variable(treatment)
        .ok_or_else(|| EstimateError::SchemaMismatch(format!("treatment `{treatment}` is not a column")))?;
    let x = t.column(treatment)?;
    let mut pairs: Vec<(f64, f64)> = w.weights.iter().map(|&v| (v, 1.0)).collect();
    let (lo, hi) = percentile_bounds(&mut pairs);
    let weights: Vec<f64> = w.weights.iter().map(|v| v.clamp(lo, hi)).collect();
    let cells: Vec<(usize, f64, f64)> = weights.iter().zip(x).map(|(&w, &l)| (l as usize, w, 1.0)).collect();
    let mut diagnostics = WeightDiagnostics::from_cells(&cells, var.levels());
    diagnostics.truncated_at = Some((lo, hi));
    Ok(WeightVector {
        weights,
        kind: w.kind,
        diagnostics,
    })
}

/// [`TRUNCATION_PERCENTILES`] of a multiset of `(value, multiplicity)`.
pub(crate) fn percentile_bounds(pairs: &mut [(f64, f64)]) -> (f64, f64) {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = TRUNCATION_PERCENTILES;
    (quantile_sorted(pairs, lo), quantile_sorted(pairs, hi))
}

/// Linear-interpolation quantile (the `(n - 1)p` rule) of a sorted multiset
/// given as `(value, multiplicity)` pairs with integral multiplicities.
pub(crate) fn quantile_sorted(pairs: &[(f64, f64)], p: f64) -> f64 {
    let n: f64 = pairs.iter().map(|q| q.1).sum();
    let h = (n - 1.0) * p;
    let lo = libm::floor(h);
    let at = |k: f64| -> f64 {
        let mut seen = 0.0;
        for &(v, c) in pairs {
            seen += c;
            if k < seen {
                return v;
            }
        }
        pairs.last().map_or(f64::NAN, |q| q.0)
    };
    let a = at(lo);
    let b = at((lo + 1.0).min(n - 1.0));
    a + (h - lo) * (b - a)
}

/// Association between the treatment and the joint pattern of `covariates`
/// as a G² statistic, optionally in the weighted pseudo-population.
/// Weights are rescaled to sum to the row count so the two versions are on
/// the same scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn treatment_association<S: AsRef<str>>(
    t: &DataTable,
    treatment: &str,
    covariates: &[S],
    weights: Option<&[f64]>,
) -> Result<Association, EstimateError> {
    if let Some(w) = weights {
        super::logistic::check_weights(w, t.n_rows())?;
    }
    let n_x = t
        .schema()
        .variable(treatment)
        .ok_or_else(|| EstimateError::SchemaMismatch(format!("treatment `{treatment}` is not a column")))?
        .n_levels();
    let columns: Vec<usize> = covariates
        .iter()
        .map(|c| t.schema().require(c.as_ref()))
        .collect::<Result<_, _>>()?;
    let patterns = Patterns::of(t, &columns);
    let x = t.column(treatment)?;
    let mut counts = vec![0.0; patterns.len() * n_x];
    for (r, &g) in patterns.row_pattern.iter().enumerate() {
        counts[g as usize * n_x + x[r] as usize] += weights.map_or(1.0, |w| w[r]);
    }
    let total: f64 = counts.iter().sum();
    let scale = t.n_rows() as f64 / total;
    counts.iter_mut().for_each(|c| *c *= scale);
    let n = t.n_rows() as f64;
    let rows: Vec<f64> = (0..patterns.len())
        .map(|g| counts[g * n_x..(g + 1) * n_x].iter().sum())
        .collect();
    let cols: Vec<f64> = (0..n_x)
        .map(|j| (0..patterns.len()).map(|g| counts[g * n_x + j]).sum())
        .collect();
    let mut statistic = 0.0;
    for (g, &rg) in rows.iter().enumerate() {
        for (j, &cj) in cols.iter().enumerate() {
            let o = counts[g * n_x + j];
            if o > 0.0 {
                statistic += 2.0 * o * libm::log(o * n / (rg * cj));
            }
        }
    }
    let live = |m: &[f64]| m.iter().filter(|&&v| v > 0.0).count();
    let dof = live(&rows).saturating_sub(1) * live(&cols).saturating_sub(1);
    Ok(Association {
        statistic: statistic.max(0.0),
        dof,
        p_value: chi2_sf(statistic.max(0.0), dof),
    })
}

impl Association {
    pub fn describe(&self) -> String {
        format!("G²={:.3} dof={} p={:.4}", self.statistic, self.dof, self.p_value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::logistic::{fit_logistic, fit_multinomial};
    use crate::synth::scenarios;

    #[test]
    fn binary_weight_is_inverse_score() {
        let m = scenarios::confounded_triangle();
        let t = m.sample(200, 1).unwrap();
        let scores = vec![0.5; t.n_rows()];
        let w = ip_weights(&scores, &t, "X", WeightKind::Unstabilized).unwrap();
        assert!(w.weights.iter().all(|&v| v == 2.0));
        assert!(matches!(
            ip_weights(&vec![1.0; t.n_rows()], &t, "X", WeightKind::Unstabilized),
            Err(EstimateError::NonFinite { row: 1, .. })
        ));
    }

    #[test]
    fn no_predictor_scores_are_marginal_frequencies() {
        let t = scenarios::confounded_triangle().sample(500, 3).unwrap();
        let model = fit_multinomial::<&str>(&t, "X", &[]).unwrap();
        let scores = propensity_scores(&model, &t, "X").unwrap();
        let freq = t.frequencies("X").unwrap();
        for (s, &x) in scores.iter().zip(t.column("X").unwrap()) {
            assert!((s - freq[x as usize]).abs() < 1e-12);
        }
        let w = ip_weights(&scores, &t, "X", WeightKind::Stabilized).unwrap();
        assert!(w.weights.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn binary_model_scores_use_the_modelled_level() {
        let t = scenarios::confounded_triangle().sample(2000, 5).unwrap();
        let a = fit_logistic(&t, "X", "Yes", &["Z"]).unwrap();
        let b = fit_multinomial(&t, "X", &["Z"]).unwrap();
        let sa = propensity_scores(&a, &t, "X").unwrap();
        let sb = propensity_scores(&b, &t, "X").unwrap();
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(propensity_scores(&a, &t, "Y").is_err());
    }

    #[test]
    fn weighting_removes_confounding_association() {
        let t = scenarios::confounded_triangle().sample(10_000, 9).unwrap();
        let model = fit_multinomial(&t, "X", &["Z"]).unwrap();
        let scores = propensity_scores(&model, &t, "X").unwrap();
        let w = ip_weights(&scores, &t, "X", WeightKind::Stabilized).unwrap();
        let before = treatment_association(&t, "X", &["Z"], None).unwrap();
        let after = treatment_association(&t, "X", &["Z"], Some(&w.weights)).unwrap();
        assert!(before.p_value < 1e-10);
        assert!(after.statistic < 1e-9, "{}", after.describe());
        assert!(w.diagnostics.mean_near_one());
    }

    #[test]
    fn quantiles_of_multisets() {
        let pairs = [(1.0, 1.0), (2.0, 2.0), (5.0, 1.0)];
        // expanded: 1 2 2 5
        assert_eq!(quantile_sorted(&pairs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&pairs, 1.0), 5.0);
        assert!((quantile_sorted(&pairs, 0.5) - 2.0).abs() < 1e-15);
        assert!((quantile_sorted(&pairs, 0.9) - (2.0 + 0.7 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn truncation_clamps_extremes() {
        let t = scenarios::confounded_triangle().sample(1000, 2).unwrap();
        let scores: Vec<f64> = (0..t.n_rows()).map(|i| 0.01 + 0.98 * (i as f64 / 999.0)).collect();
        let w = ip_weights(&scores, &t, "X", WeightKind::Unstabilized).unwrap();
        let tr = truncate_weights(&w, &t, "X").unwrap();
        let (lo, hi) = tr.diagnostics.truncated_at.unwrap();
        assert!(tr.weights.iter().all(|&v| v >= lo && v <= hi));
        assert!(hi < w.diagnostics.max && lo > w.diagnostics.min);
    }
}
