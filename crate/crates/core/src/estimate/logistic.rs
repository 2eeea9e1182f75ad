//! Maximum-likelihood logistic and baseline-category multinomial fits.
//!
//! Rows are grouped by predictor pattern first, so cost scales with the
//! number of distinct patterns rather than rows. Newton steps solve
//! `(H + λI) Δ = g` with `λ = RIDGE`; the ridge only damps the step and does
//! not enter the objective, so fixed points are exact maximum-likelihood
//! estimates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::design::{Encoding, Patterns};
use super::EstimateError;
use crate::data::DataTable;

pub const RIDGE: f64 = 1e-6;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
/// Newton steps must also have shrunk below this for a fit to count as
/// converged. Diverging fits can have tiny gradients while still moving.
const STEP_TOLERANCE: f64 = 1e-10;
/// A non-converged fit with a coefficient this large is reported as
/// separation rather than slow convergence.
const DIVERGENCE_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub iterations: usize,
    /// Euclidean norm of the gradient of the mean log-likelihood.
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    outcome: String,
    /// Modelled classes; index 0 is the baseline.
    classes: Vec<String>,
    /// Class of each outcome level, by level index.
    class_of: Vec<usize>,
    encoding: Encoding,
    /// Class-major: coefficients of class `c >= 1` are
    /// `beta[(c - 1) * p .. c * p]`.
    beta: Vec<f64>,
    convergence: Convergence,
}

impl LogisticModel {
    pub fn outcome(&self) -> &str {
        &self.outcome
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Class index of each outcome level, by level index.
    pub fn class_of(&self) -> &[usize] {
        &self.class_of
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn convergence(&self) -> Convergence {
        self.convergence
    }

    /// Coefficients of non-baseline class `class` (1-based), one per
    /// design column.
    pub fn coefficients(&self, class: usize) -> &[f64] {
        assert!(
            class >= 1 && class < self.classes.len(),
            "class {class} has no coefficients"
        );
        let p = self.encoding.n_columns();
        &self.beta[(class - 1) * p..class * p]
    }

    /// Coefficient of a named design column (`"Var=Level"`) for `class`.
    pub fn coefficient(&self, class: usize, column: &str) -> Option<f64> {
        let k = self.encoding.column_names().iter().position(|c| c == column)?;
        Some(self.coefficients(class)[k])
    }

    /// Class probabilities for predictor levels given in predictor order.
    pub fn predict(&self, levels: &[u16]) -> Vec<f64> {
        let x = self.encoding.encode(levels);
        let mut probs = vec![0.0; self.classes.len()];
        softmax_into(&x, &self.beta, &mut probs);
        probs
    }

    /// Class probabilities for row `row` of `t`.
    pub fn predict_row(&self, t: &DataTable, row: usize) -> Result<Vec<f64>, EstimateError> {
        let columns = self.predictor_columns(t)?;
        let levels: Vec<u16> = columns.iter().map(|&c| t.column_at(c)[row]).collect();
        Ok(self.predict(&levels))
    }

    pub(crate) fn predictor_columns(&self, t: &DataTable) -> Result<Vec<usize>, EstimateError> {
        self.encoding
            .predictors()
            .map(|v| match t.schema().variable(v.name()) {
                Some(w) if w == v => Ok(t.schema().position(v.name()).expect("present")),
                Some(_) => Err(EstimateError::SchemaMismatch(format!(
                    "levels of `{}` differ from the fit",
                    v.name()
                ))),
                None => Err(EstimateError::SchemaMismatch(format!("`{}` is not a column", v.name()))),
            })
            .collect()
    }
}

/// `probs[c] ∝ exp(x · β_c)` with `β_0 = 0`.
pub(crate) fn softmax_into(x: &[f64], beta: &[f64], probs: &mut [f64]) {
    let p = x.len();
    probs[0] = 0.0;
    for c in 1..probs.len() {
        probs[c] = x.iter().zip(&beta[(c - 1) * p..c * p]).map(|(a, b)| a * b).sum();
    }
    let top = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in probs.iter_mut() {
        *v = libm::exp(*v - top);
        total += *v;
    }
    for v in probs.iter_mut() {
        *v /= total;
    }
}

/// Outcome of the grouped Newton solver before names are attached.
pub(crate) enum Solved {
    Fit(Vec<f64>, Convergence),
    /// Index of the design column with the largest diverging coefficient.
    Diverged(usize),
}

/// Fits a `k`-class model to grouped data: `x[g]` is the design row of
/// group `g` and `counts[g * k + c]` its (weighted) count in class `c`.
/// Every class must have positive total count.
pub(crate) fn solve_grouped(x: &[Vec<f64>], counts: &[f64], k: usize) -> Solved {
    let p = x.first().map_or(1, Vec::len);
    let q = (k - 1) * p;
    let total: f64 = counts.iter().sum();
    let mut class_totals = vec![0.0; k];
    for (i, c) in counts.iter().enumerate() {
        class_totals[i % k] += c;
    }

    // Start at the marginal log-odds; intercept-only fits are then exact.
    let mut beta = vec![0.0; q];
    for c in 1..k {
        beta[(c - 1) * p] = libm::log(class_totals[c] / class_totals[0]);
    }

    let mut probs = vec![0.0; k];
    let log_likelihood = |beta: &[f64], probs: &mut [f64]| -> f64 {
        let mut ll = 0.0;
        for (g, row) in x.iter().enumerate() {
            softmax_into(row, beta, probs);
            for c in 0..k {
                let n = counts[g * k + c];
                if n > 0.0 {
                    ll += n * libm::log(probs[c]);
                }
            }
        }
        ll / total
    };

    let mut convergence = Convergence {
        iterations: 0,
        gradient_norm: f64::INFINITY,
        converged: false,
    };
    let mut ll = log_likelihood(&beta, &mut probs);
    loop {
        let mut grad = DVector::<f64>::zeros(q);
        let mut hess = DMatrix::<f64>::zeros(q, q);
        for (g, row) in x.iter().enumerate() {
            let w: f64 = counts[g * k..(g + 1) * k].iter().sum();
            if w == 0.0 {
                continue;
            }
            softmax_into(row, &beta, &mut probs);
            for c in 1..k {
                let resid = (counts[g * k + c] - w * probs[c]) / total;
                for (j, &xj) in row.iter().enumerate() {
                    if xj != 0.0 {
                        grad[(c - 1) * p + j] += resid * xj;
                    }
                }
                for d in 1..k {
                    let v = w * probs[c] * (if c == d { 1.0 } else { 0.0 } - probs[d]) / total;
                    for (i, &xi) in row.iter().enumerate().filter(|(_, &xi)| xi != 0.0) {
                        for (j, &xj) in row.iter().enumerate().filter(|(_, &xj)| xj != 0.0) {
                            hess[((c - 1) * p + i, (d - 1) * p + j)] += v * xi * xj;
                        }
                    }
                }
            }
        }
        convergence.gradient_norm = grad.norm();
        for i in 0..q {
            hess[(i, i)] += RIDGE;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => match hess.lu().solve(&grad) {
                Some(s) => s,
                None => break,
            },
        };
        let step_size = step.amax();
        if convergence.gradient_norm < GRADIENT_TOLERANCE && step_size < STEP_TOLERANCE {
            convergence.converged = true;
            break;
        }
        if convergence.iterations == MAX_ITERATIONS || !step_size.is_finite() {
            break;
        }

        // Damped step: halve until the likelihood does not decrease.
        let mut t = 1.0;
        let mut candidate = vec![0.0; q];
        loop {
            for i in 0..q {
                candidate[i] = beta[i] + t * step[i];
            }
            let next = log_likelihood(&candidate, &mut probs);
            if next >= ll - 1e-14 * ll.abs() || t < 1e-10 {
                ll = next;
                break;
            }
            t *= 0.5;
        }
        core::mem::swap(&mut beta, &mut candidate);
        convergence.iterations += 1;
    }

    if !convergence.converged || beta.iter().any(|b| !b.is_finite()) {
        let slope = (0..q)
            .filter(|i| i % p != 0)
            .max_by(|&a, &b| beta[a].abs().total_cmp(&beta[b].abs()));
        let largest = (0..q).max_by(|&a, &b| beta[a].abs().total_cmp(&beta[b].abs()));
        let diverged = |b: f64| b.is_nan() || b.abs() > DIVERGENCE_BOUND;
        if let Some(i) = largest.filter(|&i| diverged(beta[i])) {
            let column = match slope {
                Some(s) if diverged(beta[s]) => s % p,
                _ => i % p,
            };
            return Solved::Diverged(column);
        }
    }
    Solved::Fit(beta, convergence)
}

/// Shared path of the public fitting functions. `class_of[level]` maps an
/// outcome level index to its class.
fn fit_table<S: AsRef<str>>(
    t: &DataTable,
    outcome: &str,
    classes: Vec<String>,
    class_of: &[usize],
    predictors: &[S],
    weights: Option<&[f64]>,
) -> Result<LogisticModel, EstimateError> {
    let outcome_col = t.schema().require(outcome)?;
    if predictors.iter().any(|p| p.as_ref() == outcome) {
        return Err(EstimateError::InvalidPredictors(format!(
            "outcome `{outcome}` is also a predictor"
        )));
    }
    let encoding = Encoding::for_table(t, predictors)?;
    if let Some(w) = weights {
        check_weights(w, t.n_rows())?;
    }
    let columns: Vec<usize> = predictors
        .iter()
        .map(|p| t.schema().require(p.as_ref()))
        .collect::<Result<_, _>>()?;
    let patterns = Patterns::of(t, &columns);
    let k = classes.len();
    let mut counts = vec![0.0; patterns.len() * k];
    let y = t.column_at(outcome_col);
    for (r, &g) in patterns.row_pattern.iter().enumerate() {
        counts[g as usize * k + class_of[y[r] as usize]] += weights.map_or(1.0, |w| w[r]);
    }
    let mut totals = vec![0.0; k];
    for (i, c) in counts.iter().enumerate() {
        totals[i % k] += c;
    }
    let observed = totals.iter().filter(|&&c| c > 0.0).count();
    if observed < 2 {
        return Err(EstimateError::DegenerateOutcome(outcome.to_string()));
    }
    if let Some(c) = totals.iter().position(|&c| c == 0.0) {
        return Err(EstimateError::UnobservedLevel {
            variable: outcome.to_string(),
            level: classes[c].clone(),
        });
    }
    let x: Vec<Vec<f64>> = patterns.levels.iter().map(|l| encoding.encode(l)).collect();
    match solve_grouped(&x, &counts, k) {
        Solved::Fit(beta, convergence) => Ok(LogisticModel {
            outcome: outcome.to_string(),
            classes,
            class_of: class_of.to_vec(),
            encoding,
            beta,
            convergence,
        }),
        Solved::Diverged(column) => Err(EstimateError::PerfectSeparation {
            outcome: outcome.to_string(),
            predictor: encoding.column_variable(column).unwrap_or("(intercept)").to_string(),
        }),
    }
}

pub(crate) fn check_weights(w: &[f64], n: usize) -> Result<(), EstimateError> {
    if w.len() != n {
        return Err(EstimateError::InvalidWeights(format!(
            "{} weights for {n} rows",
            w.len()
        )));
    }
    if let Some(r) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(EstimateError::NonFinite {
            row: r + 1,
            value: w[r],
        });
    }
    Ok(())
}

fn binary_classes(t: &DataTable, outcome: &str, level: &str) -> Result<(Vec<String>, Vec<usize>), EstimateError> {
    let var = t
        .schema()
        .variable(outcome)
        .ok_or_else(|| EstimateError::SchemaMismatch(format!("outcome `{outcome}` is not a column")))?;
    let target = var.level_index(level).ok_or_else(|| EstimateError::UnknownLevel {
        variable: outcome.to_string(),
        level: level.to_string(),
    })?;
    let class_of = (0..var.n_levels()).map(|l| usize::from(l == target)).collect();
    Ok((alloc::vec![format!("not {level}"), level.to_string()], class_of))
}

fn multinomial_classes(t: &DataTable, outcome: &str) -> Result<(Vec<String>, Vec<usize>), EstimateError> {
    let var = t
        .schema()
        .variable(outcome)
        .ok_or_else(|| EstimateError::SchemaMismatch(format!("outcome `{outcome}` is not a column")))?;
    let r = var.reference_index();
    // reference first, other levels in declared order
    let mut classes = alloc::vec![var.reference_level().to_string()];
    let mut class_of = vec![0; var.n_levels()];
    for (i, level) in var.levels().iter().enumerate().filter(|(i, _)| *i != r) {
        class_of[i] = classes.len();
        classes.push(level.clone());
    }
    Ok((classes, class_of))
}

/// Binary logistic regression of `outcome == outcome_level` on the
/// indicator-coded `predictors` (which may be empty).
pub fn fit_logistic<S: AsRef<str>>(
    t: &DataTable,
    outcome: &str,
    outcome_level: &str,
    predictors: &[S],
) -> Result<LogisticModel, EstimateError> {
    let (classes, class_of) = binary_classes(t, outcome, outcome_level)?;
    fit_table(t, outcome, classes, &class_of, predictors, None)
}

/// [`fit_logistic`] with non-negative per-row weights.
pub fn fit_logistic_weighted<S: AsRef<str>>(
    t: &DataTable,
    outcome: &str,
    outcome_level: &str,
    predictors: &[S],
    weights: &[f64],
) -> Result<LogisticModel, EstimateError> {
    let (classes, class_of) = binary_classes(t, outcome, outcome_level)?;
    fit_table(t, outcome, classes, &class_of, predictors, Some(weights))
}

/// Baseline-category multinomial logit over all levels of `outcome`, with
/// its reference level as baseline. Classes are the reference level
/// followed by the other levels in declared order.
pub fn fit_multinomial<S: AsRef<str>>(
    t: &DataTable,
    outcome: &str,
    predictors: &[S],
) -> Result<LogisticModel, EstimateError> {
    let (classes, class_of) = multinomial_classes(t, outcome)?;
    fit_table(t, outcome, classes, &class_of, predictors, None)
}

/// [`fit_multinomial`] with non-negative per-row weights.
pub fn fit_multinomial_weighted<S: AsRef<str>>(
    t: &DataTable,
    outcome: &str,
    predictors: &[S],
    weights: &[f64],
) -> Result<LogisticModel, EstimateError> {
    let (classes, class_of) = multinomial_classes(t, outcome)?;
    fit_table(t, outcome, classes, &class_of, predictors, Some(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Schema;
    use crate::graph::Variable;

    fn table(vars: &[(&str, &[&str])], cells: &[(&[u16], usize)]) -> DataTable {
        let schema = Schema::new(
            vars.iter()
                .map(|(n, l)| Variable::with_levels(*n, l.iter().copied()).unwrap())
                .collect(),
        )
        .unwrap();
        let mut cols = vec![Vec::new(); vars.len()];
        for (levels, n) in cells {
            for _ in 0..*n {
                for (c, &l) in levels.iter().enumerate() {
                    cols[c].push(l);
                }
            }
        }
        DataTable::from_columns(schema, cols).unwrap()
    }

    const BIN: &[&str] = &["0", "1"];

    #[test]
    fn saturated_two_by_two_odds_ratio() {
        let t = table(
            &[("X", BIN), ("Y", BIN)],
            &[(&[1, 1], 30), (&[1, 0], 10), (&[0, 1], 10), (&[0, 0], 30)],
        );
        let m = fit_logistic(&t, "Y", "1", &["X"]).unwrap();
        assert!(m.convergence().converged);
        let b = m.coefficient(1, "X=1").unwrap();
        assert!((libm::exp(b) - 9.0).abs() < 1e-9, "{}", libm::exp(b));
        let b0 = m.coefficients(1)[0];
        assert!((b0 - libm::log(10.0 / 30.0)).abs() < 1e-9);
    }

    #[test]
    fn constant_predictor_gives_intercept_only_half() {
        let t = table(&[("X", BIN), ("Y", BIN)], &[(&[0, 1], 25), (&[0, 0], 25)]);
        let m = fit_logistic(&t, "Y", "1", &["X"]).unwrap();
        let p = m.predict(&[0]);
        assert!((p[1] - 0.5).abs() < 1e-12);
        assert_eq!(m.convergence().iterations, 0);
    }

    #[test]
    fn multinomial_on_two_classes_matches_logistic() {
        let t = table(
            &[("A", &["a", "b", "c"]), ("B", BIN), ("Y", BIN)],
            &[
                (&[0, 0, 0], 20),
                (&[0, 0, 1], 7),
                (&[1, 0, 0], 9),
                (&[1, 1, 1], 14),
                (&[2, 1, 0], 11),
                (&[2, 0, 1], 5),
                (&[0, 1, 1], 3),
                (&[1, 1, 0], 4),
                (&[2, 1, 1], 6),
            ],
        );
        let a = fit_logistic(&t, "Y", "1", &["A", "B"]).unwrap();
        let b = fit_multinomial(&t, "Y", &["A", "B"]).unwrap();
        for (x, y) in a.coefficients(1).iter().zip(b.coefficients(1)) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn uniform_three_classes() {
        let t = table(&[("Y", &["a", "b", "c"])], &[(&[0], 10), (&[1], 10), (&[2], 10)]);
        let m = fit_multinomial::<&str>(&t, "Y", &[]).unwrap();
        for p in m.predict(&[]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_multinomial_matches_frequencies() {
        let t = table(
            &[("X", BIN), ("Y", &["a", "b", "c"])],
            &[
                (&[0, 0], 12),
                (&[0, 1], 5),
                (&[0, 2], 3),
                (&[1, 0], 2),
                (&[1, 1], 9),
                (&[1, 2], 9),
            ],
        );
        let m = fit_multinomial(&t, "Y", &["X"]).unwrap();
        let p0 = m.predict(&[0]);
        let p1 = m.predict(&[1]);
        for (got, want) in p0.iter().zip([12.0 / 20.0, 5.0 / 20.0, 3.0 / 20.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        for (got, want) in p1.iter().zip([0.1, 0.45, 0.45]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((p1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separation_names_the_predictor() {
        let t = table(&[("Z", BIN), ("X", BIN)], &[(&[0, 0], 30), (&[1, 1], 30)]);
        assert_eq!(
            fit_logistic(&t, "X", "1", &["Z"]).unwrap_err(),
            EstimateError::PerfectSeparation {
                outcome: "X".into(),
                predictor: "Z".into()
            }
        );
        // quasi-complete: one empty cell
        let t = table(
            &[("Z", BIN), ("X", BIN)],
            &[(&[0, 0], 30), (&[0, 1], 10), (&[1, 1], 30)],
        );
        assert!(matches!(
            fit_logistic(&t, "X", "1", &["Z"]),
            Err(EstimateError::PerfectSeparation { .. })
        ));
    }

    #[test]
    fn degenerate_and_invalid() {
        let t = table(&[("X", BIN), ("Y", BIN)], &[(&[0, 1], 5), (&[1, 1], 5)]);
        assert_eq!(
            fit_logistic(&t, "Y", "1", &["X"]).unwrap_err(),
            EstimateError::DegenerateOutcome("Y".into())
        );
        assert!(matches!(
            fit_logistic(&t, "Y", "1", &["Y"]),
            Err(EstimateError::InvalidPredictors(_))
        ));
        assert!(matches!(
            fit_logistic(&t, "Y", "2", &["X"]),
            Err(EstimateError::UnknownLevel { .. })
        ));
        let t = table(&[("Y", &["a", "b", "c"])], &[(&[0], 10), (&[1], 10)]);
        assert!(matches!(
            fit_multinomial::<&str>(&t, "Y", &[]),
            Err(EstimateError::UnobservedLevel { .. })
        ));
    }

    #[test]
    fn weights_equal_replication() {
        let t = table(
            &[("X", BIN), ("Y", BIN)],
            &[(&[1, 1], 3), (&[1, 0], 1), (&[0, 1], 1), (&[0, 0], 2)],
        );
        let doubled: Vec<f64> = (0..t.n_rows()).map(|r| if r < 3 { 2.0 } else { 1.0 }).collect();
        let w = fit_logistic_weighted(&t, "Y", "1", &["X"], &doubled).unwrap();
        let t2 = table(
            &[("X", BIN), ("Y", BIN)],
            &[(&[1, 1], 6), (&[1, 0], 1), (&[0, 1], 1), (&[0, 0], 2)],
        );
        let r = fit_logistic(&t2, "Y", "1", &["X"]).unwrap();
        for (a, b) in w.coefficients(1).iter().zip(r.coefficients(1)) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(matches!(
            fit_logistic_weighted(&t, "Y", "1", &["X"], &[1.0; 3]),
            Err(EstimateError::InvalidWeights(_))
        ));
    }
}
