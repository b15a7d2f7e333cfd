//! Sobol indices and moments read off expansion coefficients, plus replication summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{MultiIndex, OrthonormalBasis};
use crate::regression::CoefficientVector;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SobolError {
    #[error("output variance is zero; Sobol indices are undefined")]
    ZeroVariance,
    #[error("factor {0} is a dependent group; indices need independent inputs")]
    DependentFactor(usize),
    #[error("coefficient vector has {got} entries, basis has {want}")]
    Misaligned { got: usize, want: usize },
    #[error("model evaluation failed: {0}")]
    ModelEvaluationFailure(String),
    #[error("sample size must be at least 2")]
    TooFewSamples,
    #[error("cannot aggregate: {0}")]
    Aggregate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputIndices {
    pub name: String,
    pub first_order: f64,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_order_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub total_se: Option<f64>,
}

/// First-order and total indices per input with output moments and fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolReport {
    pub method: String,
    pub m: usize,
    pub inputs: Vec<InputIndices>,
    pub output_mean: f64,
    pub output_variance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub failures: usize,
    /// Non-zero coefficients of the top-level fit (mean over replications).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub support_size: Option<f64>,
    /// Non-zero coefficients of the final expansion in the network inputs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_support_size: Option<f64>,
    /// Number of sparse fits whose residual bound could not be met.
    #[serde(default)]
    pub constraint_unmet: usize,
    #[serde(default)]
    pub degenerate_inputs: Vec<String>,
    #[serde(default)]
    pub zero_variance: bool,
}

impl SobolReport {
    pub fn new(method: &str, m: usize) -> Self {
        SobolReport {
            method: method.to_string(),
            m,
            inputs: Vec::new(),
            output_mean: 0.0,
            output_variance: 0.0,
            replications: None,
            failures: 0,
            support_size: None,
            final_support_size: None,
            constraint_unmet: 0,
            degenerate_inputs: Vec::new(),
            zero_variance: false,
        }
    }

    pub fn get(&self, name: &str) -> Option<&InputIndices> {
        self.inputs.iter().find(|i| i.name == name)
    }

    /// Zero indices for every input, used when the fitted output has no variance.
    pub fn zero_variance(method: &str, m: usize, inputs: &[String], mean: f64) -> Self {
        let mut r = SobolReport::new(method, m);
        r.output_mean = mean;
        r.zero_variance = true;
        r.inputs = inputs
            .iter()
            .map(|n| InputIndices {
                name: n.clone(),
                first_order: 0.0,
                total: 0.0,
                first_order_se: None,
                total_se: None,
            })
            .collect();
        r
    }
}

/// `(theta_0, sum_{i>0} theta_i^2)`.
pub fn moments_from_pce<F: Real>(theta: &[F]) -> (F, F) {
    let mean = theta.first().copied().unwrap_or_else(F::zero);
    let var = theta.iter().skip(1).map(|&t| t * t).sum();
    (mean, var)
}

/// Indices from coefficients over tensor terms in independent inputs.
///
/// `terms[i]` gives, per input slot, the order of term `i`; the constant term
/// must come first. Inputs untouched by every non-zero term get exactly zero.
pub fn sobol_from_terms<F: Real>(
    inputs: &[String],
    terms: &[MultiIndex],
    theta: &[F],
) -> Result<(Vec<InputIndices>, f64, f64), SobolError> {
    if terms.len() != theta.len() {
        return Err(SobolError::Misaligned {
            got: theta.len(),
            want: terms.len(),
        });
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut first = vec![0.0; inputs.len()];
    let mut total = vec![0.0; inputs.len()];
    for (t, &c) in terms.iter().zip(theta) {
        let c = c.as_f64();
        if t.is_constant() {
            mean += c;
            continue;
        }
        let c2 = c * c;
        if c2 == 0.0 {
            continue;
        }
        var += c2;
        let mut support = t.support();
        let lead = support.next();
        let single = support.next().is_none();
        for j in t.support() {
            total[j] += c2;
        }
        if let (Some(j), true) = (lead, single) {
            first[j] += c2;
        }
    }
    if !(var > 0.0) {
        return Err(SobolError::ZeroVariance);
    }
    let out = inputs
        .iter()
        .enumerate()
        .map(|(j, n)| InputIndices {
            name: n.clone(),
            first_order: first[j] / var,
            total: total[j] / var,
            first_order_se: None,
            total_se: None,
        })
        .collect();
    Ok((out, mean, var))
}

/// Indices for a basis built only from univariate factors.
pub fn sobol_from_pce<F: Real>(
    theta: &CoefficientVector<F>,
    basis: &OrthonormalBasis<F>,
    method: &str,
    m: usize,
) -> Result<SobolReport, SobolError> {
    if let Some(j) = basis.factors.iter().position(|f| f.is_group()) {
        return Err(SobolError::DependentFactor(j));
    }
    let names: Vec<String> = basis
        .factors
        .iter()
        .map(|f| f.variables()[0].to_string())
        .collect();
    let (inputs, mean, var) = sobol_from_terms(&names, &basis.terms, &theta.values)?;
    let mut r = SobolReport::new(method, m);
    r.inputs = inputs;
    r.output_mean = mean;
    r.output_variance = var;
    r.support_size = Some(theta.support.len() as f64);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoEntry {
    pub name: String,
    pub first_order: f64,
    pub cumulative: f64,
}

/// Inputs by decreasing first-order index with the running share of their sum.
pub fn pareto_data(report: &SobolReport) -> Vec<ParetoEntry> {
    let mut v: Vec<&InputIndices> = report.inputs.iter().collect();
    v.sort_by(|a, b| b.first_order.total_cmp(&a.first_order));
    let sum: f64 = v.iter().map(|i| i.first_order).sum();
    let mut acc = 0.0;
    v.into_iter()
        .map(|i| {
            acc += i.first_order;
            ParetoEntry {
                name: i.name.clone(),
                first_order: i.first_order,
                cumulative: if sum > 0.0 { acc / sum } else { 0.0 },
            }
        })
        .collect()
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-input mean and standard error (sample sd over sqrt(reps)) across successful replications.
pub fn aggregate(reports: &[SobolReport], failures: usize) -> Result<SobolReport, SobolError> {
    let first = reports
        .first()
        .ok_or_else(|| SobolError::Aggregate("every replication failed".into()))?;
    let mut out = SobolReport::new(&first.method, first.m);
    out.replications = Some(reports.len() + failures);
    out.failures = failures;
    for (j, inp) in first.inputs.iter().enumerate() {
        let s: Vec<f64> = reports.iter().map(|r| r.inputs[j].first_order).collect();
        let t: Vec<f64> = reports.iter().map(|r| r.inputs[j].total).collect();
        if reports.iter().any(|r| r.inputs[j].name != inp.name) {
            return Err(SobolError::Aggregate("input order differs between replications".into()));
        }
        let (sm, sse) = mean_se(&s);
        let (tm, tse) = mean_se(&t);
        out.inputs.push(InputIndices {
            name: inp.name.clone(),
            first_order: sm,
            total: tm,
            first_order_se: Some(sse),
            total_se: Some(tse),
        });
    }
    out.output_mean = mean_se(&reports.iter().map(|r| r.output_mean).collect::<Vec<_>>()).0;
    out.output_variance = mean_se(&reports.iter().map(|r| r.output_variance).collect::<Vec<_>>()).0;
    let avg = |f: &dyn Fn(&SobolReport) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = reports.iter().map(f).collect();
        v.map(|v| mean_se(&v).0)
    };
    out.support_size = avg(&|r| r.support_size);
    out.final_support_size = avg(&|r| r.final_support_size);
    out.constraint_unmet = reports.iter().map(|r| r.constraint_unmet).sum();
    out.degenerate_inputs = first.degenerate_inputs.clone();
    out.zero_variance = reports.iter().all(|r| r.zero_variance);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    #[test]
    fn moments() {
        assert_eq!(moments_from_pce(&[5.0, 0.0, 0.0]), (5.0, 0.0));
        assert_eq!(moments_from_pce(&[0.0, 3.0, 4.0]), (0.0, 25.0));
    }

    #[test]
    fn single_input_carries_everything() {
        let terms = vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1])];
        let (r, _, _) = sobol_from_terms(&names(2), &terms, &[1.0, 2.0, 0.0]).unwrap();
        assert_eq!((r[0].first_order, r[0].total), (1.0, 1.0));
        assert_eq!((r[1].first_order, r[1].total), (0.0, 0.0));
    }

    #[test]
    fn interaction_arithmetic() {
        let terms = vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1]), mi(&[1, 1])];
        let (a, b, c) = (1.0, 2.0, 3.0);
        let (r, _, var) = sobol_from_terms(&names(2), &terms, &[7.0, a, b, c]).unwrap();
        let d = a * a + b * b + c * c;
        assert_eq!(var, d);
        assert!((r[0].first_order - a * a / d).abs() < 1e-15);
        assert!((r[0].total - (a * a + c * c) / d).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let terms = vec![mi(&[0]), mi(&[1])];
        assert_eq!(
            sobol_from_terms(&names(1), &terms, &[3.0, 0.0]).unwrap_err(),
            SobolError::ZeroVariance
        );
    }

    #[test]
    fn pareto_ordering() {
        let mut r = SobolReport::zero_variance("t", 1, &names(3), 0.0);
        r.inputs[1].first_order = 0.6;
        r.inputs[2].first_order = 0.2;
        let p = pareto_data(&r);
        assert_eq!(p[0].name, "x2");
        assert!((p[1].cumulative - 1.0).abs() < 1e-15);
        let mut one = SobolReport::zero_variance("t", 1, &names(1), 0.0);
        one.inputs[0].first_order = 0.9;
        assert_eq!(pareto_data(&one)[0].cumulative, 1.0);
    }

    #[test]
    fn identical_replications_have_zero_se() {
        let mut r = SobolReport::zero_variance("t", 10, &names(2), 0.0);
        r.inputs[0].first_order = 0.4;
        let a = aggregate(&[r.clone(), r], 0).unwrap();
        assert_eq!(a.inputs[0].first_order, 0.4);
        assert_eq!(a.inputs[0].first_order_se, Some(0.0));
        assert_eq!(a.replications, Some(2));
    }

    fn all_terms(n: usize) -> Vec<MultiIndex> {
        crate::basis::graded_lex(n, 3)
    }

    proptest! {
        #[test]
        fn bounds_scale_and_permutation(
            theta in proptest::collection::vec(-3.0f64..3.0, 20),
            scale in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            rot in 0usize..20,
        ) {
            let terms = all_terms(3);
            prop_assume!(theta.iter().skip(1).any(|t| t.abs() > 1e-3));
            let (r, _, _) = sobol_from_terms(&names(3), &terms, &theta).unwrap();
            let sum: f64 = r.iter().map(|i| i.first_order).sum();
            prop_assert!(sum <= 1.0 + 1e-9);
            for i in &r {
                prop_assert!(i.first_order >= 0.0 && i.first_order <= i.total + 1e-12 && i.total <= 1.0 + 1e-9);
            }
            let scaled: Vec<f64> = theta.iter().map(|t| t * scale).collect();
            let (rs, _, _) = sobol_from_terms(&names(3), &terms, &scaled).unwrap();
            // Rotate all but the constant term; indices follow the terms.
            let mut pt = terms[1..].to_vec();
            let mut pv = theta[1..].to_vec();
            let k = rot % pt.len();
            pt.rotate_left(k);
            pv.rotate_left(k);
            pt.insert(0, terms[0].clone());
            pv.insert(0, theta[0]);
            let (rp, _, _) = sobol_from_terms(&names(3), &pt, &pv).unwrap();
            for ((a, b), c) in r.iter().zip(&rs).zip(&rp) {
                prop_assert!((a.first_order - b.first_order).abs() < 1e-12);
                prop_assert!((a.total - b.total).abs() < 1e-12);
                prop_assert!((a.first_order - c.first_order).abs() < 1e-12);
                prop_assert!((a.total - c.total).abs() < 1e-12);
            }
        }

        #[test]
        fn additive_models_have_equal_first_and_total(theta in proptest::collection::vec(0.1f64..3.0, 10)) {
            let terms = all_terms(3);
            let vals: Vec<f64> = terms.iter().zip(theta.iter().cycle())
                .map(|(t, &v)| if t.support().count() == 1 { v } else { 0.0 })
                .collect();
            let (r, _, _) = sobol_from_terms(&names(3), &terms, &vals).unwrap();
            for i in &r {
                prop_assert!((i.first_order - i.total).abs() < 1e-12);
            }
        }
    }
}
