//! Coefficient estimation: dense least squares and l1-minimisation under a residual bound.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::lstsq_min_norm;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("{context}: {required} observations required, {got} available")]
    Underdetermined {
        context: String,
        required: usize,
        got: usize,
    },
    #[error("non-finite value in design matrix or targets")]
    NonFiniteInput,
    #[error("design has {rows} rows but {targets} targets")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: FitMode,
    /// Largest admissible relative squared residual of a sparse fit.
    pub gamma: f64,
    /// Pivots below this fraction of the largest are treated as zero in dense fits.
    pub rank_cutoff: f64,
    pub max_iter: usize,
    pub conv_tol: f64,
    pub path_len: usize,
    pub path_ratio: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mode: FitMode::Dense,
            gamma: 0.001,
            rank_cutoff: 1e-10,
            max_iter: 100_000,
            conv_tol: 1e-9,
            path_len: 100,
            path_ratio: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn sparse(gamma: f64) -> Self {
        FitConfig {
            mode: FitMode::Sparse,
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), RegressionError> {
        let bad = |s: &str| Err(RegressionError::InvalidConfig(s.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.rank_cutoff > 0.0) || !(self.conv_tol > 0.0) {
            return bad("cutoff and tolerance must be positive");
        }
        if self.max_iter == 0 || self.path_len < 2 || !(self.path_ratio > 0.0 && self.path_ratio < 1.0) {
            return bad("path and iteration settings out of range");
        }
        Ok(())
    }
}

/// Coefficients aligned with a basis, plus the indices of the non-zero entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector<F> {
    pub values: Vec<F>,
    pub support: Vec<usize>,
}

impl<F: Real> CoefficientVector<F> {
    pub fn new(values: Vec<F>) -> Self {
        let support = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != F::zero())
            .map(|(i, _)| i)
            .collect();
        CoefficientVector { values, support }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome<F> {
    pub coefficients: CoefficientVector<F>,
    /// Penalty weight of the returned point, on standardised scale (sparse fits only).
    pub lambda: Option<f64>,
    pub relative_residual: f64,
    pub constraint_met: bool,
}

fn check_inputs<F: Real>(design: &Array2<F>, targets: &[F]) -> Result<(), RegressionError> {
    if design.nrows() != targets.len() {
        return Err(RegressionError::ShapeMismatch {
            rows: design.nrows(),
            targets: targets.len(),
        });
    }
    if design.iter().chain(targets).any(|x| !x.is_finite()) {
        return Err(RegressionError::NonFiniteInput);
    }
    Ok(())
}

/// `sum (y - yhat)^2 / sum (y - ybar)^2`, zero when the targets are constant and fitted exactly.
pub fn relative_residual<F: Real>(design: &Array2<F>, targets: &[F], theta: &[F]) -> f64 {
    let m = targets.len() as f64;
    let ybar = targets.iter().map(|y| y.as_f64()).sum::<f64>() / m;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for (r, &y) in targets.iter().enumerate() {
        let yhat: f64 = design
            .row(r)
            .iter()
            .zip(theta)
            .map(|(&x, &t)| x.as_f64() * t.as_f64())
            .sum();
        sse += (y.as_f64() - yhat).powi(2);
        sst += (y.as_f64() - ybar).powi(2);
    }
    if sst > 0.0 {
        sse / sst
    } else if sse <= f64::EPSILON * m {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Ordinary least squares through a rank-revealing QR; minimum-norm among minimisers.
pub fn dense_fit<F: Real>(
    design: &Array2<F>,
    targets: &[F],
    cfg: &FitConfig,
) -> Result<FitOutcome<F>, RegressionError> {
    check_inputs(design, targets)?;
    let (m, p) = design.dim();
    if m < p {
        return Err(RegressionError::Underdetermined {
            context: "dense fit".into(),
            required: p,
            got: m,
        });
    }
    let tol = F::lit(cfg.rank_cutoff).max(F::epsilon() * F::lit(64.0));
    let (theta, _rank) = lstsq_min_norm(design, targets, tol);
    let rr = relative_residual(design, targets, &theta);
    Ok(FitOutcome {
        coefficients: CoefficientVector::new(theta),
        lambda: None,
        relative_residual: rr,
        constraint_met: true,
    })
}

/// Centred, unit-scaled copy of the problem; column 0 is taken as the intercept.
struct Standardized {
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    col_mean: Vec<f64>,
    col_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    sst: f64,
}

impl Standardized {
    fn new<F: Real>(design: &Array2<F>, targets: &[F]) -> Self {
        let (m, p) = design.dim();
        let mf = m as f64;
        let y_raw: Vec<f64> = targets.iter().map(|v| v.as_f64()).collect();
        let y_mean = y_raw.iter().sum::<f64>() / mf;
        let sst: f64 = y_raw.iter().map(|v| (v - y_mean).powi(2)).sum();
        let y_scale = if sst > 0.0 { (sst / mf).sqrt() } else { 1.0 };
        let y = y_raw.iter().map(|v| (v - y_mean) / y_scale).collect();
        let mut cols = Vec::with_capacity(p.saturating_sub(1));
        let mut col_mean = Vec::new();
        let mut col_scale = Vec::new();
        for j in 1..p {
            let c: Vec<f64> = design.column(j).iter().map(|v| v.as_f64()).collect();
            let mean = c.iter().sum::<f64>() / mf;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / mf).sqrt();
            col_mean.push(mean);
            if sd > 1e-12 * mean.abs().max(1.0) {
                col_scale.push(sd);
                cols.push(c.iter().map(|v| (v - mean) / sd).collect());
            } else {
                // Constant columns cannot explain centred targets; they stay at zero.
                col_scale.push(0.0);
                cols.push(vec![0.0; m]);
            }
        }
        Standardized {
            cols,
            y,
            col_mean,
            col_scale,
            y_mean,
            y_scale,
            sst,
        }
    }

    /// Maps standardised slopes back to coefficients of the original design, intercept first.
    fn unscale<F: Real>(&self, beta: &[f64]) -> Vec<F> {
        let mut out = Vec::with_capacity(beta.len() + 1);
        let mut intercept = self.y_mean;
        let mut slopes = Vec::with_capacity(beta.len());
        for (j, &b) in beta.iter().enumerate() {
            let s = if self.col_scale[j] > 0.0 {
                b * self.y_scale / self.col_scale[j]
            } else {
                0.0
            };
            intercept -= s * self.col_mean[j];
            slopes.push(s);
        }
        out.push(F::lit(intercept));
        out.extend(slopes.into_iter().map(F::lit));
        out
    }

    fn m(&self) -> f64 {
        self.y.len() as f64
    }
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Coordinate descent for `(1/2m)|y - X b|^2 + lambda |b|_1` from a warm start.
///
/// `resid` must equal `y - X beta` on entry and is kept in sync.
fn coordinate_descent(
    s: &Standardized,
    lambda: f64,
    beta: &mut [f64],
    resid: &mut [f64],
    max_iter: usize,
    tol: f64,
) {
    let m = s.m();
    let p = beta.len();
    let sweep = |idx: &mut dyn Iterator<Item = usize>, beta: &mut [f64], resid: &mut [f64]| -> f64 {
        let mut max_change: f64 = 0.0;
        for j in idx {
            if s.col_scale[j] == 0.0 {
                continue;
            }
            let col = &s.cols[j];
            let rho = col.iter().zip(resid.iter()).map(|(a, b)| a * b).sum::<f64>() / m + beta[j];
            let new = soft(rho, lambda);
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, &x) in resid.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    };
    let mut iters = 0;
    loop {
        let change = sweep(&mut (0..p), beta, resid);
        iters += 1;
        if change < tol || iters >= max_iter {
            return;
        }
        // Iterate on the active set until it settles, then re-check all coordinates.
        loop {
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            let change = sweep(&mut active.into_iter(), beta, resid);
            iters += 1;
            if change < tol || iters >= max_iter {
                break;
            }
        }
        if iters >= max_iter {
            return;
        }
    }
}

/// l1-minimal coefficients whose relative squared residual does not exceed `cfg.gamma`.
///
/// Column 0 is the unpenalised intercept. The penalised path is traced from the
/// smallest all-zero weight downwards; the first feasible grid point is refined by
/// bisection towards the largest feasible weight. When no weight is feasible the
/// least-residual candidate is returned with `constraint_met = false`.
pub fn sparse_fit<F: Real>(
    design: &Array2<F>,
    targets: &[F],
    cfg: &FitConfig,
) -> Result<FitOutcome<F>, RegressionError> {
    check_inputs(design, targets)?;
    cfg.validate()?;
    let (m, p) = design.dim();
    if m < 2 || p == 0 {
        return Err(RegressionError::Underdetermined {
            context: "sparse fit".into(),
            required: 2,
            got: m,
        });
    }
    let s = Standardized::new(design, targets);
    let k = p - 1;
    let mf = s.m();
    let finish = |beta: &[f64], lambda: Option<f64>, rr: f64, met: bool| FitOutcome {
        coefficients: CoefficientVector::new(s.unscale::<F>(beta)),
        lambda,
        relative_residual: rr,
        constraint_met: met,
    };
    if s.sst == 0.0 || k == 0 {
        let beta = vec![0.0; k];
        let rr = if s.sst == 0.0 { 0.0 } else { 1.0 };
        return Ok(finish(&beta, None, rr, rr <= cfg.gamma));
    }

    // On the standardised scale the residual of the centred problem is relative to sst directly.
    let rel = |resid: &[f64]| resid.iter().map(|r| r * r).sum::<f64>() / mf;
    let lambda_max = s
        .cols
        .iter()
        .map(|c| (c.iter().zip(&s.y).map(|(a, b)| a * b).sum::<f64>() / mf).abs())
        .fold(0.0, f64::max);
    if 1.0 <= cfg.gamma || lambda_max == 0.0 {
        let beta = vec![0.0; k];
        return Ok(finish(&beta, Some(lambda_max), 1.0, 1.0 <= cfg.gamma));
    }

    let mut beta = vec![0.0; k];
    let mut resid = s.y.clone();
    let n = cfg.path_len;
    let ratio = cfg.path_ratio.powf(1.0 / (n - 1) as f64);
    let mut prev = (lambda_max, beta.clone(), resid.clone());
    let mut lambda = lambda_max;
    for _ in 1..n {
        lambda *= ratio;
        coordinate_descent(&s, lambda, &mut beta, &mut resid, cfg.max_iter, cfg.conv_tol);
        if rel(&resid) <= cfg.gamma {
            // Bisection on log(lambda) between the infeasible `prev` and this feasible point.
            let (mut hi, mut lo) = (prev.0, lambda);
            let (mut best_beta, mut best_resid, mut best_lambda) = (beta.clone(), resid.clone(), lambda);
            let mut b = prev.1.clone();
            let mut r = prev.2.clone();
            for _ in 0..30 {
                let mid = (hi * lo).sqrt();
                coordinate_descent(&s, mid, &mut b, &mut r, cfg.max_iter, cfg.conv_tol);
                if rel(&r) <= cfg.gamma {
                    lo = mid;
                    best_beta.clone_from(&b);
                    best_resid.clone_from(&r);
                    best_lambda = mid;
                } else {
                    hi = mid;
                }
                if hi / lo < 1.0 + 1e-4 {
                    break;
                }
            }
            return Ok(finish(&best_beta, Some(best_lambda), rel(&best_resid), true));
        }
        prev = (lambda, beta.clone(), resid.clone());
    }

    // Nothing on the path reaches the bound; offer the least-residual candidate.
    let path_rr = rel(&resid);
    if m >= p {
        let dense = dense_fit(design, targets, cfg)?;
        if dense.relative_residual < path_rr {
            let met = dense.relative_residual <= cfg.gamma;
            return Ok(FitOutcome {
                lambda: Some(0.0),
                constraint_met: met,
                ..dense
            });
        }
    }
    Ok(finish(&beta, Some(lambda), path_rr, path_rr <= cfg.gamma))
}

/// Largest violation of the Lagrangian optimality conditions at `lambda`, on the standardised scale.
pub fn kkt_violation<F: Real>(design: &Array2<F>, targets: &[F], theta: &[F], lambda: f64) -> f64 {
    let s = Standardized::new(design, targets);
    let mf = s.m();
    let beta: Vec<f64> = (0..s.cols.len())
        .map(|j| {
            if s.col_scale[j] > 0.0 {
                theta[j + 1].as_f64() * s.col_scale[j] / s.y_scale
            } else {
                0.0
            }
        })
        .collect();
    let mut resid = s.y.clone();
    for (j, &b) in beta.iter().enumerate() {
        for (r, &x) in resid.iter_mut().zip(&s.cols[j]) {
            *r -= b * x;
        }
    }
    let mut worst: f64 = 0.0;
    for (j, &b) in beta.iter().enumerate() {
        if s.col_scale[j] == 0.0 {
            continue;
        }
        let g = s.cols[j].iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / mf;
        let v = if b != 0.0 {
            (g - lambda * b.signum()).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(m: usize, p: usize, seed: u64, noise: f64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((m, p), |(_, j)| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let y = (0..m)
            .map(|i| 3.0 + 2.0 * x[(i, 1)] - 0.5 * x[(i, 3)] + noise * rng.gen_range(-1.0..1.0))
            .collect();
        (x, y)
    }

    #[test]
    fn intercept_only_design() {
        let x: Array2<f64> = Array2::from_elem((5, 1), 1.0);
        let f = dense_fit(&x, &[4.0; 5], &FitConfig::default()).unwrap();
        assert!((f.coefficients.values[0] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn dense_recovers_noiseless_coefficients() {
        let (x, y) = problem(40, 6, 1, 0.0);
        let f = dense_fit(&x, &y, &FitConfig::default()).unwrap();
        let want = [3.0, 2.0, 0.0, -0.5, 0.0, 0.0];
        for (a, b) in f.coefficients.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(f.relative_residual < 1e-20);
    }

    #[test]
    fn dense_rejects_short_data() {
        let (x, y) = problem(4, 6, 1, 0.0);
        assert!(matches!(
            dense_fit(&x, &y, &FitConfig::default()),
            Err(RegressionError::Underdetermined { required: 6, got: 4, .. })
        ));
        let mut bad = y.clone();
        bad[0] = f64::INFINITY;
        assert_eq!(
            sparse_fit(&x, &bad, &FitConfig::sparse(0.1)).unwrap_err(),
            RegressionError::NonFiniteInput
        );
    }

    #[test]
    fn gamma_one_gives_constant_model() {
        let (x, y) = problem(30, 8, 2, 0.1);
        let f = sparse_fit(&x, &y, &FitConfig::sparse(1.0)).unwrap();
        assert_eq!(f.coefficients.support, vec![0]);
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        assert!((f.coefficients.values[0] - ybar).abs() < 1e-12);
    }

    #[test]
    fn sparse_meets_bound_and_kkt() {
        let (x, y) = problem(30, 12, 3, 0.05);
        let cfg = FitConfig::sparse(0.01);
        let f = sparse_fit(&x, &y, &cfg).unwrap();
        assert!(f.constraint_met);
        assert!(f.relative_residual <= 0.01);
        assert!((relative_residual(&x, &y, &f.coefficients.values) - f.relative_residual).abs() < 1e-9);
        assert!(kkt_violation(&x, &y, &f.coefficients.values, f.lambda.unwrap()) < 1e-6);
        assert!(f.coefficients.support.contains(&1));
    }

    #[test]
    fn smaller_gamma_never_worse_residual() {
        let (x, y) = problem(25, 15, 4, 0.2);
        let mut last = f64::INFINITY;
        for g in [0.5, 0.2, 0.1, 0.05, 0.01, 0.001] {
            let f = sparse_fit(&x, &y, &FitConfig::sparse(g)).unwrap();
            assert!(f.relative_residual <= last + 1e-12);
            last = f.relative_residual;
        }
    }

    #[test]
    fn gamma_zero_on_noiseless_data_matches_dense_support() {
        let (x, y) = problem(40, 6, 5, 0.0);
        let s = sparse_fit(&x, &y, &FitConfig::sparse(0.0)).unwrap();
        let d = dense_fit(&x, &y, &FitConfig::default()).unwrap();
        for (a, b) in s.coefficients.values.iter().zip(&d.coefficients.values) {
            if b.abs() > 1e-8 {
                assert_eq!(a.signum(), b.signum());
            }
        }
    }

    #[test]
    fn deterministic() {
        let (x, y) = problem(20, 30, 6, 0.1);
        let a = sparse_fit(&x, &y, &FitConfig::sparse(0.01)).unwrap();
        let b = sparse_fit(&x, &y, &FitConfig::sparse(0.01)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::sparse(1.5).validate().is_err());
        assert!(FitConfig { conv_tol: 0.0, ..Default::default() }.validate().is_err());
    }
}
