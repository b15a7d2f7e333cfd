//! Monte Carlo pick-freeze estimates of Sobol indices, used as a reference oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distribution::Distribution;
use crate::scalar::Real;
use crate::sobol::{InputIndices, SobolError, SobolReport};

/// Draws one input row from a counter-based stream so rows are independent of scheduling.
pub fn sample_row<F: Real>(inputs: &[(String, Distribution<F>)], seed: u64, stream: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    inputs.iter().map(|(_, d)| d.sample(&mut rng)).collect()
}

/// Saltelli first-order and Jansen total estimates from `n` base rows.
///
/// With base matrices `A`, `B` and `AB_i` (A with column i taken from B):
///
/// ```text
/// S_i  = mean( (f(B) - f0) * (f(AB_i) - f(A)) ) / V
/// ST_i = mean( (f(A) - f(AB_i))^2 ) / (2 V)
/// ```
///
/// where `f0` and `V` are the mean and variance of all `f(A)` and `f(B)` values.
/// Row `j` of `A` uses stream `2j` and row `j` of `B` stream `2j + 1`.
/// Estimates are not clipped to `[0, 1]`.
pub fn sobol_pick_freeze<F, M, E>(
    model: M,
    inputs: &[(String, Distribution<F>)],
    n: usize,
    seed: u64,
) -> Result<SobolReport, SobolError>
where
    F: Real,
    M: Fn(&[F]) -> Result<F, E> + Sync,
    E: std::fmt::Display,
{
    if n < 2 {
        return Err(SobolError::TooFewSamples);
    }
    let d = inputs.len();
    let eval = |x: &[F]| -> Result<f64, SobolError> {
        let y = model(x).map_err(|e| SobolError::ModelEvaluationFailure(e.to_string()))?;
        if y.is_finite() {
            Ok(y.as_f64())
        } else {
            Err(SobolError::ModelEvaluationFailure(format!("non-finite output {y}")))
        }
    };
    // Per row: f(A), f(B), f(AB_1..AB_d).
    let rows: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|j| {
            let a = sample_row(inputs, seed, 2 * j);
            let b = sample_row(inputs, seed, 2 * j + 1);
            let mut out = Vec::with_capacity(d + 2);
            out.push(eval(&a)?);
            out.push(eval(&b)?);
            let mut ab = a.clone();
            for i in 0..d {
                ab[i] = b[i];
                out.push(eval(&ab)?);
                ab[i] = a[i];
            }
            Ok(out)
        })
        .collect::<Result<_, SobolError>>()?;

    let nf = n as f64;
    let f0 = rows.iter().map(|r| r[0] + r[1]).sum::<f64>() / (2.0 * nf);
    let var = rows
        .iter()
        .map(|r| (r[0] - f0).powi(2) + (r[1] - f0).powi(2))
        .sum::<f64>()
        / (2.0 * nf - 1.0);
    if !(var > 0.0) {
        return Err(SobolError::ZeroVariance);
    }
    let mut report = SobolReport::new("pick-freeze", n);
    report.output_mean = f0;
    report.output_variance = var;
    for (i, (name, _)) in inputs.iter().enumerate() {
        let mut s = 0.0;
        let mut st = 0.0;
        for r in &rows {
            let (fa, fb, fab) = (r[0], r[1], r[2 + i]);
            s += (fb - f0) * (fab - fa);
            st += (fa - fab).powi(2);
        }
        report.inputs.push(InputIndices {
            name: name.clone(),
            first_order: s / nf / var,
            total: st / (2.0 * nf) / var,
            first_order_se: None,
            total_se: None,
        });
    }
    Ok(report)
}
