//! Marginal laws of network inputs.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid distribution: {0}")]
    Invalid(String),
}

/// Law of a single independent input.
///
/// A normal law with zero standard deviation is accepted and represents a fixed
/// input; such inputs are reported as degenerate and excluded from expansions.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution<F> {
    Normal { mean: F, sd: F },
    Uniform { lower: F, upper: F },
    Empirical { sample: Arc<[F]> },
}

impl<F: Real> Distribution<F> {
    pub fn normal(mean: F, sd: F) -> Result<Self, DistributionError> {
        if !mean.is_finite() || !sd.is_finite() || sd < F::zero() {
            return Err(DistributionError::Invalid(format!(
                "normal needs finite mean and sd >= 0, got ({mean}, {sd})"
            )));
        }
        Ok(Distribution::Normal { mean, sd })
    }

    pub fn normal_from_variance(mean: F, variance: F) -> Result<Self, DistributionError> {
        if variance < F::zero() {
            return Err(DistributionError::Invalid(format!(
                "normal variance must be >= 0, got {variance}"
            )));
        }
        Self::normal(mean, variance.sqrt())
    }

    pub fn uniform(lower: F, upper: F) -> Result<Self, DistributionError> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(DistributionError::Invalid(format!(
                "uniform needs finite lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Distribution::Uniform { lower, upper })
    }

    pub fn empirical(sample: Vec<F>) -> Result<Self, DistributionError> {
        if sample.is_empty() || sample.iter().any(|x| !x.is_finite()) {
            return Err(DistributionError::Invalid(
                "empirical sample must be non-empty and finite".into(),
            ));
        }
        Ok(Distribution::Empirical {
            sample: sample.into(),
        })
    }

    pub fn mean(&self) -> F {
        match self {
            Distribution::Normal { mean, .. } => *mean,
            Distribution::Uniform { lower, upper } => (*lower + *upper) / F::lit(2.0),
            Distribution::Empirical { sample } => {
                sample.iter().copied().sum::<F>() / F::from_usize_lossy(sample.len())
            }
        }
    }

    pub fn sd(&self) -> F {
        match self {
            Distribution::Normal { sd, .. } => *sd,
            Distribution::Uniform { lower, upper } => (*upper - *lower) / F::lit(12f64.sqrt()),
            Distribution::Empirical { sample } => {
                let mean = self.mean();
                let n = F::from_usize_lossy(sample.len());
                (sample.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n).sqrt()
            }
        }
    }

    /// True when the law carries no variance worth expanding in.
    pub fn is_degenerate(&self) -> bool {
        let sd = self.sd();
        let scale = self.mean().abs().max(F::one());
        !(sd > F::epsilon() * F::lit(16.0) * scale)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> F {
        match self {
            Distribution::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                *mean + *sd * F::lit(z)
            }
            Distribution::Uniform { lower, upper } => {
                let u: f64 = rng.gen();
                *lower + (*upper - *lower) * F::lit(u)
            }
            Distribution::Empirical { sample } => sample[rng.gen_range(0..sample.len())],
        }
    }
}
