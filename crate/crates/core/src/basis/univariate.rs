//! Orthonormal polynomial families in one variable.

use crate::basis::gram_schmidt::GroupBasis;
use crate::basis::BasisError;
use crate::distribution::Distribution;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hermite,
    Legendre,
    Empirical,
}

/// Orthonormal polynomials `phi_0..phi_p` in `z = (x - shift) / scale`.
///
/// `coefficients[k][i]` is the coefficient of `z^i` in `phi_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBasis<F> {
    pub family: Family,
    pub shift: F,
    pub scale: F,
    pub coefficients: Vec<Vec<F>>,
}

fn hermite_coefficients(p: usize) -> Vec<Vec<f64>> {
    // He_{k+1} = z He_k - k He_{k-1}, then divide by sqrt(k!).
    let mut raw: Vec<Vec<f64>> = vec![vec![1.0]];
    if p >= 1 {
        raw.push(vec![0.0, 1.0]);
    }
    for k in 1..p {
        let mut next = vec![0.0; k + 2];
        for (i, &c) in raw[k].iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, &c) in raw[k - 1].iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        raw.push(next);
    }
    let mut fact = 1.0;
    raw.into_iter()
        .enumerate()
        .map(|(k, c)| {
            if k > 0 {
                fact *= k as f64;
            }
            let norm = fact.sqrt();
            c.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

fn legendre_coefficients(p: usize) -> Vec<Vec<f64>> {
    // (k+1) P_{k+1} = (2k+1) t P_k - k P_{k-1} on t in [-1,1]; orthonormal under U(-1,1) after * sqrt(2k+1).
    let mut raw: Vec<Vec<f64>> = vec![vec![1.0]];
    if p >= 1 {
        raw.push(vec![0.0, 1.0]);
    }
    for k in 1..p {
        let kf = k as f64;
        let mut next = vec![0.0; k + 2];
        for (i, &c) in raw[k].iter().enumerate() {
            next[i + 1] += (2.0 * kf + 1.0) * c / (kf + 1.0);
        }
        for (i, &c) in raw[k - 1].iter().enumerate() {
            next[i] -= kf * c / (kf + 1.0);
        }
        raw.push(next);
    }
    raw.into_iter()
        .enumerate()
        .map(|(k, c)| {
            let norm = (2.0 * k as f64 + 1.0).sqrt();
            c.into_iter().map(|x| x * norm).collect()
        })
        .collect()
}

impl<F: Real> UnivariateBasis<F> {
    /// Analytic family for a parametric law, or a data-driven one for an empirical law.
    pub fn for_distribution(dist: &Distribution<F>, p: u32) -> Result<Self, BasisError> {
        if dist.is_degenerate() {
            return Err(BasisError::DegenerateDistribution);
        }
        let p = p as usize;
        let cast = |v: Vec<Vec<f64>>| -> Vec<Vec<F>> {
            v.into_iter()
                .map(|c| c.into_iter().map(F::lit).collect())
                .collect()
        };
        match dist {
            Distribution::Normal { mean, sd } => Ok(UnivariateBasis {
                family: Family::Hermite,
                shift: *mean,
                scale: *sd,
                coefficients: cast(hermite_coefficients(p)),
            }),
            Distribution::Uniform { lower, upper } => Ok(UnivariateBasis {
                family: Family::Legendre,
                shift: (*lower + *upper) / F::lit(2.0),
                scale: (*upper - *lower) / F::lit(2.0),
                coefficients: cast(legendre_coefficients(p)),
            }),
            Distribution::Empirical { sample } => Self::from_sample(sample, p as u32),
        }
    }

    pub fn from_sample(sample: &[F], p: u32) -> Result<Self, BasisError> {
        let g = GroupBasis::fit(&[("x", sample)], p)?;
        if g.len() != p as usize + 1 {
            return Err(BasisError::InsufficientData {
                what: "empirical law".into(),
                needed: p as usize + 1,
                got: g.len(),
            });
        }
        let coefficients = g
            .functions
            .into_iter()
            .map(|f| f.coefficients)
            .collect();
        Ok(UnivariateBasis {
            family: Family::Empirical,
            shift: g.shift[0],
            scale: g.scale[0],
            coefficients,
        })
    }

    pub fn degree(&self) -> u32 {
        self.coefficients.len() as u32 - 1
    }

    /// Writes `phi_0(x)..phi_p(x)` into `out`.
    pub fn eval_into(&self, x: F, out: &mut [F]) {
        let z = (x - self.shift) / self.scale;
        for (o, c) in out.iter_mut().zip(&self.coefficients) {
            *o = c.iter().rev().fold(F::zero(), |acc, &a| acc * z + a);
        }
    }

    pub fn eval(&self, k: usize, x: F) -> F {
        let z = (x - self.shift) / self.scale;
        self.coefficients[k]
            .iter()
            .rev()
            .fold(F::zero(), |acc, &a| acc * z + a)
    }

    /// Coefficients of `phi_k` in powers of the raw variable `x`.
    pub fn raw_coefficients(&self, k: usize) -> Vec<F> {
        // Expand sum_i c_i ((x - s)/h)^i with the binomial theorem.
        let c = &self.coefficients[k];
        let mut out = vec![F::zero(); c.len()];
        for (i, &ci) in c.iter().enumerate() {
            let hi = self.scale.powi(i as i32);
            let mut binom = 1.0f64;
            for j in 0..=i {
                let term = F::lit(binom) * (-self.shift).powi((i - j) as i32) / hi;
                out[j] += ci * term;
                binom = binom * (i - j) as f64 / (j + 1) as f64;
            }
        }
        out
    }
}
