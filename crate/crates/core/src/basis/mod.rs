//! Orthonormal polynomial bases: univariate families, dependent-group bases and their tensor products.

pub mod gram_schmidt;
pub mod multi_index;
pub mod univariate;

use std::sync::Arc;

use ndarray::Array2;
use thiserror::Error;

use crate::dataset::{DataError, Dataset};
use crate::distribution::Distribution;
use crate::scalar::Real;

pub use gram_schmidt::{GroupBasis, GroupFunction};
pub use multi_index::{graded_lex, MultiIndex};
pub use univariate::{Family, UnivariateBasis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("distribution has zero variance")]
    DegenerateDistribution,
    #[error("{what}: need at least {needed} observations or functions, got {got}")]
    InsufficientData {
        what: String,
        needed: usize,
        got: usize,
    },
    #[error("every non-constant monomial of group [{0}] is numerically dependent")]
    AllMonomialsDegenerate(String),
    #[error("data has no column `{0}`")]
    MissingColumn(String),
    #[error("basis size C({n}+{p},{n}) overflows")]
    Overflow { n: usize, p: u32 },
    #[error("invalid term: {0}")]
    InvalidTerm(String),
}

impl From<DataError> for BasisError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::MissingColumn(c) => BasisError::MissingColumn(c),
            other => BasisError::InvalidTerm(other.to_string()),
        }
    }
}

/// One slot of a tensor basis.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor<F> {
    /// A single independent variable with a known law.
    Univariate { var: String, basis: UnivariateBasis<F> },
    /// A set of possibly dependent variables orthonormalised from data.
    Group(GroupBasis<F>),
}

impl<F: Real> Factor<F> {
    pub fn univariate(var: &str, dist: &Distribution<F>, p: u32) -> Result<Self, BasisError> {
        Ok(Factor::Univariate {
            var: var.to_string(),
            basis: UnivariateBasis::for_distribution(dist, p)?,
        })
    }

    pub fn variables(&self) -> Vec<&str> {
        match self {
            Factor::Univariate { var, .. } => vec![var.as_str()],
            Factor::Group(g) => g.vars.iter().map(String::as_str).collect(),
        }
    }

    /// Number of functions, including the constant.
    pub fn len(&self) -> usize {
        match self {
            Factor::Univariate { basis, .. } => basis.coefficients.len(),
            Factor::Group(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Polynomial degree of function `k`.
    pub fn degree_of(&self, k: usize) -> u32 {
        match self {
            Factor::Univariate { .. } => k as u32,
            Factor::Group(g) => g.functions[k].degree,
        }
    }

    pub fn is_group(&self) -> bool {
        matches!(self, Factor::Group(_))
    }

    /// Row-major `rows x len` values of every function.
    pub fn evaluate(&self, data: &Dataset<F>) -> Result<Vec<F>, BasisError> {
        match self {
            Factor::Univariate { var, basis } => {
                let col = data.column(var)?;
                let w = basis.coefficients.len();
                let mut out = vec![F::zero(); col.len() * w];
                for (r, &x) in col.iter().enumerate() {
                    basis.eval_into(x, &mut out[r * w..(r + 1) * w]);
                }
                Ok(out)
            }
            Factor::Group(g) => {
                let cols = g
                    .vars
                    .iter()
                    .map(|v| data.column(v))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(g.evaluate(&cols))
            }
        }
    }
}

/// Tensor product of factor bases, restricted to an explicit list of terms.
///
/// The first term is always the constant.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis<F> {
    pub factors: Vec<Arc<Factor<F>>>,
    pub terms: Vec<MultiIndex>,
}

impl<F: Real> OrthonormalBasis<F> {
    pub fn with_terms(factors: Vec<Arc<Factor<F>>>, terms: Vec<MultiIndex>) -> Result<Self, BasisError> {
        match terms.first() {
            Some(t) if t.is_constant() => {}
            _ => return Err(BasisError::InvalidTerm("first term must be constant".into())),
        }
        for t in &terms {
            if t.len() != factors.len() {
                return Err(BasisError::InvalidTerm(format!("{t} has wrong length")));
            }
            for (a, f) in t.0.iter().zip(&factors) {
                if *a as usize >= f.len() {
                    return Err(BasisError::InvalidTerm(format!("{t} out of range")));
                }
            }
        }
        Ok(OrthonormalBasis { factors, terms })
    }

    /// Every product whose summed degree is at most `p`, in graded lexicographic order.
    pub fn total_degree(factors: Vec<Arc<Factor<F>>>, p: u32) -> Self {
        fn rec<F: Real>(
            factors: &[Arc<Factor<F>>],
            slot: usize,
            left: u32,
            cur: &mut Vec<u32>,
            out: &mut Vec<(u32, Vec<u32>)>,
        ) {
            if slot == factors.len() {
                out.push((p_used(factors, cur), cur.clone()));
                return;
            }
            for k in 0..factors[slot].len() {
                let d = factors[slot].degree_of(k);
                if d > left {
                    continue;
                }
                cur[slot] = k as u32;
                rec(factors, slot + 1, left - d, cur, out);
            }
            cur[slot] = 0;
        }
        fn p_used<F: Real>(factors: &[Arc<Factor<F>>], cur: &[u32]) -> u32 {
            cur.iter()
                .zip(factors)
                .map(|(&k, f)| f.degree_of(k as usize))
                .sum()
        }
        let mut raw = Vec::new();
        let mut cur = vec![0; factors.len()];
        rec(&factors, 0, p, &mut cur, &mut raw);
        raw.sort_by(|a, b| multi_index::graded_lex_cmp(&a.1, &b.1, a.0, b.0));
        let terms = raw.into_iter().map(|(_, t)| MultiIndex(t)).collect();
        OrthonormalBasis { factors, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_degree(&self, t: usize) -> u32 {
        self.terms[t]
            .0
            .iter()
            .zip(&self.factors)
            .map(|(&k, f)| f.degree_of(k as usize))
            .sum()
    }

    /// Design matrix: one row per observation, one column per term.
    pub fn evaluate(&self, data: &Dataset<F>) -> Result<Array2<F>, BasisError> {
        let m = data.rows();
        let values = self
            .factors
            .iter()
            .map(|f| f.evaluate(data))
            .collect::<Result<Vec<_>, _>>()?;
        let widths: Vec<usize> = self.factors.iter().map(|f| f.len()).collect();
        let mut out = Array2::from_elem((m, self.terms.len()), F::one());
        for (c, term) in self.terms.iter().enumerate() {
            for (j, &k) in term.0.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let (w, vals) = (widths[j], &values[j]);
                for r in 0..m {
                    out[(r, c)] *= vals[r * w + k as usize];
                }
            }
        }
        Ok(out)
    }
}

/// Tensor basis over independent inputs with known laws.
pub fn tensor_basis<F: Real>(
    inputs: &[(String, Distribution<F>)],
    p: u32,
) -> Result<OrthonormalBasis<F>, BasisError> {
    let factors = inputs
        .iter()
        .map(|(name, d)| Factor::univariate(name, d, p).map(Arc::new))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OrthonormalBasis::total_degree(factors, p))
}

/// `C(n + p, n)`, the number of terms of a total-degree basis.
pub fn min_observations(n: usize, p: u32) -> Result<usize, BasisError> {
    let mut acc: u128 = 1;
    for i in 1..=p as u128 {
        acc = acc
            .checked_mul(n as u128 + i)
            .ok_or(BasisError::Overflow { n, p })?
            / i;
    }
    usize::try_from(acc).map_err(|_| BasisError::Overflow { n, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_sizes() {
        assert_eq!(min_observations(11, 3).unwrap(), 364);
        assert_eq!(min_observations(6, 3).unwrap(), 84);
        assert_eq!(min_observations(9, 4).unwrap(), 715);
        assert_eq!(min_observations(0, 5).unwrap(), 1);
        assert!(matches!(min_observations(usize::MAX / 2, 40), Err(BasisError::Overflow { .. })));
    }

    #[test]
    fn tensor_basis_is_graded_and_orthonormal() {
        let inputs = vec![
            ("a".to_string(), Distribution::normal(1.0, 2.0).unwrap()),
            ("b".to_string(), Distribution::uniform(0.0, 1.0).unwrap()),
        ];
        let b = tensor_basis(&inputs, 3).unwrap();
        assert_eq!(b.len(), min_observations(2, 3).unwrap());
        assert_eq!(b.terms[1], MultiIndex(vec![1, 0]));
        assert_eq!(b.terms[2], MultiIndex(vec![0, 1]));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 200_000;
        let cols: Vec<(String, Vec<f64>)> = inputs
            .iter()
            .map(|(n, d)| (n.clone(), (0..m).map(|_| d.sample(&mut rng)).collect()))
            .collect();
        let data = Dataset::new(cols, Provenance::InMemory).unwrap();
        let x = b.evaluate(&data).unwrap();
        let g = x.t().dot(&x) / m as f64;
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 0.06, "G[{i},{j}] = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn missing_column_reported() {
        let inputs = vec![("a".to_string(), Distribution::normal(0.0, 1.0).unwrap())];
        let b = tensor_basis(&inputs, 2).unwrap();
        let data = Dataset::new(vec![("z".to_string(), vec![1.0])], Provenance::InMemory).unwrap();
        assert_eq!(b.evaluate(&data).unwrap_err(), BasisError::MissingColumn("a".into()));
    }
}
