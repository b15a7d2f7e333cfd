//! Data-driven orthonormalisation of monomials (modified Gram-Schmidt, two passes).

use crate::basis::multi_index::{graded_lex, MultiIndex};
use crate::basis::BasisError;
use crate::scalar::Real;

/// Monomials whose residual norm falls below this fraction of their original norm are dropped.
pub const DROP_TOLERANCE: f64 = 1e-10;

/// One orthonormal function, expressed as coefficients over the leading monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFunction<F> {
    pub degree: u32,
    pub coefficients: Vec<F>,
}

/// Orthonormal polynomials in a set of (possibly dependent) variables, built from data.
///
/// Variables are standardised before the monomials are formed. Variables with
/// no spread are kept in `vars` but never appear in a monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBasis<F> {
    pub vars: Vec<String>,
    pub shift: Vec<F>,
    pub scale: Vec<F>,
    pub degenerate: Vec<String>,
    pub monomials: Vec<MultiIndex>,
    pub functions: Vec<GroupFunction<F>>,
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum::<F>() / F::from_usize_lossy(a.len())
}

impl<F: Real> GroupBasis<F> {
    /// Builds the basis of total degree `p` from the given data columns.
    pub fn fit(vars: &[(&str, &[F])], p: u32) -> Result<Self, BasisError> {
        let m = vars.first().map(|v| v.1.len()).unwrap_or(0);
        if m == 0 {
            return Err(BasisError::InsufficientData {
                what: vars.iter().map(|v| v.0).collect::<Vec<_>>().join(","),
                needed: 1,
                got: 0,
            });
        }
        let n = vars.len();
        let mut shift = Vec::with_capacity(n);
        let mut scale = Vec::with_capacity(n);
        let mut degenerate = Vec::new();
        let mut active = Vec::new();
        for (j, (name, col)) in vars.iter().enumerate() {
            let mean = col.iter().copied().sum::<F>() / F::from_usize_lossy(m);
            let sd = (col.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>()
                / F::from_usize_lossy(m))
            .sqrt();
            shift.push(mean);
            if sd > F::epsilon() * F::lit(16.0) * mean.abs().max(F::one()) {
                scale.push(sd);
                active.push(j);
            } else {
                scale.push(F::one());
                degenerate.push(name.to_string());
            }
        }

        let monomials: Vec<MultiIndex> = graded_lex(active.len(), p)
            .into_iter()
            .map(|a| {
                let mut full = vec![0; n];
                for (k, &j) in active.iter().enumerate() {
                    full[j] = a.0[k];
                }
                MultiIndex(full)
            })
            .collect();

        let z: Vec<Vec<F>> = (0..n)
            .map(|j| vars[j].1.iter().map(|&x| (x - shift[j]) / scale[j]).collect())
            .collect();

        let mut q_values: Vec<Vec<F>> = Vec::new();
        let mut functions: Vec<GroupFunction<F>> = Vec::new();
        for (k, mono) in monomials.iter().enumerate() {
            let col = monomial_column(&z, mono, m);
            let pre = dot(&col, &col).sqrt();
            let mut v = col;
            let mut coef = vec![F::zero(); k + 1];
            coef[k] = F::one();
            for _pass in 0..2 {
                for (q, f) in q_values.iter().zip(&functions) {
                    let r = dot(q, &v);
                    for (vi, &qi) in v.iter_mut().zip(q) {
                        *vi -= r * qi;
                    }
                    for (c, &fc) in coef.iter_mut().zip(&f.coefficients) {
                        *c -= r * fc;
                    }
                }
            }
            let norm = dot(&v, &v).sqrt();
            if !(pre > F::zero()) || !(norm >= F::lit(DROP_TOLERANCE) * pre) {
                continue;
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            for c in coef.iter_mut() {
                *c /= norm;
            }
            functions.push(GroupFunction {
                degree: mono.total(),
                coefficients: coef,
            });
            q_values.push(v);
        }
        if functions.len() <= 1 && p > 0 {
            return Err(BasisError::AllMonomialsDegenerate(
                vars.iter().map(|v| v.0).collect::<Vec<_>>().join(","),
            ));
        }
        Ok(GroupBasis {
            vars: vars.iter().map(|v| v.0.to_string()).collect(),
            shift,
            scale,
            degenerate,
            monomials,
            functions,
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Evaluates every function at every row; returns row-major `rows x len` values.
    pub fn evaluate(&self, cols: &[&[F]]) -> Vec<F> {
        let m = cols.first().map(|c| c.len()).unwrap_or(0);
        let z: Vec<Vec<F>> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| c.iter().map(|&x| (x - self.shift[j]) / self.scale[j]).collect())
            .collect();
        let width = self
            .functions
            .iter()
            .map(|f| f.coefficients.len())
            .max()
            .unwrap_or(0);
        let mono: Vec<Vec<F>> = self.monomials[..width]
            .iter()
            .map(|a| monomial_column(&z, a, m))
            .collect();
        let mut out = vec![F::zero(); m * self.functions.len()];
        for (k, f) in self.functions.iter().enumerate() {
            for (c, col) in f.coefficients.iter().zip(&mono) {
                if *c == F::zero() {
                    continue;
                }
                for r in 0..m {
                    out[r * self.functions.len() + k] += *c * col[r];
                }
            }
        }
        out
    }
}

fn monomial_column<F: Real>(z: &[Vec<F>], a: &MultiIndex, m: usize) -> Vec<F> {
    let mut col = vec![F::one(); m];
    for (j, &e) in a.0.iter().enumerate() {
        if e == 0 {
            continue;
        }
        for (c, &x) in col.iter_mut().zip(&z[j]) {
            *c *= x.powi(e as i32);
        }
    }
    col
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn orthonormal_on_fitting_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 2000;
        let a: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|&x| 0.7 * x + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let g = GroupBasis::fit(&[("a", &a), ("b", &b)], 3).unwrap();
        assert_eq!(g.len(), 10);
        let vals = g.evaluate(&[&a, &b]);
        let k = g.len();
        for i in 0..k {
            for j in 0..k {
                let ip: f64 = (0..m).map(|r| vals[r * k + i] * vals[r * k + j]).sum::<f64>() / m as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8, "({i},{j}) = {ip}");
            }
        }
        assert!((vals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_monomials_are_dropped() {
        let a: Vec<f64> = (0..50).map(|i| i as f64 / 7.0).collect();
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        let g = GroupBasis::fit(&[("a", &a), ("b", &b)], 2).unwrap();
        // b is an affine copy of a, so only 1, a, a^2 survive.
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn constant_variable_is_degenerate() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let c = vec![4.0; 30];
        let g = GroupBasis::fit(&[("a", &a), ("c", &c)], 2).unwrap();
        assert_eq!(g.degenerate, vec!["c".to_string()]);
        assert_eq!(g.len(), 3);
    }
}
