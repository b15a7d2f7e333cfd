//! Rank-revealing least squares.

use ndarray::Array2;

use crate::scalar::Real;

/// Householder reflector `I - beta v v^T` acting on rows `k..` of a column.
struct Reflector<F> {
    k: usize,
    v: Vec<F>,
    beta: F,
}

impl<F: Real> Reflector<F> {
    /// Builds the reflector that maps `x` onto a multiple of `e_0`. Returns it with the new leading value.
    fn new(k: usize, x: &[F]) -> (Self, F) {
        let norm = x.iter().map(|&a| a * a).sum::<F>().sqrt();
        if norm == F::zero() {
            return (
                Reflector {
                    k,
                    v: vec![F::zero(); x.len()],
                    beta: F::zero(),
                },
                F::zero(),
            );
        }
        let alpha = if x[0] > F::zero() { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv = v.iter().map(|&a| a * a).sum::<F>();
        let beta = if vv > F::zero() { F::lit(2.0) / vv } else { F::zero() };
        (Reflector { k, v, beta }, alpha)
    }

    fn apply(&self, col: &mut [F]) {
        if self.beta == F::zero() {
            return;
        }
        let tail = &mut col[self.k..];
        let s = self.beta * self.v.iter().zip(tail.iter()).map(|(&a, &b)| a * b).sum::<F>();
        for (t, &a) in tail.iter_mut().zip(&self.v) {
            *t -= s * a;
        }
    }
}

/// Column-pivoted Householder QR of a tall or wide matrix.
pub struct PivotedQr<F> {
    /// Columns of `R` (upper part), in pivoted order.
    r_cols: Vec<Vec<F>>,
    reflectors: Vec<Reflector<F>>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

impl<F: Real> PivotedQr<F> {
    /// Factorises `a`; pivots whose remaining column norm is at most `rel_tol` times the
    /// first pivot norm are treated as zero.
    pub fn new(a: &Array2<F>, rel_tol: F) -> Self {
        let (m, n) = a.dim();
        let mut cols: Vec<Vec<F>> = (0..n).map(|j| a.column(j).to_vec()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::new();
        let steps = m.min(n);
        let mut first = F::zero();
        let mut rank = 0;
        for k in 0..steps {
            let (best, best_norm) = (k..n)
                .map(|j| (j, cols[j][k..].iter().map(|&x| x * x).sum::<F>().sqrt()))
                .fold((k, F::neg_infinity()), |acc, c| if c.1 > acc.1 { c } else { acc });
            if k == 0 {
                first = best_norm;
            }
            if !(best_norm > rel_tol * first) || best_norm == F::zero() {
                break;
            }
            cols.swap(k, best);
            perm.swap(k, best);
            let (h, alpha) = Reflector::new(k, &cols[k][k..]);
            cols[k][k] = alpha;
            for x in cols[k][k + 1..].iter_mut() {
                *x = F::zero();
            }
            for col in cols[k + 1..].iter_mut() {
                h.apply(col);
            }
            reflectors.push(h);
            rank += 1;
        }
        PivotedQr {
            r_cols: cols,
            reflectors,
            perm,
            rank,
        }
    }

    /// Minimum-norm least-squares solution of `a x = b` restricted to the numerical rank.
    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.perm.len();
        let r = self.rank;
        let mut c = b.to_vec();
        for h in &self.reflectors {
            h.apply(&mut c);
        }
        let mut y = vec![F::zero(); n];
        if r == 0 {
            return y;
        }
        if r == n {
            back_substitute(&self.r_cols, &c[..r], &mut y);
        } else {
            // [R11 R12] y = c has a minimum-norm solution through a QR of its transpose.
            let wt: Array2<F> = Array2::from_shape_fn((n, r), |(j, i)| self.r_cols[j][i]);
            let inner = PivotedQr::new_unpivoted(&wt);
            // W = R2^T Q2^T with W^T = Q2 R2, so y = Q2 R2^{-T} c.
            let mut z = vec![F::zero(); n];
            for i in 0..r {
                let mut s = c[i];
                for k in 0..i {
                    s -= inner.r_cols[i][k] * z[k];
                }
                z[i] = s / inner.r_cols[i][i];
            }
            for h in inner.reflectors.iter().rev() {
                h.apply(&mut z);
            }
            y = z;
        }
        let mut x = vec![F::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    fn new_unpivoted(a: &Array2<F>) -> Self {
        let (m, n) = a.dim();
        let mut cols: Vec<Vec<F>> = (0..n).map(|j| a.column(j).to_vec()).collect();
        let mut reflectors = Vec::new();
        for k in 0..m.min(n) {
            let (h, alpha) = Reflector::new(k, &cols[k][k..]);
            cols[k][k] = alpha;
            for col in cols[k + 1..].iter_mut() {
                h.apply(col);
            }
            reflectors.push(h);
        }
        PivotedQr {
            r_cols: cols,
            reflectors,
            perm: (0..n).collect(),
            rank: m.min(n),
        }
    }
}

fn back_substitute<F: Real>(r_cols: &[Vec<F>], c: &[F], y: &mut [F]) {
    let r = c.len();
    for i in (0..r).rev() {
        let mut s = c[i];
        for j in i + 1..r {
            s -= r_cols[j][i] * y[j];
        }
        y[i] = s / r_cols[i][i];
    }
}

/// Least-squares solution of minimum norm; returns it with the numerical rank.
pub fn lstsq_min_norm<F: Real>(a: &Array2<F>, b: &[F], rel_tol: F) -> (Vec<F>, usize) {
    let qr = PivotedQr::new(a, rel_tol);
    (qr.solve(b), qr.rank)
}
