use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Per-slot polynomial orders of one basis function.
///
/// A slot is either one variable (order = univariate degree) or one dependent
/// group (order = index of the group's orthonormal function).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn orders(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Slots with a non-zero order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(j, _)| j)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Graded lexicographic comparison: total order first, then the larger leading order first.
pub fn graded_lex_cmp(a: &[u32], b: &[u32], degree_a: u32, degree_b: u32) -> Ordering {
    degree_a.cmp(&degree_b).then_with(|| b.cmp(a))
}

/// All multi-indices over `n` slots with total order at most `p`, in graded lexicographic order.
pub fn graded_lex(n: usize, p: u32) -> Vec<MultiIndex> {
    fn fill(slot: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if slot + 1 == cur.len() {
            cur[slot] = left;
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for a in (0..=left).rev() {
            cur[slot] = a;
            fill(slot + 1, left - a, cur, out);
        }
    }
    if n == 0 {
        return vec![MultiIndex(Vec::new())];
    }
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    for d in 0..=p {
        fill(0, d, &mut cur, &mut out);
    }
    out
}
