use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Support pattern of a parameter matrix.
///
/// `s` counts all nonzeros, `rho` is the largest row count, and `support`
/// holds the `(row, col)` pairs of the nonzero entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub s: usize,
    pub rho: usize,
    pub rho_per_row: Vec<usize>,
    pub support: BTreeSet<(usize, usize)>,
}

impl SparsityProfile {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.support.contains(&(row, col))
    }
}

/// Entries with `|A[i,j]| <= zero_tol` count as zero.
pub fn sparsity_of(a: &DMatrix<f64>, zero_tol: f64) -> SparsityProfile {
    let mut support = BTreeSet::new();
    let mut rho_per_row = vec![0usize; a.nrows()];
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            if a[(i, j)].abs() > zero_tol {
                support.insert((i, j));
                rho_per_row[i] += 1;
            }
        }
    }
    SparsityProfile {
        s: support.len(),
        rho: rho_per_row.iter().copied().max().unwrap_or(0),
        rho_per_row,
        support,
    }
}
