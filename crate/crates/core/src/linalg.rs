//! Dense Hermitian eigenvalue helpers.
//!
//! Operators in this crate are often sparse in a structured way (sector
//! block-diagonal states, partial transposes that only couple index pairs).
//! [`hermitian_eigenvalues`] first splits the matrix into the connected
//! components of its exact nonzero pattern, which is a permutation similarity
//! and leaves the spectrum unchanged, then solves each block densely.

use crate::par::*;
use crate::{CMatrix, Error, Result, C64};

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in j..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub(crate) fn check_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "{what} is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so block order is stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Index sets of the connected components of the nonzero pattern, each
/// sorted, ordered by smallest member.
pub fn nonzero_blocks(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut sets = DisjointSets::new(n);
    for j in 0..n {
        for i in (j + 1)..n {
            if m[(i, j)] != C64::new(0.0, 0.0) || m[(j, i)] != C64::new(0.0, 0.0) {
                sets.union(i, j);
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = sets.find(i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

fn block_eigenvalues(m: &CMatrix, idx: &[usize]) -> Result<Vec<f64>> {
    match idx.len() {
        1 => Ok(vec![m[(idx[0], idx[0])].re]),
        k => {
            let sym = faer::Mat::<C64>::from_fn(k, k, |r, c| {
                let a = m[(idx[r], idx[c])];
                let b = m[(idx[c], idx[r])].conj();
                (a + b) * 0.5
            });
            sym.self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))
        }
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
///
/// The input must be Hermitian within `herm_tol`; it is symmetrized before
/// solving so the returned spectrum is real.
pub fn hermitian_eigenvalues(m: &CMatrix, herm_tol: f64) -> Result<Vec<f64>> {
    check_square(m, "operator")?;
    let dev = hermitian_deviation(m);
    if dev > herm_tol {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian: deviation {dev:e} > {herm_tol:e}"
        )));
    }
    let blocks = nonzero_blocks(m);
    let parts: Vec<Result<Vec<f64>>> = blocks
        .into_par_iter()
        .map(|idx| block_eigenvalues(m, &idx))
        .collect();
    let mut out = Vec::with_capacity(m.nrows());
    for p in parts {
        out.extend(p?);
    }
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix, herm_tol: f64) -> Result<f64> {
    Ok(hermitian_eigenvalues(m, herm_tol)?
        .iter()
        .map(|v| v.abs())
        .sum())
}
