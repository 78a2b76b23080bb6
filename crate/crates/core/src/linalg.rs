//! Thin wrappers over faer's sparse factorizations.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};

/// Square sparse matrix assembled from (row, col, value) entries. Duplicate
/// positions are summed.
pub fn assemble(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<SparseColMat<usize, f64>, String> {
    entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut merged: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(entries.len());
    for (r, c, v) in entries {
        match merged.last_mut() {
            Some(t) if t.row == r && t.col == c => t.val += v,
            _ => merged.push(Triplet::new(r, c, v)),
        }
    }
    SparseColMat::try_new_from_triplets(n, n, &merged).map_err(|e| format!("{e:?}"))
}

/// Solves `A x = b` by sparse LU with partial pivoting.
pub fn lu_solve(n: usize, entries: Vec<(usize, usize, f64)>, b: &[f64]) -> Result<Vec<f64>, String> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let a = assemble(n, entries)?;
    let lu = a.sp_lu().map_err(|e| format!("{e:?}"))?;
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
    let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err("singular system".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_system() {
        // [[2,1],[1,3]] x = [3,5]
        let x = lu_solve(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn duplicates_are_summed() {
        let x = lu_solve(1, vec![(0, 0, 1.0), (0, 0, 1.0)], &[4.0]).unwrap();
        assert_eq!(x, vec![2.0]);
    }
}
