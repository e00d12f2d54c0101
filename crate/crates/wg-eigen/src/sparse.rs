//! Thin helpers around the CSC matrices used for the assembled forms.

use std::io::{self, Write};

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

/// Builds an `n x m` CSC matrix from (row, col, value) triplets; duplicate
/// positions are summed.
pub(crate) fn csc_from_triplets(
    n: usize,
    m: usize,
    triplets: &[(usize, usize, f64)],
) -> SparseColMat<usize, f64> {
    let entries: Vec<Triplet<usize, usize, f64>> = triplets
        .iter()
        .map(|&(i, j, v)| Triplet::new(i, j, v))
        .collect();
    SparseColMat::try_new_from_triplets(n, m, &entries).expect("triplet indices in range")
}

/// `y = A x` for CSC `A`.
pub(crate) fn spmv(a: &SparseColMat<usize, f64>, x: &DVector<f64>) -> DVector<f64> {
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    let mut y = DVector::zeros(a.nrows());
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj != 0.0 {
            for p in col_ptr[j]..col_ptr[j + 1] {
                y[row_idx[p]] += val[p] * xj;
            }
        }
    }
    y
}

/// `x^T A x`.
pub(crate) fn quad_form(a: &SparseColMat<usize, f64>, x: &DVector<f64>) -> f64 {
    spmv(a, x).dot(x)
}

pub(crate) fn dense_from_sparse(a: &SparseColMat<usize, f64>) -> DMatrix<f64> {
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            out[(row_idx[p], j)] += val[p];
        }
    }
    out
}

/// Extracts the submatrix with the given row/column ranges.
pub(crate) fn extract_block(
    a: &SparseColMat<usize, f64>,
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> SparseColMat<usize, f64> {
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    let mut triplets = Vec::new();
    for j in cols.clone() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            let i = row_idx[p];
            if rows.contains(&i) {
                triplets.push((i - rows.start, j - cols.start, val[p]));
            }
        }
    }
    csc_from_triplets(rows.len(), cols.len(), &triplets)
}

/// Frobenius-style max-norm of `A - A^T`; zero for symmetrically assembled
/// matrices.
#[cfg(test)]
pub(crate) fn asymmetry(a: &SparseColMat<usize, f64>) -> f64 {
    let dense = dense_from_sparse(a);
    let mut worst = 0.0f64;
    for i in 0..dense.nrows() {
        for j in 0..i {
            worst = worst.max((dense[(i, j)] - dense[(j, i)]).abs());
        }
    }
    worst
}

/// Writes a symmetric matrix in Matrix Market coordinate format (lower
/// triangle, 1-based indices).
pub fn write_matrix_market_symmetric<W: Write>(
    a: &SparseColMat<usize, f64>,
    out: &mut W,
) -> io::Result<()> {
    let sym = a.symbolic();
    let col_ptr = sym.col_ptr();
    let row_idx = sym.row_idx();
    let val = a.val();
    let mut entries = Vec::new();
    for j in 0..a.ncols() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            let i = row_idx[p];
            if i >= j {
                entries.push((i, j, val[p]));
            }
        }
    }
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
