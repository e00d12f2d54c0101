//! Sparse SPD linear solves and the generalized eigensolve `A u = lambda B u`
//! with the semi-definite mass `B`, plus a dense oracle for small pencils.
//!
//! The mass matrix vanishes on the edge block, so the pencil is reduced by
//! static condensation: with `A = [A00 A0b; Ab0 Abb]` and `B = diag(M0, 0)`,
//! the finite eigenvalues of `(A, B)` are exactly the eigenvalues of
//! `(S, M0)` with the Schur complement `S = A00 - A0b Abb^{-1} Ab0`, and the
//! edge block is recovered as `u_b = -Abb^{-1} Ab0 u_0`. `S` is kept implicit:
//! applying `S^{-1}` amounts to one solve with the full factorized `A`.
//!
//! The eigensolver runs block shift-invert iteration at shift 0 (inverse
//! subspace iteration with full re-orthonormalization in the `M0` inner
//! product and a Rayleigh-Ritz extraction per step), which converges to the
//! smallest finite eigenvalues and handles multiple eigenvalues without any
//! special casing.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::prelude::Reborrow;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::SparseColMat;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::SolverError;
use crate::sparse::{dense_from_sparse, extract_block, spmv};

/// Problems at or below this size may use the dense oracle path.
pub const DENSE_ORACLE_LIMIT: usize = 4096;

/// Iteration cap of the shift-invert eigensolver.
pub const EIGEN_ITERATION_CAP: usize = 500;

/// Relative eigenvalue gap below which eigenvalues are reported as a cluster.
pub const CLUSTER_GAP: f64 = 1e-6;

static INIT: Once = Once::new();

/// Pins the backend to sequential execution so repeated runs are bit-identical.
fn init_deterministic() {
    INIT.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMode {
    /// Static condensation plus block shift-invert iteration.
    CondensedShiftInvert,
    /// Dense conversion of the full pencil; the oracle for small problems.
    DenseOracle,
}

/// Eigenpairs of the pencil, ascending, with the vectors normalized to
/// `u^T B u = 1`.
#[derive(Clone, Debug)]
pub struct PencilEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<DVector<f64>>,
    /// `||A u - lambda B u||_2` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Cluster id per eigenvalue; eigenvalues within a relative gap of
    /// [`CLUSTER_GAP`] share an id.
    pub clusters: Vec<usize>,
}

impl PencilEigen {
    pub fn cluster_of(&self, index: usize) -> Vec<usize> {
        let id = self.clusters[index];
        (0..self.values.len())
            .filter(|&i| self.clusters[i] == id)
            .collect()
    }
}

fn to_faer(v: &DVector<f64>) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn from_faer(m: &Mat<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| m[(i, 0)])
}

/// Gershgorin-style estimate of `||A||_2` (max absolute row sum).
pub fn norm_estimate(a: &SparseColMat<usize, f64>) -> f64 {
    let sym = a.symbolic();
    let mut row_sums = vec![0.0f64; a.nrows()];
    for j in 0..a.ncols() {
        for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
            row_sums[sym.row_idx()[p]] += a.val()[p].abs();
        }
    }
    row_sums.into_iter().fold(0.0, f64::max)
}

/// A reusable sparse Cholesky factorization of an SPD matrix.
pub struct SpdSolver {
    a: SparseColMat<usize, f64>,
    llt: Llt<usize, f64>,
}

impl SpdSolver {
    pub fn new(a: &SparseColMat<usize, f64>) -> Result<Self, SolverError> {
        init_deterministic();
        let symbolic = SymbolicLlt::try_new(a.symbolic(), Side::Lower)
            .map_err(|_| SolverError::FactorizationFailed)?;
        let llt = Llt::try_new_with_symbolic(symbolic, a.rb(), Side::Lower)
            .map_err(|_| SolverError::FactorizationFailed)?;
        Ok(Self {
            a: a.to_owned(),
            llt,
        })
    }

    pub fn matrix(&self) -> &SparseColMat<usize, f64> {
        &self.a
    }

    /// One factorized solve, no refinement.
    pub fn solve_once(&self, rhs: &DVector<f64>) -> DVector<f64> {
        from_faer(&self.llt.solve(to_faer(rhs)))
    }

    /// Solve with iterative refinement until `||A x - rhs|| <= tol ||rhs||`.
    pub fn solve(&self, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>, SolverError> {
        let rhs_norm = rhs.norm();
        if rhs_norm == 0.0 {
            return Ok(DVector::zeros(rhs.len()));
        }
        let mut x = self.solve_once(rhs);
        for _ in 0..4 {
            let residual = rhs - spmv(&self.a, &x);
            if residual.norm() <= tol * rhs_norm {
                return Ok(x);
            }
            x += self.solve_once(&residual);
        }
        let achieved = (rhs - spmv(&self.a, &x)).norm() / rhs_norm;
        if achieved <= tol {
            Ok(x)
        } else {
            Err(SolverError::LinearSolveStalled { achieved, tol })
        }
    }
}

/// Solves `A x = rhs` for SPD `A` to the requested relative residual.
pub fn linear_solve(
    a: &SparseColMat<usize, f64>,
    rhs: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, SolverError> {
    SpdSolver::new(a)?.solve(rhs, tol)
}

/// The statically condensed pencil `(S, M0)` with its recovery map.
pub struct CondensedPencil {
    n: usize,
    n0: usize,
    a: SparseColMat<usize, f64>,
    b: SparseColMat<usize, f64>,
    m0: SparseColMat<usize, f64>,
    full: SpdSolver,
    /// Factorization of `Abb` and the block `Ab0`, absent when there are no
    /// edge unknowns.
    edge: Option<(SpdSolver, SparseColMat<usize, f64>)>,
}

impl CondensedPencil {
    /// `n0` is the number of interior unknowns; they must come first in the
    /// global numbering and carry all of `B`'s nonzeros.
    pub fn new(
        a: &SparseColMat<usize, f64>,
        b: &SparseColMat<usize, f64>,
        n0: usize,
    ) -> Result<Self, SolverError> {
        init_deterministic();
        let n = a.nrows();
        let full = SpdSolver::new(a)?;
        let m0 = extract_block(b, 0..n0, 0..n0);
        let edge = if n > n0 {
            let abb = extract_block(a, n0..n, n0..n);
            let ab0 = extract_block(a, n0..n, 0..n0);
            Some((SpdSolver::new(&abb)?, ab0))
        } else {
            None
        };
        Ok(Self {
            n,
            n0,
            a: a.to_owned(),
            b: b.to_owned(),
            m0,
            full,
            edge,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.n0
    }

    pub fn m0(&self) -> &SparseColMat<usize, f64> {
        &self.m0
    }

    /// `S^{-1} r` through the factorized full matrix: the interior block of
    /// `A^{-1} [r; 0]`.
    pub fn apply_s_inverse(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut padded = DVector::zeros(self.n);
        padded.rows_mut(0, self.n0).copy_from(r);
        let solution = self.full.solve_once(&padded);
        solution.rows(0, self.n0).clone_owned()
    }

    /// Recovers the edge block `u_b = -Abb^{-1} Ab0 u_0`.
    pub fn recover_edge(&self, u0: &DVector<f64>) -> DVector<f64> {
        match &self.edge {
            None => DVector::zeros(0),
            Some((abb, ab0)) => -abb.solve_once(&spmv(ab0, u0)),
        }
    }

    /// Full-length eigenvector from an interior block.
    pub fn extend(&self, u0: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.n);
        full.rows_mut(0, self.n0).copy_from(u0);
        let ub = self.recover_edge(u0);
        full.rows_mut(self.n0, self.n - self.n0).copy_from(&ub);
        full
    }

    /// Materializes `S = A00 - A0b Abb^{-1} Ab0` densely; intended for small
    /// problems (the Schur complement is structurally dense).
    pub fn dense_s(&self) -> Result<DMatrix<f64>, SolverError> {
        if self.n0 > DENSE_ORACLE_LIMIT {
            return Err(SolverError::DenseTooLarge {
                dofs: self.n0,
                limit: DENSE_ORACLE_LIMIT,
            });
        }
        let a00 = dense_from_sparse(&extract_block(&self.a, 0..self.n0, 0..self.n0));
        match &self.edge {
            None => Ok(a00),
            Some((abb, ab0)) => {
                let ab0_dense = dense_from_sparse(ab0);
                let mut correction = DMatrix::zeros(self.n0, self.n0);
                for j in 0..self.n0 {
                    let col = abb.solve_once(&ab0_dense.column(j).clone_owned());
                    let contrib = ab0_dense.tr_mul(&col);
                    correction.column_mut(j).copy_from(&contrib);
                }
                Ok(a00 - correction)
            }
        }
    }
}

/// `x^T M y` helper for the `M0` inner product.
fn m_dot(m0: &SparseColMat<usize, f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    spmv(m0, y).dot(x)
}

/// M-orthonormalizes the columns of `x` in place by Cholesky QR, run twice.
fn m_orthonormalize(
    m0: &SparseColMat<usize, f64>,
    x: &mut DMatrix<f64>,
) -> Result<(), SolverError> {
    for _ in 0..2 {
        let p = x.ncols();
        let mut mx = DMatrix::zeros(x.nrows(), p);
        for j in 0..p {
            mx.set_column(j, &spmv(m0, &x.column(j).clone_owned()));
        }
        let gram = x.tr_mul(&mx);
        let chol = gram.cholesky().ok_or(SolverError::FactorizationFailed)?;
        // X <- X L^{-T}
        let lt_inv = chol
            .l()
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or(SolverError::FactorizationFailed)?;
        *x *= lt_inv;
    }
    Ok(())
}

/// Sorted Ritz decomposition of a small symmetric matrix, descending.
fn ritz_descending(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = 0.5 * (h + h.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

fn assign_clusters(values: &[f64]) -> Vec<usize> {
    let mut clusters = Vec::with_capacity(values.len());
    let mut id = 0;
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            let prev = values[i - 1];
            let gap = (v - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if gap > CLUSTER_GAP {
                id += 1;
            }
        }
        clusters.push(id);
    }
    clusters
}

/// Fixes the sign so the largest-magnitude interior coefficient is positive.
fn fix_sign(u: &mut DVector<f64>, n0: usize) {
    let mut best = 0;
    for i in 1..n0 {
        if u[i].abs() > u[best].abs() {
            best = i;
        }
    }
    if u[best] < 0.0 {
        *u *= -1.0;
    }
}

fn pencil_residual(
    a: &SparseColMat<usize, f64>,
    b: &SparseColMat<usize, f64>,
    lambda: f64,
    u: &DVector<f64>,
) -> f64 {
    (spmv(a, u) - lambda * spmv(b, u)).norm()
}

/// The `nev` smallest finite generalized eigenvalues of `(A, B)`, where the
/// leading `n0` unknowns carry the mass.
pub fn eigensolve(
    a: &SparseColMat<usize, f64>,
    b: &SparseColMat<usize, f64>,
    n0: usize,
    nev: usize,
    tol: f64,
    mode: EigenMode,
) -> Result<PencilEigen, SolverError> {
    init_deterministic();
    if nev == 0 {
        return Err(SolverError::ZeroEigenvaluesRequested);
    }
    if nev > n0 {
        return Err(SolverError::TooManyEigenvalues {
            requested: nev,
            available: n0,
        });
    }
    match mode {
        EigenMode::DenseOracle => dense_pencil_eigensolve(a, b, n0, nev),
        EigenMode::CondensedShiftInvert => {
            let pencil = CondensedPencil::new(a, b, n0)?;
            shift_invert_eigensolve(&pencil, nev, tol)
        }
    }
}

/// Block shift-invert iteration on the condensed pencil.
pub fn shift_invert_eigensolve(
    pencil: &CondensedPencil,
    nev: usize,
    tol: f64,
) -> Result<PencilEigen, SolverError> {
    let n0 = pencil.n0;
    if nev > n0 {
        return Err(SolverError::TooManyEigenvalues {
            requested: nev,
            available: n0,
        });
    }
    let block = (2 * nev).max(nev + 4).min(n0);
    let mut rng = StdRng::seed_from_u64(0x00C0_FFEE);
    let mut x = DMatrix::from_fn(n0, block, |_, _| rng.random::<f64>() - 0.5);
    m_orthonormalize(&pencil.m0, &mut x)?;

    let a_norm = norm_estimate(&pencil.a);
    let mut inner_tol = tol.min(1e-6);
    let mut iterations = 0;

    loop {
        iterations += 1;
        // Y = S^{-1} M X, one solve per block column.
        let mut mx = DMatrix::zeros(n0, block);
        for j in 0..block {
            mx.set_column(j, &spmv(&pencil.m0, &x.column(j).clone_owned()));
        }
        let mut y = DMatrix::zeros(n0, block);
        for j in 0..block {
            y.set_column(j, &pencil.apply_s_inverse(&mx.column(j).clone_owned()));
        }

        // Rayleigh-Ritz for Op = S^{-1} M in the M inner product:
        // H = X^T M S^{-1} M X = (M X)^T Y.
        let h = mx.tr_mul(&y);
        let (theta, w) = ritz_descending(&h);

        // Residual estimates ||Op u - theta u||_M per wanted Ritz pair. The
        // residual vectors are formed explicitly; computing their norms from
        // Gram matrices would cancel catastrophically near convergence.
        let mut converged = true;
        for i in 0..nev {
            if theta[i] <= 0.0 {
                converged = false;
                break;
            }
            let wi = w.column(i);
            let residual = &y * wi - theta[i] * (&x * wi);
            let delta = spmv(&pencil.m0, &residual).dot(&residual).max(0.0).sqrt();
            if delta > inner_tol * theta[i] {
                converged = false;
                break;
            }
        }

        if converged || iterations >= EIGEN_ITERATION_CAP {
            // Assemble candidate eigenpairs and verify against the pencil.
            let mut values = Vec::with_capacity(nev);
            let mut vectors = Vec::with_capacity(nev);
            let mut residuals = Vec::with_capacity(nev);
            let mut worst: f64 = 0.0;
            for i in 0..nev {
                let u0 = &x * w.column(i);
                let lambda = 1.0 / theta[i];
                let mut full = pencil.extend(&u0.clone_owned());
                // Normalize in the b-form and fix the sign.
                let scale = m_dot(&pencil.m0, &u0, &u0).sqrt();
                full /= scale;
                fix_sign(&mut full, n0);
                let res = pencil_residual(&pencil.a, &pencil.b, lambda, &full);
                worst = worst.max(res);
                values.push(lambda);
                vectors.push(full);
                residuals.push(res);
            }
            if worst <= tol * a_norm {
                // Ascending eigenvalue order = descending theta order.
                let clusters = assign_clusters(&values);
                return Ok(PencilEigen {
                    values,
                    vectors,
                    residuals,
                    iterations,
                    clusters,
                });
            }
            if iterations >= EIGEN_ITERATION_CAP {
                return Err(SolverError::NoConvergence {
                    iterations,
                    worst_residual: worst,
                });
            }
            inner_tol *= 0.1;
        }

        x = y;
        m_orthonormalize(&pencil.m0, &mut x)?;
    }
}

/// Dense route through the full pencil: factor `A = L L^T`, transform to the
/// standard symmetric problem `L^{-1} B L^{-T} w = mu w`, and invert the
/// finite part of the spectrum (`lambda = 1/mu`; `mu = 0` corresponds to the
/// infinite eigenvalues introduced by the zero mass block).
pub fn dense_pencil_eigensolve(
    a: &SparseColMat<usize, f64>,
    b: &SparseColMat<usize, f64>,
    n0: usize,
    nev: usize,
) -> Result<PencilEigen, SolverError> {
    let n = a.nrows();
    if n > DENSE_ORACLE_LIMIT {
        return Err(SolverError::DenseTooLarge {
            dofs: n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let a_dense = dense_from_sparse(a);
    let b_dense = dense_from_sparse(b);
    let chol = a_dense
        .clone()
        .cholesky()
        .ok_or(SolverError::FactorizationFailed)?;
    let l = chol.l();
    // W = L^{-1} B L^{-T}
    let linv_b = l
        .solve_lower_triangular(&b_dense)
        .ok_or(SolverError::FactorizationFailed)?;
    let w = l
        .solve_lower_triangular(&linv_b.transpose())
        .ok_or(SolverError::FactorizationFailed)?
        .transpose();
    let w = 0.5 * (&w + w.transpose());
    let eig = nalgebra::SymmetricEigen::new(w);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut values = Vec::with_capacity(nev);
    let mut vectors = Vec::with_capacity(nev);
    let mut residuals = Vec::with_capacity(nev);
    for idx in 0..nev {
        let mu = eig.eigenvalues[order[idx]];
        if mu <= 0.0 {
            return Err(SolverError::TooManyEigenvalues {
                requested: nev,
                available: idx,
            });
        }
        let lambda = 1.0 / mu;
        let z = eig.eigenvectors.column(order[idx]).clone_owned();
        // u = L^{-T} z
        let mut u = l
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(SolverError::FactorizationFailed)?;
        let b_norm = (spmv(b, &u)).dot(&u).sqrt();
        u /= b_norm;
        fix_sign(&mut u, n0);
        residuals.push(pencil_residual(a, b, lambda, &u));
        values.push(lambda);
        vectors.push(u);
    }
    let clusters = assign_clusters(&values);
    Ok(PencilEigen {
        values,
        vectors,
        residuals,
        iterations: 1,
        clusters,
    })
}
