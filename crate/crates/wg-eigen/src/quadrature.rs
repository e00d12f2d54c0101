//! Gauss quadrature on the reference triangle and the unit interval.
//!
//! Triangle rules are conical products: Gauss-Jacobi with weight `(1 - u)` in
//! the collapsed direction times Gauss-Legendre in the other, so a rule of
//! exactness `d` needs `(d/2 + 1)^2` points and is exact for every polynomial
//! of total degree `<= d`. Nodes and weights come from the Golub-Welsch
//! eigenvalue method applied to the three-term recurrences.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::QuadratureError;

/// Largest supported exactness degree.
pub const MAX_EXACTNESS: usize = 40;

/// Quadrature rule on the reference triangle `{x, y >= 0, x + y <= 1}`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Quadrature rule on the unit interval `[0, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Nodes and weights of the Gauss rule whose Jacobi matrix has the given
/// monic-recurrence coefficients; `mass` is the integral of the weight
/// function itself.
fn golub_welsch(diag: &[f64], offdiag_sq: &[f64], mass: f64) -> (Vec<f64>, Vec<f64>) {
    let m = diag.len();
    if m == 1 {
        return (vec![diag[0]], vec![mass]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        jacobi[(i, i)] = diag[i];
    }
    for i in 0..m - 1 {
        let b = offdiag_sq[i].sqrt();
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre on `[0, 1]` with `m` points (exact to degree `2m - 1`).
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = vec![0.0; m];
    let offdiag_sq: Vec<f64> = (1..m)
        .map(|k| (k * k) as f64 / ((4 * k * k - 1) as f64))
        .collect();
    let (nodes, weights) = golub_welsch(&diag, &offdiag_sq, 2.0);
    (
        nodes.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights.iter().map(|w| 0.5 * w).collect(),
    )
}

/// Gauss-Jacobi for `int_0^1 (1 - u) f(u) du` with `m` points; the `(1 - u)`
/// factor is absorbed into the weights.
fn gauss_jacobi10_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let diag: Vec<f64> = (0..m)
        .map(|k| -1.0 / (((2 * k + 1) * (2 * k + 3)) as f64))
        .collect();
    let offdiag_sq: Vec<f64> = (1..m)
        .map(|k| (k * (k + 1)) as f64 / ((2 * k + 1).pow(2)) as f64)
        .collect();
    let (nodes, weights) = golub_welsch(&diag, &offdiag_sq, 2.0);
    (
        nodes.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights.iter().map(|w| 0.25 * w).collect(),
    )
}

/// Rule on the reference triangle, exact for all polynomials of total degree
/// `<= exactness`.
pub fn triangle_rule(exactness: usize) -> Result<TriangleRule, QuadratureError> {
    if exactness > MAX_EXACTNESS {
        return Err(QuadratureError::DegreeTooHigh {
            requested: exactness,
            max: MAX_EXACTNESS,
        });
    }
    let m = exactness / 2 + 1;
    let (xu, wu) = gauss_jacobi10_unit(m);
    let (xv, wv) = gauss_legendre_unit(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            points.push([xu[i], xv[j] * (1.0 - xu[i])]);
            weights.push(wu[i] * wv[j]);
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exactness,
    })
}

/// Rule on `[0, 1]`, exact for all polynomials of degree `<= exactness`.
pub fn edge_rule(exactness: usize) -> Result<EdgeRule, QuadratureError> {
    if exactness > MAX_EXACTNESS {
        return Err(QuadratureError::DegreeTooHigh {
            requested: exactness,
            max: MAX_EXACTNESS,
        });
    }
    let m = exactness / 2 + 1;
    let (points, weights) = gauss_legendre_unit(m);
    Ok(EdgeRule {
        points,
        weights,
        exactness,
    })
}

/// Exact value of `int_T x^a y^b` over the reference triangle,
/// `a! b! / (a + b + 2)!`.
pub fn reference_monomial_integral(a: usize, b: usize) -> f64 {
    let mut binom: u128 = 1;
    for i in 0..a.min(b) {
        binom = binom * (a + b - i) as u128 / (i + 1) as u128;
    }
    1.0 / (binom as f64 * (a + b + 1) as f64 * (a + b + 2) as f64)
}
