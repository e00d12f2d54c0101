//! Orthonormal polynomial bases on the reference triangle and the unit
//! interval, and the affine map from the reference triangle to a physical
//! element.
//!
//! Orthonormality is preserved under affine maps up to the constant Jacobian
//! factor, so a basis function on a physical triangle `T` is the reference
//! function composed with the inverse map and divided by `sqrt(det J)` with
//! `det J = 2 |T|`. Element mass matrices are then the identity for every
//! element, which keeps conditioning independent of the mesh.

use nalgebra::{DMatrix, DVector};

use crate::error::SpaceError;
use crate::quadrature::reference_monomial_integral;

/// Largest supported polynomial degree for interior spaces.
pub const MAX_DEGREE: usize = 6;

/// Dimension of `P_k` on a triangle.
pub fn tri_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Orthonormal basis of `P_k` on the reference triangle, built by a Cholesky
/// orthonormalization of the monomials against the exact Gram matrix.
#[derive(Clone, Debug)]
pub struct TriBasis {
    degree: usize,
    dim: usize,
    /// Monomial exponents in graded order.
    exps: Vec<(u32, u32)>,
    /// Lower-triangular: basis `i` = sum_j coeff[(i, j)] * monomial `j`.
    coeff: DMatrix<f64>,
}

impl TriBasis {
    pub fn orthonormal(degree: usize) -> Result<Self, SpaceError> {
        if degree > MAX_DEGREE {
            return Err(SpaceError::DegreeTooHigh {
                requested: degree,
                max: MAX_DEGREE,
            });
        }
        let mut exps = Vec::with_capacity(tri_dim(degree));
        for total in 0..=degree as u32 {
            for b in 0..=total {
                exps.push((total - b, b));
            }
        }
        let dim = exps.len();
        let gram = DMatrix::from_fn(dim, dim, |i, j| {
            reference_monomial_integral(
                (exps[i].0 + exps[j].0) as usize,
                (exps[i].1 + exps[j].1) as usize,
            )
        });
        let chol = gram
            .cholesky()
            .expect("monomial Gram matrix is positive definite");
        // Rows of L^{-1} give the orthonormal combinations.
        let coeff = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .unwrap();
        Ok(Self {
            degree,
            dim,
            exps,
            coeff,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Values of all basis functions at a reference point.
    pub fn eval(&self, p: [f64; 2]) -> DVector<f64> {
        let monos = DVector::from_iterator(
            self.dim,
            self.exps
                .iter()
                .map(|&(a, b)| p[0].powi(a as i32) * p[1].powi(b as i32)),
        );
        &self.coeff * monos
    }

    /// Reference-coordinate gradients `(d/dx, d/dy)` of all basis functions.
    pub fn grad(&self, p: [f64; 2]) -> (DVector<f64>, DVector<f64>) {
        let dx = DVector::from_iterator(
            self.dim,
            self.exps.iter().map(|&(a, b)| {
                if a == 0 {
                    0.0
                } else {
                    a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32)
                }
            }),
        );
        let dy = DVector::from_iterator(
            self.dim,
            self.exps.iter().map(|&(a, b)| {
                if b == 0 {
                    0.0
                } else {
                    b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1)
                }
            }),
        );
        (&self.coeff * dx, &self.coeff * dy)
    }

    /// Basis values at many points, one column per point.
    pub fn eval_table(&self, points: &[[f64; 2]]) -> DMatrix<f64> {
        let mut table = DMatrix::zeros(self.dim, points.len());
        for (q, &p) in points.iter().enumerate() {
            table.set_column(q, &self.eval(p));
        }
        table
    }
}

/// Orthonormal (scaled Legendre) basis of `P_k` on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeBasis {
    degree: usize,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        Self { degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let x = 2.0 * t - 1.0;
        let mut out = DVector::zeros(self.degree + 1);
        let mut p_prev = 1.0;
        let mut p = x;
        out[0] = 1.0;
        if self.degree >= 1 {
            out[1] = 3f64.sqrt() * x;
        }
        for n in 1..self.degree {
            let p_next = (((2 * n + 1) as f64) * x * p - n as f64 * p_prev) / (n + 1) as f64;
            out[n + 1] = ((2 * n + 3) as f64).sqrt() * p_next;
            p_prev = p;
            p = p_next;
        }
        out
    }

    pub fn eval_table(&self, points: &[f64]) -> DMatrix<f64> {
        let mut table = DMatrix::zeros(self.dim(), points.len());
        for (q, &t) in points.iter().enumerate() {
            table.set_column(q, &self.eval(t));
        }
        table
    }
}

/// Affine map from the reference triangle onto a physical one.
#[derive(Clone, Copy, Debug)]
pub struct ElementMap {
    origin: [f64; 2],
    jac: [[f64; 2]; 2],
    inv_jac: [[f64; 2]; 2],
    det: f64,
}

impl ElementMap {
    pub fn new(coords: [[f64; 2]; 3]) -> Self {
        let jac = [
            [coords[1][0] - coords[0][0], coords[2][0] - coords[0][0]],
            [coords[1][1] - coords[0][1], coords[2][1] - coords[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jac = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self {
            origin: coords[0],
            jac,
            inv_jac,
            det,
        }
    }

    /// `det J = 2 |T|`.
    pub fn det(&self) -> f64 {
        self.det
    }

    /// `1 / sqrt(det J)`, the orthonormality scale of the physical basis.
    pub fn scale(&self) -> f64 {
        1.0 / self.det.sqrt()
    }

    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv_jac[0][0] * d[0] + self.inv_jac[0][1] * d[1],
            self.inv_jac[1][0] * d[0] + self.inv_jac[1][1] * d[1],
        ]
    }

    /// Pushes a reference gradient forward: `J^{-T} g`.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jac[0][0] * g[0] + self.inv_jac[1][0] * g[1],
            self.inv_jac[0][1] * g[0] + self.inv_jac[1][1] * g[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;

    fn pseudo_random_points(n: usize) -> Vec<[f64; 2]> {
        // Deterministic low-discrepancy points inside the reference triangle.
        (0..n)
            .map(|i| {
                let mut u = (0.754877666 * (i + 1) as f64).fract();
                let mut v = (0.569840291 * (i + 1) as f64).fract();
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                [u, v]
            })
            .collect()
    }

    #[test]
    fn reproduces_monomials() {
        for degree in 0..=4 {
            let basis = TriBasis::orthonormal(degree).unwrap();
            let rule = triangle_rule(2 * degree).unwrap();
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    // Expand x^a y^b in the basis by exact projection, then
                    // re-evaluate at random points.
                    let mono = |p: [f64; 2]| p[0].powi(a as i32) * p[1].powi(b as i32);
                    let mut coeffs = DVector::zeros(basis.dim());
                    for (w, p) in rule.weights.iter().zip(&rule.points) {
                        coeffs += basis.eval(*p) * (*w * mono(*p));
                    }
                    for p in pseudo_random_points(20) {
                        let approx = basis.eval(p).dot(&coeffs);
                        assert!(
                            (approx - mono(p)).abs() < 1e-12,
                            "degree {degree}, x^{a} y^{b} at {p:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reference_mass_is_identity() {
        for degree in 0..=4 {
            let basis = TriBasis::orthonormal(degree).unwrap();
            let rule = triangle_rule(2 * degree).unwrap();
            let mut mass = DMatrix::zeros(basis.dim(), basis.dim());
            for (w, p) in rule.weights.iter().zip(&rule.points) {
                let v = basis.eval(*p);
                mass += *w * &v * v.transpose();
            }
            for i in 0..basis.dim() {
                for j in 0..basis.dim() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((mass[(i, j)] - expect).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = TriBasis::orthonormal(3).unwrap();
        let eps = 1e-6;
        for p in pseudo_random_points(10) {
            let (gx, gy) = basis.grad(p);
            let fx =
                (basis.eval([p[0] + eps, p[1]]) - basis.eval([p[0] - eps, p[1]])) / (2.0 * eps);
            let fy =
                (basis.eval([p[0], p[1] + eps]) - basis.eval([p[0], p[1] - eps])) / (2.0 * eps);
            assert!((gx - fx).norm() < 1e-7);
            assert!((gy - fy).norm() < 1e-7);
        }
    }

    #[test]
    fn edge_basis_orthonormal() {
        use crate::quadrature::edge_rule;
        let basis = EdgeBasis::new(3);
        let rule = edge_rule(2 * 3).unwrap();
        let mut mass = DMatrix::zeros(4, 4);
        for (w, t) in rule.weights.iter().zip(&rule.points) {
            let v = basis.eval(*t);
            mass += *w * &v * v.transpose();
        }
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((mass[(i, j)] - expect).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn element_map_round_trip() {
        let map = ElementMap::new([[0.2, -0.1], [1.3, 0.4], [0.5, 1.1]]);
        for p in pseudo_random_points(10) {
            let x = map.to_physical(p);
            let back = map.to_reference(x);
            assert!((back[0] - p[0]).abs() < 1e-14 && (back[1] - p[1]).abs() < 1e-14);
        }
        assert!(map.det() > 0.0);
    }
}
