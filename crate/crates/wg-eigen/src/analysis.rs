//! Reference spectra, discrete norms, eigenspace-aware eigenfunction errors,
//! observed and predicted convergence orders, lower-bound reporting, and the
//! nodal-averaging interpolant into continuous piecewise linears.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble_vnorm_matrix, AssembledForms};
use crate::error::{AssemblyError, SpaceError};
use crate::mesh::Mesh;
use crate::quadrature::triangle_rule;
use crate::space::{project_qh, WeakFunction, WgSpace};
use crate::sparse::quad_form;

pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// One distinct exact eigenvalue with an orthonormal basis of its eigenspace.
#[derive(Clone)]
pub struct ExactEigenvalue {
    pub value: f64,
    pub multiplicity: usize,
    pub functions: Vec<ScalarField>,
}

/// The exact Dirichlet spectrum of a reference domain, ascending.
#[derive(Clone)]
pub struct ExactSpectrum {
    pub domain: &'static str,
    pub eigenvalues: Vec<ExactEigenvalue>,
}

impl ExactSpectrum {
    /// Unit square `(0,1)^2`: `lambda = (m^2 + n^2) pi^2` with the
    /// L2-normalized eigenfunctions `2 sin(m pi x) sin(n pi y)`; covers at
    /// least the first `count` indices including multiplicity.
    pub fn unit_square(count: usize) -> Self {
        use std::f64::consts::PI;
        let limit = 2 + (count as f64).sqrt() as usize * 2 + 4;
        let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
        for m in 1..=limit {
            for n in 1..=limit {
                pairs.push((m * m + n * n, m, n));
            }
        }
        pairs.sort();
        let mut eigenvalues: Vec<ExactEigenvalue> = Vec::new();
        let mut covered = 0;
        let mut i = 0;
        while covered < count && i < pairs.len() {
            let key = pairs[i].0;
            let mut functions: Vec<ScalarField> = Vec::new();
            while i < pairs.len() && pairs[i].0 == key {
                let (m, n) = (pairs[i].1, pairs[i].2);
                functions.push(Arc::new(move |x: [f64; 2]| {
                    2.0 * (m as f64 * PI * x[0]).sin() * (n as f64 * PI * x[1]).sin()
                }));
                i += 1;
            }
            covered += functions.len();
            eigenvalues.push(ExactEigenvalue {
                value: key as f64 * PI * PI,
                multiplicity: functions.len(),
                functions,
            });
        }
        Self {
            domain: "unit_square",
            eigenvalues,
        }
    }

    /// Exact eigenvalue at 1-based index `j`, counting multiplicity.
    pub fn value_at(&self, j: usize) -> Option<f64> {
        self.group_at(j).map(|g| g.value)
    }

    /// The eigenvalue group (cluster) containing 1-based index `j`.
    pub fn group_at(&self, j: usize) -> Option<&ExactEigenvalue> {
        let mut consumed = 0;
        for group in &self.eigenvalues {
            consumed += group.multiplicity;
            if j <= consumed {
                return Some(group);
            }
        }
        None
    }

    /// The first `count` eigenvalues as a flat ascending list.
    pub fn flat_values(&self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        for group in &self.eigenvalues {
            for _ in 0..group.multiplicity {
                if out.len() == count {
                    return out;
                }
                out.push(group.value);
            }
        }
        out
    }
}

/// Energy norm `|||v||| = sqrt(a_s(v, v))`.
pub fn norm_triple_bar(forms: &AssembledForms, v: &WeakFunction) -> f64 {
    forms.a_quad(v.coeffs()).max(0.0).sqrt()
}

/// Interior L2 seminorm `||v||_b = sqrt(b_w(v, v))`.
pub fn norm_b(forms: &AssembledForms, v: &WeakFunction) -> f64 {
    forms.b_quad(v.coeffs()).max(0.0).sqrt()
}

/// The broken `V`-norm with the unweighted `h_T^{-1}` trace mismatch. The
/// matrix is assembled once and reused across evaluations.
pub struct VNorm {
    matrix: faer::sparse::SparseColMat<usize, f64>,
}

impl VNorm {
    pub fn new(space: &Arc<WgSpace>) -> Result<Self, AssemblyError> {
        Ok(Self {
            matrix: assemble_vnorm_matrix(space)?,
        })
    }

    pub fn eval(&self, v: &WeakFunction) -> f64 {
        quad_form(&self.matrix, v.coeffs()).max(0.0).sqrt()
    }
}

/// Which norm an eigenfunction error is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorNorm {
    TripleBar,
    B,
}

/// Error of a computed eigenfunction against an exact eigenspace: the
/// minimum over unit-norm combinations `w` of the cluster basis of
/// `|| Q_h w - computed ||` in the requested norm. For simple eigenvalues
/// this reduces to sign alignment.
pub fn eigenfunction_error(
    forms: &AssembledForms,
    computed: &WeakFunction,
    cluster: &[ScalarField],
    norm: ErrorNorm,
) -> Result<f64, SpaceError> {
    assert!(!cluster.is_empty(), "empty exact cluster");
    let space = forms.space();
    let projections: Vec<DVector<f64>> = cluster
        .iter()
        .map(|f| Ok(project_qh(&**f, space)?.coeffs().clone()))
        .collect::<Result<Vec<_>, SpaceError>>()?;
    Ok(eigenfunction_error_projected(
        forms,
        computed,
        &projections,
        norm,
    ))
}

/// Same as [`eigenfunction_error`] but against already-projected cluster
/// coefficient vectors, so one projection can serve a whole table level.
pub fn eigenfunction_error_projected(
    forms: &AssembledForms,
    computed: &WeakFunction,
    projections: &[DVector<f64>],
    norm: ErrorNorm,
) -> f64 {
    assert!(!projections.is_empty(), "empty exact cluster");
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        match norm {
            ErrorNorm::TripleBar => forms.apply_a(x),
            ErrorNorm::B => forms.apply_b(x),
        }
    };
    let m = projections.len();
    let v = computed.coeffs();
    let n_applied: Vec<DVector<f64>> = projections.iter().map(&apply).collect();
    let mut gram = DMatrix::zeros(m, m);
    let mut lin = DVector::zeros(m);
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = n_applied[i].dot(&projections[j]);
        }
        lin[i] = n_applied[i].dot(v);
    }
    let constant = apply(v).dot(v);

    let min_value = match m {
        1 => {
            let e_plus = gram[(0, 0)] - 2.0 * lin[0] + constant;
            let e_minus = gram[(0, 0)] + 2.0 * lin[0] + constant;
            e_plus.min(e_minus)
        }
        2 => minimize_on_circle(&gram, &lin, constant),
        _ => minimize_on_sphere(&gram, &lin, constant),
    };
    min_value.max(0.0).sqrt()
}

/// Minimizes `c^T M c - 2 g . c + s` over the unit circle by sampling the
/// closed-form trigonometric profile and polishing with Newton steps.
fn minimize_on_circle(m: &DMatrix<f64>, g: &DVector<f64>, s: f64) -> f64 {
    let a2 = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let a0 = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let b2 = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let value = |t: f64| {
        a0 + a2 * (2.0 * t).cos() + b2 * (2.0 * t).sin() - 2.0 * (g[0] * t.cos() + g[1] * t.sin())
            + s
    };
    let deriv = |t: f64| {
        -2.0 * a2 * (2.0 * t).sin()
            + 2.0 * b2 * (2.0 * t).cos()
            + 2.0 * (g[0] * t.sin() - g[1] * t.cos())
    };
    let deriv2 = |t: f64| {
        -4.0 * a2 * (2.0 * t).cos() - 4.0 * b2 * (2.0 * t).sin()
            + 2.0 * (g[0] * t.cos() + g[1] * t.sin())
    };

    let samples = 1024;
    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let t = i as f64 / samples as f64 * std::f64::consts::TAU;
        let e = value(t);
        if e < best {
            best = e;
            best_t = t;
        }
    }
    let mut t = best_t;
    for _ in 0..40 {
        let d2 = deriv2(t);
        if d2 <= 0.0 {
            break;
        }
        let step = deriv(t) / d2;
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    best.min(value(t))
}

/// Minimizes `c^T M c - 2 g . c + s` over the unit sphere via the secular
/// equation of the Lagrange system `(M - nu I) c = g`, `nu <= lambda_min(M)`.
fn minimize_on_sphere(m: &DMatrix<f64>, g: &DVector<f64>, s: f64) -> f64 {
    let dim = g.len();
    let sym = 0.5 * (m + m.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let g_rot = eig.eigenvectors.tr_mul(g);
    let lambda_min = eig.eigenvalues.min();

    let value = |c_rot: &DVector<f64>| -> f64 {
        let mut quad = 0.0;
        let mut linear = 0.0;
        for i in 0..dim {
            quad += eig.eigenvalues[i] * c_rot[i] * c_rot[i];
            linear += g_rot[i] * c_rot[i];
        }
        quad - 2.0 * linear + s
    };
    let phi = |nu: f64| -> f64 {
        (0..dim)
            .map(|i| (g_rot[i] / (eig.eigenvalues[i] - nu)).powi(2))
            .sum()
    };

    let near_min: Vec<usize> = (0..dim)
        .filter(|&i| (eig.eigenvalues[i] - lambda_min).abs() < 1e-12 * lambda_min.abs().max(1.0))
        .collect();
    let hard_case = near_min.iter().all(|&i| g_rot[i].abs() < 1e-14);

    let c_rot = if hard_case {
        // Pseudo-inverse solution plus padding in the lowest eigendirection.
        let mut c = DVector::zeros(dim);
        let mut norm2 = 0.0;
        for i in 0..dim {
            if !near_min.contains(&i) {
                c[i] = g_rot[i] / (eig.eigenvalues[i] - lambda_min);
                norm2 += c[i] * c[i];
            }
        }
        if norm2 < 1.0 {
            c[near_min[0]] = (1.0 - norm2).sqrt();
        } else {
            c /= norm2.sqrt();
        }
        c
    } else {
        // phi is increasing on (-inf, lambda_min); bracket and bisect.
        let g_norm = g_rot.norm().max(1e-300);
        let mut lo = lambda_min - g_norm - 1.0;
        let mut hi = lambda_min - 1e-16 * lambda_min.abs().max(1.0);
        while phi(hi) < 1.0 {
            hi = lambda_min - 0.5 * (lambda_min - hi);
            if (lambda_min - hi).abs() < 1e-300 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        DVector::from_fn(dim, |i, _| g_rot[i] / (eig.eigenvalues[i] - nu))
    };
    let c_rot = &c_rot / c_rot.norm();
    value(&c_rot)
}

/// Outcome of one consecutive-level order computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderOutcome {
    Value(f64),
    /// The error changed sign between the two levels; the order is omitted.
    SignFlip,
    /// One of the errors was exactly zero.
    ZeroError,
}

impl OrderOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            OrderOutcome::Value(v) => Some(*v),
            _ => None,
        }
    }
}

/// Observed orders from signed errors over a decreasing step schedule:
/// `ln(|e_i| / |e_{i+1}|) / ln(step_i / step_{i+1})` per consecutive pair.
/// Negative errors enter through their absolute value; sign flips are
/// flagged and the order omitted for that pair.
pub fn observed_orders(steps: &[f64], errors: &[f64]) -> Vec<OrderOutcome> {
    assert_eq!(steps.len(), errors.len());
    let mut out = Vec::new();
    for i in 0..steps.len().saturating_sub(1) {
        let (e0, e1) = (errors[i], errors[i + 1]);
        if e0 == 0.0 || e1 == 0.0 {
            out.push(OrderOutcome::ZeroError);
        } else if e0.signum() != e1.signum() {
            out.push(OrderOutcome::SignFlip);
        } else {
            out.push(OrderOutcome::Value(
                (e0.abs() / e1.abs()).ln() / (steps[i] / steps[i + 1]).ln(),
            ));
        }
    }
    out
}

/// Least-squares slope of `ln(error)` against `ln(step)`.
pub fn loglog_slope(steps: &[f64], errors: &[f64]) -> f64 {
    let n = steps.len() as f64;
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Per-index flags `lambda_j - approx_j >= 0`.
pub fn lower_bound_report(exact: &[f64], approx: &[f64]) -> Vec<bool> {
    exact
        .iter()
        .zip(approx)
        .map(|(e, a)| e - a >= 0.0)
        .collect()
}

/// Whether a sequence of approximations increases strictly level to level
/// (the lower-bound trend check for domains without known exact values).
pub fn strictly_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

/// Predicted convergence exponents of the accelerated schemes.
///
/// `gamma` is the dual-regularity exponent: 1 for `k = 1` or domains with
/// reentrant corners, `2 - eps/2` for `k > 1` on convex domains.
#[derive(Clone, Copy, Debug)]
pub struct OrderModel {
    pub k1: usize,
    pub k2: usize,
    pub epsilon: f64,
    pub gamma: f64,
}

impl OrderModel {
    pub fn gamma_for(k: usize, epsilon: f64, convex: bool) -> f64 {
        if k > 1 && convex {
            2.0 - 0.5 * epsilon
        } else {
            1.0
        }
    }

    pub fn two_grid(k: usize, epsilon: f64, convex: bool) -> Self {
        Self {
            k1: k,
            k2: k,
            epsilon,
            gamma: Self::gamma_for(k, epsilon, convex),
        }
    }

    pub fn two_space(k1: usize, k2: usize, epsilon: f64, convex: bool) -> Self {
        Self {
            k1,
            k2,
            epsilon,
            gamma: Self::gamma_for(k1, epsilon, convex),
        }
    }

    /// `min(2k - 2 eps, k + gamma - eps)`.
    pub fn k_bar(&self) -> f64 {
        let k = self.k1 as f64;
        (2.0 * k - 2.0 * self.epsilon).min(k + self.gamma - self.epsilon)
    }

    /// `min(4 k1 - 4 eps, 2 k1 + 2 gamma - 2 eps)`.
    pub fn k_hat(&self) -> f64 {
        let k = self.k1 as f64;
        (4.0 * k - 4.0 * self.epsilon).min(2.0 * k + 2.0 * self.gamma - 2.0 * self.epsilon)
    }

    /// Two-grid eigenvalue error exponents `(H^{2 k_bar}, h^{2k - 2 eps})`.
    pub fn two_grid_value_exponents(&self) -> (f64, f64) {
        (
            2.0 * self.k_bar(),
            2.0 * self.k1 as f64 - 2.0 * self.epsilon,
        )
    }

    /// Two-grid eigenfunction error exponents `(H^{k_bar}, h^{k - eps})`.
    pub fn two_grid_function_exponents(&self) -> (f64, f64) {
        (self.k_bar(), self.k1 as f64 - self.epsilon)
    }

    /// Two-space eigenvalue order `min(k_hat, 2 k2 - 2 eps)` in `h`.
    pub fn two_space_value_order(&self) -> f64 {
        self.k_hat().min(2.0 * self.k2 as f64 - 2.0 * self.epsilon)
    }
}

/// A continuous piecewise-linear function given by vertex values.
pub struct P1Function {
    mesh: Arc<Mesh>,
    pub nodal: Vec<f64>,
}

impl P1Function {
    pub fn eval(&self, t: usize, x: [f64; 2]) -> f64 {
        let bary = self.mesh.barycentric(t, x);
        let tri = self.mesh.triangle(t);
        bary[0] * self.nodal[tri[0]] + bary[1] * self.nodal[tri[1]] + bary[2] * self.nodal[tri[2]]
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> [f64; 2] {
        let tri = self.mesh.triangle(t);
        let p = self.mesh.triangle_coords(t);
        let u = [self.nodal[tri[0]], self.nodal[tri[1]], self.nodal[tri[2]]];
        let two_area = 2.0 * self.mesh.area(t);
        [
            (u[0] * (p[1][1] - p[2][1]) + u[1] * (p[2][1] - p[0][1]) + u[2] * (p[0][1] - p[1][1]))
                / two_area,
            (u[0] * (p[2][0] - p[1][0]) + u[1] * (p[0][0] - p[2][0]) + u[2] * (p[1][0] - p[0][0]))
                / two_area,
        ]
    }

    /// `|v|_1`, the H1 seminorm.
    pub fn h1_seminorm(&self) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let g = self.gradient(t);
                (g[0] * g[0] + g[1] * g[1]) * self.mesh.area(t)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Nodal-averaging interpolant into continuous piecewise linears: the value
/// at a node is the average of the incident interior polynomials, and zero
/// on boundary nodes (the target space has zero trace).
pub fn conforming_interpolant(v: &WeakFunction) -> P1Function {
    let space = v.space();
    let mesh = space.mesh().clone();
    let mut sums = vec![0.0; mesh.num_vertices()];
    let mut counts = vec![0usize; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangle(t);
        for (i, &vertex) in tri.iter().enumerate() {
            let p = mesh.triangle_coords(t)[i];
            sums[vertex] += v.eval_interior(t, p);
            counts[vertex] += 1;
        }
    }
    let mut boundary = vec![false; mesh.num_vertices()];
    for edge in mesh.edges() {
        if edge.is_boundary() {
            boundary[edge.vertices[0]] = true;
            boundary[edge.vertices[1]] = true;
        }
    }
    let nodal = (0..mesh.num_vertices())
        .map(|a| {
            if boundary[a] || counts[a] == 0 {
                0.0
            } else {
                sums[a] / counts[a] as f64
            }
        })
        .collect();
    P1Function { mesh, nodal }
}

/// `||v_0 - Pi_h v||_{L2}` between the interior part and the interpolant.
pub fn interior_interpolant_gap(v: &WeakFunction, p1: &P1Function) -> f64 {
    let space = v.space();
    let rule = triangle_rule(2 * space.degree() + 2).expect("supported degree");
    let mut total = 0.0;
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        for (w, p) in rule.weights.iter().zip(&rule.points) {
            let x = map.to_physical(*p);
            total += w * map.det() * (v.eval_interior(t, x) - p1.eval(t, x)).powi(2);
        }
    }
    total.sqrt()
}
