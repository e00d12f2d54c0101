//! Local weak gradients and global assembly of the stabilized stiffness form,
//! the penalty form, the interior mass form, cross-space mass vectors, and
//! load vectors.
//!
//! The local weak gradient of a weak function `v = {v_0, v_b}` on a triangle
//! is the `[P_{k-1}(T)]^2` field defined variationally by
//!
//! ```text
//! (grad_w v, q)_T = -(v_0, div q)_T + <v_b, q . n>_{dT}
//! ```
//!
//! Local matrices are built over the full local slot layout (interior block
//! plus all three edge trace blocks, boundary or not); global assembly drops
//! the boundary slots, which is exactly the strong enforcement of the zero
//! boundary trace.

use std::sync::Arc;

use faer::sparse::SparseColMat;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::AssemblyError;
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, TriangleRule};
use crate::space::{WeakFunction, WgSpace, ANALYTIC_EXTRA_DEGREE};
use crate::sparse::{csc_from_triplets, quad_form, spmv};

/// Weak-gradient matrix of one element: maps the full local slot vector
/// (interior coefficients, then the trace coefficients of the three local
/// edges) to the coefficients of `grad_w v` in the orthonormal
/// `[P_{k-1}(T)]^2` basis (x-block then y-block).
#[derive(Clone, Debug)]
pub struct LocalWeakGradient {
    pub element: usize,
    pub matrix: DMatrix<f64>,
}

impl LocalWeakGradient {
    /// Flux coefficients of `grad_w v` for a full local slot vector.
    pub fn apply(&self, local: &DVector<f64>) -> DVector<f64> {
        &self.matrix * local
    }
}

/// Precomputed reference-element tables shared by all element loops.
struct Kernels {
    tri_rule: TriangleRule,
    edge_rule: EdgeRule,
    /// Interior basis values at triangle points, `interior_dim x nq`.
    int_table: DMatrix<f64>,
    /// Reference gradients of the flux basis at triangle points.
    flux_gx: DMatrix<f64>,
    flux_gy: DMatrix<f64>,
    /// Reference gradients of the interior basis at triangle points.
    int_gx: DMatrix<f64>,
    int_gy: DMatrix<f64>,
    /// Edge basis values at edge points, `edge_dim x nq_e`.
    edge_table: DMatrix<f64>,
    /// Reference interior mass (the identity, computed by quadrature).
    int_mass: DMatrix<f64>,
    /// Cholesky factorization of the reference flux mass (the identity).
    flux_chol: Cholesky<f64, Dyn>,
    /// Reference edge mass (the identity, computed by quadrature).
    edge_mass: DMatrix<f64>,
}

impl Kernels {
    fn new(space: &WgSpace) -> Result<Self, AssemblyError> {
        let k = space.degree();
        let tri_rule = triangle_rule(2 * k).map_err(crate::error::SpaceError::from)?;
        let e_rule = edge_rule(2 * k).map_err(crate::error::SpaceError::from)?;
        let int_table = space.interior_basis().eval_table(&tri_rule.points);
        let flux_table = space.flux_basis().eval_table(&tri_rule.points);
        let nq = tri_rule.points.len();
        let fdim = space.flux_basis().dim();
        let idim = space.interior_dim();
        let mut flux_gx = DMatrix::zeros(fdim, nq);
        let mut flux_gy = DMatrix::zeros(fdim, nq);
        let mut int_gx = DMatrix::zeros(idim, nq);
        let mut int_gy = DMatrix::zeros(idim, nq);
        for (q, &p) in tri_rule.points.iter().enumerate() {
            let (gx, gy) = space.flux_basis().grad(p);
            flux_gx.set_column(q, &gx);
            flux_gy.set_column(q, &gy);
            let (gx, gy) = space.interior_basis().grad(p);
            int_gx.set_column(q, &gx);
            int_gy.set_column(q, &gy);
        }
        let edge_table = space.edge_basis().eval_table(&e_rule.points);

        let weighted = |table: &DMatrix<f64>, weights: &[f64]| -> DMatrix<f64> {
            let mut mass = DMatrix::zeros(table.nrows(), table.nrows());
            for (q, w) in weights.iter().enumerate() {
                let col = table.column(q);
                mass.ger(*w, &col, &col, 1.0);
            }
            mass
        };
        let int_mass = weighted(&int_table, &tri_rule.weights);
        let flux_mass = weighted(&flux_table, &tri_rule.weights);
        let edge_mass = weighted(&edge_table, &e_rule.weights);
        let flux_chol = flux_mass
            .cholesky()
            .ok_or(crate::error::SpaceError::SingularElementMass(usize::MAX))?;
        Ok(Self {
            tri_rule,
            edge_rule: e_rule,
            int_table,
            flux_gx,
            flux_gy,
            int_gx,
            int_gy,
            edge_table,
            int_mass,
            flux_chol,
            edge_mass,
        })
    }

    /// Number of local slots: interior block plus all three edge blocks.
    fn n_slots(&self, space: &WgSpace) -> usize {
        space.interior_dim() + 3 * space.edge_dim()
    }

    /// Right-hand side of the weak-gradient system for every local slot,
    /// `(2 fdim) x n_slots`.
    fn weak_gradient_rhs(&self, space: &WgSpace, t: usize) -> DMatrix<f64> {
        let idim = space.interior_dim();
        let edim = space.edge_dim();
        let fdim = space.flux_basis().dim();
        let map = space.element_map(t);
        let mesh = space.mesh();
        let mut rhs = DMatrix::zeros(2 * fdim, self.n_slots(space));

        // -(v_0, div q)_T: the physical scale factors and the Jacobian
        // determinant cancel, leaving reference sums against pushed gradients.
        for (q, w) in self.tri_rule.weights.iter().enumerate() {
            let phi = self.int_table.column(q);
            for j in 0..fdim {
                let g = map.push_gradient([self.flux_gx[(j, q)], self.flux_gy[(j, q)]]);
                for i in 0..idim {
                    rhs[(j, i)] -= w * phi[i] * g[0];
                    rhs[(fdim + j, i)] -= w * phi[i] * g[1];
                }
            }
        }

        // <v_b, q . n>_{dT}, one block per local edge.
        for le in 0..3 {
            let e = mesh.triangle_edges(t)[le];
            let [a, b] = mesh.edge(e).vertices;
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            let len = mesh.edge_length(e);
            let normal = mesh.outward_normal(t, le);
            let scale = (len / map.det()).sqrt();
            let col0 = idim + le * edim;
            for (q, (w, t01)) in self
                .edge_rule
                .weights
                .iter()
                .zip(&self.edge_rule.points)
                .enumerate()
            {
                let x = [pa[0] + t01 * (pb[0] - pa[0]), pa[1] + t01 * (pb[1] - pa[1])];
                let flux = space.flux_basis().eval(map.to_reference(x));
                for r in 0..edim {
                    let tr = w * self.edge_table[(r, q)] * scale;
                    for j in 0..fdim {
                        rhs[(j, col0 + r)] += tr * flux[j] * normal[0];
                        rhs[(fdim + j, col0 + r)] += tr * flux[j] * normal[1];
                    }
                }
            }
        }
        rhs
    }

    /// Solves the block-diagonal vector mass system for the weak gradient.
    fn weak_gradient(&self, space: &WgSpace, t: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let fdim = space.flux_basis().dim();
        let rhs = self.weak_gradient_rhs(space, t);
        let mut g = rhs.clone();
        let x_block = self.flux_chol.solve(&rhs.rows(0, fdim).clone_owned());
        let y_block = self.flux_chol.solve(&rhs.rows(fdim, fdim).clone_owned());
        g.rows_mut(0, fdim).copy_from(&x_block);
        g.rows_mut(fdim, fdim).copy_from(&y_block);
        (g, rhs)
    }

    /// Trace-mismatch matrix of one local edge: maps local slots to the edge
    /// basis coefficients of `Q_b v_0 - v_b`.
    fn trace_mismatch(&self, space: &WgSpace, t: usize, le: usize) -> DMatrix<f64> {
        let idim = space.interior_dim();
        let edim = space.edge_dim();
        let map = space.element_map(t);
        let mesh = space.mesh();
        let e = mesh.triangle_edges(t)[le];
        let [a, b] = mesh.edge(e).vertices;
        let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
        let len = mesh.edge_length(e);
        let scale = (len / map.det()).sqrt();
        let mut r_mat = DMatrix::zeros(edim, self.n_slots(space));
        for (q, (w, t01)) in self
            .edge_rule
            .weights
            .iter()
            .zip(&self.edge_rule.points)
            .enumerate()
        {
            let x = [pa[0] + t01 * (pb[0] - pa[0]), pa[1] + t01 * (pb[1] - pa[1])];
            let phi = space.interior_basis().eval(map.to_reference(x));
            for r in 0..edim {
                let tr = w * self.edge_table[(r, q)] * scale;
                for i in 0..idim {
                    r_mat[(r, i)] += tr * phi[i];
                }
            }
        }
        for r in 0..edim {
            r_mat[(r, idim + le * edim + r)] = -1.0;
        }
        r_mat
    }

    /// Element matrix of the broken gradient seminorm of the interior part,
    /// for the `V`-norm.
    fn interior_gradient_matrix(&self, space: &WgSpace, t: usize) -> DMatrix<f64> {
        let idim = space.interior_dim();
        let map = space.element_map(t);
        let mut k = DMatrix::zeros(idim, idim);
        let mut pushed = DMatrix::zeros(2, idim);
        for (q, w) in self.tri_rule.weights.iter().enumerate() {
            for i in 0..idim {
                let g = map.push_gradient([self.int_gx[(i, q)], self.int_gy[(i, q)]]);
                pushed[(0, i)] = g[0];
                pushed[(1, i)] = g[1];
            }
            for i in 0..idim {
                for j in 0..idim {
                    k[(i, j)] +=
                        w * (pushed[(0, i)] * pushed[(0, j)] + pushed[(1, i)] * pushed[(1, j)]);
                }
            }
        }
        k
    }
}

/// Global indices of the full local slot layout of element `t`; boundary edge
/// slots are `None`.
fn slot_globals(space: &WgSpace, t: usize) -> Vec<Option<usize>> {
    let mut slots: Vec<Option<usize>> = space.interior_range(t).map(Some).collect();
    for e in space.mesh().triangle_edges(t) {
        match space.edge_range(e) {
            Some(range) => slots.extend(range.map(Some)),
            None => slots.extend(std::iter::repeat_n(None, space.edge_dim())),
        }
    }
    slots
}

/// Scatters the upper triangle of a symmetric element matrix, skipping
/// eliminated slots. Both orientations receive the same value so the global
/// matrix is symmetric to the bit.
fn scatter_symmetric(
    k: &DMatrix<f64>,
    slots: &[Option<usize>],
    triplets: &mut Vec<(usize, usize, f64)>,
) {
    for li in 0..slots.len() {
        let Some(gi) = slots[li] else { continue };
        for lj in li..slots.len() {
            let Some(gj) = slots[lj] else { continue };
            let v = k[(li, lj)];
            if v != 0.0 {
                triplets.push((gi, gj, v));
                if li != lj {
                    triplets.push((gj, gi, v));
                }
            }
        }
    }
}

/// The weak-gradient matrix of one element (diagnostic / test surface; the
/// global assembly uses the same kernel).
pub fn local_weak_gradient(
    space: &Arc<WgSpace>,
    element: usize,
) -> Result<LocalWeakGradient, AssemblyError> {
    let kernels = Kernels::new(space)?;
    let (g, _) = kernels.weak_gradient(space, element);
    Ok(LocalWeakGradient { element, matrix: g })
}

/// The assembled global forms over one WG space: stiffness `A` (weak-gradient
/// part plus penalty), the penalty part `S` alone, and the interior mass `B`.
/// All are stored at full size `n0 + nb`; `B` is zero outside the interior
/// block.
pub struct AssembledForms {
    space: Arc<WgSpace>,
    epsilon: f64,
    a: SparseColMat<usize, f64>,
    s: SparseColMat<usize, f64>,
    b: SparseColMat<usize, f64>,
}

impl AssembledForms {
    pub fn new(space: &Arc<WgSpace>, epsilon: f64) -> Result<Self, AssemblyError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(AssemblyError::EpsilonOutOfRange(epsilon));
        }
        let kernels = Kernels::new(space)?;
        let n = space.num_dofs();
        let mesh = space.mesh().clone();
        let mut a_trips = Vec::new();
        let mut s_trips = Vec::new();
        let mut b_trips = Vec::new();

        for t in 0..mesh.num_triangles() {
            let slots = slot_globals(space, t);
            let (g, rhs) = kernels.weak_gradient(space, t);
            // (grad_w v, grad_w w) = G^T M_q G = G^T rhs.
            let mut k = g.transpose() * &rhs;
            let mut s_loc = DMatrix::zeros(slots.len(), slots.len());
            let penalty = mesh.diameter(t).powf(-1.0 + epsilon);
            for le in 0..3 {
                let r = kernels.trace_mismatch(space, t, le);
                let mr = &kernels.edge_mass * &r;
                s_loc.gemm_tr(penalty, &r, &mr, 1.0);
            }
            k += &s_loc;
            scatter_symmetric(&k, &slots, &mut a_trips);
            scatter_symmetric(&s_loc, &slots, &mut s_trips);
            let int_slots = &slots[..space.interior_dim()];
            scatter_symmetric(&kernels.int_mass, int_slots, &mut b_trips);
        }

        Ok(Self {
            space: space.clone(),
            epsilon,
            a: csc_from_triplets(n, n, &a_trips),
            s: csc_from_triplets(n, n, &s_trips),
            b: csc_from_triplets(n, n, &b_trips),
        })
    }

    pub fn space(&self) -> &Arc<WgSpace> {
        &self.space
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The stabilized stiffness matrix of `a_s`.
    pub fn a(&self) -> &SparseColMat<usize, f64> {
        &self.a
    }

    /// The penalty part of the stiffness alone.
    pub fn s(&self) -> &SparseColMat<usize, f64> {
        &self.s
    }

    /// The interior mass matrix of `b_w`.
    pub fn b(&self) -> &SparseColMat<usize, f64> {
        &self.b
    }

    pub fn apply_a(&self, x: &DVector<f64>) -> DVector<f64> {
        spmv(&self.a, x)
    }

    pub fn apply_b(&self, x: &DVector<f64>) -> DVector<f64> {
        spmv(&self.b, x)
    }

    /// `a_s(v, v)`.
    pub fn a_quad(&self, v: &DVector<f64>) -> f64 {
        quad_form(&self.a, v)
    }

    /// `s(v, v)`.
    pub fn s_quad(&self, v: &DVector<f64>) -> f64 {
        quad_form(&self.s, v)
    }

    /// `b_w(v, v)`.
    pub fn b_quad(&self, v: &DVector<f64>) -> f64 {
        quad_form(&self.b, v)
    }
}

/// Assembles the matrix of the broken `V`-norm,
/// `||v||_V^2 = sum_T (||grad v_0||_T^2 + h_T^{-1} ||Q_b v_0 - v_b||_{dT}^2)`,
/// which uses the plain `h_T^{-1}` weight rather than the penalty weight.
pub fn assemble_vnorm_matrix(
    space: &Arc<WgSpace>,
) -> Result<SparseColMat<usize, f64>, AssemblyError> {
    let kernels = Kernels::new(space)?;
    let mesh = space.mesh().clone();
    let n = space.num_dofs();
    let mut trips = Vec::new();
    for t in 0..mesh.num_triangles() {
        let slots = slot_globals(space, t);
        let mut k = DMatrix::zeros(slots.len(), slots.len());
        k.view_mut((0, 0), (space.interior_dim(), space.interior_dim()))
            .copy_from(&kernels.interior_gradient_matrix(space, t));
        let weight = 1.0 / mesh.diameter(t);
        for le in 0..3 {
            let r = kernels.trace_mismatch(space, t, le);
            let mr = &kernels.edge_mass * &r;
            k.gemm_tr(weight, &r, &mr, 1.0);
        }
        scatter_symmetric(&k, &slots, &mut trips);
    }
    Ok(csc_from_triplets(n, n, &trips))
}

/// Load vector `(f, phi_i)` over the interior basis; edge entries are zero.
pub fn assemble_load(
    f: &dyn Fn([f64; 2]) -> f64,
    space: &Arc<WgSpace>,
) -> Result<DVector<f64>, AssemblyError> {
    let rule = triangle_rule(2 * space.degree() + ANALYTIC_EXTRA_DEGREE)
        .map_err(crate::error::SpaceError::from)?;
    let table = space.interior_basis().eval_table(&rule.points);
    let mut rhs = DVector::zeros(space.num_dofs());
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        let mut local = DVector::zeros(space.interior_dim());
        for (q, (w, p)) in rule.weights.iter().zip(&rule.points).enumerate() {
            let x = map.to_physical(*p);
            local.axpy(*w * f(x) * map.det().sqrt(), &table.column(q), 1.0);
        }
        let range = space.interior_range(t);
        rhs.rows_mut(range.start, range.len()).copy_from(&local);
    }
    Ok(rhs)
}

/// Cross-space mass vector: `f_i = b_w(u, phi_i)` for every basis function
/// `phi_i` of the test space. The trial function may live on a coarser mesh
/// of the same refinement hierarchy (evaluated through the ancestor map) or
/// on the same mesh with a lower or equal degree.
pub fn assemble_cross_mass(
    trial: &WeakFunction,
    test_space: &Arc<WgSpace>,
) -> Result<DVector<f64>, AssemblyError> {
    let trial_space = trial.space();
    let trial_mesh = trial_space.mesh();
    let test_mesh = test_space.mesh();
    let same_mesh = Arc::ptr_eq(trial_mesh, test_mesh);

    if same_mesh {
        if trial_space.degree() > test_space.degree() {
            return Err(AssemblyError::DegreeMismatch {
                trial: trial_space.degree(),
                test: test_space.degree(),
            });
        }
    } else {
        let lvl_gap = test_mesh.level() as i64 - trial_mesh.level() as i64;
        let nested = lvl_gap > 0
            && test_mesh.num_triangles() == trial_mesh.num_triangles() * 4usize.pow(lvl_gap as u32);
        if !nested {
            return Err(AssemblyError::IncompatibleMeshes);
        }
    }

    let exactness = trial_space.degree() + test_space.degree();
    let rule = triangle_rule(exactness).map_err(crate::error::SpaceError::from)?;
    let table = test_space.interior_basis().eval_table(&rule.points);
    let nq = rule.points.len();
    let trial_dim = trial_space.interior_dim();
    let mut rhs = DVector::zeros(test_space.num_dofs());
    let mut trial_points = vec![[0.0f64; 2]; nq];
    let mut local = DVector::zeros(test_space.interior_dim());
    for t in 0..test_mesh.num_triangles() {
        let src = if same_mesh {
            t
        } else {
            test_mesh.ancestor_at_level(t, trial_mesh.level())?
        };
        if !same_mesh {
            debug_assert!(
                {
                    let p = test_mesh.triangle_coords(t);
                    let c = [
                        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                    ];
                    trial_mesh.barycentric(src, c).iter().all(|&l| l >= -1e-10)
                },
                "ancestor map inconsistent with geometry"
            );
        }
        let map = test_space.element_map(t);
        let src_map = trial_space.element_map(src);
        for (q, p) in rule.points.iter().enumerate() {
            trial_points[q] = src_map.to_reference(map.to_physical(*p));
        }
        // Trial values at all quadrature points in one sweep.
        let trial_table = trial_space.interior_basis().eval_table(&trial_points);
        let trial_coeffs = trial.coeffs().rows(src * trial_dim, trial_dim);
        let trial_vals = trial_table.tr_mul(&trial_coeffs) * src_map.scale();

        local.fill(0.0);
        for (q, w) in rule.weights.iter().enumerate() {
            local.axpy(*w * trial_vals[q] * map.det().sqrt(), &table.column(q), 1.0);
        }
        let range = test_space.interior_range(t);
        rhs.rows_mut(range.start, range.len()).copy_from(&local);
    }
    Ok(rhs)
}
