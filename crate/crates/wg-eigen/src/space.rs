//! The weak Galerkin space of degree `k`: interior polynomials of degree `k`
//! per triangle and trace polynomials of degree `k - 1` per interior edge.
//! Boundary edges carry no unknowns, which enforces the zero trace condition
//! strongly.
//!
//! Also hosts weak functions (coefficient vectors split into interior and
//! edge blocks) and the L2 projections onto the space.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::DVector;

use crate::basis::{tri_dim, EdgeBasis, ElementMap, TriBasis};
use crate::error::SpaceError;
use crate::mesh::Mesh;
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, TriangleRule};

/// Extra quadrature exactness used whenever a non-polynomial integrand
/// (an analytic eigenfunction, a source term) appears, so that projection
/// error rather than quadrature error dominates.
pub const ANALYTIC_EXTRA_DEGREE: usize = 6;

/// Degree-`k` WG space over a fixed mesh.
#[derive(Debug)]
pub struct WgSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    /// Per-element interior DOF count, `(k+1)(k+2)/2`.
    interior_dim: usize,
    /// Per-interior-edge trace DOF count, `k`.
    edge_dim: usize,
    n_interior: usize,
    n_edge: usize,
    /// Position of each interior edge in the edge-DOF numbering.
    edge_block: Vec<Option<usize>>,
    int_basis: TriBasis,
    /// Degree `k - 1` basis for weak gradients and vector projections.
    flux_basis: TriBasis,
    edge_basis: EdgeBasis,
    maps: Vec<ElementMap>,
}

impl WgSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<Self>, SpaceError> {
        if degree < 1 {
            return Err(SpaceError::DegreeTooLow);
        }
        let int_basis = TriBasis::orthonormal(degree)?;
        let flux_basis = TriBasis::orthonormal(degree - 1)?;
        let edge_basis = EdgeBasis::new(degree - 1);

        let mut edge_block = Vec::with_capacity(mesh.num_edges());
        let mut n_blocks = 0;
        for e in mesh.edges() {
            if e.is_boundary() {
                edge_block.push(None);
            } else {
                edge_block.push(Some(n_blocks));
                n_blocks += 1;
            }
        }
        let interior_dim = tri_dim(degree);
        let maps = (0..mesh.num_triangles())
            .map(|t| ElementMap::new(mesh.triangle_coords(t)))
            .collect();
        Ok(Arc::new(Self {
            n_interior: mesh.num_triangles() * interior_dim,
            n_edge: n_blocks * degree,
            interior_dim,
            edge_dim: degree,
            mesh,
            degree,
            edge_block,
            int_basis,
            flux_basis,
            edge_basis,
            maps,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interior_dim(&self) -> usize {
        self.interior_dim
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_dim
    }

    pub fn num_interior_dofs(&self) -> usize {
        self.n_interior
    }

    pub fn num_edge_dofs(&self) -> usize {
        self.n_edge
    }

    pub fn num_dofs(&self) -> usize {
        self.n_interior + self.n_edge
    }

    /// Global DOF range of element `t`'s interior polynomial.
    pub fn interior_range(&self, t: usize) -> Range<usize> {
        t * self.interior_dim..(t + 1) * self.interior_dim
    }

    /// Global DOF range of edge `e`'s trace polynomial, `None` on the boundary.
    pub fn edge_range(&self, e: usize) -> Option<Range<usize>> {
        self.edge_block[e].map(|blk| {
            let start = self.n_interior + blk * self.edge_dim;
            start..start + self.edge_dim
        })
    }

    pub fn element_map(&self, t: usize) -> &ElementMap {
        &self.maps[t]
    }

    pub fn interior_basis(&self) -> &TriBasis {
        &self.int_basis
    }

    pub fn flux_basis(&self) -> &TriBasis {
        &self.flux_basis
    }

    pub fn edge_basis(&self) -> &EdgeBasis {
        &self.edge_basis
    }

    /// Global indices of element `t`'s local DOFs: the interior block, then
    /// the trace blocks of its interior edges in local edge order.
    pub fn local_dofs(&self, t: usize) -> Vec<usize> {
        let mut dofs: Vec<usize> = self.interior_range(t).collect();
        for e in self.mesh.triangle_edges(t) {
            if let Some(range) = self.edge_range(e) {
                dofs.extend(range);
            }
        }
        dofs
    }

    /// Quadrature rule pair (triangle, edge) exact for polynomial integrands
    /// of the given degree.
    pub fn rules(&self, exactness: usize) -> Result<(TriangleRule, EdgeRule), SpaceError> {
        Ok((triangle_rule(exactness)?, edge_rule(exactness)?))
    }

    /// Evaluates one interior basis function block at a physical point of
    /// element `t`.
    pub fn eval_interior_basis(&self, t: usize, x: [f64; 2]) -> DVector<f64> {
        let map = &self.maps[t];
        self.int_basis.eval(map.to_reference(x)) * map.scale()
    }
}

/// A weak function: one coefficient vector over a WG space, interpreted as an
/// interior polynomial per element plus a trace polynomial per interior edge.
#[derive(Clone, Debug)]
pub struct WeakFunction {
    space: Arc<WgSpace>,
    coeffs: DVector<f64>,
}

impl WeakFunction {
    pub fn zero(space: Arc<WgSpace>) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            coeffs: DVector::zeros(n),
        }
    }

    pub fn from_coeffs(space: Arc<WgSpace>, coeffs: DVector<f64>) -> Result<Self, SpaceError> {
        if coeffs.len() != space.num_dofs() {
            return Err(SpaceError::DimensionMismatch {
                got: coeffs.len(),
                expected: space.num_dofs(),
            });
        }
        Ok(Self { space, coeffs })
    }

    pub fn space(&self) -> &Arc<WgSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coeffs
    }

    pub fn interior_block(&self) -> nalgebra::DVectorView<'_, f64> {
        self.coeffs.rows(0, self.space.num_interior_dofs())
    }

    pub fn edge_block(&self) -> nalgebra::DVectorView<'_, f64> {
        self.coeffs
            .rows(self.space.num_interior_dofs(), self.space.num_edge_dofs())
    }

    /// Value of the interior polynomial of element `t` at a physical point.
    pub fn eval_interior(&self, t: usize, x: [f64; 2]) -> f64 {
        let vals = self.space.eval_interior_basis(t, x);
        let range = self.space.interior_range(t);
        vals.dot(&self.coeffs.rows(range.start, range.len()))
    }

    /// Gradient of the interior polynomial of element `t` at a physical point.
    pub fn eval_interior_grad(&self, t: usize, x: [f64; 2]) -> [f64; 2] {
        let map = self.space.element_map(t);
        let (gx, gy) = self.space.interior_basis().grad(map.to_reference(x));
        let range = self.space.interior_range(t);
        let c = self.coeffs.rows(range.start, range.len());
        let g_ref = [gx.dot(&c), gy.dot(&c)];
        let g = map.push_gradient(g_ref);
        [g[0] * map.scale(), g[1] * map.scale()]
    }

    /// Value of the trace polynomial on edge `e` at arc parameter `t01`.
    /// Boundary edges are identically zero.
    pub fn eval_edge(&self, e: usize, t01: f64) -> f64 {
        match self.space.edge_range(e) {
            None => 0.0,
            Some(range) => {
                let vals =
                    self.space.edge_basis().eval(t01) / self.space.mesh().edge_length(e).sqrt();
                vals.dot(&self.coeffs.rows(range.start, range.len()))
            }
        }
    }
}

/// L2 projection of a scalar function onto the interior polynomials,
/// element by element. Returns the interior coefficient block.
pub fn project_q0(
    f: &dyn Fn([f64; 2]) -> f64,
    space: &Arc<WgSpace>,
) -> Result<DVector<f64>, SpaceError> {
    let rule = triangle_rule(2 * space.degree() + ANALYTIC_EXTRA_DEGREE)?;
    let basis_table = space.interior_basis().eval_table(&rule.points);
    let dim = space.interior_dim();
    let mut out = DVector::zeros(space.num_interior_dofs());
    let mut load = DVector::zeros(dim);
    for t in 0..space.mesh().num_triangles() {
        let map = space.element_map(t);
        // (mass) c = load with the element mass from the same rule; the
        // orthonormal basis makes the mass the identity, but solving keeps
        // the contract independent of the basis choice.
        let mut mass = nalgebra::DMatrix::zeros(dim, dim);
        load.fill(0.0);
        for (q, (w, p)) in rule.weights.iter().zip(&rule.points).enumerate() {
            let phi = basis_table.column(q);
            let x = map.to_physical(*p);
            mass.ger(*w, &phi, &phi, 1.0);
            load.axpy(*w * f(x) * map.det().sqrt(), &phi, 1.0);
        }
        let chol = mass.cholesky().ok_or(SpaceError::SingularElementMass(t))?;
        let c = chol.solve(&load);
        out.rows_mut(t * dim, dim).copy_from(&c);
    }
    Ok(out)
}

/// L2 projection of a scalar function onto the trace polynomials of the
/// interior edges. Returns the edge coefficient block.
pub fn project_qb(
    f: &dyn Fn([f64; 2]) -> f64,
    space: &Arc<WgSpace>,
) -> Result<DVector<f64>, SpaceError> {
    let rule = edge_rule(2 * space.degree() + ANALYTIC_EXTRA_DEGREE)?;
    let table = space.edge_basis().eval_table(&rule.points);
    let dim = space.edge_dim();
    let mesh = space.mesh();
    let mut out = DVector::zeros(space.num_edge_dofs());
    for (e, edge) in mesh.edges().iter().enumerate() {
        let Some(range) = space.edge_range(e) else {
            continue;
        };
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
        let len = mesh.edge_length(e);
        let mut load = DVector::zeros(dim);
        for (q, (w, t01)) in rule.weights.iter().zip(&rule.points).enumerate() {
            let x = [pa[0] + t01 * (pb[0] - pa[0]), pa[1] + t01 * (pb[1] - pa[1])];
            load.axpy(*w * f(x) * len.sqrt(), &table.column(q), 1.0);
        }
        out.rows_mut(range.start - space.num_interior_dofs(), dim)
            .copy_from(&load);
    }
    Ok(out)
}

/// The combined projection `{Q_0 f, Q_b f}` as a weak function. The trace
/// block only covers interior edges, so `f` should vanish on the boundary.
pub fn project_qh(
    f: &dyn Fn([f64; 2]) -> f64,
    space: &Arc<WgSpace>,
) -> Result<WeakFunction, SpaceError> {
    let interior = project_q0(f, space)?;
    let edge = project_qb(f, space)?;
    let mut coeffs = DVector::zeros(space.num_dofs());
    coeffs.rows_mut(0, interior.len()).copy_from(&interior);
    coeffs.rows_mut(interior.len(), edge.len()).copy_from(&edge);
    WeakFunction::from_coeffs(space.clone(), coeffs)
}

/// Componentwise L2 projection of a vector field onto `[P_{k-1}(T)]^2` on a
/// single element. Coefficients are ordered x-block then y-block.
pub fn project_qbold(
    g: &dyn Fn([f64; 2]) -> [f64; 2],
    space: &Arc<WgSpace>,
    element: usize,
) -> Result<DVector<f64>, SpaceError> {
    let rule = triangle_rule(2 * space.degree() + ANALYTIC_EXTRA_DEGREE)?;
    let table = space.flux_basis().eval_table(&rule.points);
    let dim = space.flux_basis().dim();
    let map = space.element_map(element);
    let mut mass = nalgebra::DMatrix::zeros(dim, dim);
    let mut load_x = DVector::zeros(dim);
    let mut load_y = DVector::zeros(dim);
    for (q, (w, p)) in rule.weights.iter().zip(&rule.points).enumerate() {
        let phi = table.column(q);
        let val = g(map.to_physical(*p));
        mass.ger(*w, &phi, &phi, 1.0);
        load_x.axpy(*w * val[0] * map.det().sqrt(), &phi, 1.0);
        load_y.axpy(*w * val[1] * map.det().sqrt(), &phi, 1.0);
    }
    let chol = mass
        .cholesky()
        .ok_or(SpaceError::SingularElementMass(element))?;
    let cx = chol.solve(&load_x);
    let cy = chol.solve(&load_y);
    let mut out = DVector::zeros(2 * dim);
    out.rows_mut(0, dim).copy_from(&cx);
    out.rows_mut(dim, dim).copy_from(&cy);
    Ok(out)
}

/// Evaluates a `[P_{k-1}]^2` coefficient vector (as produced by
/// [`project_qbold`]) at a physical point of the element.
pub fn eval_flux(space: &WgSpace, element: usize, coeffs: &DVector<f64>, x: [f64; 2]) -> [f64; 2] {
    let map = space.element_map(element);
    let vals = space.flux_basis().eval(map.to_reference(x)) * map.scale();
    let dim = space.flux_basis().dim();
    [
        vals.dot(&coeffs.rows(0, dim)),
        vals.dot(&coeffs.rows(dim, dim)),
    ]
}
