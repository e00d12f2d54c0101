//! Triangulations of the unit square and the L-shape domain, with uniform
//! red refinement and parent/ancestor tracking across refinement levels.
//!
//! Conventions:
//! - Triangles are stored counter-clockwise.
//! - Edge `i` of a triangle connects its local vertices `i` and `(i+1) % 3`.
//! - An interior edge has exactly two incident triangles, a boundary edge one.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::MeshError;

/// How each grid square is split into triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Diagonal {
    /// Diagonal from the lower-left to the upper-right corner (2 triangles).
    RightUp,
    /// Diagonal from the lower-right to the upper-left corner (2 triangles).
    RightDown,
    /// Both diagonals meeting at a center vertex (4 triangles).
    Crisscross,
}

impl Diagonal {
    pub fn parse(s: &str) -> Result<Self, MeshError> {
        match s {
            "right_up" => Ok(Self::RightUp),
            "right_down" => Ok(Self::RightDown),
            "crisscross" => Ok(Self::Crisscross),
            _ => Err(MeshError::UnknownPattern(s.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RightUp => "right_up",
            Self::RightDown => "right_down",
            Self::Crisscross => "crisscross",
        }
    }
}

/// An edge of the triangulation with its incident triangles.
#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, in first-encounter order.
    pub vertices: [usize; 2],
    /// First incident triangle.
    pub tri_left: usize,
    /// Second incident triangle; `None` on the domain boundary.
    pub tri_right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tri_right.is_none()
    }
}

/// A conforming triangulation.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `tri_edges[t][i]` is the edge between local vertices `i` and `(i+1) % 3`.
    tri_edges: Vec<[usize; 3]>,
    /// Per-triangle diameter (longest edge).
    h_tri: Vec<f64>,
    /// Mesh size `h = max h_T`.
    h: f64,
    /// Refinement generation; 0 for freshly built meshes.
    level: u32,
    /// `ancestor_maps[l][t]` is the triangle at level `l` containing triangle
    /// `t` of the current level, for every `l < level`.
    ancestor_maps: Vec<Vec<usize>>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}

impl Mesh {
    /// Builds a mesh from explicit vertex and triangle lists, deriving the
    /// edge topology. Triangles must be counter-clockwise and every edge must
    /// border at most two of them.
    pub fn from_raw(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::VertexIndexOutOfRange { tri: t, vertex: v });
                }
            }
            if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) <= 0.0 {
                return Err(MeshError::NotCounterClockwise(t));
            }
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match edge_ids.get(&key) {
                    None => {
                        let id = edges.len();
                        edge_ids.insert(key, id);
                        edges.push(Edge {
                            vertices: [a, b],
                            tri_left: t,
                            tri_right: None,
                        });
                        tri_edges[t][i] = id;
                    }
                    Some(&id) => {
                        if edges[id].tri_right.is_some() {
                            return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 });
                        }
                        edges[id].tri_right = Some(t);
                        tri_edges[t][i] = id;
                    }
                }
            }
        }

        let h_tri: Vec<f64> = triangles
            .iter()
            .map(|tri| {
                let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
                dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
            })
            .collect();
        let h = h_tri.iter().cloned().fold(0.0, f64::max);

        Ok(Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            h_tri,
            h,
            level: 0,
            ancestor_maps: Vec::new(),
        })
    }

    /// Uniform `n` by `n` triangulation of the unit square `(0,1)^2`.
    pub fn unit_square(n: usize, diagonal: Diagonal) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroResolution);
        }
        let cells = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .collect::<Vec<_>>();
        Self::from_grid(n, -0.0, -0.0, &cells, diagonal)
    }

    /// Triangulation of the L-shape `(-1,1)^2` minus `[0,1)^2`, with `n`
    /// squares per unit length (so `3 n^2` squares in total).
    pub fn l_shape(n: usize, diagonal: Diagonal) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroResolution);
        }
        let cells = (0..2 * n)
            .flat_map(|j| (0..2 * n).map(move |i| (i, j)))
            .filter(|&(i, j)| !(i >= n && j >= n))
            .collect::<Vec<_>>();
        Self::from_grid(n, -1.0, -1.0, &cells, diagonal)
    }

    /// Triangulates the given grid cells; cell `(i, j)` spans
    /// `[x0 + i/n, x0 + (i+1)/n] x [y0 + j/n, y0 + (j+1)/n]`.
    fn from_grid(
        n: usize,
        x0: f64,
        y0: f64,
        cells: &[(usize, usize)],
        diagonal: Diagonal,
    ) -> Result<Self, MeshError> {
        let step = 1.0 / n as f64;
        let grid_point = |i: usize, j: usize| [x0 + i as f64 * step, y0 + j as f64 * step];

        // Number only the vertices that are actually used, in row-major order.
        let mut used: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertices: Vec<[f64; 2]> = Vec::new();
        let mut corner_keys: Vec<(usize, usize)> = cells
            .iter()
            .flat_map(|&(i, j)| [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)])
            .collect();
        corner_keys.sort_by_key(|&(i, j)| (j, i));
        corner_keys.dedup();
        for key in corner_keys {
            used.insert(key, vertices.len());
            vertices.push(grid_point(key.0, key.1));
        }

        let mut triangles: Vec<[usize; 3]> = Vec::new();
        for &(i, j) in cells {
            let a = used[&(i, j)];
            let b = used[&(i + 1, j)];
            let c = used[&(i + 1, j + 1)];
            let d = used[&(i, j + 1)];
            match diagonal {
                Diagonal::RightUp => {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                }
                Diagonal::RightDown => {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
                Diagonal::Crisscross => {
                    let m = vertices.len();
                    vertices.push([x0 + (i as f64 + 0.5) * step, y0 + (j as f64 + 0.5) * step]);
                    triangles.push([a, b, m]);
                    triangles.push([b, c, m]);
                    triangles.push([c, d, m]);
                    triangles.push([d, a, m]);
                }
            }
        }
        Self::from_raw(vertices, triangles)
    }

    /// Red refinement: every triangle is split into 4 congruent children via
    /// edge midpoints. Children keep the parent's orientation, `h_T` halves
    /// exactly, and the ancestry maps are extended.
    pub fn refine_uniform(&self) -> Self {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        // Midpoint vertex of edge `e` gets index `nv + e`.
        for e in &self.edges {
            let (p, q) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        }

        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut parent = Vec::with_capacity(4 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let mab = nv + self.tri_edges[t][0];
            let mbc = nv + self.tri_edges[t][1];
            let mca = nv + self.tri_edges[t][2];
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
            parent.extend([t, t, t, t]);
        }

        let mut refined =
            Self::from_raw(vertices, triangles).expect("red refinement preserves mesh validity");
        refined.level = self.level + 1;
        refined.ancestor_maps = self
            .ancestor_maps
            .iter()
            .map(|map| parent.iter().map(|&p| map[p]).collect())
            .collect();
        refined.ancestor_maps.push(parent);
        refined
    }

    /// The triangle at `level` that geometrically contains triangle `tri`.
    pub fn ancestor_at_level(&self, tri: usize, level: u32) -> Result<usize, MeshError> {
        if tri >= self.triangles.len() {
            return Err(MeshError::TriangleIndexOutOfRange(tri));
        }
        if level > self.level {
            return Err(MeshError::NoAncestry {
                requested: level,
                mesh_level: self.level,
            });
        }
        if level == self.level {
            Ok(tri)
        } else {
            Ok(self.ancestor_maps[level as usize][tri])
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.is_boundary()).count()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn area(&self, t: usize) -> f64 {
        let p = self.triangle_coords(t);
        signed_area(p[0], p[1], p[2])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        self.h_tri[t]
    }

    /// Global mesh size `h = max_T h_T`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Outward unit normal of triangle `t` on its local edge `i`.
    pub fn outward_normal(&self, t: usize, i: usize) -> [f64; 2] {
        let tri = self.triangles[t];
        let a = self.vertices[tri[i]];
        let b = self.vertices[tri[(i + 1) % 3]];
        let len = dist(a, b);
        // CCW orientation puts the interior on the left of a -> b.
        [(b[1] - a[1]) / len, -(b[0] - a[0]) / len]
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangle_coords(t);
        let total = signed_area(a, b, c);
        [
            signed_area(p, b, c) / total,
            signed_area(a, p, c) / total,
            signed_area(a, b, p) / total,
        ]
    }

    /// Plain-text dump for debugging: a header line, then one line per vertex
    /// and one per triangle.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "vertices {} triangles {}",
            self.vertices.len(),
            self.triangles.len()
        );
        for v in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}
