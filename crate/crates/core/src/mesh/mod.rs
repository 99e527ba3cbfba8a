//! Two-dimensional simplicial meshes: the unit square and inscribed-polygon
//! approximations of a disk, with uniform refinement and electrode tagging.

mod electrodes;
mod generate;
mod io;

pub use electrodes::{tag_electrodes, ElectrodeConfig};
pub use generate::{generate_disk_mesh, generate_disk_mesh_with, generate_square_mesh, refine_uniform};
pub use io::{read_mesh, write_mesh};

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Default bound on `h_max / h_min` enforced by the generators.
pub const DEFAULT_QUASI_UNIFORM_BOUND: f64 = 4.0;

/// Relative tolerance for boundary vertices lying on the circle.
pub const CIRCLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Polygon,
    Disk { center: Point, radius: f64 },
}

/// A boundary edge oriented with the domain on its left, and the triangle owning it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub triangle: usize,
}

/// Per-element data of the P1 basis: area and the constant basis gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl Element {
    /// Gradient of the P1 function with vertex values `v`.
    pub fn gradient(&self, v: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..3 {
            g[0] += v[a] * self.grads[a][0];
            g[1] += v[a] * self.grads[a][1];
        }
        g
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    electrode_of_edge: Vec<Option<usize>>,
    domain: DomainKind,
    h: f64,
    elements: OnceLock<Vec<Element>>,
    adjacency: OnceLock<Vec<Vec<usize>>>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.triangles == other.triangles
            && self.boundary == other.boundary
            && self.electrode_of_edge == other.electrode_of_edge
            && self.domain == other.domain
    }
}

/// Geometric quality measures of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub min_angle: f64,
    pub h_max: f64,
    pub h_min: f64,
    /// Largest circumradius-to-inradius ratio over all elements.
    pub shape_regularity: f64,
    pub boundary_node_count: usize,
}

impl QualityReport {
    pub fn quasi_uniformity(&self) -> f64 {
        self.h_max / self.h_min
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

fn circumradius(a: Point, b: Point, c: Point) -> f64 {
    dist(a, b) * dist(b, c) * dist(c, a) / (4.0 * signed_area(a, b, c).abs())
}

impl TriMesh {
    /// Builds a mesh from nodes and counterclockwise triangles, extracting and
    /// ordering the boundary. Validates the structural invariants.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, domain: DomainKind) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if let DomainKind::Disk { radius, .. } = domain {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::InvalidMesh(format!("disk radius {radius} must be positive")));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            let a = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area {a}")));
            }
        }

        // directed edges; an interior edge appears once in each direction
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is used twice with the same orientation",
                        e.0, e.1
                    )));
                }
            }
        }
        let mut next: HashMap<usize, BoundaryEdge> = HashMap::new();
        for (&(a, b), &t) in &directed {
            if !directed.contains_key(&(b, a)) {
                let edge = BoundaryEdge {
                    nodes: [a, b],
                    triangle: t,
                };
                if next.insert(a, edge).is_some() {
                    return Err(Error::InvalidMesh(format!("boundary is not a simple loop at node {a}")));
                }
            }
        }
        if next.is_empty() {
            return Err(Error::InvalidMesh("mesh has no boundary".into()));
        }

        let key = |p: Point| -> (f64, f64) {
            match domain {
                DomainKind::Disk { center, .. } => {
                    let th = (p[1] - center[1]).atan2(p[0] - center[0]).rem_euclid(2.0 * PI);
                    // nodes at angle 2*pi - tiny belong to the start
                    let th = if 2.0 * PI - th < 1e-12 { 0.0 } else { th };
                    (th, 0.0)
                }
                DomainKind::Polygon => (p[1], p[0]),
            }
        };
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_by(|&a, &b| {
            key(nodes[a])
                .partial_cmp(&key(nodes[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut boundary = Vec::with_capacity(next.len());
        let mut used = vec![false; nodes.len()];
        for &s in &starts {
            if used[s] {
                continue;
            }
            let mut v = s;
            loop {
                used[v] = true;
                let e = *next
                    .get(&v)
                    .ok_or_else(|| Error::InvalidMesh(format!("boundary loop broken at node {v}")))?;
                boundary.push(e);
                v = e.nodes[1];
                if v == s {
                    break;
                }
                if used[v] {
                    return Err(Error::InvalidMesh("boundary loops intersect".into()));
                }
            }
        }

        if let DomainKind::Disk { center, radius } = domain {
            for e in &boundary {
                let r = dist(nodes[e.nodes[0]], center);
                if (r - radius).abs() > CIRCLE_TOL * radius {
                    return Err(Error::InvalidMesh(format!(
                        "boundary node {} at radius {r} is off the circle",
                        e.nodes[0]
                    )));
                }
            }
        }

        let h = triangles
            .iter()
            .map(|t| circumradius(nodes[t[0]], nodes[t[1]], nodes[t[2]]))
            .fold(0.0, f64::max);
        let n_edges = boundary.len();
        Ok(Self {
            nodes,
            triangles,
            boundary,
            electrode_of_edge: vec![None; n_edges],
            domain,
            h,
            elements: OnceLock::new(),
            adjacency: OnceLock::new(),
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary edges ordered counterclockwise along each loop.
    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn electrode_of_edge(&self) -> &[Option<usize>] {
        &self.electrode_of_edge
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    /// Mesh size: the largest circumradius.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        let interior = (3 * self.triangles.len() - self.boundary.len()) / 2;
        interior + self.boundary.len()
    }

    /// Boundary node indices in loop order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.boundary.iter().map(|e| e.nodes[0]).collect()
    }

    pub fn edge_endpoints(&self, edge: usize) -> (Point, Point) {
        let [a, b] = self.boundary[edge].nodes;
        (self.nodes[a], self.nodes[b])
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let (a, b) = self.edge_endpoints(edge);
        dist(a, b)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.boundary.len()).map(|e| self.edge_length(e)).sum()
    }

    pub fn area(&self) -> f64 {
        self.elements().iter().map(|e| e.area).sum()
    }

    /// Boundary edges carrying electrode `l`, in loop order.
    pub fn electrode_edges(&self, l: usize) -> Vec<usize> {
        (0..self.boundary.len())
            .filter(|&e| self.electrode_of_edge[e] == Some(l))
            .collect()
    }

    pub fn electrode_count(&self) -> usize {
        self.electrode_of_edge
            .iter()
            .flatten()
            .map(|&l| l + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn is_tagged(&self) -> bool {
        self.electrode_of_edge.iter().any(Option::is_some)
    }

    pub(crate) fn with_tags(mut self, tags: Vec<Option<usize>>) -> Self {
        assert_eq!(tags.len(), self.boundary.len());
        self.electrode_of_edge = tags;
        self
    }

    pub fn elements(&self) -> &[Element] {
        self.elements.get_or_init(|| {
            self.triangles
                .iter()
                .map(|t| {
                    let [p0, p1, p2] = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
                    let area2 = 2.0 * signed_area(p0, p1, p2);
                    let grads = [
                        [(p1[1] - p2[1]) / area2, (p2[0] - p1[0]) / area2],
                        [(p2[1] - p0[1]) / area2, (p0[0] - p2[0]) / area2],
                        [(p0[1] - p1[1]) / area2, (p1[0] - p0[0]) / area2],
                    ];
                    Element {
                        area: 0.5 * area2,
                        grads,
                    }
                })
                .collect()
        })
    }

    /// Node-to-node adjacency through shared triangles (excluding the node itself).
    pub fn adjacency(&self) -> &[Vec<usize>] {
        self.adjacency.get_or_init(|| {
            let mut adj = vec![Vec::new(); self.nodes.len()];
            for t in &self.triangles {
                for a in 0..3 {
                    for b in 0..3 {
                        if a != b {
                            adj[t[a]].push(t[b]);
                        }
                    }
                }
            }
            for v in &mut adj {
                v.sort_unstable();
                v.dedup();
            }
            adj
        })
    }

    /// Checks `h_max / h_min <= bound`.
    pub fn ensure_quasi_uniform(&self, bound: f64) -> Result<()> {
        let q = mesh_quality(self).quasi_uniformity();
        if q > bound {
            return Err(Error::InvalidMesh(format!(
                "quasi-uniformity ratio {q:.3} exceeds bound {bound}"
            )));
        }
        Ok(())
    }

    /// Boundary parameter of a point on the boundary: polar angle in `[0, 2pi)`
    /// for a disk, arclength from the loop start for a polygon (`edge` is the
    /// boundary edge containing the point).
    pub(crate) fn boundary_parameter(&self, edge: usize, p: Point, cumulative: &[f64]) -> f64 {
        match self.domain {
            DomainKind::Disk { center, .. } => (p[1] - center[1]).atan2(p[0] - center[0]).rem_euclid(2.0 * PI),
            DomainKind::Polygon => {
                let (a, _) = self.edge_endpoints(edge);
                cumulative[edge] + dist(a, p)
            }
        }
    }

    /// Arclength at the start of each boundary edge.
    pub(crate) fn cumulative_arclength(&self) -> Vec<f64> {
        let mut acc = 0.0;
        (0..self.boundary.len())
            .map(|e| {
                let s = acc;
                acc += self.edge_length(e);
                s
            })
            .collect()
    }
}

/// Exact quality measures of `mesh`.
pub fn mesh_quality(mesh: &TriMesh) -> QualityReport {
    let mut min_angle = f64::INFINITY;
    let mut h_max: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut shape: f64 = 0.0;
    for t in mesh.triangles() {
        let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
        let len = [dist(p[1], p[2]), dist(p[2], p[0]), dist(p[0], p[1])];
        let area = signed_area(p[0], p[1], p[2]);
        for k in 0..3 {
            let (a, b, c) = (len[k], len[(k + 1) % 3], len[(k + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos());
        }
        let r_out = len[0] * len[1] * len[2] / (4.0 * area);
        let r_in = area / (0.5 * (len[0] + len[1] + len[2]));
        h_max = h_max.max(r_out);
        h_min = h_min.min(r_out);
        shape = shape.max(r_out / r_in);
    }
    QualityReport {
        min_angle,
        h_max,
        h_min,
        shape_regularity: shape,
        boundary_node_count: mesh.boundary().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_clockwise_triangle() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = TriMesh::new(nodes, vec![[0, 2, 1]], DomainKind::Polygon).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn single_triangle_boundary_is_a_loop() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let m = TriMesh::new(nodes, vec![[0, 1, 2]], DomainKind::Polygon).unwrap();
        assert_eq!(m.boundary().len(), 3);
        assert_eq!(m.boundary()[0].nodes, [0, 1]);
        assert_eq!(m.n_edges(), 3);
    }

    #[test]
    fn disk_domain_requires_nodes_on_circle() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 0.9]];
        let disk = DomainKind::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        };
        assert!(TriMesh::new(nodes, vec![[0, 1, 2]], disk).is_err());
    }

    #[test]
    fn quality_of_right_isoceles_square() {
        let m = generate_square_mesh(2).unwrap();
        let q = mesh_quality(&m);
        assert!((q.min_angle - PI / 4.0).abs() < 1e-14);
        assert!((q.quasi_uniformity() - 1.0).abs() < 1e-14);
        assert_eq!(q.boundary_node_count, 8);
        assert!((q.h_max - 0.5f64.sqrt() / 2.0 * 1.0).abs() < 1e-14);
    }

    #[test]
    fn element_gradients_reproduce_linear_functions() {
        let m = generate_disk_mesh(12).unwrap();
        for (t, el) in m.triangles().iter().zip(m.elements()) {
            let v = t.map(|i| 2.0 * m.nodes()[i][0] - 3.0 * m.nodes()[i][1] + 0.5);
            let g = el.gradient(v);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }
}
