use std::collections::HashMap;
use std::f64::consts::PI;

use super::{DomainKind, Point, TriMesh, DEFAULT_QUASI_UNIFORM_BOUND};
use crate::error::{Error, Result};

/// Uniform `n x n` grid on the unit square, every cell split along the same diagonal.
pub fn generate_square_mesh(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::invalid("square mesh needs at least one subdivision"));
    }
    let step = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * step, j as f64 * step]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh::new(nodes, triangles, DomainKind::Polygon)
}

/// Inscribed-polygon mesh of the unit disk with `n_boundary` boundary vertices.
pub fn generate_disk_mesh(n_boundary: usize) -> Result<TriMesh> {
    generate_disk_mesh_with([0.0, 0.0], 1.0, n_boundary)
}

/// Concentric-ring triangulation of the disk `|x - center| < radius`. Boundary
/// vertices sit at angles `2 pi k / n_boundary`; ring counts keep radial and
/// tangential spacing comparable.
pub fn generate_disk_mesh_with(center: Point, radius: f64, n_boundary: usize) -> Result<TriMesh> {
    if n_boundary < 8 {
        return Err(Error::invalid(format!(
            "disk mesh needs at least 8 boundary vertices, got {n_boundary}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("disk radius must be positive"));
    }
    let n = n_boundary;
    let rings = ((n as f64) / (2.0 * PI)).round().max(1.0) as usize;
    let counts: Vec<usize> = (1..=rings)
        .map(|k| {
            if k == rings {
                n
            } else {
                ((n * k) as f64 / rings as f64).round().max(6.0) as usize
            }
        })
        .collect();

    let mut nodes = vec![center];
    let mut ring_start = Vec::with_capacity(rings);
    let mut offsets = Vec::with_capacity(rings);
    for (k, &m) in counts.iter().enumerate() {
        let r = radius * (k + 1) as f64 / rings as f64;
        // boundary ring starts at angle 0; inner rings are shifted half a step
        let offset = if k + 1 == rings { 0.0 } else { PI / m as f64 };
        ring_start.push(nodes.len());
        offsets.push(offset);
        for j in 0..m {
            let th = offset + 2.0 * PI * j as f64 / m as f64;
            let (s, c) = th.sin_cos();
            if k + 1 == rings {
                nodes.push([center[0] + radius * c, center[1] + radius * s]);
            } else {
                nodes.push([center[0] + r * c, center[1] + r * s]);
            }
        }
    }

    let mut triangles = Vec::new();
    let m0 = counts[0];
    for j in 0..m0 {
        triangles.push([0, ring_start[0] + j, ring_start[0] + (j + 1) % m0]);
    }
    for k in 1..rings {
        let (p, q) = (counts[k - 1], counts[k]);
        let (si, so) = (ring_start[k - 1], ring_start[k]);
        let inner = |i: usize| offsets[k - 1] + 2.0 * PI * i as f64 / p as f64;
        let outer = |j: usize| offsets[k] + 2.0 * PI * j as f64 / q as f64;
        // zipper between rings, advancing whichever side has the smaller next mid-angle
        let (mut i, mut j) = (0, 0);
        // align: start from the outer vertex just below the inner start angle
        while outer(j + 1) <= inner(0) {
            j += 1;
        }
        let (i_end, j_end) = (p, j + q);
        while i < i_end || j < j_end {
            let advance_outer = if i == i_end {
                true
            } else if j == j_end {
                false
            } else {
                // ties go to the inner ring; the tolerance keeps that choice
                // independent of rounding, so meshes with even ring counts are
                // point-symmetric
                0.5 * (outer(j) + outer(j + 1)) < 0.5 * (inner(i) + inner(i + 1)) - 1e-9
            };
            let vi = si + i % p;
            let vo = so + j % q;
            if advance_outer {
                triangles.push([vi, vo, so + (j + 1) % q]);
                j += 1;
            } else {
                triangles.push([vi, vo, si + (i + 1) % p]);
                i += 1;
            }
        }
    }

    let mesh = TriMesh::new(nodes, triangles, DomainKind::Disk { center, radius })?;
    mesh.ensure_quasi_uniform(DEFAULT_QUASI_UNIFORM_BOUND)?;
    Ok(mesh)
}

/// Red refinement: every triangle is split into four through its edge midpoints.
/// On a disk, boundary midpoints are pushed radially onto the circle. Electrode
/// tags are inherited by both halves of a tagged edge.
pub fn refine_uniform(mesh: &TriMesh) -> Result<TriMesh> {
    let mut nodes = mesh.nodes().to_vec();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let boundary_tag: HashMap<(usize, usize), Option<usize>> = mesh
        .boundary()
        .iter()
        .zip(mesh.electrode_of_edge())
        .map(|(e, &tag)| ((e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])), tag))
        .collect();

    let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (pa, pb) = (nodes[a], nodes[b]);
            let mut m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if let (DomainKind::Disk { center, radius }, true) =
                (mesh.domain(), boundary_tag.contains_key(&key))
            {
                let d = [m[0] - center[0], m[1] - center[1]];
                let r = d[0].hypot(d[1]);
                m = [center[0] + radius * d[0] / r, center[1] + radius * d[1] / r];
            }
            nodes.push(m);
            nodes.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for &[a, b, c] in mesh.triangles() {
        let ab = mid(a, b, &mut nodes);
        let bc = mid(b, c, &mut nodes);
        let ca = mid(c, a, &mut nodes);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }

    let parent_of_mid: HashMap<usize, Option<usize>> = boundary_tag
        .iter()
        .map(|(key, &tag)| (midpoint[key], tag))
        .collect();

    let refined = TriMesh::new(nodes, triangles, mesh.domain())?;
    let tags = refined
        .boundary()
        .iter()
        .map(|e| {
            parent_of_mid
                .get(&e.nodes[0])
                .or_else(|| parent_of_mid.get(&e.nodes[1]))
                .copied()
                .flatten()
        })
        .collect();
    Ok(refined.with_tags(tags))
}
