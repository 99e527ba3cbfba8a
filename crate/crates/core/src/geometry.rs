//! Curved-boundary maps for inscribed-polygon meshes of a disk.
//!
//! `Omega_h` is the mesh polygon, `Gamma_h` its boundary and the crescent is
//! `Omega \ Omega_h`, a union of circular segments, one per boundary chord.
//! `project_to_polygon` is the closest-point map onto `Gamma_h`,
//! `normal_ray_map` pushes a chord point along the chord normal onto the
//! circle, and [`FieldExtension`] extends a P1 field to the whole disk by
//! composing with the projection in the crescent.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::forward::NodalField;
use crate::mesh::{dist, signed_area, DomainKind, Point, TriMesh};
use crate::quadrature::gauss_legendre;

/// Angular strips per chord in the crescent and arc quadratures.
pub const CRESCENT_STRIPS: usize = 8;
const GAUSS_POINTS: usize = 4;

fn disk_of(mesh: &TriMesh) -> Result<(Point, f64)> {
    match mesh.domain() {
        DomainKind::Disk { center, radius } => Ok((center, radius)),
        DomainKind::Polygon => Err(Error::UnsupportedDomain),
    }
}

/// A boundary chord with the circular segment it cuts off.
#[derive(Debug, Clone, Copy)]
struct Face {
    a: Point,
    b: Point,
    ia: usize,
    ib: usize,
    /// polar angle of `a`; `b` sits at `theta_a + angle`
    theta_a: f64,
    /// central angle subtended by the chord
    angle: f64,
    /// distance from the center to the chord line
    d: f64,
    /// outward unit normal
    normal: Point,
}

impl Face {
    fn theta_mid(&self) -> f64 {
        self.theta_a + 0.5 * self.angle
    }

    fn len(&self) -> f64 {
        dist(self.a, self.b)
    }

    /// Chord parameter in `[0, 1]` of the orthogonal projection of `x`.
    fn parameter(&self, x: Point) -> f64 {
        let ab = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let ax = [x[0] - self.a[0], x[1] - self.a[1]];
        (ax[0] * ab[0] + ax[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])
    }

    fn point_at(&self, s: f64) -> Point {
        [
            self.a[0] + s * (self.b[0] - self.a[0]),
            self.a[1] + s * (self.b[1] - self.a[1]),
        ]
    }

    fn segment_area(&self, r: f64) -> f64 {
        0.5 * r * r * (self.angle - self.angle.sin())
    }
}

fn faces(mesh: &TriMesh, center: Point, r: f64) -> Vec<Face> {
    (0..mesh.boundary().len())
        .map(|e| {
            let [ia, ib] = mesh.boundary()[e].nodes;
            let (a, b) = mesh.edge_endpoints(e);
            let len = dist(a, b);
            let angle = 2.0 * (0.5 * len / r).min(1.0).asin();
            let theta_a = (a[1] - center[1]).atan2(a[0] - center[0]);
            // domain on the left of a -> b, so the outward normal points right
            let normal = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            let d = (a[0] - center[0]) * normal[0] + (a[1] - center[1]) * normal[1];
            Face {
                a,
                b,
                ia,
                ib,
                theta_a,
                angle,
                d,
                normal,
            }
        })
        .collect()
}

fn check_in_disk(center: Point, r: f64, x: Point) -> Result<()> {
    if dist(center, x) > r * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain { x: x[0], y: x[1] });
    }
    Ok(())
}

fn nearest_on_faces(faces: &[Face], x: Point) -> (Point, usize) {
    let mut best = (f64::INFINITY, [0.0; 2], 0);
    for (k, f) in faces.iter().enumerate() {
        let p = f.point_at(f.parameter(x).clamp(0.0, 1.0));
        let dd = dist(p, x);
        // strict comparison keeps the lower face index on ties
        if dd < best.0 {
            best = (dd, p, k);
        }
    }
    (best.1, best.2)
}

/// Closest point of `Gamma_h` to `x` and the index of its boundary edge.
pub fn project_to_polygon(mesh: &TriMesh, x: Point) -> Result<(Point, usize)> {
    let (center, r) = disk_of(mesh)?;
    check_in_disk(center, r, x)?;
    Ok(nearest_on_faces(&faces(mesh, center, r), x))
}

/// Intersection of the outward normal ray from `x_h` (interior to a boundary
/// edge) with the circle.
pub fn normal_ray_map(mesh: &TriMesh, x_h: Point) -> Result<Point> {
    let (center, r) = disk_of(mesh)?;
    let tol = 1e-12 * r;
    let all = faces(mesh, center, r);
    for f in &all {
        let s = f.parameter(x_h);
        let foot = f.point_at(s);
        if dist(foot, x_h) > tol || !(-1e-12..=1.0 + 1e-12).contains(&s) {
            continue;
        }
        if dist(x_h, f.a) <= tol || dist(x_h, f.b) <= tol {
            return Err(Error::AmbiguousNormal { x: x_h[0], y: x_h[1] });
        }
        return Ok(ray_to_circle(center, r, f, x_h));
    }
    Err(Error::invalid(format!("point ({}, {}) is not on the polygon boundary", x_h[0], x_h[1])))
}

fn ray_to_circle(center: Point, r: f64, f: &Face, x: Point) -> Point {
    let y = [x[0] - center[0], x[1] - center[1]];
    let yn = y[0] * f.normal[0] + y[1] * f.normal[1];
    let yy = y[0] * y[0] + y[1] * y[1];
    let t = -yn + (yn * yn - yy + r * r).max(0.0).sqrt();
    [x[0] + t * f.normal[0], x[1] + t * f.normal[1]]
}

/// Geometric errors of the polygonal boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub n_boundary: usize,
    pub h: f64,
    /// Hausdorff distance between circle and polygon
    pub hausdorff: f64,
    /// largest angle between the circle normal and the normal of the chord it projects to
    pub normal_dev: f64,
    pub perimeter_gap: f64,
    /// largest ratio of segment area to the area of the triangle owning its chord
    pub eps_h: f64,
    /// per electrode: arc length of the mapped electrode minus its chord length
    pub electrode_measure_gaps: Vec<f64>,
}

impl GeometryReport {
    pub const CSV_HEADER: &'static str = "n_boundary,h,hausdorff,normal_dev,perimeter_gap,eps_h";

    pub fn csv_row(&self) -> String {
        use crate::fmt_f64 as f;
        format!(
            "{},{},{},{},{},{}",
            self.n_boundary,
            f(self.h),
            f(self.hausdorff),
            f(self.normal_dev),
            f(self.perimeter_gap),
            f(self.eps_h)
        )
    }
}

pub fn geometry_report(mesh: &TriMesh) -> Result<GeometryReport> {
    let (center, r) = disk_of(mesh)?;
    let all = faces(mesh, center, r);
    let elements = mesh.elements();
    let mut report = GeometryReport {
        n_boundary: all.len(),
        h: mesh.h(),
        hausdorff: 0.0,
        normal_dev: 0.0,
        perimeter_gap: 2.0 * PI * r - mesh.perimeter(),
        eps_h: 0.0,
        electrode_measure_gaps: vec![0.0; mesh.electrode_count()],
    };
    for (e, f) in all.iter().enumerate() {
        report.hausdorff = report.hausdorff.max(r - f.d);
        report.normal_dev = report.normal_dev.max(0.5 * f.angle);
        let owner = elements[mesh.boundary()[e].triangle].area;
        report.eps_h = report.eps_h.max(f.segment_area(r) / owner);
        if let Some(l) = mesh.electrode_of_edge()[e] {
            report.electrode_measure_gaps[l] += r * f.angle - f.len();
        }
    }
    Ok(report)
}

/// Bucket grid over triangle bounding boxes.
#[derive(Debug, Clone)]
pub struct PointLocator {
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in mesh.nodes() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).max(1);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE);
        let dims = [
            ((hi[0] - lo[0]) / cell) as usize + 1,
            ((hi[1] - lo[1]) / cell) as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        let clampi = |v: f64, k: usize| ((v - lo[k]) / cell).floor().clamp(0.0, (dims[k] - 1) as f64) as usize;
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let ps = tri.map(|i| mesh.nodes()[i]);
            let (x0, x1) = (
                ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
                ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
                ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
            );
            for j in clampi(y0, 1)..=clampi(y1, 1) {
                for i in clampi(x0, 0)..=clampi(x1, 0) {
                    buckets[j * dims[0] + i].push(t);
                }
            }
        }
        Self {
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    /// Triangle containing `x` (closed, up to 1e-12 in barycentric
    /// coordinates) and the barycentric coordinates of `x` in it.
    pub fn locate(&self, mesh: &TriMesh, x: Point) -> Option<(usize, [f64; 3])> {
        let fi = (x[0] - self.origin[0]) / self.cell;
        let fj = (x[1] - self.origin[1]) / self.cell;
        let slack = 1e-9;
        if fi < -slack || fj < -slack || fi > self.dims[0] as f64 + slack || fj > self.dims[1] as f64 + slack {
            return None;
        }
        let i = (fi.floor().max(0.0) as usize).min(self.dims[0] - 1);
        let j = (fj.floor().max(0.0) as usize).min(self.dims[1] - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let [a, b, c] = mesh.triangles()[t].map(|v| mesh.nodes()[v]);
            let area = signed_area(a, b, c);
            let bary = [
                signed_area(x, b, c) / area,
                signed_area(a, x, c) / area,
                signed_area(a, b, x) / area,
            ];
            let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((t, bary));
            }
            if worst >= -1e-12 && best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((t, bary, worst));
            }
        }
        best.map(|(t, bary, _)| (t, bary))
    }
}

/// Extension of a P1 field from `Omega_h` to the closure of the domain.
#[derive(Debug, Clone)]
pub struct FieldExtension<'a> {
    mesh: &'a TriMesh,
    values: &'a [f64],
    locator: PointLocator,
    faces: Option<(Point, f64, Vec<Face>)>,
}

impl<'a> FieldExtension<'a> {
    pub fn new(mesh: &'a TriMesh, field: &'a NodalField) -> Result<Self> {
        Self::from_values(mesh, field.values())
    }

    pub fn from_values(mesh: &'a TriMesh, values: &'a [f64]) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::invalid("field length does not match mesh"));
        }
        let faces = match mesh.domain() {
            DomainKind::Disk { center, radius } => Some((center, radius, faces(mesh, center, radius))),
            DomainKind::Polygon => None,
        };
        Ok(Self {
            mesh,
            values,
            locator: PointLocator::new(mesh),
            faces,
        })
    }

    /// P1 interpolant inside `Omega_h`; value at the projection onto `Gamma_h` in the crescent.
    pub fn eval(&self, x: Point) -> Result<f64> {
        if let Some((t, bary)) = self.locator.locate(self.mesh, x) {
            let tri = self.mesh.triangles()[t];
            return Ok((0..3).map(|k| bary[k] * self.values[tri[k]]).sum());
        }
        let Some((center, r, faces)) = &self.faces else {
            return Err(Error::OutOfDomain { x: x[0], y: x[1] });
        };
        check_in_disk(*center, *r, x)?;
        let (_, k) = nearest_on_faces(faces, x);
        Ok(self.on_face(&faces[k], x))
    }

    fn on_face(&self, f: &Face, x: Point) -> f64 {
        let s = f.parameter(x).clamp(0.0, 1.0);
        (1.0 - s) * self.values[f.ia] + s * self.values[f.ib]
    }
}

/// Evaluates the extension of `field` at one point. Builds a point locator
/// per call; use [`FieldExtension`] for repeated queries.
pub fn extend_field(mesh: &TriMesh, field: &NodalField, x: Point) -> Result<f64> {
    FieldExtension::new(mesh, field)?.eval(x)
}

/// A quadrature point in the crescent, with the boundary edge it projects to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrescentPoint {
    pub x: Point,
    pub weight: f64,
    pub face: usize,
}

/// Polar tensor Gauss rule on every circular segment: the chord's angular
/// range is cut into [`CRESCENT_STRIPS`] strips, each with a 4x4 rule in
/// (angle, radius) running from the chord to the circle.
pub fn crescent_quadrature(mesh: &TriMesh) -> Result<Vec<CrescentPoint>> {
    let (center, r) = disk_of(mesh)?;
    let rule = gauss_legendre(GAUSS_POINTS);
    let all = faces(mesh, center, r);
    let mut out = Vec::with_capacity(all.len() * CRESCENT_STRIPS * GAUSS_POINTS * GAUSS_POINTS);
    for (k, f) in all.iter().enumerate() {
        let width = f.angle / CRESCENT_STRIPS as f64;
        for strip in 0..CRESCENT_STRIPS {
            let mid = f.theta_a + (strip as f64 + 0.5) * width;
            for &(xi, wt) in rule {
                let th = mid + 0.5 * width * xi;
                let rho0 = f.d / (th - f.theta_mid()).cos();
                let (s, c) = th.sin_cos();
                for &(eta, wr) in rule {
                    let rho = 0.5 * (rho0 + r) + 0.5 * (r - rho0) * eta;
                    out.push(CrescentPoint {
                        x: [center[0] + rho * c, center[1] + rho * s],
                        weight: 0.25 * width * wt * (r - rho0) * wr * rho,
                        face: k,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The two parts of a crescent `W^{1,p}` norm of an extended field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrescentIntegrals {
    /// `∫ |ȷf|^p`, by quadrature
    pub value: f64,
    /// `∫ |∇ȷf|^p`; the gradient is constant on each segment, so this is exact
    pub gradient: f64,
}

pub fn crescent_integrals(mesh: &TriMesh, field: &NodalField, p: f64) -> Result<CrescentIntegrals> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("exponent p = {p} must be at least 1")));
    }
    if field.len() != mesh.n_nodes() {
        return Err(Error::invalid("field length does not match mesh"));
    }
    let (center, r) = disk_of(mesh)?;
    let all = faces(mesh, center, r);
    let v = field.values();
    let value = crescent_quadrature(mesh)?
        .iter()
        .map(|q| {
            let f = &all[q.face];
            let s = f.parameter(q.x).clamp(0.0, 1.0);
            q.weight * ((1.0 - s) * v[f.ia] + s * v[f.ib]).abs().powf(p)
        })
        .sum();
    let gradient = crescent_gradient_integral(mesh, field, |g| g.powf(p))?;
    Ok(CrescentIntegrals { value, gradient })
}

/// `∫ F(|∇ȷf|)` over the crescent. The extension is constant along chord
/// normals, so its gradient on each segment is the constant tangential slope
/// of the chord and the integral is exact.
pub fn crescent_gradient_integral(mesh: &TriMesh, field: &NodalField, f: impl Fn(f64) -> f64) -> Result<f64> {
    if field.len() != mesh.n_nodes() {
        return Err(Error::invalid("field length does not match mesh"));
    }
    let (center, r) = disk_of(mesh)?;
    let v = field.values();
    Ok(faces(mesh, center, r)
        .iter()
        .map(|face| f((v[face.ib] - v[face.ia]).abs() / face.len()) * face.segment_area(r))
        .sum())
}

/// `‖ȷ field‖_{W^{1,p}(Omega \ Omega_h)}`.
pub fn crescent_norm(mesh: &TriMesh, field: &NodalField, p: f64) -> Result<f64> {
    let c = crescent_integrals(mesh, field, p)?;
    Ok((c.value + c.gradient).powf(1.0 / p))
}

/// Area of `Omega \ Omega_h`, exact.
pub fn crescent_area(mesh: &TriMesh) -> Result<f64> {
    let (center, r) = disk_of(mesh)?;
    Ok(faces(mesh, center, r).iter().map(|f| f.segment_area(r)).sum())
}

/// `|∫_{e_h} f ds - ∫_{psi_h(e_h)} ȷf ds|` for electrode `electrode`, where
/// `e_h` is its set of tagged edges.
pub fn boundary_integral_gap(mesh: &TriMesh, field: &NodalField, electrode: usize) -> Result<f64> {
    let (center, r) = disk_of(mesh)?;
    if field.len() != mesh.n_nodes() {
        return Err(Error::invalid("field length does not match mesh"));
    }
    let edges = mesh.electrode_edges(electrode);
    if edges.is_empty() {
        return Err(Error::ElectrodeUnresolved { electrode });
    }
    let all = faces(mesh, center, r);
    let v = field.values();
    let rule = gauss_legendre(GAUSS_POINTS);
    let mut chord = 0.0;
    let mut arc = 0.0;
    for e in edges {
        let f = &all[e];
        let (fa, fb) = (v[f.ia], v[f.ib]);
        chord += f.len() * 0.5 * (fa + fb);
        let width = f.angle / CRESCENT_STRIPS as f64;
        for strip in 0..CRESCENT_STRIPS {
            let mid = f.theta_a + (strip as f64 + 0.5) * width;
            for &(xi, w) in rule {
                let th = mid + 0.5 * width * xi;
                let x = [center[0] + r * th.cos(), center[1] + r * th.sin()];
                let s = f.parameter(x).clamp(0.0, 1.0);
                arc += 0.5 * width * w * r * ((1.0 - s) * fa + s * fb);
            }
        }
    }
    Ok((chord - arc).abs())
}

/// `∫_{e_h} |f| ds` over the tagged edges of `electrode`, exact for P1 `f`.
pub fn electrode_l1(mesh: &TriMesh, field: &NodalField, electrode: usize) -> f64 {
    let v = field.values();
    mesh.electrode_edges(electrode)
        .into_iter()
        .map(|e| {
            let [i, j] = mesh.boundary()[e].nodes;
            let (a, b) = (v[i], v[j]);
            let len = mesh.edge_length(e);
            if a * b >= 0.0 {
                0.5 * len * (a + b).abs()
            } else {
                0.5 * len * (a * a + b * b) / (a.abs() + b.abs())
            }
        })
        .sum()
}

/// CSV table of several reports.
pub fn geometry_reports_csv(reports: &[GeometryReport]) -> String {
    let mut s = String::from(GeometryReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}
