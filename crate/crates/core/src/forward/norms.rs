//! Exact P1 norms.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{ElectrodeConfig, TriMesh};

/// Laplacian stiffness `∫ ∇phi_i·∇phi_j`.
pub fn stiffness_matrix(mesh: &TriMesh) -> CsrMatrix {
    let mut s = CsrMatrix::from_adjacency(mesh.adjacency());
    for (t, el) in mesh.triangles().iter().zip(mesh.elements()) {
        for a in 0..3 {
            for b in 0..3 {
                let g = el.grads[a][0] * el.grads[b][0] + el.grads[a][1] * el.grads[b][1];
                s.add(t[a], t[b], el.area * g);
            }
        }
    }
    s
}

/// Consistent mass `∫ phi_i phi_j`.
pub fn mass_matrix(mesh: &TriMesh) -> CsrMatrix {
    let mut m = CsrMatrix::from_adjacency(mesh.adjacency());
    for (t, el) in mesh.triangles().iter().zip(mesh.elements()) {
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 };
                m.add(t[a], t[b], el.area * w / 12.0);
            }
        }
    }
    m
}

/// Row sums of the mass matrix, `∫ phi_i`.
pub fn lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.n_nodes()];
    for (t, el) in mesh.triangles().iter().zip(mesh.elements()) {
        for &i in t {
            m[i] += el.area / 3.0;
        }
    }
    m
}

fn check_len(mesh: &TriMesh, v: &[f64]) {
    assert_eq!(v.len(), mesh.n_nodes(), "field length does not match mesh");
}

pub fn l2_norm(mesh: &TriMesh, v: &[f64]) -> f64 {
    check_len(mesh, v);
    mass_matrix(mesh).quadratic_form(v).max(0.0).sqrt()
}

pub fn h1_norm(mesh: &TriMesh, v: &[f64]) -> f64 {
    check_len(mesh, v);
    let grad = stiffness_matrix(mesh).quadratic_form(v);
    let mass = mass_matrix(mesh).quadratic_form(v);
    (grad + mass).max(0.0).sqrt()
}

/// `∫ |∇v|`
pub fn w11_seminorm(mesh: &TriMesh, v: &[f64]) -> f64 {
    check_len(mesh, v);
    mesh.triangles()
        .iter()
        .zip(mesh.elements())
        .map(|(t, el)| {
            let g = el.gradient([v[t[0]], v[t[1]], v[t[2]]]);
            el.area * g[0].hypot(g[1])
        })
        .sum()
}

/// `∫ |f|` for `f` linear on a triangle of area `area` with vertex values `v`.
pub(crate) fn abs_integral_linear(area: f64, v: [f64; 3]) -> f64 {
    let pos = v.iter().filter(|&&x| x > 0.0).count();
    let neg = v.iter().filter(|&&x| x < 0.0).count();
    let sum = v[0] + v[1] + v[2];
    if pos == 0 || neg == 0 {
        return area * sum.abs() / 3.0;
    }
    // one vertex is alone on its side of the zero line
    let (sign, lone) = if pos == 1 {
        (1.0, v.iter().position(|&x| x > 0.0).unwrap())
    } else {
        (-1.0, v.iter().position(|&x| x < 0.0).unwrap())
    };
    let a = sign * v[lone];
    let b = sign * v[(lone + 1) % 3];
    let c = sign * v[(lone + 2) % 3];
    2.0 * area * a * a * a / (3.0 * (a - b) * (a - c)) - area * sign * sum / 3.0
}

/// Exact `∫ |v|` for P1 `v`.
pub fn l1_norm(mesh: &TriMesh, v: &[f64]) -> f64 {
    check_len(mesh, v);
    mesh.triangles()
        .iter()
        .zip(mesh.elements())
        .map(|(t, el)| abs_integral_linear(el.area, [v[t[0]], v[t[1]], v[t[2]]]))
        .sum()
}

/// `(‖∇u‖² + Σ_l ‖u - U_l‖²_{L²(e_l)})^{1/2}`, exact for P1 `u`.
pub fn energy_norm(mesh: &TriMesh, electrodes: &ElectrodeConfig, u: &[f64], voltages: &[f64]) -> Result<f64> {
    if u.len() != mesh.n_nodes() || voltages.len() != electrodes.len() {
        return Err(Error::invalid("energy norm: inconsistent sizes"));
    }
    let mut total = stiffness_matrix(mesh).quadratic_form(u);
    for (e, tag) in mesh.electrode_of_edge().iter().enumerate() {
        let Some(l) = *tag else { continue };
        let [i, j] = mesh.boundary()[e].nodes;
        let (p, q) = (u[i] - voltages[l], u[j] - voltages[l]);
        total += mesh.edge_length(e) * (p * p + p * q + q * q) / 3.0;
    }
    Ok(total.max(0.0).sqrt())
}

/// Product norm `(‖u‖²_{H¹} + |U|²)^{1/2}`.
pub fn product_norm(mesh: &TriMesh, u: &[f64], voltages: &[f64]) -> f64 {
    let h1 = h1_norm(mesh, u);
    (h1 * h1 + voltages.iter().map(|v| v * v).sum::<f64>()).sqrt()
}
