//! Shared helpers for the integration tests: an independent dense CEM solver
//! and random admissible inputs.
#![allow(dead_code)]

use eitfem::forward::{CurrentPattern, NodalField};
use eitfem::mesh::{ElectrodeConfig, TriMesh};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Dense bordered solve of the CEM in `(u, U, mu)`: the full block matrix plus
/// one Lagrange multiplier enforcing `sum U = 0`. Assembled from the mesh
/// geometry, not from the library's system.
pub fn dense_cem_solve(
    mesh: &TriMesh,
    sigma: &[f64],
    electrodes: &ElectrodeConfig,
    currents: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = mesh.n_nodes();
    let l = electrodes.len();
    let dim = n + l + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for t in mesh.triangles() {
        let p = t.map(|i| mesh.nodes()[i]);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = 0.5 * det.abs();
        // gradient of the barycentric coordinate opposite to edge (b, c)
        let grad = |k: usize| {
            let (b, c) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det]
        };
        let s = (sigma[t[0]] + sigma[t[1]] + sigma[t[2]]) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (grad(i), grad(j));
                a[(t[i], t[j])] += s * area * (gi[0] * gj[0] + gi[1] * gj[1]);
            }
        }
    }
    for (e, tag) in mesh.electrode_of_edge().iter().enumerate() {
        let Some(el) = *tag else { continue };
        let [i, j] = mesh.boundary()[e].nodes;
        let (pa, pb) = (mesh.nodes()[i], mesh.nodes()[j]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let z = electrodes.impedances()[el];
        a[(i, i)] += len / 3.0 / z;
        a[(j, j)] += len / 3.0 / z;
        a[(i, j)] += len / 6.0 / z;
        a[(j, i)] += len / 6.0 / z;
        for k in [i, j] {
            a[(k, n + el)] -= len / 2.0 / z;
            a[(n + el, k)] -= len / 2.0 / z;
        }
        a[(n + el, n + el)] += len / z;
    }
    for k in 0..l {
        a[(n + k, n + l)] = 1.0;
        a[(n + l, n + k)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(dim);
    for (k, c) in currents.iter().enumerate() {
        rhs[n + k] = *c;
    }
    let x = a.lu().solve(&rhs).expect("dense CEM system is singular");
    (x.rows(0, n).iter().copied().collect(), x.rows(n, l).iter().copied().collect())
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// Uniform nodal values in `[lo, hi]`, carrying bounds `lambda`.
pub fn random_sigma(mesh: &TriMesh, lambda: f64, lo: f64, hi: f64, rng: &mut impl Rng) -> NodalField {
    let v = (0..mesh.n_nodes()).map(|_| rng.random_range(lo..=hi)).collect();
    NodalField::admissible(v, lambda).unwrap()
}

pub fn random_pattern(l: usize, rng: &mut impl Rng) -> CurrentPattern {
    CurrentPattern::zero_mean((0..l).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_direction(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn is_nonincreasing(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] <= w[0])
}

pub fn is_strictly_decreasing(h: &[f64]) -> bool {
    h.windows(2).all(|w| w[1] < w[0])
}

/// Relative mismatch between the central difference of `f` along `d` and `⟨grad, d⟩`.
pub fn directional_fd_error(f: impl Fn(&[f64]) -> f64, grad: &[f64], x: &[f64], d: &[f64], h: f64) -> f64 {
    let shifted = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    let fd = (f(&shifted(h)) - f(&shifted(-h))) / (2.0 * h);
    let exact: f64 = grad.iter().zip(d).map(|(g, v)| g * v).sum();
    (fd - exact).abs() / exact.abs().max(fd.abs()).max(f64::MIN_POSITIVE)
}
