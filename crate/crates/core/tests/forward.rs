mod common;

use common::*;
use eitfem::forward::*;
use eitfem::mesh::{generate_disk_mesh, generate_square_mesh, tag_electrodes, ElectrodeConfig, TriMesh};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> (TriMesh, ElectrodeConfig) {
    let el = ElectrodeConfig::uniform(4, 0.5, 4.0, 0.2).unwrap();
    (tag_electrodes(&generate_square_mesh(n).unwrap(), &el).unwrap(), el)
}

fn disk(n: usize, l: usize) -> (TriMesh, ElectrodeConfig) {
    let el = ElectrodeConfig::uniform_disk(l, 0.5, 0.1).unwrap();
    (tag_electrodes(&generate_disk_mesh(n).unwrap(), &el).unwrap(), el)
}

#[test]
fn matches_dense_bordered_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (mesh, el) in [square(4), disk(12, 4)] {
        assert!(mesh.n_nodes() + el.len() <= 50);
        for _ in 0..5 {
            let sigma = random_sigma(&mesh, 0.1, 0.2, 5.0, &mut rng);
            let pattern = random_pattern(el.len(), &mut rng);
            let sys = assemble_system(&mesh, &sigma, &el).unwrap();
            let sol = solve_forward(&sys, &pattern).unwrap();
            let (u, v) = dense_cem_solve(&mesh, sigma.values(), &el, pattern.values());
            assert!(rel_diff(sol.u.values(), &u) < 1e-10);
            assert!(rel_diff(&sol.voltages, &v) < 1e-10);
            assert!(rel_diff(&electrode_currents(&sys, &sol), pattern.values()) < 1e-9);
        }
    }
}

#[test]
fn scaling_sigma_and_impedance() {
    let (mesh, el) = disk(16, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sigma = random_sigma(&mesh, 0.1, 0.5, 2.0, &mut rng);
    let doubled = NodalField::new(sigma.values().iter().map(|s| 2.0 * s).collect()).unwrap();
    let pattern = random_pattern(6, &mut rng);
    let a = solve_forward(&assemble_system(&mesh, &sigma, &el).unwrap(), &pattern).unwrap();
    let half_z = el.scaled_impedances(0.5).unwrap();
    let b = solve_forward(&assemble_system(&mesh, &doubled, &half_z).unwrap(), &pattern).unwrap();
    let half_u: Vec<f64> = a.u.values().iter().map(|x| 0.5 * x).collect();
    let half_v: Vec<f64> = a.voltages.iter().map(|x| 0.5 * x).collect();
    assert!(rel_diff(b.u.values(), &half_u) < 1e-10);
    assert!(rel_diff(&b.voltages, &half_v) < 1e-10);
}

/// Every node of `mesh` has its mirror image `-x` among the nodes.
fn is_point_symmetric(mesh: &TriMesh) -> bool {
    mesh.nodes()
        .iter()
        .all(|p| mesh.nodes().iter().any(|q| (p[0] + q[0]).abs() < 1e-12 && (p[1] + q[1]).abs() < 1e-12))
}

#[test]
fn antipodal_dipole_is_antisymmetric() {
    // ring counts 6, 12, 18, 24 are all even, so the mesh is point-symmetric
    let el = ElectrodeConfig::uniform_disk(8, 0.6, 0.1).unwrap();
    let mesh = tag_electrodes(&generate_disk_mesh(24).unwrap(), &el).unwrap();
    assert!(is_point_symmetric(&mesh));
    // sigma(-x) = sigma(x)
    let sigma = NodalField::new(mesh.nodes().iter().map(|p| 1.0 + 0.5 * p[0] * p[0] + 0.3 * p[0] * p[1]).collect()).unwrap();
    let pattern = CurrentPattern::new(vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0]).unwrap();
    let v = &forward_map(&mesh, &sigma, &el, &[pattern]).unwrap()[0];
    for k in 0..4 {
        assert!((v[k] + v[k + 4]).abs() < 1e-9 * v[0].abs());
    }
}

#[test]
fn forward_map_is_linear_and_reciprocal() {
    let (mesh, el) = disk(16, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = random_sigma(&mesh, 0.1, 0.3, 3.0, &mut rng);
    let p = random_pattern(6, &mut rng);
    let q = random_pattern(6, &mut rng);
    let (a, b) = (1.7, -0.4);
    let combo = CurrentPattern::new(p.values().iter().zip(q.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
    let v = forward_map(&mesh, &sigma, &el, &[p.clone(), q.clone(), combo]).unwrap();
    let want: Vec<f64> = v[0].iter().zip(&v[1]).map(|(x, y)| a * x + b * y).collect();
    assert!(rel_diff(&v[2], &want) < 1e-9);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(s, t)| s * t).sum::<f64>();
    let (pq, qp) = (dot(&v[0], q.values()), dot(&v[1], p.values()));
    assert!((pq - qp).abs() < 1e-10 * pq.abs().max(1e-3));
}

#[test]
fn permuting_electrodes_permutes_voltages() {
    let (mesh, el) = disk(24, 6);
    let mesh_perm_el = el.permuted(&[2, 0, 5, 1, 4, 3]).unwrap();
    let perm = [2, 0, 5, 1, 4, 3];
    let mesh_p = tag_electrodes(&generate_disk_mesh(24).unwrap(), &mesh_perm_el).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sigma = random_sigma(&mesh, 0.1, 0.5, 2.0, &mut rng);
    let p = random_pattern(6, &mut rng);
    let permuted = CurrentPattern::new(perm.iter().map(|&k| p.values()[k]).collect()).unwrap();
    let v = &forward_map(&mesh, &sigma, &el, &[p]).unwrap()[0];
    let w = &forward_map(&mesh_p, &sigma, &mesh_perm_el, &[permuted]).unwrap()[0];
    for (l, &k) in perm.iter().enumerate() {
        assert!((w[l] - v[k]).abs() < 1e-12 * norm(v));
    }
}

#[test]
fn energy_norm_is_the_system_form_for_unit_coefficients() {
    let el = ElectrodeConfig::uniform_disk(5, 0.5, 1.0).unwrap();
    let mesh = tag_electrodes(&generate_disk_mesh(20).unwrap(), &el).unwrap();
    let sys = assemble_system(&mesh, &NodalField::constant(mesh.n_nodes(), 1.0), &el).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let u = random_direction(mesh.n_nodes(), &mut rng);
        let v = random_direction(5, &mut rng);
        let (top, bottom) = sys.apply_full(&u, &v);
        let form: f64 = top.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()
            + bottom.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        let e = energy_norm(&mesh, &el, &u, &v).unwrap();
        assert!((e * e - form).abs() < 1e-12 * form);
        // the energy norm is bounded by a multiple of the product norm
        assert!(e <= 3.0 * product_norm(&mesh, &u, &v));
    }
}

#[test]
fn solution_satisfies_full_block_residual() {
    let (mesh, el) = square(8);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sigma = random_sigma(&mesh, 0.1, 0.2, 5.0, &mut rng);
    let sys = assemble_system(&mesh, &sigma, &el).unwrap();
    for p in adjacent_dipoles(4, 3).unwrap() {
        let sol = solve_forward(&sys, &p).unwrap();
        let (top, bottom) = sys.apply_full(sol.u.values(), &sol.voltages);
        assert!(norm(&top) < 1e-10);
        assert!(rel_diff(&bottom, p.values()) < 1e-10);
        assert!(sol.voltages.iter().sum::<f64>().abs() < 1e-12);
    }
}
