mod common;

use common::*;
use eitfem::forward::{adjacent_dipoles, forward_map, NodalField};
use eitfem::lab::{generate_data, DomainSpec, GroundTruth, TruthKind};
use eitfem::mesh::{generate_disk_mesh, generate_square_mesh, tag_electrodes, ElectrodeConfig, TriMesh};
use eitfem::tikhonov::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 0.1;

fn meshes() -> Vec<(TriMesh, ElectrodeConfig)> {
    let sq = ElectrodeConfig::uniform(8, 0.5, 4.0, 0.1).unwrap();
    let dk = ElectrodeConfig::uniform_disk(8, 0.5, 0.1).unwrap();
    vec![
        (tag_electrodes(&generate_square_mesh(4).unwrap(), &sq).unwrap(), sq),
        (tag_electrodes(&generate_disk_mesh(16).unwrap(), &dk).unwrap(), dk),
    ]
}

#[test]
fn fit_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let patterns = adjacent_dipoles(8, 7).unwrap();
    let cfg = TikhonovConfig::new(0.0, Penalty::H1, LAMBDA).unwrap();
    for (mesh, el) in meshes() {
        let truth = random_sigma(&mesh, LAMBDA, 0.5, 2.0, &mut rng);
        let data = forward_map(&mesh, &truth, &el, &patterns).unwrap();
        for _ in 0..10 {
            let sigma = random_sigma(&mesh, LAMBDA, 0.3, 3.0, &mut rng);
            let d = random_direction(mesh.n_nodes(), &mut rng);
            let g = fit_gradient_adjoint(&mesh, &sigma, &el, &patterns, &data).unwrap();
            let fit = |x: &[f64]| {
                let s = NodalField::admissible(x.to_vec(), LAMBDA).unwrap();
                objective(&mesh, &s, &el, &patterns, &data, &cfg).unwrap().fit
            };
            let err = directional_fd_error(fit, g.values(), sigma.values(), &d, 1e-5);
            assert!(err < 1e-5, "relative error {err}");
        }
    }
}

#[test]
fn penalty_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (mesh, _) in meshes() {
        for penalty in [Penalty::H1, Penalty::tv_default(LAMBDA), Penalty::Tv { eps: 0.1 }] {
            for _ in 0..10 {
                let sigma = random_sigma(&mesh, LAMBDA, 0.3, 3.0, &mut rng);
                let d = random_direction(mesh.n_nodes(), &mut rng);
                let g = penalty_gradient(&mesh, &sigma, &penalty).unwrap();
                let f = |x: &[f64]| penalty_value(&mesh, &NodalField::new(x.to_vec()).unwrap(), &penalty).unwrap();
                let err = directional_fd_error(f, g.values(), sigma.values(), &d, 1e-5);
                assert!(err < 1e-5, "{penalty:?}: relative error {err}");
            }
        }
    }
}

#[test]
fn tv_smoothing_gap_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (mesh, _) in meshes() {
        for _ in 0..10 {
            let sigma = random_sigma(&mesh, LAMBDA, 0.1, 10.0, &mut rng);
            let exact = penalty_tv(&mesh, &sigma, 0.0).unwrap();
            let mut last = exact;
            for eps in [1e-4, 1e-2, 1.0, 100.0] {
                let smooth = penalty_tv(&mesh, &sigma, eps).unwrap();
                assert!((smooth - exact).abs() <= eps * mesh.area());
                // the smoothed value shrinks as eps grows
                assert!(smooth <= last);
                last = smooth;
            }
        }
    }
}

#[test]
fn exact_data_terms() {
    let (mesh, el) = meshes().remove(1);
    let patterns = adjacent_dipoles(8, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let sigma = random_sigma(&mesh, LAMBDA, 0.5, 2.0, &mut rng);
    let data = forward_map(&mesh, &sigma, &el, &patterns).unwrap();
    let cfg = TikhonovConfig::new(0.3, Penalty::H1, LAMBDA).unwrap();
    let v = objective(&mesh, &sigma, &el, &patterns, &data, &cfg).unwrap();
    assert!(v.fit < 1e-24);
    assert!((v.j - 0.3 * penalty_h1(&mesh, &sigma).unwrap()).abs() < 1e-12);

    let one = NodalField::admissible(vec![1.0; mesh.n_nodes()], LAMBDA).unwrap();
    let zero_alpha = TikhonovConfig::new(0.0, Penalty::tv_default(LAMBDA), LAMBDA).unwrap();
    let a = objective(&mesh, &one, &el, &patterns, &data, &zero_alpha).unwrap();
    let b = objective(&mesh, &one, &el, &patterns, &data, &zero_alpha).unwrap();
    assert_eq!(a.j, a.fit);
    assert_eq!(a.j.to_bits(), b.j.to_bits());
}

#[test]
fn data_consistent_start_is_stationary() {
    let (mesh, el) = meshes().remove(0);
    let patterns = adjacent_dipoles(8, 7).unwrap();
    let one = NodalField::constant(mesh.n_nodes(), 1.0);
    let data = forward_map(&mesh, &one, &el, &patterns).unwrap();
    let cfg = TikhonovConfig::new(0.0, Penalty::H1, LAMBDA).unwrap();
    let r = reconstruct(&mesh, &el, &patterns, &data, &cfg).unwrap();
    assert_eq!(r.iterations, 0);
    assert!(r.converged);
    assert!(r.fit_term < 1e-24);

    let cfg = TikhonovConfig { max_iters: 30, ..TikhonovConfig::new(1e-2, Penalty::H1, LAMBDA).unwrap() };
    let r = reconstruct(&mesh, &el, &patterns, &data, &cfg).unwrap();
    let h = r.objective_history();
    assert!(is_nonincreasing(&h));
    assert!(r.objective() <= h[0]);
}

#[test]
fn penalty_is_monotone_in_alpha() {
    let (mesh, el) = meshes().remove(0);
    let patterns = adjacent_dipoles(8, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let truth = random_sigma(&mesh, LAMBDA, 0.5, 2.0, &mut rng);
    let data = forward_map(&mesh, &truth, &el, &patterns).unwrap();
    for penalty in [Penalty::H1, Penalty::Tv { eps: 1e-2 }] {
        let penalties: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&alpha| {
                let cfg = TikhonovConfig {
                    max_iters: 2000,
                    tol: 1e-10,
                    ..TikhonovConfig::new(alpha, penalty, LAMBDA).unwrap()
                };
                let r = reconstruct(&mesh, &el, &patterns, &data, &cfg).unwrap();
                assert!(is_nonincreasing(&r.objective_history()));
                r.penalty_term
            })
            .collect();
        assert!(is_nonincreasing(&penalties), "{penalty:?}: {penalties:?}");
    }
}

#[test]
fn disk_inclusion_is_located() {
    let el = ElectrodeConfig::uniform_disk(8, 0.5, 0.1).unwrap();
    let patterns = adjacent_dipoles(8, 7).unwrap();
    let (center, radius) = ([0.4, 0.2], 0.3);
    let truth = GroundTruth {
        kind: TruthKind::Inclusion { center, radius, amplitude: 0.8 },
        background: 1.0,
    };
    let levels = DomainSpec::Disk { n_boundary: 16 }.level_meshes(&el, 2).unwrap();
    let data = generate_data(&truth, &levels[2], 2, &el, &patterns, LAMBDA, 0.01, 7).unwrap();
    data.check_inversion_level(1).unwrap();
    let cfg = TikhonovConfig {
        max_iters: 300,
        ..TikhonovConfig::new(1e-3, Penalty::H1, LAMBDA).unwrap()
    };
    let mesh = &levels[1];
    let r = reconstruct(mesh, &el, &patterns, &data.voltages, &cfg).unwrap();
    let first = r.history[0].fit;
    assert!(r.fit_term * 10.0 <= first, "fit {} from {first}", r.fit_term);
    let s = r.sigma_star.values();
    let argmax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
    let p = mesh.nodes()[argmax];
    assert!((p[0] - center[0]).hypot(p[1] - center[1]) <= radius, "argmax at {p:?}");
}
