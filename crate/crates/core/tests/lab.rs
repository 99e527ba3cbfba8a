mod common;

use common::*;
use eitfem::forward::{adjacent_dipoles, NodalField};
use eitfem::geometry::FieldExtension;
use eitfem::lab::*;
use eitfem::mesh::ElectrodeConfig;
use eitfem::tikhonov::{Penalty, TikhonovConfig};

fn disk_setup() -> (DomainSpec, ElectrodeConfig) {
    (
        DomainSpec::Disk { n_boundary: 16 },
        ElectrodeConfig::uniform_disk(8, 0.5, 0.1).unwrap(),
    )
}

#[test]
fn constant_conductivity_converges_on_the_square() {
    let el = ElectrodeConfig::uniform(8, 0.5, 4.0, 0.1).unwrap();
    let pats = adjacent_dipoles(8, 7).unwrap();
    let r = forward_convergence_study(&DomainSpec::Square { n: 4 }, &el, &pats, &GroundTruth::constant(1.0), 0.1, 3)
        .unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(is_strictly_decreasing(&r.errors()));
    assert!(forward_convergence_study(&DomainSpec::Square { n: 4 }, &el, &pats, &GroundTruth::constant(1.0), 0.1, 1).is_err());
}

#[test]
fn continuity_probe_at_zero_amplitude() {
    let (dom, el) = disk_setup();
    let mesh = &dom.level_meshes(&el, 0).unwrap()[0];
    let pats = adjacent_dipoles(8, 3).unwrap();
    let sigma = NodalField::admissible(vec![1.0; mesh.n_nodes()], 0.1).unwrap();
    let rho: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
    let r = continuity_probe(mesh, &el, &pats, &sigma, &rho, &[0.0, 0.5]).unwrap();
    assert_eq!(r.errors()[0], 0.0);
    assert!(r.errors()[1] > 0.0);
    // sigma + 20 x leaves the box
    assert!(continuity_probe(mesh, &el, &pats, &sigma, &rho, &[20.0]).is_err());
}

#[test]
fn distance_of_a_field_to_itself_is_zero() {
    let (dom, el) = disk_setup();
    let meshes = dom.level_meshes(&el, 1).unwrap();
    let coarse = &meshes[0];
    let v: Vec<f64> = coarse.nodes().iter().map(|p| 1.0 + p[0] * p[1]).collect();
    let a = FieldExtension::from_values(coarse, &v).unwrap();
    let b = FieldExtension::from_values(coarse, &v).unwrap();
    assert_eq!(l1_distance_on(&meshes[1], &a, &b).unwrap(), 0.0);
}

#[test]
fn inverse_crime_is_refused() {
    let (dom, el) = disk_setup();
    let pats = adjacent_dipoles(8, 7).unwrap();
    let meshes = dom.level_meshes(&el, 1).unwrap();
    let data = generate_data(&GroundTruth::constant(1.0), &meshes[1], 1, &el, &pats, 0.1, 0.01, 1).unwrap();
    let cfg = TikhonovConfig::new(1e-2, Penalty::H1, 0.1).unwrap();
    assert!(minimizer_convergence_study(&dom, &el, &data, &cfg, 1).is_err());
    assert!(data.check_inversion_level(0).is_ok());
}

#[test]
fn studies_are_reproducible() {
    let (dom, el) = disk_setup();
    let pats = adjacent_dipoles(8, 7).unwrap();
    let truth = GroundTruth {
        kind: TruthKind::Inclusion { center: [0.3, -0.2], radius: 0.4, amplitude: 0.5 },
        background: 1.0,
    };
    let meshes = dom.level_meshes(&el, 2).unwrap();
    let run = || {
        let data = generate_data(&truth, &meshes[2], 2, &el, &pats, 0.1, 0.01, 99).unwrap();
        let cfg = TikhonovConfig {
            max_iters: 20,
            ..TikhonovConfig::new(1e-2, Penalty::Tv { eps: 1e-2 }, 0.1).unwrap()
        };
        let m = minimizer_convergence_study(&dom, &el, &data, &cfg, 1).unwrap();
        let f = forward_convergence_study(&dom, &el, &pats, &truth, 0.1, 2).unwrap();
        (data.voltages, m.report.to_csv(false), f.to_csv(false))
    };
    let (a, b) = (run(), run());
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    let bits = |v: &[Vec<f64>]| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.0), bits(&b.0));
}

#[test]
fn different_seeds_give_different_noise() {
    let (dom, el) = disk_setup();
    let pats = adjacent_dipoles(8, 7).unwrap();
    let mesh = &dom.level_meshes(&el, 0).unwrap()[0];
    let t = GroundTruth::constant(1.0);
    let a = generate_data(&t, mesh, 1, &el, &pats, 0.1, 0.05, 1).unwrap();
    let b = generate_data(&t, mesh, 1, &el, &pats, 0.1, 0.05, 2).unwrap();
    let clean = generate_data(&t, mesh, 1, &el, &pats, 0.1, 0.0, 1).unwrap();
    assert_ne!(a.voltages, b.voltages);
    let diff: Vec<Vec<f64>> = a
        .voltages
        .iter()
        .zip(&clean.voltages)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect();
    // re-centering can only shrink the noise
    assert!(frobenius(&diff) <= 0.05 * frobenius(&clean.voltages) * (1.0 + 1e-12));
}
