use approx::assert_relative_eq;
use eitfem::forward::NodalField;
use eitfem::geometry::*;
use eitfem::mesh::{generate_disk_mesh, read_mesh, refine_uniform, write_mesh};
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn inscribed_polygon_closed_forms() {
    for n in [8, 16, 32, 64] {
        let r = geometry_report(&generate_disk_mesh(n).unwrap()).unwrap();
        let t = PI / n as f64;
        assert_relative_eq!(r.hausdorff, 1.0 - t.cos(), max_relative = 1e-10);
        assert_relative_eq!(r.normal_dev, t, max_relative = 1e-10);
        assert_relative_eq!(r.perimeter_gap, 2.0 * PI - 2.0 * n as f64 * t.sin(), max_relative = 1e-10);
    }
}

#[test]
fn crescent_area_matches_disk_minus_polygon() {
    for n in [8, 20, 48] {
        let m = generate_disk_mesh(n).unwrap();
        let polygon = 0.5 * n as f64 * (2.0 * PI / n as f64).sin();
        assert_relative_eq!(crescent_area(&m).unwrap(), PI - polygon, max_relative = 1e-12);
    }
}

#[test]
fn extension_survives_mesh_round_trip() {
    let m = refine_uniform(&generate_disk_mesh(12).unwrap()).unwrap();
    let back = read_mesh(&write_mesh(&m)).unwrap();
    let f = NodalField::new(m.nodes().iter().map(|p| p[0] - 2.0 * p[1]).collect()).unwrap();
    for x in [[0.1, 0.2], [0.0, 0.999], [-0.7, 0.7]] {
        assert_eq!(extend_field(&m, &f, x).unwrap(), extend_field(&back, &f, x).unwrap());
    }
}

proptest! {
    #[test]
    fn projection_is_nonexpansive_on_the_crescent(s1 in 0.0..1.0f64, t1 in 0.0..6.3f64, s2 in 0.0..1.0f64, t2 in 0.0..6.3f64) {
        let n = 10;
        let m = generate_disk_mesh(n).unwrap();
        // radius of the inscribed polygon in direction t, then a point between it and the circle
        let crescent = |s: f64, t: f64| {
            let w = 2.0 * PI / n as f64;
            let off = (t.rem_euclid(w) - 0.5 * w).abs();
            let rp = (PI / n as f64).cos() / off.cos();
            let r = rp + s * (1.0 - rp);
            [r * t.cos(), r * t.sin()]
        };
        let (x, y) = (crescent(s1, t1), crescent(s2, t2));
        let (px, _) = project_to_polygon(&m, x).unwrap();
        let (py, _) = project_to_polygon(&m, y).unwrap();
        let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        prop_assert!(d(px, py) <= d(x, y) + 1e-12);
    }

    #[test]
    fn extension_of_linear_field_is_exact_inside(r in 0.0..0.9f64, t in 0.0..6.3f64) {
        let m = generate_disk_mesh(16).unwrap();
        let f = NodalField::new(m.nodes().iter().map(|p| 3.0 * p[0] + p[1] - 1.0).collect()).unwrap();
        let x = [r * t.cos(), r * t.sin()];
        let v = extend_field(&m, &f, x).unwrap();
        prop_assert!((v - (3.0 * x[0] + x[1] - 1.0)).abs() < 1e-12);
    }
}
