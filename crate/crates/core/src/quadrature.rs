//! Gauss–Legendre rules on [-1, 1] and the three-point triangle rule.

/// Nodes and weights of the `n`-point Gauss–Legendre rule, `n` in 1..=5.
pub fn gauss_legendre(n: usize) -> &'static [(f64, f64)] {
    match n {
        1 => &[(0.0, 2.0)],
        2 => &[
            (-0.577_350_269_189_625_8, 1.0),
            (0.577_350_269_189_625_8, 1.0),
        ],
        3 => &[
            (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
            (0.0, 0.888_888_888_888_888_8),
            (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
        ],
        4 => &[
            (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
            (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
            (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        ],
        5 => &[
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ],
        _ => panic!("gauss_legendre: unsupported order {n}"),
    }
}

/// Integrates `f` over `[a, b]` with `n` points.
pub fn integrate_interval(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(n)
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Barycentric coordinates of the degree-2 three-point rule (edge-interior points),
/// each with weight 1/3 of the triangle area.
pub const TRIANGLE_3PT: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];
