//! Synthetic data and refinement studies.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{assemble_system, forward_map, forward_map_with, CurrentPattern, NodalField};
use crate::geometry::{crescent_gradient_integral, crescent_integrals, crescent_quadrature, geometry_report, FieldExtension};
use crate::mesh::{
    generate_disk_mesh, generate_square_mesh, refine_uniform, tag_electrodes, ElectrodeConfig, Point, TriMesh,
};
use crate::quadrature::TRIANGLE_3PT;
use crate::tikhonov::{penalty_value, reconstruct, Penalty, ReconstructionResult, TikhonovConfig};

/// Shape of a synthetic conductivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthKind {
    Constant,
    /// `amplitude` added on the closed disk `|x - center| <= radius`
    Inclusion { center: Point, radius: f64, amplitude: f64 },
    /// `amplitude * exp(-|x - center|² / width²)`
    Bump { center: Point, width: f64, amplitude: f64 },
}

/// `background + kind(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub kind: TruthKind,
    pub background: f64,
}

impl GroundTruth {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: TruthKind::Constant,
            background: value,
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        let d2 = |c: Point| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        self.background
            + match self.kind {
                TruthKind::Constant => 0.0,
                TruthKind::Inclusion { center, radius, amplitude } => {
                    if d2(center) <= radius * radius {
                        amplitude
                    } else {
                        0.0
                    }
                }
                TruthKind::Bump { center, width, amplitude } => amplitude * (-d2(center) / (width * width)).exp(),
            }
    }

    /// Checks that every value lies strictly inside `(lambda, 1/lambda)`.
    pub fn validate(&self, lambda: f64) -> Result<()> {
        let (lo, hi) = match self.kind {
            TruthKind::Constant => (self.background, self.background),
            TruthKind::Inclusion { radius, amplitude, .. } | TruthKind::Bump { width: radius, amplitude, .. } => {
                if !(radius > 0.0) {
                    return Err(Error::invalid("inclusion radius and bump width must be positive"));
                }
                let b = self.background;
                (b.min(b + amplitude), b.max(b + amplitude))
            }
        };
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::invalid(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        if !(lo > lambda && hi < 1.0 / lambda) {
            return Err(Error::invalid(format!(
                "ground truth range [{lo}, {hi}] is not strictly inside ({lambda}, {})",
                1.0 / lambda
            )));
        }
        Ok(())
    }

    /// Nodal samples as an admissible conductivity.
    pub fn sample(&self, mesh: &TriMesh, lambda: f64) -> Result<NodalField> {
        self.validate(lambda)?;
        NodalField::admissible(mesh.nodes().iter().map(|&p| self.eval(p)).collect(), lambda)
    }
}

/// Noisy electrode voltages, `voltages[p][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub voltages: Vec<Vec<f64>>,
    pub noise_level: f64,
    pub seed: u64,
    /// refinement level of the mesh the data were simulated on
    pub data_level: usize,
    pub n_data_nodes: usize,
    pub patterns: Vec<CurrentPattern>,
}

impl DataSet {
    /// Refuses inversion on a mesh that is not strictly coarser than the data mesh.
    pub fn check_inversion_level(&self, level: usize) -> Result<()> {
        if level >= self.data_level {
            return Err(Error::invalid(format!(
                "inverse crime: inversion level {level} is not coarser than data level {}",
                self.data_level
            )));
        }
        Ok(())
    }
}

/// Simulates voltages for `truth` on `data_mesh` and adds relative Gaussian
/// noise `delta ‖U‖_F G / ‖G‖_F`, then re-centers every column.
pub fn generate_data(
    truth: &GroundTruth,
    data_mesh: &TriMesh,
    data_level: usize,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    lambda: f64,
    delta: f64,
    seed: u64,
) -> Result<DataSet> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("noise level {delta} must be nonnegative")));
    }
    let sigma = truth.sample(data_mesh, lambda)?;
    let mut voltages = forward_map(data_mesh, &sigma, electrodes, patterns)?;
    if delta > 0.0 {
        let noise = noise_matrix(&voltages, seed);
        let scale = delta * frobenius(&voltages) / frobenius(&noise);
        for (col, g) in voltages.iter_mut().zip(&noise) {
            col.iter_mut().zip(g).for_each(|(u, n)| *u += scale * n);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.iter_mut().for_each(|u| *u -= mean);
        }
    }
    Ok(DataSet {
        voltages,
        noise_level: delta,
        seed,
        data_level,
        n_data_nodes: data_mesh.n_nodes(),
        patterns: patterns.to_vec(),
    })
}

/// Standard normal matrix shaped like `like`, drawn pattern by pattern.
pub fn noise_matrix(like: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    like.iter()
        .map(|col| col.iter().map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

pub fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn frobenius_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-gap and least-squares convergence rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    /// `log(e_k / e_{k+1}) / log(h_k / h_{k+1})`
    pub per_gap: Vec<f64>,
    /// slope of `log e` against `log h`
    pub least_squares: f64,
}

pub fn estimate_rate(errors: &[f64], hs: &[f64]) -> Result<RateEstimate> {
    if errors.len() < 2 || errors.len() != hs.len() {
        return Err(Error::invalid("need at least two (error, h) pairs of equal length"));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::invalid(format!("error {e} must be positive")));
    }
    if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::invalid(format!("mesh size {h} must be positive")));
    }
    let per_gap = errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("mesh sizes must not all be equal"));
    }
    Ok(RateEstimate {
        per_gap,
        least_squares: sxy / sxx,
    })
}

/// One row of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub n_nodes: usize,
    pub error: f64,
    pub runtime_s: f64,
}

/// Per-level table of a study, written as CSV
/// `level,h,n_nodes,error,rate,runtime_s[,extra columns]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub kind: String,
    pub rows: Vec<StudyRow>,
    /// extra named columns, one value per row
    pub extra: Vec<(String, Vec<Option<f64>>)>,
}

impl StudyReport {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            rows: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn hs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    /// `rates()[k]` compares rows `k - 1` and `k`; undefined for the first row
    /// or when an error is not positive.
    pub fn rates(&self) -> Vec<Option<f64>> {
        rates_of(&self.errors(), &self.hs())
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Least-squares rate of `error` against `h`.
    pub fn fitted_rate(&self) -> Result<f64> {
        estimate_rate(&self.errors(), &self.hs()).map(|r| r.least_squares)
    }

    /// CSV text. Wall-clock times vary from run to run, so the `runtime_s`
    /// column is left empty unless `with_runtime` is set.
    pub fn to_csv(&self, with_runtime: bool) -> String {
        use crate::fmt_f64 as f;
        let mut s = String::from("level,h,n_nodes,error,rate,runtime_s");
        for (name, _) in &self.extra {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        let rates = self.rates();
        for (k, row) in self.rows.iter().enumerate() {
            let rate = rates[k].map(f).unwrap_or_default();
            let rt = if with_runtime { f(row.runtime_s) } else { String::new() };
            let _ = write!(s, "{},{},{},{},{},{}", row.level, f(row.h), row.n_nodes, f(row.error), rate, rt);
            for (_, col) in &self.extra {
                let _ = write!(s, ",{}", col[k].map(f).unwrap_or_default());
            }
            s.push('\n');
        }
        s
    }
}

fn rates_of(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for k in 1..errors.len() {
        out.push(
            estimate_rate(&errors[k - 1..=k], &hs[k - 1..=k])
                .ok()
                .map(|r| r.per_gap[0]),
        );
    }
    out.truncate(errors.len());
    out
}

/// Base domain of a refinement family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainSpec {
    /// unit square with `n` subdivisions per side
    Square { n: usize },
    /// inscribed polygon of the unit disk with `n_boundary` vertices
    Disk { n_boundary: usize },
}

impl DomainSpec {
    pub fn base_mesh(&self) -> Result<TriMesh> {
        match *self {
            DomainSpec::Square { n } => generate_square_mesh(n),
            DomainSpec::Disk { n_boundary } => generate_disk_mesh(n_boundary),
        }
    }

    /// Tagged meshes for levels `0..=levels`, each the uniform refinement of the previous.
    pub fn level_meshes(&self, electrodes: &ElectrodeConfig, levels: usize) -> Result<Vec<TriMesh>> {
        let mut meshes = vec![tag_electrodes(&self.base_mesh()?, electrodes)?];
        for _ in 0..levels {
            let next = refine_uniform(meshes.last().unwrap())?;
            meshes.push(next);
        }
        Ok(meshes)
    }
}

/// Voltages on levels `0..=levels` against the finest level. Reports levels `0..levels`.
pub fn forward_convergence_study(
    domain: &DomainSpec,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    sigma: &GroundTruth,
    lambda: f64,
    levels: usize,
) -> Result<StudyReport> {
    if levels < 2 {
        return Err(Error::invalid("a forward study needs at least 2 refinements"));
    }
    let meshes = domain.level_meshes(electrodes, levels)?;
    let solved: Vec<(Vec<Vec<f64>>, f64)> = meshes
        .par_iter()
        .map(|m| {
            let start = Instant::now();
            let s = sigma.sample(m, lambda)?;
            let v = forward_map(m, &s, electrodes, patterns)?;
            Ok((v, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let reference = &solved[levels].0;
    let mut report = StudyReport::new("forward");
    for (k, (m, (v, t))) in meshes.iter().zip(&solved).enumerate().take(levels) {
        report.rows.push(StudyRow {
            level: k,
            h: m.h(),
            n_nodes: m.n_nodes(),
            error: frobenius_diff(v, reference),
            runtime_s: *t,
        });
    }
    Ok(report)
}

/// `‖U(sigma + t rho) - U(sigma)‖_F` along a ladder of amplitudes `t`; the
/// `h` column holds `t`.
pub fn continuity_probe(
    mesh: &TriMesh,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    sigma: &NodalField,
    rho: &[f64],
    amplitudes: &[f64],
) -> Result<StudyReport> {
    if rho.len() != mesh.n_nodes() || sigma.len() != mesh.n_nodes() {
        return Err(Error::invalid("perturbation length does not match mesh"));
    }
    let lambda = sigma
        .bounds()
        .ok_or_else(|| Error::invalid("the base conductivity needs admissibility bounds"))?
        .lambda();
    let perturbed = amplitudes
        .iter()
        .map(|&t| {
            let v = sigma.values().iter().zip(rho).map(|(s, r)| s + t * r).collect();
            NodalField::admissible(v, lambda)
                .map_err(|e| Error::invalid(format!("perturbation with t = {t} is inadmissible: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let base_system = assemble_system(mesh, sigma, electrodes)?;
    let base = forward_map_with(&base_system, patterns)?;
    let mut report = StudyReport::new("continuity");
    for (k, (t, s)) in amplitudes.iter().zip(&perturbed).enumerate() {
        let start = Instant::now();
        let v = forward_map(mesh, s, electrodes, patterns)?;
        report.rows.push(StudyRow {
            level: k,
            h: *t,
            n_nodes: mesh.n_nodes(),
            error: frobenius_diff(&v, &base),
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

/// `∫_Omega |ȷa - ȷb|` by quadrature on `fine` (three-point rule per
/// triangle, plus the crescent rule on a disk).
pub fn l1_distance_on(fine: &TriMesh, a: &FieldExtension<'_>, b: &FieldExtension<'_>) -> Result<f64> {
    let mut total = 0.0;
    for (t, el) in fine.triangles().iter().zip(fine.elements()) {
        let p = t.map(|i| fine.nodes()[i]);
        for bary in TRIANGLE_3PT {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            total += el.area / 3.0 * (a.eval(x)? - b.eval(x)?).abs();
        }
    }
    if fine.domain() != crate::mesh::DomainKind::Polygon {
        for q in crescent_quadrature(fine)? {
            total += q.weight * (a.eval(q.x)? - b.eval(q.x)?).abs();
        }
    }
    Ok(total)
}

/// `Psi(ȷsigma) - Psi_h(sigma)`: the penalty carried by the crescent (zero on polygons).
pub fn penalty_crescent_gap(mesh: &TriMesh, sigma: &NodalField, penalty: &Penalty) -> Result<f64> {
    if mesh.domain() == crate::mesh::DomainKind::Polygon {
        return Ok(0.0);
    }
    match *penalty {
        Penalty::H1 => {
            let c = crescent_integrals(mesh, sigma, 2.0)?;
            Ok(0.5 * (c.value + c.gradient))
        }
        Penalty::Tv { eps } => {
            crescent_gradient_integral(mesh, sigma, |g| g * g / ((g * g + eps * eps).sqrt() + eps).max(f64::MIN_POSITIVE))
        }
    }
}

/// Outcome of a minimizer study: the table and the per-level reconstructions.
#[derive(Debug, Clone)]
pub struct MinimizerStudy {
    pub report: StudyReport,
    pub reconstructions: Vec<ReconstructionResult>,
    pub meshes: Vec<TriMesh>,
}

/// Reconstructs on levels `0..=levels` from common data and reports the `L¹`
/// distance of each level's minimizer to the finest one. Extra columns:
/// `J`, `penalty`, `penalty_gap`, `iterations`, `stationarity`.
pub fn minimizer_convergence_study(
    domain: &DomainSpec,
    electrodes: &ElectrodeConfig,
    data: &DataSet,
    config: &TikhonovConfig,
    levels: usize,
) -> Result<MinimizerStudy> {
    data.check_inversion_level(levels)?;
    let meshes = domain.level_meshes(electrodes, levels)?;
    let runs: Vec<(ReconstructionResult, f64)> = meshes
        .par_iter()
        .map(|m| {
            let start = Instant::now();
            let r = reconstruct(m, electrodes, &data.patterns, &data.voltages, config)?;
            Ok((r, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<_>>()?;
    let fine = &meshes[levels];
    let fine_ext = FieldExtension::new(fine, &runs[levels].0.sigma_star)?;
    let mut report = StudyReport::new("minimizer");
    let mut cols: [Vec<Option<f64>>; 5] = Default::default();
    for (k, (m, (r, t))) in meshes.iter().zip(&runs).enumerate() {
        let ext = FieldExtension::new(m, &r.sigma_star)?;
        let error = if k == levels { 0.0 } else { l1_distance_on(fine, &ext, &fine_ext)? };
        report.rows.push(StudyRow {
            level: k,
            h: m.h(),
            n_nodes: m.n_nodes(),
            error,
            runtime_s: *t,
        });
        cols[0].push(Some(r.objective()));
        cols[1].push(Some(penalty_value(m, &r.sigma_star, &config.penalty)?));
        cols[2].push(Some(penalty_crescent_gap(m, &r.sigma_star, &config.penalty)?));
        cols[3].push(Some(r.iterations as f64));
        cols[4].push(r.history.last().map(|h| h.stationarity));
    }
    for (name, col) in ["J", "penalty", "penalty_gap", "iterations", "stationarity"]
        .into_iter()
        .zip(cols)
    {
        report.extra.push((name.to_string(), col));
    }
    Ok(MinimizerStudy {
        report,
        reconstructions: runs.into_iter().map(|(r, _)| r).collect(),
        meshes,
    })
}

/// Geometric errors of inscribed `n`-gons. `h = 2 sin(pi / n)` is the chord
/// length; the `error` column is the Hausdorff distance and the remaining
/// quantities are extra columns with their own per-gap rates.
pub fn geometry_rate_study(n_list: &[usize]) -> Result<StudyReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] < 8 {
        return Err(Error::invalid("n_list must be increasing with every entry at least 8"));
    }
    let reports = n_list
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let g = geometry_report(&generate_disk_mesh(n)?)?;
            Ok((g, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = n_list
        .iter()
        .map(|&n| 2.0 * (std::f64::consts::PI / n as f64).sin())
        .collect();
    let mut report = StudyReport::new("geometry");
    for (k, ((g, t), &h)) in reports.iter().zip(&hs).enumerate() {
        report.rows.push(StudyRow {
            level: k,
            h,
            n_nodes: g.n_boundary,
            error: g.hausdorff,
            runtime_s: *t,
        });
    }
    let quantities: [(&str, fn(&crate::geometry::GeometryReport) -> f64); 3] = [
        ("normal_dev", |g| g.normal_dev),
        ("perimeter_gap", |g| g.perimeter_gap),
        ("eps_h", |g| g.eps_h),
    ];
    for (name, get) in quantities {
        let values: Vec<f64> = reports.iter().map(|(g, _)| get(g)).collect();
        report
            .extra
            .push((name.to_string(), values.iter().map(|&v| Some(v)).collect()));
        report.extra.push((format!("{name}_rate"), rates_of(&values, &hs)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::adjacent_dipoles;

    #[test]
    fn rate_examples() {
        let r = estimate_rate(&[4.0, 1.0], &[2.0, 1.0]).unwrap();
        assert!((r.per_gap[0] - 2.0).abs() < 1e-15);
        let r = estimate_rate(&[1.0, 1.0], &[2.0, 1.0]).unwrap();
        assert_eq!(r.per_gap[0], 0.0);
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let es: Vec<f64> = hs.iter().map(|h: &f64| h.powf(1.5)).collect();
        let r = estimate_rate(&es, &hs).unwrap();
        assert!((r.least_squares - 1.5).abs() < 1e-12);
        assert!(estimate_rate(&[1.0, 0.0], &[2.0, 1.0]).is_err());
        assert!(estimate_rate(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn ground_truth_bounds() {
        let t = GroundTruth {
            kind: TruthKind::Inclusion {
                center: [0.3, 0.0],
                radius: 0.2,
                amplitude: 0.8,
            },
            background: 1.0,
        };
        assert!(t.validate(0.1).is_ok());
        assert_eq!(t.eval([0.3, 0.1]), 1.8);
        assert_eq!(t.eval([-0.3, 0.1]), 1.0);
        assert!(GroundTruth::constant(10.0).validate(0.1).is_err());
        assert!(GroundTruth::constant(0.1).validate(0.1).is_err());
    }

    #[test]
    fn noise_model() {
        let cfg = ElectrodeConfig::uniform_disk(6, 0.5, 0.1).unwrap();
        let m = tag_electrodes(&generate_disk_mesh(24).unwrap(), &cfg).unwrap();
        let pats = adjacent_dipoles(6, 5).unwrap();
        let truth = GroundTruth::constant(1.0);
        let clean = generate_data(&truth, &m, 1, &cfg, &pats, 0.1, 0.0, 9).unwrap();
        let exact = forward_map(&m, &truth.sample(&m, 0.1).unwrap(), &cfg, &pats).unwrap();
        assert_eq!(clean.voltages, exact);
        let a = generate_data(&truth, &m, 1, &cfg, &pats, 0.1, 0.01, 9).unwrap();
        let b = generate_data(&truth, &m, 1, &cfg, &pats, 0.1, 0.01, 9).unwrap();
        assert_eq!(a, b);
        for col in &a.voltages {
            assert!(col.iter().sum::<f64>().abs() < 1e-12 * frobenius(&a.voltages));
        }
        // before re-centering the perturbation has relative size delta exactly
        let g = noise_matrix(&exact, 9);
        let scale = 0.01 * frobenius(&exact) / frobenius(&g);
        let raw: Vec<Vec<f64>> = exact
            .iter()
            .zip(&g)
            .map(|(u, n)| u.iter().zip(n).map(|(a, b)| a + scale * b).collect())
            .collect();
        assert!((frobenius_diff(&raw, &exact) / frobenius(&exact) - 0.01).abs() < 1e-12);
        assert!(generate_data(&truth, &m, 1, &cfg, &pats, 0.1, -0.1, 9).is_err());
        assert!(a.check_inversion_level(1).is_err());
        assert!(a.check_inversion_level(0).is_ok());
    }

    #[test]
    fn csv_layout() {
        let mut r = StudyReport::new("x");
        for (k, (h, e)) in [(0.5, 0.4), (0.25, 0.1)].into_iter().enumerate() {
            r.rows.push(StudyRow {
                level: k,
                h,
                n_nodes: 10 * (k + 1),
                error: e,
                runtime_s: 1.5,
            });
        }
        r.extra.push(("J".into(), vec![Some(1.0), None]));
        let csv = r.to_csv(false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,h,n_nodes,error,rate,runtime_s,J");
        assert!(lines[1].ends_with(",,,1.0000000000000000e0"));
        assert!(lines[2].contains(",2.0000000000000000e0,,"));
        assert!(r.to_csv(true).contains("1.5000000000000000e0"));
    }

    #[test]
    fn geometry_study_rates() {
        let r = geometry_rate_study(&[16, 32, 64, 128]).unwrap();
        assert!((r.fitted_rate().unwrap() - 2.0).abs() < 0.1);
        for rate in r.rates().into_iter().flatten() {
            assert!((rate - 2.0).abs() < 0.1);
        }
        assert!(geometry_rate_study(&[16, 8]).is_err());
    }
}
