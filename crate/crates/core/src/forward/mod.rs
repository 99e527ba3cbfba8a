//! P1 discretization of the complete electrode model.
//!
//! For conductivity `sigma`, contact impedances `z_l` and a zero-mean current
//! pattern `I`, the discrete problem is the block system
//!
//! ```text
//! [ K   B ] [u]   [0]
//! [ B^T D ] [U] = [I],     sum(U) = 0,
//! ```
//!
//! with `K = ∫ sigma ∇phi_i·∇phi_j + Σ_l z_l^-1 ∫_{e_l} phi_i phi_j`,
//! `B_il = -z_l^-1 ∫_{e_l} phi_i` and `D = diag(z_l^-1 |e_l|)`. The voltages
//! are eliminated through an orthonormal basis `Q` of the zero-mean subspace,
//! `U = Q y`, which leaves a symmetric positive definite system in `(u, y)`.

mod field;
mod norms;

pub use field::{adjacent_dipoles, Bounds, CurrentPattern, NodalField};
pub use norms::{
    energy_norm, h1_norm, l1_norm, l2_norm, lumped_mass, mass_matrix, product_norm, stiffness_matrix,
    w11_seminorm,
};

use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix, EnvelopeCholesky};
use crate::mesh::{ElectrodeConfig, TriMesh};

/// Largest reduced system factored directly; above this CG is used.
pub const DIRECT_SOLVER_MAX_NODES: usize = 20_000;

/// Relative residual of the full block system accepted by `solve_forward`.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Orthonormal basis of `{V in R^L : sum V = 0}` (Helmert columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMeanBasis {
    l: usize,
    /// column-major, `L x (L-1)`
    cols: Vec<Vec<f64>>,
}

impl ZeroMeanBasis {
    pub fn new(l: usize) -> Self {
        let cols = (1..l)
            .map(|k| {
                let s = 1.0 / ((k * (k + 1)) as f64).sqrt();
                let mut c = vec![0.0; l];
                c[..k].iter_mut().for_each(|v| *v = s);
                c[k] = -(k as f64) * s;
                c
            })
            .collect();
        Self { l, cols }
    }

    pub fn electrodes(&self) -> usize {
        self.l
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.cols[k]
    }

    /// `Q^T v`
    pub fn to_reduced(&self, v: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| linalg::dot(c, v)).collect()
    }

    /// `Q y`
    pub fn from_reduced(&self, y: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.l];
        for (c, &yk) in self.cols.iter().zip(y) {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += ci * yk;
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Direct factorization up to [`DIRECT_SOLVER_MAX_NODES`], CG beyond.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug)]
enum ReducedSolver {
    Direct(EnvelopeCholesky),
    Iterative { diagonal: Vec<f64> },
}

/// Assembled CEM block system for one conductivity.
#[derive(Debug)]
pub struct CemSystem {
    k: CsrMatrix,
    /// sparse columns of `B`, one per electrode
    b: Vec<Vec<(usize, f64)>>,
    d: Vec<f64>,
    basis: ZeroMeanBasis,
    /// sparse columns of `B Q`
    bq: Vec<Vec<(usize, f64)>>,
    /// `Q^T D Q`
    qdq: Vec<Vec<f64>>,
    solver_kind: SolverKind,
    solver: OnceLock<std::result::Result<ReducedSolver, Error>>,
}

/// Solution of one forward problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CemSolution {
    pub u: NodalField,
    pub voltages: Vec<f64>,
}

fn check_conductivity(mesh: &TriMesh, sigma: &NodalField) -> Result<()> {
    if sigma.len() != mesh.n_nodes() {
        return Err(Error::invalid(format!(
            "conductivity has {} values for {} nodes",
            sigma.len(),
            mesh.n_nodes()
        )));
    }
    match sigma.bounds() {
        Some(_) => sigma.check_admissible(),
        None => match sigma.values().iter().position(|&v| !(v > 0.0)) {
            Some(node) => Err(Error::InadmissibleConductivity {
                node,
                value: sigma.values()[node],
                lower: 0.0,
                upper: f64::INFINITY,
            }),
            None => Ok(()),
        },
    }
}

fn check_electrodes(mesh: &TriMesh, electrodes: &ElectrodeConfig) -> Result<()> {
    if mesh.electrode_count() > electrodes.len() {
        return Err(Error::invalid(format!(
            "mesh carries {} electrodes, configuration has {}",
            mesh.electrode_count(),
            electrodes.len()
        )));
    }
    for l in 0..electrodes.len() {
        if !mesh.electrode_of_edge().contains(&Some(l)) {
            return Err(Error::MissingElectrode { electrode: l });
        }
    }
    Ok(())
}

/// Assembles the block system. The element stiffness uses the mean of the
/// three vertex conductivities, which is exact for P1 `sigma`.
pub fn assemble_system(mesh: &TriMesh, sigma: &NodalField, electrodes: &ElectrodeConfig) -> Result<CemSystem> {
    check_conductivity(mesh, sigma)?;
    check_electrodes(mesh, electrodes)?;
    let l_count = electrodes.len();
    let mut k = CsrMatrix::from_adjacency(mesh.adjacency());
    let s = sigma.values();
    for (t, el) in mesh.triangles().iter().zip(mesh.elements()) {
        let mean = (s[t[0]] + s[t[1]] + s[t[2]]) / 3.0;
        for a in 0..3 {
            for b in 0..3 {
                let g = el.grads[a][0] * el.grads[b][0] + el.grads[a][1] * el.grads[b][1];
                k.add(t[a], t[b], mean * el.area * g);
            }
        }
    }
    let mut b = vec![Vec::new(); l_count];
    let mut d = vec![0.0; l_count];
    for (e, tag) in mesh.electrode_of_edge().iter().enumerate() {
        let Some(l) = *tag else { continue };
        let zinv = 1.0 / electrodes.impedances()[l];
        let [i, j] = mesh.boundary()[e].nodes;
        let len = mesh.edge_length(e);
        k.add(i, i, zinv * len / 3.0);
        k.add(j, j, zinv * len / 3.0);
        k.add(i, j, zinv * len / 6.0);
        k.add(j, i, zinv * len / 6.0);
        b[l].push((i, -zinv * len / 2.0));
        b[l].push((j, -zinv * len / 2.0));
        d[l] += zinv * len;
    }
    for col in &mut b {
        col.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
        for &(i, v) in col.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        *col = merged;
    }

    let basis = ZeroMeanBasis::new(l_count);
    let bq = (0..l_count - 1)
        .map(|kk| {
            let q = basis.column(kk);
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for (l, col) in b.iter().enumerate() {
                if q[l] == 0.0 {
                    continue;
                }
                acc.extend(col.iter().map(|&(i, v)| (i, v * q[l])));
            }
            acc.sort_by_key(|&(i, _)| i);
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (i, v) in acc {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += v,
                    _ => merged.push((i, v)),
                }
            }
            merged
        })
        .collect();
    let qdq = (0..l_count - 1)
        .map(|a| {
            (0..l_count - 1)
                .map(|c| {
                    (0..l_count)
                        .map(|l| basis.column(a)[l] * d[l] * basis.column(c)[l])
                        .sum()
                })
                .collect()
        })
        .collect();

    Ok(CemSystem {
        k,
        b,
        d,
        basis,
        bq,
        qdq,
        solver_kind: SolverKind::Auto,
        solver: OnceLock::new(),
    })
}

impl CemSystem {
    pub fn with_solver(mut self, kind: SolverKind) -> Self {
        self.solver_kind = kind;
        self.solver = OnceLock::new();
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.k.n()
    }

    pub fn n_electrodes(&self) -> usize {
        self.d.len()
    }

    /// The `K` block.
    pub fn k(&self) -> &CsrMatrix {
        &self.k
    }

    /// Entry `B_il`.
    pub fn b(&self, i: usize, l: usize) -> f64 {
        self.b[l].iter().find(|&&(j, _)| j == i).map_or(0.0, |&(_, v)| v)
    }

    pub fn b_column(&self, l: usize) -> &[(usize, f64)] {
        &self.b[l]
    }

    /// Diagonal of the `D` block: `z_l^-1 |e_l|`.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn zero_mean_basis(&self) -> &ZeroMeanBasis {
        &self.basis
    }

    /// Dense copy of the full `(N + L) x (N + L)` block matrix, row-major.
    pub fn full_block_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_nodes();
        let l = self.n_electrodes();
        let mut m = vec![vec![0.0; n + l]; n + l];
        for (i, row) in m.iter_mut().enumerate().take(n) {
            for (j, v) in self.k.row(i) {
                row[j] = v;
            }
        }
        for (ll, col) in self.b.iter().enumerate() {
            for &(i, v) in col {
                m[i][n + ll] = v;
                m[n + ll][i] = v;
            }
            m[n + ll][n + ll] = self.d[ll];
        }
        m
    }

    /// Full block product `[K B; B^T D] [u; U]`.
    pub fn apply_full(&self, u: &[f64], voltages: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = vec![0.0; self.n_nodes()];
        self.k.mul_vec(u, &mut top);
        let mut bottom = vec![0.0; self.n_electrodes()];
        for (l, col) in self.b.iter().enumerate() {
            for &(i, v) in col {
                top[i] += v * voltages[l];
                bottom[l] += v * u[i];
            }
            bottom[l] += self.d[l] * voltages[l];
        }
        (top, bottom)
    }

    fn apply_reduced(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n_nodes();
        let (u, y) = x.split_at(n);
        let (top, bottom) = out.split_at_mut(n);
        self.k.mul_vec(u, top);
        for (kk, col) in self.bq.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, v) in col {
                top[i] += v * y[kk];
                acc += v * u[i];
            }
            bottom[kk] = acc + self.qdq[kk].iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn reduced_solver(&self) -> Result<&ReducedSolver> {
        let solver = self.solver.get_or_init(|| {
            let n = self.n_nodes();
            let direct = match self.solver_kind {
                SolverKind::Auto => n <= DIRECT_SOLVER_MAX_NODES,
                SolverKind::Direct => true,
                SolverKind::ConjugateGradient => false,
            };
            let m = self.n_electrodes() - 1;
            if direct {
                let mut entries = Vec::with_capacity(self.k.nnz() / 2 + n + m * n);
                for i in 0..n {
                    entries.extend(self.k.row(i).filter(|&(j, _)| j <= i).map(|(j, v)| (i, j, v)));
                }
                for (kk, col) in self.bq.iter().enumerate() {
                    entries.extend(col.iter().map(|&(i, v)| (n + kk, i, v)));
                    for c in 0..=kk {
                        entries.push((n + kk, n + c, self.qdq[kk][c]));
                    }
                }
                let mut perm = linalg::reverse_cuthill_mckee(&adjacency_of(&self.k));
                perm.extend(n..n + m);
                EnvelopeCholesky::factor(n + m, &entries, perm)
                    .map(ReducedSolver::Direct)
                    .map_err(|e| Error::LinearSolverFailure {
                        residual: e.pivot,
                        iterations: 0,
                    })
            } else {
                let mut diagonal = self.k.diagonal();
                diagonal.extend((0..m).map(|kk| self.qdq[kk][kk]));
                Ok(ReducedSolver::Iterative { diagonal })
            }
        });
        solver.as_ref().map_err(|e| match e {
            Error::LinearSolverFailure { residual, iterations } => Error::LinearSolverFailure {
                residual: *residual,
                iterations: *iterations,
            },
            other => Error::InvalidArgument(other.to_string()),
        })
    }

    fn solve_reduced(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self.reduced_solver()? {
            ReducedSolver::Direct(chol) => Ok(chol.solve(rhs)),
            ReducedSolver::Iterative { diagonal } => {
                let max_iter = 10 * rhs.len();
                linalg::preconditioned_cg(|x, y| self.apply_reduced(x, y), diagonal, rhs, 1e-12, max_iter)
                    .map(|(x, _)| x)
                    .map_err(|stats| Error::LinearSolverFailure {
                        residual: stats.relative_residual,
                        iterations: stats.iterations,
                    })
            }
        }
    }

    /// Solves the reduced system with right-hand side `[0; Q^T rhs_electrodes]`
    /// and returns `(u, U)` with a full-system residual check.
    pub(crate) fn solve_electrode_rhs(&self, rhs_electrodes: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n_nodes();
        let scale = linalg::norm(rhs_electrodes);
        if scale == 0.0 {
            return Ok((vec![0.0; n], vec![0.0; self.n_electrodes()]));
        }
        let mut rhs = vec![0.0; n];
        rhs.extend(self.basis.to_reduced(rhs_electrodes));
        let mut x = self.solve_reduced(&rhs)?;
        let mut residual = f64::INFINITY;
        for _ in 0..3 {
            let (u, y) = x.split_at(n);
            let voltages = self.basis.from_reduced(y);
            let (top, bottom) = self.apply_full(u, &voltages);
            let r2: f64 = top.iter().map(|v| v * v).sum::<f64>()
                + bottom
                    .iter()
                    .zip(rhs_electrodes)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            residual = r2.sqrt() / scale;
            if residual <= RESIDUAL_TOL {
                return Ok((u.to_vec(), voltages));
            }
            // iterative refinement on the reduced system
            let mut ax = vec![0.0; rhs.len()];
            self.apply_reduced(&x, &mut ax);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(a, b)| a - b).collect();
            let dx = self.solve_reduced(&r)?;
            x.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        }
        Err(Error::LinearSolverFailure {
            residual,
            iterations: 3,
        })
    }
}

fn adjacency_of(k: &CsrMatrix) -> Vec<Vec<usize>> {
    (0..k.n())
        .map(|i| k.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect()
}

/// Solves the forward problem for one current pattern.
pub fn solve_forward(system: &CemSystem, pattern: &CurrentPattern) -> Result<CemSolution> {
    if pattern.len() != system.n_electrodes() {
        return Err(Error::invalid(format!(
            "pattern has {} entries for {} electrodes",
            pattern.len(),
            system.n_electrodes()
        )));
    }
    let (u, mut voltages) = system.solve_electrode_rhs(pattern.values())?;
    // the basis already enforces zero mean; remove rounding drift
    let mean = voltages.iter().sum::<f64>() / voltages.len() as f64;
    voltages.iter_mut().for_each(|v| *v -= mean);
    Ok(CemSolution {
        u: NodalField::new(u)?,
        voltages,
    })
}

/// Recovered electrode currents `z_l^-1 ∫_{e_l} (U_l - u) ds = (B^T u + D U)_l`.
pub fn electrode_currents(system: &CemSystem, solution: &CemSolution) -> Vec<f64> {
    system.apply_full(solution.u.values(), &solution.voltages).1
}

/// Electrode voltages for every pattern; entry `[p][l]` is `U_l` for pattern `p`.
pub fn forward_map(
    mesh: &TriMesh,
    sigma: &NodalField,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
) -> Result<Vec<Vec<f64>>> {
    let system = assemble_system(mesh, sigma, electrodes)?;
    forward_map_with(&system, patterns)
}

/// [`forward_map`] against an already assembled system.
pub fn forward_map_with(system: &CemSystem, patterns: &[CurrentPattern]) -> Result<Vec<Vec<f64>>> {
    // factor once before fanning out
    system.reduced_solver()?;
    patterns
        .par_iter()
        .map(|p| solve_forward(system, p).map(|s| s.voltages))
        .collect()
}

/// CSV rows `pattern,electrode,voltage`.
pub fn voltages_to_csv(voltages: &[Vec<f64>]) -> String {
    let mut s = String::from("pattern,electrode,voltage\n");
    for (p, col) in voltages.iter().enumerate() {
        for (l, v) in col.iter().enumerate() {
            let _ = writeln!(s, "{p},{l},{}", crate::fmt_f64(*v));
        }
    }
    s
}

/// Parses the output of [`voltages_to_csv`].
pub fn voltages_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("pattern")) {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", f.len())));
        }
        let p = f[0].parse().map_err(|_| bad(format!("bad pattern index '{}'", f[0])))?;
        let l = f[1].parse().map_err(|_| bad(format!("bad electrode index '{}'", f[1])))?;
        let v: f64 = f[2].parse().map_err(|_| bad(format!("bad voltage '{}'", f[2])))?;
        rows.push((p, l, v));
    }
    let n_p = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let n_l = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != n_p * n_l {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {} rows for {n_p} patterns x {n_l} electrodes", n_p * n_l),
        });
    }
    let mut out = vec![vec![f64::NAN; n_l]; n_p];
    for (p, l, v) in rows {
        out[p][l] = v;
    }
    if out.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Parse {
            line: 0,
            message: "duplicate or missing voltage rows".into(),
        });
    }
    Ok(out)
}
