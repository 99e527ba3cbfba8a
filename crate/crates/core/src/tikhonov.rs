//! Tikhonov reconstruction over the nodal box `[lambda, 1/lambda]`.
//!
//! `J(sigma) = 1/2 Σ_p |U(sigma; I_p) - U^δ_p|² + alpha Psi(sigma)` with
//! `Psi` either `1/2 ‖sigma‖²_{H¹}` or the smoothed total variation
//! `Σ_T |T| (sqrt(|∇sigma|² + eps²) - eps)`. Minimized by projected gradient
//! descent with Armijo backtracking.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{
    assemble_system, lumped_mass, mass_matrix, solve_forward, stiffness_matrix, CemSystem, CurrentPattern,
    NodalField,
};
use crate::linalg::{self, CsrMatrix, EnvelopeCholesky};
use crate::mesh::{ElectrodeConfig, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `1/2 ‖sigma‖²_{H¹}`
    H1,
    /// smoothed total variation with parameter `eps`
    Tv { eps: f64 },
}

impl Penalty {
    /// Total variation with the default smoothing `1e-4 (1/lambda - lambda)`.
    pub fn tv_default(lambda: f64) -> Self {
        Penalty::Tv {
            eps: 1e-4 * (1.0 / lambda - lambda),
        }
    }
}

/// Riesz map turning the nodal derivative of `J` into a descent direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMetric {
    /// lumped `L²` inner product
    L2,
    /// `H¹` inner product; falls back to `L2` when the projected step is not a descent step
    #[default]
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovConfig {
    pub alpha: f64,
    pub penalty: Penalty,
    pub lambda: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// first trial step; `None` means `1 / ‖g_0‖_{L²}`
    pub step_init: Option<f64>,
    /// stop when `‖sigma - P(sigma - g)‖_{L²}` falls below this
    pub tol: f64,
    pub metric: GradientMetric,
}

impl TikhonovConfig {
    pub fn new(alpha: f64, penalty: Penalty, lambda: f64) -> Result<Self> {
        let c = Self {
            alpha,
            penalty,
            lambda,
            max_iters: 200,
            armijo_c: 1e-4,
            backtrack: 0.5,
            step_init: None,
            tol: 1e-8,
            metric: GradientMetric::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha = {} must be nonnegative", self.alpha)));
        }
        if let Penalty::Tv { eps } = self.penalty {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::invalid(format!("eps_tv = {eps} must be positive")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid(format!("lambda = {} must lie in (0, 1)", self.lambda)));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid("armijo_c must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("backtrack factor must lie in (0, 1)"));
        }
        if let Some(s) = self.step_init {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("step_init must be positive"));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be nonnegative"));
        }
        Ok(())
    }
}

/// `J` split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub j: f64,
    pub fit: f64,
    pub penalty: f64,
}

fn check_len(mesh: &TriMesh, v: &[f64]) -> Result<()> {
    if v.len() != mesh.n_nodes() {
        return Err(Error::invalid(format!(
            "field has {} values for {} nodes",
            v.len(),
            mesh.n_nodes()
        )));
    }
    Ok(())
}

/// `1/2 ‖sigma‖²_{H¹(Omega_h)}`
pub fn penalty_h1(mesh: &TriMesh, sigma: &NodalField) -> Result<f64> {
    check_len(mesh, sigma.values())?;
    let v = sigma.values();
    Ok(0.5 * (stiffness_matrix(mesh).quadratic_form(v) + mass_matrix(mesh).quadratic_form(v)))
}

/// Smoothed total variation, offset so constants score zero; `eps = 0` is the exact P1 TV.
pub fn penalty_tv(mesh: &TriMesh, sigma: &NodalField, eps: f64) -> Result<f64> {
    check_len(mesh, sigma.values())?;
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps = {eps} must be nonnegative")));
    }
    Ok(tv_value(mesh, sigma.values(), eps))
}

fn tv_value(mesh: &TriMesh, v: &[f64], eps: f64) -> f64 {
    mesh.triangles()
        .iter()
        .zip(mesh.elements())
        .map(|(t, el)| {
            let g = el.gradient([v[t[0]], v[t[1]], v[t[2]]]);
            let n2 = g[0] * g[0] + g[1] * g[1];
            // sqrt(n2 + eps²) - eps, written to avoid cancellation
            el.area * n2 / ((n2 + eps * eps).sqrt() + eps).max(f64::MIN_POSITIVE)
        })
        .sum()
}

pub fn penalty_value(mesh: &TriMesh, sigma: &NodalField, penalty: &Penalty) -> Result<f64> {
    match *penalty {
        Penalty::H1 => penalty_h1(mesh, sigma),
        Penalty::Tv { eps } => penalty_tv(mesh, sigma, eps),
    }
}

/// Nodal derivative of the penalty.
pub fn penalty_gradient(mesh: &TriMesh, sigma: &NodalField, penalty: &Penalty) -> Result<NodalField> {
    check_len(mesh, sigma.values())?;
    let v = sigma.values();
    let out = match *penalty {
        Penalty::H1 => {
            let mut g = vec![0.0; v.len()];
            let mut m = vec![0.0; v.len()];
            stiffness_matrix(mesh).mul_vec(v, &mut g);
            mass_matrix(mesh).mul_vec(v, &mut m);
            g.iter_mut().zip(m).for_each(|(a, b)| *a += b);
            g
        }
        Penalty::Tv { eps } => {
            if eps == 0.0 {
                return Err(Error::NonsmoothPenalty);
            }
            if !(eps > 0.0) {
                return Err(Error::invalid(format!("eps = {eps} must be positive")));
            }
            let mut g = vec![0.0; v.len()];
            for (t, el) in mesh.triangles().iter().zip(mesh.elements()) {
                let gs = el.gradient([v[t[0]], v[t[1]], v[t[2]]]);
                let scale = el.area / (gs[0] * gs[0] + gs[1] * gs[1] + eps * eps).sqrt();
                for a in 0..3 {
                    g[t[a]] += scale * (gs[0] * el.grads[a][0] + gs[1] * el.grads[a][1]);
                }
            }
            g
        }
    };
    NodalField::new(out)
}

fn check_data(patterns: &[CurrentPattern], data: &[Vec<f64>], l: usize) -> Result<()> {
    if patterns.is_empty() {
        return Err(Error::invalid("no current patterns"));
    }
    if patterns.len() != data.len() {
        return Err(Error::invalid(format!(
            "{} patterns but {} data columns",
            patterns.len(),
            data.len()
        )));
    }
    if let Some(p) = data.iter().position(|d| d.len() != l) {
        return Err(Error::invalid(format!("data column {p} does not have {l} entries")));
    }
    if let Some(p) = patterns.iter().position(|q| q.len() != l) {
        return Err(Error::invalid(format!("pattern {p} does not have {l} entries")));
    }
    Ok(())
}

/// Forward solutions for every pattern with their voltage residuals.
struct ForwardState {
    system: CemSystem,
    potentials: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
    fit: f64,
}

fn forward_state(
    mesh: &TriMesh,
    sigma: &NodalField,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    data: &[Vec<f64>],
) -> Result<ForwardState> {
    let system = assemble_system(mesh, sigma, electrodes)?;
    let solved: Vec<(Vec<f64>, Vec<f64>)> = patterns
        .par_iter()
        .zip(data.par_iter())
        .map(|(pattern, d)| {
            let sol = solve_forward(&system, pattern)?;
            let r = sol.voltages.iter().zip(d).map(|(a, b)| a - b).collect();
            Ok((sol.u.into_values(), r))
        })
        .collect::<Result<_>>()?;
    let (potentials, residuals): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    // sequential reduction keeps results independent of thread scheduling
    let fit = residuals
        .iter()
        .map(|r: &Vec<f64>| 0.5 * r.iter().map(|x| x * x).sum::<f64>())
        .sum();
    Ok(ForwardState {
        system,
        potentials,
        residuals,
        fit,
    })
}

/// Adjoint gradient of the fit term: `-Σ_p ∫ phi_i ∇u_p·∇w_p`, where `w_p`
/// solves the forward system with the residual as electrode current.
fn fit_gradient(mesh: &TriMesh, state: &ForwardState) -> Result<Vec<f64>> {
    let per_pattern: Vec<Vec<f64>> = state
        .potentials
        .par_iter()
        .zip(state.residuals.par_iter())
        .map(|(u, r)| {
            let (w, _) = state.system.solve_electrode_rhs(r)?;
            let mut g = vec![0.0; mesh.n_nodes()];
            for (t, el) in mesh.triangles().iter().zip(mesh.elements()) {
                let gu = el.gradient([u[t[0]], u[t[1]], u[t[2]]]);
                let gw = el.gradient([w[t[0]], w[t[1]], w[t[2]]]);
                let c = el.area / 3.0 * (gu[0] * gw[0] + gu[1] * gw[1]);
                for &i in t {
                    g[i] -= c;
                }
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; mesh.n_nodes()];
    for g in per_pattern {
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok(grad)
}

/// Nodal gradient of `1/2 Σ_p |U_h(sigma) - U^δ_p|²`.
pub fn fit_gradient_adjoint(
    mesh: &TriMesh,
    sigma: &NodalField,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    data: &[Vec<f64>],
) -> Result<NodalField> {
    check_data(patterns, data, electrodes.len())?;
    let state = forward_state(mesh, sigma, electrodes, patterns, data)?;
    NodalField::new(fit_gradient(mesh, &state)?)
}

/// Nodal clamp to `[lambda, 1/lambda]`.
pub fn project_box(field: &NodalField, lambda: f64) -> Result<NodalField> {
    let hi = 1.0 / lambda;
    NodalField::admissible(field.values().iter().map(|v| v.clamp(lambda, hi)).collect(), lambda)
}

pub fn objective(
    mesh: &TriMesh,
    sigma: &NodalField,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    data: &[Vec<f64>],
    config: &TikhonovConfig,
) -> Result<ObjectiveValue> {
    config.validate()?;
    check_data(patterns, data, electrodes.len())?;
    let fit = forward_state(mesh, sigma, electrodes, patterns, data)?.fit;
    let penalty = penalty_value(mesh, sigma, &config.penalty)?;
    Ok(ObjectiveValue {
        j: fit + config.alpha * penalty,
        fit,
        penalty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// projected-gradient measure below tolerance
    Stationary,
    MaxIterations,
    /// no step length passed the Armijo test
    LineSearchFailed,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j: f64,
    pub fit: f64,
    pub penalty: f64,
    /// step that produced this iterate (0 for the initial guess)
    pub step: f64,
    /// `‖sigma - P(sigma - g)‖_{L²}` at this iterate
    pub stationarity: f64,
    /// nodal range of the iterate
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub sigma_star: NodalField,
    pub history: Vec<IterationRecord>,
    pub fit_term: f64,
    pub penalty_term: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: StopReason,
}

impl ReconstructionResult {
    pub fn objective_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.j).collect()
    }

    pub fn objective(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.j)
    }

    /// CSV `iteration,J,fit,penalty,step`.
    pub fn summary_csv(&self) -> String {
        use crate::fmt_f64 as f;
        let mut s = String::from("iteration,J,fit,penalty,step\n");
        for r in &self.history {
            let _ = writeln!(s, "{},{},{},{},{}", r.iteration, f(r.j), f(r.fit), f(r.penalty), f(r.step));
        }
        s
    }
}

struct Evaluation {
    value: ObjectiveValue,
    field: NodalField,
    state: ForwardState,
}

struct Minimizer<'a> {
    mesh: &'a TriMesh,
    electrodes: &'a ElectrodeConfig,
    patterns: &'a [CurrentPattern],
    data: &'a [Vec<f64>],
    config: &'a TikhonovConfig,
    lumped: Vec<f64>,
    mass: CsrMatrix,
    /// `S + M`, the H1 Gram matrix
    gram: CsrMatrix,
    riesz_h1: Option<EnvelopeCholesky>,
}

impl Minimizer<'_> {
    fn penalty(&self, field: &NodalField) -> Result<f64> {
        match self.config.penalty {
            Penalty::H1 => Ok(0.5 * self.gram.quadratic_form(field.values())),
            Penalty::Tv { eps } => penalty_tv(self.mesh, field, eps),
        }
    }

    fn evaluate(&self, sigma: &[f64]) -> Result<Evaluation> {
        let field = NodalField::admissible(sigma.to_vec(), self.config.lambda)?;
        let state = forward_state(self.mesh, &field, self.electrodes, self.patterns, self.data)?;
        let penalty = self.penalty(&field)?;
        Ok(Evaluation {
            value: ObjectiveValue {
                j: state.fit + self.config.alpha * penalty,
                fit: state.fit,
                penalty,
            },
            field,
            state,
        })
    }

    /// Nodal derivative of `J` at an evaluated point.
    fn gradient(&self, e: &Evaluation) -> Result<Vec<f64>> {
        let mut g = fit_gradient(self.mesh, &e.state)?;
        if self.config.alpha > 0.0 {
            let pg = match self.config.penalty {
                Penalty::H1 => {
                    let mut out = vec![0.0; g.len()];
                    self.gram.mul_vec(e.field.values(), &mut out);
                    out
                }
                Penalty::Tv { .. } => penalty_gradient(self.mesh, &e.field, &self.config.penalty)?.into_values(),
            };
            g.iter_mut().zip(pg).for_each(|(a, b)| *a += self.config.alpha * b);
        }
        Ok(g)
    }

    fn project(&self, v: &mut [f64]) {
        let (lo, hi) = (self.config.lambda, 1.0 / self.config.lambda);
        v.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
    }

    fn l2_gradient(&self, grad: &[f64]) -> Vec<f64> {
        grad.iter().zip(&self.lumped).map(|(g, m)| g / m).collect()
    }

    fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.quadratic_form(v).max(0.0).sqrt()
    }

    fn stationarity(&self, sigma: &[f64], g_l2: &[f64]) -> f64 {
        let mut p: Vec<f64> = sigma.iter().zip(g_l2).map(|(s, g)| s - g).collect();
        self.project(&mut p);
        let d: Vec<f64> = sigma.iter().zip(&p).map(|(s, q)| s - q).collect();
        self.l2_norm(&d)
    }

    /// Carried step, or `step_init`, or `1 / ‖dir‖_{L²}`.
    fn initial_step(&self, carried: Option<f64>, dir: &[f64]) -> f64 {
        carried.or(self.config.step_init).unwrap_or_else(|| {
            let n = self.l2_norm(dir);
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
    }

    fn trial(&self, sigma: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
        let mut x: Vec<f64> = sigma.iter().zip(dir).map(|(s, g)| s - t * g).collect();
        self.project(&mut x);
        x
    }

    /// Armijo search along the projected path `P(sigma - t dir)`. Tries
    /// `2 s` once, then `s, s b, s b², ...`. Returns the accepted point, its
    /// evaluation and step.
    fn line_search(
        &self,
        sigma: &[f64],
        current: &Evaluation,
        grad: &[f64],
        dir: &[f64],
        s: f64,
        history: &[f64],
    ) -> Result<Option<(Vec<f64>, Evaluation, f64)>> {
        let accept = |x: &[f64]| -> Result<Option<Evaluation>> {
            let decrease: f64 = grad.iter().zip(x.iter().zip(sigma)).map(|(g, (a, b))| g * (a - b)).sum();
            if !(decrease < 0.0) {
                return Ok(None);
            }
            let e = self.evaluate(x)?;
            if !e.value.j.is_finite() {
                let mut h = history.to_vec();
                h.push(e.value.j);
                return Err(Error::Diverged { history: h });
            }
            Ok((e.value.j <= current.value.j + self.config.armijo_c * decrease).then_some(e))
        };
        let expanded = 2.0 * s;
        let x = self.trial(sigma, dir, expanded);
        if let Some(e) = accept(&x)? {
            return Ok(Some((x, e, expanded)));
        }
        let mut t = s;
        for _ in 0..60 {
            let x = self.trial(sigma, dir, t);
            if x == sigma {
                return Ok(None);
            }
            if let Some(e) = accept(&x)? {
                return Ok(Some((x, e, t)));
            }
            t *= self.config.backtrack;
        }
        Ok(None)
    }

    fn run(&self, initial: Vec<f64>) -> Result<ReconstructionResult> {
        let mut sigma = initial;
        self.project(&mut sigma);
        let mut current = self.evaluate(&sigma)?;
        let mut js = vec![current.value.j];
        if !current.value.j.is_finite() {
            return Err(Error::Diverged { history: js });
        }
        let mut grad = self.gradient(&current)?;
        let mut g_l2 = self.l2_gradient(&grad);
        let mut history = vec![IterationRecord {
            iteration: 0,
            j: current.value.j,
            fit: current.value.fit,
            penalty: current.value.penalty,
            step: 0.0,
            stationarity: self.stationarity(&sigma, &g_l2),
            sigma_min: min_of(&sigma),
            sigma_max: max_of(&sigma),
        }];
        // carried step per metric: [H1, L2]
        let mut steps: [Option<f64>; 2] = [None; 2];
        let mut reason = StopReason::MaxIterations;
        for it in 1..=self.config.max_iters {
            if history.last().unwrap().stationarity <= self.config.tol {
                reason = StopReason::Stationary;
                break;
            }
            let mut found = None;
            if let (GradientMetric::H1, Some(chol)) = (self.config.metric, &self.riesz_h1) {
                let dir = chol.solve(&grad);
                let s = self.initial_step(steps[0], &dir);
                found = self
                    .line_search(&sigma, &current, &grad, &dir, s, &js)?
                    .map(|(x, e, t)| {
                        steps[0] = Some(t);
                        (x, e, t)
                    });
            }
            if found.is_none() {
                let s = self.initial_step(steps[1], &g_l2);
                found = self
                    .line_search(&sigma, &current, &grad, &g_l2, s, &js)?
                    .map(|(x, e, t)| {
                        steps[1] = Some(t);
                        (x, e, t)
                    });
            }
            let Some((next, accepted, t)) = found else {
                reason = StopReason::LineSearchFailed;
                break;
            };
            sigma = next;
            current = accepted;
            js.push(current.value.j);
            grad = self.gradient(&current)?;
            g_l2 = self.l2_gradient(&grad);
            history.push(IterationRecord {
                iteration: it,
                j: current.value.j,
                fit: current.value.fit,
                penalty: current.value.penalty,
                step: t,
                stationarity: self.stationarity(&sigma, &g_l2),
                sigma_min: min_of(&sigma),
                sigma_max: max_of(&sigma),
            });
        }
        if reason == StopReason::MaxIterations && history.last().unwrap().stationarity <= self.config.tol {
            reason = StopReason::Stationary;
        }
        let last = *history.last().unwrap();
        Ok(ReconstructionResult {
            sigma_star: NodalField::admissible(sigma, self.config.lambda)?,
            fit_term: last.fit,
            penalty_term: last.penalty,
            iterations: last.iteration,
            converged: reason == StopReason::Stationary,
            reason,
            history,
        })
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn h1_riesz_factor(g: &CsrMatrix, mesh: &TriMesh) -> Result<EnvelopeCholesky> {
    let mut entries = Vec::with_capacity(g.nnz());
    for i in 0..g.n() {
        entries.extend(g.row(i).filter(|&(j, _)| j <= i).map(|(j, v)| (i, j, v)));
    }
    let perm = linalg::reverse_cuthill_mckee(mesh.adjacency());
    EnvelopeCholesky::factor(g.n(), &entries, perm).map_err(|e| Error::LinearSolverFailure {
        residual: e.pivot,
        iterations: 0,
    })
}

/// Minimizes `J` from `sigma ≡ 1`.
pub fn reconstruct(
    mesh: &TriMesh,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    data: &[Vec<f64>],
    config: &TikhonovConfig,
) -> Result<ReconstructionResult> {
    reconstruct_from(mesh, electrodes, patterns, data, config, &NodalField::constant(mesh.n_nodes(), 1.0))
}

/// Minimizes `J` from `initial` (clamped into the box).
pub fn reconstruct_from(
    mesh: &TriMesh,
    electrodes: &ElectrodeConfig,
    patterns: &[CurrentPattern],
    data: &[Vec<f64>],
    config: &TikhonovConfig,
    initial: &NodalField,
) -> Result<ReconstructionResult> {
    config.validate()?;
    check_data(patterns, data, electrodes.len())?;
    check_len(mesh, initial.values())?;
    let mass = mass_matrix(mesh);
    let mut gram = stiffness_matrix(mesh);
    gram.add_matrix(&mass);
    let riesz_h1 = match config.metric {
        GradientMetric::H1 => Some(h1_riesz_factor(&gram, mesh)?),
        GradientMetric::L2 => None,
    };
    let minimizer = Minimizer {
        mesh,
        electrodes,
        patterns,
        data,
        config,
        lumped: lumped_mass(mesh),
        mass,
        gram,
        riesz_h1,
    };
    minimizer.run(initial.values().to_vec())
}
