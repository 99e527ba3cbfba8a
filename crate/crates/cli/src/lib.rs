//! Run configurations and workflows behind the `eitfem` binary.

pub mod config;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use eitfem::forward::{adjacent_dipoles, forward_map, voltages_from_csv, voltages_to_csv, CurrentPattern, NodalField};
use eitfem::geometry::{geometry_report, geometry_reports_csv};
use eitfem::lab::{
    continuity_probe, forward_convergence_study, generate_data, geometry_rate_study, minimizer_convergence_study,
    DomainSpec, GroundTruth,
};
use eitfem::mesh::{
    generate_disk_mesh, generate_square_mesh, mesh_quality, read_mesh, refine_uniform, tag_electrodes, write_mesh,
    DomainKind, ElectrodeConfig, TriMesh,
};
use eitfem::tikhonov::{reconstruct, GradientMetric, Penalty, TikhonovConfig};
use eitfem::{fmt_f64, Error};
use thiserror::Error;

pub use config::{parse_config, Command, Domain, ElectrodeSpec, MetricKind, PatternSpec, PenaltyKind, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", config_message(*line, message))]
    Config { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(Error),

    #[error("mesh error: {0}")]
    Mesh(Error),

    #[error("solver error: {0}")]
    Solver(Error),

    #[error("optimizer error: {0}")]
    Optimizer(Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
}

fn config_message(line: usize, message: &str) -> String {
    if line == 0 {
        format!("config: {message}")
    } else {
        format!("config line {line}: {message}")
    }
}

impl CliError {
    /// 1 config, 2 mesh, 3 solver, 4 optimizer, 5 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 1,
            CliError::Mesh(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Optimizer(_) => 4,
            CliError::Io { .. } | CliError::Input { .. } => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidMesh(_)
            | Error::ElectrodeUnresolved { .. }
            | Error::MissingElectrode { .. }
            | Error::OutOfDomain { .. }
            | Error::AmbiguousNormal { .. }
            | Error::UnsupportedDomain => CliError::Mesh(e),
            Error::LinearSolverFailure { .. } | Error::InadmissibleConductivity { .. } => CliError::Solver(e),
            Error::NonsmoothPenalty | Error::Diverged { .. } => CliError::Optimizer(e),
            Error::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            Error::InvalidArgument(_) | Error::Parse { .. } => CliError::Invalid(e),
        }
    }
}

/// One output file, held in memory until everything succeeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: String) -> Self {
        Self {
            name: name.into(),
            contents,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn input_error(path: &Path, e: Error) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

struct Logger(bool);

impl Logger {
    fn say(&self, msg: impl AsRef<str>) {
        if self.0 {
            eprintln!("[eitfem] {}", msg.as_ref());
        }
    }
}

fn domain_spec(cfg: &RunConfig) -> DomainSpec {
    match cfg.domain {
        Domain::Polygon(n) => DomainSpec::Square { n },
        Domain::Disk(n) => DomainSpec::Disk { n_boundary: n },
    }
}

fn base_mesh(cfg: &RunConfig) -> Result<TriMesh, CliError> {
    match &cfg.mesh {
        Some(p) => read_mesh(&read(p)?).map_err(|e| match e {
            Error::Parse { .. } => input_error(p, e),
            other => CliError::Mesh(other),
        }),
        None => Ok(match cfg.domain {
            Domain::Polygon(n) => generate_square_mesh(n)?,
            Domain::Disk(n) => generate_disk_mesh(n)?,
        }),
    }
}

/// Arcs are polar angles on a disk and arclength on a polygon.
fn electrode_config(cfg: &RunConfig, base: &TriMesh) -> Result<ElectrodeConfig, CliError> {
    let z = if cfg.impedance.len() == 1 {
        vec![cfg.impedance[0]; cfg.electrodes.count()]
    } else {
        cfg.impedance.clone()
    };
    let period = match base.domain() {
        DomainKind::Disk { .. } => 2.0 * std::f64::consts::PI,
        DomainKind::Polygon => base.perimeter(),
    };
    let arcs = match &cfg.electrodes {
        ElectrodeSpec::Uniform { count, coverage } => ElectrodeConfig::uniform(*count, *coverage, period, 1.0)?.arcs().to_vec(),
        ElectrodeSpec::Arcs(arcs) => arcs.clone(),
    };
    Ok(ElectrodeConfig::new(arcs, z)?)
}

fn patterns(cfg: &RunConfig, electrodes: usize) -> Result<Vec<CurrentPattern>, CliError> {
    let pats = match &cfg.patterns {
        PatternSpec::AdjacentDipoles(p) => adjacent_dipoles(electrodes, *p)?,
        PatternSpec::File(path) => CurrentPattern::parse_list(&read(path)?).map_err(|e| input_error(path, e))?,
    };
    if pats[0].len() != electrodes {
        return Err(CliError::Invalid(Error::InvalidArgument(format!(
            "patterns have {} entries for {electrodes} electrodes",
            pats[0].len()
        ))));
    }
    Ok(pats)
}

fn truth(cfg: &RunConfig) -> GroundTruth {
    GroundTruth {
        kind: cfg.truth,
        background: cfg.background,
    }
}

fn tikhonov_config(cfg: &RunConfig) -> Result<TikhonovConfig, CliError> {
    let penalty = match (cfg.penalty, cfg.eps_tv) {
        (PenaltyKind::H1, _) => Penalty::H1,
        (PenaltyKind::Tv, Some(eps)) => Penalty::Tv { eps },
        (PenaltyKind::Tv, None) => Penalty::tv_default(cfg.lambda),
    };
    let t = TikhonovConfig {
        max_iters: cfg.max_iters,
        armijo_c: cfg.armijo_c,
        backtrack: cfg.backtrack,
        step_init: cfg.step_init,
        tol: cfg.tol,
        metric: match cfg.metric {
            MetricKind::H1 => GradientMetric::H1,
            MetricKind::L2 => GradientMetric::L2,
        },
        ..TikhonovConfig::new(cfg.alpha, penalty, cfg.lambda)?
    };
    t.validate()?;
    Ok(t)
}

/// Tagged base mesh refined `levels` times, finest last.
fn level_meshes(electrodes: &ElectrodeConfig, base: &TriMesh, levels: usize) -> Result<Vec<TriMesh>, CliError> {
    let mut out = vec![tag_electrodes(base, electrodes)?];
    for _ in 0..levels {
        let next = refine_uniform(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

fn quality_csv(level: usize, mesh: &TriMesh) -> String {
    let q = mesh_quality(mesh);
    let mut s = String::from("level,n_nodes,n_triangles,h_max,h_min,min_angle,shape_regularity,quasi_uniformity\n");
    let _ = writeln!(
        s,
        "{level},{},{},{},{},{},{},{}",
        mesh.n_nodes(),
        mesh.n_triangles(),
        fmt_f64(q.h_max),
        fmt_f64(q.h_min),
        fmt_f64(q.min_angle),
        fmt_f64(q.shape_regularity),
        fmt_f64(q.quasi_uniformity())
    );
    s
}

/// Computes every artifact of the configured workflow without touching the disk.
pub fn execute(cfg: &RunConfig, verbose: bool) -> Result<Vec<Artifact>, CliError> {
    let log = Logger(verbose);
    let base = base_mesh(cfg)?;
    let electrodes = electrode_config(cfg, &base)?;
    let seed = cfg.seed;
    log.say(format!("{}: base mesh with {} nodes", cfg.command.name(), base.n_nodes()));
    let mut out = Vec::new();
    match cfg.command {
        Command::Mesh => {
            let meshes = level_meshes(&electrodes, &base, cfg.levels)?;
            let mesh = meshes.last().unwrap();
            let stem = format!("mesh_level{}", cfg.levels);
            out.push(Artifact::new(format!("{stem}.txt"), write_mesh(mesh)));
            out.push(Artifact::new(format!("{stem}_quality.csv"), quality_csv(cfg.levels, mesh)));
            if matches!(mesh.domain(), DomainKind::Disk { .. }) {
                out.push(Artifact::new(
                    format!("{stem}_geometry.csv"),
                    geometry_reports_csv(&[geometry_report(mesh)?]),
                ));
            }
        }
        Command::Forward => {
            let meshes = level_meshes(&electrodes, &base, cfg.levels)?;
            let mesh = meshes.last().unwrap();
            let pats = patterns(cfg, electrodes.len())?;
            let sigma = match &cfg.sigma {
                Some(p) => {
                    let f = NodalField::from_text(&read(p)?).map_err(|e| input_error(p, e))?;
                    NodalField::admissible(f.into_values(), cfg.lambda)?
                }
                None => truth(cfg).sample(mesh, cfg.lambda)?,
            };
            log.say(format!("solving {} patterns on {} nodes", pats.len(), mesh.n_nodes()));
            let v = forward_map(mesh, &sigma, &electrodes, &pats)?;
            out.push(Artifact::new(format!("forward_level{}_voltages.csv", cfg.levels), voltages_to_csv(&v)));
        }
        Command::Invert => {
            let pats = patterns(cfg, electrodes.len())?;
            let tik = tikhonov_config(cfg)?;
            let stem = format!("invert_seed{seed}");
            let (meshes, data) = match &cfg.data {
                Some(p) => {
                    let d = voltages_from_csv(&read(p)?).map_err(|e| input_error(p, e))?;
                    if d.len() != pats.len() || d.iter().any(|c| c.len() != electrodes.len()) {
                        return Err(CliError::Input {
                            path: p.clone(),
                            message: format!("expected {} patterns of {} voltages", pats.len(), electrodes.len()),
                        });
                    }
                    (level_meshes(&electrodes, &base, cfg.levels)?, d)
                }
                None => {
                    // synthetic data one level finer than the inversion mesh
                    let meshes = level_meshes(&electrodes, &base, cfg.levels + 1)?;
                    let ds = generate_data(
                        &truth(cfg),
                        &meshes[cfg.levels + 1],
                        cfg.levels + 1,
                        &electrodes,
                        &pats,
                        cfg.lambda,
                        cfg.noise,
                        seed,
                    )?;
                    ds.check_inversion_level(cfg.levels)?;
                    out.push(Artifact::new(format!("{stem}_data.csv"), voltages_to_csv(&ds.voltages)));
                    (meshes, ds.voltages)
                }
            };
            let mesh = &meshes[cfg.levels];
            log.say(format!("reconstructing on {} nodes", mesh.n_nodes()));
            let r = reconstruct(mesh, &electrodes, &pats, &data, &tik)?;
            log.say(format!(
                "{} iterations, J = {}, stop: {:?}",
                r.iterations,
                fmt_f64(r.objective()),
                r.reason
            ));
            out.push(Artifact::new(format!("{stem}_mesh.txt"), write_mesh(mesh)));
            out.push(Artifact::new(format!("{stem}_sigma.txt"), r.sigma_star.to_text()));
            out.push(Artifact::new(format!("{stem}_summary.csv"), r.summary_csv()));
        }
        Command::StudyForward => {
            let pats = patterns(cfg, electrodes.len())?;
            let r = forward_convergence_study(&domain_spec(cfg), &electrodes, &pats, &truth(cfg), cfg.lambda, cfg.levels)?;
            out.push(Artifact::new(format!("study-forward_seed{seed}.csv"), r.to_csv(false)));
        }
        Command::StudyMinimizer => {
            let pats = patterns(cfg, electrodes.len())?;
            let tik = tikhonov_config(cfg)?;
            let meshes = level_meshes(&electrodes, &base, cfg.levels + 1)?;
            let data = generate_data(
                &truth(cfg),
                &meshes[cfg.levels + 1],
                cfg.levels + 1,
                &electrodes,
                &pats,
                cfg.lambda,
                cfg.noise,
                seed,
            )?;
            log.say(format!("reconstructing on levels 0..={}", cfg.levels));
            let s = minimizer_convergence_study(&domain_spec(cfg), &electrodes, &data, &tik, cfg.levels)?;
            out.push(Artifact::new(format!("study-minimizer_seed{seed}.csv"), s.report.to_csv(false)));
            out.push(Artifact::new(format!("study-minimizer_seed{seed}_data.csv"), voltages_to_csv(&data.voltages)));
        }
        Command::StudyGeometry => {
            let r = geometry_rate_study(&cfg.n_list)?;
            out.push(Artifact::new(format!("study-geometry_seed{seed}.csv"), r.to_csv(false)));
        }
        Command::StudyContinuity => {
            let pats = patterns(cfg, electrodes.len())?;
            let meshes = level_meshes(&electrodes, &base, cfg.levels)?;
            let mesh = meshes.last().unwrap();
            let sigma = truth(cfg).sample(mesh, cfg.lambda)?;
            let shape = GroundTruth {
                kind: cfg.perturbation,
                background: 0.0,
            };
            let rho: Vec<f64> = mesh.nodes().iter().map(|&p| shape.eval(p)).collect();
            let r = continuity_probe(mesh, &electrodes, &pats, &sigma, &rho, &cfg.amplitudes)?;
            out.push(Artifact::new(format!("study-continuity_seed{seed}.csv"), r.to_csv(false)));
        }
    }
    Ok(out)
}

/// Writes every artifact through a temporary file and an atomic rename. On
/// failure nothing new is left behind.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut staged = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let dest = dir.join(&a.name);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
        tmp.write_all(a.contents.as_bytes()).map_err(io(&dest))?;
        tmp.as_file().sync_all().map_err(io(&dest))?;
        staged.push((tmp, dest));
    }
    let mut written: Vec<PathBuf> = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        if let Err(e) = tmp.persist(&dest) {
            for w in &written {
                let _ = std::fs::remove_file(w);
            }
            return Err(CliError::Io {
                path: dest,
                source: e.error,
            });
        }
        written.push(dest);
    }
    Ok(written)
}

/// Runs the workflow and writes its outputs under `output`.
pub fn run(cfg: &RunConfig, output: &Path, verbose: bool) -> Result<Vec<PathBuf>, CliError> {
    let artifacts = execute(cfg, verbose)?;
    write_artifacts(output, &artifacts)
}
