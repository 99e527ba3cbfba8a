//! Flat `key=value` run configuration.
//!
//! One setting per line; blank lines and lines starting with `#` are
//! ignored. Every key is optional except `command`; unknown or repeated keys
//! are errors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use eitfem::fmt_f64;
use eitfem::lab::TruthKind;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Forward,
    Invert,
    StudyForward,
    StudyMinimizer,
    StudyGeometry,
    StudyContinuity,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Mesh,
        Command::Forward,
        Command::Invert,
        Command::StudyForward,
        Command::StudyMinimizer,
        Command::StudyGeometry,
        Command::StudyContinuity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Forward => "forward",
            Command::Invert => "invert",
            Command::StudyForward => "study-forward",
            Command::StudyMinimizer => "study-minimizer",
            Command::StudyGeometry => "study-geometry",
            Command::StudyContinuity => "study-continuity",
        }
    }

    fn is_study(self) -> bool {
        matches!(
            self,
            Command::StudyForward | Command::StudyMinimizer | Command::StudyGeometry | Command::StudyContinuity
        )
    }
}

/// Base domain: the unit square split into `n x n` cells, or an inscribed
/// polygon of the unit disk with `n` boundary vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Polygon(usize),
    Disk(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElectrodeSpec {
    /// `count` equal electrodes, each covering `coverage` of its share
    Uniform { count: usize, coverage: f64 },
    /// explicit `(start, end)` boundary parameters
    Arcs(Vec<(f64, f64)>),
}

impl ElectrodeSpec {
    pub fn count(&self) -> usize {
        match self {
            ElectrodeSpec::Uniform { count, .. } => *count,
            ElectrodeSpec::Arcs(a) => a.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternSpec {
    AdjacentDipoles(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    H1,
    Tv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    H1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub domain: Domain,
    /// refinements of the base mesh; for studies, the finest level
    pub levels: usize,
    pub electrodes: ElectrodeSpec,
    /// one impedance for all electrodes, or one per electrode
    pub impedance: Vec<f64>,
    pub patterns: PatternSpec,
    pub truth: TruthKind,
    pub background: f64,
    pub noise: f64,
    pub seed: u64,
    pub alpha: f64,
    pub penalty: PenaltyKind,
    /// `None` selects the default smoothing for `lambda`
    pub eps_tv: Option<f64>,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub step_init: Option<f64>,
    pub metric: MetricKind,
    /// voltages CSV for `invert`; synthetic data when absent
    pub data: Option<PathBuf>,
    /// nodal conductivity file for `forward`; the ground truth when absent
    pub sigma: Option<PathBuf>,
    /// mesh file replacing the generated base mesh
    pub mesh: Option<PathBuf>,
    pub n_list: Vec<usize>,
    pub amplitudes: Vec<f64>,
    /// perturbation shape for `study-continuity` (its background is zero)
    pub perturbation: TruthKind,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for everything but the command.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            domain: Domain::Disk(16),
            levels: 2,
            electrodes: ElectrodeSpec::Uniform { count: 8, coverage: 0.5 },
            impedance: vec![0.1],
            patterns: PatternSpec::AdjacentDipoles(7),
            truth: TruthKind::Constant,
            background: 1.0,
            noise: 0.01,
            seed: 0,
            alpha: 1e-2,
            penalty: PenaltyKind::H1,
            eps_tv: None,
            lambda: 0.1,
            max_iters: 200,
            tol: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
            step_init: None,
            metric: MetricKind::H1,
            data: None,
            sigma: None,
            mesh: None,
            n_list: vec![8, 16, 32, 64],
            amplitudes: vec![1e-1, 1e-2, 1e-3, 1e-4],
            perturbation: TruthKind::Bump {
                center: [0.0, 0.0],
                width: 0.5,
                amplitude: 1.0,
            },
            output: None,
        }
    }

    /// Canonical text; [`parse_config`] reads it back to an equal value.
    pub fn to_text(&self) -> String {
        let f = |x: f64| fmt_f64(x);
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("command", self.command.name().into());
        put(
            "domain",
            match self.domain {
                Domain::Polygon(n) => format!("polygon {n}"),
                Domain::Disk(n) => format!("disk {n}"),
            },
        );
        put("levels", self.levels.to_string());
        put(
            "electrodes",
            match &self.electrodes {
                ElectrodeSpec::Uniform { count, coverage } => format!("uniform {count} {}", f(*coverage)),
                ElectrodeSpec::Arcs(arcs) => {
                    let a: Vec<String> = arcs.iter().map(|(a, b)| format!("{}:{}", f(*a), f(*b))).collect();
                    format!("arcs {}", a.join(" "))
                }
            },
        );
        put("impedance", list(&self.impedance));
        put(
            "patterns",
            match &self.patterns {
                PatternSpec::AdjacentDipoles(p) => format!("adjacent-dipoles {p}"),
                PatternSpec::File(p) => format!("file {}", p.display()),
            },
        );
        put("truth", truth_to_text(&self.truth));
        put("background", f(self.background));
        put("noise", f(self.noise));
        put("seed", self.seed.to_string());
        put("alpha", f(self.alpha));
        put(
            "penalty",
            match self.penalty {
                PenaltyKind::H1 => "h1".into(),
                PenaltyKind::Tv => "tv".into(),
            },
        );
        if let Some(e) = self.eps_tv {
            put("eps_tv", f(e));
        }
        put("lambda", f(self.lambda));
        put("max_iters", self.max_iters.to_string());
        put("tol", f(self.tol));
        put("armijo_c", f(self.armijo_c));
        put("backtrack", f(self.backtrack));
        if let Some(s0) = self.step_init {
            put("step_init", f(s0));
        }
        put(
            "metric",
            match self.metric {
                MetricKind::H1 => "h1".into(),
                MetricKind::L2 => "l2".into(),
            },
        );
        for (k, p) in [("data", &self.data), ("sigma", &self.sigma), ("mesh", &self.mesh)] {
            if let Some(p) = p {
                put(k, p.display().to_string());
            }
        }
        put("n_list", self.n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "));
        put("amplitudes", list(&self.amplitudes));
        put("perturbation", truth_to_text(&self.perturbation));
        if let Some(o) = &self.output {
            put("output", o.display().to_string());
        }
        s
    }
}

fn truth_to_text(t: &TruthKind) -> String {
    let f = |x: f64| fmt_f64(x);
    match *t {
        TruthKind::Constant => "constant".into(),
        TruthKind::Inclusion { center, radius, amplitude } => {
            format!("inclusion {} {} {} {}", f(center[0]), f(center[1]), f(radius), f(amplitude))
        }
        TruthKind::Bump { center, width, amplitude } => {
            format!("bump {} {} {} {}", f(center[0]), f(center[1]), f(width), f(amplitude))
        }
    }
}

const KEYS: [&str; 29] = [
    "command",
    "domain",
    "levels",
    "electrodes",
    "impedance",
    "patterns",
    "truth",
    "background",
    "noise",
    "seed",
    "alpha",
    "penalty",
    "eps_tv",
    "lambda",
    "max_iters",
    "tol",
    "armijo_c",
    "backtrack",
    "step_init",
    "metric",
    "data",
    "sigma",
    "mesh",
    "n_list",
    "amplitudes",
    "perturbation",
    "output",
    // accepted spellings with dashes
    "max-iters",
    "eps-tv",
];

fn canonical(key: &str) -> &str {
    match key {
        "max-iters" => "max_iters",
        "eps-tv" => "eps_tv",
        k => k,
    }
}

fn err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| err(line, format!("{key}: malformed value '{v}'")))
}

fn finite(line: usize, key: &str, v: &str) -> Result<f64, CliError> {
    let x: f64 = num(line, key, v)?;
    if !x.is_finite() {
        return Err(err(line, format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64, CliError> {
    let x = finite(line, key, v)?;
    if x <= 0.0 {
        return Err(err(line, format!("{key}: {x} must be positive")));
    }
    Ok(x)
}

fn floats(line: usize, key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    let out = v
        .split_whitespace()
        .map(|t| finite(line, key, t))
        .collect::<Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(err(line, format!("{key}: expected at least one value")));
    }
    Ok(out)
}

fn path(line: usize, key: &str, v: &str) -> Result<PathBuf, CliError> {
    if v.is_empty() {
        return Err(err(line, format!("{key}: empty path")));
    }
    Ok(PathBuf::from(v))
}

fn parse_truth(line: usize, key: &str, v: &str) -> Result<TruthKind, CliError> {
    let fields: Vec<&str> = v.split_whitespace().collect();
    let args = |n: usize| -> Result<Vec<f64>, CliError> {
        if fields.len() != n + 1 {
            return Err(err(line, format!("{key}: '{}' takes {n} numbers", fields[0])));
        }
        fields[1..].iter().map(|t| finite(line, key, t)).collect()
    };
    match fields.first().copied() {
        Some("constant") => {
            args(0)?;
            Ok(TruthKind::Constant)
        }
        Some("inclusion") => {
            let a = args(4)?;
            if a[2] <= 0.0 {
                return Err(err(line, format!("{key}: radius must be positive")));
            }
            Ok(TruthKind::Inclusion {
                center: [a[0], a[1]],
                radius: a[2],
                amplitude: a[3],
            })
        }
        Some("bump") => {
            let a = args(4)?;
            if a[2] <= 0.0 {
                return Err(err(line, format!("{key}: width must be positive")));
            }
            Ok(TruthKind::Bump {
                center: [a[0], a[1]],
                width: a[2],
                amplitude: a[3],
            })
        }
        _ => Err(err(line, format!("{key}: expected constant, inclusion or bump"))),
    }
}

fn set(cfg: &mut RunConfig, line: usize, key: &str, v: &str) -> Result<(), CliError> {
    match key {
        "command" => {
            cfg.command = Command::ALL
                .into_iter()
                .find(|c| c.name() == v)
                .ok_or_else(|| err(line, format!("unknown command '{v}'")))?;
        }
        "domain" => {
            let mut it = v.split_whitespace();
            let kind = it.next().unwrap_or_default();
            let n: usize = num(line, key, it.next().unwrap_or_default())?;
            if it.next().is_some() {
                return Err(err(line, "domain: expected 'polygon N' or 'disk N'"));
            }
            cfg.domain = match kind {
                "polygon" if n >= 1 => Domain::Polygon(n),
                "disk" if n >= 8 => Domain::Disk(n),
                "polygon" | "disk" => return Err(err(line, format!("domain: {kind} {n} is too coarse"))),
                _ => return Err(err(line, "domain: expected 'polygon N' or 'disk N'")),
            };
        }
        "levels" => cfg.levels = num(line, key, v)?,
        "electrodes" => {
            let mut it = v.split_whitespace();
            cfg.electrodes = match it.next() {
                Some("uniform") => {
                    let count: usize = num(line, key, it.next().unwrap_or_default())?;
                    let coverage = finite(line, key, it.next().unwrap_or_default())?;
                    if it.next().is_some() {
                        return Err(err(line, "electrodes: expected 'uniform COUNT COVERAGE'"));
                    }
                    if count < 2 {
                        return Err(err(line, "electrodes: need at least 2"));
                    }
                    if !(coverage > 0.0 && coverage < 1.0) {
                        return Err(err(line, "electrodes: coverage must lie in (0, 1)"));
                    }
                    ElectrodeSpec::Uniform { count, coverage }
                }
                Some("arcs") => {
                    let arcs = it
                        .map(|t| {
                            let (a, b) = t
                                .split_once(':')
                                .ok_or_else(|| err(line, format!("electrodes: arc '{t}' is not START:END")))?;
                            let (a, b) = (finite(line, key, a)?, finite(line, key, b)?);
                            if b <= a {
                                return Err(err(line, format!("electrodes: arc '{t}' is empty")));
                            }
                            Ok((a, b))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if arcs.len() < 2 {
                        return Err(err(line, "electrodes: need at least 2"));
                    }
                    ElectrodeSpec::Arcs(arcs)
                }
                _ => return Err(err(line, "electrodes: expected 'uniform COUNT COVERAGE' or 'arcs A:B ...'")),
            };
        }
        "impedance" => {
            let z = floats(line, key, v)?;
            if z.iter().any(|z| *z <= 0.0) {
                return Err(err(line, "impedance: values must be positive"));
            }
            cfg.impedance = z;
        }
        "patterns" => {
            let (kind, rest) = v.split_once(char::is_whitespace).unwrap_or((v, ""));
            cfg.patterns = match kind {
                "adjacent-dipoles" => {
                    let p: usize = num(line, key, rest)?;
                    if p == 0 {
                        return Err(err(line, "patterns: need at least one dipole"));
                    }
                    PatternSpec::AdjacentDipoles(p)
                }
                "file" => PatternSpec::File(path(line, key, rest.trim())?),
                _ => return Err(err(line, "patterns: expected 'adjacent-dipoles P' or 'file PATH'")),
            };
        }
        "truth" => cfg.truth = parse_truth(line, key, v)?,
        "perturbation" => cfg.perturbation = parse_truth(line, key, v)?,
        "background" => cfg.background = positive(line, key, v)?,
        "noise" => {
            let d = finite(line, key, v)?;
            if d < 0.0 {
                return Err(err(line, "noise: must be nonnegative"));
            }
            cfg.noise = d;
        }
        "seed" => cfg.seed = num(line, key, v)?,
        "alpha" => {
            let a = finite(line, key, v)?;
            if a < 0.0 {
                return Err(err(line, format!("alpha: {a} must be nonnegative")));
            }
            cfg.alpha = a;
        }
        "penalty" => {
            cfg.penalty = match v {
                "h1" => PenaltyKind::H1,
                "tv" => PenaltyKind::Tv,
                _ => return Err(err(line, "penalty: expected h1 or tv")),
            }
        }
        "eps_tv" => cfg.eps_tv = Some(positive(line, key, v)?),
        "lambda" => {
            let l = finite(line, key, v)?;
            if !(l > 0.0 && l < 1.0) {
                return Err(err(line, "lambda: must lie in (0, 1)"));
            }
            cfg.lambda = l;
        }
        "max_iters" => cfg.max_iters = num(line, key, v)?,
        "tol" => {
            let t = finite(line, key, v)?;
            if t < 0.0 {
                return Err(err(line, "tol: must be nonnegative"));
            }
            cfg.tol = t;
        }
        "armijo_c" | "backtrack" => {
            let c = finite(line, key, v)?;
            if !(c > 0.0 && c < 1.0) {
                return Err(err(line, format!("{key}: must lie in (0, 1)")));
            }
            if key == "armijo_c" {
                cfg.armijo_c = c;
            } else {
                cfg.backtrack = c;
            }
        }
        "step_init" => cfg.step_init = Some(positive(line, key, v)?),
        "metric" => {
            cfg.metric = match v {
                "h1" => MetricKind::H1,
                "l2" => MetricKind::L2,
                _ => return Err(err(line, "metric: expected h1 or l2")),
            }
        }
        "data" => cfg.data = Some(path(line, key, v)?),
        "sigma" => cfg.sigma = Some(path(line, key, v)?),
        "mesh" => cfg.mesh = Some(path(line, key, v)?),
        "n_list" => {
            let n = v
                .split_whitespace()
                .map(|t| num::<usize>(line, key, t))
                .collect::<Result<Vec<_>, _>>()?;
            if n.len() < 2 || n[0] < 8 || n.windows(2).any(|w| w[1] <= w[0]) {
                return Err(err(line, "n_list: need at least two increasing values, each at least 8"));
            }
            cfg.n_list = n;
        }
        "amplitudes" => {
            let a = floats(line, key, v)?;
            if a.iter().any(|t| *t < 0.0) {
                return Err(err(line, "amplitudes: values must be nonnegative"));
            }
            cfg.amplitudes = a;
        }
        "output" => cfg.output = Some(path(line, key, v)?),
        _ => unreachable!("key list and setter disagree on '{key}'"),
    }
    Ok(())
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(Command::Mesh);
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, found '{trimmed}'")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(line, format!("unknown key '{k}'")));
        }
        let key = canonical(k);
        if let Some(first) = seen.insert(key, line) {
            return Err(err(line, format!("'{key}' already set on line {first}")));
        }
        set(&mut cfg, line, key, v)?;
    }
    let line_of = |k: &str| seen.get(k).copied().unwrap_or(0);
    if !seen.contains_key("command") {
        return Err(err(0, "missing required key 'command'"));
    }
    let l = cfg.electrodes.count();
    if cfg.impedance.len() != 1 && cfg.impedance.len() != l {
        return Err(err(
            line_of("impedance"),
            format!("impedance: {} values for {l} electrodes", cfg.impedance.len()),
        ));
    }
    if let PatternSpec::AdjacentDipoles(p) = cfg.patterns {
        if p > l {
            return Err(err(line_of("patterns"), format!("patterns: {p} dipoles for {l} electrodes")));
        }
    }
    if matches!(cfg.command, Command::StudyForward | Command::StudyMinimizer) && cfg.levels < 2 {
        return Err(err(line_of("levels"), "levels: studies need at least 2"));
    }
    if cfg.command.is_study() && cfg.mesh.is_some() {
        return Err(err(line_of("mesh"), "mesh: studies generate their own meshes"));
    }
    if cfg.command == Command::StudyGeometry && matches!(cfg.domain, Domain::Polygon(_)) {
        return Err(err(line_of("domain"), "domain: the geometry study needs a disk"));
    }
    if cfg.command == Command::StudyContinuity && cfg.perturbation == TruthKind::Constant {
        // the constant shape is identically zero
        return Err(err(line_of("perturbation"), "perturbation: constant shape never moves sigma"));
    }
    if !(cfg.background > cfg.lambda && cfg.background < 1.0 / cfg.lambda) {
        return Err(err(
            line_of("background"),
            format!("background {} must lie inside ({}, {})", cfg.background, cfg.lambda, 1.0 / cfg.lambda),
        ));
    }
    Ok(cfg)
}
