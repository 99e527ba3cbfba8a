use std::f64::consts::PI;

use super::{DomainKind, TriMesh};
use crate::error::{Error, Result};

/// Electrode arcs on the boundary with their contact impedances.
///
/// On a disk an arc is a range of polar angles; on a polygon it is a range of
/// arclength measured counterclockwise from the boundary vertex with the
/// smallest `(y, x)`. Arcs may wrap past the period.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeConfig {
    arcs: Vec<(f64, f64)>,
    impedances: Vec<f64>,
}

impl ElectrodeConfig {
    pub fn new(arcs: Vec<(f64, f64)>, impedances: Vec<f64>) -> Result<Self> {
        if arcs.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 electrodes, got {}", arcs.len())));
        }
        if arcs.len() != impedances.len() {
            return Err(Error::invalid(format!(
                "{} arcs but {} impedances",
                arcs.len(),
                impedances.len()
            )));
        }
        for (l, &(a, b)) in arcs.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::invalid(format!("electrode {l}: arc ({a}, {b}) is empty")));
            }
        }
        if let Some(z) = impedances.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
            return Err(Error::invalid(format!("contact impedance {z} must be positive")));
        }
        Ok(Self { arcs, impedances })
    }

    /// `count` equal electrodes, electrode `l` starting at `l * period / count`
    /// and covering `coverage` of its share of the boundary.
    pub fn uniform(count: usize, coverage: f64, period: f64, impedance: f64) -> Result<Self> {
        if !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::invalid(format!("coverage {coverage} must lie in (0, 1)")));
        }
        let share = period / count as f64;
        let arcs = (0..count)
            .map(|l| {
                let s = l as f64 * share;
                (s, s + coverage * share)
            })
            .collect();
        Self::new(arcs, vec![impedance; count])
    }

    /// Evenly spaced electrodes on the unit-circle boundary.
    pub fn uniform_disk(count: usize, coverage: f64, impedance: f64) -> Result<Self> {
        Self::uniform(count, coverage, 2.0 * PI, impedance)
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn impedances(&self) -> &[f64] {
        &self.impedances
    }

    /// Same arcs with every impedance multiplied by `c`.
    pub fn scaled_impedances(&self, c: f64) -> Result<Self> {
        Self::new(self.arcs.clone(), self.impedances.iter().map(|z| z * c).collect())
    }

    /// Reorders electrodes: electrode `l` of the result is electrode `perm[l]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::new(
            perm.iter().map(|&p| self.arcs[p]).collect(),
            perm.iter().map(|&p| self.impedances[p]).collect(),
        )
    }

    /// Whether boundary parameter `t` falls in arc `l` (closed, modulo `period`).
    pub fn contains(&self, l: usize, t: f64, period: f64) -> bool {
        let (a, b) = self.arcs[l];
        (t - a).rem_euclid(period) <= b - a
    }

    fn check_disjoint(&self, period: f64) -> Result<()> {
        for (l, &(a, b)) in self.arcs.iter().enumerate() {
            if b - a >= period {
                return Err(Error::invalid(format!("electrode {l} covers the whole boundary")));
            }
        }
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i != j && self.contains(i, self.arcs[j].0, period) {
                    return Err(Error::invalid(format!("electrodes {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

/// Tags every boundary edge whose midpoint parameter lies in an electrode arc.
/// On a disk the parameter is the polar angle of the chord midpoint, which is
/// also the angle of its normal-ray image on the circle.
pub fn tag_electrodes(mesh: &TriMesh, config: &ElectrodeConfig) -> Result<TriMesh> {
    let period = match mesh.domain() {
        DomainKind::Disk { .. } => 2.0 * PI,
        DomainKind::Polygon => mesh.perimeter(),
    };
    config.check_disjoint(period)?;
    let cumulative = mesh.cumulative_arclength();
    let mut tags = vec![None; mesh.boundary().len()];
    let mut captured = vec![0usize; config.len()];
    for (e, tag) in tags.iter_mut().enumerate() {
        let (a, b) = mesh.edge_endpoints(e);
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let t = mesh.boundary_parameter(e, m, &cumulative);
        if let Some(l) = (0..config.len()).find(|&l| config.contains(l, t, period)) {
            *tag = Some(l);
            captured[l] += 1;
        }
    }
    if let Some(l) = captured.iter().position(|&c| c == 0) {
        return Err(Error::ElectrodeUnresolved { electrode: l });
    }
    Ok(mesh.clone().with_tags(tags))
}
