use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Admissible box `[lambda, 1/lambda]` for conductivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    lambda: f64,
}

impl Bounds {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::invalid(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lower(&self) -> f64 {
        self.lambda
    }

    pub fn upper(&self) -> f64 {
        1.0 / self.lambda
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower(), self.upper())
    }
}

/// P1 coefficients, one per mesh node, optionally carrying conductivity bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
    bounds: Option<Bounds>,
}

impl NodalField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value {} at node {i}", values[i])));
        }
        Ok(Self { values, bounds: None })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            values: vec![c; n],
            bounds: None,
        }
    }

    /// A conductivity in `[lambda, 1/lambda]`; every node is checked.
    pub fn admissible(values: Vec<f64>, lambda: f64) -> Result<Self> {
        let f = Self::admissible_unchecked(values, lambda)?;
        f.check_admissible()?;
        Ok(f)
    }

    /// Attaches bounds without checking the values against them. Consumers
    /// that rely on admissibility call [`NodalField::check_admissible`].
    pub fn admissible_unchecked(values: Vec<f64>, lambda: f64) -> Result<Self> {
        let bounds = Bounds::new(lambda)?;
        let mut f = Self::new(values)?;
        f.bounds = Some(bounds);
        Ok(f)
    }

    pub fn check_admissible(&self) -> Result<()> {
        let Some(b) = self.bounds else { return Ok(()) };
        match self
            .values
            .iter()
            .position(|&v| !(v >= b.lower() && v <= b.upper()))
        {
            Some(node) => Err(Error::InadmissibleConductivity {
                node,
                value: self.values[node],
                lower: b.lower(),
                upper: b.upper(),
            }),
            None => Ok(()),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn bounds(&self) -> Option<Bounds> {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One value per line, 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(24 * self.values.len());
        for v in &self.values {
            let _ = writeln!(s, "{}", crate::fmt_f64(*v));
        }
        s
    }

    /// Reads [`NodalField::to_text`] output (blank lines and `#` comments skipped).
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            values.push(line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("malformed value '{line}'"),
            })?);
        }
        Self::new(values)
    }
}

/// Electrode currents summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentPattern {
    values: Vec<f64>,
}

impl CurrentPattern {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("a current pattern needs at least 2 finite entries"));
        }
        let sum: f64 = values.iter().sum();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sum.abs() > 1e-14 * norm {
            return Err(Error::invalid(format!("currents sum to {sum:e}, not zero")));
        }
        Ok(Self { values })
    }

    /// Subtracts the mean, then validates.
    pub fn zero_mean(mut values: Vec<f64>) -> Result<Self> {
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        values.iter_mut().for_each(|v| *v -= mean);
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parses one whitespace-separated pattern per non-empty line.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("malformed current '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = out.first() {
                if first.len() != values.len() {
                    return Err(bad(format!("expected {} currents, found {}", first.len(), values.len())));
                }
            }
            out.push(Self::new(values).map_err(|e| bad(e.to_string()))?);
        }
        if out.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no current patterns".into(),
            });
        }
        Ok(out)
    }

    pub fn list_to_text(patterns: &[Self]) -> String {
        let mut s = String::new();
        for p in patterns {
            let row: Vec<String> = p.values.iter().map(|v| crate::fmt_f64(*v)).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }
}

/// Adjacent-pair dipoles `e_p - e_{p+1}` (indices mod `l`) for `p < count`.
pub fn adjacent_dipoles(l: usize, count: usize) -> Result<Vec<CurrentPattern>> {
    if l < 2 || count == 0 || count > l {
        return Err(Error::invalid(format!(
            "need 1 <= patterns <= electrodes, got {count} patterns for {l} electrodes"
        )));
    }
    (0..count)
        .map(|p| {
            let mut v = vec![0.0; l];
            v[p] = 1.0;
            v[(p + 1) % l] -= 1.0;
            CurrentPattern::new(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_enforced() {
        assert!(NodalField::admissible(vec![0.1, 10.0, 1.0], 0.1).is_ok());
        assert!(matches!(
            NodalField::admissible(vec![1.0, 10.5], 0.1),
            Err(Error::InadmissibleConductivity { node: 1, .. })
        ));
        assert!(NodalField::admissible(vec![1.0], 1.0).is_err());
        assert!(NodalField::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn patterns_must_balance() {
        assert!(CurrentPattern::new(vec![1.0, -1.0, 0.0]).is_ok());
        assert!(CurrentPattern::new(vec![1.0, -0.9]).is_err());
        let p = CurrentPattern::zero_mean(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.values(), &[1.0, -1.0, 0.0]);
        let d = adjacent_dipoles(4, 4).unwrap();
        assert_eq!(d[3].values(), &[-1.0, 0.0, 0.0, 1.0]);
        assert!(adjacent_dipoles(4, 5).is_err());
    }

    #[test]
    fn text_round_trips() {
        let f = NodalField::new(vec![0.1, 1.0 / 3.0, -2.5e-7]).unwrap();
        assert_eq!(NodalField::from_text(&f.to_text()).unwrap(), f);
        let pats = adjacent_dipoles(5, 4).unwrap();
        assert_eq!(CurrentPattern::parse_list(&CurrentPattern::list_to_text(&pats)).unwrap(), pats);
        let err = CurrentPattern::parse_list("1 -1\n1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
