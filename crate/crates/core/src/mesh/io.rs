//! Plain-text mesh format:
//!
//! ```text
//! eitmesh 1
//! vertices N
//! x y            (N lines)
//! triangles M
//! i j k          (M lines, 0-based)
//! boundary B
//! i j tag        (B lines, tag 0 = none, 1..L = electrode)
//! domain polygon | domain disk cx cy r
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{DomainKind, TriMesh};
use crate::error::{Error, Result};
use crate::fmt_f64;

pub fn write_mesh(mesh: &TriMesh) -> String {
    let mut s = String::new();
    s.push_str("eitmesh 1\n");
    let _ = writeln!(s, "vertices {}", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {}", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    let _ = writeln!(s, "triangles {}", mesh.n_triangles());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary().len());
    for (e, tag) in mesh.boundary().iter().zip(mesh.electrode_of_edge()) {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], tag.map_or(0, |l| l + 1));
    }
    match mesh.domain() {
        DomainKind::Polygon => s.push_str("domain polygon\n"),
        DomainKind::Disk { center, radius } => {
            let _ = writeln!(
                s,
                "domain disk {} {} {}",
                fmt_f64(center[0]),
                fmt_f64(center[1]),
                fmt_f64(radius)
            );
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok((i + 1, fields));
            }
        }
        Err(Error::Parse {
            line: 0,
            message: "unexpected end of mesh file".into(),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (line, f) = self.next_fields()?;
        if f.len() != 2 || f[0] != keyword {
            return Err(Error::Parse {
                line,
                message: format!("expected '{keyword} <count>'"),
            });
        }
        parse(line, f[1])
    }
}

fn parse<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        message: format!("malformed value '{s}'"),
    })
}

fn expect_len(line: usize, f: &[&str], n: usize) -> Result<()> {
    if f.len() != n {
        return Err(Error::Parse {
            line,
            message: format!("expected {n} fields, found {}", f.len()),
        });
    }
    Ok(())
}

pub fn read_mesh(text: &str) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, f) = lines.next_fields()?;
    if f != ["eitmesh", "1"] {
        return Err(Error::Parse {
            line,
            message: "missing 'eitmesh 1' header".into(),
        });
    }
    let nv = lines.header("vertices")?;
    let mut nodes = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = lines.next_fields()?;
        expect_len(line, &f, 2)?;
        nodes.push([parse(line, f[0])?, parse(line, f[1])?]);
    }
    let nt = lines.header("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = lines.next_fields()?;
        expect_len(line, &f, 3)?;
        triangles.push([parse(line, f[0])?, parse(line, f[1])?, parse(line, f[2])?]);
    }
    let nb = lines.header("boundary")?;
    let mut tag_of: HashMap<(usize, usize), Option<usize>> = HashMap::new();
    for _ in 0..nb {
        let (line, f) = lines.next_fields()?;
        expect_len(line, &f, 3)?;
        let (i, j, tag): (usize, usize, usize) = (parse(line, f[0])?, parse(line, f[1])?, parse(line, f[2])?);
        tag_of.insert((i, j), tag.checked_sub(1));
    }
    let (line, f) = lines.next_fields()?;
    let domain = match f.as_slice() {
        ["domain", "polygon"] => DomainKind::Polygon,
        ["domain", "disk", cx, cy, r] => DomainKind::Disk {
            center: [parse(line, cx)?, parse(line, cy)?],
            radius: parse(line, r)?,
        },
        _ => {
            return Err(Error::Parse {
                line,
                message: "expected 'domain polygon' or 'domain disk cx cy r'".into(),
            })
        }
    };

    let mesh = TriMesh::new(nodes, triangles, domain)?;
    if mesh.boundary().len() != nb {
        return Err(Error::InvalidMesh(format!(
            "file lists {nb} boundary edges, triangles imply {}",
            mesh.boundary().len()
        )));
    }
    let tags = mesh
        .boundary()
        .iter()
        .map(|e| {
            tag_of
                .get(&(e.nodes[0], e.nodes[1]))
                .copied()
                .ok_or_else(|| Error::InvalidMesh(format!("boundary edge {:?} missing from file", e.nodes)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mesh.with_tags(tags))
}
