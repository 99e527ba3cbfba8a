//! Sparse storage and the symmetric positive definite solvers used by the
//! forward model: an envelope (profile) Cholesky factorization under a
//! reverse Cuthill–McKee ordering, and Jacobi-preconditioned conjugate
//! gradients for systems too large to factor.

use std::collections::VecDeque;

/// Compressed sparse row matrix with a fixed, sorted sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix whose row `i` holds the columns in `adjacency[i]` plus the diagonal.
    pub fn from_adjacency(adjacency: &[Vec<usize>]) -> Self {
        let n = adjacency.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (i, nbrs) in adjacency.iter().enumerate() {
            let mut cols: Vec<usize> = nbrs.iter().copied().chain(std::iter::once(i)).collect();
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    /// Adds `v` to entry `(i, j)`. Panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .index(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>())
            .sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// Entrywise sum of two matrices sharing a pattern.
    pub fn add_matrix(&mut self, other: &CsrMatrix) {
        assert_eq!(self.col_idx, other.col_idx, "patterns differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }
}

/// Reverse Cuthill–McKee ordering of an undirected graph. Returns `perm`
/// with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree = |v: usize| adjacency[v].len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adjacency[v] {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let depth = level[last];
        (level, depth)
    };

    while order.len() < n {
        // pseudo-peripheral start within the next unvisited component
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree(v))
            .expect("unvisited vertex");
        let mut start = seed;
        let (mut levels, mut depth) = bfs_levels(start);
        loop {
            let candidate = (0..n)
                .filter(|&v| levels[v] == depth)
                .min_by_key(|&v| degree(v))
                .unwrap_or(start);
            let (cl, cd) = bfs_levels(candidate);
            if cd > depth {
                start = candidate;
                levels = cl;
                depth = cd;
            } else {
                break;
            }
        }

        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adjacency[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree(w), w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Failure of the Cholesky factorization: the matrix is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

/// Lower-triangular envelope Cholesky factor `P A P^T = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors the symmetric matrix given by its lower-triangular entries
    /// `(i, j, v)` with `i >= j` in original numbering; duplicates are summed.
    /// `perm[new] = old` is the elimination order.
    pub fn factor(
        n: usize,
        lower_entries: &[(usize, usize, f64)],
        perm: Vec<usize>,
    ) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(perm.len(), n);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in lower_entries {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            first[r] = first[r].min(c);
        }
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for i in 0..n {
            row_start.push(row_start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; row_start[n]];
        for &(i, j, v) in lower_entries {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            data[row_start[r] + c - first[r]] += v;
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let ri = row_start[i];
                let rj = row_start[j];
                let mut s = data[ri + j - fi];
                for k in k0..j {
                    s -= data[ri + k - fi] * data[rj + k - fj];
                }
                let ljj = data[rj + j - fj];
                data[ri + j - fi] = s / ljj;
            }
            let ri = row_start[i];
            let mut d = data[ri + i - fi];
            for k in fi..i {
                let l = data[ri + k - fi];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite { row: perm[i], pivot: d });
            }
            data[ri + i - fi] = d.sqrt();
        }

        Ok(Self {
            n,
            perm,
            inv,
            first,
            row_start,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.row_start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[ri + k - fi] * y[k];
            }
            y[i] = s / self.data[ri + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ri = self.row_start[i];
            y[i] /= self.data[ri + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.data[ri + k - fi] * yi;
            }
        }
        (0..n).map(|old| y[self.inv[old]]).collect()
    }
}

/// Outcome of a conjugate gradient run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
/// Returns the solution or the final statistics on stagnation.
pub fn preconditioned_cg(
    apply: impl Fn(&[f64], &mut [f64]),
    diagonal: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats), CgStats> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diagonal).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(CgStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / bnorm;
        if rel <= rel_tol {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] / diagonal[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(CgStats {
        iterations: max_iter,
        relative_residual: rel,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> (Vec<Vec<usize>>, Vec<(usize, usize, f64)>) {
        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 2.5));
            if i > 0 {
                entries.push((i, i - 1, -1.0));
            }
        }
        (adjacency, entries)
    }

    #[test]
    fn rcm_is_a_permutation() {
        let (adj, _) = path_laplacian(17);
        let mut p = reverse_cuthill_mckee(&adj);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn rcm_handles_disconnected_graphs() {
        let adj = vec![vec![1], vec![0], vec![], vec![4], vec![3]];
        let mut p = reverse_cuthill_mckee(&adj);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn cholesky_solves_tridiagonal_system() {
        let n = 30;
        let (adj, entries) = path_laplacian(n);
        let chol = EnvelopeCholesky::factor(n, &entries, reverse_cuthill_mckee(&adj)).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = 2.5 * x_true[i];
            if i > 0 {
                b[i] -= x_true[i - 1];
            }
            if i + 1 < n {
                b[i] -= x_true[i + 1];
            }
        }
        let x = chol.solve(&b);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let entries = vec![(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)];
        assert!(EnvelopeCholesky::factor(2, &entries, vec![0, 1]).is_err());
    }

    #[test]
    fn cg_matches_cholesky() {
        let n = 40;
        let (adj, entries) = path_laplacian(n);
        let mut a = CsrMatrix::from_adjacency(&adj);
        for &(i, j, v) in &entries {
            a.add(i, j, v);
            if i != j {
                a.add(j, i, v);
            }
        }
        assert!(a.is_symmetric(0.0));
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        let (x, stats) =
            preconditioned_cg(|p, y| a.mul_vec(p, y), &a.diagonal(), &b, 1e-13, 400).unwrap();
        assert!(stats.relative_residual <= 1e-13);
        let chol = EnvelopeCholesky::factor(n, &entries, (0..n).collect()).unwrap();
        let y = chol.solve(&b);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-11);
        }
    }
}
