//! Symmetric sparse matrices and an envelope (skyline) Cholesky solver.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Symmetric matrix in compressed-row form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds the matrix from `(row, col, value)` triplets of the upper
    /// triangle (`row <= col`); duplicates are summed.
    pub fn from_upper_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full = Vec::with_capacity(2 * triplets.len());
        for &(r, c, v) in triplets {
            if r > c || c >= dim {
                return Err(Error::InvalidArgument(format!("triplet ({r}, {c}) outside upper triangle of {dim}")));
            }
            full.push((r, c, v));
            if r != c {
                full.push((c, r, v));
            }
        }
        full.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(full.len());
        let mut values: Vec<f64> = Vec::with_capacity(full.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in full {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseSymmetric { dim, row_ptr, cols, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Upper-triangle entries `(row, col, value)` with `row <= col`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).filter(move |&(c, _)| c >= r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim).map(|r| x[r] * self.row(r).map(|(c, v)| v * y[c]).sum::<f64>()).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + alpha * other`; both must share a sparsity pattern.
    pub fn add_scaled(&self, alpha: f64, other: &SparseSymmetric) -> Result<SparseSymmetric> {
        if self.row_ptr != other.row_ptr || self.cols != other.cols {
            return Err(Error::InvalidArgument("sparsity patterns differ".into()));
        }
        Ok(SparseSymmetric {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect(),
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }
}

/// Reverse Cuthill-McKee ordering of the matrix graph. `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSymmetric) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|r| a.row(r).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        let start = pseudo_peripheral(a, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.row(v).map(|(c, _)| c).filter(|&c| !visited[c]).collect();
            next.sort_by_key(|&c| (degree[c], c));
            for c in next {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

/// Breadth-first levels from `root`: (last level, eccentricity).
fn bfs_last_level(a: &SparseSymmetric, root: usize) -> (Vec<usize>, usize) {
    let mut dist = vec![usize::MAX; a.dim()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut ecc = 0;
    while let Some(v) = queue.pop_front() {
        ecc = ecc.max(dist[v]);
        for (c, _) in a.row(v) {
            if dist[c] == usize::MAX {
                dist[c] = dist[v] + 1;
                queue.push_back(c);
            }
        }
    }
    let last = (0..a.dim()).filter(|&i| dist[i] == ecc).collect();
    (last, ecc)
}

fn pseudo_peripheral(a: &SparseSymmetric, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut last, mut ecc) = bfs_last_level(a, root);
    loop {
        let candidate = *last.iter().min_by_key(|&&i| (degree[i], i)).unwrap();
        let (next_last, next_ecc) = bfs_last_level(a, candidate);
        if next_ecc <= ecc {
            return root;
        }
        root = candidate;
        last = next_last;
        ecc = next_ecc;
    }
}

/// Cholesky factor `P A Pᵀ = L Lᵀ` stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `a` after a reverse Cuthill-McKee reordering.
    pub fn factor(a: &SparseSymmetric) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with(a, perm)
    }

    pub fn factor_with(a: &SparseSymmetric, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(perm[i]).map(|(c, _)| inv[c]).min().unwrap_or(i).min(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (c, v) in a.row(perm[i]) {
                let j = inv[c];
                if j <= i {
                    data[start[i] + (j - first[i])] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, tail) = data.split_at_mut(row_i);
                let lj = &head[start[j]..start[j + 1]];
                let li = &mut tail[..=(i - fi)];
                let dot: f64 = li[k0 - fi..j - fi]
                    .iter()
                    .zip(&lj[k0 - fj..j - fj])
                    .map(|(x, y)| x * y)
                    .sum();
                li[j - fi] = (li[j - fi] - dot) / lj[j - fj];
            }
            let row = &mut data[row_i..start[i + 1]];
            let (off, diag) = row.split_at_mut(i - fi);
            let d = diag[0] - off.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite(perm[i]));
            }
            diag[0] = d.sqrt();
        }
        Ok(SkylineCholesky { perm, first, start, data })
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = Pb, row-oriented
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        // Lᵀ z = y, column-oriented over rows of L
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (l, x) in row[..i - fi].iter().zip(&mut y[fi..i]) {
                *x -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
