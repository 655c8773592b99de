//! Sparse symmetric matrices and an up-looking sparse Cholesky
//! factorization (elimination tree, row-pattern reach, column-by-column
//! storage of `L`).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

/// Symmetric matrix with both triangles stored column-wise, rows sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds from `(i, j, v)` entries. Off-diagonal entries are given once
    /// and mirrored; duplicates are summed.
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in entries {
            cols[j].push((i, v));
            if i != j {
                cols[i].push((j, v));
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in cols {
            col.sort_by_key(|&(i, _)| i);
            for (i, v) in col {
                if row_idx.len() > *col_ptr.last().unwrap() && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SymmetricMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Builds from a dense row-major matrix, checking symmetry.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self, SparseError> {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                let (a, b) = (dense[i * n + j], dense[j * n + i]);
                if a != b {
                    return Err(SparseError::NotSymmetric { row: i, col: j });
                }
                if a != 0.0 {
                    entries.push((i, j, a));
                }
            }
        }
        Ok(Self::from_entries(n, &entries))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of column `j` as `(row, value)`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.column(j).find(|&(r, _)| r == i).map_or(0.0, |(_, v)| v)
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `A + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() / 2 + self.n);
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                if i > j {
                    entries.push((i, j, v));
                }
            }
            entries.push((j, j, self.get(j, j) + d[j]));
        }
        Self::from_entries(self.n, &entries)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                y[i] += v * x[j];
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `B = P A P^T` with `B[k][l] = A[perm[k]][perm[l]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; self.n];
        for (k, &v) in perm.iter().enumerate() {
            inv[v] = k;
        }
        let mut entries = Vec::with_capacity(self.nnz());
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                if i >= j {
                    entries.push((inv[i], inv[j], v));
                }
            }
        }
        Self::from_entries(self.n, &entries)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for j in 0..self.n {
            for (i, v) in self.column(j) {
                d[i * self.n + j] = v;
            }
        }
        d
    }

    fn pattern_from_adjacency(adjacency: &[Vec<usize>]) -> Self {
        let n = adjacency.len();
        let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        for (i, nb) in adjacency.iter().enumerate() {
            for &j in nb {
                if j < i {
                    entries.push((i, j, 1.0));
                }
            }
        }
        Self::from_entries(n, &entries)
    }
}

fn elimination_tree(a: &SymmetricMatrix) -> Vec<Option<usize>> {
    let n = a.n;
    let mut parent = vec![None; n];
    let mut ancestor: Vec<Option<usize>> = vec![None; n];
    for k in 0..n {
        for (i0, _) in a.column(k) {
            let mut i = Some(i0);
            while let Some(node) = i {
                if node >= k {
                    break;
                }
                let next = ancestor[node];
                ancestor[node] = Some(k);
                if next.is_none() {
                    parent[node] = Some(k);
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), in an order
/// where every column appears after all of its etree descendants.
fn row_pattern(
    a: &SymmetricMatrix,
    k: usize,
    parent: &[Option<usize>],
    mark: &mut [usize],
    stack: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    // `mark[i] == k + 1` flags visited nodes for row k.
    out.clear();
    mark[k] = k + 1;
    for (i0, _) in a.column(k) {
        if i0 >= k {
            continue;
        }
        stack.clear();
        let mut i = i0;
        while mark[i] != k + 1 {
            stack.push(i);
            mark[i] = k + 1;
            match parent[i] {
                Some(p) => i = p,
                None => break,
            }
        }
        // Prepend this path (descendants first) ahead of earlier paths.
        let tail = std::mem::take(out);
        out.extend(stack.iter().copied());
        out.extend(tail);
    }
}

/// Number of strictly-lower nonzeros of the Cholesky factor of `a`.
pub fn symbolic_lower_nnz(a: &SymmetricMatrix) -> usize {
    let parent = elimination_tree(a);
    let mut mark = vec![0usize; a.n];
    let (mut stack, mut pat) = (Vec::new(), Vec::new());
    (0..a.n)
        .map(|k| {
            row_pattern(a, k, &parent, &mut mark, &mut stack, &mut pat);
            pat.len()
        })
        .sum()
}

/// Cholesky fill-in (new strictly-lower nonzeros) when eliminating the
/// variables of `adjacency` in `order` (first entry eliminated first).
pub fn cholesky_fill_in(adjacency: &[Vec<usize>], order: &[usize]) -> usize {
    let pattern = SymmetricMatrix::pattern_from_adjacency(adjacency).permuted(order);
    let lower_a = (pattern.nnz() - pattern.n) / 2;
    symbolic_lower_nnz(&pattern) - lower_a
}

/// Lower-triangular Cholesky factor `A = L L^T`, stored by columns with the
/// diagonal first and rows ascending.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymmetricMatrix) -> Result<Self, SparseError> {
        let n = a.n;
        let parent = elimination_tree(a);
        let mut mark = vec![0usize; n];
        let (mut stack, mut pat) = (Vec::new(), Vec::new());
        let mut counts = vec![1usize; n];
        for k in 0..n {
            row_pattern(a, k, &parent, &mut mark, &mut stack, &mut pat);
            for &i in &pat {
                counts[i] += 1;
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for c in &counts {
            col_ptr.push(col_ptr.last().unwrap() + c);
        }
        let nnz = *col_ptr.last().unwrap();
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        // next free slot per column; slot 0 of each column holds the diagonal
        let mut next: Vec<usize> = col_ptr[..n].iter().map(|&p| p + 1).collect();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = 0);
        for k in 0..n {
            row_pattern(a, k, &parent, &mut mark, &mut stack, &mut pat);
            for (i, v) in a.column(k) {
                if i <= k {
                    x[i] = v;
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &pat {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                row_idx[next[i]] = k;
                values[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(SparseError::NotPositiveDefinite { pivot: k, value: d });
            }
            row_idx[col_ptr[k]] = k;
            values[col_ptr[k]] = d.sqrt();
        }
        Ok(Cholesky {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn diag(&self, k: usize) -> f64 {
        self.values[self.col_ptr[k]]
    }

    /// Strictly-lower entries of column `k` as `(row, value)`.
    pub fn below_diagonal(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[k] + 1..self.col_ptr[k + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// `log det A = 2 sum log L_kk`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|k| self.diag(k).ln()).sum::<f64>()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        for j in 0..self.n {
            b[j] /= self.diag(j);
            let bj = b[j];
            for (i, v) in self.below_diagonal(j) {
                b[i] -= v * bj;
            }
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        for j in (0..self.n).rev() {
            let mut s = b[j];
            for (i, v) in self.below_diagonal(j) {
                s -= v * b[i];
            }
            b[j] = s / self.diag(j);
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower(&mut x);
        self.solve_upper(&mut x);
        x
    }
}
