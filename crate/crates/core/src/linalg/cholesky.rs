//! Envelope (skyline) Cholesky factorization with reverse Cuthill-McKee
//! ordering, for the symmetric positive definite systems of Newton's method.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error("matrix is not positive definite (pivot {pivot} at permuted row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(m: &CsrMatrix<T>) -> Vec<usize> {
    let n = m.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| m.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_last = |start: usize, visited: &[bool]| -> usize {
        let mut seen = visited.to_vec();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        last
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unvisited vertex");
        // two sweeps approximate a pseudo-peripheral start
        let start = bfs_last(bfs_last(seed, &visited), &visited);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P A Pᵀ = L Lᵀ` stored row-wise inside the envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky<T> {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> EnvelopeCholesky<T> {
    pub fn factor(m: &CsrMatrix<T>) -> Result<Self, FactorError> {
        let n = m.n();
        let perm = reverse_cuthill_mckee(m);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new_r, &old_r) in perm.iter().enumerate() {
            for (c, _) in m.row(old_r) {
                first[new_r] = first[new_r].min(inv[c]);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut values = vec![T::zero(); offset[n]];
        for (new_r, &old_r) in perm.iter().enumerate() {
            for (c, v) in m.row(old_r) {
                let new_c = inv[c];
                if new_c <= new_r {
                    values[offset[new_r] + new_c - first[new_r]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut acc = values[offset[i] + j - fi];
                let row_i = &values[offset[i] + k0 - fi..offset[i] + j - fi];
                let row_j = &values[offset[j] + k0 - fj..offset[j] + j - fj];
                for (a, b) in row_i.iter().zip(row_j) {
                    acc -= *a * *b;
                }
                if j < i {
                    let ljj = values[offset[j] + j - fj];
                    values[offset[i] + j - fi] = acc / ljj;
                } else {
                    if !(acc > T::zero()) {
                        return Err(FactorError::NotPositiveDefinite { row: i, pivot: acc.f64() });
                    }
                    values[offset[i] + i - fi] = acc.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky { perm, first, offset, values })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Entries stored in the envelope.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        // forward: L y = Pb
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let mut acc = y[i];
            for (k, l) in (fi..i).zip(row) {
                acc -= *l * y[k];
            }
            y[i] = acc / row[i - fi];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in (fi..i).zip(row) {
                y[k] -= *l * yi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize, shift: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn solves_shifted_path() {
        let m = path_laplacian(50, 0.1);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = m.mul_vec(&x);
        let f = EnvelopeCholesky::factor(&m).unwrap();
        let y = f.solve(&b);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        // a path graph has bandwidth 1 under RCM
        assert_eq!(f.envelope_size(), 2 * 50 - 1);
    }

    #[test]
    fn rejects_indefinite() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(EnvelopeCholesky::factor(&m), Err(FactorError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn rcm_is_a_permutation_on_disconnected_graphs() {
        let m = CsrMatrix::from_triplets(4, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0), (0, 3, 0.1), (3, 0, 0.1)]);
        let mut p = reverse_cuthill_mckee(&m);
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }
}
