//! Sparse LDLᵀ factorization (up-looking, row by row) with a symbolic phase
//! that is shared by every matrix on the same sparsity pattern.

use std::sync::Arc;

use super::{nested_dissection, SparseSymMatrix, SparsityPattern};

/// Ordering, elimination tree and the nonzero structure of `L`. Depends only
/// on the pattern, so the factorizations of all time slabs share one copy.
#[derive(Debug)]
pub struct SymbolicLdl {
    n: usize,
    pattern: Arc<SparsityPattern>,
    /// perm[new] = old
    perm: Vec<usize>,
    /// For each permuted column k: (permuted row i <= k, value slot in the pattern).
    upper_ptr: Vec<usize>,
    upper: Vec<(usize, usize)>,
    /// Column pointers and row indices of strictly lower L (rows ascending).
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    /// Row patterns of L in topological order, with the slot in `l_idx` each
    /// entry is written to.
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_slots: Vec<usize>,
}

impl SymbolicLdl {
    pub fn new(pattern: Arc<SparsityPattern>) -> Self {
        let perm = nested_dissection(&pattern);
        Self::with_ordering(pattern, perm)
    }

    pub fn with_ordering(pattern: Arc<SparsityPattern>, perm: Vec<usize>) -> Self {
        let n = pattern.n;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut upper_ptr = Vec::with_capacity(n + 1);
        let mut upper = Vec::new();
        upper_ptr.push(0);
        for &old_k in &perm {
            let k = inv[old_k];
            let mut col: Vec<(usize, usize)> = pattern
                .row(old_k)
                .map(|s| (inv[pattern.col_idx[s]], s))
                .filter(|&(i, _)| i <= k)
                .collect();
            col.sort_unstable();
            upper.extend(col);
            upper_ptr.push(upper.len());
        }

        // elimination tree with path compression
        let mut parent = vec![usize::MAX; n];
        let mut ancestor = vec![usize::MAX; n];
        for k in 0..n {
            for &(i, _) in &upper[upper_ptr[k]..upper_ptr[k + 1]] {
                let mut i = i;
                while i != usize::MAX && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == usize::MAX {
                        parent[i] = k;
                    }
                    i = next;
                }
            }
        }

        // row patterns via etree reach
        let mut flag = vec![usize::MAX; n];
        let mut stack = vec![0usize; n];
        let mut path = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut row_cols = Vec::new();
        let mut col_count = vec![0usize; n];
        row_ptr.push(0);
        for k in 0..n {
            flag[k] = k;
            let mut top = n;
            for &(i, _) in &upper[upper_ptr[k]..upper_ptr[k + 1]] {
                let mut j = i;
                path.clear();
                while flag[j] != k {
                    path.push(j);
                    flag[j] = k;
                    j = parent[j];
                }
                let len = path.len();
                stack[top - len..top].copy_from_slice(&path);
                top -= len;
            }
            for &j in &stack[top..n] {
                col_count[j] += 1;
            }
            row_cols.extend_from_slice(&stack[top..n]);
            row_ptr.push(row_cols.len());
        }

        let mut l_ptr = Vec::with_capacity(n + 1);
        l_ptr.push(0);
        for k in 0..n {
            l_ptr.push(l_ptr[k] + col_count[k]);
        }
        let mut fill = l_ptr[..n].to_vec();
        let mut l_idx = vec![0; l_ptr[n]];
        let mut row_slots = vec![0; row_cols.len()];
        for k in 0..n {
            for t in row_ptr[k]..row_ptr[k + 1] {
                let j = row_cols[t];
                l_idx[fill[j]] = k;
                row_slots[t] = fill[j];
                fill[j] += 1;
            }
        }

        SymbolicLdl {
            n,
            pattern,
            perm,
            upper_ptr,
            upper,
            l_ptr,
            l_idx,
            row_ptr,
            row_cols,
            row_slots,
        }
    }

    pub fn nnz_l(&self) -> usize {
        self.l_idx.len()
    }
}

/// Numeric LDLᵀ factors of one matrix.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    symbolic: Arc<SymbolicLdl>,
    l: Vec<f64>,
    d: Vec<f64>,
}

/// Zero or non-finite pivot encountered during factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub pivot: usize,
    pub value: f64,
}

impl LdlFactor {
    pub fn factor(symbolic: Arc<SymbolicLdl>, matrix: &SparseSymMatrix) -> Result<Self, PivotFailure> {
        let s = &*symbolic;
        assert!(Arc::ptr_eq(&s.pattern, &matrix.pattern) || *s.pattern == *matrix.pattern);
        let n = s.n;
        let mut l = vec![0.0; s.nnz_l()];
        let mut d = vec![0.0; n];
        let mut fill = s.l_ptr[..n].to_vec();
        let mut y = vec![0.0; n];
        for k in 0..n {
            for &(i, slot) in &s.upper[s.upper_ptr[k]..s.upper_ptr[k + 1]] {
                y[i] += matrix.values[slot];
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for t in s.row_ptr[k]..s.row_ptr[k + 1] {
                let i = s.row_cols[t];
                let yi = y[i];
                y[i] = 0.0;
                for p in s.l_ptr[i]..fill[i] {
                    y[s.l_idx[p]] -= l[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                l[s.row_slots[t]] = lki;
                fill[i] += 1;
            }
            if dk == 0.0 || !dk.is_finite() {
                return Err(PivotFailure {
                    pivot: s.perm[k],
                    value: dk,
                });
            }
            d[k] = dk;
        }
        Ok(LdlFactor { symbolic, l, d })
    }

    /// True when every pivot is positive, i.e. the matrix is SPD.
    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let s = &*self.symbolic;
        let n = s.n;
        let mut x: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in s.l_ptr[j]..s.l_ptr[j + 1] {
                    x[s.l_idx[p]] -= self.l[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in s.l_ptr[j]..s.l_ptr[j + 1] {
                acc -= self.l[p] * x[s.l_idx[p]];
            }
            x[j] = acc;
        }
        for (new, &old) in s.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TriSurfaceMesh;

    fn laplacian_plus_shift(mesh: &TriSurfaceMesh, shift: f64) -> SparseSymMatrix {
        let pattern = Arc::new(SparsityPattern::from_triangles(mesh.num_vertices(), &mesh.triangles));
        let mut m = SparseSymMatrix::zeros(pattern);
        for e in 0..mesh.num_triangles() {
            let mut local = [[-1.0; 3]; 3];
            for (a, row) in local.iter_mut().enumerate() {
                row[a] = 2.0 + shift;
            }
            m.add_element(e, &local);
        }
        m
    }

    #[test]
    fn solves_spd_system() {
        let mesh = TriSurfaceMesh::sphere(5);
        let a = laplacian_plus_shift(&mesh, 0.5);
        let sym = Arc::new(SymbolicLdl::new(a.pattern.clone()));
        let f = LdlFactor::factor(sym, &a).unwrap();
        assert!(f.is_positive_definite());
        let x_true: Vec<f64> = (0..a.dim()).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let b = a.mul_vec(&x_true);
        let x = f.solve(&b);
        let err = x.iter().zip(&x_true).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn identity_ordering_matches() {
        let mesh = TriSurfaceMesh::sphere(2);
        let a = laplacian_plus_shift(&mesh, 1.0);
        let n = a.dim();
        let f1 = LdlFactor::factor(Arc::new(SymbolicLdl::new(a.pattern.clone())), &a).unwrap();
        let f2 = LdlFactor::factor(
            Arc::new(SymbolicLdl::with_ordering(a.pattern.clone(), (0..n).collect())),
            &a,
        )
        .unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x1 = f1.solve(&b);
        let x2 = f2.solve(&b);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn indefinite_matrix_is_flagged() {
        let mesh = TriSurfaceMesh::sphere(1);
        let a = laplacian_plus_shift(&mesh, -3.0);
        let sym = Arc::new(SymbolicLdl::new(a.pattern.clone()));
        // a zero pivot is an acceptable outcome too
        if let Ok(f) = LdlFactor::factor(sym, &a) {
            assert!(!f.is_positive_definite());
        }
    }
}
