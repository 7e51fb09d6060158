use std::io::Write;
use std::sync::Arc;

/// Symmetric CSR sparsity structure of a P1 system on a triangle mesh: one
/// row per vertex, a column for the vertex itself and each edge neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    diag: Vec<usize>,
    /// Value slots of the local 3x3 element matrices, row-major.
    element_slots: Vec<[usize; 9]>,
}

impl SparsityPattern {
    pub fn from_triangles(n: usize, triangles: &[[usize; 3]]) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for t in triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        adj[t[a]].push(t[b]);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let mut pattern = SparsityPattern {
            n,
            row_ptr,
            col_idx,
            diag: Vec::new(),
            element_slots: Vec::new(),
        };
        pattern.diag = (0..n).map(|i| pattern.slot(i, i).unwrap()).collect();
        pattern.element_slots = triangles
            .iter()
            .map(|t| {
                let mut s = [0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = pattern.slot(t[a], t[b]).unwrap();
                    }
                }
                s
            })
            .collect();
        pattern
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn element_slots(&self, element: usize) -> &[usize; 9] {
        &self.element_slots[element]
    }
}

/// Symmetric sparse matrix stored with both triangles so that products are a
/// single CSR sweep. Off-diagonal pairs are always written together, so
/// `entry(i, j) == entry(j, i)` holds bit for bit.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    pub pattern: Arc<SparsityPattern>,
    pub values: Vec<f64>,
}

impl SparseSymMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseSymMatrix { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.pattern.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.pattern.diag.iter().map(|&s| self.values[s]).collect()
    }

    /// Adds a symmetric element matrix, given by its upper triangle and
    /// diagonal (`local[a][b]` for `a <= b`).
    pub fn add_element(&mut self, element: usize, local: &[[f64; 3]; 3]) {
        let slots = *self.pattern.element_slots(element);
        for a in 0..3 {
            self.values[slots[4 * a]] += local[a][a];
            for b in a + 1..3 {
                let v = local[a][b];
                self.values[slots[3 * a + b]] += v;
                self.values[slots[3 * b + a]] += v;
            }
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for i in 0..p.n {
            let mut acc = 0.0;
            for s in p.row(i) {
                acc += self.values[s] * x[p.col_idx[s]];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y += self * x`
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for i in 0..p.n {
            let mut acc = 0.0;
            for s in p.row(i) {
                acc += self.values[s] * x[p.col_idx[s]];
            }
            y[i] += acc;
        }
    }

    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let p = &self.pattern;
        let mut total = 0.0;
        for i in 0..p.n {
            let mut acc = 0.0;
            for s in p.row(i) {
                acc += self.values[s] * y[p.col_idx[s]];
            }
            total += x[i] * acc;
        }
        total
    }

    /// `self + c * other`; both matrices must share the same pattern.
    pub fn add_scaled(&self, c: f64, other: &SparseSymMatrix) -> SparseSymMatrix {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern);
        SparseSymMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        }
    }

    pub fn total_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// MatrixMarket coordinate format, lower triangle, 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let p = &self.pattern;
        let lower: usize = (0..p.n).map(|i| p.row(i).filter(|&s| p.col_idx[s] <= i).count()).sum();
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", p.n, p.n, lower)?;
        for i in 0..p.n {
            for s in p.row(i) {
                let j = p.col_idx[s];
                if j <= i {
                    writeln!(out, "{} {} {:.16e}", i + 1, j + 1, self.values[s])?;
                }
            }
        }
        Ok(())
    }
}
