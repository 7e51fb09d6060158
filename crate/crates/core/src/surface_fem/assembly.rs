use std::sync::Arc;

use crate::error::Result;
use crate::geometry::{MeshSnapshot, TriSurfaceMesh};
use crate::linalg::{SparseSymMatrix, SparsityPattern};

/// Zeroth-order coefficient λ of the bilinear form ∫ ∇u·∇v + λ u v.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaField {
    Constant(f64),
    /// Vertex values, interpolated linearly on each triangle.
    Nodal(Vec<f64>),
    /// One constant per triangle.
    PerElement(Vec<f64>),
}

impl LambdaField {
    pub fn is_zero(&self) -> bool {
        match self {
            LambdaField::Constant(c) => *c == 0.0,
            LambdaField::Nodal(v) | LambdaField::PerElement(v) => v.iter().all(|&x| x == 0.0),
        }
    }
}

pub fn mesh_pattern(mesh: &TriSurfaceMesh) -> Arc<SparsityPattern> {
    Arc::new(SparsityPattern::from_triangles(mesh.num_vertices(), &mesh.triangles))
}

/// Exact P1 element mass matrix.
pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// ∫ λ φ_a φ_b for λ linear with vertex values `lam`.
fn element_weighted_mass(area: f64, lam: [f64; 3]) -> [[f64; 3]; 3] {
    let s: f64 = lam.iter().sum();
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = if a == b {
                area * (2.0 * lam[a] + s) / 30.0
            } else {
                let c = 3 - a - b;
                area * (2.0 * (lam[a] + lam[b]) + lam[c]) / 60.0
            };
        }
    }
    m
}

pub fn assemble_mass(snap: &MeshSnapshot, pattern: &Arc<SparsityPattern>) -> Result<SparseSymMatrix> {
    let mut m = SparseSymMatrix::zeros(pattern.clone());
    for e in 0..snap.mesh.num_triangles() {
        let frame = snap.element_frame(e)?;
        m.add_element(e, &element_mass(frame.area));
    }
    Ok(m)
}

pub fn assemble_stiffness(
    snap: &MeshSnapshot,
    pattern: &Arc<SparsityPattern>,
    lambda: &LambdaField,
) -> Result<SparseSymMatrix> {
    let mut m = SparseSymMatrix::zeros(pattern.clone());
    for e in 0..snap.mesh.num_triangles() {
        let frame = snap.element_frame(e)?;
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in a..3 {
                local[a][b] = frame.area * frame.grads[a].dot(&frame.grads[b]);
            }
        }
        let reaction = match lambda {
            LambdaField::Constant(c) if *c == 0.0 => None,
            LambdaField::Constant(c) => Some(element_weighted_mass(frame.area, [*c; 3])),
            LambdaField::Nodal(v) => {
                let t = snap.mesh.triangles[e];
                Some(element_weighted_mass(frame.area, t.map(|j| v[j])))
            }
            LambdaField::PerElement(v) => Some(element_weighted_mass(frame.area, [v[e]; 3])),
        };
        if let Some(r) = reaction {
            for a in 0..3 {
                for b in a..3 {
                    local[a][b] += r[a][b];
                }
            }
        }
        m.add_element(e, &local);
    }
    Ok(m)
}
