use std::sync::Arc;

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::geometry::{FlowKind, FlowMap, MeshSnapshot, TriSurfaceMesh};
use crate::linalg::{LdlFactor, SparseSymMatrix, SparsityPattern, SymbolicLdl};
use crate::surface_fem::{assemble_mass, assemble_stiffness, mesh_pattern, LambdaField};

/// Snapshots Γ^h(t_n), mass matrices M(t_n), stiffness matrices A_λ(t_n) and
/// the factorizations of M(t_n) + k A_λ(t_n), built once per mesh, flow,
/// time grid and λ.
#[derive(Debug)]
pub struct SnapshotCache {
    pub mesh: Arc<TriSurfaceMesh>,
    pub flow: FlowMap,
    pub grid: TimeGrid,
    pub lambda: LambdaField,
    pattern: Arc<SparsityPattern>,
    symbolic: Arc<SymbolicLdl>,
    snapshots: Vec<MeshSnapshot>,
    mass: Vec<SparseSymMatrix>,
    stiffness: Vec<SparseSymMatrix>,
    factors: Vec<LdlFactor>,
    positive_definite: bool,
}

pub(crate) fn factor_error(slab: usize) -> impl Fn(crate::linalg::PivotFailure) -> Error {
    move |p| Error::Factorization {
        slab,
        pivot: p.pivot,
        value: p.value,
    }
}

impl SnapshotCache {
    pub fn new(mesh: Arc<TriSurfaceMesh>, flow: FlowMap, grid: TimeGrid, lambda: LambdaField) -> Result<Self> {
        if (flow.horizon - grid.horizon()).abs() > 1e-12 * grid.horizon() {
            return Err(Error::InvalidParameter(format!(
                "flow horizon {} differs from time grid horizon {}",
                flow.horizon,
                grid.horizon()
            )));
        }
        let pattern = mesh_pattern(&mesh);
        let symbolic = Arc::new(SymbolicLdl::new(pattern.clone()));
        let n_slabs = grid.num_slabs();
        let k = grid.step();
        let mut snapshots = Vec::with_capacity(n_slabs + 1);
        snapshots.push(MeshSnapshot::new(mesh.clone(), &flow, 0.0)?);
        for n in 1..=n_slabs {
            let t = grid.time(n);
            let snap = match flow.kind {
                FlowKind::OdeVelocityField { .. } => snapshots[n - 1].advance(&flow, t)?,
                _ => MeshSnapshot::new(mesh.clone(), &flow, t)?,
            };
            snapshots.push(snap);
        }
        let mass = snapshots
            .iter()
            .map(|s| assemble_mass(s, &pattern))
            .collect::<Result<Vec<_>>>()?;
        let mut stiffness = Vec::with_capacity(n_slabs);
        let mut factors = Vec::with_capacity(n_slabs);
        let mut positive_definite = true;
        for n in 1..=n_slabs {
            let a = assemble_stiffness(&snapshots[n], &pattern, &lambda)?;
            let system = mass[n].add_scaled(k, &a);
            let f = LdlFactor::factor(symbolic.clone(), &system).map_err(factor_error(n))?;
            positive_definite &= f.is_positive_definite();
            stiffness.push(a);
            factors.push(f);
        }
        Ok(SnapshotCache {
            mesh,
            flow,
            grid,
            lambda,
            pattern,
            symbolic,
            snapshots,
            mass,
            stiffness,
            factors,
            positive_definite,
        })
    }

    /// Cache with λ = 0, the setting of all reduced operators.
    pub fn laplace(mesh: Arc<TriSurfaceMesh>, flow: FlowMap, grid: TimeGrid) -> Result<Self> {
        Self::new(mesh, flow, grid, LambdaField::Constant(0.0))
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_slabs(&self) -> usize {
        self.grid.num_slabs()
    }

    pub fn step(&self) -> f64 {
        self.grid.step()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn symbolic(&self) -> &Arc<SymbolicLdl> {
        &self.symbolic
    }

    /// Γ^h(t_n), `0 <= n <= N`.
    pub fn snapshot(&self, n: usize) -> &MeshSnapshot {
        &self.snapshots[n]
    }

    /// M(t_n), `0 <= n <= N`.
    pub fn mass(&self, n: usize) -> &SparseSymMatrix {
        &self.mass[n]
    }

    /// A_λ(t_n), `1 <= n <= N`.
    pub fn stiffness(&self, n: usize) -> &SparseSymMatrix {
        &self.stiffness[n - 1]
    }

    /// Factorization of M(t_n) + k A_λ(t_n), `1 <= n <= N`.
    pub fn factor(&self, n: usize) -> &LdlFactor {
        &self.factors[n - 1]
    }

    /// True when every M(t_n) + k A_λ(t_n) is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        self.positive_definite
    }
}
