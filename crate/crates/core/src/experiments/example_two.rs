use std::sync::Arc;
use std::time::Instant;

use super::transfer::Correspondence;
use super::{ConvergenceRecord, LevelRow, RunSettings};
use crate::control::{solve_terminal, ControlProblemSpec, Target};
use crate::error::{Error, Result};
use crate::evolution::{DgFunction, SnapshotCache, TimeGrid};
use crate::geometry::{FlowMap, MeshSnapshot, TriSurfaceMesh, Vec3};
use crate::surface_fem::{project_power_of_linear, TRI7};

/// Unconstrained terminal tracking of y_T = |x + y|^{−0.45}, which lies in L²
/// but not in H¹ and is unbounded along the great circle x + y = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleTwoData {
    pub alpha: f64,
    pub horizon: f64,
    /// Stretch exponent of the flow, shared with the smooth example.
    pub exponent: f64,
    /// y_T = |normal · x|^power.
    pub normal: Vec3,
    pub power: f64,
}

impl Default for ExampleTwoData {
    fn default() -> Self {
        ExampleTwoData {
            alpha: 1.0,
            horizon: 1.0,
            exponent: 0.5,
            normal: Vec3::new(1.0, 1.0, 0.0),
            power: -0.45,
        }
    }
}

impl ExampleTwoData {
    pub fn flow(&self) -> FlowMap {
        FlowMap::sphere_stretch(self.exponent, self.horizon)
    }

    pub fn terminal_state(&self, x: &Vec3) -> f64 {
        self.normal.dot(x).abs().powf(self.power)
    }
}

/// Snapshot cache and problem at one level; y_T enters through its exact L²
/// projection onto the P1 space of Γ^h(T).
pub fn example_two_problem(level: usize, data: &ExampleTwoData) -> Result<(SnapshotCache, ControlProblemSpec)> {
    let mesh = Arc::new(TriSurfaceMesh::sphere(level));
    let grid = TimeGrid::coupled_to_mesh(mesh.max_edge_length(), data.horizon)?;
    let cache = SnapshotCache::laplace(mesh, data.flow(), grid)?;
    let values = project_power_of_linear(cache.snapshot(cache.num_slabs()), &data.normal, data.power)?;
    let spec = ControlProblemSpec::new(
        data.alpha,
        f64::NEG_INFINITY,
        f64::INFINITY,
        Target::Terminal { values },
    )?;
    Ok((cache, spec))
}

/// Optimal control of one level, kept after the matrices are dropped.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub level: usize,
    pub mesh: Arc<TriSurfaceMesh>,
    pub grid: TimeGrid,
    pub control: DgFunction,
    pub iterations: usize,
    pub wall_seconds: f64,
}

pub fn solve_example_two_level(level: usize, data: &ExampleTwoData, settings: &RunSettings) -> Result<LevelSolution> {
    let start = Instant::now();
    let run = || -> Result<LevelSolution> {
        let (cache, spec) = example_two_problem(level, data)?;
        let (u, report) = solve_terminal(&cache, &spec, settings.tol, settings.max_iter)?;
        Ok(LevelSolution {
            level,
            mesh: cache.mesh.clone(),
            grid: cache.grid,
            control: u.sample_vertices(),
            iterations: report.iterations,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    };
    run().map_err(|e| e.at_level(level))
}

/// ‖u_c^l − u_f‖ / ‖u_f‖ in L²(0, T; L²(Γ_f^h(t))). Time is split at the
/// nodes of both grids; in space the 7-point rule runs over the fine
/// triangles with their areas at the end of the fine slab, and coarse values
/// are read at the radially corresponding points.
pub fn transfer_error(coarse: &LevelSolution, fine: &LevelSolution, flow: &FlowMap) -> Result<f64> {
    if (coarse.grid.horizon() - fine.grid.horizon()).abs() > 1e-12 {
        return Err(Error::InvalidParameter("levels use different horizons".into()));
    }
    let corr = Correspondence::radial(&coarse.mesh, &fine.mesh)?;
    let (nc, nf) = (coarse.grid.num_slabs(), fine.grid.num_slabs());
    let mut err = 0.0;
    let mut norm = 0.0;
    let (mut i, mut j) = (1, 1);
    let mut t = 0.0;
    let mut areas: Option<(usize, Vec<f64>)> = None;
    while i <= nc && j <= nf {
        let end = coarse.grid.time(i).min(fine.grid.time(j));
        let len = end - t;
        if len > 0.0 {
            if areas.as_ref().is_none_or(|(s, _)| *s != j) {
                let snap = MeshSnapshot::new(fine.mesh.clone(), flow, fine.grid.time(j))?;
                let a = (0..fine.mesh.num_triangles())
                    .map(|e| snap.element_frame(e).map(|f| f.area))
                    .collect::<Result<Vec<_>>>()?;
                areas = Some((j, a));
            }
            let a = &areas.as_ref().expect("set above").1;
            let (uc, uf) = (coarse.control.slab(i), fine.control.slab(j));
            for (e, tri) in fine.mesh.triangles.iter().enumerate() {
                for ((ct, b), (l, w)) in corr.targets[e].iter().zip(TRI7.iter()) {
                    let ctri = coarse.mesh.triangles[*ct];
                    let vc = b[0] * uc[ctri[0]] + b[1] * uc[ctri[1]] + b[2] * uc[ctri[2]];
                    let vf = l[0] * uf[tri[0]] + l[1] * uf[tri[1]] + l[2] * uf[tri[2]];
                    let s = len * a[e] * w;
                    err += s * (vc - vf).powi(2);
                    norm += s * vf * vf;
                }
            }
        }
        t = end;
        if coarse.grid.time(i) <= end {
            i += 1;
        }
        if fine.grid.time(j) <= end {
            j += 1;
        }
    }
    Ok((err / norm).sqrt())
}

/// Estimates the error of every requested level i against level i + 2,
/// solving the two finer levels beyond the largest requested one as well.
/// `progress` sees the row of each requested level once it is solved.
pub fn run_example_two(
    levels: &[usize],
    data: &ExampleTwoData,
    settings: &RunSettings,
    mut progress: impl FnMut(&LevelRow),
) -> Result<ConvergenceRecord> {
    let mut needed: Vec<usize> = levels.iter().flat_map(|&l| [l, l + 2]).collect();
    needed.sort_unstable();
    needed.dedup();
    let mut solutions: Vec<LevelSolution> = Vec::with_capacity(needed.len());
    let mut rows = Vec::with_capacity(levels.len());
    for &level in &needed {
        let sol = solve_example_two_level(level, data, settings)?;
        if levels.contains(&level) {
            let row = LevelRow {
                level,
                vertices: sol.mesh.num_vertices(),
                slabs: sol.grid.num_slabs(),
                h: sol.mesh.max_edge_length(),
                k: sol.grid.step(),
                err_l2: None,
                eoc_l2: None,
                err_inf: None,
                eoc_inf: None,
                iterations: sol.iterations,
                wall_seconds: sol.wall_seconds,
            };
            progress(&row);
            rows.push(row);
        }
        solutions.push(sol);
    }
    let flow = data.flow();
    for row in rows.iter_mut() {
        let coarse = solutions.iter().find(|s| s.level == row.level).expect("solved");
        let fine = solutions.iter().find(|s| s.level == row.level + 2).expect("solved");
        row.err_l2 = Some(transfer_error(coarse, fine, &flow).map_err(|e| e.at_level(row.level))?);
    }
    let mut record = ConvergenceRecord {
        example: 2,
        q: settings.q,
        rows,
    };
    record.fill_eoc();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(level: usize, slabs: usize, value: f64) -> LevelSolution {
        let mesh = Arc::new(TriSurfaceMesh::sphere(level));
        let m = mesh.num_vertices();
        LevelSolution {
            level,
            mesh,
            grid: TimeGrid::new(slabs, 1.0).unwrap(),
            control: DgFunction::constant_in_time(slabs, &vec![value; m]),
            iterations: 0,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn transfer_of_constants() {
        let flow = ExampleTwoData::default().flow();
        let a = constant(1, 7, 1.0);
        let b = constant(3, 11, 1.0);
        assert!(transfer_error(&a, &b, &flow).unwrap() < 1e-14);
        let c = constant(3, 11, 2.0);
        assert!((transfer_error(&a, &c, &flow).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn self_comparison_vanishes() {
        let data = ExampleTwoData::default();
        let s = solve_example_two_level(2, &data, &RunSettings::default()).unwrap();
        assert!(s.control.as_slice().iter().any(|&v| v != 0.0));
        assert!(transfer_error(&s, &s, &data.flow()).unwrap() < 1e-14);
    }

    #[test]
    fn terminal_data_is_singular_but_square_integrable() {
        let data = ExampleTwoData::default();
        assert!(data.terminal_state(&Vec3::new(0.5, -0.5, 0.7)).is_infinite());
        let (cache, spec) = example_two_problem(3, &data).unwrap();
        let Target::Terminal { values } = &spec.target else { unreachable!() };
        assert!(values.iter().all(|v| v.is_finite()));
        // ∫ y_T over the final snapshot equals 1ᵀ M y_T
        let m = cache.mass(cache.num_slabs());
        let ones = vec![1.0; values.len()];
        assert!(m.quad_form(&ones, values) > cache.snapshot(cache.num_slabs()).area());
    }

    #[test]
    fn estimates_pair_levels_two_apart() {
        let mut seen = Vec::new();
        let rec = run_example_two(&[0, 1, 2], &ExampleTwoData::default(), &RunSettings::default(), |r| {
            seen.push(r.level)
        })
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
        assert!(rec.rows.iter().all(|r| r.err_l2.is_some()));
        assert!(rec.rows[1].err_l2.unwrap() < rec.rows[0].err_l2.unwrap());
        assert!(rec.rows[2].eoc_l2.is_some());
    }
}
