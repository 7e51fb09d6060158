use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use super::{ConvergenceRecord, LevelRow};
use crate::control::{
    control_distance, optimality_residual, solve_semismooth_newton, Control, ControlProblemSpec, ProjectedControl,
    Target,
};
use crate::error::Result;
use crate::evolution::{discrete_inner, mass_loads, solve_state, DgFunction, SnapshotCache, TimeGrid};
use crate::geometry::{rho, FlowMap, TriSurfaceMesh, Vec3};
use crate::surface_fem::{
    gauss_legendre, integrate_projected, projected_distance_sq, slab_mean_load, Clamped, SLAB_GAUSS_POINTS,
};

/// Smooth example with known solution ū = P_{[a,b]}(z sin 2πt) on the sphere
/// family x² + y² + ρ(t)^{2e} z² = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleOneData {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub horizon: f64,
    /// Stretch exponent e of the flow z ↦ z / ρ(t)^e. The default 1/2 gives
    /// the surfaces x² + y² + ρ z² = 1 on which the published data were
    /// computed.
    pub exponent: f64,
    /// Flip the sign of the curvature term of ỹ_d (negative control).
    pub corrupted: bool,
}

impl Default for ExampleOneData {
    fn default() -> Self {
        ExampleOneData {
            alpha: 1.0,
            lower: -0.5,
            upper: 0.5,
            horizon: 1.0,
            exponent: 0.5,
            corrupted: false,
        }
    }
}

impl ExampleOneData {
    pub fn flow(&self) -> FlowMap {
        FlowMap::sphere_stretch(self.exponent, self.horizon)
    }

    /// z sin 2πt, the field whose projection is ū.
    pub fn unprojected_control(&self, x: &Vec3, t: f64) -> f64 {
        x.z * (2.0 * PI * t).sin()
    }

    pub fn exact_control(&self, x: &Vec3, t: f64) -> f64 {
        self.unprojected_control(x, t).clamp(self.lower, self.upper)
    }

    /// ỹ_d = −α ∂•(z sin 2πt) − α sin(2πt) Δ_Γ z on x² + y² + c z² = 1 with
    /// c = ρ^{2e}, so that p = −α z sin 2πt solves the adjoint equation for
    /// the data ỹ_d + S ū.
    pub fn desired_state_part(&self, x: &Vec3, t: f64) -> f64 {
        let e = self.exponent;
        let (s, c2) = ((2.0 * PI * t).sin(), (2.0 * PI * t).cos());
        let c = rho(t).powf(2.0 * e);
        let r2 = x.x * x.x + x.y * x.y;
        let s2 = r2 + c * c * x.z * x.z;
        let transport = (e * PI * s - 2.0 * PI) * c2 * x.z;
        let mut curvature = s * c * x.z * ((1.0 + c) * r2 + 2.0 * c * c * x.z * x.z) / (s2 * s2);
        if self.corrupted {
            curvature = -curvature;
        }
        self.alpha * (transport + curvature)
    }
}

/// Vertex values of z sin 2πt at time `t`, the vertices moved from Γ^h(t_n).
fn unprojected_nodal(cache: &SnapshotCache, data: &ExampleOneData, n: usize, t: f64) -> Vec<f64> {
    let snap = cache.snapshot(n);
    snap.positions
        .iter()
        .map(|x| data.unprojected_control(&cache.flow.advance(x, snap.time, t), t))
        .collect()
}

/// k-scaled Gauss nodes of slab n.
fn slab_gauss(cache: &SnapshotCache, n: usize) -> Vec<(f64, f64)> {
    let (t0, k) = (cache.grid.time(n - 1), cache.step());
    gauss_legendre(SLAB_GAUSS_POINTS)
        .into_iter()
        .map(|(tau, w)| (t0 + tau * k, w * k))
        .collect()
}

/// The discrete problem at one level: snapshot cache and problem data with
/// y_d = ỹ_d + S^h ū.
pub fn example_one_problem(level: usize, data: &ExampleOneData) -> Result<(SnapshotCache, ControlProblemSpec)> {
    let mesh = Arc::new(TriSurfaceMesh::sphere(level));
    let grid = TimeGrid::coupled_to_mesh(mesh.max_edge_length(), data.horizon)?;
    let cache = SnapshotCache::laplace(mesh, data.flow(), grid)?;
    let (n_slabs, m) = (cache.num_slabs(), cache.num_dofs());

    let mut exact_loads = DgFunction::zeros(n_slabs, m);
    let mut tilde_loads = DgFunction::zeros(n_slabs, m);
    let mut tilde_sq = 0.0;
    for n in 1..=n_slabs {
        let snap = cache.snapshot(n);
        let t0 = cache.grid.time(n - 1);
        for (t, w) in slab_gauss(&cache, n) {
            let b = integrate_projected(snap, &unprojected_nodal(&cache, data, n, t), data.lower, data.upper)?;
            for (o, v) in exact_loads.slab_mut(n).iter_mut().zip(b) {
                *o += w * v;
            }
        }
        let b = slab_mean_load(snap, &cache.flow, t0, |x, t| data.desired_state_part(x, t))?;
        tilde_loads.slab_mut(n).copy_from_slice(&b);
        tilde_sq += slab_mean_load(snap, &cache.flow, t0, |x, t| data.desired_state_part(x, t).powi(2))?
            .iter()
            .sum::<f64>();
    }
    let y_exact = solve_state(&cache, &vec![0.0; m], &exact_loads)?;
    let cross: f64 = y_exact.as_slice().iter().zip(tilde_loads.as_slice()).map(|(a, b)| a * b).sum();
    let norm_sq = tilde_sq + 2.0 * cross + discrete_inner(&cache, &y_exact, &y_exact);
    let mut loads = tilde_loads;
    loads.axpy(1.0, &mass_loads(&cache, &y_exact));
    let spec = ControlProblemSpec::new(data.alpha, data.lower, data.upper, Target::Distributed { loads, norm_sq })?;
    Ok((cache, spec))
}

/// ū_h with P(z sin 2πt_{n−1}) on slab n, matching the time level of the
/// backward value z^n.
pub fn sampled_exact_control(cache: &SnapshotCache, data: &ExampleOneData) -> ProjectedControl {
    let (n_slabs, m) = (cache.num_slabs(), cache.num_dofs());
    let mut p = DgFunction::zeros(n_slabs, m);
    for n in 1..=n_slabs {
        let w = unprojected_nodal(cache, data, n, cache.grid.time(n - 1));
        for (o, v) in p.slab_mut(n).iter_mut().zip(w) {
            *o = -data.alpha * v;
        }
    }
    ProjectedControl {
        p,
        alpha: data.alpha,
        lower: data.lower,
        upper: data.upper,
    }
}

/// Relative errors of a discrete control against ū. The control on slab n
/// comes from the backward value z^n, which approximates the adjoint at
/// t_{n−1}; the L² error is k Σ_n ‖u^n − ū(t_{n−1})‖² on Γ^h(t_n), exact on
/// the union of both cut decompositions. The maximum error runs over all
/// vertices and both end points of every slab, where the deviation of the
/// slab-wise constant control from ū is largest.
pub fn example_one_errors(cache: &SnapshotCache, data: &ExampleOneData, u: &ProjectedControl) -> Result<(f64, f64)> {
    let (lo, hi) = (data.lower, data.upper);
    let mut err = 0.0;
    let mut norm = 0.0;
    let mut err_max: f64 = 0.0;
    let mut ref_max: f64 = 0.0;
    for n in 1..=cache.num_slabs() {
        let snap = cache.snapshot(n);
        let w = u.preimage(n);
        let zero = vec![0.0; w.len()];
        let e = unprojected_nodal(cache, data, n, cache.grid.time(n - 1));
        err += projected_distance_sq(snap, Clamped::new(&w, u.lower, u.upper), Clamped::new(&e, lo, hi))?;
        norm += projected_distance_sq(snap, Clamped::new(&zero, lo, hi), Clamped::new(&e, lo, hi))?;
        for t in [cache.grid.time(n - 1), cache.grid.time(n)] {
            for (uh, e) in w.iter().zip(unprojected_nodal(cache, data, n, t)) {
                let exact = e.clamp(lo, hi);
                err_max = err_max.max((u.project(*uh) - exact).abs());
                ref_max = ref_max.max(exact.abs());
            }
        }
    }
    Ok(((err / norm).sqrt(), err_max / ref_max))
}

/// ‖ū_h − P(−p(ū_h)/α)‖_{h,k} / ‖ū_h‖_{h,k} for the sampled exact control;
/// tends to zero under refinement exactly when the data are consistent.
pub fn verify_exactness_example_one(level: usize, data: &ExampleOneData) -> Result<f64> {
    let run = || -> Result<f64> {
        let (cache, spec) = example_one_problem(level, data)?;
        let u = Control::Projected(sampled_exact_control(&cache, data));
        let zero = Control::Nodal(DgFunction::zeros(cache.num_slabs(), cache.num_dofs()));
        Ok(optimality_residual(&cache, &spec, &u)? / control_distance(&cache, &u, &zero)?)
    };
    run().map_err(|e| e.at_level(level))
}

/// Settings shared by the convergence runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub q: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            tol: 1e-9,
            max_iter: 30,
            q: 2,
        }
    }
}

/// Solves the smooth example by semismooth Newton on each level and reports
/// errors against ū. `progress` sees every finished row.
pub fn run_example_one(
    levels: &[usize],
    data: &ExampleOneData,
    settings: &RunSettings,
    mut progress: impl FnMut(&LevelRow),
) -> Result<ConvergenceRecord> {
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let start = Instant::now();
        let row = (|| -> Result<LevelRow> {
            let (cache, spec) = example_one_problem(level, data)?;
            let (u, report) = solve_semismooth_newton(&cache, &spec, settings.tol, settings.max_iter)?;
            let (err_l2, err_inf) = example_one_errors(&cache, data, &u)?;
            Ok(LevelRow {
                level,
                vertices: cache.num_dofs(),
                slabs: cache.num_slabs(),
                h: cache.mesh.max_edge_length(),
                k: cache.step(),
                err_l2: Some(err_l2),
                eoc_l2: None,
                err_inf: Some(err_inf),
                eoc_inf: None,
                iterations: report.iterations,
                wall_seconds: start.elapsed().as_secs_f64(),
            })
        })()
        .map_err(|e| e.at_level(level))?;
        progress(&row);
        rows.push(row);
    }
    let mut record = ConvergenceRecord {
        example: 1,
        q: settings.q,
        rows,
    };
    record.fill_eoc();
    Ok(record)
}
