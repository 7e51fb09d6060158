use std::sync::Arc;

use super::quadrature::{gauss_legendre, TRI7};
use super::{assemble_mass, mesh_pattern};
use crate::error::{Error, Result};
use crate::geometry::{FlowMap, MeshSnapshot, Vec3};
use crate::linalg::{LdlFactor, SparsityPattern, SymbolicLdl};

/// Number of Gauss points per slab used for slab-mean loads.
pub const SLAB_GAUSS_POINTS: usize = 2;

/// F_i = ∫_{t0}^{t1} ∫_{Γ^h(t1)} f(Φ(x), t) φ_i(x) dx dt, where Φ moves a point
/// of the snapshot at `t1` to time `t` keeping its barycentric coordinates.
pub fn slab_mean_load<F>(snap: &MeshSnapshot, flow: &FlowMap, t0: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Vec3, f64) -> f64,
{
    slab_mean_load_with(snap, flow, t0, f, SLAB_GAUSS_POINTS)
}

/// As [`slab_mean_load`] with an `n_time`-point Gauss rule in time.
pub fn slab_mean_load_with<F>(snap: &MeshSnapshot, flow: &FlowMap, t0: f64, f: F, n_time: usize) -> Result<Vec<f64>>
where
    F: Fn(&Vec3, f64) -> f64,
{
    let t1 = snap.time;
    let k = t1 - t0;
    let mut load = vec![0.0; snap.num_vertices()];
    let areas: Vec<f64> = (0..snap.mesh.num_triangles())
        .map(|e| snap.element_frame(e).map(|fr| fr.area))
        .collect::<Result<_>>()?;
    for (tau, wt) in gauss_legendre(n_time) {
        let t = t0 + tau * k;
        let moved: Vec<Vec3> = snap.positions.iter().map(|x| flow.advance(x, t1, t)).collect();
        for (e, tri) in snap.mesh.triangles.iter().enumerate() {
            let c = tri.map(|j| moved[j]);
            for (l, w) in TRI7.iter() {
                let x = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
                let v = f(&x, t);
                if !v.is_finite() {
                    return Err(Error::QuadratureSingularity {
                        triangle: e,
                        point: [x.x, x.y, x.z],
                        value: v,
                    });
                }
                let s = wt * k * w * areas[e] * v;
                for a in 0..3 {
                    load[tri[a]] += s * l[a];
                }
            }
        }
    }
    Ok(load)
}

/// b_i = ∫ g φ_i on the snapshot with the 7-point rule.
pub fn l2_rhs<G>(snap: &MeshSnapshot, g: G) -> Result<Vec<f64>>
where
    G: Fn(&Vec3) -> f64,
{
    let mut b = vec![0.0; snap.num_vertices()];
    for (e, tri) in snap.mesh.triangles.iter().enumerate() {
        let frame = snap.element_frame(e)?;
        let c = snap.corners(e);
        for (l, w) in TRI7.iter() {
            let x = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
            let v = g(&x);
            if !v.is_finite() {
                return Err(Error::QuadratureSingularity {
                    triangle: e,
                    point: [x.x, x.y, x.z],
                    value: v,
                });
            }
            for a in 0..3 {
                b[tri[a]] += w * frame.area * v * l[a];
            }
        }
    }
    Ok(b)
}

fn solve_mass(snap: &MeshSnapshot, pattern: &Arc<SparsityPattern>, b: &[f64]) -> Result<Vec<f64>> {
    let m = assemble_mass(snap, pattern)?;
    let factor = LdlFactor::factor(Arc::new(SymbolicLdl::new(pattern.clone())), &m).map_err(|p| {
        Error::Factorization {
            slab: 0,
            pivot: p.pivot,
            value: p.value,
        }
    })?;
    Ok(factor.solve(b))
}

/// L² projection onto the P1 space of the snapshot.
pub fn l2_project<G>(snap: &MeshSnapshot, g: G) -> Result<Vec<f64>>
where
    G: Fn(&Vec3) -> f64,
{
    let b = l2_rhs(snap, g)?;
    solve_mass(snap, &mesh_pattern(&snap.mesh), &b)
}

/// b_i = ∫ |n·x|^β φ_i computed in closed form on every flat triangle.
/// Triangles on which n·x changes sign are split along its zero line.
pub fn power_of_linear_rhs(snap: &MeshSnapshot, normal: &Vec3, beta: f64) -> Result<Vec<f64>> {
    if !(beta > -1.0) {
        return Err(Error::InvalidParameter(format!("exponent {beta} is not integrable")));
    }
    let mut b = vec![0.0; snap.num_vertices()];
    for (e, tri) in snap.mesh.triangles.iter().enumerate() {
        let area = snap.element_frame(e)?.area;
        let s = snap.corners(e).map(|x| normal.dot(&x));
        let pieces = super::cut::clip_polygon_by_levels(&super::cut::REFERENCE_TRIANGLE, s, &[0.0]);
        for poly in pieces {
            for sub in super::cut::fan(&poly) {
                let sub_area = area * super::cut::bary_area_fraction(&sub);
                let vals = sub.map(|l| l[0] * s[0] + l[1] * s[1] + l[2] * s[2]);
                let contrib = power_on_subtriangle(vals, sub_area, beta);
                // contrib[c] = ∫ |s|^β μ_c over the sub-triangle (μ its own barycentrics)
                for (c, q) in sub.iter().enumerate() {
                    for a in 0..3 {
                        b[tri[a]] += contrib[c] * q[a];
                    }
                }
            }
        }
    }
    Ok(b)
}

/// L² projection of |n·x|^β, with the load integrated exactly.
pub fn project_power_of_linear(snap: &MeshSnapshot, normal: &Vec3, beta: f64) -> Result<Vec<f64>> {
    let b = power_of_linear_rhs(snap, normal, beta)?;
    solve_mass(snap, &mesh_pattern(&snap.mesh), &b)
}

/// ∫ |s|^β μ_c dA over a triangle of area `area` on which s is linear with
/// vertex values `vals` of one sign; μ_c are its barycentric coordinates.
fn power_on_subtriangle(vals: [f64; 3], area: f64, beta: f64) -> [f64; 3] {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()));
    let v = idx.map(|i| vals[i].abs());
    let mut out = [0.0; 3];
    if v[2] == 0.0 {
        return out;
    }
    if v[2] - v[0] <= 1e-14 * v[2] {
        let c = v[1].powf(beta) * area / 3.0;
        return [c; 3];
    }
    // split at the middle value: point on the edge lo-hi with value v[1]
    let r = (v[1] - v[0]) / (v[2] - v[0]);
    // barycentric (in sorted order) of the split point
    let m = [1.0 - r, 0.0, r];
    let verts = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    // apex low: (lo; mid, split), apex high: (hi; mid, split)
    for (apex, frac) in [(0usize, r), (2usize, 1.0 - r)] {
        if frac <= 0.0 {
            continue;
        }
        let sub_area = area * frac;
        let a_val = v[apex];
        let delta = v[1] - a_val;
        let i = apex_integrals(a_val, delta, beta);
        // λ along the sub-triangle, averaged over the base: (1-τ)A + τ(B1+B2)/2
        for c in 0..3 {
            let la = verts[apex][c];
            let lb = 0.5 * (verts[1][c] + m[c]);
            // ∫ F τ [(1-τ) la + τ lb] 2|sub| dτ
            out[c] += 2.0 * sub_area * (la * (i[1] - i[2]) + lb * i[2]);
        }
    }
    let mut res = [0.0; 3];
    for (k, &orig) in idx.iter().enumerate() {
        res[orig] = out[k];
    }
    res
}

/// I_j = ∫_0^1 (a + τ d)^β τ^j dτ for j = 0, 1, 2 with a ≥ 0, a + d ≥ 0.
fn apex_integrals(a: f64, d: f64, beta: f64) -> [f64; 3] {
    if d == 0.0 {
        let p = a.powf(beta);
        return [p, p / 2.0, p / 3.0];
    }
    if a.min(a + d) <= d.abs() {
        // substitute s = a + τ d, τ = (s - a)/d
        let (s0, s1) = (a, a + d);
        let prim = |m: i32| {
            let e = beta + m as f64 + 1.0;
            (s1.powf(e) - s0.powf(e)) / e
        };
        let p0 = prim(0);
        let p1 = prim(1);
        let p2 = prim(2);
        let i0 = p0 / d;
        let i1 = (p1 - a * p0) / (d * d);
        let i2 = (p2 - 2.0 * a * p1 + a * a * p0) / (d * d * d);
        [i0, i1, i2]
    } else {
        let mut out = [0.0; 3];
        for (x, w) in gauss_legendre(20) {
            let f = (a + x * d).powf(beta) * w;
            out[0] += f;
            out[1] += f * x;
            out[2] += f * x * x;
        }
        out
    }
}
