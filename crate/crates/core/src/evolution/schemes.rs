use super::cache::factor_error;
use super::{DgFunction, SnapshotCache};
use crate::error::{Error, Result};
use crate::linalg::{LdlFactor, SparseSymMatrix};
use crate::surface_fem::{assemble_stiffness, gauss_legendre, LambdaField, SLAB_GAUSS_POINTS};

/// Optional extra term R_n in the backward scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjointRemainder {
    #[default]
    None,
    /// k R_n = ∫_{I_n} ⟨div V_h(t) ψ, φ⟩_{Γ^h(t)} dt − k ⟨div V_h(t_n) ψ, φ⟩_{Γ^h(t_n)},
    /// the time integral by Gauss quadrature.
    DivergenceCorrection,
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { what, expected, actual });
    }
    Ok(())
}

fn check_dg(cache: &SnapshotCache, f: &DgFunction) -> Result<()> {
    check_len("slab count", cache.num_slabs(), f.num_slabs())?;
    check_len("vertex count", cache.num_dofs(), f.num_dofs())
}

/// Forward scheme: (M_n + k A_n) y^n = M_{n-1} y^{n-1} + F^n, y^0 = y0.
pub fn solve_state(cache: &SnapshotCache, y0: &[f64], loads: &DgFunction) -> Result<DgFunction> {
    check_len("initial value", cache.num_dofs(), y0.len())?;
    check_dg(cache, loads)?;
    let m = cache.num_dofs();
    let mut y = DgFunction::zeros(cache.num_slabs(), m);
    let mut rhs = vec![0.0; m];
    for n in 1..=cache.num_slabs() {
        let prev: &[f64] = if n == 1 { y0 } else { y.slab(n - 1) };
        cache.mass(n - 1).mul_vec_into(prev, &mut rhs);
        for (r, f) in rhs.iter_mut().zip(loads.slab(n)) {
            *r += f;
        }
        cache.factor(n).solve_in_place(&mut rhs);
        y.slab_mut(n).copy_from_slice(&rhs);
    }
    Ok(y)
}

fn divergence_correction(cache: &SnapshotCache, n: usize) -> Result<SparseSymMatrix> {
    let k = cache.step();
    let snap = cache.snapshot(n);
    let t0 = cache.grid.time(n - 1);
    let div_n = snap.velocity_divergence(&cache.flow)?;
    let mut acc = weighted_mass(cache, snap, &div_n)?;
    acc.values.iter_mut().for_each(|v| *v *= -k);
    for (tau, w) in gauss_legendre(SLAB_GAUSS_POINTS) {
        let moved = snap.advance(&cache.flow, t0 + tau * k)?;
        let div = moved.velocity_divergence(&cache.flow)?;
        let wm = weighted_mass(cache, &moved, &div)?;
        acc = acc.add_scaled(w * k, &wm);
    }
    Ok(acc)
}

fn weighted_mass(
    cache: &SnapshotCache,
    snap: &crate::geometry::MeshSnapshot,
    per_element: &[f64],
) -> Result<SparseSymMatrix> {
    let with = assemble_stiffness(snap, cache.pattern(), &LambdaField::PerElement(per_element.to_vec()))?;
    let without = assemble_stiffness(snap, cache.pattern(), &LambdaField::Constant(0.0))?;
    Ok(with.add_scaled(-1.0, &without))
}

/// Backward scheme: (M_n + k A_n + k R_n) z^n = M_n z^{n+1} + G^n, z^{N+1} = zT.
pub fn solve_adjoint(
    cache: &SnapshotCache,
    z_t: &[f64],
    loads: &DgFunction,
    remainder: AdjointRemainder,
) -> Result<DgFunction> {
    check_len("terminal value", cache.num_dofs(), z_t.len())?;
    check_dg(cache, loads)?;
    let m = cache.num_dofs();
    let n_slabs = cache.num_slabs();
    let mut z = DgFunction::zeros(n_slabs, m);
    let mut rhs = vec![0.0; m];
    for n in (1..=n_slabs).rev() {
        let next: &[f64] = if n == n_slabs { z_t } else { z.slab(n + 1) };
        cache.mass(n).mul_vec_into(next, &mut rhs);
        for (r, g) in rhs.iter_mut().zip(loads.slab(n)) {
            *r += g;
        }
        match remainder {
            AdjointRemainder::None => cache.factor(n).solve_in_place(&mut rhs),
            AdjointRemainder::DivergenceCorrection => {
                let k = cache.step();
                let system = cache
                    .mass(n)
                    .add_scaled(k, cache.stiffness(n))
                    .add_scaled(1.0, &divergence_correction(cache, n)?);
                let f = LdlFactor::factor(cache.symbolic().clone(), &system).map_err(factor_error(n))?;
                f.solve_in_place(&mut rhs);
            }
        }
        z.slab_mut(n).copy_from_slice(&rhs);
    }
    Ok(z)
}

/// ⟨f, g⟩_{h,k} = k Σ_n f^n · M(t_n) g^n.
pub fn discrete_inner(cache: &SnapshotCache, f: &DgFunction, g: &DgFunction) -> f64 {
    let k = cache.step();
    (1..=cache.num_slabs())
        .map(|n| cache.mass(n).quad_form(f.slab(n), g.slab(n)))
        .sum::<f64>()
        * k
}

pub fn discrete_norm(cache: &SnapshotCache, f: &DgFunction) -> f64 {
    discrete_inner(cache, f, f).max(0.0).sqrt()
}

/// Loads k M(t_n) u^n of a trial-space function.
pub fn mass_loads(cache: &SnapshotCache, u: &DgFunction) -> DgFunction {
    let k = cache.step();
    let mut out = DgFunction::zeros(u.num_slabs(), u.num_dofs());
    for n in 1..=u.num_slabs() {
        let dst = out.slab_mut(n);
        cache.mass(n).mul_vec_into(u.slab(n), dst);
        dst.iter_mut().for_each(|v| *v *= k);
    }
    out
}

/// S u: forward scheme with y^0 = 0 and loads k M(t_n) u^n.
pub fn apply_state_operator(cache: &SnapshotCache, u: &DgFunction) -> Result<DgFunction> {
    check_dg(cache, u)?;
    solve_state(cache, &vec![0.0; cache.num_dofs()], &mass_loads(cache, u))
}

/// S* r: backward scheme with z^{N+1} = 0 and loads k M(t_n) r^n.
pub fn apply_adjoint_operator(cache: &SnapshotCache, r: &DgFunction) -> Result<DgFunction> {
    check_dg(cache, r)?;
    solve_adjoint(cache, &vec![0.0; cache.num_dofs()], &mass_loads(cache, r), AdjointRemainder::None)
}

/// S_T u = y^N.
pub fn apply_terminal_operator(cache: &SnapshotCache, u: &DgFunction) -> Result<Vec<f64>> {
    let y = apply_state_operator(cache, u)?;
    Ok(y.slab(cache.num_slabs()).to_vec())
}

/// S_T* zT: backward Laplace scheme with z^{N+1} = zT and no loads. Adjoint
/// to S_T between ⟨·,·⟩_{h,k} and L²(Γ^h(T)).
pub fn apply_terminal_adjoint(cache: &SnapshotCache, z_t: &[f64]) -> Result<DgFunction> {
    let zero = DgFunction::zeros(cache.num_slabs(), cache.num_dofs());
    solve_adjoint(cache, z_t, &zero, AdjointRemainder::None)
}

/// Forward scheme for y = e^{μt} v: solves the equivalent system for v with
/// matrices e^{μk}(M_n + k A_n) and loads e^{−μ t_{n−1}} F^n, then scales
/// back. Agrees with [`solve_state`] up to rounding.
pub fn solve_state_rescaled(cache: &SnapshotCache, mu: f64, y0: &[f64], loads: &DgFunction) -> Result<DgFunction> {
    check_len("initial value", cache.num_dofs(), y0.len())?;
    check_dg(cache, loads)?;
    let k = cache.step();
    let m = cache.num_dofs();
    let mut v = DgFunction::zeros(cache.num_slabs(), m);
    let mut rhs = vec![0.0; m];
    let growth = (-mu * k).exp();
    for n in 1..=cache.num_slabs() {
        let prev: &[f64] = if n == 1 { y0 } else { v.slab(n - 1) };
        cache.mass(n - 1).mul_vec_into(prev, &mut rhs);
        let w = (-mu * cache.grid.time(n - 1)).exp();
        for (r, f) in rhs.iter_mut().zip(loads.slab(n)) {
            *r = growth * (*r + w * f);
        }
        cache.factor(n).solve_in_place(&mut rhs);
        v.slab_mut(n).copy_from_slice(&rhs);
    }
    for n in 1..=cache.num_slabs() {
        let s = (mu * cache.grid.time(n)).exp();
        v.slab_mut(n).iter_mut().for_each(|x| *x *= s);
    }
    Ok(v)
}

/// Quantities bounded by the stability estimates of the two schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityFunctionals {
    /// max_n a(t_n; z^n, z^n)
    pub max_energy: f64,
    /// (1/k) Σ ‖z^{n+1} − z^n‖²_n
    pub increments: f64,
    /// k Σ ‖z^n‖²_{H¹(Γ^h(t_n))}
    pub h1_sum: f64,
}

/// Functionals of a backward solution z with z^{N+1} = `z_t`.
pub fn adjoint_stability(cache: &SnapshotCache, z: &DgFunction, z_t: &[f64]) -> StabilityFunctionals {
    let k = cache.step();
    let n_slabs = cache.num_slabs();
    let mut out = StabilityFunctionals {
        max_energy: 0.0,
        increments: 0.0,
        h1_sum: 0.0,
    };
    let mut diff = vec![0.0; cache.num_dofs()];
    for n in 1..=n_slabs {
        let zn = z.slab(n);
        let energy = cache.stiffness(n).quad_form(zn, zn);
        let l2 = cache.mass(n).quad_form(zn, zn);
        out.max_energy = out.max_energy.max(energy);
        out.h1_sum += k * (energy + l2);
        let next: &[f64] = if n == n_slabs { z_t } else { z.slab(n + 1) };
        for ((d, a), b) in diff.iter_mut().zip(next).zip(zn) {
            *d = a - b;
        }
        out.increments += cache.mass(n).quad_form(&diff, &diff) / k;
    }
    out
}

/// ‖y^N‖² + k Σ a(t_n; y^n, y^n) for a forward solution.
pub fn state_stability(cache: &SnapshotCache, y: &DgFunction) -> f64 {
    let k = cache.step();
    let n_slabs = cache.num_slabs();
    let yn = y.slab(n_slabs);
    let mut total = cache.mass(n_slabs).quad_form(yn, yn);
    for n in 1..=n_slabs {
        total += k * cache.stiffness(n).quad_form(y.slab(n), y.slab(n));
    }
    total
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::evolution::TimeGrid;
    use crate::geometry::{FlowMap, TriSurfaceMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cache(level: usize, slabs: usize, flow: FlowMap) -> SnapshotCache {
        let mesh = Arc::new(TriSurfaceMesh::sphere(level));
        SnapshotCache::laplace(mesh, flow, TimeGrid::new(slabs, 1.0).unwrap()).unwrap()
    }

    fn random_dg(c: &SnapshotCache, rng: &mut ChaCha8Rng) -> DgFunction {
        let data = (0..c.num_slabs() * c.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        DgFunction::from_flat(c.num_slabs(), c.num_dofs(), data).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = cache(2, 5, FlowMap::example_flow());
        let zero = DgFunction::zeros(5, c.num_dofs());
        let y = solve_state(&c, &vec![0.0; c.num_dofs()], &zero).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
        let z = solve_adjoint(&c, &vec![0.0; c.num_dofs()], &zero, AdjointRemainder::None).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constants_integrate_exactly_on_static_sphere() {
        let c = cache(3, 16, FlowMap::identity(1.0));
        let k = c.step();
        let loads = mass_loads(&c, &DgFunction::constant_in_time(16, &vec![1.0; c.num_dofs()]));
        let y = solve_state(&c, &vec![0.0; c.num_dofs()], &loads).unwrap();
        for n in 1..=16 {
            for v in y.slab(n) {
                assert!((v - n as f64 * k).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mass_is_conserved_on_moving_mesh() {
        let c = cache(3, 20, FlowMap::example_flow());
        let y0: Vec<f64> = c.mesh.vertices.iter().map(|x| 1.0 + x.x * x.z + x.y).collect();
        let y = solve_state(&c, &y0, &DgFunction::zeros(20, c.num_dofs())).unwrap();
        let ones = vec![1.0; c.num_dofs()];
        let initial = c.mass(0).quad_form(&ones, &y0);
        for n in 1..=20 {
            let total = c.mass(n).quad_form(&ones, y.slab(n));
            assert!((total - initial).abs() <= 1e-12 * initial.abs());
        }
    }

    #[test]
    fn distributed_pair_is_adjoint() {
        let c = cache(2, 12, FlowMap::example_flow());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let u = random_dg(&c, &mut rng);
            let g = random_dg(&c, &mut rng);
            let lhs = discrete_inner(&c, &apply_state_operator(&c, &u).unwrap(), &g);
            let rhs = discrete_inner(&c, &u, &apply_adjoint_operator(&c, &g).unwrap());
            let scale = discrete_norm(&c, &u) * discrete_norm(&c, &g);
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn terminal_pair_is_adjoint() {
        let c = cache(2, 12, FlowMap::example_flow());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_dg(&c, &mut rng);
        let z_t: Vec<f64> = (0..c.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y_t = apply_terminal_operator(&c, &u).unwrap();
        let lhs = c.mass(12).quad_form(&y_t, &z_t);
        let rhs = discrete_inner(&c, &u, &apply_terminal_adjoint(&c, &z_t).unwrap());
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn static_backward_scheme_is_time_reversed_forward() {
        let c = cache(2, 9, FlowMap::identity(1.0));
        let z_t: Vec<f64> = c.mesh.vertices.iter().map(|x| x.z * x.z - x.x).collect();
        let zero = DgFunction::zeros(9, c.num_dofs());
        let z = solve_adjoint(&c, &z_t, &zero, AdjointRemainder::None).unwrap();
        let y = solve_state(&c, &z_t, &zero).unwrap();
        for n in 1..=9 {
            for (a, b) in z.slab(n).iter().zip(y.slab(10 - n)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn first_harmonic_decays() {
        let c = cache(5, 200, FlowMap::identity(1.0));
        let z: Vec<f64> = c.mesh.vertices.iter().map(|x| x.z).collect();
        let y = solve_state(&c, &z, &DgFunction::zeros(200, c.num_dofs())).unwrap();
        let n0 = c.mass(0).quad_form(&z, &z).sqrt();
        let nt = c.mass(200).quad_form(y.slab(200), y.slab(200)).sqrt();
        assert!((nt / n0 - (-2.0f64).exp()).abs() < 0.05 * (-2.0f64).exp());
    }

    #[test]
    fn rescaled_scheme_agrees() {
        let c = cache(2, 10, FlowMap::example_flow());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_dg(&c, &mut rng);
        let y0: Vec<f64> = (0..c.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = solve_state(&c, &y0, &f).unwrap();
        let b = solve_state_rescaled(&c, 3.0, &y0, &f).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn divergence_correction_is_small() {
        let c = cache(2, 20, FlowMap::example_flow());
        let z_t: Vec<f64> = c.mesh.vertices.iter().map(|x| x.x + x.z).collect();
        let zero = DgFunction::zeros(20, c.num_dofs());
        let a = solve_adjoint(&c, &z_t, &zero, AdjointRemainder::None).unwrap();
        let b = solve_adjoint(&c, &z_t, &zero, AdjointRemainder::DivergenceCorrection).unwrap();
        let mut d = a.clone();
        d.axpy(-1.0, &b);
        let rel = discrete_norm(&c, &d) / discrete_norm(&c, &a);
        assert!(rel > 0.0 && rel < 0.1, "{rel}");
    }
}
