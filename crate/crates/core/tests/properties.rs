use std::sync::Arc;

use esfem::evolution::{apply_adjoint_operator, apply_state_operator, discrete_inner, DgFunction, SnapshotCache, TimeGrid};
use esfem::experiments::compute_eoc;
use esfem::geometry::{FlowMap, MeshSnapshot, TriSurfaceMesh};
use esfem::surface_fem::{
    assemble_mass, integrate_projected, mesh_pattern, projected_distance_sq, Clamped, CutRegion,
};
use proptest::prelude::*;

fn snapshot(level: usize, exponent: f64, t: f64) -> MeshSnapshot {
    let mesh = Arc::new(TriSurfaceMesh::sphere(level));
    MeshSnapshot::new(mesh, &FlowMap::sphere_stretch(exponent, 1.0), t).unwrap()
}

fn nodal(snap: &MeshSnapshot, coeffs: [f64; 4]) -> Vec<f64> {
    snap.positions
        .iter()
        .map(|x| coeffs[0] + coeffs[1] * x.x + coeffs[2] * x.y * x.z + coeffs[3] * (3.0 * x.z).sin())
        .collect()
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-2.0f64..2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cut_areas_sum_to_snapshot_area(c in coeffs(), lo in -1.5f64..0.0, width in 0.0f64..2.0, t in 0.0f64..1.0) {
        let snap = snapshot(3, 0.5, t);
        let w = nodal(&snap, c);
        let areas = CutRegion::new(&snap.mesh.triangles, &w, lo, lo + width).region_areas(&snap).unwrap();
        let total = snap.area();
        prop_assert!((areas.iter().sum::<f64>() - total).abs() <= 1e-12 * total);
        prop_assert!(areas.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn projection_is_nonexpansive(a in coeffs(), b in coeffs(), lo in -1.5f64..0.0, width in 0.0f64..2.0) {
        let snap = snapshot(3, 2.0, 0.3);
        let (f, g) = (nodal(&snap, a), nodal(&snap, b));
        let hi = lo + width;
        let clamped = projected_distance_sq(&snap, Clamped::new(&f, lo, hi), Clamped::new(&g, lo, hi)).unwrap();
        let free = projected_distance_sq(
            &snap,
            Clamped::new(&f, f64::NEG_INFINITY, f64::INFINITY),
            Clamped::new(&g, f64::NEG_INFINITY, f64::INFINITY),
        )
        .unwrap();
        prop_assert!(clamped <= free * (1.0 + 1e-12) + 1e-15);
        let back = projected_distance_sq(&snap, Clamped::new(&g, lo, hi), Clamped::new(&f, lo, hi)).unwrap();
        prop_assert!((clamped - back).abs() <= 1e-13 * (1.0 + clamped));
    }

    #[test]
    fn projection_is_idempotent(c in coeffs(), lo in -1.5f64..0.0, width in 0.0f64..2.0) {
        // clamping values that already lie in [lo, hi] changes nothing
        let snap = snapshot(2, 0.5, 0.7);
        let hi = lo + width;
        let w: Vec<f64> = nodal(&snap, c).iter().map(|v| v.clamp(lo, hi)).collect();
        let d = projected_distance_sq(&snap, Clamped::new(&w, lo, hi), Clamped::new(&w, f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        prop_assert!(d <= 1e-26);
    }

    #[test]
    fn inactive_projection_is_mass_product(c in coeffs(), t in 0.0f64..1.0) {
        let snap = snapshot(2, 0.5, t);
        let w = nodal(&snap, c);
        let b = integrate_projected(&snap, &w, -1e3, 1e3).unwrap();
        let m = assemble_mass(&snap, &mesh_pattern(&snap.mesh)).unwrap().mul_vec(&w);
        for (x, y) in b.iter().zip(&m) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn eoc_recovers_power_laws(rate in 0.5f64..3.0, scale in 1e-3f64..10.0) {
        let hs = [1.6330, 1.1547, 0.9194, 0.7654, 0.5333, 0.4099];
        let errs: Vec<Option<f64>> = hs.iter().map(|h: &f64| Some(scale * h.powf(rate))).collect();
        let eoc = compute_eoc(&errs, &hs, 2);
        prop_assert!(eoc[..2].iter().all(|e| e.is_none()));
        for e in &eoc[2..] {
            prop_assert!((e.unwrap() - rate).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_pairs_are_adjoint(seed in any::<u64>(), exponent in 0.25f64..2.0, slabs in 3usize..12) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = Arc::new(TriSurfaceMesh::sphere(2));
        let cache = SnapshotCache::laplace(mesh, FlowMap::sphere_stretch(exponent, 1.0), TimeGrid::new(slabs, 1.0).unwrap()).unwrap();
        let m = cache.num_dofs();
        let mut random = || DgFunction::from_flat(slabs, m, (0..slabs * m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (u, g) = (random(), random());
        let lhs = discrete_inner(&cache, &apply_state_operator(&cache, &u).unwrap(), &g);
        let rhs = discrete_inner(&cache, &u, &apply_adjoint_operator(&cache, &g).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + 1.0));
    }

    #[test]
    fn state_operator_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mesh = Arc::new(TriSurfaceMesh::sphere(2));
        let cache = SnapshotCache::laplace(mesh, FlowMap::example_flow(), TimeGrid::new(6, 1.0).unwrap()).unwrap();
        let m = cache.num_dofs();
        let mut random = || DgFunction::from_flat(6, m, (0..6 * m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let (u, v) = (random(), random());
        let mut combo = u.clone();
        combo.scale(a);
        combo.axpy(b, &v);
        let mut expected = apply_state_operator(&cache, &u).unwrap();
        expected.scale(a);
        expected.axpy(b, &apply_state_operator(&cache, &v).unwrap());
        let got = apply_state_operator(&cache, &combo).unwrap();
        for (x, y) in got.as_slice().iter().zip(expected.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn refinement_hierarchy_keeps_invariants() {
    let mut mesh = TriSurfaceMesh::macro_sphere();
    for level in 0..=7 {
        let inv = mesh.invariants();
        assert!(inv.holds(10.0), "level {level}: {inv:?}");
        assert_eq!(mesh.level, level);
        let (v, e, f) = (mesh.num_vertices(), mesh.edges().len(), mesh.num_triangles());
        assert_eq!(v + f, e + 2);
        mesh = mesh.refine_longest_edge();
    }
}

#[test]
fn refinement_approaches_sphere_area() {
    let defects: Vec<f64> = (0..=6).map(|l| 4.0 * std::f64::consts::PI - TriSurfaceMesh::sphere(l).area()).collect();
    assert!(defects.iter().all(|&d| d > 0.0));
    assert!(defects.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn convergence_csv_is_deterministic_apart_from_timings() {
    use esfem::experiments::{run_example_one, ExampleOneData, RunSettings};
    let csv = || {
        let rec = run_example_one(&[0, 1, 2, 3], &ExampleOneData::default(), &RunSettings::default(), |_| {}).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(csv(), csv());
}
