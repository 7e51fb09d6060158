//! Exact integration of bound-projected P1 functions.
//!
//! On each triangle the level sets {w = lo} and {w = hi} of a P1 function are
//! straight lines. Clipping along them splits the triangle into convex pieces
//! on which the projection P(w) = clamp(w, lo, hi) is a polynomial, so
//! low-order rules on a fan triangulation of every piece are exact.

use std::sync::Arc;

use super::quadrature::TRI_MIDPOINTS;
use crate::error::Result;
use crate::geometry::MeshSnapshot;
use crate::linalg::{SparseSymMatrix, SparsityPattern};

/// Tolerance on level-set values when classifying pieces.
pub const CLASSIFY_TOL: f64 = 1e-12;

pub(crate) const REFERENCE_TRIANGLE: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub type Bary = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Lower,
    Inactive,
    Upper,
}

#[derive(Debug, Clone)]
pub struct CutPiece {
    pub region: Region,
    /// Convex polygon in the barycentric coordinates of its triangle.
    pub polygon: Vec<Bary>,
}

/// Per-triangle decomposition induced by the bounds of one P1 function.
#[derive(Debug, Clone)]
pub struct CutRegion {
    pub lo: f64,
    pub hi: f64,
    pieces: Vec<CutPiece>,
    tri_ptr: Vec<usize>,
}

fn eval(s: &[f64; 3], l: &Bary) -> f64 {
    s[0] * l[0] + s[1] * l[1] + s[2] * l[2]
}

fn centroid(poly: &[Bary]) -> Bary {
    let n = poly.len() as f64;
    let mut c = [0.0; 3];
    for p in poly {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    c
}

/// Splits a convex polygon along {s = level}; returns (below, above).
fn split(poly: &[Bary], s: &[f64; 3], level: f64) -> (Vec<Bary>, Vec<Bary>) {
    let vals: Vec<f64> = poly.iter().map(|p| eval(s, p) - level).collect();
    if vals.iter().all(|&v| v <= 0.0) {
        return (poly.to_vec(), Vec::new());
    }
    if vals.iter().all(|&v| v >= 0.0) {
        return (Vec::new(), poly.to_vec());
    }
    let mut below = Vec::new();
    let mut above = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let j = (i + 1) % n;
        let (p, q) = (poly[i], poly[j]);
        let (vp, vq) = (vals[i], vals[j]);
        if vp <= 0.0 {
            below.push(p);
        }
        if vp >= 0.0 {
            above.push(p);
        }
        if (vp < 0.0 && vq > 0.0) || (vp > 0.0 && vq < 0.0) {
            let r = vp / (vp - vq);
            let x = [0, 1, 2].map(|a| p[a] + r * (q[a] - p[a]));
            below.push(x);
            above.push(x);
        }
    }
    (below, above)
}

/// Splits `poly` along every level set {s = level}.
pub(crate) fn clip_polygon_by_levels(poly: &[Bary], s: [f64; 3], levels: &[f64]) -> Vec<Vec<Bary>> {
    let mut pieces = vec![poly.to_vec()];
    for &level in levels {
        if !level.is_finite() {
            continue;
        }
        let mut next = Vec::with_capacity(pieces.len() + 1);
        for p in pieces {
            let (b, a) = split(&p, &s, level);
            if b.len() >= 3 {
                next.push(b);
            }
            if a.len() >= 3 {
                next.push(a);
            }
        }
        pieces = next;
    }
    pieces
}

/// Fan triangulation of a convex polygon.
pub(crate) fn fan(poly: &[Bary]) -> Vec<[Bary; 3]> {
    (1..poly.len() - 1).map(|i| [poly[0], poly[i], poly[i + 1]]).collect()
}

/// Area of a sub-triangle relative to its parent.
pub(crate) fn bary_area_fraction(t: &[Bary; 3]) -> f64 {
    let (a, b) = (
        [t[1][1] - t[0][1], t[1][2] - t[0][2]],
        [t[2][1] - t[0][1], t[2][2] - t[0][2]],
    );
    (a[0] * b[1] - a[1] * b[0]).abs()
}

pub fn polygon_area_fraction(poly: &[Bary]) -> f64 {
    fan(poly).iter().map(bary_area_fraction).sum()
}

fn classify(w: f64, lo: f64, hi: f64) -> Region {
    if w < lo - CLASSIFY_TOL {
        Region::Lower
    } else if w > hi + CLASSIFY_TOL {
        Region::Upper
    } else {
        Region::Inactive
    }
}

fn crosses(s: &[f64; 3], level: f64) -> bool {
    level.is_finite() && s.iter().any(|&v| v < level) && s.iter().any(|&v| v > level)
}

impl CutRegion {
    /// Decomposition for the nodal function `w` with bounds `lo < hi`.
    pub fn new(triangles: &[[usize; 3]], w: &[f64], lo: f64, hi: f64) -> Self {
        let mut pieces = Vec::with_capacity(triangles.len());
        let mut tri_ptr = Vec::with_capacity(triangles.len() + 1);
        tri_ptr.push(0);
        for tri in triangles {
            let s = tri.map(|j| w[j]);
            if !crosses(&s, lo) && !crosses(&s, hi) {
                let c = (s[0] + s[1] + s[2]) / 3.0;
                pieces.push(CutPiece {
                    region: classify(c, lo, hi),
                    polygon: REFERENCE_TRIANGLE.to_vec(),
                });
            } else {
                for poly in clip_polygon_by_levels(&REFERENCE_TRIANGLE, s, &[lo, hi]) {
                    let c = eval(&s, &centroid(&poly));
                    pieces.push(CutPiece {
                        region: classify(c, lo, hi),
                        polygon: poly,
                    });
                }
            }
            tri_ptr.push(pieces.len());
        }
        CutRegion {
            lo,
            hi,
            pieces,
            tri_ptr,
        }
    }

    pub fn num_triangles(&self) -> usize {
        self.tri_ptr.len() - 1
    }

    pub fn pieces_of(&self, tri: usize) -> &[CutPiece] {
        &self.pieces[self.tri_ptr[tri]..self.tri_ptr[tri + 1]]
    }

    /// Total area of the lower-active, inactive and upper-active sets.
    pub fn region_areas(&self, snap: &MeshSnapshot) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for e in 0..self.num_triangles() {
            let area = snap.element_frame(e)?.area;
            for p in self.pieces_of(e) {
                let idx = match p.region {
                    Region::Lower => 0,
                    Region::Inactive => 1,
                    Region::Upper => 2,
                };
                out[idx] += area * polygon_area_fraction(&p.polygon);
            }
        }
        Ok(out)
    }

    /// ∫ (lo·1_lower + hi·1_upper) φ_i.
    pub fn active_load(&self, snap: &MeshSnapshot) -> Result<Vec<f64>> {
        let mut b = vec![0.0; snap.num_vertices()];
        for (e, tri) in snap.mesh.triangles.iter().enumerate() {
            let area = snap.element_frame(e)?.area;
            for p in self.pieces_of(e) {
                let value = match p.region {
                    Region::Lower => self.lo,
                    Region::Upper => self.hi,
                    Region::Inactive => continue,
                };
                for sub in fan(&p.polygon) {
                    let a = area * bary_area_fraction(&sub);
                    let c = centroid(&sub);
                    for k in 0..3 {
                        b[tri[k]] += value * a * c[k];
                    }
                }
            }
        }
        Ok(b)
    }

    /// ∫_{inactive} φ_i φ_j.
    pub fn inactive_mass(&self, snap: &MeshSnapshot, pattern: &Arc<SparsityPattern>) -> Result<SparseSymMatrix> {
        let mut m = SparseSymMatrix::zeros(pattern.clone());
        for e in 0..snap.mesh.num_triangles() {
            let area = snap.element_frame(e)?.area;
            let mut local = [[0.0; 3]; 3];
            for p in self.pieces_of(e) {
                if p.region != Region::Inactive {
                    continue;
                }
                for sub in fan(&p.polygon) {
                    let a = area * bary_area_fraction(&sub);
                    for (mu, w) in TRI_MIDPOINTS.iter() {
                        let l = [0, 1, 2].map(|k| sub[0][k] * mu[0] + sub[1][k] * mu[1] + sub[2][k] * mu[2]);
                        for i in 0..3 {
                            for j in i..3 {
                                local[i][j] += w * a * l[i] * l[j];
                            }
                        }
                    }
                }
            }
            m.add_element(e, &local);
        }
        Ok(m)
    }
}

/// Decomposition for the control P(−p/α).
pub fn cut_decompose(snap: &MeshSnapshot, p: &[f64], alpha: f64, lo: f64, hi: f64) -> CutRegion {
    let w: Vec<f64> = p.iter().map(|v| -v / alpha).collect();
    CutRegion::new(&snap.mesh.triangles, &w, lo, hi)
}

/// A nodal function together with the bounds it is projected onto.
#[derive(Debug, Clone, Copy)]
pub struct Clamped<'a> {
    pub values: &'a [f64],
    pub lo: f64,
    pub hi: f64,
}

impl<'a> Clamped<'a> {
    pub fn new(values: &'a [f64], lo: f64, hi: f64) -> Self {
        Clamped { values, lo, hi }
    }
}

/// ∫ g(P(w_1), …, P(w_m), λ) over the snapshot, integrating exactly on the
/// union of all cut decompositions whenever g is at most quadratic on each
/// piece. `g` receives the clamped values and the barycentric coordinates.
pub fn integrate_clamped<G>(snap: &MeshSnapshot, fns: &[Clamped], mut g: G) -> Result<()>
where
    G: FnMut(usize, f64, &[f64], &Bary),
{
    let mut vals = vec![0.0; fns.len()];
    for (e, tri) in snap.mesh.triangles.iter().enumerate() {
        let area = snap.element_frame(e)?.area;
        let mut pieces = vec![REFERENCE_TRIANGLE.to_vec()];
        let node_vals: Vec<[f64; 3]> = fns.iter().map(|f| tri.map(|j| f.values[j])).collect();
        for (f, s) in fns.iter().zip(&node_vals) {
            if crosses(s, f.lo) || crosses(s, f.hi) {
                pieces = pieces
                    .iter()
                    .flat_map(|p| clip_polygon_by_levels(p, *s, &[f.lo, f.hi]))
                    .collect();
            }
        }
        for poly in &pieces {
            for sub in fan(poly) {
                let a = area * bary_area_fraction(&sub);
                for (mu, w) in TRI_MIDPOINTS.iter() {
                    let l = [0, 1, 2].map(|k| sub[0][k] * mu[0] + sub[1][k] * mu[1] + sub[2][k] * mu[2]);
                    for ((v, f), s) in vals.iter_mut().zip(fns).zip(&node_vals) {
                        *v = eval(s, &l).clamp(f.lo, f.hi);
                    }
                    g(e, w * a, &vals, &l);
                }
            }
        }
    }
    Ok(())
}

/// b_i = ∫ P_{[lo,hi]}(w) φ_i.
pub fn integrate_projected(snap: &MeshSnapshot, w: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut b = vec![0.0; snap.num_vertices()];
    let tris = &snap.mesh.triangles;
    integrate_clamped(snap, &[Clamped::new(w, lo, hi)], |e, wa, v, l| {
        for k in 0..3 {
            b[tris[e][k]] += wa * v[0] * l[k];
        }
    })?;
    Ok(b)
}

/// ∫ P(w_1) P(w_2) on the union cut.
pub fn projected_inner(snap: &MeshSnapshot, f: Clamped, g: Clamped) -> Result<f64> {
    let mut acc = 0.0;
    integrate_clamped(snap, &[f, g], |_, wa, v, _| acc += wa * v[0] * v[1])?;
    Ok(acc)
}

/// ∫ (P(w_1) − P(w_2))² on the union cut.
pub fn projected_distance_sq(snap: &MeshSnapshot, f: Clamped, g: Clamped) -> Result<f64> {
    let mut acc = 0.0;
    integrate_clamped(snap, &[f, g], |_, wa, v, _| acc += wa * (v[0] - v[1]).powi(2))?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FlowMap, TriSurfaceMesh, Vec3};
    use crate::surface_fem::{assemble_mass, mesh_pattern};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere(level: usize) -> MeshSnapshot {
        let mesh = Arc::new(TriSurfaceMesh::sphere(level));
        MeshSnapshot::new(mesh, &FlowMap::example_flow(), 0.35).unwrap()
    }

    #[test]
    fn zero_adjoint_is_inactive() {
        let snap = sphere(2);
        let cut = cut_decompose(&snap, &vec![0.0; snap.num_vertices()], 1.0, -0.5, 0.5);
        for e in 0..cut.num_triangles() {
            let p = cut.pieces_of(e);
            assert_eq!(p.len(), 1);
            assert_eq!(p[0].region, Region::Inactive);
        }
    }

    #[test]
    fn midline_cut_has_quarter_inactive() {
        let mesh = Arc::new(TriSurfaceMesh {
            vertices: vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            triangles: vec![[0, 1, 2]],
            level: 0,
        });
        let snap = MeshSnapshot::from_positions(mesh.clone(), 0.0, mesh.vertices.clone()).unwrap();
        let cut = CutRegion::new(&mesh.triangles, &[0.0, 1.0, 1.0], f64::NEG_INFINITY, 0.5);
        let areas = cut.region_areas(&snap).unwrap();
        assert!((areas[1] - 0.5 / 4.0).abs() < 1e-15);
        assert!((areas[2] - 0.5 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn unbounded_is_identity() {
        let snap = sphere(2);
        let w: Vec<f64> = snap.positions.iter().map(|x| x.x + 2.0 * x.z).collect();
        let cut = CutRegion::new(&snap.mesh.triangles, &w, f64::NEG_INFINITY, f64::INFINITY);
        for e in 0..cut.num_triangles() {
            assert_eq!(cut.pieces_of(e).len(), 1);
        }
        let b = integrate_projected(&snap, &w, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let m = assemble_mass(&snap, &mesh_pattern(&snap.mesh)).unwrap();
        let mw = m.mul_vec(&w);
        assert!(b.iter().zip(&mw).all(|(a, c)| (a - c).abs() < 1e-14));
    }

    #[test]
    fn piece_areas_sum_to_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let snap = sphere(3);
        let w: Vec<f64> = (0..snap.num_vertices()).map(|_| rng.random_range(-1.5..1.5)).collect();
        let cut = CutRegion::new(&snap.mesh.triangles, &w, -0.5, 0.5);
        for e in 0..cut.num_triangles() {
            let total: f64 = cut.pieces_of(e).iter().map(|p| polygon_area_fraction(&p.polygon)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_load_splits_into_active_and_inactive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let snap = sphere(3);
        let w: Vec<f64> = (0..snap.num_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cut = CutRegion::new(&snap.mesh.triangles, &w, -0.5, 0.5);
        let mi = cut.inactive_mass(&snap, &mesh_pattern(&snap.mesh)).unwrap();
        let mut parts = cut.active_load(&snap).unwrap();
        mi.mul_vec_add(&w, &mut parts);
        let direct = integrate_projected(&snap, &w, -0.5, 0.5).unwrap();
        assert!(parts.iter().zip(&direct).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let snap = sphere(2);
        let w: Vec<f64> = (0..snap.num_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact: f64 = integrate_projected(&snap, &w, -0.5, 0.5).unwrap().iter().sum();
        // sample uniformly by area
        let areas: Vec<f64> = (0..snap.mesh.num_triangles())
            .map(|e| snap.element_frame(e).unwrap().area)
            .collect();
        let total: f64 = areas.iter().sum();
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let mut r = rng.random::<f64>() * total;
            let mut e = 0;
            while r > areas[e] && e + 1 < areas.len() {
                r -= areas[e];
                e += 1;
            }
            let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            let t = snap.mesh.triangles[e];
            let v = ((1.0 - a - b) * w[t[0]] + a * w[t[1]] + b * w[t[2]]).clamp(-0.5, 0.5) * total;
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let sigma = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * sigma, "{mean} {exact} {sigma}");
    }

    #[test]
    fn union_distance_of_identical_functions_vanishes() {
        let snap = sphere(2);
        let w: Vec<f64> = snap.positions.iter().map(|x| 2.0 * x.z).collect();
        let f = Clamped::new(&w, -0.5, 0.5);
        assert!(projected_distance_sq(&snap, f, f).unwrap() < 1e-30);
        let norm = projected_inner(&snap, f, f).unwrap();
        let b = integrate_projected(&snap, &w, -0.5, 0.5).unwrap();
        let clamped: Vec<f64> = w.iter().map(|v| v.clamp(-0.5, 0.5)).collect();
        // ∫ P(w)² ≠ Σ b_i P(w)_i in general, but both are close on a fine mesh
        let approx: f64 = b.iter().zip(&clamped).map(|(a, c)| a * c).sum();
        assert!((norm - approx).abs() < 0.05 * norm);
    }

    #[test]
    fn bounds_enlarging_moves_towards_mass_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let snap = sphere(2);
        let w: Vec<f64> = (0..snap.num_vertices()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = assemble_mass(&snap, &mesh_pattern(&snap.mesh)).unwrap();
        let target = m.mul_vec(&w);
        let mut last = f64::INFINITY;
        for r in [0.25, 0.5, 1.0, 1.5, 2.5] {
            let b = integrate_projected(&snap, &w, -r, r).unwrap();
            let d = b.iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(d <= last + 1e-14);
            last = d;
        }
        assert!(last < 1e-13);
    }
}
