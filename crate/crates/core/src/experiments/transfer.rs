use crate::error::{Error, Result};
use crate::geometry::{TriSurfaceMesh, Vec3};
use crate::surface_fem::TRI7;

/// Barycentric tolerance for accepting a ray hit on a coarse triangle.
pub const TRANSFER_TOL: f64 = 1e-10;

/// Quadrature points of a fine mesh paired with the coarse-mesh points on the
/// same normal line of the reference unit sphere. The pairing is made on the
/// reference configuration and carried along by the flow, which keeps
/// barycentric coordinates fixed.
#[derive(Debug, Clone)]
pub struct Correspondence {
    /// Per fine triangle and 7-point rule node: (coarse triangle, coarse
    /// barycentric coordinates).
    pub targets: Vec<[(usize, [f64; 3]); 7]>,
}

struct Cone {
    axis: Vec3,
    cos_radius: f64,
}

fn bounding_cones(mesh: &TriSurfaceMesh) -> Vec<Cone> {
    mesh.triangles
        .iter()
        .map(|t| {
            let c = t.iter().map(|&j| mesh.vertices[j].normalize()).sum::<Vec3>().normalize();
            let min_cos = t
                .iter()
                .map(|&j| c.dot(&mesh.vertices[j].normalize()))
                .fold(1.0f64, f64::min);
            // widen slightly so that hits on edges are never rejected
            let angle = min_cos.clamp(-1.0, 1.0).acos() + 1e-6;
            Cone {
                axis: c,
                cos_radius: angle.cos(),
            }
        })
        .collect()
}

/// Barycentric coordinates of the point where the ray through `d` meets the
/// plane of the triangle, if the ray hits that plane on the positive side.
fn ray_barycentric(d: &Vec3, v: [Vec3; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_columns(&v);
    let mu = m.lu().solve(d)?;
    let s = mu.sum();
    if s <= 0.0 {
        return None;
    }
    Some([mu[0] / s, mu[1] / s, mu[2] / s])
}

impl Correspondence {
    /// Pairs every 7-point node of `fine` with the point of `coarse` on the
    /// same ray from the origin. Both meshes must be inscribed in the unit
    /// sphere around the origin.
    pub fn radial(coarse: &TriSurfaceMesh, fine: &TriSurfaceMesh) -> Result<Self> {
        let cones = bounding_cones(coarse);
        let mut targets = Vec::with_capacity(fine.num_triangles());
        for (e, t) in fine.triangles.iter().enumerate() {
            let c = t.map(|j| fine.vertices[j]);
            let mut row = [(0, [0.0; 3]); 7];
            for (slot, (l, _)) in row.iter_mut().zip(TRI7.iter()) {
                let d = (c[0] * l[0] + c[1] * l[1] + c[2] * l[2]).normalize();
                let mut best: Option<(f64, usize, [f64; 3])> = None;
                for (ct, (tri, cone)) in coarse.triangles.iter().zip(&cones).enumerate() {
                    if d.dot(&cone.axis) < cone.cos_radius {
                        continue;
                    }
                    let Some(b) = ray_barycentric(&d, tri.map(|j| coarse.vertices[j])) else {
                        continue;
                    };
                    let margin = b[0].min(b[1]).min(b[2]);
                    if best.is_none_or(|(m, _, _)| margin > m) {
                        best = Some((margin, ct, b));
                    }
                }
                match best {
                    Some((margin, ct, b)) if margin >= -TRANSFER_TOL => *slot = (ct, b),
                    _ => {
                        return Err(Error::ProjectionFailure(format!(
                            "no coarse triangle contains the image of node {slot:?} of fine triangle {e}",
                            slot = l
                        )))
                    }
                }
            }
            targets.push(row);
        }
        Ok(Correspondence { targets })
    }
}
