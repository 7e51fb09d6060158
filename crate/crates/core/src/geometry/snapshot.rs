use std::sync::Arc;

use super::{FlowMap, TriSurfaceMesh, Vec3};
use crate::error::{Error, Result};

/// Deformed triangles below this area are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// The discrete surface at one instant: reference connectivity, moved vertices.
#[derive(Debug, Clone)]
pub struct MeshSnapshot {
    pub mesh: Arc<TriSurfaceMesh>,
    pub time: f64,
    pub positions: Vec<Vec3>,
}

/// Area, unit normal and constant surface gradients of the three hat
/// functions on one flat triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementFrame {
    pub area: f64,
    pub normal: Vec3,
    pub grads: [Vec3; 3],
}

impl ElementFrame {
    pub fn from_points(p: [Vec3; 3]) -> Option<Self> {
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let nn = n.norm_squared();
        let area = 0.5 * nn.sqrt();
        if !(area > MIN_TRIANGLE_AREA) {
            return None;
        }
        let grads = [
            n.cross(&(p[2] - p[1])) / nn,
            n.cross(&(p[0] - p[2])) / nn,
            n.cross(&(p[1] - p[0])) / nn,
        ];
        Some(ElementFrame {
            area,
            normal: n / nn.sqrt(),
            grads,
        })
    }
}

impl MeshSnapshot {
    pub fn new(mesh: Arc<TriSurfaceMesh>, flow: &FlowMap, time: f64) -> Result<Self> {
        flow.check_time(time)?;
        let positions = mesh.vertices.iter().map(|x| flow.position(x, time)).collect();
        Self::from_positions(mesh, time, positions)
    }

    /// Advances an existing snapshot to time `t`, integrating trajectories
    /// from `self.time` rather than from 0.
    pub fn advance(&self, flow: &FlowMap, t: f64) -> Result<Self> {
        flow.check_time(t)?;
        let positions = self.positions.iter().map(|x| flow.advance(x, self.time, t)).collect();
        Self::from_positions(self.mesh.clone(), t, positions)
    }

    pub fn from_positions(mesh: Arc<TriSurfaceMesh>, time: f64, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != mesh.vertices.len() {
            return Err(Error::DimensionMismatch {
                what: "snapshot positions",
                expected: mesh.vertices.len(),
                actual: positions.len(),
            });
        }
        let snap = MeshSnapshot {
            mesh,
            time,
            positions,
        };
        for (i, t) in snap.mesh.triangles.iter().enumerate() {
            let p = t.map(|j| snap.positions[j]);
            let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(Error::DegenerateTriangle {
                    triangle: i,
                    time,
                    area,
                });
            }
        }
        Ok(snap)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        self.mesh.triangles[tri].map(|j| self.positions[j])
    }

    pub fn element_frame(&self, tri: usize) -> Result<ElementFrame> {
        let corners = self.corners(tri);
        ElementFrame::from_points(corners).ok_or_else(|| Error::DegenerateTriangle {
            triangle: tri,
            time: self.time,
            area: 0.5 * (corners[1] - corners[0]).cross(&(corners[2] - corners[0])).norm(),
        })
    }

    pub fn area(&self) -> f64 {
        super::mesh::triangle_areas(&self.positions, &self.mesh.triangles).iter().sum()
    }

    pub fn min_angle_deg(&self) -> f64 {
        super::mesh::min_angle_deg(&self.positions, &self.mesh.triangles)
    }

    /// Elementwise tangential divergence of the piecewise linear interpolant
    /// of the flow velocity.
    pub fn velocity_divergence(&self, flow: &FlowMap) -> Result<Vec<f64>> {
        let vel: Vec<Vec3> = self.positions.iter().map(|x| flow.velocity(x, self.time)).collect();
        (0..self.mesh.triangles.len())
            .map(|e| {
                let frame = self.element_frame(e)?;
                let t = self.mesh.triangles[e];
                Ok((0..3).map(|i| frame.grads[i].dot(&vel[t[i]])).sum())
            })
            .collect()
    }

    /// Point with barycentric coordinates `bary` in triangle `tri`.
    pub fn point(&self, tri: usize, bary: [f64; 3]) -> Vec3 {
        let c = self.corners(tri);
        c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_triangle() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    #[test]
    fn unit_right_triangle_frame() {
        let f = ElementFrame::from_points(reference_triangle()).unwrap();
        assert_relative_eq!(f.area, 0.5);
        assert_relative_eq!(f.grads[0], Vec3::new(-1.0, -1.0, 0.0));
        assert_relative_eq!(f.grads[1], Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(f.grads[2], Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn gradients_sum_to_zero_and_are_tangent() {
        let mesh = Arc::new(TriSurfaceMesh::sphere(3));
        let flow = FlowMap::example_flow();
        let snap = MeshSnapshot::new(mesh.clone(), &flow, 0.3).unwrap();
        for e in 0..mesh.num_triangles() {
            let f = snap.element_frame(e).unwrap();
            let sum = f.grads[0] + f.grads[1] + f.grads[2];
            assert!(sum.norm() < 1e-12 * f.grads[0].norm());
            for g in &f.grads {
                assert!(g.dot(&f.normal).abs() < 1e-12 * g.norm());
            }
        }
    }

    #[test]
    fn static_snapshot_is_reference() {
        let mesh = Arc::new(TriSurfaceMesh::sphere(2));
        let snap = MeshSnapshot::new(mesh.clone(), &FlowMap::identity(1.0), 0.7).unwrap();
        assert_eq!(snap.positions, mesh.vertices);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mesh = Arc::new(TriSurfaceMesh {
            vertices: vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)],
            triangles: vec![[0, 1, 2]],
            level: 0,
        });
        let err = MeshSnapshot::from_positions(mesh.clone(), 0.0, mesh.vertices.clone());
        assert!(matches!(err, Err(Error::DegenerateTriangle { triangle: 0, .. })));
    }

    #[test]
    fn divergence_of_uniform_dilation() {
        // V = x on a static frame: divergence of the tangential part is 2 on a flat triangle
        let flow = FlowMap::ode(Arc::new(|x, _| *x), 1e-3, 1.0);
        let mesh = Arc::new(TriSurfaceMesh {
            vertices: reference_triangle().map(|p| p + Vec3::new(0.0, 0.0, 1.0)).to_vec(),
            triangles: vec![[0, 1, 2]],
            level: 0,
        });
        let snap = MeshSnapshot::from_positions(mesh.clone(), 0.0, mesh.vertices.clone()).unwrap();
        assert_relative_eq!(snap.velocity_divergence(&flow).unwrap()[0], 2.0, epsilon = 1e-14);
    }
}
