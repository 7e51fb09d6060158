use std::collections::HashMap;
use std::io::Write;

use super::Vec3;

/// Relative tolerance under which two edge lengths count as equal when
/// picking the longest edge of a triangle.
const LENGTH_TIE_TOL: f64 = 1e-12;

/// Closed triangulated surface whose vertices lie on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TriSurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub level: usize,
}

/// Summary of the structural checks performed by [`TriSurfaceMesh::invariants`].
#[derive(Debug, Clone)]
pub struct MeshInvariants {
    pub max_radius_defect: f64,
    pub closed_manifold: bool,
    pub consistently_oriented: bool,
    pub euler_characteristic: i64,
    pub min_angle_deg: f64,
}

impl MeshInvariants {
    pub fn holds(&self, angle_floor_deg: f64) -> bool {
        self.max_radius_defect <= 1e-12
            && self.closed_manifold
            && self.consistently_oriented
            && self.euler_characteristic == 2
            && self.min_angle_deg >= angle_floor_deg
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriSurfaceMesh {
    /// Cube inscribed in the unit sphere, each face split into two right
    /// triangles. The face diagonals on the top and bottom faces run through
    /// the vertices with `x + y = 0`, so that plane is a union of mesh edges.
    pub fn macro_sphere() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let corners = [
            [-1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
            [1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0],
            [-1.0, 1.0, 1.0],
        ];
        let vertices = corners
            .iter()
            .map(|c| Vec3::new(c[0] * s, c[1] * s, c[2] * s))
            .collect();
        let triangles = vec![
            // z = -1, diagonal 1-3
            [0, 3, 1],
            [3, 2, 1],
            // z = +1, diagonal 5-7
            [4, 5, 7],
            [5, 6, 7],
            // y = -1
            [0, 1, 4],
            [1, 5, 4],
            // x = +1
            [1, 2, 5],
            [2, 6, 5],
            // y = +1
            [2, 3, 6],
            [3, 7, 6],
            // x = -1
            [3, 0, 7],
            [0, 4, 7],
        ];
        TriSurfaceMesh {
            vertices,
            triangles,
            level: 0,
        }
    }

    /// Macro mesh refined `levels` times.
    pub fn sphere(levels: usize) -> Self {
        let mut mesh = Self::macro_sphere();
        for _ in 0..levels {
            mesh = mesh.refine_longest_edge();
        }
        mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Unique undirected edges, sorted by vertex pair.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| edge_key(t[i], t[(i + 1) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    /// Total area of the flat triangles.
    pub fn area(&self) -> f64 {
        triangle_areas(&self.vertices, &self.triangles).iter().sum()
    }

    /// Local index `i` of the longest edge `(t[i], t[i+1])`. Lengths within
    /// a relative `1e-12` are ties, resolved by the lowest vertex pair.
    fn longest_edge(&self, t: &[usize; 3]) -> usize {
        let len = |i: usize| (self.vertices[t[i]] - self.vertices[t[(i + 1) % 3]]).norm();
        let mut best = 0;
        for i in 1..3 {
            let (lb, li) = (len(best), len(i));
            let tie = (li - lb).abs() <= LENGTH_TIE_TOL * lb.max(li);
            if (!tie && li > lb)
                || (tie && edge_key(t[i], t[(i + 1) % 3]) < edge_key(t[best], t[(best + 1) % 3]))
            {
                best = i;
            }
        }
        best
    }

    /// One global longest-edge bisection sweep. Every triangle is bisected
    /// across its longest edge; neighbours whose longest edge differs get the
    /// extra bisections needed to stay conforming. New vertices are pushed
    /// radially onto the unit sphere.
    pub fn refine_longest_edge(&self) -> Self {
        let longest: Vec<usize> = self.triangles.iter().map(|t| self.longest_edge(t)).collect();
        let mut marked: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, &i) in self.triangles.iter().zip(&longest) {
            marked.insert(edge_key(t[i], t[(i + 1) % 3]), usize::MAX);
        }
        // conformity closure: a triangle with any marked edge must split its longest one
        loop {
            let mut changed = false;
            for (t, &i) in self.triangles.iter().zip(&longest) {
                let key = edge_key(t[i], t[(i + 1) % 3]);
                if marked.contains_key(&key) {
                    continue;
                }
                if (0..3).any(|j| marked.contains_key(&edge_key(t[j], t[(j + 1) % 3]))) {
                    marked.insert(key, usize::MAX);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut vertices = self.vertices.clone();
        let mut keys: Vec<(usize, usize)> = marked.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let mid = (self.vertices[key.0] + self.vertices[key.1]) * 0.5;
            marked.insert(key, vertices.len());
            vertices.push(mid / mid.norm());
        }

        let mut triangles = Vec::with_capacity(2 * self.triangles.len());
        for (t, &i) in self.triangles.iter().zip(&longest) {
            // rotate so the longest edge is (a, b)
            let (a, b, c) = (t[i], t[(i + 1) % 3], t[(i + 2) % 3]);
            let m = marked[&edge_key(a, b)];
            for child in [[a, m, c], [m, b, c]] {
                // the only original edge of each child is (c, a) resp. (b, c)
                let (p, q, r) = if child[0] == a {
                    (c, a, m)
                } else {
                    (b, c, m)
                };
                match marked.get(&edge_key(p, q)) {
                    Some(&mid) => {
                        triangles.push([p, mid, r]);
                        triangles.push([mid, q, r]);
                    }
                    None => triangles.push(child),
                }
            }
        }

        TriSurfaceMesh {
            vertices,
            triangles,
            level: self.level + 1,
        }
    }

    pub fn invariants(&self) -> MeshInvariants {
        let max_radius_defect = self
            .vertices
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for i in 0..3 {
                *directed.entry((t[i], t[(i + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
        for (&(a, b), &n) in &directed {
            *undirected.entry(edge_key(a, b)).or_insert(0) += n;
        }
        let closed_manifold = undirected.values().all(|&n| n == 2);
        let consistently_oriented = directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1));
        let euler_characteristic =
            self.vertices.len() as i64 - undirected.len() as i64 + self.triangles.len() as i64;
        MeshInvariants {
            max_radius_defect,
            closed_manifold,
            consistently_oriented,
            euler_characteristic,
            min_angle_deg: min_angle_deg(&self.vertices, &self.triangles),
        }
    }

    /// Writes the surface in OFF format with the given vertex positions
    /// (the reference ones, or those of a moved snapshot).
    pub fn write_off<W: Write>(&self, positions: &[Vec3], mut out: W) -> std::io::Result<()> {
        writeln!(out, "OFF")?;
        writeln!(out, "{} {} {}", positions.len(), self.triangles.len(), self.edges().len())?;
        for p in positions {
            writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z)?;
        }
        for t in &self.triangles {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

pub(crate) fn triangle_areas(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Vec<f64> {
    triangles
        .iter()
        .map(|t| {
            let e1 = vertices[t[1]] - vertices[t[0]];
            let e2 = vertices[t[2]] - vertices[t[0]];
            0.5 * e1.cross(&e2).norm()
        })
        .collect()
}

pub fn min_angle_deg(vertices: &[Vec3], triangles: &[[usize; 3]]) -> f64 {
    let mut min = f64::INFINITY;
    for t in triangles {
        for i in 0..3 {
            let p = vertices[t[i]];
            let u = vertices[t[(i + 1) % 3]] - p;
            let v = vertices[t[(i + 2) % 3]] - p;
            let angle = u.cross(&v).norm().atan2(u.dot(&v));
            min = min.min(angle.to_degrees());
        }
    }
    min
}
