//! Triangle meshes in the object frame, millimetre units.

use nalgebra::Vector3;
use rand::Rng;
use thiserror::Error;

use crate::se3::Pose;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {index} but mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteVertex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    /// Optional per-vertex RGB, parallel to `vertices`.
    pub colors: Option<Vec<[u8; 3]>>,
}

impl Mesh {
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[u32; 3]>,
        colors: Option<Vec<[u8; 3]>>,
    ) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        for (i, v) in vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(MeshError::NonFiniteVertex(i));
            }
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index,
                        vertex_count: vertices.len(),
                    });
                }
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
            colors,
        })
    }

    pub fn vertex_centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.vertices.iter().sum();
        sum / self.vertices.len() as f64
    }

    /// Maximum distance between two vertices. Exact for small meshes; for
    /// large ones a farthest-point sweep from the axis-extreme vertices,
    /// which is exact for convex shapes and a tight bound otherwise.
    pub fn max_dimension(&self) -> f64 {
        let n = self.vertices.len();
        if n <= 4096 {
            let mut best = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    best = best.max((self.vertices[i] - self.vertices[j]).norm_squared());
                }
            }
            return best.sqrt();
        }
        let mut seeds = Vec::new();
        for axis in 0..3 {
            let lo = (0..n).min_by(|&a, &b| {
                self.vertices[a][axis].partial_cmp(&self.vertices[b][axis]).unwrap()
            });
            let hi = (0..n).max_by(|&a, &b| {
                self.vertices[a][axis].partial_cmp(&self.vertices[b][axis]).unwrap()
            });
            seeds.extend([lo.unwrap(), hi.unwrap()]);
        }
        let mut best = 0.0f64;
        for &s in &seeds {
            let mut cur = s;
            for _ in 0..4 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = (self.vertices[a] - self.vertices[cur]).norm_squared();
                        let db = (self.vertices[b] - self.vertices[cur]).norm_squared();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                let d = (self.vertices[far] - self.vertices[cur]).norm_squared();
                if d <= best {
                    break;
                }
                best = d;
                cur = far;
            }
        }
        best.sqrt()
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle_vertices(t);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::z()
        }
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Uniform-by-area surface samples with face normals; deterministic
    /// under the supplied RNG.
    pub fn sample_surface(&self, count: usize, rng: &mut impl Rng) -> Vec<SurfacePoint> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += self.triangle_area(t);
            cumulative.push(total);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let pick = rng.random_range(0.0..total);
            let t = cumulative.partition_point(|&a| a < pick).min(self.triangles.len() - 1);
            let [a, b, c] = self.triangle_vertices(t);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let sqrt_r1 = r1.sqrt();
            let w0 = 1.0 - sqrt_r1;
            let w1 = sqrt_r1 * (1.0 - r2);
            let w2 = sqrt_r1 * r2;
            out.push(SurfacePoint {
                position: a * w0 + b * w1 + c * w2,
                normal: self.face_normal(t),
            });
        }
        out
    }

    /// Mesh with every vertex mapped through `pose`.
    pub fn transformed(&self, pose: &Pose) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Axis-aligned box centred at the origin, 12 triangles, outward winding.
    pub fn cuboid(size_x: f64, size_y: f64, size_z: f64) -> Mesh {
        let (hx, hy, hz) = (size_x / 2.0, size_y / 2.0, size_z / 2.0);
        let v = |x: f64, y: f64, z: f64| Vector3::new(x, y, z);
        let vertices = vec![
            v(-hx, -hy, -hz),
            v(hx, -hy, -hz),
            v(hx, hy, -hz),
            v(-hx, hy, -hz),
            v(-hx, -hy, hz),
            v(hx, -hy, hz),
            v(hx, hy, hz),
            v(-hx, hy, hz),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2], // z = -hz
            [4, 5, 6],
            [4, 6, 7], // z = +hz
            [0, 1, 5],
            [0, 5, 4], // y = -hy
            [3, 6, 2],
            [3, 7, 6], // y = +hy
            [0, 4, 7],
            [0, 7, 3], // x = -hx
            [1, 2, 6],
            [1, 6, 5], // x = +hx
        ];
        Mesh::new(vertices, triangles, None).unwrap()
    }

    /// UV sphere centred at the origin.
    pub fn uv_sphere(radius: f64, rings: u32, segments: u32) -> Mesh {
        let rings = rings.max(3);
        let segments = segments.max(3);
        let mut vertices = Vec::new();
        for ring in 0..=rings {
            let phi = std::f64::consts::PI * ring as f64 / rings as f64;
            for seg in 0..segments {
                let theta = 2.0 * std::f64::consts::PI * seg as f64 / segments as f64;
                vertices.push(Vector3::new(
                    radius * phi.sin() * theta.cos(),
                    radius * phi.sin() * theta.sin(),
                    radius * phi.cos(),
                ));
            }
        }
        let idx = |ring: u32, seg: u32| ring * segments + seg % segments;
        let mut triangles = Vec::new();
        for ring in 0..rings {
            for seg in 0..segments {
                let a = idx(ring, seg);
                let b = idx(ring + 1, seg);
                let c = idx(ring + 1, seg + 1);
                let d = idx(ring, seg + 1);
                if ring > 0 {
                    triangles.push([a, b, d]);
                }
                if ring + 1 < rings {
                    triangles.push([b, c, d]);
                }
            }
        }
        Mesh::new(vertices, triangles, None).unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}
