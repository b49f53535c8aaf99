use glam::DVec3;

use super::{NodePath, SceneError, SceneGraph};

const DET_EPSILON: f64 = 1e-9;
const MIN_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    pub direction: DVec3,
}

impl Ray {
    /// Normalizes `direction`; rejects zero or non-finite input.
    pub fn new(origin: DVec3, direction: DVec3) -> Result<Self, SceneError> {
        if !origin.is_finite() || !direction.is_finite() {
            return Err(SceneError::InvalidRay("non-finite component".into()));
        }
        let len = direction.length();
        if len < 1e-12 {
            return Err(SceneError::InvalidRay("zero direction".into()));
        }
        Ok(Self {
            origin,
            direction: direction / len,
        })
    }

    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub distance: f64,
    /// Weights of the first, second and third vertex.
    pub barycentric: [f64; 3],
}

/// Möller-Trumbore ray/triangle test.
pub fn intersect_triangle(ray: &Ray, [v0, v1, v2]: [DVec3; 3]) -> Option<TriangleHit> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < DET_EPSILON {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - v0;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    if t < MIN_DISTANCE {
        return None;
    }
    Some(TriangleHit {
        distance: t,
        barycentric: [1.0 - u - v, u, v],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PickResult {
    pub path: NodePath,
    pub triangle: usize,
    pub barycentric: [f64; 3],
    pub point: DVec3,
    pub distance: f64,
}

impl SceneGraph {
    /// Nearest world-space hit over every geometry instance. Equidistant hits
    /// resolve to the smaller `(path, triangle)`.
    pub fn ray_pick(&self, ray: &Ray) -> Option<PickResult> {
        let mut best: Option<PickResult> = None;
        self.traverse(|visit| {
            let Some(mesh_id) = visit.node.kind.mesh() else {
                return;
            };
            let mesh = &self.meshes[mesh_id];
            for triangle in 0..mesh.triangle_count() {
                let corners = mesh
                    .triangle(triangle)
                    .map(|v| visit.world.transform_point3(v));
                let Some(hit) = intersect_triangle(ray, corners) else {
                    continue;
                };
                let better = match &best {
                    None => true,
                    Some(b) => {
                        hit.distance < b.distance
                            || (hit.distance == b.distance
                                && (&visit.path, triangle) < (&b.path, b.triangle))
                    }
                };
                if better {
                    best = Some(PickResult {
                        path: visit.path.clone(),
                        triangle,
                        barycentric: hit.barycentric,
                        point: ray.at(hit.distance),
                        distance: hit.distance,
                    });
                }
            }
        });
        best
    }
}
