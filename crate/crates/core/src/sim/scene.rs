//! Scene description: ground plane plus optional static collision boxes
//! (furniture, platforms).

use serde::{Deserialize, Serialize};

use crate::math::{Transform, Vec3};
use crate::plane::GroundPlane;

/// Fixed collision box in the world.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StaticBox {
    pub pose: Transform,
    pub half_extents: Vec3,
    pub friction: f64,
}

impl StaticBox {
    /// Distance from a world point to the box surface (positive outside) and
    /// the outward surface normal in world coordinates. `None` for points
    /// deeper inside than any face distance (degenerate for contact use).
    pub fn distance_normal(&self, p: &Vec3) -> Option<(f64, Vec3)> {
        let local = (self.pose.inverse() * nalgebra::Point3::from(*p)).coords;
        let h = self.half_extents;
        let q = Vec3::new(local.x.abs() - h.x, local.y.abs() - h.y, local.z.abs() - h.z);
        if q.x > 0.0 || q.y > 0.0 || q.z > 0.0 {
            let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
            let d = outside.norm();
            let mut n_local = Vec3::zeros();
            for k in 0..3 {
                if q[k] > 0.0 {
                    n_local[k] = local[k].signum() * outside[k] / d;
                }
            }
            Some((d, self.pose.rotation * n_local))
        } else {
            // Inside: nearest face.
            let (mut best_axis, mut best_d) = (0, q.x);
            for k in 1..3 {
                if q[k] > best_d {
                    best_d = q[k];
                    best_axis = k;
                }
            }
            let mut n_local = Vec3::zeros();
            n_local[best_axis] = local[best_axis].signum();
            Some((best_d, self.pose.rotation * n_local))
        }
    }
}

/// World the character is simulated in.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Scene {
    /// Ground plane; also defines the gravity direction (canonical -Y).
    /// `None` simulates in free space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<GroundPlane>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<StaticBox>,
}

impl Scene {
    pub fn empty() -> Self {
        Scene {
            plane: None,
            boxes: Vec::new(),
        }
    }

    pub fn ground(plane: GroundPlane) -> Self {
        Scene {
            plane: Some(plane),
            boxes: Vec::new(),
        }
    }

    /// World up direction: the plane normal, or +Y without a plane.
    pub fn up(&self) -> Vec3 {
        self.plane
            .as_ref()
            .map(|p| p.normal())
            .unwrap_or_else(Vec3::y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_distance_outside_face() {
        let b = StaticBox {
            pose: Transform::identity(),
            half_extents: Vec3::new(0.5, 0.5, 0.5),
            friction: 0.8,
        };
        let (d, n) = b.distance_normal(&Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(d, 0.5);
        assert_relative_eq!(n, Vec3::y(), epsilon = 1e-12);
    }

    #[test]
    fn box_distance_inside() {
        let b = StaticBox {
            pose: Transform::identity(),
            half_extents: Vec3::new(0.5, 0.5, 0.5),
            friction: 0.8,
        };
        let (d, n) = b.distance_normal(&Vec3::new(0.0, 0.45, 0.0)).unwrap();
        assert_relative_eq!(d, -0.05, epsilon = 1e-12);
        assert_relative_eq!(n, Vec3::y(), epsilon = 1e-12);
    }
}
