//! Minimal 6D spatial algebra for articulated rigid-body dynamics, in
//! body-frame coordinates with angular components first.

use nalgebra::Matrix3;

use crate::math::{Transform, Vec3};

/// Spatial motion or force vector: `ang` then `lin`. For motion vectors `lin`
/// is the velocity of the body point coinciding with the frame origin; for
/// force vectors `ang` is the moment about the frame origin.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpatialVec {
    pub ang: Vec3,
    pub lin: Vec3,
}

impl SpatialVec {
    pub fn zero() -> Self {
        SpatialVec {
            ang: Vec3::zeros(),
            lin: Vec3::zeros(),
        }
    }

    pub fn new(ang: Vec3, lin: Vec3) -> Self {
        SpatialVec { ang, lin }
    }

    pub fn add(&self, other: &SpatialVec) -> SpatialVec {
        SpatialVec {
            ang: self.ang + other.ang,
            lin: self.lin + other.lin,
        }
    }

    pub fn scale(&self, s: f64) -> SpatialVec {
        SpatialVec {
            ang: self.ang * s,
            lin: self.lin * s,
        }
    }

    pub fn dot(&self, other: &SpatialVec) -> f64 {
        self.ang.dot(&other.ang) + self.lin.dot(&other.lin)
    }
}

/// Motion-motion cross product `v1 x v2`.
pub fn motion_cross(a: &SpatialVec, b: &SpatialVec) -> SpatialVec {
    SpatialVec {
        ang: a.ang.cross(&b.ang),
        lin: a.ang.cross(&b.lin) + a.lin.cross(&b.ang),
    }
}

/// Motion-force cross product `v x* f`.
pub fn force_cross(v: &SpatialVec, f: &SpatialVec) -> SpatialVec {
    SpatialVec {
        ang: v.ang.cross(&f.ang) + v.lin.cross(&f.lin),
        lin: v.ang.cross(&f.lin),
    }
}

/// Expresses a parent-coordinate motion vector in child coordinates, given
/// the pose of the child frame in the parent frame.
pub fn motion_to_child(child_in_parent: &Transform, v: &SpatialVec) -> SpatialVec {
    let r = child_in_parent.rotation.inverse();
    let p = child_in_parent.translation.vector;
    SpatialVec {
        ang: r * v.ang,
        lin: r * (v.lin + v.ang.cross(&p)),
    }
}

/// Expresses a child-coordinate force vector in parent coordinates, given the
/// pose of the child frame in the parent frame.
pub fn force_to_parent(child_in_parent: &Transform, f: &SpatialVec) -> SpatialVec {
    let r = child_in_parent.rotation;
    let p = child_in_parent.translation.vector;
    let lin = r * f.lin;
    SpatialVec {
        ang: r * f.ang + p.cross(&lin),
        lin,
    }
}

/// Rigid-body inertia in center-of-mass form (frame-local axes).
#[derive(Clone, Copy, Debug)]
pub struct SpatialInertia {
    pub mass: f64,
    /// COM position in the frame.
    pub com: Vec3,
    /// Rotational inertia about the COM, frame axes.
    pub i_com: Matrix3<f64>,
}

impl SpatialInertia {
    pub fn zero() -> Self {
        SpatialInertia {
            mass: 0.0,
            com: Vec3::zeros(),
            i_com: Matrix3::zeros(),
        }
    }

    /// Inertia about the frame origin (parallel-axis from the COM).
    pub fn inertia_about_origin(&self) -> Matrix3<f64> {
        let c = self.com;
        self.i_com + self.mass * (Matrix3::identity() * c.norm_squared() - c * c.transpose())
    }

    /// Momentum produced by a motion vector: `(L, P)` about the frame origin.
    pub fn apply(&self, v: &SpatialVec) -> SpatialVec {
        let h = self.mass * self.com;
        SpatialVec {
            ang: self.inertia_about_origin() * v.ang + h.cross(&v.lin),
            lin: self.mass * v.lin + v.ang.cross(&h),
        }
    }

    /// Re-expresses this inertia in the parent frame, given the pose of this
    /// frame in the parent.
    pub fn to_parent(&self, child_in_parent: &Transform) -> SpatialInertia {
        let r = child_in_parent.rotation.to_rotation_matrix();
        SpatialInertia {
            mass: self.mass,
            com: (child_in_parent * nalgebra::Point3::from(self.com)).coords,
            i_com: r.matrix() * self.i_com * r.matrix().transpose(),
        }
    }

    /// Composes two inertias expressed in the same frame.
    pub fn add(&self, other: &SpatialInertia) -> SpatialInertia {
        let mass = self.mass + other.mass;
        if mass <= 0.0 {
            return SpatialInertia::zero();
        }
        let com = (self.mass * self.com + other.mass * other.com) / mass;
        let shift = |i: &Matrix3<f64>, m: f64, c: Vec3| -> Matrix3<f64> {
            let d = c - com;
            i + m * (Matrix3::identity() * d.norm_squared() - d * d.transpose())
        };
        SpatialInertia {
            mass,
            com,
            i_com: shift(&self.i_com, self.mass, self.com)
                + shift(&other.i_com, other.mass, other.com),
        }
    }

    /// Kinetic energy of a body with this inertia moving with `v`.
    pub fn kinetic_energy(&self, v: &SpatialVec) -> f64 {
        0.5 * v.dot(&self.apply(v))
    }
}
