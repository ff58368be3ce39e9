//! Ground plane: the rigid transform into the canonical frame (plane through
//! the origin, normal along +Y), signed-distance queries, the clipped
//! nearest-k contact loss and plane estimation from point trajectories.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{transform, Transform, Vec3};
use crate::numopt::nelder_mead;

/// Number of smallest signed distances entering the plane loss.
pub const PLANE_LOSS_K: usize = 20;
/// Clamp distance for the plane loss, meters.
pub const PLANE_LOSS_DELTA: f64 = 0.2;

/// Ground plane with contact material parameters.
///
/// `transform` maps world coordinates into the canonical frame in which the
/// plane passes through the origin with normal +Y, so the Y component of a
/// transformed point is its signed distance to the plane.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundPlane {
    pub transform: Transform,
    /// Coulomb friction coefficient.
    pub friction: f64,
    /// Normal contact stiffness (N/m). When set, the rigid complementarity
    /// normal constraint is replaced by a compliant spring-damper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    /// Normal contact damping (N*s/m), used only in compliant mode.
    #[serde(default)]
    pub damping: f64,
}

impl Default for GroundPlane {
    fn default() -> Self {
        GroundPlane {
            transform: Transform::identity(),
            friction: 0.9,
            stiffness: None,
            damping: 0.0,
        }
    }
}

impl GroundPlane {
    /// Plane with unit `normal` passing through the points `{x : n.x = offset}`.
    pub fn from_normal_offset(normal: Vec3, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 1e-12) {
            return Err(Error::Contract("plane normal must be nonzero".into()));
        }
        let normal = normal / n;
        let rot = UnitQuaternion::rotation_between(&normal, &Vec3::y()).unwrap_or_else(|| {
            // Antiparallel: rotate half a turn about X.
            UnitQuaternion::from_axis_angle(&nalgebra::Vector3::x_axis(), std::f64::consts::PI)
        });
        Ok(GroundPlane {
            transform: transform(rot, Vec3::new(0.0, -offset, 0.0)),
            ..GroundPlane::default()
        })
    }

    /// Unit plane normal in world coordinates.
    pub fn normal(&self) -> Vec3 {
        self.transform.rotation.inverse() * Vec3::y()
    }

    /// Plane offset along the normal (`n . x = offset` on the plane).
    pub fn offset(&self) -> f64 {
        -self.transform.translation.vector.y
    }

    /// Signed distance of one world point.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (self.transform * nalgebra::Point3::from(*p)).y
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.transform.rotation.coords.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "plane rotation quaternion norm {norm} deviates from 1"
            )));
        }
        if self.friction < 0.0 {
            return Err(Error::Validation(format!(
                "plane friction must be >= 0, got {}",
                self.friction
            )));
        }
        if let Some(k) = self.stiffness {
            if k <= 0.0 {
                return Err(Error::Validation(format!(
                    "plane stiffness must be > 0 when set, got {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Signed distances of a batch of world points under the canonical transform:
/// the Y components of the transformed homogeneous points.
pub fn signed_distances(tg: &Transform, points: &[Vec3]) -> Vec<f64> {
    points
        .iter()
        .map(|p| (tg * nalgebra::Point3::from(*p)).y)
        .collect()
}

/// Clipped nearest-k ground contact loss for one trajectory of point sets:
/// per frame, the L2 norm of the `k` smallest signed distances, each clamped
/// from above at `delta`, summed over frames.
pub fn plane_loss(tg: &Transform, frames: &[Vec<Vec3>], k: usize, delta: f64) -> Result<f64> {
    let mut total = 0.0;
    for (t, points) in frames.iter().enumerate() {
        if points.len() < k {
            return Err(Error::Contract(format!(
                "frame {t} has {} points, plane loss needs at least {k}",
                points.len()
            )));
        }
        let mut d = signed_distances(tg, points);
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let norm_sq: f64 = d[..k].iter().map(|x| x.min(delta)).map(|x| x * x).sum();
        total += norm_sq.sqrt();
    }
    Ok(total)
}

/// Estimation diagnostics alongside the recovered plane.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneEstimate {
    pub plane: GroundPlane,
    /// Final combined loss.
    pub loss: f64,
    pub converged: bool,
    /// False when every candidate saturates the clipped loss (e.g. the person
    /// is airborne for the whole sequence) and the plane is not determined by
    /// the data.
    pub identifiable: bool,
}

/// Normal direction from two tilt angles away from +Y.
fn tilt_normal(a: f64, b: f64) -> Vec3 {
    // Rotate e_y about Z by b, then about X by a.
    let rz = UnitQuaternion::from_axis_angle(&nalgebra::Vector3::z_axis(), b);
    let rx = UnitQuaternion::from_axis_angle(&nalgebra::Vector3::x_axis(), a);
    rx * (rz * Vec3::y())
}

/// Estimates the ground plane from left-foot, right-foot and whole-body point
/// trajectories by minimizing `L(ml) + L(mr) + 2 L(mb)` over plane tilt and
/// height with multi-start Nelder-Mead (8 starts around the canonical
/// up-vector). The body trajectory is the whole character's surface sample
/// set, feet included.
pub fn estimate_plane(
    foot_left: &[Vec<Vec3>],
    foot_right: &[Vec<Vec3>],
    body: &[Vec<Vec3>],
) -> Result<PlaneEstimate> {
    if foot_left.is_empty() || foot_right.is_empty() || body.is_empty() {
        return Err(Error::Contract(
            "plane estimation needs non-empty point trajectories".into(),
        ));
    }
    let (k, delta) = (PLANE_LOSS_K, PLANE_LOSS_DELTA);

    // Tilt beyond ~69 degrees from the canonical up-vector is rejected: the
    // clipped loss otherwise admits degenerate near-vertical planes slicing
    // through the point cloud.
    const MAX_TILT: f64 = 1.2;
    let combined = |params: &[f64]| -> f64 {
        if params[0].abs() > MAX_TILT || params[1].abs() > MAX_TILT {
            return f64::INFINITY;
        }
        let n = tilt_normal(params[0], params[1]);
        let plane = match GroundPlane::from_normal_offset(n, params[2]) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let tg = &plane.transform;
        let l = plane_loss(tg, foot_left, k, delta).unwrap_or(f64::INFINITY);
        let r = plane_loss(tg, foot_right, k, delta).unwrap_or(f64::INFINITY);
        let b = plane_loss(tg, body, k, delta).unwrap_or(f64::INFINITY);
        l + r + 2.0 * b
    };

    // Initial offset guesses from the data extent along each start normal.
    let tilt = 0.35;
    let starts: Vec<(f64, f64)> = vec![
        (0.0, 0.0),
        (tilt, 0.0),
        (-tilt, 0.0),
        (0.0, tilt),
        (0.0, -tilt),
        (0.2, 0.2),
        (-0.2, -0.2),
        (0.2, -0.2),
    ];

    let min_proj = |n: &Vec3| -> f64 {
        let mut m = f64::INFINITY;
        for frames in [foot_left, foot_right, body] {
            for frame in frames {
                for p in frame {
                    m = m.min(n.dot(p));
                }
            }
        }
        m
    };

    let mut best: Option<crate::numopt::LocalOpt> = None;
    for (a, b) in starts {
        let n0 = tilt_normal(a, b);
        let h0 = min_proj(&n0);
        let res = nelder_mead(combined, &[a, b, h0], 0.05, 600, 1e-12);
        let better = match &best {
            None => true,
            Some(cur) => res.f < cur.f,
        };
        if better {
            best = Some(res);
        }
    }
    let best = best.unwrap();

    // Saturation level: every clamped distance at delta in every term. The
    // optimum can always touch the lowest frame, so a fully flat loss never
    // occurs; the plane is flagged unidentifiable when more than half of the
    // weighted frame terms remain saturated at the optimum (mostly-airborne
    // data pins the plane to at best a single arc point).
    let saturation =
        (foot_left.len() + foot_right.len() + 2 * body.len()) as f64 * delta * (k as f64).sqrt();
    let identifiable = best.f < 0.5 * saturation;

    let normal = tilt_normal(best.x[0], best.x[1]);
    let mut plane = GroundPlane::from_normal_offset(normal, best.x[2])?;
    plane.friction = GroundPlane::default().friction;
    Ok(PlaneEstimate {
        plane,
        loss: best.f,
        converged: best.converged,
        identifiable,
    })
}
