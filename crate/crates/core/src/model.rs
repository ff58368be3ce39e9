//! Articulated character description: geometric primitives, joints, mass
//! properties and landmark attachments.
//!
//! Conventions:
//! - Y is up in the canonical frame; X is the character's left, Z is forward.
//! - A capsule's symmetry axis is its local Y; `length` is the cylindrical
//!   section only (the hemispherical caps extend it by one radius each side).
//! - Each link's frame sits at its proximal joint; `Primitive::local_transform`
//!   places the primitive inside that frame.
//! - Joints are spherical (3 DOF), parameterized by exponential-map vectors.
//!   `frame_in_child` is the identity for all stock joints, so the child link
//!   frame coincides with the joint frame.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{transform, Transform, Vec3};

/// Geometric shape of a collision/mass primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveShape {
    /// Capsule along local Y. `length` excludes the two hemispherical caps.
    Capsule { radius: f64, length: f64 },
    /// Axis-aligned box with full extents (width along X, height along Y,
    /// depth along Z).
    Box { width: f64, height: f64, depth: f64 },
}

impl PrimitiveShape {
    pub fn volume(&self) -> f64 {
        match *self {
            PrimitiveShape::Capsule { radius, length } => {
                std::f64::consts::PI * radius * radius * length
                    + 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)
            }
            PrimitiveShape::Box {
                width,
                height,
                depth,
            } => width * height * depth,
        }
    }

    /// All size parameters strictly positive?
    pub fn is_valid(&self) -> bool {
        match *self {
            PrimitiveShape::Capsule { radius, length } => radius > 0.0 && length > 0.0,
            PrimitiveShape::Box {
                width,
                height,
                depth,
            } => width > 0.0 && height > 0.0 && depth > 0.0,
        }
    }

    /// Inertia tensor about the geometric center, in the shape's own axes,
    /// for the given mass. Closed form: box `m/12 diag(h^2+d^2, w^2+d^2,
    /// w^2+h^2)`; capsule composed from a cylinder and two hemispheres via
    /// the parallel-axis theorem.
    pub fn inertia(&self, mass: f64) -> Matrix3<f64> {
        match *self {
            PrimitiveShape::Box {
                width: w,
                height: h,
                depth: d,
            } => Matrix3::from_diagonal(&Vector3::new(
                mass / 12.0 * (h * h + d * d),
                mass / 12.0 * (w * w + d * d),
                mass / 12.0 * (w * w + h * h),
            )),
            PrimitiveShape::Capsule { radius: r, length: l } => {
                let v_cyl = std::f64::consts::PI * r * r * l;
                let v_caps = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
                let density = mass / (v_cyl + v_caps);
                let m_cyl = density * v_cyl;
                let m_hemi = density * v_caps / 2.0;

                // Cylinder about its center, axis Y.
                let cyl_yy = 0.5 * m_cyl * r * r;
                let cyl_xx = m_cyl * (r * r / 4.0 + l * l / 12.0);

                // Hemisphere about its own centroid (centroid 3r/8 from the
                // flat face), then parallel-axis to the capsule center.
                let hemi_yy = 0.4 * m_hemi * r * r;
                let hemi_xx_com = m_hemi * r * r * (83.0 / 320.0);
                let com_offset = l / 2.0 + 3.0 * r / 8.0;
                let hemi_xx = hemi_xx_com + m_hemi * com_offset * com_offset;

                let xx = cyl_xx + 2.0 * hemi_xx;
                let yy = cyl_yy + 2.0 * hemi_yy;
                Matrix3::from_diagonal(&Vector3::new(xx, yy, xx))
            }
        }
    }

    /// Signed distance from a point (in the shape frame) to the surface;
    /// negative inside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        match *self {
            PrimitiveShape::Capsule { radius, length } => {
                let half = length / 2.0;
                let y = p.y.clamp(-half, half);
                let closest = Vec3::new(0.0, y, 0.0);
                (p - closest).norm() - radius
            }
            PrimitiveShape::Box {
                width,
                height,
                depth,
            } => {
                let h = Vec3::new(width / 2.0, height / 2.0, depth / 2.0);
                let q = Vec3::new(p.x.abs() - h.x, p.y.abs() - h.y, p.z.abs() - h.z);
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
        }
    }

    /// Unsigned distance from a point to the surface.
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        self.signed_distance(p).abs()
    }

    /// Deterministic, approximately uniform-area surface sampling in the
    /// shape frame. Uses golden-angle spirals (capsule) and per-face grids
    /// (box); no RNG so results are bit-stable.
    pub fn surface_samples(&self, n: usize) -> Vec<Vec3> {
        let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        let mut out = Vec::with_capacity(n);
        match *self {
            PrimitiveShape::Capsule { radius: r, length: l } => {
                let a_cyl = 2.0 * std::f64::consts::PI * r * l;
                let a_caps = 4.0 * std::f64::consts::PI * r * r;
                let n_cyl = ((a_cyl / (a_cyl + a_caps)) * n as f64).round() as usize;
                let n_caps = (n.saturating_sub(n_cyl) + 1) & !1; // even split
                let n_hemi = n_caps / 2;
                for i in 0..n_cyl {
                    let frac = (i as f64 + 0.5) / n_cyl as f64;
                    let y = -l / 2.0 + frac * l;
                    let theta = golden * i as f64;
                    out.push(Vec3::new(r * theta.cos(), y, r * theta.sin()));
                }
                // Fibonacci hemisphere at each end.
                for (sign, count) in [(1.0_f64, n_hemi), (-1.0, n_caps - n_hemi)] {
                    for i in 0..count {
                        let frac = (i as f64 + 0.5) / count as f64;
                        let y = frac; // in (0, 1)
                        let rho = (1.0 - y * y).max(0.0).sqrt();
                        let theta = golden * i as f64;
                        out.push(Vec3::new(
                            r * rho * theta.cos(),
                            sign * (l / 2.0 + r * y),
                            r * rho * theta.sin(),
                        ));
                    }
                }
            }
            PrimitiveShape::Box {
                width,
                height,
                depth,
            } => {
                let h = [width / 2.0, height / 2.0, depth / 2.0];
                // Face areas: +-X, +-Y, +-Z.
                let areas = [
                    height * depth,
                    height * depth,
                    width * depth,
                    width * depth,
                    width * height,
                    width * height,
                ];
                let total: f64 = areas.iter().sum();
                for (face, &area) in areas.iter().enumerate() {
                    let axis = face / 2;
                    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                    let count = ((area / total) * n as f64).round().max(1.0) as usize;
                    let (u_axis, v_axis) = match axis {
                        0 => (1, 2),
                        1 => (0, 2),
                        _ => (0, 1),
                    };
                    // Full centered grid per face (may slightly exceed the
                    // per-face budget); partial rows would make the sample
                    // cloud asymmetric and bias centroid/covariance.
                    let aspect = (2.0 * h[u_axis]) / (2.0 * h[v_axis]).max(1e-12);
                    let cols = ((count as f64 * aspect).sqrt().round() as usize).max(1);
                    let rows = count.div_ceil(cols).max(1);
                    for row in 0..rows {
                        for col in 0..cols {
                            let u = ((col as f64 + 0.5) / cols as f64 * 2.0 - 1.0) * h[u_axis];
                            let v = ((row as f64 + 0.5) / rows as f64 * 2.0 - 1.0) * h[v_axis];
                            let mut p = [0.0; 3];
                            p[axis] = sign * h[axis];
                            p[u_axis] = u;
                            p[v_axis] = v;
                            out.push(Vec3::new(p[0], p[1], p[2]));
                        }
                    }
                }
            }
        }
        out
    }
}

/// A rigid primitive attached to a link.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: PrimitiveShape,
    /// Link this primitive is rigidly attached to.
    pub link: usize,
    /// Pose of the primitive frame in the link frame.
    pub local_transform: Transform,
    /// Mass in kg.
    pub mass: f64,
    /// Inertia about the primitive's geometric center, expressed in link-frame
    /// axes (i.e. `R * I_shape * R^T` with `R` the local rotation).
    pub inertia: Matrix3<f64>,
}

impl Primitive {
    /// Builds a primitive with inertia derived from shape and mass.
    pub fn new(shape: PrimitiveShape, link: usize, local_transform: Transform, mass: f64) -> Self {
        let r = local_transform.rotation.to_rotation_matrix();
        let inertia = r.matrix() * shape.inertia(mass) * r.matrix().transpose();
        Primitive {
            shape,
            link,
            local_transform,
            mass,
            inertia,
        }
    }
}

/// Spherical joint connecting two links.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent_link: usize,
    pub child_link: usize,
    /// Pose of the joint frame in the parent link frame.
    pub frame_in_parent: Transform,
    /// Pose of the joint frame in the child link frame.
    pub frame_in_child: Transform,
    /// Per exponential-map axis (lower, upper) limits in radians.
    pub limits: [(f64, f64); 3],
    /// Per-axis torque limit in N * m.
    pub torque_limit: [f64; 3],
}

/// Landmark rigidly attached to a link.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LandmarkAttachment {
    pub link: usize,
    pub offset: Vec3,
    pub id: String,
}

/// Mass and first/second moments of a link, composed from its primitives.
#[derive(Clone, Debug)]
pub struct LinkMassProps {
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vec3,
    /// Inertia about the link COM, link-frame axes.
    pub inertia_about_com: Matrix3<f64>,
}

/// Articulated character: a tree of links carrying primitives.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BodyModel {
    pub link_names: Vec<String>,
    pub primitives: Vec<Primitive>,
    pub joints: Vec<JointSpec>,
    pub base_link: usize,
    pub landmark_attachments: Vec<LandmarkAttachment>,
}

impl BodyModel {
    pub fn link_count(&self) -> usize {
        self.link_names.len()
    }

    /// Actuated degrees of freedom: 3 per spherical joint. The 6-DOF free
    /// base is not counted.
    pub fn dof_count(&self) -> usize {
        3 * self.joints.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.primitives.iter().map(|p| p.mass).sum()
    }

    /// Index of the joint whose child is `link`, if any.
    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.joints.iter().position(|j| j.child_link == link)
    }

    /// Joint indices ordered so that each joint's parent link is either the
    /// base or the child of an earlier joint.
    pub fn joint_topological_order(&self) -> Result<Vec<usize>> {
        let n = self.joints.len();
        let mut visited_links = vec![false; self.link_count()];
        if self.base_link >= self.link_count() {
            return Err(Error::Validation(format!(
                "base_link {} out of range ({} links)",
                self.base_link,
                self.link_count()
            )));
        }
        visited_links[self.base_link] = true;
        let mut order = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        loop {
            let mut progressed = false;
            for (ji, joint) in self.joints.iter().enumerate() {
                if placed[ji] {
                    continue;
                }
                if joint.parent_link < visited_links.len() && visited_links[joint.parent_link] {
                    if joint.child_link >= visited_links.len() {
                        return Err(Error::Validation(format!(
                            "joint '{}' child link {} out of range",
                            joint.name, joint.child_link
                        )));
                    }
                    if visited_links[joint.child_link] {
                        return Err(Error::Validation(format!(
                            "joint '{}' forms a cycle at link {}",
                            joint.name, joint.child_link
                        )));
                    }
                    visited_links[joint.child_link] = true;
                    placed[ji] = true;
                    order.push(ji);
                    progressed = true;
                }
            }
            if order.len() == n {
                break;
            }
            if !progressed {
                return Err(Error::Validation(
                    "joint graph is not a tree rooted at the base link".into(),
                ));
            }
        }
        if visited_links.iter().any(|v| !v) {
            return Err(Error::Validation(
                "some links are not connected to the base".into(),
            ));
        }
        Ok(order)
    }

    /// Composes the primitives of `link` into a single rigid-body inertia.
    pub fn link_mass_props(&self, link: usize) -> LinkMassProps {
        let prims: Vec<&Primitive> = self.primitives.iter().filter(|p| p.link == link).collect();
        let mass: f64 = prims.iter().map(|p| p.mass).sum();
        if mass <= 0.0 {
            return LinkMassProps {
                mass: 0.0,
                com: Vec3::zeros(),
                inertia_about_com: Matrix3::zeros(),
            };
        }
        let com = prims
            .iter()
            .map(|p| p.local_transform.translation.vector * p.mass)
            .sum::<Vec3>()
            / mass;
        let mut inertia = Matrix3::zeros();
        for p in prims {
            let d = p.local_transform.translation.vector - com;
            let shift = p.mass * (Matrix3::identity() * d.norm_squared() - d * d.transpose());
            inertia += p.inertia + shift;
        }
        LinkMassProps {
            mass,
            com,
            inertia_about_com: inertia,
        }
    }

    /// Mass properties for every link.
    pub fn all_link_mass_props(&self) -> Vec<LinkMassProps> {
        (0..self.link_count())
            .map(|l| self.link_mass_props(l))
            .collect()
    }

    /// Left/right foot link indices, identified by the `foot_l` / `foot_r`
    /// naming convention.
    pub fn foot_links(&self) -> Option<(usize, usize)> {
        let l = self.link_names.iter().position(|n| n == "foot_l")?;
        let r = self.link_names.iter().position(|n| n == "foot_r")?;
        Some((l, r))
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.link_names.is_empty() {
            return Err(Error::Validation("model has no links".into()));
        }
        self.joint_topological_order()?;

        for (i, p) in self.primitives.iter().enumerate() {
            if p.link >= self.link_count() {
                return Err(Error::Validation(format!(
                    "primitive {i} references link {} out of range",
                    p.link
                )));
            }
            if !p.shape.is_valid() {
                return Err(Error::Validation(format!(
                    "primitive {i} has non-positive size parameters"
                )));
            }
            if p.mass <= 0.0 {
                return Err(Error::Validation(format!(
                    "primitive {i} has non-positive mass {}",
                    p.mass
                )));
            }
            // Inertia must match the closed form for this shape/mass/rotation.
            let r = p.local_transform.rotation.to_rotation_matrix();
            let expected = r.matrix() * p.shape.inertia(p.mass) * r.matrix().transpose();
            let err = (p.inertia - expected).norm() / expected.norm();
            if err > 1e-6 {
                return Err(Error::Validation(format!(
                    "primitive {i} inertia inconsistent with shape (relative error {err:.2e})"
                )));
            }
            if (p.inertia - p.inertia.transpose()).norm() > 1e-9 {
                return Err(Error::Validation(format!(
                    "primitive {i} inertia not symmetric"
                )));
            }
            let eig = p.inertia.symmetric_eigenvalues();
            if eig.iter().any(|&e| e <= 0.0) {
                return Err(Error::Validation(format!(
                    "primitive {i} inertia not positive definite"
                )));
            }
        }

        for joint in &self.joints {
            for (axis, &(lo, hi)) in joint.limits.iter().enumerate() {
                if lo >= hi {
                    return Err(Error::Validation(format!(
                        "joint '{}' axis {axis} has empty limit range [{lo}, {hi}]",
                        joint.name
                    )));
                }
            }
            if joint.torque_limit.iter().any(|&t| t <= 0.0) {
                return Err(Error::Validation(format!(
                    "joint '{}' has non-positive torque limit",
                    joint.name
                )));
            }
        }

        for (i, lm) in self.landmark_attachments.iter().enumerate() {
            if lm.link >= self.link_count() {
                return Err(Error::Validation(format!(
                    "landmark {i} ('{}') references link {} out of range",
                    lm.id, lm.link
                )));
            }
        }
        Ok(())
    }

    /// Convenience: a model with a single free-floating link and no joints.
    pub fn single_link(name: &str, shape: PrimitiveShape, mass: f64) -> Self {
        BodyModel {
            link_names: vec![name.to_string()],
            primitives: vec![Primitive::new(shape, 0, Transform::identity(), mass)],
            joints: vec![],
            base_link: 0,
            landmark_attachments: vec![],
        }
    }
}

/// Default anatomical mass fractions for the stock character links.
/// Values follow published segment-mass tables (head/trunk/limb fractions of
/// total body mass); the trunk share is split across pelvis and the two torso
/// links. Fractions sum to 1.
pub fn stock_mass_fractions() -> Vec<(&'static str, f64)> {
    vec![
        ("pelvis", 0.1366),
        ("torso_lower", 0.1306),
        ("torso_upper", 0.2010),
        ("neck", 0.0134),
        ("head", 0.0694),
        ("thigh_l", 0.1050),
        ("shin_l", 0.0475),
        ("foot_l", 0.0143),
        ("thigh_r", 0.1050),
        ("shin_r", 0.0475),
        ("foot_r", 0.0143),
        ("upper_arm_l", 0.0325),
        ("forearm_l", 0.0187),
        ("hand_l", 0.0065),
        ("upper_arm_r", 0.0325),
        ("forearm_r", 0.0187),
        ("hand_r", 0.0065),
    ]
}

struct StockLimits {
    limits: [(f64, f64); 3],
    torque: f64,
}

fn stock_joint_params(name: &str) -> StockLimits {
    let sym = |v: f64| (-v, v);
    match name {
        "spine_1" | "spine_2" => StockLimits {
            limits: [sym(0.5), sym(0.5), sym(0.5)],
            torque: 200.0,
        },
        "neck" | "head" => StockLimits {
            limits: [sym(0.7), sym(0.7), sym(0.7)],
            torque: 50.0,
        },
        "hip_l" | "hip_r" => StockLimits {
            limits: [(-2.2, 0.9), sym(1.0), sym(0.9)],
            torque: 250.0,
        },
        "knee_l" | "knee_r" => StockLimits {
            limits: [(-0.05, 2.4), sym(0.2), sym(0.2)],
            torque: 180.0,
        },
        "ankle_l" | "ankle_r" => StockLimits {
            limits: [sym(0.9), sym(0.5), sym(0.5)],
            torque: 120.0,
        },
        "shoulder_l" | "shoulder_r" => StockLimits {
            limits: [sym(2.8), sym(1.5), sym(2.8)],
            torque: 150.0,
        },
        "elbow_l" | "elbow_r" => StockLimits {
            limits: [(-0.05, 2.6), sym(0.9), sym(0.2)],
            torque: 100.0,
        },
        "wrist_l" | "wrist_r" => StockLimits {
            limits: [sym(0.8), sym(0.3), sym(0.9)],
            torque: 40.0,
        },
        other => panic!("unknown stock joint '{other}'"),
    }
}

/// Builds the stock character: 17 links, 16 spherical joints (48 actuated
/// DOF), 26 primitives (22 capsules, boxes for hands and feet) and the
/// default 28-landmark set. Link masses follow [`stock_mass_fractions`]
/// scaled to `total_mass`; each link's mass is split between its primitives
/// by volume.
pub fn stock_character(total_mass: f64) -> BodyModel {
    let names: Vec<&str> = vec![
        "pelvis",
        "torso_lower",
        "torso_upper",
        "neck",
        "head",
        "thigh_l",
        "shin_l",
        "foot_l",
        "thigh_r",
        "shin_r",
        "foot_r",
        "upper_arm_l",
        "forearm_l",
        "hand_l",
        "upper_arm_r",
        "forearm_r",
        "hand_r",
    ];
    let idx = |n: &str| names.iter().position(|&x| x == n).unwrap();

    // (name, parent, child, joint position in parent frame)
    let joint_defs: Vec<(&str, &str, &str, Vec3)> = vec![
        ("spine_1", "pelvis", "torso_lower", Vec3::new(0.0, 0.10, 0.0)),
        ("spine_2", "torso_lower", "torso_upper", Vec3::new(0.0, 0.18, 0.0)),
        ("neck", "torso_upper", "neck", Vec3::new(0.0, 0.22, 0.0)),
        ("head", "neck", "head", Vec3::new(0.0, 0.10, 0.0)),
        ("hip_l", "pelvis", "thigh_l", Vec3::new(0.09, -0.05, 0.0)),
        ("knee_l", "thigh_l", "shin_l", Vec3::new(0.0, -0.42, 0.0)),
        ("ankle_l", "shin_l", "foot_l", Vec3::new(0.0, -0.42, 0.0)),
        ("hip_r", "pelvis", "thigh_r", Vec3::new(-0.09, -0.05, 0.0)),
        ("knee_r", "thigh_r", "shin_r", Vec3::new(0.0, -0.42, 0.0)),
        ("ankle_r", "shin_r", "foot_r", Vec3::new(0.0, -0.42, 0.0)),
        ("shoulder_l", "torso_upper", "upper_arm_l", Vec3::new(0.18, 0.18, 0.0)),
        ("elbow_l", "upper_arm_l", "forearm_l", Vec3::new(0.0, -0.28, 0.0)),
        ("wrist_l", "forearm_l", "hand_l", Vec3::new(0.0, -0.25, 0.0)),
        ("shoulder_r", "torso_upper", "upper_arm_r", Vec3::new(-0.18, 0.18, 0.0)),
        ("elbow_r", "upper_arm_r", "forearm_r", Vec3::new(0.0, -0.28, 0.0)),
        ("wrist_r", "forearm_r", "hand_r", Vec3::new(0.0, -0.25, 0.0)),
    ];

    let joints: Vec<JointSpec> = joint_defs
        .iter()
        .map(|(name, parent, child, pos)| {
            let params = stock_joint_params(name);
            JointSpec {
                name: name.to_string(),
                parent_link: idx(parent),
                child_link: idx(child),
                frame_in_parent: transform(UnitQuaternion::identity(), *pos),
                frame_in_child: Transform::identity(),
                limits: params.limits,
                torque_limit: [params.torque; 3],
            }
        })
        .collect();

    // Capsule axis along local Y unless rotated; `rot_x90` turns the axis to
    // point along X (used for the transverse torso capsules).
    let rot_x = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let capsule = |r: f64, l: f64| PrimitiveShape::Capsule { radius: r, length: l };
    let boxp = |w: f64, h: f64, d: f64| PrimitiveShape::Box {
        width: w,
        height: h,
        depth: d,
    };

    // (link name, shape, center in link frame, axis-along-X?)
    let prim_defs: Vec<(&str, PrimitiveShape, Vec3, bool)> = vec![
        ("pelvis", capsule(0.10, 0.14), Vec3::new(0.0, 0.0, 0.0), true),
        ("pelvis", capsule(0.09, 0.10), Vec3::new(0.0, 0.08, 0.02), true),
        ("pelvis", capsule(0.07, 0.10), Vec3::new(0.0, -0.06, -0.03), true),
        ("torso_lower", capsule(0.10, 0.12), Vec3::new(0.0, 0.06, 0.0), true),
        ("torso_lower", capsule(0.09, 0.10), Vec3::new(0.0, 0.14, 0.01), true),
        ("torso_upper", capsule(0.11, 0.16), Vec3::new(0.0, 0.10, 0.0), true),
        ("torso_upper", capsule(0.04, 0.12), Vec3::new(0.09, 0.18, 0.02), true),
        ("torso_upper", capsule(0.04, 0.12), Vec3::new(-0.09, 0.18, 0.02), true),
        ("neck", capsule(0.05, 0.08), Vec3::new(0.0, 0.05, 0.0), false),
        ("head", capsule(0.09, 0.06), Vec3::new(0.0, 0.10, 0.01), false),
        ("thigh_l", capsule(0.075, 0.32), Vec3::new(0.0, -0.21, 0.0), false),
        ("thigh_l", capsule(0.055, 0.22), Vec3::new(0.0, -0.18, 0.03), false),
        ("shin_l", capsule(0.05, 0.34), Vec3::new(0.0, -0.21, 0.0), false),
        ("foot_l", boxp(0.09, 0.06, 0.24), Vec3::new(0.0, -0.03, 0.06), false),
        ("thigh_r", capsule(0.075, 0.32), Vec3::new(0.0, -0.21, 0.0), false),
        ("thigh_r", capsule(0.055, 0.22), Vec3::new(0.0, -0.18, 0.03), false),
        ("shin_r", capsule(0.05, 0.34), Vec3::new(0.0, -0.21, 0.0), false),
        ("foot_r", boxp(0.09, 0.06, 0.24), Vec3::new(0.0, -0.03, 0.06), false),
        ("upper_arm_l", capsule(0.05, 0.06), Vec3::new(0.0, -0.03, 0.0), false),
        ("upper_arm_l", capsule(0.042, 0.20), Vec3::new(0.0, -0.16, 0.0), false),
        ("forearm_l", capsule(0.035, 0.18), Vec3::new(0.0, -0.125, 0.0), false),
        ("hand_l", boxp(0.08, 0.16, 0.04), Vec3::new(0.0, -0.08, 0.01), false),
        ("upper_arm_r", capsule(0.05, 0.06), Vec3::new(0.0, -0.03, 0.0), false),
        ("upper_arm_r", capsule(0.042, 0.20), Vec3::new(0.0, -0.16, 0.0), false),
        ("forearm_r", capsule(0.035, 0.18), Vec3::new(0.0, -0.125, 0.0), false),
        ("hand_r", boxp(0.08, 0.16, 0.04), Vec3::new(0.0, -0.08, 0.01), false),
    ];

    // Volume-weighted split of each link's anatomical mass over its primitives.
    let fractions = stock_mass_fractions();
    let link_mass = |link: &str| -> f64 {
        fractions
            .iter()
            .find(|(n, _)| *n == link)
            .map(|(_, f)| f * total_mass)
            .unwrap()
    };
    let mut link_volume = vec![0.0; names.len()];
    for (link, shape, _, _) in &prim_defs {
        link_volume[idx(link)] += shape.volume();
    }

    let primitives: Vec<Primitive> = prim_defs
        .into_iter()
        .map(|(link, shape, center, along_x)| {
            let li = idx(link);
            let mass = link_mass(link) * shape.volume() / link_volume[li];
            let rot = if along_x { rot_x } else { UnitQuaternion::identity() };
            Primitive::new(shape, li, transform(rot, center), mass)
        })
        .collect();

    let mut landmarks: Vec<LandmarkAttachment> = Vec::new();
    // Root plus every joint center (attached to the child link origin).
    landmarks.push(LandmarkAttachment {
        link: idx("pelvis"),
        offset: Vec3::zeros(),
        id: "pelvis".into(),
    });
    for j in &joints {
        landmarks.push(LandmarkAttachment {
            link: j.child_link,
            offset: j.frame_in_child.translation.vector,
            id: j.name.clone(),
        });
    }
    let face: Vec<(&str, Vec3)> = vec![
        ("nose", Vec3::new(0.0, 0.10, 0.10)),
        ("eye_l", Vec3::new(0.035, 0.13, 0.08)),
        ("eye_r", Vec3::new(-0.035, 0.13, 0.08)),
        ("ear_l", Vec3::new(0.08, 0.10, 0.0)),
        ("ear_r", Vec3::new(-0.08, 0.10, 0.0)),
    ];
    for (id, offset) in face {
        landmarks.push(LandmarkAttachment {
            link: idx("head"),
            offset,
            id: id.into(),
        });
    }
    for (id, link, offset) in [
        ("hand_tip_l", "hand_l", Vec3::new(0.0, -0.16, 0.01)),
        ("hand_tip_r", "hand_r", Vec3::new(0.0, -0.16, 0.01)),
        ("toe_l", "foot_l", Vec3::new(0.0, -0.05, 0.17)),
        ("heel_l", "foot_l", Vec3::new(0.0, -0.05, -0.05)),
        ("toe_r", "foot_r", Vec3::new(0.0, -0.05, 0.17)),
        ("heel_r", "foot_r", Vec3::new(0.0, -0.05, -0.05)),
    ] {
        landmarks.push(LandmarkAttachment {
            link: idx(link),
            offset,
            id: id.into(),
        });
    }

    let model = BodyModel {
        link_names: names.iter().map(|s| s.to_string()).collect(),
        primitives,
        joints,
        base_link: idx("pelvis"),
        landmark_attachments: landmarks,
    };
    debug_assert!(model.validate().is_ok());
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_cube_inertia() {
        let shape = PrimitiveShape::Box {
            width: 1.0,
            height: 1.0,
            depth: 1.0,
        };
        let i = shape.inertia(1.0);
        for k in 0..3 {
            assert_relative_eq!(i[(k, k)], 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn stock_character_counts_match_defaults() {
        let model = stock_character(70.0);
        assert_eq!(model.link_count(), 17);
        assert_eq!(model.joints.len(), 16);
        assert_eq!(model.dof_count(), 48);
        assert_eq!(model.primitives.len(), 26);
        assert_eq!(model.landmark_attachments.len(), 28);
        let boxes = model
            .primitives
            .iter()
            .filter(|p| matches!(p.shape, PrimitiveShape::Box { .. }))
            .count();
        assert_eq!(boxes, 4);
        model.validate().unwrap();
    }

    #[test]
    fn stock_character_mass_sums_to_total() {
        let model = stock_character(70.0);
        assert_relative_eq!(model.total_mass(), 70.0, epsilon = 1e-9);
    }

    #[test]
    fn mass_fractions_sum_to_one() {
        let total: f64 = stock_mass_fractions().iter().map(|(_, f)| f).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn cycle_detection() {
        let mut model = stock_character(70.0);
        model.joints[0].child_link = model.joints[0].parent_link;
        assert!(model.validate().is_err());
    }

    #[test]
    fn disconnected_link_detected() {
        let mut model = stock_character(70.0);
        model.link_names.push("orphan".into());
        assert!(model.validate().is_err());
    }

    #[test]
    fn signed_distance_capsule() {
        let c = PrimitiveShape::Capsule {
            radius: 0.5,
            length: 2.0,
        };
        assert_relative_eq!(c.signed_distance(&Vec3::new(1.0, 0.0, 0.0)), 0.5);
        assert_relative_eq!(c.signed_distance(&Vec3::new(0.0, 1.5, 0.0)), 0.0);
        assert_relative_eq!(c.signed_distance(&Vec3::new(0.0, 0.0, 0.0)), -0.5);
    }

    #[test]
    fn signed_distance_box() {
        let b = PrimitiveShape::Box {
            width: 2.0,
            height: 2.0,
            depth: 2.0,
        };
        assert_relative_eq!(b.signed_distance(&Vec3::new(2.0, 0.0, 0.0)), 1.0);
        assert_relative_eq!(b.signed_distance(&Vec3::new(0.0, 0.0, 0.0)), -1.0);
        assert_relative_eq!(b.signed_distance(&Vec3::new(1.0, 1.0, 0.0)), 0.0);
    }

    #[test]
    fn surface_samples_lie_on_surface() {
        for shape in [
            PrimitiveShape::Capsule {
                radius: 0.3,
                length: 0.8,
            },
            PrimitiveShape::Box {
                width: 0.4,
                height: 0.2,
                depth: 0.6,
            },
        ] {
            let samples = shape.surface_samples(600);
            assert!(samples.len() >= 500, "want >= 500 samples, got {}", samples.len());
            for s in &samples {
                assert!(
                    shape.surface_distance(s) < 1e-9,
                    "sample {s:?} not on surface of {shape:?}"
                );
            }
        }
    }

    #[test]
    fn link_mass_props_compose_parallel_axis() {
        // Two unit-mass point-ish boxes offset symmetrically: COM at center,
        // inertia picks up the parallel-axis term 2 * m * d^2.
        let small = PrimitiveShape::Box {
            width: 0.1,
            height: 0.1,
            depth: 0.1,
        };
        let model = BodyModel {
            link_names: vec!["l".into()],
            primitives: vec![
                Primitive::new(small.clone(), 0, transform(UnitQuaternion::identity(), Vec3::new(0.5, 0.0, 0.0)), 1.0),
                Primitive::new(small, 0, transform(UnitQuaternion::identity(), Vec3::new(-0.5, 0.0, 0.0)), 1.0),
            ],
            joints: vec![],
            base_link: 0,
            landmark_attachments: vec![],
        };
        let props = model.link_mass_props(0);
        assert_relative_eq!(props.mass, 2.0);
        assert_relative_eq!(props.com, Vec3::zeros(), epsilon = 1e-12);
        let own = 1.0 / 12.0 * (0.01 + 0.01);
        assert_relative_eq!(props.inertia_about_com[(1, 1)], 2.0 * own + 2.0 * 0.25, epsilon = 1e-12);
        assert_relative_eq!(props.inertia_about_com[(0, 0)], 2.0 * own, epsilon = 1e-12);
    }
}
