//! Ground and static-geometry contacts: candidate-point detection and an
//! iterative velocity-level impulse solver with Coulomb friction.
//!
//! The solver runs projected block iterations over contacts (sequential
//! impulses): the normal impulse is projected to be non-negative with a
//! Baumgarte bias on penetration beyond the slop, and the accumulated
//! tangential impulse vector is projected onto the friction disk of radius
//! `mu * normal`, so the cone bound holds exactly for every contact.

use nalgebra::{DVector, Matrix2, Vector2};

use crate::math::Vec3;
use crate::model::BodyModel;
use crate::plane::GroundPlane;
use crate::sim::mech::{KinCache, Mechanism};
use crate::sim::scene::StaticBox;

/// Baumgarte error-reduction factor for penetration beyond the slop.
pub const BAUMGARTE: f64 = 0.2;

/// One active contact point.
#[derive(Clone, Debug)]
pub struct Contact {
    pub link: usize,
    pub point: Vec3,
    pub normal: Vec3,
    /// Penetration depth (> 0 when below the surface).
    pub penetration: f64,
    pub friction: f64,
    pub normal_impulse: f64,
    pub tangent_impulse: [f64; 2],
}

/// World-frame axis data for one generalized coordinate, used to assemble
/// contact Jacobians.
pub struct DofAxis {
    pub axis: Vec3,
    pub origin: Vec3,
    pub linear: bool,
}

/// Per-dof world axes for the current kinematic state.
pub fn dof_axes(mech: &Mechanism, model: &BodyModel, cache: &KinCache) -> Vec<DofAxis> {
    let mut out = Vec::with_capacity(mech.n_dof);
    let base_pose = cache.link_pose[mech.base];
    let base_origin = base_pose.translation.vector;
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = 1.0;
        out.push(DofAxis {
            axis: base_pose.rotation * e,
            origin: base_origin,
            linear: false,
        });
    }
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = 1.0;
        out.push(DofAxis {
            axis: base_pose.rotation * e,
            origin: base_origin,
            linear: true,
        });
    }
    for joint in &model.joints {
        let child_pose = cache.link_pose[joint.child_link];
        let joint_pose = child_pose * joint.frame_in_child;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = 1.0;
            out.push(DofAxis {
                axis: joint_pose.rotation * e,
                origin: joint_pose.translation.vector,
                linear: false,
            });
        }
    }
    out
}

/// Detects active contacts between the character's candidate points and the
/// scene (ground plane and static boxes). Activation is speculative: a point
/// becomes a contact when its predicted distance after `dt` at the current
/// approach velocity falls below `margin`, so fast impacts are caught before
/// they tunnel through the surface.
pub fn detect_contacts(
    mech: &Mechanism,
    cache: &KinCache,
    plane: Option<&GroundPlane>,
    boxes: &[StaticBox],
    margin: f64,
    dt: f64,
) -> Vec<Contact> {
    let mut contacts = Vec::new();
    for link in 0..mech.n_links {
        let pose = cache.link_pose[link];
        let vel = cache.vel[link];
        for cand in &mech.contacts[link] {
            let center = (pose * nalgebra::Point3::from(cand.local)).coords;
            // World velocity of the candidate point.
            let v_local = vel.lin + vel.ang.cross(&cand.local);
            let v_world = pose.rotation * v_local;
            let mut consider = |d: f64, normal: Vec3, friction: f64| {
                let v_n = v_world.dot(&normal);
                if d + dt * v_n.min(0.0) < margin {
                    contacts.push(Contact {
                        link,
                        point: center - normal * cand.radius,
                        normal,
                        penetration: -d,
                        friction,
                        normal_impulse: 0.0,
                        tangent_impulse: [0.0; 2],
                    });
                }
            };
            if let Some(plane) = plane {
                let d = plane.signed_distance(&center) - cand.radius;
                consider(d, plane.normal(), plane.friction);
            }
            for sbox in boxes {
                if let Some((d, normal_world)) = sbox.distance_normal(&center) {
                    consider(d - cand.radius, normal_world, sbox.friction);
                }
            }
        }
    }
    contacts
}

/// Orthonormal tangent basis for a unit normal.
fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

/// Solver diagnostics for invariants and logging.
#[derive(Clone, Debug, Default)]
pub struct ContactSolveInfo {
    pub contact_count: usize,
    pub max_penetration: f64,
    /// Largest `||tangent|| - mu * normal` over contacts; <= 0 when the
    /// friction-cone bound holds.
    pub max_cone_violation: f64,
    pub min_normal_impulse: f64,
    /// Per-link total normal impulse, for contact flags.
    pub link_normal_impulse: Vec<f64>,
}

pub struct ContactParams {
    pub iterations: usize,
    pub slop: f64,
    pub dt: f64,
    /// Compliant-ground parameters `(stiffness, damping)`: replaces the rigid
    /// normal complementarity with a spring-damper impulse.
    pub compliant: Option<(f64, f64)>,
    /// Base rows are frozen (fixed-base rig).
    pub fixed_base: bool,
}

/// Resolves contact impulses in place on the generalized velocity `u`.
pub fn solve_contacts(
    mech: &Mechanism,
    model: &BodyModel,
    cache: &KinCache,
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    u: &mut DVector<f64>,
    contacts: &mut [Contact],
    params: &ContactParams,
) -> ContactSolveInfo {
    let mut info = ContactSolveInfo {
        contact_count: contacts.len(),
        link_normal_impulse: vec![0.0; mech.n_links],
        min_normal_impulse: 0.0,
        ..Default::default()
    };
    if contacts.is_empty() {
        return info;
    }
    let axes = dof_axes(mech, model, cache);
    let n_dof = mech.n_dof;

    // Per contact: 3 Jacobian rows (normal, t1, t2) over the link's dof path,
    // and the velocity responses X = M^-1 J^T.
    struct Row {
        j: DVector<f64>,
        x: DVector<f64>,
    }
    struct Block {
        rows: [Row; 3],
        a: nalgebra::Matrix3<f64>,
        t_inv: Matrix2<f64>,
    }

    let mut blocks = Vec::with_capacity(contacts.len());
    for c in contacts.iter() {
        let (t1, t2) = tangent_basis(&c.normal);
        let dirs = [c.normal, t1, t2];
        let rows: Vec<Row> = dirs
            .iter()
            .map(|dir| {
                let mut j = DVector::zeros(n_dof);
                for &dof in &mech.path_dofs[c.link] {
                    if params.fixed_base && dof < 6 {
                        continue;
                    }
                    let ax = &axes[dof];
                    j[dof] = if ax.linear {
                        ax.axis.dot(dir)
                    } else {
                        ax.axis.cross(&(c.point - ax.origin)).dot(dir)
                    };
                }
                let x = chol.solve(&j);
                Row { j, x }
            })
            .collect();
        let mut a = nalgebra::Matrix3::zeros();
        for r in 0..3 {
            for col in 0..3 {
                a[(r, col)] = rows[r].j.dot(&rows[col].x);
            }
        }
        let t_block = Matrix2::new(a[(1, 1)], a[(1, 2)], a[(2, 1)], a[(2, 2)]);
        let t_inv = t_block.try_inverse().unwrap_or_else(Matrix2::identity);
        let rows: [Row; 3] = match rows.try_into() {
            Ok(r) => r,
            Err(_) => unreachable!(),
        };
        blocks.push(Block { rows, a, t_inv });
    }

    // Compliant mode: normal impulses from the spring-damper law, with the
    // damper term resolved against the post-impulse velocity for stability.
    if let Some((stiffness, damping)) = params.compliant {
        for (c, b) in contacts.iter_mut().zip(blocks.iter()) {
            let v_n = b.rows[0].j.dot(u);
            let raw = params.dt * (stiffness * c.penetration.max(0.0) - damping * v_n)
                / (1.0 + params.dt * damping * b.a[(0, 0)]);
            let impulse = raw.max(0.0);
            let delta = impulse - c.normal_impulse;
            u.axpy(delta, &b.rows[0].x, 1.0);
            c.normal_impulse = impulse;
        }
    }

    let beta = BAUMGARTE / params.dt;
    for _ in 0..params.iterations {
        for (c, b) in contacts.iter_mut().zip(blocks.iter()) {
            if params.compliant.is_none() {
                let v_n = b.rows[0].j.dot(u);
                // Below the slop depth: Baumgarte push-out. Above it
                // (including speculative, not-yet-touching contacts): permit
                // approach down to exactly the slop depth within this step.
                let pen_err = c.penetration - params.slop;
                let target = if pen_err >= 0.0 {
                    beta * pen_err
                } else {
                    pen_err / params.dt
                };
                let delta = (target - v_n) / b.a[(0, 0)];
                let new_lambda = (c.normal_impulse + delta).max(0.0);
                let applied = new_lambda - c.normal_impulse;
                if applied != 0.0 {
                    u.axpy(applied, &b.rows[0].x, 1.0);
                }
                c.normal_impulse = new_lambda;
            }

            // Friction: drive tangent velocity to zero, impulse projected on
            // the disk of radius mu * normal.
            let v_t = Vector2::new(b.rows[1].j.dot(u), b.rows[2].j.dot(u));
            let delta_t = -(b.t_inv * v_t);
            let mut cand = Vector2::new(
                c.tangent_impulse[0] + delta_t.x,
                c.tangent_impulse[1] + delta_t.y,
            );
            let max_t = c.friction * c.normal_impulse;
            let norm = cand.norm();
            if norm > max_t {
                cand *= if norm > 0.0 { max_t / norm } else { 0.0 };
            }
            let d1 = cand.x - c.tangent_impulse[0];
            let d2 = cand.y - c.tangent_impulse[1];
            if d1 != 0.0 {
                u.axpy(d1, &b.rows[1].x, 1.0);
            }
            if d2 != 0.0 {
                u.axpy(d2, &b.rows[2].x, 1.0);
            }
            c.tangent_impulse = [cand.x, cand.y];
        }
    }

    info.min_normal_impulse = f64::INFINITY;
    for c in contacts.iter() {
        info.max_penetration = info.max_penetration.max(c.penetration);
        info.min_normal_impulse = info.min_normal_impulse.min(c.normal_impulse);
        let t_norm =
            (c.tangent_impulse[0].powi(2) + c.tangent_impulse[1].powi(2)).sqrt();
        let violation = t_norm - c.friction * c.normal_impulse;
        info.max_cone_violation = info.max_cone_violation.max(violation);
        info.link_normal_impulse[c.link] += c.normal_impulse;
        debug_assert!(c.normal_impulse >= 0.0, "negative normal impulse");
        debug_assert!(
            violation <= 1e-9,
            "friction cone violated by {violation}"
        );
    }
    info
}
