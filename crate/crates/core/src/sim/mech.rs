//! Preprocessed articulated mechanism: generalized-coordinate layout, per-step
//! kinematics, composite-rigid-body mass matrix and recursive Newton-Euler
//! bias forces.
//!
//! Generalized velocity layout: 6 base coordinates (angular then linear, both
//! in base body frame) followed by 3 per spherical joint (relative angular
//! velocity in the joint frame), in model joint order.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::Result;
use crate::math::{expmap_to_quat, quat_to_expmap, Transform, Vec3};
use crate::model::{BodyModel, PrimitiveShape};
use crate::sim::spatial::{
    force_cross, force_to_parent, motion_cross, motion_to_child, SpatialInertia, SpatialVec,
};
use crate::state::SimState;

/// Candidate contact point on a link: position in the link frame plus a
/// sphere radius (capsule cap centers carry their radius; box corners are
/// points).
#[derive(Clone, Copy, Debug)]
pub struct ContactCandidate {
    pub local: Vec3,
    pub radius: f64,
}

pub struct Mechanism {
    pub n_links: usize,
    pub base: usize,
    pub n_dof: usize,
    /// Joint indices in parent-before-child order.
    pub topo: Vec<usize>,
    pub parent_link: Vec<Option<usize>>,
    pub joint_of_link: Vec<Option<usize>>,
    /// Constant motion subspace of each joint, child link coordinates.
    s_cols: Vec<[SpatialVec; 3]>,
    /// Per-link rigid-body inertia, link frame.
    pub inertias: Vec<SpatialInertia>,
    /// Per-link generalized-coordinate indices influencing the link
    /// (base DOFs plus every joint on the path from the base).
    pub path_dofs: Vec<Vec<usize>>,
    /// Candidate contact points per link.
    pub contacts: Vec<Vec<ContactCandidate>>,
    /// (left, right) foot link indices when the naming convention holds.
    pub feet: Option<(usize, usize)>,
    /// Per-axis torque limits for the actuated DOFs, length `n_dof - 6`.
    pub torque_limits: DVector<f64>,
}

/// Per-step kinematics: world poses, link-in-parent relative poses and body
/// velocities.
pub struct KinCache {
    pub link_pose: Vec<Transform>,
    pub rel_pose: Vec<Transform>,
    pub vel: Vec<SpatialVec>,
}

impl Mechanism {
    pub fn new(model: &BodyModel) -> Result<Self> {
        model.validate()?;
        let n_links = model.link_count();
        let topo = model.joint_topological_order()?;
        let mut parent_link = vec![None; n_links];
        let mut joint_of_link = vec![None; n_links];
        for (ji, joint) in model.joints.iter().enumerate() {
            parent_link[joint.child_link] = Some(joint.parent_link);
            joint_of_link[joint.child_link] = Some(ji);
        }

        let s_cols: Vec<[SpatialVec; 3]> = model
            .joints
            .iter()
            .map(|j| {
                let r = j.frame_in_child.rotation;
                let p = j.frame_in_child.translation.vector;
                let col = |axis: Vec3| {
                    let ang = r * axis;
                    SpatialVec::new(ang, p.cross(&ang))
                };
                [col(Vec3::x()), col(Vec3::y()), col(Vec3::z())]
            })
            .collect();

        let inertias: Vec<SpatialInertia> = (0..n_links)
            .map(|l| {
                let props = model.link_mass_props(l);
                SpatialInertia {
                    mass: props.mass,
                    com: props.com,
                    i_com: props.inertia_about_com,
                }
            })
            .collect();

        let mut path_dofs: Vec<Vec<usize>> = vec![Vec::new(); n_links];
        path_dofs[model.base_link] = (0..6).collect();
        for &ji in &topo {
            let joint = &model.joints[ji];
            let mut dofs = path_dofs[joint.parent_link].clone();
            dofs.extend([6 + 3 * ji, 7 + 3 * ji, 8 + 3 * ji]);
            path_dofs[joint.child_link] = dofs;
        }

        let mut contacts: Vec<Vec<ContactCandidate>> = vec![Vec::new(); n_links];
        for prim in &model.primitives {
            let t = prim.local_transform;
            match prim.shape {
                PrimitiveShape::Capsule { radius, length } => {
                    for sign in [-1.0, 1.0] {
                        let local = t * nalgebra::Point3::new(0.0, sign * length / 2.0, 0.0);
                        contacts[prim.link].push(ContactCandidate {
                            local: local.coords,
                            radius,
                        });
                    }
                }
                PrimitiveShape::Box {
                    width,
                    height,
                    depth,
                } => {
                    for sx in [-0.5, 0.5] {
                        for sy in [-0.5, 0.5] {
                            for sz in [-0.5, 0.5] {
                                let local = t * nalgebra::Point3::new(
                                    sx * width,
                                    sy * height,
                                    sz * depth,
                                );
                                contacts[prim.link].push(ContactCandidate {
                                    local: local.coords,
                                    radius: 0.0,
                                });
                            }
                        }
                    }
                }
            }
        }

        let mut torque_limits = DVector::zeros(3 * model.joints.len());
        for (ji, joint) in model.joints.iter().enumerate() {
            for axis in 0..3 {
                torque_limits[3 * ji + axis] = joint.torque_limit[axis];
            }
        }

        Ok(Mechanism {
            n_links,
            base: model.base_link,
            n_dof: 6 + 3 * model.joints.len(),
            topo,
            parent_link,
            joint_of_link,
            s_cols,
            inertias,
            path_dofs,
            contacts,
            feet: model.foot_links(),
            torque_limits,
        })
    }

    /// Generalized velocity vector from a state (world base velocities are
    /// rotated into the body frame).
    pub fn velocity_from_state(&self, state: &SimState) -> DVector<f64> {
        let mut u = DVector::zeros(self.n_dof);
        let r_inv = state.base_orientation.inverse();
        let w = r_inv * state.base_ang_vel;
        let v = r_inv * state.base_lin_vel;
        for k in 0..3 {
            u[k] = w[k];
            u[3 + k] = v[k];
        }
        for i in 0..state.qd.len() {
            u[6 + i] = state.qd[i];
        }
        u
    }

    /// Writes a generalized velocity back into a state (world frame base
    /// velocities).
    pub fn velocity_into_state(&self, u: &DVector<f64>, state: &mut SimState) {
        let r = state.base_orientation;
        state.base_ang_vel = r * Vec3::new(u[0], u[1], u[2]);
        state.base_lin_vel = r * Vec3::new(u[3], u[4], u[5]);
        for i in 0..state.qd.len() {
            state.qd[i] = u[6 + i];
        }
    }

    /// Forward pass: world poses, relative poses and body-frame velocities.
    pub fn kinematics(&self, model: &BodyModel, state: &SimState, u: &DVector<f64>) -> KinCache {
        let mut link_pose = vec![Transform::identity(); self.n_links];
        let mut rel_pose = vec![Transform::identity(); self.n_links];
        let mut vel = vec![SpatialVec::zero(); self.n_links];

        let base_pose = crate::math::transform(state.base_orientation, state.base_position);
        link_pose[self.base] = base_pose;
        rel_pose[self.base] = base_pose;
        vel[self.base] = SpatialVec::new(Vec3::new(u[0], u[1], u[2]), Vec3::new(u[3], u[4], u[5]));

        for &ji in &self.topo {
            let joint = &model.joints[ji];
            let rot = expmap_to_quat(&state.joint_q(ji));
            let rel = joint.frame_in_parent
                * crate::math::transform(rot, Vec3::zeros())
                * joint.frame_in_child.inverse();
            let child = joint.child_link;
            rel_pose[child] = rel;
            link_pose[child] = link_pose[joint.parent_link] * rel;
            let mut v = motion_to_child(&rel, &vel[joint.parent_link]);
            for k in 0..3 {
                v = v.add(&self.s_cols[ji][k].scale(u[6 + 3 * ji + k]));
            }
            vel[child] = v;
        }

        KinCache {
            link_pose,
            rel_pose,
            vel,
        }
    }

    /// Generalized bias forces (Coriolis, centrifugal and gravity) with zero
    /// joint accelerations: `M du = tau - bias`.
    pub fn bias_forces(
        &self,
        model: &BodyModel,
        cache: &KinCache,
        u: &DVector<f64>,
        gravity_world: &Vec3,
    ) -> DVector<f64> {
        let mut acc = vec![SpatialVec::zero(); self.n_links];
        let base_r_inv = cache.link_pose[self.base].rotation.inverse();
        acc[self.base] = SpatialVec::new(Vec3::zeros(), base_r_inv * (-gravity_world));

        for &ji in &self.topo {
            let joint = &model.joints[ji];
            let child = joint.child_link;
            let mut v_joint = SpatialVec::zero();
            for k in 0..3 {
                v_joint = v_joint.add(&self.s_cols[ji][k].scale(u[6 + 3 * ji + k]));
            }
            let a = motion_to_child(&cache.rel_pose[child], &acc[joint.parent_link]);
            acc[child] = a.add(&motion_cross(&cache.vel[child], &v_joint));
        }

        let mut f: Vec<SpatialVec> = (0..self.n_links)
            .map(|l| {
                let ia = self.inertias[l].apply(&acc[l]);
                let iv = self.inertias[l].apply(&cache.vel[l]);
                ia.add(&force_cross(&cache.vel[l], &iv))
            })
            .collect();

        let mut bias = DVector::zeros(self.n_dof);
        for &ji in self.topo.iter().rev() {
            let joint = &model.joints[ji];
            let child = joint.child_link;
            for k in 0..3 {
                bias[6 + 3 * ji + k] = self.s_cols[ji][k].dot(&f[child]);
            }
            let to_parent = force_to_parent(&cache.rel_pose[child], &f[child]);
            f[joint.parent_link] = f[joint.parent_link].add(&to_parent);
        }
        let fb = f[self.base];
        for k in 0..3 {
            bias[k] = fb.ang[k];
            bias[3 + k] = fb.lin[k];
        }
        bias
    }

    /// Joint-space mass matrix by the composite-rigid-body algorithm.
    pub fn mass_matrix(&self, model: &BodyModel, cache: &KinCache) -> DMatrix<f64> {
        let mut composite = self.inertias.clone();
        for &ji in self.topo.iter().rev() {
            let joint = &model.joints[ji];
            let child = joint.child_link;
            let in_parent = composite[child].to_parent(&cache.rel_pose[child]);
            composite[joint.parent_link] = composite[joint.parent_link].add(&in_parent);
        }

        let mut m = DMatrix::zeros(self.n_dof, self.n_dof);

        // Base 6x6 block.
        let ib = &composite[self.base];
        let i_bar = ib.inertia_about_origin();
        let h = ib.mass * ib.com;
        let hx = skew(&h);
        for r in 0..3 {
            for c in 0..3 {
                m[(r, c)] = i_bar[(r, c)];
                m[(r, 3 + c)] = hx[(r, c)];
                m[(3 + r, c)] = hx[(c, r)];
                m[(3 + r, 3 + c)] = if r == c { ib.mass } else { 0.0 };
            }
        }

        for &ji in &self.topo {
            let child = model.joints[ji].child_link;
            let ic = &composite[child];
            // Force responses of the composite inertia to the joint's motion
            // subspace columns.
            let mut fcols: Vec<SpatialVec> =
                (0..3).map(|k| ic.apply(&self.s_cols[ji][k])).collect();
            for k in 0..3 {
                for k2 in 0..3 {
                    m[(6 + 3 * ji + k, 6 + 3 * ji + k2)] =
                        self.s_cols[ji][k2].dot(&fcols[k]);
                }
            }
            // Climb toward the base, coupling with every ancestor joint.
            let mut cur = child;
            loop {
                let rel = cache.rel_pose[cur];
                for fc in fcols.iter_mut() {
                    *fc = force_to_parent(&rel, fc);
                }
                let parent = match self.parent_link[cur] {
                    Some(p) => p,
                    None => break,
                };
                if parent == self.base {
                    for (k, fc) in fcols.iter().enumerate() {
                        for r in 0..3 {
                            m[(r, 6 + 3 * ji + k)] = fc.ang[r];
                            m[(6 + 3 * ji + k, r)] = fc.ang[r];
                            m[(3 + r, 6 + 3 * ji + k)] = fc.lin[r];
                            m[(6 + 3 * ji + k, 3 + r)] = fc.lin[r];
                        }
                    }
                    break;
                }
                let pj = self.joint_of_link[parent].expect("non-base link has a joint");
                for (k, fc) in fcols.iter().enumerate() {
                    for k2 in 0..3 {
                        let val = self.s_cols[pj][k2].dot(fc);
                        m[(6 + 3 * pj + k2, 6 + 3 * ji + k)] = val;
                        m[(6 + 3 * ji + k, 6 + 3 * pj + k2)] = val;
                    }
                }
                cur = parent;
            }
        }
        m
    }

    /// Total kinetic energy from per-link velocities (independent of the mass
    /// matrix assembly).
    pub fn kinetic_energy(&self, cache: &KinCache) -> f64 {
        (0..self.n_links)
            .map(|l| self.inertias[l].kinetic_energy(&cache.vel[l]))
            .sum()
    }

    /// Total linear and angular momentum about the world origin, world frame.
    pub fn momentum(&self, cache: &KinCache) -> SpatialVec {
        let mut total = SpatialVec::zero();
        for l in 0..self.n_links {
            let h_local = self.inertias[l].apply(&cache.vel[l]);
            total = total.add(&force_to_parent(&cache.link_pose[l], &h_local));
        }
        total
    }

    /// Gravitational potential energy.
    pub fn potential_energy(&self, cache: &KinCache, gravity_world: &Vec3) -> f64 {
        let mut e = 0.0;
        for l in 0..self.n_links {
            let com_world = cache.link_pose[l] * nalgebra::Point3::from(self.inertias[l].com);
            e -= self.inertias[l].mass * gravity_world.dot(&com_world.coords);
        }
        e
    }

    /// Integrates positions with the (already updated) velocities: base pose
    /// by world-frame increments, joints by right-multiplied exponential
    /// steps; the base quaternion is renormalized.
    pub fn integrate_positions(&self, state: &mut SimState, u: &DVector<f64>, dt: f64) {
        let r = state.base_orientation;
        let w_body = Vec3::new(u[0], u[1], u[2]);
        let v_body = Vec3::new(u[3], u[4], u[5]);
        let w_world = r * w_body;
        state.base_position += dt * (r * v_body);
        state.base_orientation = expmap_to_quat(&(dt * w_world)) * r;
        state
            .base_orientation
            .renormalize_fast();
        let joints = state.q.len() / 3;
        for j in 0..joints {
            let rot = expmap_to_quat(&state.joint_q(j));
            let delta = Vec3::new(u[6 + 3 * j], u[6 + 3 * j + 1], u[6 + 3 * j + 2]) * dt;
            let new_rot = rot * expmap_to_quat(&delta);
            state.set_joint_q(j, quat_to_expmap(&new_rot));
        }
        self.velocity_into_state(u, state);
    }
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stock_character;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_state(model: &BodyModel, seed: u64, vel_scale: f64) -> SimState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = SimState::zero(model);
        s.base_position = Vec3::new(rng.gen(), rng.gen::<f64>() + 1.0, rng.gen());
        s.base_orientation =
            expmap_to_quat(&Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        s.base_lin_vel = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * vel_scale;
        s.base_ang_vel = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * vel_scale;
        for i in 0..s.q.len() {
            s.q[i] = (rng.gen::<f64>() - 0.5) * 0.8;
            s.qd[i] = (rng.gen::<f64>() - 0.5) * vel_scale;
        }
        s
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let model = stock_character(70.0);
        let mech = Mechanism::new(&model).unwrap();
        let state = random_state(&model, 3, 1.0);
        let u = mech.velocity_from_state(&state);
        let cache = mech.kinematics(&model, &state, &u);
        let m = mech.mass_matrix(&model, &cache);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                assert_relative_eq!(m[(r, c)], m[(c, r)], epsilon = 1e-9);
            }
        }
        assert!(m.clone().cholesky().is_some(), "mass matrix not positive definite");
    }

    #[test]
    fn kinetic_energy_two_routes_agree() {
        // 0.5 u^T M u must equal the sum of per-link spatial kinetic
        // energies; this cross-checks CRBA against the velocity propagation.
        let model = stock_character(70.0);
        let mech = Mechanism::new(&model).unwrap();
        for seed in 0..5 {
            let state = random_state(&model, seed, 1.5);
            let u = mech.velocity_from_state(&state);
            let cache = mech.kinematics(&model, &state, &u);
            let m = mech.mass_matrix(&model, &cache);
            let quadratic = 0.5 * u.dot(&(&m * &u));
            let direct = mech.kinetic_energy(&cache);
            assert_relative_eq!(quadratic, direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn static_bias_is_pure_gravity() {
        // At rest the bias reduces to generalized gravity; the resulting free
        // acceleration is g for the base and the COM.
        let model = stock_character(70.0);
        let mech = Mechanism::new(&model).unwrap();
        let mut state = random_state(&model, 9, 0.0);
        state.base_lin_vel = Vec3::zeros();
        state.base_ang_vel = Vec3::zeros();
        for i in 0..state.qd.len() {
            state.qd[i] = 0.0;
        }
        let u = mech.velocity_from_state(&state);
        let cache = mech.kinematics(&model, &state, &u);
        let g = Vec3::new(0.0, -9.8, 0.0);
        let bias = mech.bias_forces(&model, &cache, &u, &g);
        let m = mech.mass_matrix(&model, &cache);
        let udot = m.cholesky().unwrap().solve(&(-bias));
        // Every link's spatial acceleration should be pure gravity: check the
        // base linear part (body frame) and zero angular/joint accelerations.
        let r_inv = state.base_orientation.inverse();
        let expected = r_inv * g;
        for k in 0..3 {
            assert_relative_eq!(udot[k], 0.0, epsilon = 1e-9);
            assert_relative_eq!(udot[3 + k], expected[k], epsilon = 1e-9);
        }
        for k in 6..udot.len() {
            assert_relative_eq!(udot[k], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn base_velocity_round_trip() {
        let model = stock_character(70.0);
        let mech = Mechanism::new(&model).unwrap();
        let state = random_state(&model, 21, 2.0);
        let u = mech.velocity_from_state(&state);
        let mut back = state.clone();
        mech.velocity_into_state(&u, &mut back);
        assert_relative_eq!(back.base_lin_vel, state.base_lin_vel, epsilon = 1e-12);
        assert_relative_eq!(back.base_ang_vel, state.base_ang_vel, epsilon = 1e-12);
    }

    #[test]
    fn stock_character_has_contact_candidates_on_feet() {
        let model = stock_character(70.0);
        let mech = Mechanism::new(&model).unwrap();
        let (l, r) = mech.feet.unwrap();
        assert_eq!(mech.contacts[l].len(), 8);
        assert_eq!(mech.contacts[r].len(), 8);
    }
}
