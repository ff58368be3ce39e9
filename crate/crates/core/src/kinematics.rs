//! Forward kinematics: world poses of every link, joint centers, landmark
//! positions and the whole-body center of mass.

use crate::error::Result;
use crate::math::{expmap_to_quat, Transform, Vec3};
use crate::model::{BodyModel, LinkMassProps};
use crate::state::SimState;

/// Result of one forward-kinematics evaluation.
#[derive(Clone, Debug)]
pub struct FkResult {
    /// World pose of each link frame.
    pub link_poses: Vec<Transform>,
    /// Base origin followed by each joint center, in model joint order.
    pub joint_world_positions: Vec<Vec3>,
    /// World positions of the model's landmark attachments.
    pub landmark_world_positions: Vec<Vec3>,
    /// Mass-weighted mean of link centers of mass.
    pub com: Vec3,
}

/// Precomputed traversal order and mass properties for repeated FK calls on
/// one model.
pub struct FkContext<'m> {
    pub model: &'m BodyModel,
    joint_order: Vec<usize>,
    link_props: Vec<LinkMassProps>,
    total_mass: f64,
}

impl<'m> FkContext<'m> {
    pub fn new(model: &'m BodyModel) -> Self {
        let joint_order = model
            .joint_topological_order()
            .expect("model must be a valid tree");
        let link_props = model.all_link_mass_props();
        let total_mass = link_props.iter().map(|p| p.mass).sum();
        FkContext {
            model,
            joint_order,
            link_props,
            total_mass,
        }
    }

    pub fn run(&self, state: &SimState) -> Result<FkResult> {
        state.validate(self.model)?;
        let model = self.model;
        let mut link_poses = vec![Transform::identity(); model.link_count()];
        link_poses[model.base_link] =
            crate::math::transform(state.base_orientation, state.base_position);

        let mut joint_world = Vec::with_capacity(model.joints.len() + 1);
        joint_world.push(state.base_position);
        let mut joint_positions = vec![Vec3::zeros(); model.joints.len()];
        for &ji in &self.joint_order {
            let joint = &model.joints[ji];
            let rot = expmap_to_quat(&state.joint_q(ji));
            let joint_in_world = link_poses[joint.parent_link] * joint.frame_in_parent;
            link_poses[joint.child_link] =
                joint_in_world * crate::math::transform(rot, Vec3::zeros()) * joint.frame_in_child.inverse();
            joint_positions[ji] = joint_in_world.translation.vector;
        }
        joint_world.extend(joint_positions);

        let landmarks = model
            .landmark_attachments
            .iter()
            .map(|lm| link_poses[lm.link] * nalgebra::Point3::from(lm.offset))
            .map(|p| p.coords)
            .collect();

        let mut com = Vec3::zeros();
        for (link, props) in self.link_props.iter().enumerate() {
            if props.mass > 0.0 {
                com += props.mass * (link_poses[link] * nalgebra::Point3::from(props.com)).coords;
            }
        }
        com /= self.total_mass;

        Ok(FkResult {
            link_poses,
            joint_world_positions: joint_world,
            landmark_world_positions: landmarks,
            com,
        })
    }
}

/// One-shot forward kinematics. For repeated evaluation on the same model,
/// build an [`FkContext`] once instead.
pub fn forward_kinematics(model: &BodyModel, state: &SimState) -> Result<FkResult> {
    FkContext::new(model).run(state)
}
