//! Composite objective comparing a simulated clip against kinematic
//! observations: COM tracking, per-joint orientation agreement, weighted 2D
//! re-projection, pose-prior energy, total-variation smoothness of joint
//! accelerations and an exponential joint-limit penalty.

use nalgebra::{DMatrix, DVector, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::clip::MotionClip;
use crate::error::{Error, Result};
use crate::kinematics::FkContext;
use crate::math::{expmap_to_quat, fd_acceleration, fd_velocity, Vec3};
use crate::model::BodyModel;
use crate::observations::ObservationSequence;
use crate::state::SimState;

/// Pixel penalty charged per landmark whose predicted position falls behind
/// the camera; keeps the loss finite but strongly repellent.
pub const BEHIND_CAMERA_PENALTY: f64 = 1e4;

/// Exponent scale of the joint-limit penalty, 1/rad.
pub const LIMIT_PENALTY_SCALE: f64 = 10.0;

/// Weights of the combined objective. Defaults are the published values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveWeights {
    pub w_com: f64,
    pub w_pose: f64,
    pub w_2d: f64,
    pub w_nf: f64,
    pub w_tv: f64,
    pub w_lim: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            w_com: 15.0,
            w_pose: 0.5,
            w_2d: 4.0,
            w_nf: 1.0,
            w_tv: 1.0,
            w_lim: 1.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_com", self.w_com),
            ("w_pose", self.w_pose),
            ("w_2d", self.w_2d),
            ("w_nf", self.w_nf),
            ("w_tv", self.w_tv),
            ("w_lim", self.w_lim),
        ] {
            if v < 0.0 {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Pose prior: implementations score how (un)natural an actuated-joint pose
/// vector is. Energies are non-negative and minimal at the prior's mode.
pub trait PosePrior: Send + Sync {
    /// Energy of one pose (actuated joint coordinates only).
    fn latent_energy(&self, q: &DVector<f64>) -> Result<f64>;
}

/// Default prior: `||W (q - q_rest)||_2` with a diagonal weight vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadraticPrior {
    pub rest_pose: DVector<f64>,
    pub weights: DVector<f64>,
}

impl QuadraticPrior {
    pub fn isotropic(rest_pose: DVector<f64>) -> Self {
        let n = rest_pose.len();
        QuadraticPrior {
            rest_pose,
            weights: DVector::from_element(n, 1.0),
        }
    }
}

impl PosePrior for QuadraticPrior {
    fn latent_energy(&self, q: &DVector<f64>) -> Result<f64> {
        if q.len() != self.rest_pose.len() {
            return Err(Error::Contract(format!(
                "prior expects {} DOF, pose has {}",
                self.rest_pose.len(),
                q.len()
            )));
        }
        let mut acc = 0.0;
        for i in 0..q.len() {
            let z = self.weights[i] * (q[i] - self.rest_pose[i]);
            acc += z * z;
        }
        Ok(acc.sqrt())
    }
}

/// Prior backed by a precomputed affine latent map `z = A (q - b)`; the
/// energy is `||z||_2`. Supports loading an exported linear normalizing-flow
/// layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearFlowPrior {
    pub matrix: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl PosePrior for LinearFlowPrior {
    fn latent_energy(&self, q: &DVector<f64>) -> Result<f64> {
        if q.len() != self.bias.len() {
            return Err(Error::Contract(format!(
                "prior expects {} DOF, pose has {}",
                self.bias.len(),
                q.len()
            )));
        }
        Ok((&self.matrix * (q - &self.bias)).norm())
    }
}

/// COM tracking loss: squared position and finite-difference velocity error
/// summed over frames. Velocities use central differences in the interior
/// and one-sided stencils at the ends, at the observation frame rate.
pub fn loss_com(
    com: &[Vec3],
    com_ref: &[Vec3],
    com_ref_vel: &[Vec3],
    fps: f64,
) -> Result<f64> {
    if com.len() != com_ref.len() || com.len() != com_ref_vel.len() {
        return Err(Error::Contract(format!(
            "COM loss frame counts disagree: {} vs {} vs {}",
            com.len(),
            com_ref.len(),
            com_ref_vel.len()
        )));
    }
    if com.len() < 2 {
        return Err(Error::Contract("COM loss needs at least 2 frames".into()));
    }
    let vel = fd_velocity(com, 1.0 / fps);
    let mut acc = 0.0;
    for t in 0..com.len() {
        acc += (com[t] - com_ref[t]).norm_squared();
        acc += (vel[t] - com_ref_vel[t]).norm_squared();
    }
    Ok(acc)
}

/// Quaternion geodesic pose loss over all joints including the base
/// orientation: `sum arccos(|<q, q_ref>|)` with the inner product clamped
/// into [0, 1].
pub fn loss_pose(states: &[SimState], reference: &[SimState]) -> Result<f64> {
    if states.len() != reference.len() {
        return Err(Error::Contract(format!(
            "pose loss frame counts disagree: {} vs {}",
            states.len(),
            reference.len()
        )));
    }
    let mut acc = 0.0;
    for (s, r) in states.iter().zip(reference) {
        if s.q.len() != r.q.len() {
            return Err(Error::Contract("pose loss DOF counts disagree".into()));
        }
        acc += quat_angle(&s.base_orientation, &r.base_orientation);
        let joints = s.q.len() / 3;
        for j in 0..joints {
            let a = expmap_to_quat(&s.joint_q(j));
            let b = expmap_to_quat(&r.joint_q(j));
            acc += quat_angle(&a, &b);
        }
    }
    Ok(acc)
}

// arccos(|<a, b>|) evaluated in the numerically stable chord form
// 2 asin(d/2) with d = min(|a - b|, |a + b|); identical or antipodal
// quaternions give exactly zero.
fn quat_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let d_minus = (a.coords - b.coords).norm();
    let d_plus = (a.coords + b.coords).norm();
    let d = d_minus.min(d_plus);
    2.0 * ((d / 2.0).clamp(0.0, 1.0)).asin()
}

/// Score-weighted 2D re-projection loss. `landmarks[t][n]` are world-space
/// landmark positions; detections and scores come from the observations.
/// A landmark behind the camera contributes a fixed penalty instead of a
/// projection.
pub fn loss_2d(landmarks: &[Vec<Vec3>], obs: &ObservationSequence) -> Result<f64> {
    if landmarks.len() != obs.frames.len() {
        return Err(Error::Contract(format!(
            "2d loss frame counts disagree: {} vs {}",
            landmarks.len(),
            obs.frames.len()
        )));
    }
    let n = obs.landmark_count();
    let mut acc = 0.0;
    for (points, frame) in landmarks.iter().zip(&obs.frames) {
        if points.len() != n {
            return Err(Error::Contract(format!(
                "2d loss landmark counts disagree: {} vs {n}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            let weight = if frame.landmark_visibility[i] {
                frame.landmark_scores[i]
            } else {
                0.0
            };
            if weight == 0.0 {
                continue;
            }
            match obs.camera.project(p) {
                Some(px) => {
                    let d = frame.landmarks_2d[i];
                    acc += weight * ((px[0] - d[0]).powi(2) + (px[1] - d[1]).powi(2)).sqrt();
                }
                None => acc += weight * BEHIND_CAMERA_PENALTY,
            }
        }
    }
    Ok(acc)
}

/// Total-variation loss on joint world accelerations: mean over joints of the
/// summed L1 difference of consecutive finite-difference accelerations.
pub fn loss_tv(joint_positions: &[Vec<Vec3>], fps: f64) -> Result<f64> {
    if joint_positions.len() < 4 {
        return Err(Error::Contract(format!(
            "TV loss needs at least 4 frames, got {}",
            joint_positions.len()
        )));
    }
    let frames = joint_positions.len();
    let joints = joint_positions[0].len();
    let dt = 1.0 / fps;
    let mut acc = 0.0;
    for j in 0..joints {
        let series: Vec<Vec3> = (0..frames).map(|t| joint_positions[t][j]).collect();
        let accel = fd_acceleration(&series, dt);
        for t in 1..frames {
            let d = accel[t] - accel[t - 1];
            acc += d.x.abs() + d.y.abs() + d.z.abs();
        }
    }
    Ok(acc / joints as f64)
}

/// Exponential penalty on joint-limit violations: `exp(k v) - 1` per axis for
/// violation `v > 0`, zero inside the limits (continuous at the boundary).
pub fn loss_limits(states: &[SimState], model: &BodyModel) -> Result<f64> {
    let mut acc = 0.0;
    for s in states {
        if s.q.len() != model.dof_count() {
            return Err(Error::Contract("limit loss DOF count mismatch".into()));
        }
        for (j, joint) in model.joints.iter().enumerate() {
            for axis in 0..3 {
                let angle = s.q[3 * j + axis];
                let (lo, hi) = joint.limits[axis];
                let violation = (angle - hi).max(lo - angle).max(0.0);
                if violation > 0.0 {
                    acc += (LIMIT_PENALTY_SCALE * violation).exp() - 1.0;
                }
            }
        }
    }
    Ok(acc)
}

/// Summed prior energy over frames (actuated coordinates only).
pub fn prior_energy(states: &[SimState], prior: &dyn PosePrior) -> Result<f64> {
    let mut acc = 0.0;
    for s in states {
        acc += prior.latent_energy(&s.q)?;
    }
    Ok(acc)
}

/// Per-term values (unweighted), the applied weights and the weighted total.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub com: f64,
    pub pose: f64,
    pub reprojection: f64,
    pub prior: f64,
    pub tv: f64,
    pub limits: f64,
    pub weights: ObjectiveWeights,
    pub total: f64,
}

impl LossBreakdown {
    /// Weighted sum of the stored terms; equals `total` up to rounding.
    pub fn weighted_sum(&self) -> f64 {
        let w = &self.weights;
        w.w_com * self.com
            + w.w_pose * self.pose
            + w.w_2d * self.reprojection
            + w.w_nf * self.prior
            + w.w_tv * self.tv
            + w.w_lim * self.limits
    }
}

/// Precomputed observation-side quantities shared across many loss
/// evaluations of the same window.
pub struct ObjectiveContext<'m> {
    pub model: &'m BodyModel,
    pub obs: ObservationSequence,
    pub weights: ObjectiveWeights,
    pub prior: Box<dyn PosePrior>,
    fk: FkContext<'m>,
    com_ref: Vec<Vec3>,
    com_ref_vel: Vec<Vec3>,
    kin_states: Vec<SimState>,
}

impl<'m> ObjectiveContext<'m> {
    pub fn new(
        model: &'m BodyModel,
        obs: ObservationSequence,
        weights: ObjectiveWeights,
        prior: Box<dyn PosePrior>,
    ) -> Result<Self> {
        weights.validate()?;
        obs.validate()?;
        let fk = FkContext::new(model);
        let (com_ref, com_ref_vel) = observed_com_trajectory(&fk, &obs)?;
        let kin_states: Vec<SimState> =
            obs.frames.iter().map(|f| f.kinematic_pose.clone()).collect();
        Ok(ObjectiveContext {
            model,
            obs,
            weights,
            prior,
            fk,
            com_ref,
            com_ref_vel,
            kin_states,
        })
    }

    /// Evaluates the full objective for a clip recorded at the observation
    /// frame rate.
    pub fn total_loss(&self, clip: &MotionClip) -> Result<LossBreakdown> {
        if clip.frame_count() != self.obs.frames.len() {
            return Err(Error::Contract(format!(
                "clip has {} frames, observations {}",
                clip.frame_count(),
                self.obs.frames.len()
            )));
        }
        let fps = self.obs.fps;
        let com = loss_com(&clip.com_trajectory, &self.com_ref, &self.com_ref_vel, fps)?;
        let pose = loss_pose(&clip.states, &self.kin_states)?;
        let mut landmarks = Vec::with_capacity(clip.states.len());
        for s in &clip.states {
            landmarks.push(self.fk.run(s)?.landmark_world_positions);
        }
        let reprojection = loss_2d(&landmarks, &self.obs)?;
        let tv = loss_tv(&clip.joint_world_positions, fps)?;
        let limits = loss_limits(&clip.states, self.model)?;
        let prior = prior_energy(&clip.states, self.prior.as_ref())?;

        let mut breakdown = LossBreakdown {
            com,
            pose,
            reprojection,
            prior,
            tv,
            limits,
            weights: self.weights,
            total: 0.0,
        };
        breakdown.total = breakdown.weighted_sum();
        Ok(breakdown)
    }
}

/// COM positions and finite-difference velocities of the observed kinematic
/// poses.
pub fn observed_com_trajectory(
    fk: &FkContext,
    obs: &ObservationSequence,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let mut com = Vec::with_capacity(obs.frames.len());
    for f in &obs.frames {
        com.push(fk.run(&f.kinematic_pose)?.com);
    }
    let vel = if com.len() >= 2 {
        fd_velocity(&com, 1.0 / obs.fps)
    } else {
        vec![Vec3::zeros(); com.len()]
    };
    Ok((com, vel))
}
