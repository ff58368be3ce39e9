//! Forward simulation of the torque-controlled character: reduced-coordinate
//! articulated dynamics, PD joint control, and impulse-based ground contact.

pub mod contact;
pub mod mech;
pub mod scene;
pub mod spatial;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::clip::MotionClip;
use crate::error::{Error, Result};
use crate::kinematics::FkContext;
use crate::math::{wrap_angle, Vec3};
use crate::model::BodyModel;
use crate::plane::GroundPlane;
use crate::spline::ControlTrajectory;
use crate::state::SimState;
use contact::{detect_contacts, solve_contacts, ContactParams, ContactSolveInfo};
use mech::Mechanism;
pub use scene::{Scene, StaticBox};

/// Geometric foot-contact threshold for kinematic clips, meters.
pub const CONTACT_DISTANCE_KINEMATIC: f64 = 0.005;
/// Geometric foot-contact threshold for simulated clips, meters (negative:
/// requires penetration, absorbing primitive-approximation error).
pub const CONTACT_DISTANCE_DYNAMIC: f64 = -0.015;
/// Minimum number of foot surface points within the threshold for a contact.
pub const CONTACT_MIN_VERTICES: usize = 10;
/// Surface samples per foot used by geometric contact detection.
pub const FOOT_SURFACE_SAMPLES: usize = 120;

/// Simulation parameters. Defaults are the published constants: 200 Hz,
/// gravity 9.8 along canonical -Y, friction 0.9, PD gains (4.0, 0.3).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Integration step, seconds.
    pub dt: f64,
    /// Gravity magnitude; the direction is the scene's canonical -Y.
    pub gravity: f64,
    /// Friction coefficient used for static geometry without its own value.
    pub friction: f64,
    /// PD position gain.
    pub kp: f64,
    /// PD velocity gain (integrated implicitly for stability).
    pub kd: f64,
    pub contact_solver_iterations: usize,
    /// Contact penetration tolerance, meters.
    pub contact_slop: f64,
    /// Frame rate at which `simulate` records states.
    pub record_fps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / 200.0,
            gravity: 9.8,
            friction: 0.9,
            kp: 4.0,
            kd: 0.3,
            contact_solver_iterations: 20,
            contact_slop: 0.002,
            record_fps: 25.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Validation(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.friction < 0.0 || self.kp < 0.0 || self.kd < 0.0 {
            return Err(Error::Validation(
                "friction and PD gains must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Desired joint angles (exponential map per joint) fed to the PD controller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTarget {
    pub q: DVector<f64>,
}

impl ControlTarget {
    pub fn new(q: DVector<f64>) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite control target".into()));
        }
        Ok(ControlTarget { q })
    }
}

/// PD control law: per-axis `clamp(kp * wrap(target - q) - kd * qd)` at the
/// joint torque limits. `wrap` maps differences into (-pi, pi].
pub fn compute_torques(
    state: &SimState,
    target: &ControlTarget,
    cfg: &SimConfig,
    torque_limits: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = state.q.len();
    if target.q.len() != n || torque_limits.len() != n {
        return Err(Error::Contract(format!(
            "torque computation dimension mismatch: q {n}, target {}, limits {}",
            target.q.len(),
            torque_limits.len()
        )));
    }
    let mut tau = DVector::zeros(n);
    for i in 0..n {
        let err = wrap_angle(target.q[i] - state.q[i]);
        let raw = cfg.kp * err - cfg.kd * state.qd[i];
        tau[i] = raw.clamp(-torque_limits[i], torque_limits[i]);
    }
    Ok(tau)
}

/// Per-step diagnostics.
#[derive(Clone, Debug, Default)]
pub struct StepInfo {
    pub contact: ContactSolveInfo,
    /// Left/right foot touching (positive normal impulse this step).
    pub foot_contact: [bool; 2],
}

/// Simulation engine bound to one model and scene.
pub struct Engine<'m> {
    pub model: &'m BodyModel,
    pub mech: Mechanism,
    pub cfg: SimConfig,
    pub scene: Scene,
    /// Pin the base in place (test rigs such as pendulums).
    pub fixed_base: bool,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m BodyModel, cfg: SimConfig, scene: Scene) -> Result<Self> {
        cfg.validate()?;
        if let Some(plane) = &scene.plane {
            plane.validate()?;
        }
        Ok(Engine {
            model,
            mech: Mechanism::new(model)?,
            cfg,
            scene,
            fixed_base: false,
        })
    }

    pub fn with_fixed_base(mut self) -> Self {
        self.fixed_base = true;
        self
    }

    fn gravity_world(&self) -> Vec3 {
        -self.cfg.gravity * self.scene.up()
    }

    /// Advances one time step. Stiffness torques are applied explicitly
    /// (clamped at the limits); the velocity-gain term is integrated
    /// implicitly by augmenting the mass matrix, which keeps high gains
    /// stable at 200 Hz for small links.
    pub fn step(&self, state: &SimState, target: Option<&ControlTarget>) -> Result<(SimState, StepInfo)> {
        state.validate(self.model)?;
        let mech = &self.mech;
        let dt = self.cfg.dt;
        let mut u = mech.velocity_from_state(state);
        if self.fixed_base {
            for k in 0..6 {
                u[k] = 0.0;
            }
        }
        let cache = mech.kinematics(self.model, state, &u);
        let gravity = self.gravity_world();
        let bias = mech.bias_forces(self.model, &cache, &u, &gravity);

        let n_act = state.q.len();
        let mut tau = DVector::zeros(mech.n_dof);
        let mut kd_active = false;
        if let Some(target) = target {
            if target.q.len() != n_act {
                return Err(Error::Contract(format!(
                    "control target has {} DOF, model {}",
                    target.q.len(),
                    n_act
                )));
            }
            kd_active = self.cfg.kd > 0.0;
            for i in 0..n_act {
                let err = wrap_angle(target.q[i] - state.q[i]);
                let stiff = self.cfg.kp * err;
                let lim = mech.torque_limits[i];
                tau[6 + i] = stiff.clamp(-lim, lim);
            }
        }

        let mut m = mech.mass_matrix(self.model, &cache);
        let mut rhs = &m * &u + dt * (&tau - &bias);
        if kd_active {
            // Implicit velocity-gain term: (M + dt Kd) u_next = M u + dt tau'.
            for i in 0..n_act {
                m[(6 + i, 6 + i)] += dt * self.cfg.kd;
            }
        }
        if self.fixed_base {
            // Pin base rows: unit diagonal, zero coupling, zero rhs.
            for k in 0..6 {
                for c in 0..mech.n_dof {
                    m[(k, c)] = 0.0;
                    m[(c, k)] = 0.0;
                }
                m[(k, k)] = 1.0;
            }
        }
        if self.fixed_base {
            for k in 0..6 {
                rhs[k] = 0.0;
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::SimulationDiverged { step: 0, time: 0.0 })?;
        let mut u_new = chol.solve(&rhs);

        // Contacts on the updated velocity. Detection uses the pre-step
        // velocities for the speculative margin.
        let margin = self.cfg.contact_slop;
        let mut contacts = detect_contacts(
            mech,
            &cache,
            self.scene.plane.as_ref(),
            &self.scene.boxes,
            margin,
            dt,
        );
        let compliant = self
            .scene
            .plane
            .as_ref()
            .and_then(|p| p.stiffness.map(|k| (k, p.damping)));
        let params = ContactParams {
            iterations: self.cfg.contact_solver_iterations,
            slop: self.cfg.contact_slop,
            dt,
            compliant,
            fixed_base: self.fixed_base,
        };
        let contact_info = solve_contacts(
            mech,
            self.model,
            &cache,
            &chol,
            &mut u_new,
            &mut contacts,
            &params,
        );

        if self.fixed_base {
            for k in 0..6 {
                u_new[k] = 0.0;
            }
        }

        let mut next = state.clone();
        mech.integrate_positions(&mut next, &u_new, dt);
        if !next.is_finite() {
            return Err(Error::SimulationDiverged { step: 0, time: 0.0 });
        }

        let mut foot_contact = [false; 2];
        if let Some((l, r)) = mech.feet {
            foot_contact = [
                contact_info.link_normal_impulse[l] > 0.0,
                contact_info.link_normal_impulse[r] > 0.0,
            ];
        }
        Ok((
            next,
            StepInfo {
                contact: contact_info,
                foot_contact,
            },
        ))
    }

    /// Rolls out `duration` seconds from `s0`, sampling control targets from
    /// the spline and recording frames at `cfg.record_fps`. The step rate
    /// must be an integer multiple of the record rate.
    pub fn simulate(
        &self,
        s0: &SimState,
        controls: Option<&ControlTrajectory>,
        duration: f64,
    ) -> Result<MotionClip> {
        if !(duration > 0.0) {
            return Err(Error::Contract(format!("duration must be > 0, got {duration}")));
        }
        if let Some(c) = controls {
            c.validate()?;
            if c.duration + 1e-9 < duration {
                return Err(Error::Contract(format!(
                    "controls span {} s, rollout needs {duration} s",
                    c.duration
                )));
            }
        }
        let dt = self.cfg.dt;
        let ratio = 1.0 / (self.cfg.record_fps * dt);
        let steps_per_frame = ratio.round() as usize;
        if steps_per_frame == 0 || (ratio - steps_per_frame as f64).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "record fps {} is not an integer divisor of the step rate {}",
                self.cfg.record_fps,
                1.0 / dt
            )));
        }
        let total_steps = (duration / dt).round() as usize;

        let fk = FkContext::new(self.model);
        let mut states = Vec::new();
        let mut joints = Vec::new();
        let mut com = Vec::new();
        let mut flags = Vec::new();

        let mut record = |state: &SimState, contact: [bool; 2]| -> Result<()> {
            let res = fk.run(state)?;
            states.push(state.clone());
            joints.push(res.joint_world_positions);
            com.push(res.com);
            flags.push(contact);
            Ok(())
        };

        // Initial frame: proximity-based contact flags.
        let u0 = self.mech.velocity_from_state(s0);
        let cache0 = self.mech.kinematics(self.model, s0, &u0);
        let mut init_flags = [false; 2];
        if let (Some(plane), Some((l, r))) = (self.scene.plane.as_ref(), self.mech.feet) {
            for (slot, link) in [(0usize, l), (1usize, r)] {
                init_flags[slot] = self.mech.contacts[link].iter().any(|cand| {
                    let p = (cache0.link_pose[link] * nalgebra::Point3::from(cand.local)).coords;
                    plane.signed_distance(&p) - cand.radius <= self.cfg.contact_slop
                });
            }
        }
        record(s0, init_flags)?;

        let mut state = s0.clone();
        for step_idx in 0..total_steps {
            let t = step_idx as f64 * dt;
            let target = match controls {
                Some(c) => {
                    let q = c.evaluate(t.min(c.duration))?;
                    Some(ControlTarget { q })
                }
                None => None,
            };
            let (next, info) = self.step(&state, target.as_ref()).map_err(|e| match e {
                Error::SimulationDiverged { .. } => Error::SimulationDiverged {
                    step: step_idx,
                    time: t,
                },
                other => other,
            })?;
            state = next;
            if (step_idx + 1) % steps_per_frame == 0 {
                record(&state, info.foot_contact)?;
            }
        }

        Ok(MotionClip {
            dt: 1.0 / self.cfg.record_fps,
            states,
            joint_world_positions: joints,
            com_trajectory: com,
            contact_flags: flags,
        })
    }
}

/// Geometric foot-contact detection: a foot is in contact at a frame when at
/// least `min_vertices` of its sampled surface points have signed plane
/// distance at most `threshold`.
pub fn detect_foot_contacts(
    clip: &MotionClip,
    model: &BodyModel,
    plane: &GroundPlane,
    threshold: f64,
    min_vertices: usize,
) -> Result<Vec<[bool; 2]>> {
    let (left, right) = model
        .foot_links()
        .ok_or_else(|| Error::Contract("model has no foot_l/foot_r links".into()))?;
    let fk = FkContext::new(model);

    let foot_samples = |link: usize| -> Vec<Vec3> {
        let mut pts = Vec::new();
        let prims: Vec<_> = model.primitives.iter().filter(|p| p.link == link).collect();
        if prims.is_empty() {
            return pts;
        }
        let per = FOOT_SURFACE_SAMPLES.div_ceil(prims.len());
        for prim in prims {
            for s in prim.shape.surface_samples(per) {
                pts.push((prim.local_transform * nalgebra::Point3::from(s)).coords);
            }
        }
        pts
    };
    let samples = [foot_samples(left), foot_samples(right)];

    let mut out = Vec::with_capacity(clip.states.len());
    for state in &clip.states {
        let res = fk.run(state)?;
        let mut flags = [false; 2];
        for (slot, link) in [(0usize, left), (1usize, right)] {
            let pose = res.link_poses[link];
            let count = samples[slot]
                .iter()
                .filter(|p| plane.signed_distance(&(pose * nalgebra::Point3::from(**p)).coords) <= threshold)
                .count();
            flags[slot] = count >= min_vertices;
        }
        out.push(flags);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
