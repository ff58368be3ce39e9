//! Time series of simulated (or kinematic) states with derived quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::FkContext;
use crate::math::Vec3;
use crate::model::BodyModel;
use crate::state::SimState;

/// Recorded motion: states plus joint world positions, COM trajectory and
/// per-foot contact flags at each recorded frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MotionClip {
    /// Seconds between recorded frames.
    pub dt: f64,
    pub states: Vec<SimState>,
    /// Per frame: base origin followed by each joint center, world frame.
    pub joint_world_positions: Vec<Vec<Vec3>>,
    pub com_trajectory: Vec<Vec3>,
    /// Per frame `[left, right]` foot contact, as reported by the simulator
    /// (geometric re-detection is available separately).
    pub contact_flags: Vec<[bool; 2]>,
}

impl MotionClip {
    pub fn frame_count(&self) -> usize {
        self.states.len()
    }

    pub fn fps(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn duration(&self) -> f64 {
        if self.states.is_empty() {
            0.0
        } else {
            (self.states.len() - 1) as f64 * self.dt
        }
    }

    /// Builds a clip from bare states by running forward kinematics per frame
    /// (contact flags all false).
    pub fn from_states(model: &BodyModel, states: Vec<SimState>, dt: f64) -> Result<Self> {
        let fk = FkContext::new(model);
        let mut joints = Vec::with_capacity(states.len());
        let mut com = Vec::with_capacity(states.len());
        for s in &states {
            let res = fk.run(s)?;
            joints.push(res.joint_world_positions);
            com.push(res.com);
        }
        let n = states.len();
        Ok(MotionClip {
            dt,
            states,
            joint_world_positions: joints,
            com_trajectory: com,
            contact_flags: vec![[false, false]; n],
        })
    }

    /// Checks derived fields against forward kinematics of the states.
    pub fn validate(&self, model: &BodyModel) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Validation(format!("clip dt must be > 0, got {}", self.dt)));
        }
        let n = self.states.len();
        if self.joint_world_positions.len() != n
            || self.com_trajectory.len() != n
            || self.contact_flags.len() != n
        {
            return Err(Error::Validation(
                "clip derived arrays disagree with state count".into(),
            ));
        }
        let fk = FkContext::new(model);
        for (t, state) in self.states.iter().enumerate() {
            let res = fk.run(state)?;
            for (a, b) in res
                .joint_world_positions
                .iter()
                .zip(self.joint_world_positions[t].iter())
            {
                if (a - b).norm() > 1e-9 {
                    return Err(Error::Validation(format!(
                        "frame {t}: stored joint positions deviate from forward kinematics"
                    )));
                }
            }
            if (res.com - self.com_trajectory[t]).norm() > 1e-9 {
                return Err(Error::Validation(format!(
                    "frame {t}: stored COM deviates from mass-weighted link COM"
                )));
            }
        }
        Ok(())
    }
}
