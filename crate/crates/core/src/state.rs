//! Instantaneous state of the simulated character.

use nalgebra::{DVector, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::model::BodyModel;

/// Generalized coordinates and velocities at one instant.
///
/// `q` stacks one exponential-map 3-vector per spherical joint; `qd` stacks
/// the corresponding relative angular velocities, expressed in each joint's
/// child frame. Base velocities are world-frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub base_position: Vec3,
    pub base_orientation: UnitQuaternion<f64>,
    pub q: DVector<f64>,
    pub base_lin_vel: Vec3,
    pub base_ang_vel: Vec3,
    pub qd: DVector<f64>,
}

impl SimState {
    /// Zero pose at the origin for the given model.
    pub fn zero(model: &BodyModel) -> Self {
        let n = model.dof_count();
        SimState {
            base_position: Vec3::zeros(),
            base_orientation: UnitQuaternion::identity(),
            q: DVector::zeros(n),
            base_lin_vel: Vec3::zeros(),
            base_ang_vel: Vec3::zeros(),
            qd: DVector::zeros(n),
        }
    }

    /// Exponential-map coordinates of joint `j`.
    pub fn joint_q(&self, j: usize) -> Vec3 {
        Vec3::new(self.q[3 * j], self.q[3 * j + 1], self.q[3 * j + 2])
    }

    /// Angular velocity of joint `j` (child joint frame).
    pub fn joint_qd(&self, j: usize) -> Vec3 {
        Vec3::new(self.qd[3 * j], self.qd[3 * j + 1], self.qd[3 * j + 2])
    }

    pub fn set_joint_q(&mut self, j: usize, v: Vec3) {
        self.q[3 * j] = v.x;
        self.q[3 * j + 1] = v.y;
        self.q[3 * j + 2] = v.z;
    }

    pub fn set_joint_qd(&mut self, j: usize, v: Vec3) {
        self.qd[3 * j] = v.x;
        self.qd[3 * j + 1] = v.y;
        self.qd[3 * j + 2] = v.z;
    }

    pub fn is_finite(&self) -> bool {
        self.base_position.iter().all(|v| v.is_finite())
            && self.base_orientation.coords.iter().all(|v| v.is_finite())
            && self.base_lin_vel.iter().all(|v| v.is_finite())
            && self.base_ang_vel.iter().all(|v| v.is_finite())
            && self.q.iter().all(|v| v.is_finite())
            && self.qd.iter().all(|v| v.is_finite())
    }

    /// Validates dimensions against a model and the unit-quaternion invariant.
    pub fn validate(&self, model: &BodyModel) -> Result<()> {
        let n = model.dof_count();
        if self.q.len() != n {
            return Err(Error::Contract(format!(
                "state q has {} entries, model expects {}",
                self.q.len(),
                n
            )));
        }
        if self.qd.len() != n {
            return Err(Error::Contract(format!(
                "state qd has {} entries, model expects {}",
                self.qd.len(),
                n
            )));
        }
        let norm = self.base_orientation.coords.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "base_orientation norm {norm} deviates from 1 by more than 1e-9"
            )));
        }
        if !self.is_finite() {
            return Err(Error::Validation("state contains non-finite values".into()));
        }
        Ok(())
    }
}
