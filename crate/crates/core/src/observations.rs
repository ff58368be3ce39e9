//! Per-frame kinematic evidence: poses, 2D landmark detections and the camera
//! that relates them.

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::state::SimState;

/// 3x4 projection matrix mapping homogeneous world points to pixels via
/// perspective division.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub matrix: [[f64; 4]; 3],
}

impl Camera {
    /// Projects a world point. Returns `None` when the point is on or behind
    /// the camera plane (non-positive depth).
    pub fn project(&self, p: &Vec3) -> Option<[f64; 2]> {
        let hom = Vector4::new(p.x, p.y, p.z, 1.0);
        let m = &self.matrix;
        let row = |r: usize| m[r][0] * hom.x + m[r][1] * hom.y + m[r][2] * hom.z + m[r][3] * hom.w;
        let w = row(2);
        if w <= 1e-9 {
            return None;
        }
        Some([row(0) / w, row(1) / w])
    }

    /// A simple pinhole camera at `eye` looking toward `target` (Y up),
    /// focal length in pixels, principal point at `(cx, cy)`.
    pub fn look_at(eye: Vec3, target: Vec3, focal: f64, cx: f64, cy: f64) -> Camera {
        let forward = (target - eye).normalize();
        let right = forward.cross(&Vec3::y()).normalize();
        let up = right.cross(&forward);
        // Camera frame: x right, y down (image), z forward.
        let r = [right, -up, forward];
        let mut matrix = [[0.0; 4]; 3];
        let k = [[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for (l, rl) in r.iter().enumerate() {
                    acc += k[i][l] * rl[j];
                }
                matrix[i][j] = acc;
            }
            let mut t = 0.0;
            for (l, rl) in r.iter().enumerate() {
                t += k[i][l] * (-rl.dot(&eye));
            }
            matrix[i][3] = t;
        }
        Camera { matrix }
    }
}

/// One observed frame.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservationFrame {
    /// Kinematic pose estimate for this frame.
    pub kinematic_pose: SimState,
    /// Original kinematic pose, preserved when a refinement stage rewrites
    /// `kinematic_pose`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_kinematic_pose: Option<SimState>,
    /// Detected landmark pixels, one `[u, v]` per landmark.
    pub landmarks_2d: Vec<[f64; 2]>,
    /// Non-negative detector confidence per landmark.
    pub landmark_scores: Vec<f64>,
    /// Visibility mask; an invisible landmark contributes nothing regardless
    /// of score.
    pub landmark_visibility: Vec<bool>,
}

/// A sequence of observed frames sharing a camera and landmark set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub fps: f64,
    pub camera: Camera,
    pub landmark_ids: Vec<String>,
    pub frames: Vec<ObservationFrame>,
}

impl ObservationSequence {
    pub fn landmark_count(&self) -> usize {
        self.landmark_ids.len()
    }

    pub fn frame_dt(&self) -> f64 {
        1.0 / self.fps
    }

    pub fn duration(&self) -> f64 {
        if self.frames.is_empty() {
            0.0
        } else {
            (self.frames.len() - 1) as f64 / self.fps
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0) {
            return Err(Error::Validation(format!("fps must be > 0, got {}", self.fps)));
        }
        let n = self.landmark_count();
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.landmarks_2d.len() != n {
                return Err(Error::Validation(format!(
                    "frame {t}: landmarks_2d has {} entries, expected {n}",
                    frame.landmarks_2d.len()
                )));
            }
            if frame.landmark_scores.len() != n {
                return Err(Error::Validation(format!(
                    "frame {t}: landmark_scores has {} entries, expected {n}",
                    frame.landmark_scores.len()
                )));
            }
            if frame.landmark_visibility.len() != n {
                return Err(Error::Validation(format!(
                    "frame {t}: landmark_visibility has {} entries, expected {n}",
                    frame.landmark_visibility.len()
                )));
            }
            if let Some(bad) = frame.landmark_scores.iter().find(|s| **s < 0.0) {
                return Err(Error::Validation(format!(
                    "frame {t}: negative landmark score {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Sub-sequence covering frame indices `[start, end)` (shared camera and
    /// landmark set).
    pub fn slice(&self, start: usize, end: usize) -> ObservationSequence {
        ObservationSequence {
            fps: self.fps,
            camera: self.camera.clone(),
            landmark_ids: self.landmark_ids.clone(),
            frames: self.frames[start..end].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn project_center_point() {
        let cam = Camera::look_at(Vec3::new(0.0, 1.0, 4.0), Vec3::new(0.0, 1.0, 0.0), 1000.0, 500.0, 500.0);
        let px = cam.project(&Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(px[0], 500.0, epsilon = 1e-9);
        assert_relative_eq!(px[1], 500.0, epsilon = 1e-9);
    }

    #[test]
    fn behind_camera_returns_none() {
        let cam = Camera::look_at(Vec3::new(0.0, 1.0, 4.0), Vec3::new(0.0, 1.0, 0.0), 1000.0, 500.0, 500.0);
        assert!(cam.project(&Vec3::new(0.0, 1.0, 10.0)).is_none());
    }

    #[test]
    fn image_y_grows_downward() {
        let cam = Camera::look_at(Vec3::new(0.0, 1.0, 4.0), Vec3::new(0.0, 1.0, 0.0), 1000.0, 500.0, 500.0);
        let above = cam.project(&Vec3::new(0.0, 2.0, 0.0)).unwrap();
        assert!(above[1] < 500.0, "world-up should project above the center");
    }
}
