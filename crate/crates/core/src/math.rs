//! Small numeric helpers shared across modules: exponential-map rotations,
//! angle wrapping and the finite-difference stencils used by both the
//! objectives and the metrics (central in the interior, one-sided at the
//! ends).

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Transform = Isometry3<f64>;

/// Exponential map (rotation vector, axis * angle) to unit quaternion.
pub fn expmap_to_quat(v: &Vec3) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

/// Unit quaternion to exponential map on the principal branch (angle in [0, pi]).
pub fn quat_to_expmap(q: &UnitQuaternion<f64>) -> Vec3 {
    q.scaled_axis()
}

/// Wraps an angle difference into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = x % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Builds a rigid transform from a rotation and translation.
pub fn transform(rotation: UnitQuaternion<f64>, translation: Vec3) -> Transform {
    Isometry3::from_parts(Translation3::from(translation), rotation)
}

/// Identity transform.
pub fn identity() -> Transform {
    Isometry3::identity()
}

/// First derivative of a sampled vector series: central differences in the
/// interior, forward/backward at the ends. Returns one value per sample.
pub fn fd_velocity(series: &[Vec3], dt: f64) -> Vec<Vec3> {
    let n = series.len();
    assert!(n >= 2, "finite differences need at least two samples");
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let v = if t == 0 {
            (series[1] - series[0]) / dt
        } else if t == n - 1 {
            (series[n - 1] - series[n - 2]) / dt
        } else {
            (series[t + 1] - series[t - 1]) / (2.0 * dt)
        };
        out.push(v);
    }
    out
}

/// Second derivative of a sampled vector series: central second differences in
/// the interior, copied inward at the ends.
pub fn fd_acceleration(series: &[Vec3], dt: f64) -> Vec<Vec3> {
    let n = series.len();
    assert!(n >= 3, "second differences need at least three samples");
    let mut out = vec![Vec3::zeros(); n];
    for t in 1..n - 1 {
        out[t] = (series[t + 1] - 2.0 * series[t] + series[t - 1]) / (dt * dt);
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    out
}

/// Scalar variant of [`fd_velocity`].
pub fn fd_velocity_scalar(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    assert!(n >= 2);
    (0..n)
        .map(|t| {
            if t == 0 {
                (series[1] - series[0]) / dt
            } else if t == n - 1 {
                (series[n - 1] - series[n - 2]) / dt
            } else {
                (series[t + 1] - series[t - 1]) / (2.0 * dt)
            }
        })
        .collect()
}
