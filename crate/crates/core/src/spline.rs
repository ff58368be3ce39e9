//! Clamped uniform cubic B-spline control trajectories: the decision
//! variables of trajectory optimization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default knot spacing in seconds (5 basis functions per second).
pub const DEFAULT_KNOT_INTERVAL: f64 = 0.2;

const DEGREE: usize = 3;

/// Cubic B-spline trajectory of per-joint control targets.
///
/// The knot vector is clamped (end knots with multiplicity 4) with interior
/// knots every `knot_interval` seconds; the last span absorbs any remainder
/// so the domain is exactly `[0, duration]`. For `s = floor(duration /
/// knot_interval)` spans there are `s + 3` basis functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTrajectory {
    pub knot_interval: f64,
    pub duration: f64,
    /// `num_basis x dof_count` coefficient matrix, radians.
    pub coefficients: DMatrix<f64>,
}

/// Number of spans/basis functions for a domain length and knot interval.
pub fn num_basis(duration: f64, knot_interval: f64) -> usize {
    let spans = (duration / knot_interval + 1e-9).floor() as usize;
    spans + DEGREE
}

impl ControlTrajectory {
    /// Constant trajectory holding one target vector over the whole duration.
    pub fn constant(target: &DVector<f64>, duration: f64, knot_interval: f64) -> Result<Self> {
        if !(duration >= knot_interval) {
            return Err(Error::Contract(format!(
                "duration {duration} must be at least one knot interval {knot_interval}"
            )));
        }
        let nb = num_basis(duration, knot_interval);
        let mut coefficients = DMatrix::zeros(nb, target.len());
        for b in 0..nb {
            for d in 0..target.len() {
                coefficients[(b, d)] = target[d];
            }
        }
        Ok(ControlTrajectory {
            knot_interval,
            duration,
            coefficients,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn num_basis(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.knot_interval > 0.0) || !(self.duration >= self.knot_interval) {
            return Err(Error::Validation(format!(
                "invalid spline domain: duration {} knot_interval {}",
                self.duration, self.knot_interval
            )));
        }
        let expected = num_basis(self.duration, self.knot_interval);
        if self.coefficients.nrows() != expected {
            return Err(Error::Validation(format!(
                "coefficient rows {} do not match num_basis {expected}",
                self.coefficients.nrows()
            )));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite spline coefficient".into()));
        }
        Ok(())
    }

    /// Full clamped knot vector (length `num_basis + 4`).
    fn knots(&self) -> Vec<f64> {
        knots_for(self.duration, self.knot_interval, self.num_basis())
    }

    /// Evaluates the trajectory at `t in [0, duration]`.
    pub fn evaluate(&self, t: f64) -> Result<DVector<f64>> {
        if !(0.0..=self.duration + 1e-12).contains(&t) {
            return Err(Error::Contract(format!(
                "t = {t} outside spline domain [0, {}]",
                self.duration
            )));
        }
        let t = t.min(self.duration);
        let knots = self.knots();
        let (span, basis) = basis_values(&knots, t);
        let mut out = DVector::zeros(self.dof_count());
        for (i, &b) in basis.iter().enumerate() {
            let row = span - DEGREE + i;
            for d in 0..self.dof_count() {
                out[d] += b * self.coefficients[(row, d)];
            }
        }
        Ok(out)
    }

    /// Row-major flattening (basis index major, DOF minor). Exact inverse of
    /// [`ControlTrajectory::unflatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_basis() * self.dof_count());
        for b in 0..self.num_basis() {
            for d in 0..self.dof_count() {
                out.push(self.coefficients[(b, d)]);
            }
        }
        out
    }

    /// Rebuilds a trajectory from a flat parameter vector.
    pub fn unflatten(
        flat: &[f64],
        duration: f64,
        knot_interval: f64,
        dof_count: usize,
    ) -> Result<Self> {
        let nb = num_basis(duration, knot_interval);
        if flat.len() != nb * dof_count {
            return Err(Error::Contract(format!(
                "flat vector has {} entries, expected {} ({} basis x {} dof)",
                flat.len(),
                nb * dof_count,
                nb,
                dof_count
            )));
        }
        let coefficients = DMatrix::from_fn(nb, dof_count, |b, d| flat[b * dof_count + d]);
        Ok(ControlTrajectory {
            knot_interval,
            duration,
            coefficients,
        })
    }

    /// Replaces the coefficients with ones from a flat vector of matching
    /// shape.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        Self::unflatten(flat, self.duration, self.knot_interval, self.dof_count())
    }
}

fn knots_for(duration: f64, knot_interval: f64, nb: usize) -> Vec<f64> {
    let spans = nb - DEGREE;
    let mut knots = Vec::with_capacity(nb + DEGREE + 1);
    for _ in 0..=DEGREE {
        knots.push(0.0);
    }
    for i in 1..spans {
        knots.push(i as f64 * knot_interval);
    }
    for _ in 0..=DEGREE {
        knots.push(duration);
    }
    knots
}

/// Nonzero cubic basis functions at `t`: returns the knot span index and the
/// four basis values `N_{span-3..span}` (Cox-de Boor recurrence).
fn basis_values(knots: &[f64], t: f64) -> (usize, [f64; 4]) {
    let n = knots.len() - DEGREE - 1; // number of basis functions
    // Find span: largest i with knots[i] <= t < knots[i+1], clamped into
    // [DEGREE, n-1].
    let mut span = match knots[DEGREE..=n].binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
        Ok(i) => i + DEGREE,
        Err(i) => i + DEGREE - 1,
    };
    span = span.clamp(DEGREE, n - 1);

    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    let mut basis = [0.0; DEGREE + 1];
    basis[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom.abs() > 0.0 { basis[r] / denom } else { 0.0 };
            basis[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        basis[j] = saved;
    }
    (span, [basis[0], basis[1], basis[2], basis[3]])
}

/// Least-squares fit result.
#[derive(Clone, Debug)]
pub struct SplineFit {
    pub trajectory: ControlTrajectory,
    /// Root-mean-square residual over all samples and DOFs, radians.
    pub rms: f64,
}

/// Fits spline coefficients to per-frame joint-angle samples by linear least
/// squares. `samples[t]` is the full DOF vector at frame `t`; frames are
/// spaced `1/fps` seconds apart.
pub fn fit_to_samples(samples: &[DVector<f64>], fps: f64, knot_interval: f64) -> Result<SplineFit> {
    if samples.len() < 4 {
        return Err(Error::Contract(format!(
            "spline fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let dof = samples[0].len();
    if samples.iter().any(|s| s.len() != dof) {
        return Err(Error::Contract("inconsistent sample dimensions".into()));
    }
    let duration = (samples.len() - 1) as f64 / fps;
    if duration < knot_interval {
        return Err(Error::Contract(format!(
            "sample span {duration} s shorter than one knot interval {knot_interval} s"
        )));
    }
    let nb = num_basis(duration, knot_interval);
    let knots = knots_for(duration, knot_interval, nb);

    let mut design = DMatrix::zeros(samples.len(), nb);
    for (row, _) in samples.iter().enumerate() {
        let t = (row as f64 / fps).min(duration);
        let (span, basis) = basis_values(&knots, t);
        for (i, &b) in basis.iter().enumerate() {
            design[(row, span - DEGREE + i)] = b;
        }
    }

    let mut targets = DMatrix::zeros(samples.len(), dof);
    for (row, s) in samples.iter().enumerate() {
        for d in 0..dof {
            targets[(row, d)] = s[d];
        }
    }

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s < 1e-10 * smax) {
        return Err(Error::IllPosed(
            "spline fit is rank deficient: too few samples per knot span".into(),
        ));
    }
    let coefficients = svd
        .solve(&targets, 1e-12)
        .map_err(|e| Error::IllPosed(format!("spline least squares failed: {e}")))?;

    let residual = &design * &coefficients - &targets;
    let rms = (residual.iter().map(|r| r * r).sum::<f64>()
        / (samples.len() * dof) as f64)
        .sqrt();

    let trajectory = ControlTrajectory {
        knot_interval,
        duration,
        coefficients,
    };
    trajectory.validate()?;
    Ok(SplineFit { trajectory, rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_trajectory(seed: u64, duration: f64, dof: usize) -> ControlTrajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nb = num_basis(duration, DEFAULT_KNOT_INTERVAL);
        let coefficients = DMatrix::from_fn(nb, dof, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        ControlTrajectory {
            knot_interval: DEFAULT_KNOT_INTERVAL,
            duration,
            coefficients,
        }
    }

    #[test]
    fn num_basis_matches_formula() {
        assert_eq!(num_basis(1.0, 0.2), 8);
        assert_eq!(num_basis(2.5, 0.25), 13);
        // Remainder span: floor(1.1/0.2) = 5 spans.
        assert_eq!(num_basis(1.1, 0.2), 8);
    }

    #[test]
    fn constant_coefficients_evaluate_to_constant() {
        let c = DVector::from_vec(vec![0.3, -0.7, 1.2]);
        let traj = ControlTrajectory::constant(&c, 1.0, 0.2).unwrap();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let v = traj.evaluate(t).unwrap();
            for d in 0..3 {
                assert_relative_eq!(v[d], c[d], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity_over_random_times() {
        // Evaluating a constant-1 spline is exactly the sum of basis values.
        let ones = DVector::from_element(1, 1.0);
        let traj = ControlTrajectory::constant(&ones, 2.3, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let t = rng.gen::<f64>() * 2.3;
            assert_relative_eq!(traj.evaluate(t).unwrap()[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn clamped_endpoints_hit_first_and_last_rows() {
        let traj = random_trajectory(7, 1.0, 4);
        let v0 = traj.evaluate(0.0).unwrap();
        let v1 = traj.evaluate(1.0).unwrap();
        for d in 0..4 {
            assert_relative_eq!(v0[d], traj.coefficients[(0, d)], epsilon = 1e-12);
            assert_relative_eq!(v1[d], traj.coefficients[(traj.num_basis() - 1, d)], epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_range_t_rejected() {
        let traj = random_trajectory(1, 1.0, 2);
        assert!(traj.evaluate(-0.01).is_err());
        assert!(traj.evaluate(1.01).is_err());
    }

    #[test]
    fn cubic_polynomial_reproduction() {
        // A cubic polynomial lies in the spline space; the least-squares fit
        // must reproduce it to machine precision everywhere.
        let poly = |t: f64| 0.5 - 0.3 * t + 0.8 * t * t - 0.25 * t * t * t;
        let fps = 50.0;
        let samples: Vec<DVector<f64>> = (0..=100)
            .map(|i| DVector::from_element(1, poly(i as f64 / fps)))
            .collect();
        let fit = fit_to_samples(&samples, fps, 0.2).unwrap();
        assert!(fit.rms < 1e-12, "rms = {}", fit.rms);
        for i in 0..=200 {
            let t = i as f64 / 100.0;
            assert_relative_eq!(fit.trajectory.evaluate(t).unwrap()[0], poly(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_recovers_existing_spline() {
        let traj = random_trajectory(3, 1.0, 3);
        let fps = 100.0;
        let samples: Vec<DVector<f64>> = (0..=100)
            .map(|i| traj.evaluate(i as f64 / fps).unwrap())
            .collect();
        let fit = fit_to_samples(&samples, fps, traj.knot_interval).unwrap();
        assert!(fit.rms < 1e-12);
        for b in 0..traj.num_basis() {
            for d in 0..3 {
                assert_relative_eq!(
                    fit.trajectory.coefficients[(b, d)],
                    traj.coefficients[(b, d)],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn constant_samples_give_constant_spline() {
        let samples: Vec<DVector<f64>> =
            (0..30).map(|_| DVector::from_vec(vec![0.4, -0.2])).collect();
        let fit = fit_to_samples(&samples, 25.0, 0.2).unwrap();
        assert!(fit.rms < 1e-12);
        for c in fit.trajectory.coefficients.iter() {
            assert!((c - 0.4).abs() < 1e-9 || (c + 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn sine_sweep_fit_rms_below_centiradian() {
        let fps = 25.0;
        let samples: Vec<DVector<f64>> = (0..25)
            .map(|i| {
                let t = i as f64 / fps;
                DVector::from_element(1, (2.0 * std::f64::consts::PI * t).sin())
            })
            .collect();
        let fit = fit_to_samples(&samples, fps, 0.1).unwrap();
        assert!(fit.rms < 0.01, "rms = {}", fit.rms);
    }

    #[test]
    fn too_few_samples_rejected() {
        let samples: Vec<DVector<f64>> = (0..3).map(|_| DVector::zeros(2)).collect();
        assert!(fit_to_samples(&samples, 25.0, 0.2).is_err());
    }

    #[test]
    fn flatten_round_trip_exact() {
        let traj = random_trajectory(11, 1.4, 5);
        let flat = traj.flatten();
        assert_eq!(flat.len(), traj.num_basis() * 5);
        let back =
            ControlTrajectory::unflatten(&flat, traj.duration, traj.knot_interval, 5).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn wrong_flat_length_rejected() {
        let traj = random_trajectory(2, 1.0, 2);
        let mut flat = traj.flatten();
        flat.pop();
        assert!(ControlTrajectory::unflatten(&flat, 1.0, 0.2, 2).is_err());
    }

    #[test]
    fn perturbing_one_flat_index_changes_one_coefficient() {
        let traj = random_trajectory(5, 1.0, 4);
        let flat = traj.flatten();
        for k in [0, 7, flat.len() - 1] {
            let mut perturbed = flat.clone();
            perturbed[k] += 0.25;
            let back = traj.with_flat(&perturbed).unwrap();
            let mut changed = 0;
            for b in 0..traj.num_basis() {
                for d in 0..traj.dof_count() {
                    if back.coefficients[(b, d)] != traj.coefficients[(b, d)] {
                        changed += 1;
                        assert_eq!(b * traj.dof_count() + d, k);
                    }
                }
            }
            assert_eq!(changed, 1);
        }
    }

    #[test]
    fn local_support_bounds_influence() {
        // Changing one coefficient alters evaluation only on at most 4 spans.
        let traj = random_trajectory(9, 2.0, 1);
        let mut bumped = traj.clone();
        let row = 5;
        bumped.coefficients[(row, 0)] += 1.0;
        let knots = traj.knots();
        // Basis row i is supported on [knots[i], knots[i+4]].
        let (lo, hi) = (knots[row], knots[row + 4]);
        for i in 0..=400 {
            let t = i as f64 / 200.0;
            let a = traj.evaluate(t).unwrap()[0];
            let b = bumped.evaluate(t).unwrap()[0];
            if t < lo - 1e-9 || t > hi + 1e-9 {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn convex_hull_property() {
        let traj = random_trajectory(13, 1.0, 2);
        let lo = traj.coefficients.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = traj.coefficients.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..=500 {
            let t = i as f64 / 500.0;
            let v = traj.evaluate(t).unwrap();
            for d in 0..2 {
                assert!(v[d] >= lo - 1e-12 && v[d] <= hi + 1e-12);
            }
        }
    }
}
