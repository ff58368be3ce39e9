//! Builds a simulation-ready character: fits geometric primitives to
//! per-link surface point sets by minimizing the bidirectional nearest-point
//! distance, derives mass and inertia from volume with an anatomical mass
//! distribution, and assembles the result into a [`BodyModel`].

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{transform, Transform, Vec3};
use crate::model::{BodyModel, JointSpec, LandmarkAttachment, Primitive, PrimitiveShape};
use crate::numopt::golden_section;

/// Number of candidate-surface samples used for the primitive-to-points term
/// of the fitting loss.
pub const FIT_SURFACE_SAMPLES: usize = 500;

/// Surface samples of one link's mesh segment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkPointSet {
    /// Link name this point set belongs to.
    pub link: String,
    pub points: Vec<Vec3>,
}

impl LinkPointSet {
    /// At least 4 points spanning 3 dimensions; coplanar input makes the fit
    /// ill-posed.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(Error::IllPosed(format!(
                "link '{}': {} points, need at least 4",
                self.link,
                self.points.len()
            )));
        }
        let (_, eigvals, _) = principal_axes(&self.points);
        let scale = eigvals[0].max(1e-30);
        if eigvals[2] / scale < 1e-10 {
            return Err(Error::IllPosed(format!(
                "link '{}': points are (near-)coplanar, primitive fit is ill-posed",
                self.link
            )));
        }
        Ok(())
    }
}

/// Per-link share of total body mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MassDistribution {
    /// (link name, fraction) pairs; fractions sum to 1.
    pub fractions: Vec<(String, f64)>,
    pub total_mass: f64,
}

impl MassDistribution {
    pub fn validate(&self) -> Result<()> {
        if self.total_mass <= 0.0 {
            return Err(Error::Validation(format!(
                "total mass must be > 0, got {}",
                self.total_mass
            )));
        }
        if let Some((name, f)) = self.fractions.iter().find(|(_, f)| *f < 0.0) {
            return Err(Error::Validation(format!(
                "mass fraction for '{name}' is negative ({f})"
            )));
        }
        let sum: f64 = self.fractions.iter().map(|(_, f)| f).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "mass fractions sum to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(())
    }

    pub fn fraction_for(&self, link: &str) -> Option<f64> {
        self.fractions
            .iter()
            .find(|(n, _)| n == link)
            .map(|(_, f)| *f)
    }

    /// The stock anatomical table at a given total mass.
    pub fn stock(total_mass: f64) -> Self {
        MassDistribution {
            fractions: crate::model::stock_mass_fractions()
                .into_iter()
                .map(|(n, f)| (n.to_string(), f))
                .collect(),
            total_mass,
        }
    }
}

/// Result of fitting one primitive to one link's points.
#[derive(Clone, Debug)]
pub struct PrimitiveFit {
    pub shape: PrimitiveShape,
    /// Pose of the primitive in the link point-set frame.
    pub local_transform: Transform,
    /// Final bidirectional nearest-point loss.
    pub loss: f64,
    /// Loss after each descent sweep (non-increasing).
    pub loss_history: Vec<f64>,
    /// False when the sweep budget ran out before the relative improvement
    /// dropped below tolerance; the fit is still the best found.
    pub converged: bool,
}

/// Principal axes of a point cloud: centroid, eigenvalues (descending) and a
/// right-handed rotation whose columns are the corresponding directions.
fn principal_axes(points: &[Vec3]) -> (Vec3, [f64; 3], Rotation3<f64>) {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let mut axes: Vec<Vec3> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    // Deterministic gauge: largest-magnitude component of each axis positive.
    for a in axes.iter_mut().take(2) {
        let max_idx = (0..3).max_by(|&i, &j| a[i].abs().partial_cmp(&a[j].abs()).unwrap()).unwrap();
        if a[max_idx] < 0.0 {
            *a = -*a;
        }
    }
    // Local Y carries the dominant direction (capsule axis / box height);
    // the third column completes a right-handed frame.
    let x_img = axes[1];
    let y_img = axes[0];
    let z_img = x_img.cross(&y_img);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x_img, y_img, z_img]));
    (centroid, vals, rot)
}

/// Bidirectional nearest-point loss between a point set and a posed
/// primitive: exact point-to-surface distances one way, sampled
/// surface-to-nearest-point distances the other way.
pub fn fit_loss(points: &[Vec3], shape: &PrimitiveShape, pose: &Transform) -> f64 {
    let inv = pose.inverse();
    let mut loss = 0.0;
    for p in points {
        let local = inv * nalgebra::Point3::from(*p);
        loss += shape.surface_distance(&local.coords);
    }
    for s in shape.surface_samples(FIT_SURFACE_SAMPLES) {
        let world = pose * nalgebra::Point3::from(s);
        let mut best = f64::INFINITY;
        for p in points {
            let d = (world.coords - p).norm_squared();
            if d < best {
                best = d;
            }
        }
        loss += best.sqrt();
    }
    loss
}

/// Fits one primitive of the requested kind to a link point set.
///
/// The pose is initialized from the point cloud's principal axes (capsule
/// axis and box height along the dominant direction, centroid as origin).
/// Size parameters plus a small orientation correction (2+3 or 3+3
/// parameters) are then minimized by cyclic coordinate descent with
/// golden-section line searches, which keeps the loss non-increasing across
/// sweeps. The orientation correction matters when the principal axes are
/// degenerate (e.g. a cube's isotropic covariance).
pub fn fit_primitive(points: &LinkPointSet, want_box: bool) -> Result<PrimitiveFit> {
    points.validate()?;
    let pts = &points.points;
    let (centroid, _eigvals, rot) = principal_axes(pts);
    let init_rot = UnitQuaternion::from_rotation_matrix(&rot);
    let init_pose = transform(init_rot, centroid);
    let inv = init_pose.inverse();
    let local: Vec<Vec3> = pts
        .iter()
        .map(|p| (inv * nalgebra::Point3::from(*p)).coords)
        .collect();

    // Extents in the primitive frame initialize the size parameters.
    let mut min = Vec3::from_element(f64::INFINITY);
    let mut max = Vec3::from_element(f64::NEG_INFINITY);
    for p in &local {
        min = min.inf(p);
        max = max.sup(p);
    }
    let extent = max - min;

    let size_count = if want_box { 3 } else { 2 };
    // Layout: size parameters, then a rotation-vector correction applied on
    // top of the PCA orientation.
    let mut params: Vec<f64> = if want_box {
        vec![extent.x, extent.y, extent.z, 0.0, 0.0, 0.0]
    } else {
        let radial = local
            .iter()
            .map(|p| (p.x * p.x + p.z * p.z).sqrt())
            .sum::<f64>()
            / local.len() as f64;
        let r0 = radial.max(1e-3);
        let l0 = (extent.y - 2.0 * r0).max(1e-3);
        vec![r0, l0, 0.0, 0.0, 0.0]
    };

    let build = |params: &[f64]| -> (PrimitiveShape, Transform) {
        let shape = if want_box {
            PrimitiveShape::Box {
                width: params[0].max(1e-4),
                height: params[1].max(1e-4),
                depth: params[2].max(1e-4),
            }
        } else {
            PrimitiveShape::Capsule {
                radius: params[0].max(1e-4),
                length: params[1].max(1e-4),
            }
        };
        let correction =
            UnitQuaternion::from_scaled_axis(Vec3::new(params[size_count], params[size_count + 1], params[size_count + 2]));
        (shape, transform(init_rot * correction, centroid))
    };

    let eval = |params: &[f64]| {
        let (shape, pose) = build(params);
        fit_loss(pts, &shape, &pose)
    };

    let mut best_loss = eval(&params);
    let mut history = vec![best_loss];
    let max_sweeps = 20;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let before = best_loss;
        for i in 0..params.len() {
            let current = params[i];
            let (lo, hi) = if i < size_count {
                ((0.4 * current).max(1e-4), 1.8 * current + 1e-3)
            } else {
                (current - 0.3, current + 0.3)
            };
            let (x, fx) = golden_section(
                |v| {
                    let mut trial = params.clone();
                    trial[i] = v;
                    eval(&trial)
                },
                lo,
                hi,
                1e-6,
            );
            if fx < best_loss {
                params[i] = x;
                best_loss = fx;
            }
        }
        history.push(best_loss);
        if before - best_loss <= 1e-6 * (1.0 + before.abs()) {
            converged = true;
            break;
        }
    }

    // Joint polish: axis-aligned sweeps zigzag on the coupled size/tilt
    // landscape, so finish with a simplex step over all parameters and keep
    // it only when it improves.
    let polish = crate::numopt::nelder_mead(eval, &params, 5e-3, 250, 1e-12);
    if polish.f < best_loss {
        params = polish.x;
        best_loss = polish.f;
    }
    history.push(best_loss);

    let (shape, pose) = build(&params);
    Ok(PrimitiveFit {
        shape,
        local_transform: pose,
        loss: best_loss,
        loss_history: history,
        converged,
    })
}

/// Closed-form mass properties of a posed primitive: inertia about the
/// geometric center in link-frame axes, and the COM offset in the link frame.
pub fn compute_mass_properties(
    shape: &PrimitiveShape,
    local_transform: &Transform,
    mass: f64,
) -> Result<(Matrix3<f64>, Vec3)> {
    if !shape.is_valid() {
        return Err(Error::Contract(
            "primitive has non-positive size parameters".into(),
        ));
    }
    if mass <= 0.0 {
        return Err(Error::Contract(format!("mass must be > 0, got {mass}")));
    }
    let r = local_transform.rotation.to_rotation_matrix();
    let inertia = r.matrix() * shape.inertia(mass) * r.matrix().transpose();
    Ok((inertia, local_transform.translation.vector))
}

/// Assembles fitted primitives, a joint topology and a mass distribution into
/// a validated body model. One primitive per link; each link's mass is its
/// anatomical fraction of the total.
pub fn assemble_body(
    link_names: &[String],
    fits: &[(String, PrimitiveShape, Transform)],
    joints: Vec<JointSpec>,
    landmarks: Vec<LandmarkAttachment>,
    base_link: usize,
    dist: &MassDistribution,
) -> Result<BodyModel> {
    dist.validate()?;
    let mut primitives = Vec::with_capacity(fits.len());
    for (link_name, shape, pose) in fits {
        let link = link_names
            .iter()
            .position(|n| n == link_name)
            .ok_or_else(|| Error::Validation(format!("fit references unknown link '{link_name}'")))?;
        let fraction = dist.fraction_for(link_name).ok_or_else(|| {
            Error::Validation(format!("mass distribution missing link '{link_name}'"))
        })?;
        let mass = fraction * dist.total_mass;
        compute_mass_properties(shape, pose, mass)?;
        primitives.push(Primitive::new(shape.clone(), link, *pose, mass));
    }
    for name in link_names {
        if !fits.iter().any(|(n, _, _)| n == name) {
            return Err(Error::Validation(format!("no primitive fitted for link '{name}'")));
        }
    }
    let model = BodyModel {
        link_names: link_names.to_vec(),
        primitives,
        joints,
        base_link,
        landmark_attachments: landmarks,
    };
    model.validate()?;
    Ok(model)
}
