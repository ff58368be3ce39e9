//! Versioned JSON file formats for every artifact the pipeline produces or
//! consumes.
//!
//! Every file is a JSON object with three envelope fields — `version`
//! (schema version, currently 1), `units` (must be `"si"`; anything else is
//! rejected) and `type` (the artifact kind) — followed by the payload fields
//! of that kind. Floating-point numbers are written in shortest
//! round-trip decimal form, so a load/save cycle preserves values bit-exactly.
//!
//! See `docs/formats.md` in the repository root for the field-by-field
//! schema.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::clip::MotionClip;
use crate::error::{Error, Result};
use crate::model::BodyModel;
use crate::observations::ObservationSequence;
use crate::plane::GroundPlane;
use crate::spline::ControlTrajectory;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    version: u32,
    units: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(flatten)]
    payload: T,
}

fn save_kind<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    let env = Envelope {
        version: SCHEMA_VERSION,
        units: "si".to_string(),
        kind: kind.to_string(),
        payload,
    };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn load_kind<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    if env.version != SCHEMA_VERSION {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                env.version
            ),
        });
    }
    if env.units != "si" {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!("units must be \"si\", got \"{}\"", env.units),
        });
    }
    if env.kind != kind {
        return Err(Error::Parse {
            file: path.display().to_string(),
            message: format!("expected type \"{kind}\", got \"{}\"", env.kind),
        });
    }
    Ok(env.payload)
}

pub fn save_observations(path: &Path, obs: &ObservationSequence) -> Result<()> {
    obs.validate()?;
    save_kind(path, "observations", obs)
}

pub fn load_observations(path: &Path) -> Result<ObservationSequence> {
    let obs: ObservationSequence = load_kind(path, "observations")?;
    obs.validate()?;
    Ok(obs)
}

pub fn save_body_model(path: &Path, model: &BodyModel) -> Result<()> {
    model.validate()?;
    save_kind(path, "body_model", model)
}

pub fn load_body_model(path: &Path) -> Result<BodyModel> {
    let model: BodyModel = load_kind(path, "body_model")?;
    model.validate()?;
    Ok(model)
}

pub fn save_clip(path: &Path, clip: &MotionClip) -> Result<()> {
    save_kind(path, "motion_clip", clip)
}

pub fn load_clip(path: &Path) -> Result<MotionClip> {
    let clip: MotionClip = load_kind(path, "motion_clip")?;
    if !(clip.dt > 0.0) {
        return Err(Error::Validation(format!("clip dt must be > 0, got {}", clip.dt)));
    }
    Ok(clip)
}

pub fn save_plane(path: &Path, plane: &GroundPlane) -> Result<()> {
    plane.validate()?;
    save_kind(path, "ground_plane", plane)
}

pub fn load_plane(path: &Path) -> Result<GroundPlane> {
    let plane: GroundPlane = load_kind(path, "ground_plane")?;
    plane.validate()?;
    Ok(plane)
}

pub fn save_controls(path: &Path, controls: &ControlTrajectory) -> Result<()> {
    save_kind(path, "controls", controls)
}

pub fn load_controls(path: &Path) -> Result<ControlTrajectory> {
    let c: ControlTrajectory = load_kind(path, "controls")?;
    c.validate()?;
    Ok(c)
}

/// Generic JSON value with the same envelope rules, for reports/manifests.
pub fn save_report(path: &Path, kind: &str, value: &serde_json::Value) -> Result<()> {
    save_kind(path, kind, value)
}
