use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arm_models::{AnthropometricParams, RobotGeometry, DOF};
use crate::collision::{default_self_collision_pairs, Aabb, Scene};
use crate::error::{Error, Result};
use crate::workspace_graph::GraphSchema;

pub const SCENE_SCHEMA: &str = "hrcplan-scene/1";

fn default_schema_version() -> String {
    SCENE_SCHEMA.to_string()
}

fn default_margin() -> f64 {
    0.05
}

/// One workspace: robot, human model, static boxes and graph schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    #[serde(default)]
    pub name: String,
    pub robot: RobotGeometry,
    pub anthropometrics: AnthropometricParams,
    pub boxes: Vec<Aabb>,
    #[serde(default = "default_margin")]
    pub human_safety_margin: f64,
    pub schema: GraphSchema,
    /// Joint limits, rad; override the ones inside `robot`.
    pub limits: [[f64; 2]; DOF],
    #[serde(default = "default_self_collision_pairs")]
    pub self_collision_pairs: Vec<[usize; 2]>,
}

impl SceneFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let f: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        f.validate()?;
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENE_SCHEMA {
            return Err(Error::Config(format!("scene schema {:?}, expected {SCENE_SCHEMA:?}", self.schema_version)));
        }
        self.robot().validate()?;
        self.anthropometrics.validate()?;
        self.schema.validate()?;
        if let Some(b) = self.boxes.iter().find(|b| !b.is_valid()) {
            return Err(Error::Config(format!("box {b:?} has min corner above max corner")));
        }
        if self.boxes.len() > self.schema.max_obstacles {
            return Err(Error::SchemaMismatch(format!(
                "{} boxes exceed max_obstacles {}",
                self.boxes.len(),
                self.schema.max_obstacles
            )));
        }
        if !(self.human_safety_margin >= 0.0) {
            return Err(Error::Config("human_safety_margin must be non-negative".into()));
        }
        if self.self_collision_pairs.iter().any(|&[i, j]| i >= DOF || j >= DOF || i == j) {
            return Err(Error::Config("self-collision pairs must name two distinct links".into()));
        }
        Ok(())
    }

    pub fn robot(&self) -> RobotGeometry {
        RobotGeometry {
            joint_limits: self.limits,
            ..self.robot.clone()
        }
    }

    /// The static scene (no human).
    pub fn scene(&self) -> Scene {
        Scene {
            self_collision_pairs: self.self_collision_pairs.clone(),
            ..Scene::new(self.robot()).with_boxes(self.boxes.clone())
        }
    }
}

/// Loads every scene and checks they share one graph schema and human model.
pub fn load_scenes(paths: &[impl AsRef<Path>]) -> Result<Vec<SceneFile>> {
    let files = paths.iter().map(|p| SceneFile::load(p.as_ref())).collect::<Result<Vec<_>>>()?;
    if let Some(first) = files.first() {
        for f in &files[1..] {
            if f.schema != first.schema {
                return Err(Error::SchemaMismatch(format!("scene {:?} uses a different graph schema", f.name)));
            }
            if f.anthropometrics != first.anthropometrics {
                return Err(Error::Config(format!("scene {:?} uses different anthropometrics", f.name)));
            }
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn sample() -> SceneFile {
        let robot = RobotGeometry::default();
        SceneFile {
            schema_version: SCENE_SCHEMA.into(),
            name: "t".into(),
            limits: robot.joint_limits,
            robot,
            anthropometrics: AnthropometricParams::default(),
            boxes: vec![Aabb::new(Vec3::new(0.3, 0.3, 0.0), Vec3::new(0.5, 0.5, 0.2))],
            human_safety_margin: 0.05,
            schema: GraphSchema::default(),
            self_collision_pairs: default_self_collision_pairs(),
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let f = sample();
        f.save(&p).unwrap();
        assert_eq!(SceneFile::load(&p).unwrap(), f);
    }

    #[test]
    fn limits_override_robot() {
        let mut f = sample();
        f.limits[2] = [-1.0, 1.0];
        assert_eq!(f.scene().robot.joint_limits[2], [-1.0, 1.0]);
    }

    #[test]
    fn too_many_boxes() {
        let mut f = sample();
        f.boxes = vec![f.boxes[0]; 4];
        assert!(matches!(f.validate(), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn missing_field_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        std::fs::write(&p, r#"{"robot": 1}"#).unwrap();
        assert!(matches!(SceneFile::load(&p), Err(Error::Config(_))));
    }
}
