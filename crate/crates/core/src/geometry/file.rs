//! TOML scene description.
//!
//! ```toml
//! # Optional: build the reference instrument scene first.
//! coating_fraction = 1.0
//! [reference]
//! phi3_deg = 20.0
//! d3 = 0.2
//! n_shields = 3
//! [layout]            # optional overrides of SceneLayout
//! probe_radius = 0.02
//!
//! # Any number of explicit primitives, appended after the reference ones.
//! [[primitive]]
//! node = "plate"
//! mesh = [4, 4]
//! front = { emissivity = 0.9 }
//! back = { emissivity = 0.9 }
//! shape = { kind = "rectangle", corner = [0, 0, 1], edge1 = [1, 0, 0], edge2 = [0, 1, 0] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::reference::reference_primitives;
use super::{GeometryError, MeshedScene, SceneLayout, ShieldParams, SurfacePrimitive};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coating_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ShieldParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<SceneLayout>,
    #[serde(default, rename = "primitive", skip_serializing_if = "Vec::is_empty")]
    pub primitives: Vec<SurfacePrimitive>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<SceneFile, GeometryError> {
        toml::from_str(text).map_err(|e| GeometryError::File(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<SceneFile, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::File(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene file serializes")
    }

    /// Explicit-primitive form of a built scene (the reference block is
    /// expanded), suitable for hand editing.
    pub fn export(scene: &MeshedScene) -> SceneFile {
        SceneFile {
            primitives: scene.primitives().to_vec(),
            ..Default::default()
        }
    }

    pub fn all_primitives(&self) -> Result<Vec<SurfacePrimitive>, GeometryError> {
        let mut prims = match &self.reference {
            Some(p) => reference_primitives(
                p,
                self.coating_fraction.unwrap_or(1.0),
                &self.layout.clone().unwrap_or_default(),
            )?,
            None => Vec::new(),
        };
        prims.extend(self.primitives.iter().cloned());
        Ok(prims)
    }

    pub fn build(&self) -> Result<MeshedScene, GeometryError> {
        MeshedScene::build(self.all_primitives()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scene_round_trips_through_export() {
        let file = SceneFile {
            coating_fraction: Some(0.5),
            reference: Some(ShieldParams::default()),
            ..Default::default()
        };
        let built = file.build().unwrap();
        let exported = SceneFile::export(&built).to_toml();
        let rebuilt = SceneFile::parse(&exported).unwrap().build().unwrap();
        assert_eq!(built.content_hash(), rebuilt.content_hash());
    }

    #[test]
    fn explicit_primitive_parses() {
        let text = r#"
            [[primitive]]
            node = "plate"
            mesh = [2, 3]
            front = { emissivity = 0.9 }
            back = { emissivity = 0.1 }
            shape = { kind = "rectangle", corner = [0, 0, 1], edge1 = [1, 0, 0], edge2 = [0, 1, 0] }
        "#;
        let s = SceneFile::parse(text).unwrap().build().unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.node_names(), ["plate"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(SceneFile::parse("bogus = 1").is_err());
    }
}
