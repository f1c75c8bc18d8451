use serde::{Deserialize, Serialize};

use crate::geometry::{build_reference_scene, MeshedScene, SceneLayout, ShieldParams};
use crate::network::ReferenceNetworkParams;
use crate::provenance::sha256_hex;
use crate::solver::SolveOptions;
use crate::viewfactor::RayBudget;

use super::StudyError;

/// One fully specified model point: scene, network and numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub shields: ShieldParams,
    pub layout: SceneLayout,
    /// Gold-coated fraction of the bench top, centred under the test volume.
    pub coating_fraction: f64,
    /// `false` drops the lens facet next to the test volume.
    pub lens: bool,
    pub network: ReferenceNetworkParams,
    pub rays: RayBudget,
    pub solver: SolveOptions,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            shields: ShieldParams::default(),
            layout: SceneLayout::default(),
            coating_fraction: 1.0,
            lens: true,
            network: ReferenceNetworkParams::default(),
            rays: RayBudget::default(),
            solver: SolveOptions::default(),
        }
    }
}

impl ModelConfig {
    pub fn build_scene(&self) -> Result<MeshedScene, StudyError> {
        let mut layout = self.layout.clone();
        if !self.lens {
            layout.lens = None;
        }
        Ok(build_reference_scene(
            &self.shields,
            self.coating_fraction,
            &layout,
        )?)
    }

    pub fn to_value(&self) -> toml::Value {
        toml::Value::try_from(self).expect("model config serializes to TOML")
    }

    pub fn from_value(v: toml::Value) -> Result<Self, StudyError> {
        v.try_into()
            .map_err(|e: toml::de::Error| StudyError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        sha256_hex(
            toml::to_string(self)
                .expect("model config serializes")
                .as_bytes(),
        )
    }
}

/// Parses the right-hand side of a `key=value` override: a TOML literal if
/// it parses as one, a bare string otherwise.
pub fn parse_override_value(raw: &str) -> toml::Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets a dotted key such as `network.strut.gl_st_st` in a TOML tree,
/// creating intermediate tables as needed.
pub fn set_dotted(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), StudyError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(StudyError::Config(format!("malformed key {key:?}")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| {
            StudyError::Config(format!("{key:?}: {} is not a table", parts[..i].join(".")))
        })?;
        if i + 1 == parts.len() {
            // Integer-valued floats stay floats so `d3=1` still means 1.0 m.
            let value = match (table.get(*part), value) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(n)) => {
                    toml::Value::Float(n as f64)
                }
                (_, v) => v,
            };
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    unreachable!()
}

/// Applies `key=value` strings to a model configuration.
pub fn apply_overrides(
    base: &ModelConfig,
    overrides: &[String],
) -> Result<ModelConfig, StudyError> {
    if overrides.is_empty() {
        return Ok(base.clone());
    }
    let mut v = base.to_value();
    for o in overrides {
        let (k, raw) = o
            .split_once('=')
            .ok_or_else(|| StudyError::Config(format!("override {o:?} is not key=value")))?;
        set_dotted(&mut v, k.trim(), parse_override_value(raw))?;
    }
    ModelConfig::from_value(v)
}
