//! TOML network description.
//!
//! ```toml
//! [[node]]
//! label = "spacecraft"
//! boundary = 300.0       # fixed temperature, K
//!
//! [[node]]
//! label = "plate"
//! q = 0.5                # dissipation, W (default 0)
//!
//! [[conductor]]
//! a = "spacecraft"
//! b = "plate"
//! gl = 0.05              # or: area = 1e-4, length = 0.1, material = "gfrp"
//!
//! [[radiation]]
//! a = "plate"
//! b = "spacecraft"
//! gr = 0.01              # m^2
//! ```
//!
//! `material` is a built-in table name or a path to a `T_K,kappa` CSV file.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::num::Real;

use super::{
    Conductor, ConductorKind, MaterialTable, NetworkError, Node, NodeId, NodeKind, RadExchange,
    ThermalNetwork,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductorSpec {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiationSpec {
    pub a: String,
    pub b: String,
    pub gr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default, rename = "node")]
    pub nodes: Vec<NodeSpec>,
    #[serde(default, rename = "conductor", skip_serializing_if = "Vec::is_empty")]
    pub conductors: Vec<ConductorSpec>,
    #[serde(default, rename = "radiation", skip_serializing_if = "Vec::is_empty")]
    pub radiation: Vec<RadiationSpec>,
}

fn err(msg: String) -> NetworkError {
    NetworkError::File(msg)
}

impl NetworkFile {
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        toml::from_str(text).map_err(|e| err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("network file serializes")
    }

    /// Builds and validates the network. Relative material paths resolve
    /// against `base_dir` when given.
    pub fn build<R: Real>(
        &self,
        base_dir: Option<&Path>,
    ) -> Result<ThermalNetwork<R>, NetworkError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let kind = match (n.boundary, n.q) {
                (Some(t), None) => NodeKind::Boundary { t: R::lit(t) },
                (None, q) => NodeKind::Diffusion {
                    q: R::lit(q.unwrap_or(0.0)),
                },
                (Some(_), Some(_)) => {
                    return Err(err(format!(
                        "node {:?}: boundary nodes take no dissipation",
                        n.label
                    )))
                }
            };
            nodes.push(Node {
                label: n.label.clone(),
                kind,
            });
        }
        let index: HashMap<&str, NodeId> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.label.as_str(), NodeId(i)))
            .collect();
        let id = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| NetworkError::UnknownNode(l.into()))
        };
        let mut materials: HashMap<String, Arc<MaterialTable<R>>> = HashMap::new();
        let mut conductors = Vec::with_capacity(self.conductors.len());
        for c in &self.conductors {
            let kind = match (c.gl, c.area, c.length, &c.material) {
                (Some(g), None, None, None) => ConductorKind::Direct(R::lit(g)),
                (None, Some(area), Some(length), Some(m)) => {
                    let table = match materials.get(m) {
                        Some(t) => t.clone(),
                        None => {
                            let t = Arc::new(load_material(m, base_dir)?);
                            materials.insert(m.clone(), t.clone());
                            t
                        }
                    };
                    ConductorKind::Geometric {
                        area: R::lit(area),
                        length: R::lit(length),
                        material: table,
                    }
                }
                _ => {
                    return Err(err(format!(
                        "conductor {}-{}: give either gl or all of area, length, material",
                        c.a, c.b
                    )))
                }
            };
            conductors.push(Conductor {
                a: id(&c.a)?,
                b: id(&c.b)?,
                kind,
            });
        }
        let mut radiation = Vec::with_capacity(self.radiation.len());
        for r in &self.radiation {
            radiation.push(RadExchange {
                a: id(&r.a)?,
                b: id(&r.b)?,
                gr: R::lit(r.gr),
            });
        }
        ThermalNetwork::new(nodes, conductors, radiation)
    }

    /// File form of a network. Geometric conductors refer to their material
    /// by table name.
    pub fn from_network<R: Real>(net: &ThermalNetwork<R>) -> Self {
        let label = |id: NodeId| net.node(id).label.clone();
        NetworkFile {
            nodes: net
                .nodes()
                .iter()
                .map(|n| match n.kind {
                    NodeKind::Boundary { t } => NodeSpec {
                        label: n.label.clone(),
                        boundary: Some(t.to_f64_lossy()),
                        q: None,
                    },
                    NodeKind::Diffusion { q } => NodeSpec {
                        label: n.label.clone(),
                        boundary: None,
                        q: Some(q.to_f64_lossy()),
                    },
                })
                .collect(),
            conductors: net
                .conductors()
                .iter()
                .map(|c| {
                    let (gl, area, length, material) = match &c.kind {
                        ConductorKind::Direct(g) => (Some(g.to_f64_lossy()), None, None, None),
                        ConductorKind::Geometric {
                            area,
                            length,
                            material,
                        } => (
                            None,
                            Some(area.to_f64_lossy()),
                            Some(length.to_f64_lossy()),
                            Some(material.name().to_string()),
                        ),
                    };
                    ConductorSpec {
                        a: label(c.a),
                        b: label(c.b),
                        gl,
                        area,
                        length,
                        material,
                    }
                })
                .collect(),
            radiation: net
                .radiation()
                .iter()
                .map(|r| RadiationSpec {
                    a: label(r.a),
                    b: label(r.b),
                    gr: r.gr.to_f64_lossy(),
                })
                .collect(),
        }
    }
}

fn load_material<R: Real>(
    name: &str,
    base: Option<&Path>,
) -> Result<MaterialTable<R>, NetworkError> {
    if name.ends_with(".csv") {
        let p = Path::new(name);
        let p = match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        MaterialTable::load(&p)
    } else {
        MaterialTable::builtin(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_NODE: &str = r#"
        [[node]]
        label = "hot"
        boundary = 300.0
        [[node]]
        label = "n"
        q = 0.5
        [[conductor]]
        a = "hot"
        b = "n"
        gl = 0.05
        [[conductor]]
        a = "hot"
        b = "n"
        area = 1e-4
        length = 0.1
        material = "gfrp"
        [[radiation]]
        a = "n"
        b = "hot"
        gr = 0.01
    "#;

    #[test]
    fn parses_and_round_trips() {
        let f = NetworkFile::parse(TWO_NODE).unwrap();
        let net = f.build::<f64>(None).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.conductors().len(), 2);
        let back = NetworkFile::from_network(&net);
        assert_eq!(back, NetworkFile::parse(&back.to_toml()).unwrap());
        assert_eq!(back.build::<f64>(None).unwrap(), net);
    }

    #[test]
    fn rejects_unknown_nodes_and_mixed_conductors() {
        let bad = TWO_NODE.replace("b = \"n\"\n        gl", "b = \"m\"\n        gl");
        assert!(matches!(
            NetworkFile::parse(&bad).unwrap().build::<f64>(None),
            Err(NetworkError::UnknownNode(_))
        ));
        let mixed = TWO_NODE.replace("gl = 0.05", "gl = 0.05\n        area = 1.0");
        assert!(NetworkFile::parse(&mixed)
            .unwrap()
            .build::<f64>(None)
            .is_err());
    }
}
