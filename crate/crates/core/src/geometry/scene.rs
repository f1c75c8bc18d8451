use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::bvh::{segment_pierces, Bvh};
use super::{mesh_primitive, Facet, GeometryError, Side, SideProperties, SurfacePrimitive};

/// Faceted scene seen by the ray tracer. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MeshedScene {
    facets: Vec<Facet>,
    primitive_of: Vec<usize>,
    node_names: Vec<String>,
    primitives: Vec<SurfacePrimitive>,
    bvh: Arc<Bvh>,
}

impl MeshedScene {
    /// Meshes every primitive, assigns node indices in first-seen order and
    /// rejects interpenetrating facets.
    pub fn build(primitives: Vec<SurfacePrimitive>) -> Result<MeshedScene, GeometryError> {
        if primitives.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        let mut node_names: Vec<String> = Vec::new();
        let mut facets = Vec::new();
        let mut primitive_of = Vec::new();
        for (pi, p) in primitives.iter().enumerate() {
            if p.node.is_empty() {
                return Err(GeometryError::MissingNode(pi));
            }
            let node = match node_names.iter().position(|n| *n == p.node) {
                Some(i) => i,
                None => {
                    node_names.push(p.node.clone());
                    node_names.len() - 1
                }
            };
            for mut f in mesh_primitive(p)? {
                f.node = node;
                facets.push(f);
                primitive_of.push(pi);
            }
        }
        let scene = MeshedScene {
            bvh: Arc::new(Bvh::build(&facets)),
            facets,
            primitive_of,
            node_names,
            primitives,
        };
        scene.check_interpenetration()?;
        Ok(scene)
    }

    /// Scene from already-meshed facets; each facet counts as its own
    /// primitive. `facet.node` must index into `node_names`.
    pub fn from_facets(
        facets: Vec<Facet>,
        node_names: Vec<String>,
    ) -> Result<MeshedScene, GeometryError> {
        if facets.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        if let Some(i) = facets.iter().position(|f| f.node >= node_names.len()) {
            return Err(GeometryError::MissingNode(i));
        }
        let scene = MeshedScene {
            bvh: Arc::new(Bvh::build(&facets)),
            primitive_of: (0..facets.len()).collect(),
            facets,
            node_names,
            primitives: Vec::new(),
        };
        scene.check_interpenetration()?;
        Ok(scene)
    }

    fn check_interpenetration(&self) -> Result<(), GeometryError> {
        for (i, f) in self.facets.iter().enumerate() {
            let n = f.vertices.len();
            for k in 0..n {
                let (p, q) = (f.vertices[k], f.vertices[(k + 1) % n]);
                let mut clash = None;
                self.bvh.query_box(p.min(q), p.max(q), |j, tri| {
                    if clash.is_none()
                        && self.primitive_of[j] != self.primitive_of[i]
                        && segment_pierces(p, q, tri)
                    {
                        clash = Some(j);
                    }
                });
                if let Some(j) = clash {
                    return Err(GeometryError::Interpenetration {
                        a: self.describe(i),
                        b: self.describe(j),
                    });
                }
            }
        }
        Ok(())
    }

    fn describe(&self, facet: usize) -> String {
        let p = self.primitive_of[facet];
        let tag = self
            .primitives
            .get(p)
            .and_then(|p| p.tag.clone())
            .unwrap_or_else(|| format!("primitive {p}"));
        format!("{tag} (node {})", self.node_names[self.facets[facet].node])
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn primitives(&self) -> &[SurfacePrimitive] {
        &self.primitives
    }

    pub fn primitive_of(&self, facet: usize) -> usize {
        self.primitive_of[facet]
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// Total facet area per node.
    pub fn node_areas(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.node_names.len()];
        for f in &self.facets {
            a[f.node] += f.area;
        }
        a
    }

    /// Copy of the scene with per-side emissivities replaced by `f`. Geometry
    /// (and hence view factors) is shared with `self`.
    pub fn with_emissivities(
        &self,
        f: impl Fn(usize, &Facet, Side) -> f64,
    ) -> Result<MeshedScene, GeometryError> {
        let mut out = self.clone();
        for (i, facet) in out.facets.iter_mut().enumerate() {
            let orig = self.facets[i].clone();
            facet.front = SideProperties::new(f(i, &orig, Side::Front))?;
            facet.back = SideProperties::new(f(i, &orig, Side::Back))?;
        }
        Ok(out)
    }

    /// Hash of everything the ray tracer sees: facet vertices in order.
    pub fn geometry_hash(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.facets {
            h.update((f.vertices.len() as u64).to_le_bytes());
            for v in &f.vertices {
                for c in [v.x, v.y, v.z] {
                    h.update(c.to_bits().to_le_bytes());
                }
            }
        }
        hex(&h.finalize())
    }

    /// Hash of geometry plus optical properties and node assignment.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.geometry_hash().as_bytes());
        for f in &self.facets {
            h.update(f.front.emissivity.to_bits().to_le_bytes());
            h.update(f.back.emissivity.to_bits().to_le_bytes());
            h.update(self.node_names[f.node].as_bytes());
            h.update([0u8]);
        }
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MeshDensity, Shape, Vec3};

    fn rect(corner: Vec3, e1: Vec3, e2: Vec3, node: &str) -> SurfacePrimitive {
        let s = SideProperties::new(0.5).unwrap();
        SurfacePrimitive::new(
            Shape::Rectangle {
                corner,
                edge1: e1,
                edge2: e2,
            },
            s,
            s,
            node,
        )
        .with_mesh(MeshDensity(2, 2))
    }

    #[test]
    fn crossing_plates_are_rejected() {
        let a = rect(
            Vec3::new(-1.0, -1.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            "a",
        );
        let b = rect(
            Vec3::new(-0.77, 0.3, -0.7),
            Vec3::new(1.5, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 2.0),
            "b",
        );
        assert!(matches!(
            MeshedScene::build(vec![a, b]),
            Err(GeometryError::Interpenetration { .. })
        ));
    }

    #[test]
    fn touching_plates_are_fine() {
        let a = rect(
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            "a",
        );
        let b = rect(
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            "b",
        );
        let s = MeshedScene::build(vec![a, b]).unwrap();
        assert_eq!(s.node_names(), ["a", "b"]);
        assert_eq!(s.len(), 8);
        assert!((s.node_areas()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn emissivity_swap_keeps_geometry_hash() {
        let a = rect(
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            "a",
        );
        let s = MeshedScene::build(vec![a]).unwrap();
        let t = s.with_emissivities(|_, _, _| 0.1).unwrap();
        assert_eq!(s.geometry_hash(), t.geometry_hash());
        assert_ne!(s.content_hash(), t.content_hash());
    }
}
