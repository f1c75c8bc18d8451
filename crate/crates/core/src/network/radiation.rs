use std::collections::BTreeMap;

use crate::geometry::{Facet, MeshedScene, Side};
use crate::num::Real;
use crate::viewfactor::{side_of, ViewFactorMatrix};

use super::{NetworkError, NodeId, RadExchange};

/// Radiative couplings `GR = eps_i eps_j A_i F_ij` summed onto node pairs.
///
/// Scene node `k` maps to `node_map[k]`; the SPACE column couples to `space`
/// with unit emissivity. Each facet-side pair contributes the mean of its two
/// directions, so the result is reciprocal even under Monte Carlo noise.
/// Pairs within one node are dropped. Output is ordered by node pair.
pub fn gr_from_viewfactors<R: Real>(
    scene: &MeshedScene,
    f: &ViewFactorMatrix,
    node_map: &[NodeId],
    space: NodeId,
) -> Result<Vec<RadExchange<R>>, NetworkError> {
    f.check_scene(scene)
        .map_err(|e| NetworkError::ViewFactors(e.to_string()))?;
    if node_map.len() != scene.node_names().len() {
        return Err(NetworkError::ViewFactors(format!(
            "node map has {} entries for {} scene nodes",
            node_map.len(),
            scene.node_names().len()
        )));
    }
    let facets = scene.facets();
    let eps = |s: usize| {
        let (k, side) = side_of(s);
        side_emissivity(&facets[k], side)
    };
    let mut acc: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut add = |a: NodeId, b: NodeId, g: f64| {
        if a != b && g > 0.0 {
            *acc.entry((a.min(b), a.max(b))).or_insert(0.0) += g;
        }
    };
    for i in 0..f.n_sides() {
        let fi = &facets[i / 2];
        let ei = eps(i);
        if ei == 0.0 {
            continue;
        }
        let ni = node_map[fi.node];
        for (j, fij) in f.row(i) {
            let nj = node_map[facets[j / 2].node];
            add(ni, nj, 0.5 * ei * eps(j) * fi.area * fij);
        }
        add(ni, space, ei * fi.area * f.space(i));
    }
    Ok(acc
        .into_iter()
        .map(|((a, b), g)| RadExchange {
            a,
            b,
            gr: R::lit(g),
        })
        .collect())
}

fn side_emissivity(f: &Facet, side: Side) -> f64 {
    match side {
        Side::Front => f.front.emissivity,
        Side::Back => f.back.emissivity,
    }
}

/// Effective emissivity of a surface covered by an `layers`-layer blanket.
pub fn mli_emissivity(eps: f64, layers: u32) -> f64 {
    eps / (layers as f64 + 1.0)
}

/// Applies an MLI blanket to the downward-facing (spacecraft-facing) sides of
/// every facet whose node name satisfies `covered`.
pub fn with_mli(
    scene: &MeshedScene,
    layers: u32,
    covered: impl Fn(&str) -> bool,
) -> Result<MeshedScene, NetworkError> {
    if layers == 0 {
        return Ok(scene.clone());
    }
    let names = scene.node_names();
    scene
        .with_emissivities(|_, f, side| {
            let e = side_emissivity(f, side);
            let down = match side {
                Side::Front => f.normal.z < 0.0,
                Side::Back => f.normal.z > 0.0,
            };
            if down && covered(&names[f.node]) {
                mli_emissivity(e, layers)
            } else {
                e
            }
        })
        .map_err(|e| NetworkError::ViewFactors(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MeshDensity, Shape, SideProperties, SurfacePrimitive, Vec3};
    use crate::viewfactor::{side_index, RayBudget};

    fn plate(z: f64, eps: f64, node: &str, up: bool) -> SurfacePrimitive {
        let s = SideProperties::new(eps).unwrap();
        let (e1, e2) = if up {
            (Vec3::X, Vec3::Y)
        } else {
            (Vec3::Y, Vec3::X)
        };
        SurfacePrimitive::new(
            Shape::Rectangle {
                corner: Vec3::new(0.0, 0.0, z),
                edge1: e1,
                edge2: e2,
            },
            s,
            s,
            node,
        )
        .with_mesh(MeshDensity(1, 1))
    }

    /// Two unit plates facing each other with hand-set tallies.
    fn fixture(eps: f64, hits: u32) -> (MeshedScene, ViewFactorMatrix) {
        let scene = MeshedScene::build(vec![
            plate(0.0, eps, "a", true),
            plate(1.0, eps, "b", false),
        ])
        .unwrap();
        let mut rows = vec![Vec::new(); 4];
        rows[side_index(0, Side::Front)].push((side_index(1, Side::Front) as u32, hits));
        rows[side_index(1, Side::Front)].push((side_index(0, Side::Front) as u32, hits));
        let m = ViewFactorMatrix::from_counts(
            2,
            vec![1000; 4],
            rows,
            RayBudget::default(),
            scene.geometry_hash(),
        )
        .unwrap();
        (scene, m)
    }

    fn gr_ab(eps: f64, hits: u32) -> f64 {
        let (scene, m) = fixture(eps, hits);
        let g = gr_from_viewfactors::<f64>(&scene, &m, &[NodeId(0), NodeId(1)], NodeId(2)).unwrap();
        g.iter()
            .find(|r| r.a == NodeId(0) && r.b == NodeId(1))
            .map_or(0.0, |r| r.gr)
    }

    #[test]
    fn unit_emissivity_gr_is_area_times_f() {
        assert!((gr_ab(1.0, 500) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gold_gold_gr() {
        assert!((gr_ab(0.04, 500) - 8.0e-4).abs() < 1e-18);
    }

    #[test]
    fn perfect_reflector_decouples() {
        assert_eq!(gr_ab(0.0, 500), 0.0);
    }

    #[test]
    fn asymmetric_estimates_are_averaged() {
        let (scene, mut m) = fixture(1.0, 500);
        m.set_hits(side_index(1, Side::Front), side_index(0, Side::Front), 300);
        let g = gr_from_viewfactors::<f64>(&scene, &m, &[NodeId(0), NodeId(1)], NodeId(2)).unwrap();
        let ab = g.iter().find(|r| r.b == NodeId(1)).unwrap().gr;
        assert!((ab - 0.4).abs() < 1e-15);
        // Space couplings take the remainders: 1 - 0.5 (plus the untallied back sides) and 1 - 0.3.
        let a_space = g
            .iter()
            .find(|r| r.a == NodeId(0) && r.b == NodeId(2))
            .unwrap()
            .gr;
        assert!((a_space - (0.5 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn mli_reduces_only_downward_sides() {
        let scene = MeshedScene::build(vec![plate(0.0, 0.9, "s", true)]).unwrap();
        let m = with_mli(&scene, 3, |n| n == "s").unwrap();
        let f = &m.facets()[0];
        assert!((f.back.emissivity - 0.225).abs() < 1e-15);
        assert_eq!(f.front.emissivity, 0.9);
        for n in 0..5 {
            assert!(mli_emissivity(0.9, n + 1) < mli_emissivity(0.9, n));
        }
    }
}
