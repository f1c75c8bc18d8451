//! The reference instrument scene: spacecraft disk, fanned conical shield
//! stack, optical bench, struts, test-volume probe and imaging lens.

use serde::{Deserialize, Serialize};

use super::{
    CoatingPatch, GeometryError, MeshDensity, MeshedScene, Shape, SideProperties, SurfacePrimitive,
    Vec3,
};

/// Node names used by the reference scene.
pub mod nodes {
    pub const SC_EXTERIOR: &str = "sc_exterior";
    pub const BENCH: &str = "bench";
    pub const TEST_VOLUME: &str = "test_volume";

    pub fn shield(k: usize) -> String {
        format!("shield{k}")
    }

    pub fn strut_top(k: usize) -> String {
        format!("strut{k}_top")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShieldFinish {
    /// Space-facing side.
    pub top: SideProperties,
    /// Spacecraft-facing side.
    pub bottom: SideProperties,
}

impl Default for ShieldFinish {
    fn default() -> Self {
        ShieldFinish {
            top: SideProperties { emissivity: 0.90 },
            bottom: SideProperties { emissivity: 0.04 },
        }
    }
}

/// Inner-shield geometry from which the whole stack is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShieldParams {
    /// Opening angle of the innermost shield, degrees.
    pub phi3_deg: f64,
    /// Distance of the innermost shield from the spacecraft surface, m.
    pub d3: f64,
    pub n_shields: usize,
    /// Radius of the flat central part of every shield, m.
    pub inner_radius: f64,
    /// Radial extent of the conical part, m.
    pub radial_extent: f64,
    pub finish: ShieldFinish,
    /// Optional per-shield finishes, outermost first. Missing entries use `finish`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_shield: Vec<ShieldFinish>,
}

impl Default for ShieldParams {
    fn default() -> Self {
        ShieldParams {
            phi3_deg: 20.0,
            d3: 0.20,
            n_shields: 3,
            inner_radius: 0.10,
            radial_extent: 0.35,
            finish: ShieldFinish::default(),
            per_shield: Vec::new(),
        }
    }
}

impl ShieldParams {
    pub fn finish_of(&self, k: usize) -> ShieldFinish {
        self.per_shield.get(k).copied().unwrap_or(self.finish)
    }
}

/// Opening angle and spacecraft distance of one shield.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShieldPlacement {
    pub phi_deg: f64,
    pub d: f64,
}

/// Equipartition of the inner-shield parameters over the stack, ordered
/// from the spacecraft outwards.
///
/// Three shields: (phi3/3, d3/2), (2 phi3/3, 3 d3/4), (phi3, d3).
/// Two shields: (phi3/2, 2 d3/3), (phi3, d3).
pub fn derive_shield_stack(p: &ShieldParams) -> Result<Vec<ShieldPlacement>, GeometryError> {
    let bad = |m: String| Err(GeometryError::InvalidShieldParams(m));
    if !(p.phi3_deg >= 0.0 && p.phi3_deg < 90.0) {
        return bad(format!("phi3 = {} deg must lie in [0, 90)", p.phi3_deg));
    }
    if !(p.d3 > 0.0 && p.d3.is_finite()) {
        return bad(format!("d3 = {} m must be positive", p.d3));
    }
    let fractions: &[(f64, f64)] = match p.n_shields {
        3 => &[(1.0 / 3.0, 1.0 / 2.0), (2.0 / 3.0, 3.0 / 4.0), (1.0, 1.0)],
        2 => &[(1.0 / 2.0, 2.0 / 3.0), (1.0, 1.0)],
        n => return bad(format!("n_shields = {n}, expected 2 or 3")),
    };
    Ok(fractions
        .iter()
        .map(|&(fp, fd)| ShieldPlacement {
            phi_deg: fp * p.phi3_deg,
            d: fd * p.d3,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensLayout {
    /// Edge length of the square lens aperture, m.
    pub size: f64,
    /// Distance from the probe centre to the lens plane, m.
    pub distance: f64,
    pub emissivity: f64,
}

impl Default for LensLayout {
    fn default() -> Self {
        LensLayout {
            size: 0.02,
            distance: 0.04,
            emissivity: 0.90,
        }
    }
}

/// Dimensions and finishes of everything in the reference scene apart from
/// the shields. Values the source design does not pin down (strut placement,
/// probe and lens size) are declared here and meant to be tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneLayout {
    pub spacecraft_radius: f64,
    /// Emissivity of the shaded spacecraft panel (outer MLI layer).
    pub spacecraft_emissivity: f64,
    /// Bench base plate, x by y by thickness, m.
    pub bench_size: [f64; 3],
    /// Height of the bench centre above the spacecraft surface, m.
    pub bench_height: f64,
    pub gold_emissivity: f64,
    pub zerodur_emissivity: f64,
    /// Distance of the strut axes from the instrument axis, m.
    pub strut_radius: f64,
    pub strut_width: f64,
    pub strut_emissivity: f64,
    /// Clearance left between struts and the surfaces they connect, m.
    pub clearance: f64,
    pub probe_radius: f64,
    /// Height of the probe centre above the bench top, m.
    pub probe_height: f64,
    pub lens: Option<LensLayout>,
    pub revolved_mesh: MeshDensity,
    pub flat_mesh: MeshDensity,
    pub probe_mesh: MeshDensity,
}

impl Default for SceneLayout {
    fn default() -> Self {
        SceneLayout {
            spacecraft_radius: 0.7,
            spacecraft_emissivity: 0.85,
            bench_size: [0.2, 0.2, 0.02],
            bench_height: 0.325,
            gold_emissivity: 0.04,
            zerodur_emissivity: 0.90,
            strut_radius: 0.08,
            strut_width: 0.01,
            strut_emissivity: 0.10,
            clearance: 0.001,
            probe_radius: 0.02,
            probe_height: 0.05,
            lens: Some(LensLayout::default()),
            revolved_mesh: MeshDensity::DEFAULT_REVOLVED,
            flat_mesh: MeshDensity::DEFAULT_FLAT,
            probe_mesh: MeshDensity(12, 6),
        }
    }
}

impl SceneLayout {
    pub fn bench_bottom(&self) -> f64 {
        self.bench_height - 0.5 * self.bench_size[2]
    }

    pub fn bench_top(&self) -> f64 {
        self.bench_height + 0.5 * self.bench_size[2]
    }

    pub fn probe_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.bench_top() + self.probe_height)
    }

    /// Distance from the axis to the farthest bench corner.
    pub fn bench_half_diagonal(&self) -> f64 {
        0.5 * self.bench_size[0].hypot(self.bench_size[1])
    }
}

fn side(e: f64) -> Result<SideProperties, GeometryError> {
    SideProperties::new(e)
}

/// Primitives of the reference scene. See [`build_reference_scene`].
pub fn reference_primitives(
    p: &ShieldParams,
    coating_fraction: f64,
    layout: &SceneLayout,
) -> Result<Vec<SurfacePrimitive>, GeometryError> {
    if !(0.0..=1.0).contains(&coating_fraction) {
        return Err(GeometryError::InvalidCoatingFraction(coating_fraction));
    }
    let stack = derive_shield_stack(p)?;
    if !(p.inner_radius > 0.0 && p.radial_extent > 0.0) {
        return Err(GeometryError::InvalidShieldParams(
            "shield inner radius and radial extent must be positive".into(),
        ));
    }
    let bottom = layout.bench_bottom();
    let r_bench = layout.bench_half_diagonal();
    for (k, s) in stack.iter().enumerate() {
        let tan = s.phi_deg.to_radians().tan();
        let h_at_bench = s.d + (r_bench - p.inner_radius).max(0.0) * tan;
        if h_at_bench + 2.0 * layout.clearance >= bottom {
            return Err(GeometryError::ShieldCollision {
                shield: k + 1,
                phi_deg: s.phi_deg,
                d: s.d,
            });
        }
    }

    let mut prims = Vec::new();
    let revolved = layout.revolved_mesh;

    prims.push(
        SurfacePrimitive::new(
            Shape::Disk {
                center: Vec3::ZERO,
                radius: layout.spacecraft_radius,
                normal: Vec3::Z,
            },
            side(layout.spacecraft_emissivity)?,
            side(0.0)?,
            nodes::SC_EXTERIOR,
        )
        .with_mesh(revolved)
        .with_tag("spacecraft"),
    );

    for (k, s) in stack.iter().enumerate() {
        let fin = p.finish_of(k);
        let name = nodes::shield(k + 1);
        // Central disk faces up, so its front is the space-facing side; the
        // cone's front faces away from the axis, i.e. towards the spacecraft.
        prims.push(
            SurfacePrimitive::new(
                Shape::Disk {
                    center: Vec3::new(0.0, 0.0, s.d),
                    radius: p.inner_radius,
                    normal: Vec3::Z,
                },
                fin.top,
                fin.bottom,
                &name,
            )
            .with_mesh(revolved)
            .with_tag(&format!("{name}_centre")),
        );
        prims.push(
            SurfacePrimitive::new(
                Shape::ConeFrustum {
                    origin: Vec3::new(0.0, 0.0, s.d),
                    axis: Vec3::Z,
                    r_lower: p.inner_radius,
                    r_upper: p.inner_radius + p.radial_extent,
                    height: p.radial_extent * s.phi_deg.to_radians().tan(),
                },
                fin.bottom,
                fin.top,
                &name,
            )
            .with_mesh(revolved)
            .with_tag(&format!("{name}_cone")),
        );
    }

    let [bx, by, bz] = layout.bench_size;
    let top = layout.bench_top();
    let gold = side(layout.gold_emissivity)?;
    let bare = side(layout.zerodur_emissivity)?;
    let flat = layout.flat_mesh;
    let (x0, y0) = (-0.5 * bx, -0.5 * by);
    let bench_faces = [
        (
            "bench_top",
            Vec3::new(x0, y0, top),
            Vec3::new(bx, 0.0, 0.0),
            Vec3::new(0.0, by, 0.0),
        ),
        (
            "bench_bottom",
            Vec3::new(x0, y0, bottom),
            Vec3::new(0.0, by, 0.0),
            Vec3::new(bx, 0.0, 0.0),
        ),
        (
            "bench_px",
            Vec3::new(-x0, y0, bottom),
            Vec3::new(0.0, by, 0.0),
            Vec3::new(0.0, 0.0, bz),
        ),
        (
            "bench_nx",
            Vec3::new(x0, y0, bottom),
            Vec3::new(0.0, 0.0, bz),
            Vec3::new(0.0, by, 0.0),
        ),
        (
            "bench_py",
            Vec3::new(x0, -y0, bottom),
            Vec3::new(0.0, 0.0, bz),
            Vec3::new(bx, 0.0, 0.0),
        ),
        (
            "bench_ny",
            Vec3::new(x0, y0, bottom),
            Vec3::new(bx, 0.0, 0.0),
            Vec3::new(0.0, 0.0, bz),
        ),
    ];
    for (tag, corner, e1, e2) in bench_faces {
        let mut prim = SurfacePrimitive::new(
            Shape::Rectangle {
                corner,
                edge1: e1,
                edge2: e2,
            },
            gold,
            gold,
            nodes::BENCH,
        )
        .with_mesh(flat)
        .with_tag(tag);
        if tag == "bench_top" {
            prim.front = bare;
            prim.back = bare;
            prim = prim.with_coating(CoatingPatch {
                fraction: coating_fraction,
                center: Vec3::new(0.0, 0.0, top),
                coated: gold,
            });
        }
        prims.push(prim);
    }

    let strut_base = stack.last().map(|s| s.d).unwrap() + layout.clearance;
    let strut_len = bottom - layout.clearance - strut_base;
    let w = layout.strut_width;
    let strut_side = side(layout.strut_emissivity)?;
    for k in 0..3 {
        let az = (90.0 + 120.0 * k as f64).to_radians();
        let (cx, cy) = (
            layout.strut_radius * az.cos(),
            layout.strut_radius * az.sin(),
        );
        prims.push(
            SurfacePrimitive::new(
                Shape::Box {
                    corner: Vec3::new(cx - 0.5 * w, cy - 0.5 * w, strut_base),
                    edges: [
                        Vec3::new(w, 0.0, 0.0),
                        Vec3::new(0.0, w, 0.0),
                        Vec3::new(0.0, 0.0, strut_len),
                    ],
                },
                strut_side,
                strut_side,
                &nodes::strut_top(k + 1),
            )
            .with_mesh(MeshDensity(1, 1))
            .with_tag(&format!("strut{}", k + 1)),
        );
    }

    let probe = layout.probe_center();
    prims.push(
        SurfacePrimitive::new(
            Shape::SphereProbe {
                center: probe,
                radius: layout.probe_radius,
            },
            side(1.0)?,
            side(1.0)?,
            nodes::TEST_VOLUME,
        )
        .with_mesh(layout.probe_mesh)
        .with_tag("probe"),
    );

    if let Some(lens) = &layout.lens {
        let s = lens.size;
        let e1 = Vec3::new(0.0, 0.0, s);
        let e2 = Vec3::new(0.0, s, 0.0);
        let centre = probe + Vec3::new(lens.distance, 0.0, 0.0);
        prims.push(
            SurfacePrimitive::new(
                Shape::Rectangle {
                    corner: centre - 0.5 * (e1 + e2),
                    edge1: e1,
                    edge2: e2,
                },
                side(lens.emissivity)?,
                side(lens.emissivity)?,
                nodes::BENCH,
            )
            .with_mesh(MeshDensity(1, 1))
            .with_tag("lens"),
        );
    }
    Ok(prims)
}

/// Builds the meshed reference scene for the given shield stack and bench
/// coating fraction.
pub fn build_reference_scene(
    p: &ShieldParams,
    coating_fraction: f64,
    layout: &SceneLayout,
) -> Result<MeshedScene, GeometryError> {
    MeshedScene::build(reference_primitives(p, coating_fraction, layout)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placements(phi3: f64, d3: f64, n: usize) -> Vec<(f64, f64)> {
        let p = ShieldParams {
            phi3_deg: phi3,
            d3,
            n_shields: n,
            ..Default::default()
        };
        derive_shield_stack(&p)
            .unwrap()
            .iter()
            .map(|s| (s.phi_deg, s.d))
            .collect()
    }

    fn close(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| (x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12)
    }

    #[test]
    fn equipartition_three_shields() {
        assert!(close(
            &placements(20.0, 0.20, 3),
            &[(20.0 / 3.0, 0.10), (40.0 / 3.0, 0.15), (20.0, 0.20)]
        ));
        assert!(close(
            &placements(0.0, 0.20, 3),
            &[(0.0, 0.10), (0.0, 0.15), (0.0, 0.20)]
        ));
        assert!(close(
            &placements(30.0, 0.12, 3),
            &[(10.0, 0.06), (20.0, 0.09), (30.0, 0.12)]
        ));
    }

    #[test]
    fn equipartition_two_shields() {
        assert!(close(
            &placements(20.0, 0.18, 2),
            &[(10.0, 0.12), (20.0, 0.18)]
        ));
    }

    #[test]
    fn invalid_stack_parameters() {
        for (phi, d, n) in [
            (90.0, 0.2, 3),
            (95.0, 0.2, 3),
            (-1.0, 0.2, 3),
            (20.0, 0.0, 3),
            (20.0, 0.2, 4),
        ] {
            let p = ShieldParams {
                phi3_deg: phi,
                d3: d,
                n_shields: n,
                ..Default::default()
            };
            assert!(derive_shield_stack(&p).is_err(), "{phi} {d} {n}");
        }
    }

    #[test]
    fn colliding_stack_is_a_geometry_error() {
        let p = ShieldParams {
            d3: 0.32,
            ..Default::default()
        };
        assert!(matches!(
            build_reference_scene(&p, 1.0, &SceneLayout::default()),
            Err(GeometryError::ShieldCollision { shield: 3, .. })
        ));
    }
}
